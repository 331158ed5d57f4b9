"""Exception hierarchy shared across the package."""


class PursuitCoachError(Exception):
    """Base class for all package errors."""


class ConfigError(PursuitCoachError):
    """Invalid configuration (bad dimensions, impossible spawns, unknown keys)."""


class UsageError(PursuitCoachError):
    """An operation was called outside its contract (terminal state, empty batch)."""


class NumericalError(PursuitCoachError):
    """Non-finite values reached a numeric operation."""


class CheckpointError(PursuitCoachError):
    """Checkpoint file is missing, corrupt, or belongs to a different config."""


class ReplayError(PursuitCoachError):
    """Session log is truncated or belongs to a different config."""


class EpisodeAborted(PursuitCoachError):
    """The live human source went away mid-episode; the episode is discarded."""
