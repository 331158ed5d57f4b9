"""Staged human-in-the-loop training for a predator-prey pursuit gridworld.

A single learning predator is taught in four stages: human demonstrations
(behavioral cloning plus a contrastive reward model), human interventions
near catastrophic states, sparse evaluative feedback, and finally autonomous
reinforcement learning driven by the learned reward model. Configurable
criteria decide when to move from one stage to the next. A scripted oracle
makes every stage runnable headlessly; a WebSocket session service puts a
real human in the loop.
"""

__version__ = "0.1.0"
