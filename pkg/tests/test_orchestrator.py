import json

import pytest

from pursuitcoach import orchestrator as O
from pursuitcoach.config import config_from_dict
from pursuitcoach.errors import CheckpointError
from pursuitcoach.human import AdvanceStage, HumanSource
from tests.conftest import tiny_cycle_dict


def run(config, seed=1, **kw):
    oracle = O.make_oracle(config, seed)
    return O.run_cycle(config, oracle, seed, **kw)


def test_budget_episode_counts_exact(tiny_config):
    report = run(tiny_config)
    assert report.stage_episode_counts == {
        "demonstration": 2, "intervention": 2, "evaluation": 2, "rl": 2,
    }
    assert [r.stage for r in report.records] == (
        ["demonstration"] * 2 + ["intervention"] * 2 + ["evaluation"] * 2 + ["rl"] * 2
    )
    assert report.completed
    assert all(reason == "budget" for reason in report.switch_reasons.values())


class AlwaysAdvance(HumanSource):
    def __init__(self, inner):
        self.inner = inner

    def begin_episode(self, stage, episode):
        self.inner.begin_episode(stage, episode)

    def poll(self, ctx):
        events = self.inner.poll(ctx)
        if ctx.phase == "decide" and ctx.step == 0:
            events = events + [AdvanceStage()]
        return events

    def export_state(self):
        return self.inner.export_state()

    def import_state(self, state):
        self.inner.import_state(state)


def test_manual_advance_with_floor_one():
    config = config_from_dict(tiny_cycle_dict())
    source = AlwaysAdvance(O.make_oracle(config, 1))
    report = O.run_cycle(config, source, 1)
    assert all(n == 1 for n in report.stage_episode_counts.values())
    assert all(reason == "manual" for reason in report.switch_reasons.values())


def test_cap_forces_advance():
    d = tiny_cycle_dict()
    # a performance bar that can never be met
    d["stages"]["demonstration"] = {
        "criterion": {"kind": "performance", "threshold": 99.0, "window": 2},
        "min_episodes": 1, "cap": 3,
    }
    config = config_from_dict(d)
    report = run(config)
    assert report.stage_episode_counts["demonstration"] == 3
    assert report.switch_reasons["demonstration"] == "cap"


def test_forward_only_stage_order(tiny_config):
    report = run(tiny_config)
    order = ["demonstration", "intervention", "evaluation", "rl"]
    seen = [r.stage for r in report.records]
    assert seen == sorted(seen, key=order.index)


def test_identical_config_and_seed_identical_csv(tmp_path, tiny_config):
    paths = []
    for i in range(2):
        report = run(tiny_config)
        p = tmp_path / f"metrics{i}.csv"
        O.write_metrics(report.records, str(p))
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_checkpoint_resume_matches_uninterrupted(tmp_path, tiny_config):
    ck = str(tmp_path / "state.json")

    full = run(tiny_config, seed=2)

    oracle = O.make_oracle(tiny_config, 2)
    first = O.run_cycle(tiny_config, oracle, 2, max_total_episodes=4, checkpoint_path=ck)
    assert not first.completed

    oracle2 = O.make_oracle(tiny_config, 2)
    state = O.restore(ck, tiny_config, human_source=oracle2)
    rest = O.run_cycle(tiny_config, oracle2, 2, state=state)

    combined = first.records + rest.records
    assert len(combined) == len(full.records)
    for a, b in zip(combined, full.records):
        assert (a.stage, a.episode, a.score, a.mean_abs_td_error, a.actor_loss) == (
            b.stage, b.episode, b.score, b.mean_abs_td_error, b.actor_loss
        )
    assert rest.final_eval_score == full.final_eval_score


def test_checkpoint_rewrite_is_byte_identical(tmp_path, tiny_config):
    ck = str(tmp_path / "state.json")
    oracle = O.make_oracle(tiny_config, 1)
    O.run_cycle(tiny_config, oracle, 1, max_total_episodes=3, checkpoint_path=ck)
    blob = (tmp_path / "state.json").read_bytes()

    oracle2 = O.make_oracle(tiny_config, 1)
    state = O.restore(ck, tiny_config, human_source=oracle2)
    O.checkpoint(state, str(tmp_path / "again.json"), human_source=oracle2)
    assert (tmp_path / "again.json").read_bytes() == blob


def test_restore_rejects_mutated_config(tmp_path, tiny_config):
    ck = str(tmp_path / "state.json")
    oracle = O.make_oracle(tiny_config, 1)
    O.run_cycle(tiny_config, oracle, 1, max_total_episodes=2, checkpoint_path=ck)
    mutated = config_from_dict(tiny_cycle_dict(seeds=[1], eval_episodes=5))
    with pytest.raises(CheckpointError):
        O.restore(ck, mutated)


def test_restore_rejects_corrupt_file(tmp_path, tiny_config):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(CheckpointError):
        O.restore(str(p), tiny_config)
    p2 = tmp_path / "wrong_version.json"
    p2.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(CheckpointError):
        O.restore(str(p2), tiny_config)


def test_write_metrics_header_only(tmp_path):
    p = tmp_path / "m.csv"
    O.write_metrics([], str(p))
    lines = p.read_text().splitlines()
    assert lines == [",".join(O.CSV_COLUMNS)]


def test_write_metrics_row_count(tmp_path, tiny_config):
    report = run(tiny_config)
    p = tmp_path / "m.csv"
    O.write_metrics(report.records[:3], str(p))
    assert len(p.read_text().splitlines()) == 4


def test_metrics_roundtrip_full_precision(tmp_path, tiny_config):
    report = run(tiny_config)
    p = tmp_path / "m.csv"
    O.write_metrics(report.records, str(p))
    lines = p.read_text().splitlines()
    header = lines[0].split(",")
    for line, record in zip(lines[1:], report.records):
        row = dict(zip(header, line.split(",")))
        assert float(row["score"]) == record.score
        assert float(row["mean_abs_td_error"]) == record.mean_abs_td_error
        assert float(row["actor_loss"]) == record.actor_loss
        assert int(row["episode"]) == record.episode
        assert int(row["hazard_hit"]) == int(record.hazard_hit)


def test_greedy_eval_deterministic(tiny_config):
    a = run(tiny_config, seed=3)
    b = run(tiny_config, seed=3)
    assert a.final_eval_scores == b.final_eval_scores


def test_summary_written(tmp_path, tiny_config):
    report = run(tiny_config)
    p = tmp_path / "summary.json"
    O.write_summary([report], str(p), extra={"mode": "full"})
    doc = json.loads(p.read_text())
    assert doc["mode"] == "full"
    assert doc["runs"][0]["seed"] == report.seed
    assert doc["runs"][0]["completed"] is True


def test_warm_start_carries_models(tiny_config):
    first = run(tiny_config, seed=4)
    models = (first.state.actor, first.state.critic, first.state.reward)
    state = O.init_cycle_state(tiny_config, 5, initial_models=models)
    assert state.actor is models[0]
    assert len(state.dataset) == 0  # the dataset never carries over
