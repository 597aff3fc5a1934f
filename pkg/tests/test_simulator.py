import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eonvideo import simulator
from eonvideo.rsa import NON_VIDEO, VIDEO, ConnectionRequest
from eonvideo.simulator import (
    ConfigError,
    ScenarioConfig,
    blocking_probability,
    generate_traffic,
    run_load,
    run_scenario,
)
from eonvideo.topology import load_topology

SMALL = ScenarioConfig(total_requests=3000, warmup_requests=300)


def traffic(config, load=100.0, seed=0):
    return generate_traffic(config, np.random.default_rng(seed), tuple("abcdef"), load)


def test_arrival_rate_scales_gaps():
    cfg = ScenarioConfig(total_requests=10_000, warmup_requests=0)
    gaps = {}
    for load in (100.0, 200.0):
        t = np.array([r.arrival_time for r in traffic(cfg, load)])
        gaps[load] = np.diff(np.concatenate([[0.0], t]))
    se = gaps[200.0].std(ddof=1) / np.sqrt(len(gaps[200.0]))
    assert abs(gaps[200.0].mean() - gaps[100.0].mean() / 2) <= 3 * se
    assert abs(gaps[100.0].mean() - 1 / 100) <= 3 * gaps[100.0].std(ddof=1) / np.sqrt(10_000)


def test_request_mix():
    reqs = traffic(ScenarioConfig(total_requests=10_000, warmup_requests=0))
    slots = np.array([r.slots for r in reqs])
    assert slots.min() == 1 and slots.max() == 10
    assert abs(slots.mean() - 5.5) <= 3 * slots.std(ddof=1) / np.sqrt(len(slots))
    assert all(r.src != r.dst for r in reqs)
    share = np.mean([r.kind == VIDEO for r in reqs])
    assert abs(share - 0.8) <= 3 * np.sqrt(0.8 * 0.2 / len(reqs))
    pairs = {(r.src, r.dst) for r in reqs}
    assert len(pairs) == 30
    hold = np.array([r.holding_time for r in reqs])
    assert abs(hold.mean() - 1.0) <= 3 * hold.std(ddof=1) / np.sqrt(len(hold))


def test_no_video_when_probability_zero():
    assert all(r.kind == NON_VIDEO for r in traffic(ScenarioConfig(p_video=0.0)))


def test_blocking_probability_examples():
    assert blocking_probability([(2, False), (3, False), (5, True)]) == 0.5
    assert blocking_probability([(2, False), (3, False)]) == 0.0
    assert blocking_probability([(2, True), (3, True)]) == 1.0
    with pytest.raises(ValueError):
        blocking_probability([])


@given(st.lists(st.tuples(st.integers(1, 10), st.booleans()), min_size=1))
def test_blocking_probability_matches_weighted_ratio(records):
    n = np.array([s for s, _ in records], dtype=float)
    b = np.array([x for _, x in records], dtype=bool)
    assert blocking_probability(records) == pytest.approx(float(np.dot(n, b) / n.sum()))


@pytest.mark.parametrize("changes", [
    dict(p_video=1.5), dict(total_requests=10, warmup_requests=10), dict(load_points=()),
    dict(load_points=(100.0, -1.0)), dict(slot_demand=(0, 3)), dict(slot_demand=(1, 500)),
    dict(k=0), dict(departure_rate=0.0),
])
def test_config_errors(changes):
    with pytest.raises(ConfigError):
        ScenarioConfig(**changes).check()


def test_video_traffic_needs_an_estimator():
    with pytest.raises(ConfigError):
        run_load(SMALL, 100.0)


def test_non_video_run_has_flagged_empty_video_class():
    r = run_load(SMALL.with_(p_video=0.0), 300.0)
    video = r.per_kind[VIDEO].summary()
    assert video["zero_sample"] and video["bp"] == 0.0 and video["n_offered"] == 0
    assert not r.per_kind[NON_VIDEO].summary()["zero_sample"]


def test_same_seed_same_report(estimator):
    a = run_scenario(SMALL.with_(load_points=(200.0,)), estimator)
    b = run_scenario(SMALL.with_(load_points=(200.0,)), estimator)
    dump = lambda report: json.dumps([r.summary() for r in report.results], sort_keys=True)  # noqa: E731
    assert dump(a) == dump(b)
    c = run_scenario(SMALL.with_(load_points=(200.0,), seed=2), estimator)
    assert dump(a) != dump(c)


def test_blocking_rises_with_load(estimator):
    low = run_load(SMALL, 100.0, estimator=estimator)
    high = run_load(SMALL, 600.0, estimator=estimator)
    assert high.overall.bp > low.overall.bp
    for r in (low, high):
        for s in list(r.per_kind.values()) + [r.overall]:
            assert 0.0 <= s.bp <= 1.0
        assert r.overall.n_offered == 2700


def test_mean_osnr_falls_with_load(estimator):
    # stated expectation: busier networks push traffic onto longer, noisier routes
    # (see README, known deviations)
    low = run_load(SMALL, 100.0, estimator=estimator)
    high = run_load(SMALL, 600.0, estimator=estimator)
    assert np.mean(high.overall.osnr_db) < np.mean(low.overall.osnr_db)


def test_no_violations_and_conservation_throughout(estimator):
    seen = []

    def check(outcome, grid):
        live = sum(a.size * len(a.links) for a in grid.assignments.values())
        seen.append(live == grid.occupied_count())

    r = run_load(SMALL.with_(total_requests=1500, warmup_requests=150, validate_every=1), 400.0,
                 estimator=estimator, on_outcome=check)
    assert r.violations == 0 and all(seen) and len(seen) == 1500


def test_departure_before_arrival_on_equal_timestamps(monkeypatch):
    topo = load_topology({"nodes": ["s", "d"], "links": [{"id": "l", "a": "s", "b": "d", "length_km": 100}]})
    reqs = [
        ConnectionRequest(0, "s", "d", 4, NON_VIDEO, arrival_time=1.0, holding_time=1.0),
        ConnectionRequest(1, "s", "d", 4, NON_VIDEO, arrival_time=2.0, holding_time=1.0),
    ]
    monkeypatch.setattr(simulator, "generate_traffic", lambda *a: reqs)
    cfg = ScenarioConfig(slot_count=4, p_video=0.0, total_requests=2, warmup_requests=0, load_points=(1.0,))
    r = run_load(cfg, 1.0, topo=topo)
    assert r.overall.blocked_slots == 0 and r.overall.n_offered == 2
