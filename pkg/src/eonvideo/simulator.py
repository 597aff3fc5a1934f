"""Event-driven dynamic-traffic simulation and blocking statistics."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .qot import FiberParams
from .rsa import (
    CONGESTION,
    NON_VIDEO,
    VIDEO,
    Blocked,
    ConnectionRequest,
    CostWeights,
    Established,
    RsaEngine,
)
from .spectrum import SpectrumGrid, release, validate_assignment
from .topology import NetworkTopology, load_topology
from .video import QualityEstimator

KINDS = (VIDEO, NON_VIDEO)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    topology: str = "nsfnet"
    slot_count: int = 128
    departure_rate: float = 1.0  # mu, 1/s; arrival rate is load * mu
    load_points: tuple[float, ...] = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0)
    p_video: float = 0.8
    slot_demand: tuple[int, int] = (1, 10)  # uniform, inclusive
    k: int = 3
    weights: CostWeights = CostWeights()
    fiber: FiberParams = FiberParams()
    estimator: str = "default"
    u_th: float = 20.0
    total_requests: int = 10_000
    warmup_requests: int = 1_000
    seed: int = 1
    gate_fallback: bool = False
    # audit constraints every this many events (0 = never)
    validate_every: int = 0

    def check(self) -> None:
        problems = []
        if not 0 <= self.p_video <= 1:
            problems.append("p_video must lie in [0, 1]")
        if not self.total_requests > self.warmup_requests >= 0:
            problems.append("need total_requests > warmup_requests >= 0")
        if not self.load_points or any(load <= 0 for load in self.load_points):
            problems.append("load points must be positive")
        if self.departure_rate <= 0:
            problems.append("departure_rate must be positive")
        lo, hi = self.slot_demand
        if not 1 <= lo <= hi <= self.slot_count:
            problems.append(f"slot demand range {self.slot_demand} must lie within [1, {self.slot_count}]")
        if self.k < 1:
            problems.append("k must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def generate_traffic(
    config: ScenarioConfig, rng: np.random.Generator, nodes: Sequence[str], load: float
) -> list[ConnectionRequest]:
    """Poisson arrivals at rate ``load * mu`` with exponential holding times."""
    n = config.total_requests
    lam = load * config.departure_rate
    gaps = rng.exponential(1 / lam, n)
    holding = rng.exponential(1 / config.departure_rate, n)
    src = rng.integers(0, len(nodes), n)
    # second endpoint drawn among the other nodes: uniform over ordered pairs
    dst = (src + rng.integers(1, len(nodes), n)) % len(nodes)
    lo, hi = config.slot_demand
    slots = rng.integers(lo, hi + 1, n)
    video = rng.random(n) < config.p_video
    times = np.cumsum(gaps)
    return [
        ConnectionRequest(
            id=i,
            src=nodes[src[i]],
            dst=nodes[dst[i]],
            slots=int(slots[i]),
            kind=VIDEO if video[i] else NON_VIDEO,
            arrival_time=float(times[i]),
            holding_time=float(holding[i]),
            u_th=config.u_th,
        )
        for i in range(n)
    ]


def blocking_probability(records: Iterable[tuple[int, bool]]) -> float:
    """Slot-weighted share of blocked demand from (slots, blocked?) records."""
    total = blocked = 0
    for slots, was_blocked in records:
        total += slots
        if was_blocked:
            blocked += slots
    if total == 0:
        raise ValueError("no requests to compute a blocking probability from")
    return blocked / total


@dataclass
class KindStats:
    n_offered: int = 0
    offered_slots: int = 0
    blocked_slots: int = 0
    n_blocked_congestion: int = 0
    n_blocked_quality: int = 0
    osnr_db: list = field(default_factory=list)
    dfr: list = field(default_factory=list)
    psnr: list = field(default_factory=list)

    @property
    def bp(self) -> float:
        return self.blocked_slots / self.offered_slots if self.offered_slots else 0.0

    @property
    def empty(self) -> bool:
        return self.offered_slots == 0

    @staticmethod
    def _mean(values) -> float:
        return float(np.mean(values)) if values else float("nan")

    def summary(self) -> dict:
        return {
            "bp": self.bp,
            "mean_osnr_db": self._mean(self.osnr_db),
            "mean_dfr": self._mean(self.dfr),
            "mean_psnr": self._mean(self.psnr),
            "n_offered": self.n_offered,
            "n_blocked_congestion": self.n_blocked_congestion,
            "n_blocked_quality": self.n_blocked_quality,
            "zero_sample": self.empty,
        }


@dataclass
class LoadResult:
    load: float
    seed: int
    per_kind: dict[str, KindStats]
    overall: KindStats
    violations: int = 0
    events: int = 0

    def summary(self) -> dict:
        return {
            "load_erlang": self.load,
            "seed": self.seed,
            "overall": self.overall.summary(),
            "kinds": {k: s.summary() for k, s in self.per_kind.items()},
            "violations": self.violations,
        }


@dataclass
class MetricsReport:
    topology: str
    results: list[LoadResult]

    def by_load(self) -> dict[float, LoadResult]:
        return {r.load: r for r in self.results}


def _record(stats: KindStats, outcome) -> None:
    req = outcome.request
    stats.n_offered += 1
    stats.offered_slots += req.slots
    if isinstance(outcome, Blocked):
        stats.blocked_slots += req.slots
        if outcome.reason == CONGESTION:
            stats.n_blocked_congestion += 1
        else:
            stats.n_blocked_quality += 1
        return
    q = outcome.cost.quality
    stats.osnr_db.append(q.osnr_db)
    if q.dfr is not None:
        stats.dfr.append(q.dfr)
        stats.psnr.append(q.psnr)


def _audit(grid: SpectrumGrid) -> int:
    bad = len(validate_assignment(grid))
    live_slots = sum(a.size * len(a.links) for a in grid.assignments.values())
    if live_slots != grid.occupied_count():
        bad += 1
    return bad


def run_load(
    config: ScenarioConfig,
    load: float,
    topo: Optional[NetworkTopology] = None,
    estimator: Optional[QualityEstimator] = None,
    on_outcome=None,
) -> LoadResult:
    """Simulate one load point; arrivals are served in time order, departures first on ties."""
    topo = topo or load_topology(config.topology)
    if estimator is None and config.p_video > 0:
        raise ConfigError("video traffic needs a quality estimator")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, int(round(load * 1000))]))
    requests = generate_traffic(config, rng, topo.nodes, load)
    grid = SpectrumGrid.for_topology(topo, config.slot_count)
    engine = RsaEngine(topo, config.fiber, estimator, config.weights, config.k, config.gate_fallback)
    per_kind = {k: KindStats() for k in KINDS}
    overall = KindStats()
    departures: list[tuple[float, int]] = []
    violations = 0
    events = 0

    def tick():
        nonlocal violations, events
        events += 1
        if config.validate_every and events % config.validate_every == 0:
            violations += _audit(grid)

    for req in requests:
        while departures and departures[0][0] <= req.arrival_time:
            _, rid = heapq.heappop(departures)
            release(grid, rid)
            tick()
        outcome = engine.serve(grid, req)
        if isinstance(outcome, Established):
            heapq.heappush(departures, (req.arrival_time + req.holding_time, req.id))
        if on_outcome is not None:
            on_outcome(outcome, grid)
        if req.id >= config.warmup_requests:
            _record(per_kind[req.kind], outcome)
            _record(overall, outcome)
        tick()
    while departures:
        _, rid = heapq.heappop(departures)
        release(grid, rid)
        tick()
    if config.validate_every:
        violations += _audit(grid)
    return LoadResult(load, config.seed, per_kind, overall, violations, events)


def run_scenario(config: ScenarioConfig, estimator: Optional[QualityEstimator] = None) -> MetricsReport:
    config.check()
    topo = load_topology(config.topology)
    return MetricsReport(
        topology=topo.name,
        results=[run_load(config, load, topo, estimator) for load in config.load_points],
    )


CSV_COLUMNS = (
    "topology", "seed", "load_erlang", "kind", "bp", "mean_osnr_db", "mean_dfr", "mean_psnr",
    "n_offered", "n_blocked_congestion", "n_blocked_quality",
)


def csv_rows(topology: str, result: LoadResult) -> list[dict]:
    rows = []
    for kind in KINDS:
        s = result.per_kind[kind].summary()
        rows.append(
            {
                "topology": topology,
                "seed": result.seed,
                "load_erlang": result.load,
                "kind": kind,
                **{c: s[c] for c in CSV_COLUMNS[4:]},
            }
        )
    return rows
