"""Video-aware routing and spectrum assignment.

Every (path, block) candidate gets a cost ``alpha * F_network + beta * F_video``.
F_network counts cuts and normalised misalignment; F_video is log10(1/U) of the
utility predicted from the path's OSNR. The cheapest candidate wins, and a video
request is rejected if that winner misses its utility threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import qot
from .qot import FiberParams
from .spectrum import (
    FREE,
    SpectrumBlock,
    SpectrumGrid,
    allocate,
    candidate_starts,
    count_cuts,
    cuts_for_starts,
    misalignment_delta,
    misalignment_for_starts,
)
from .topology import NetworkTopology, RoutePath, k_shortest_paths, neighbor_links
from .video import QualityEstimator, estimate, utility, video_cost

VIDEO = "video"
NON_VIDEO = "non-video"
CONGESTION = "congestion"
QUALITY = "quality"


@dataclass(frozen=True)
class ConnectionRequest:
    id: int
    src: str
    dst: str
    slots: int
    kind: str = NON_VIDEO
    arrival_time: float = 0.0
    holding_time: float = 1.0
    u_th: float = 20.0

    def __post_init__(self):
        if self.slots < 1:
            raise ValueError("a request needs at least one slot")
        if self.holding_time <= 0:
            raise ValueError("holding_time must be positive")
        if self.src == self.dst:
            raise ValueError("source and destination must differ")
        if self.kind not in (VIDEO, NON_VIDEO):
            raise ValueError(f"unknown request kind {self.kind!r}")

    @property
    def is_video(self) -> bool:
        return self.kind == VIDEO


@dataclass(frozen=True)
class CostWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("weights must be non-negative and not both zero")


@dataclass(frozen=True)
class PathQuality:
    osnr_db: float
    ber: Optional[float] = None
    psnr: Optional[float] = None
    dfr: Optional[float] = None
    utility: Optional[float] = None
    f_video: Optional[float] = None


@dataclass(frozen=True)
class CostBreakdown:
    n_cuts: int
    n_misalign: int
    n_neighbors: int
    f_network: float
    f_cost: float
    quality: PathQuality

    @property
    def osnr_db(self) -> float:
        return self.quality.osnr_db

    @property
    def f_video(self) -> Optional[float]:
        return self.quality.f_video

    @property
    def utility(self) -> Optional[float]:
        return self.quality.utility


@dataclass(frozen=True)
class Established:
    request: ConnectionRequest
    path: RoutePath
    block: SpectrumBlock
    cost: CostBreakdown


@dataclass(frozen=True)
class Blocked:
    request: ConnectionRequest
    reason: str
    # the rejected winner, when the video gate refused it
    path: Optional[RoutePath] = None
    block: Optional[SpectrumBlock] = None
    cost: Optional[CostBreakdown] = None


RsaOutcome = Union[Established, Blocked]


def network_cost(n_cuts: int, n_misalign: int, slots: int, n_neighbors: int) -> float:
    if n_neighbors == 0:
        return float(n_cuts)
    return n_cuts + n_misalign / (slots * n_neighbors)


def path_quality(
    params: FiberParams, estimator: Optional[QualityEstimator], path: RoutePath, video: bool
) -> PathQuality:
    osnr_db = qot.path_osnr(params, path)
    if not video:
        return PathQuality(osnr_db)
    if estimator is None:
        raise ValueError("video requests need a quality estimator")
    osnr_app = qot.apparent_osnr(qot.db_to_lin(osnr_db), params)
    ber = qot.osnr_to_ber(osnr_app, params.modulation)
    psnr, dfr = estimate(estimator, ber)
    u = utility(psnr, dfr)
    return PathQuality(osnr_db, ber, psnr, dfr, u, video_cost(u))


def total_cost(f_network: float, quality: PathQuality, weights: CostWeights, video: bool) -> float:
    if not video:
        return weights.alpha * f_network
    return weights.alpha * f_network + weights.beta * quality.f_video


def evaluate_candidate(
    grid: SpectrumGrid,
    topo: NetworkTopology,
    params: FiberParams,
    estimator: Optional[QualityEstimator],
    request: ConnectionRequest,
    path: RoutePath,
    block: SpectrumBlock,
    weights: CostWeights,
) -> CostBreakdown:
    n_c = count_cuts(grid, path, block)
    n_m = misalignment_delta(grid, topo, path, block)
    n_nl = len(neighbor_links(topo, path))
    f_net = network_cost(n_c, n_m, request.slots, n_nl)
    quality = path_quality(params, estimator, path, request.is_video)
    return CostBreakdown(n_c, n_m, n_nl, f_net, total_cost(f_net, quality, weights, request.is_video), quality)


def _gate(request: ConnectionRequest, cost: CostBreakdown) -> bool:
    return not request.is_video or cost.utility >= request.u_th


class RsaEngine:
    """Serves requests against one topology, caching routes and per-path quality."""

    def __init__(
        self,
        topo: NetworkTopology,
        params: FiberParams,
        estimator: Optional[QualityEstimator],
        weights: CostWeights = CostWeights(),
        k: int = 3,
        gate_fallback: bool = False,
    ):
        self.topo = topo
        self.params = params
        self.estimator = estimator
        self.weights = weights
        self.k = k
        # non-normative: retry the next-cheapest candidate when the winner fails the video gate
        self.gate_fallback = gate_fallback
        self._routes: dict[tuple[str, str], list] = {}
        self._quality: dict[tuple[tuple[str, ...], bool], PathQuality] = {}

    def routes(self, grid: SpectrumGrid, src: str, dst: str):
        key = (src, dst)
        if key not in self._routes:
            entries = []
            for path in k_shortest_paths(self.topo, src, dst, self.k):
                pairs = neighbor_links(self.topo, path)
                entries.append((path, grid.rows(path), [grid.row[n] for _, n in pairs], len(pairs)))
            self._routes[key] = entries
        return self._routes[key]

    def quality(self, path: RoutePath, video: bool) -> PathQuality:
        key = (path.nodes, video)
        if key not in self._quality:
            self._quality[key] = path_quality(self.params, self.estimator, path, video)
        return self._quality[key]

    def candidates(self, grid: SpectrumGrid, request: ConnectionRequest):
        """Yield (path, starts, f_network, f_cost, n_c, n_m, n_nl, quality) per route with room."""
        for path, rows, nb_rows, n_nl in self.routes(grid, request.src, request.dst):
            starts = candidate_starts(grid, rows, request.slots)
            if starts.size == 0:
                continue
            n_c = cuts_for_starts(grid, rows, starts, request.slots)
            n_m = misalignment_for_starts(grid, nb_rows, starts, request.slots)
            if n_nl:
                f_net = n_c + n_m / (request.slots * n_nl)
            else:
                f_net = n_c.astype(float)
            q = self.quality(path, request.is_video)
            if request.is_video:
                f_cost = self.weights.alpha * f_net + self.weights.beta * q.f_video
            else:
                f_cost = self.weights.alpha * f_net
            yield path, starts, f_net, f_cost, n_c, n_m, n_nl, q

    def select(self, grid: SpectrumGrid, request: ConnectionRequest) -> RsaOutcome:
        best = None
        fallback = None
        for path, starts, f_net, f_cost, n_c, n_m, n_nl, q in self.candidates(grid, request):
            # ties: earlier (shorter) path, then lower start slot -> first argmin, strict improvement
            i = int(np.argmin(f_cost))
            if best is None or f_cost[i] < best[0]:
                best = (float(f_cost[i]), path, int(starts[i]), int(n_c[i]), int(n_m[i]), n_nl, float(f_net[i]), q)
            if self.gate_fallback and request.is_video and q.utility >= request.u_th:
                if fallback is None or f_cost[i] < fallback[0]:
                    fallback = (float(f_cost[i]), path, int(starts[i]), int(n_c[i]), int(n_m[i]), n_nl, float(f_net[i]), q)
        if best is None:
            return Blocked(request, CONGESTION)
        outcome = _outcome(request, best)
        if isinstance(outcome, Blocked) and fallback is not None:
            return _outcome(request, fallback)
        return outcome

    def serve(self, grid: SpectrumGrid, request: ConnectionRequest) -> RsaOutcome:
        outcome = self.select(grid, request)
        if isinstance(outcome, Established):
            allocate(grid, outcome.path, outcome.block, request.id)
        return outcome


def _outcome(request, chosen) -> RsaOutcome:
    f_cost, path, start, n_c, n_m, n_nl, f_net, q = chosen
    cost = CostBreakdown(n_c, n_m, n_nl, f_net, f_cost, q)
    block = SpectrumBlock(start, request.slots)
    if not _gate(request, cost):
        return Blocked(request, QUALITY, path, block, cost)
    return Established(request, path, block, cost)


def serve_request(
    grid: SpectrumGrid,
    topo: NetworkTopology,
    params: FiberParams,
    estimator: Optional[QualityEstimator],
    request: ConnectionRequest,
    weights: CostWeights = CostWeights(),
    k: int = 3,
) -> RsaOutcome:
    """Route and assign one request; on success the grid is updated in place."""
    return RsaEngine(topo, params, estimator, weights, k).serve(grid, request)


def all_simple_paths(topo: NetworkTopology, src: str, dst: str) -> list[RoutePath]:
    found = []

    def walk(node, seq):
        if node == dst:
            found.append(topo.path_from_nodes(seq))
            return
        for nxt, _ in topo.neighbors(node):
            if nxt not in seq:
                walk(nxt, seq + (nxt,))

    walk(src, (src,))
    found.sort(key=lambda p: (p.length_km, p.nodes))
    return found


def exhaustive_oracle(
    grid: SpectrumGrid,
    topo: NetworkTopology,
    params: FiberParams,
    estimator: Optional[QualityEstimator],
    request: ConnectionRequest,
    weights: CostWeights = CostWeights(),
    k: Optional[int] = None,
) -> RsaOutcome:
    """Score every block on every simple path one candidate at a time; does not allocate.

    ``k`` keeps only the k shortest simple paths (all of them when None).
    """
    best = None
    paths = all_simple_paths(topo, request.src, request.dst)
    for path in paths if k is None else paths[:k]:
        for start in range(grid.slot_count - request.slots + 1):
            rows = grid.rows(path)
            if (grid.occ[rows, start : start + request.slots] != FREE).any():
                continue
            block = SpectrumBlock(start, request.slots)
            cost = evaluate_candidate(grid, topo, params, estimator, request, path, block, weights)
            if best is None or cost.f_cost < best[2].f_cost:
                best = (path, block, cost)
    if best is None:
        return Blocked(request, CONGESTION)
    path, block, cost = best
    if not _gate(request, cost):
        return Blocked(request, QUALITY, path, block, cost)
    return Established(request, path, block, cost)


LOG_HEADER = (
    "request_id,kind,slots,outcome,path,start_slot,f_network,f_video,f_cost,osnr_db,ber,psnr,dfr"
)


def decision_log_line(outcome: RsaOutcome) -> str:
    req = outcome.request
    label = "established" if isinstance(outcome, Established) else f"blocked-{outcome.reason}"
    cost = outcome.cost
    path = "-".join(outcome.path.nodes) if outcome.path is not None else ""
    start = str(outcome.block.start + 1) if outcome.block is not None else ""

    def fmt(v):
        return "" if v is None else repr(float(v))

    fields = [str(req.id), req.kind, str(req.slots), label, path, start]
    if cost is None:
        fields += [""] * 7
    else:
        q = cost.quality
        fields += [fmt(cost.f_network), fmt(q.f_video), fmt(cost.f_cost), fmt(q.osnr_db),
                   fmt(q.ber), fmt(q.psnr), fmt(q.dfr)]
    return ",".join(fields)
