"""Video QoE: GOP packet-loss ground truth, RBF quality estimator, utility and cost.

The ground-truth generator is an analytic stand-in for decoding real streams:
packets are lost independently, a frame is usable when enough of its packets
arrive, and decodability follows the I/P/B reference chain of a closed GOP.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

PSNR_CAP = 60.0
U_FLOOR = 1e-3
BER_FLOOR = 1e-12
ENVELOPE_POINTS = 4097


@dataclass(frozen=True)
class GopModel:
    gop_length: int = 12
    pattern: str = "IBBPBBPBBPBB"
    frame_bits: Mapping[str, int] = field(default_factory=lambda: {"I": 160_000, "P": 80_000, "B": 40_000})
    packet_bits: int = 8_000
    threshold: float = 1.0  # fraction of a frame's packets that must arrive
    concealment_slope: float = 20.0  # dB per lost-packet fraction
    baseline_psnr: float = 40.0

    def __post_init__(self):
        if len(self.pattern) != self.gop_length:
            raise ValueError("pattern length must equal gop_length")
        if self.pattern[0] != "I":
            raise ValueError("a GOP starts with an I frame")
        if set(self.pattern) - {"I", "P", "B"}:
            raise ValueError("pattern may only contain I, P and B")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.baseline_psnr <= 0:
            raise ValueError("baseline_psnr must be positive")

    @cached_property
    def packets(self) -> np.ndarray:
        """Packets per frame, in pattern order."""
        return np.array([math.ceil(self.frame_bits[t] / self.packet_bits) for t in self.pattern])

    @cached_property
    def references(self) -> tuple[tuple[int, ...], ...]:
        """Frames each frame needs decoded first (closed GOP: trailing B frames use the last anchor)."""
        anchors = [i for i, t in enumerate(self.pattern) if t in "IP"]
        refs = []
        for i, t in enumerate(self.pattern):
            if t == "I":
                refs.append(())
            elif t == "P":
                refs.append((max(a for a in anchors if a < i),))
            else:
                before = max(a for a in anchors if a < i)
                after = [a for a in anchors if a > i]
                refs.append((before, after[0]) if after else (before,))
        return tuple(refs)

    def decodable(self, usable: np.ndarray) -> np.ndarray:
        """Propagate usability (``(..., gop_length)`` bools) through the reference chain."""
        ok = np.array(usable, dtype=bool, copy=True)
        # anchors precede their dependants except for the forward B reference, so resolve anchors first
        order = [i for i, t in enumerate(self.pattern) if t in "IP"] + [
            i for i, t in enumerate(self.pattern) if t == "B"
        ]
        for i in order:
            for r in self.references[i]:
                ok[..., i] &= ok[..., r]
        return ok


@dataclass(frozen=True)
class VideoSample:
    ber: float
    psnr: float
    dfr: float


def packet_error_prob(gop: GopModel, ber: float) -> float:
    return -math.expm1(gop.packet_bits * math.log1p(-ber)) if ber < 1 else 1.0


def ber_for_packet_error(gop: GopModel, p: float) -> float:
    return -math.expm1(math.log1p(-p) / gop.packet_bits)


def frame_error_probs(gop: GopModel, ber: float) -> np.ndarray:
    """Per-frame probability of being unusable (too few packets arrived)."""
    from scipy.stats import binom

    p = packet_error_prob(gop, ber)
    probs = []
    for n in gop.packets:
        need = math.ceil(gop.threshold * n - 1e-12)
        # unusable when intact packets < need
        probs.append(float(binom.cdf(need - 1, n, 1 - p)))
    return np.array(probs)


def psnr_from_mse(mse: float) -> float:
    if mse < 0:
        raise ValueError("mse must be non-negative")
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10 * math.log10(255**2 / mse))


def _simulate(gop: GopModel, ber: float, gop_count: int, seed: int):
    rng = np.random.default_rng(seed)
    p = packet_error_prob(gop, ber)
    n = gop.packets
    lost = rng.binomial(n, p, size=(gop_count, gop.gop_length))
    usable = (n - lost) >= np.ceil(gop.threshold * n - 1e-12)
    return gop.decodable(usable), lost / n


def generate_ground_truth(gop: GopModel, ber: float, gop_count: int, seed: int) -> VideoSample:
    """Monte Carlo over ``gop_count`` GOPs at bit error rate ``ber``.

    PSNR averages over decodable frames only; with nothing decodable it is 0.
    """
    if gop_count < 1:
        raise ValueError("gop_count must be >= 1")
    ok, lost_frac = _simulate(gop, ber, gop_count, seed)
    n_decoded = int(ok.sum())
    dfr = n_decoded / ok.size
    if n_decoded:
        psnr = float(np.mean(gop.baseline_psnr - gop.concealment_slope * lost_frac[ok]))
    else:
        psnr = 0.0
    return VideoSample(ber=ber, psnr=psnr, dfr=dfr)


def gop_dfr_samples(gop: GopModel, ber: float, gop_count: int, seed: int) -> np.ndarray:
    """Per-GOP decodable fraction from the same draws :func:`generate_ground_truth` uses."""
    ok, _ = _simulate(gop, ber, gop_count, seed)
    return ok.mean(axis=1)


def dfr_expectation_oracle(
    gop: GopModel, frame_error_prob: Union[float, Sequence[float]], *, with_variance: bool = False
):
    """Exact per-GOP DFR expectation by enumerating every loss pattern of one GOP.

    ``frame_error_prob`` is a single probability for every frame or one per frame.
    """
    probs = np.broadcast_to(np.asarray(frame_error_prob, dtype=float), (gop.gop_length,))
    if ((probs < 0) | (probs > 1)).any():
        raise ValueError("probabilities must lie in [0, 1]")
    patterns = np.array(list(itertools.product((False, True), repeat=gop.gop_length)))  # True = lost
    weight = np.prod(np.where(patterns, probs, 1 - probs), axis=1)
    dfr = gop.decodable(~patterns).mean(axis=1)
    mean = float(np.dot(weight, dfr))
    if with_variance:
        return mean, float(np.dot(weight, (dfr - mean) ** 2))
    return mean


# -- estimator --------------------------------------------------------------

_SPREAD_TO_SCALE = math.sqrt(math.log(2))  # response is 0.5 at distance == spread


def _design(x: np.ndarray, centers: np.ndarray, spread: float) -> np.ndarray:
    d = (x[:, None] - centers[None, :]) * (_SPREAD_TO_SCALE / spread)
    return np.exp(-(d**2))


@dataclass(frozen=True)
class RbfFit:
    centers: np.ndarray
    spread: float
    # one (weights, bias) solution per network size, 0..len(centers) neurons
    solutions: tuple[tuple[np.ndarray, np.ndarray], ...]
    mse_history: tuple[float, ...]

    @property
    def weights(self) -> np.ndarray:
        return self.solutions[-1][0]

    @property
    def bias(self) -> np.ndarray:
        return self.solutions[-1][1]

    def predict(self, x, neurons: Optional[int] = None) -> np.ndarray:
        n = len(self.centers) if neurons is None else neurons
        w, b = self.solutions[n]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return _design(x, self.centers[:n], self.spread) @ w + b


def fit_rbf(x: np.ndarray, y: np.ndarray, spread: float, mse_goal: float, max_neurons: int) -> RbfFit:
    """Grow a Gaussian RBF network one centre at a time.

    Each round adds a centre at the training input with the largest residual and
    re-solves all output weights and biases by least squares.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    bias = y.mean(axis=0)
    centers = np.zeros(0)
    residual = y - bias
    solutions = [(np.zeros((0, y.shape[1])), bias)]
    history = [float(np.mean(residual**2))]
    available = np.ones(len(x), dtype=bool)
    while history[-1] > mse_goal and len(centers) < max_neurons and available.any():
        score = np.where(available, np.sum(residual**2, axis=1), -np.inf)
        pick = int(np.argmax(score))
        # duplicates of a chosen input add nothing new
        available &= x != x[pick]
        trial = np.append(centers, x[pick])
        design = np.hstack([_design(x, trial, spread), np.ones((len(x), 1))])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        new_residual = y - design @ coef
        mse = float(np.mean(new_residual**2))
        if mse > history[-1]:
            # numerically rank-deficient step; keep the smaller network
            break
        centers, residual = trial, new_residual
        solutions.append((coef[:-1], coef[-1]))
        history.append(mse)
    return RbfFit(centers, spread, tuple(solutions), tuple(history))


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class QualityEstimator:
    """Fitted BER -> (PSNR, DFR) regressor working on normalised log10(BER)."""

    centers: tuple[float, ...]
    spread: float
    weights: tuple[tuple[float, float], ...]  # per centre: (psnr, dfr)
    bias: tuple[float, float]
    log_ber_range: tuple[float, float]
    # report the running-minimum envelope so predictions never improve as BER grows
    monotone: bool = True
    metadata: dict = field(default_factory=dict, compare=False)

    def features(self, ber) -> np.ndarray:
        lo, hi = self.log_ber_range
        logs = np.log10(np.maximum(np.asarray(ber, dtype=float), BER_FLOOR))
        # outside the training range the estimate is held at the nearest edge
        return np.clip((logs - lo) / (hi - lo), 0.0, 1.0)

    @cached_property
    def _arrays(self):
        w = np.array(self.weights, dtype=float).reshape(len(self.centers), 2)
        return np.array(self.centers, dtype=float), w, np.array(self.bias, dtype=float)

    def _raw(self, x: np.ndarray) -> np.ndarray:
        centers, w, b = self._arrays
        out = _design(x, centers, self.spread) @ w + b
        out[:, 0] = np.maximum(out[:, 0], 0.0)
        out[:, 1] = np.clip(out[:, 1], 0.0, 1.0)
        return out

    @cached_property
    def _envelope(self):
        grid = np.linspace(0.0, 1.0, ENVELOPE_POINTS)
        return grid, np.minimum.accumulate(self._raw(grid), axis=0)

    def predict(self, ber) -> np.ndarray:
        """(psnr, dfr) rows for each BER; clamped to psnr >= 0 and dfr in [0, 1]."""
        x = np.atleast_1d(self.features(ber))
        if not self.monotone:
            return self._raw(x)
        # piecewise-linear through a non-increasing table, hence non-increasing in BER
        grid, env = self._envelope
        return np.column_stack([np.interp(x, grid, env[:, j]) for j in range(env.shape[1])])

    def to_json(self) -> str:
        doc = {
            "centers": list(self.centers),
            "spread": self.spread,
            "weights": [list(w) for w in self.weights],
            "bias": list(self.bias),
            "log_ber_range": list(self.log_ber_range),
            "monotone": self.monotone,
            "metadata": self.metadata,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "QualityEstimator":
        doc = json.loads(text)
        return cls(
            centers=tuple(doc["centers"]),
            spread=float(doc["spread"]),
            weights=tuple(tuple(w) for w in doc["weights"]),
            bias=tuple(doc["bias"]),
            log_ber_range=tuple(doc["log_ber_range"]),
            monotone=bool(doc.get("monotone", True)),
            metadata=doc.get("metadata", {}),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "QualityEstimator":
        return cls.from_json(Path(path).read_text())


def fit_estimator(
    samples: Sequence[VideoSample],
    spread: float = 0.1,
    mse_goal: float = 1e-3,
    max_neurons: int = 50,
    metadata: Optional[dict] = None,
    monotone: bool = True,
) -> tuple[QualityEstimator, RbfFit]:
    bers = np.array([s.ber for s in samples], dtype=float)
    if len(samples) < 2 or len(np.unique(bers)) < 2:
        raise EstimatorError("need at least two samples with distinct BER values")
    logs = np.log10(np.maximum(bers, BER_FLOOR))
    lo, hi = float(logs.min()), float(logs.max())
    if hi == lo:
        raise EstimatorError("all BER values map to the same feature (check the BER floor)")
    x = (logs - lo) / (hi - lo)
    y = np.array([[s.psnr, s.dfr] for s in samples], dtype=float)
    fit = fit_rbf(x, y, spread, mse_goal, max_neurons)
    meta = dict(metadata or {})
    meta.update(mse_goal=mse_goal, train_mse=fit.mse_history[-1], neurons=len(fit.centers))
    est = QualityEstimator(
        centers=tuple(float(c) for c in fit.centers),
        spread=float(spread),
        weights=tuple((float(a), float(b)) for a, b in fit.weights),
        bias=(float(fit.bias[0]), float(fit.bias[1])),
        log_ber_range=(lo, hi),
        monotone=monotone,
        metadata=meta,
    )
    return est, fit


def estimate(est: QualityEstimator, ber: float) -> tuple[float, float]:
    if ber < 0:
        raise ValueError("ber must be non-negative")
    psnr, dfr = est.predict(ber)[0]
    return float(psnr), float(dfr)


def utility(psnr: float, dfr: float) -> float:
    return psnr * dfr


def video_cost(u: float) -> float:
    """log10(1/U), saturating at log10(1/U_FLOOR) for U at or below the floor."""
    if u <= U_FLOOR:
        return math.log10(1 / U_FLOOR)
    return math.log10(1 / u)


def default_ber_grid(points: int = 25) -> np.ndarray:
    return np.logspace(-9, -4.5, points)


def build_dataset(
    gop: GopModel, bers: Sequence[float], gop_count: int, seed: int
) -> list[VideoSample]:
    seeds = np.random.SeedSequence(seed).spawn(len(bers))
    return [
        generate_ground_truth(gop, float(b), gop_count, int(s.generate_state(1)[0]))
        for b, s in zip(bers, seeds)
    ]


def split_dataset(samples: Sequence[VideoSample], seed: int, train_fraction: float = 2 / 3):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    n_train = int(round(train_fraction * len(samples)))
    train = [samples[i] for i in sorted(order[:n_train])]
    test = [samples[i] for i in sorted(order[n_train:])]
    return train, test


def dataset_mse(est: QualityEstimator, samples: Sequence[VideoSample]) -> float:
    if not samples:
        return float("nan")
    pred = est.predict([s.ber for s in samples])
    target = np.array([[s.psnr, s.dfr] for s in samples])
    return float(np.mean((pred - target) ** 2))


def learning_curve(
    fit: RbfFit, est: QualityEstimator, test: Sequence[VideoSample]
) -> list[tuple[int, float, float]]:
    """(neurons, train MSE, test MSE) for every network size reached while fitting."""
    x = est.features([s.ber for s in test])
    target = np.array([[s.psnr, s.dfr] for s in test], dtype=float)
    rows = []
    for n, train_mse in enumerate(fit.mse_history):
        test_mse = float(np.mean((fit.predict(x, n) - target) ** 2)) if len(test) else float("nan")
        rows.append((n, train_mse, test_mse))
    return rows
