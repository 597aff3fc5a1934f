"""Physical-layer quality of transmission for CO-OFDM flex-grid lightpaths.

All noise and signal quantities are power spectral densities in W/GHz; fiber
constants keep their customary units (1/km, ps^2/km, 1/(W km), km, GHz).
:func:`model_units` is the one place where unit conversion happens.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

from scipy.special import erfc

from .topology import RoutePath

ZETA_FLOOR = 1e-6


class QoTDomainError(ValueError):
    pass


@dataclass(frozen=True)
class FiberParams:
    gamma: float = 1.3  # 1/(W km)
    alpha: float = 0.0461  # 1/km, linear (0.2 dB/km)
    beta2: float = -21.7  # ps^2/km
    span_length: float = 80.0  # km
    zeta: float = 1.0
    slot_bandwidth: float = 12.5  # GHz
    guard_band: float = 0.0  # GHz
    channel_count_N: int = 64  # 2N+1 channels share the fiber
    launch_density: float = 1.0e-5  # W/GHz, just above the optimum for every span count
    planck: float = 6.62607015e-34  # J s
    frequency: float = 193.4e12  # Hz
    noise_figure: float = 3.16  # linear (5 dB)
    node_penalty_db: float = 1.0
    # coding gain d_free * R_C = 5.25 (about 7.2 dB)
    d_free: float = 7.0
    code_rate: float = 0.75
    modulation: str = "QPSK"

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma > 0 and self.span_length > 0):
            raise ValueError("alpha, gamma and span_length must be positive")
        if not (self.slot_bandwidth > 0 and self.launch_density > 0):
            raise ValueError("slot_bandwidth and launch_density must be positive")
        if self.beta2 == 0:
            raise ValueError("beta2 must be non-zero")
        if not 0 < self.code_rate <= 1:
            raise ValueError("code_rate must lie in (0, 1]")
        if self.d_free < 1:
            raise ValueError("d_free must be >= 1")
        if self.guard_band < 0 or not 0 <= self.zeta <= 1:
            raise ValueError("guard_band must be >= 0 and zeta in [0, 1]")
        if self.channel_count_N < 1:
            raise ValueError("channel_count_N must be >= 1")

    def with_(self, **changes) -> "FiberParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ModelUnits:
    delta_b: float  # GHz, slot pitch B1 + guard
    total_bandwidth: float  # GHz, (2N+1) * delta_b
    f_w: float  # GHz
    b0: float  # GHz
    photon_energy: float  # W/GHz per unit noise figure (h * nu, rescaled)


def model_units(params: FiberParams) -> ModelUnits:
    delta_b = params.slot_bandwidth + params.guard_band
    total = (2 * params.channel_count_N + 1) * delta_b
    # sqrt(1/km / (ps^2/km)) is 1/ps = THz
    f_w = 1e3 * math.sqrt(params.alpha / abs(params.beta2)) / (2 * math.pi)
    return ModelUnits(
        delta_b=delta_b,
        total_bandwidth=total,
        f_w=f_w,
        b0=4 * f_w**2 / total,
        photon_energy=params.planck * params.frequency * 1e9,  # J = W/Hz -> W/GHz
    )


def noise_enhancement(params: FiberParams, spans: int) -> float:
    """Multi-span nonlinear noise enhancement factor h_e (1 for a single span)."""
    if spans < 1:
        raise ValueError("spans must be >= 1")
    zeta = params.zeta
    if zeta < ZETA_FLOOR:
        warnings.warn(f"zeta={zeta} clamped to {ZETA_FLOOR}", RuntimeWarning, stacklevel=2)
        zeta = ZETA_FLOOR
    y = params.alpha * zeta * params.span_length
    em1 = math.expm1(-y)  # e^{-y} - 1
    # N_s - 1 + e^{-y N_s} - N_s e^{-y}, written to avoid cancellation for small y
    bracket = math.expm1(-y * spans) - spans * em1
    return 2 * bracket * math.exp(-y) / (spans * em1**2) + 1


def nonlinear_threshold(params: FiberParams, spans: int) -> float:
    """Launch density scale I_0 (W/GHz) of the nonlinear noise I_NL = (I/I_0)^2 I."""
    u = model_units(params)
    if u.total_bandwidth <= u.b0:
        raise QoTDomainError(f"total bandwidth {u.total_bandwidth} GHz does not exceed B0={u.b0} GHz")
    ratio = params.guard_band / u.delta_b
    n = params.channel_count_N
    guard_log = ratio * math.log(2 * n - 1) if ratio > 0 else 0.0
    bracket = math.log(u.total_bandwidth / u.b0) - guard_log
    if bracket <= 0:
        raise QoTDomainError(f"non-positive bandwidth term ln(B/B0) - ... = {bracket}")
    h_e = noise_enhancement(params, spans)
    base = math.sqrt(math.pi * params.alpha * abs(params.beta2) / (params.gamma**2 * spans * h_e))
    # sqrt(W^2 ps^2) = W/THz -> W/GHz
    return 1e-3 * base * (1 - ratio) ** -0.5 * bracket**-0.5


def nonlinear_noise_density(params: FiberParams, spans: int, launch: float | None = None) -> float:
    i = params.launch_density if launch is None else launch
    return (i / nonlinear_threshold(params, spans)) ** 2 * i


def ase_density(params: FiberParams, spans: int) -> float:
    """n_0 = 0.5 N_s e^{alpha L} h nu N_F, in W/GHz."""
    u = model_units(params)
    return 0.5 * spans * math.exp(params.alpha * params.span_length) * u.photon_energy * params.noise_figure


def link_osnr(params: FiberParams, spans: int, launch: float | None = None) -> float:
    """Linear OSNR with ASE and nonlinear depletion of the signal density."""
    i = params.launch_density if launch is None else launch
    kept = i * math.exp(-((i / nonlinear_threshold(params, spans)) ** 2))
    return kept / (ase_density(params, spans) + i - kept)


def link_osnr_approx(params: FiberParams, spans: int, launch: float | None = None) -> float:
    i = params.launch_density if launch is None else launch
    return i / (ase_density(params, spans) + i * (i / nonlinear_threshold(params, spans)) ** 2)


def optimal_launch_density(params: FiberParams, spans: int) -> float:
    """Peak of the approximate OSNR: (n_0 I_0^2 / 2)^(1/3)."""
    return (ase_density(params, spans) * nonlinear_threshold(params, spans) ** 2 / 2) ** (1 / 3)


def span_count(params: FiberParams, length_km: float) -> int:
    return max(1, math.ceil(length_km / params.span_length))


def path_osnr(params: FiberParams, path: RoutePath) -> float:
    """Source-destination OSNR in dB after the per-hop cross-connect penalty."""
    spans = span_count(params, path.length_km)
    return lin_to_db(link_osnr(params, spans)) - path.hops * params.node_penalty_db


def apparent_osnr(osnr_sd: float, params: FiberParams) -> float:
    """Coding-gain-adjusted linear OSNR seen by the decoder."""
    if osnr_sd < 0:
        raise ValueError("osnr must be non-negative")
    return params.d_free * params.code_rate * osnr_sd


MODULATIONS: dict[str, Callable[[float], float]] = {
    "QPSK": lambda snr: 0.5 * float(erfc(math.sqrt(snr / 2))),
    "BPSK": lambda snr: 0.5 * float(erfc(math.sqrt(snr))),
}


def register_modulation(name: str, ber_of_snr: Callable[[float], float]) -> None:
    MODULATIONS[name] = ber_of_snr


def osnr_to_ber(osnr_app: float, modulation: str = "QPSK") -> float:
    if osnr_app < 0:
        raise ValueError("osnr must be non-negative")
    try:
        fn = MODULATIONS[modulation]
    except KeyError:
        raise ValueError(f"unknown modulation format {modulation!r}") from None
    return fn(osnr_app)


def lin_to_db(x: float) -> float:
    return 10 * math.log10(x)


def db_to_lin(x: float) -> float:
    return 10 ** (x / 10)
