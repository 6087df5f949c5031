"""Parallel-channel capacity of the overlapped scheme.

The SVD of the channel matrix turns the overlap into independent Gaussian
subchannels with gains lambda_i.  Capacity is 1/2 sum log2(1 + P_i l_i^2 / N)
with either waterfilled or equal powers, optionally scaled by the
finite-frame factor (L_t/K) / (L_t/K + (K-1)/K).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .mux import SingularSpectrum, build_channel_matrix, singular_spectrum

#: Subchannels with a gain below lambda_1 * this are treated as exact zeros.
_GAIN_CUTOFF = 1e-12


class AllocationMode(str, enum.Enum):
    WATERFILL = "waterfill"
    EQUAL_POWER = "equal"


@dataclass(frozen=True)
class PowerAllocation:
    mu: float
    powers: np.ndarray
    total_power: float
    noise_power: float

    def __post_init__(self):
        object.__setattr__(self, "powers", np.asarray(self.powers, dtype=np.float64))


@dataclass(frozen=True)
class CapacityReport:
    mode: AllocationMode
    per_subchannel_bits: np.ndarray
    total_bits_per_symbol: float
    finite_length_factor: float
    unfactored_bits_per_symbol: float
    ebn0_db: float | None = None
    spectral_efficiency_bits_s_hz: float | None = None


def waterfill(lambda_sq, N: float, P: float) -> PowerAllocation:
    """Exact waterfilling: P_i = (mu - N/l_i^2)^+ with sum P_i = P.

    Solved in closed form by sorting the noise floors N/l_i^2 and scanning
    active sets; no iteration tolerance is involved.
    """
    lam2 = np.asarray(lambda_sq, dtype=np.float64)
    if np.any(lam2 < 0):
        raise ValueError("lambda^2 must be non-negative")
    if N <= 0:
        raise ValueError("noise power must be positive")
    if P < 0:
        raise ValueError("total power must be non-negative")
    active = lam2 > lam2.max() * _GAIN_CUTOFF if lam2.size else lam2 > 0
    if not np.any(active):
        raise ValueError("all subchannel gains are zero")

    floors = N / lam2[active]
    order = np.argsort(floors)
    sorted_floors = floors[order]
    n_active = len(sorted_floors)

    if P == 0.0:
        mu = float(sorted_floors[0])
        powers = np.zeros_like(lam2)
        return PowerAllocation(mu=mu, powers=powers, total_power=0.0, noise_power=N)

    # With the m lowest floors active, mu = (P + sum floors_m) / m; valid when
    # mu does not exceed the next floor.
    prefix = np.cumsum(sorted_floors)
    mu = None
    for m in range(1, n_active + 1):
        cand = (P + prefix[m - 1]) / m
        nxt = sorted_floors[m] if m < n_active else math.inf
        if cand <= nxt:
            mu = cand
            break
    assert mu is not None
    powers_active = np.maximum(mu - floors, 0.0)
    powers = np.zeros_like(lam2)
    powers[active] = powers_active
    return PowerAllocation(mu=float(mu), powers=powers, total_power=float(P), noise_power=float(N))


def equal_power(lambda_sq, N: float, P: float) -> PowerAllocation:
    """Split P evenly over every subchannel (including zero-gain ones)."""
    lam2 = np.asarray(lambda_sq, dtype=np.float64)
    n = lam2.size
    powers = np.full(n, P / n)
    return PowerAllocation(mu=math.nan, powers=powers, total_power=float(P), noise_power=float(N))


def finite_length_factor(L_t, K: int) -> float:
    """(L_t/K) / (L_t/K + (K-1)/K); tends to 1 as L_t grows."""
    if L_t is None or math.isinf(L_t):
        return 1.0
    r = L_t / K
    return r / (r + (K - 1) / K)


def capacity(
    spectrum: SingularSpectrum,
    alloc: PowerAllocation,
    L_t=None,
    K: int | None = None,
    mode: AllocationMode = AllocationMode.WATERFILL,
) -> CapacityReport:
    """Capacity in bits per symbol for a given allocation."""
    lam = np.asarray(spectrum.values, dtype=np.float64)
    if lam.size != alloc.powers.size:
        raise ValueError("allocation and spectrum dimensions differ")
    if K is None:
        K = lam.size
    per = 0.5 * np.log2(1.0 + alloc.powers * lam**2 / alloc.noise_power)
    unfactored = float(np.sum(per))
    factor = finite_length_factor(L_t, K)
    return CapacityReport(
        mode=AllocationMode(mode),
        per_subchannel_bits=per,
        total_bits_per_symbol=factor * unfactored,
        finite_length_factor=factor,
        unfactored_bits_per_symbol=unfactored,
    )


def capacity_ebn0(
    spectrum: SingularSpectrum,
    eta_per_stream: float,
    K: int,
    ebn0_db: float,
    mode: AllocationMode = AllocationMode.EQUAL_POWER,
    L_t=None,
) -> CapacityReport:
    """Capacity parameterized by Eb/N0 (dB) instead of absolute powers.

    Equal power: C = 1/2 sum log2(1 + eta * (Ts/T) * (Eb/N0) * l_i^2).
    Waterfill: total power P = K * eta * Eb per symbol time against noise
    N = N0 / Ts, then the waterfilled allocation.
    """
    if eta_per_stream <= 0:
        raise ValueError("eta must be positive")
    if not math.isfinite(ebn0_db):
        raise ValueError("ebn0_db must be finite")
    lam = np.asarray(spectrum.values, dtype=np.float64)
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    # Normalized units: T = 1, N0 = 1, Ts = 1/K.
    N = float(K)
    P = K * eta_per_stream * ebn0
    mode = AllocationMode(mode)
    if mode is AllocationMode.EQUAL_POWER:
        alloc = equal_power(lam**2, N, P)
    else:
        alloc = waterfill(lam**2, N, P)
    report = capacity(SingularSpectrum(values=lam), alloc, L_t=L_t, K=K, mode=mode)
    return CapacityReport(
        mode=mode,
        per_subchannel_bits=report.per_subchannel_bits,
        total_bits_per_symbol=report.total_bits_per_symbol,
        finite_length_factor=report.finite_length_factor,
        unfactored_bits_per_symbol=report.unfactored_bits_per_symbol,
        ebn0_db=float(ebn0_db),
    )


def spectral_efficiency(report: CapacityReport, B: float, T: float) -> float:
    """bits/s/Hz: the unfactored bit sum scaled by 1/(B*T)."""
    if B <= 0 or T <= 0:
        raise ValueError("B and T must be positive")
    return report.unfactored_bits_per_symbol / (B * T)


def pulse_spectrum(pulse, L_t: int | None = None) -> SingularSpectrum:
    """Singular spectrum of the channel matrix for a pulse (default L_t = K)."""
    K = pulse.samples_per_symbol
    return singular_spectrum(build_channel_matrix(pulse, L_t if L_t else K))


def required_ebn0(
    K: int,
    pulse,
    eta: float,
    target_bits: float | None = None,
    mode: AllocationMode = AllocationMode.EQUAL_POWER,
    tol_db: float = 1e-6,
) -> float:
    """Eb/N0 (dB) at which the capacity reaches target_bits (default 2K)."""
    if target_bits is None:
        target_bits = 2.0 * K
    if target_bits <= 0:
        raise ValueError("target_bits must be positive")
    spec = pulse_spectrum(pulse)

    def cap(db):
        return capacity_ebn0(spec, eta, K, db, mode=mode).total_bits_per_symbol

    lo, hi = -60.0, 60.0
    for _ in range(60):
        if cap(hi) >= target_bits:
            break
        hi += 60.0
    else:
        raise RuntimeError(f"bisection bracket expansion failed: [{lo}, {hi}]")
    for _ in range(40):
        if cap(lo) <= target_bits:
            break
        lo -= 60.0
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if cap(mid) >= target_bits:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
