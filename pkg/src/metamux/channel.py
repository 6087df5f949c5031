"""Calibrated AWGN impairment and the spectrum-sharing QAM interferer.

Noise is calibrated from the measured sample energy so that a stated Eb/N0
holds regardless of waveform: with one symbol (eta bits) entering per sample,
the per-sample SNR is eta * Eb/N0 and sigma^2 = E_s / (eta * Eb/N0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mux import Alphabet, indices_to_bits, map_bits, slice_to_indices, square_qam


@dataclass(frozen=True)
class NoiseCalibration:
    ebn0_db: float
    bits_per_symbol_total: int
    sample_energy: float
    noise_variance: float


@dataclass(frozen=True)
class InterfererParams:
    """Root-raised-cosine shaped QAM sharing the processing band.

    Rates are normalized to the victim signal's sample rate: the QAM runs at
    one symbol per `samples_per_symbol` victim samples, offset in frequency by
    `carrier_offset` cycles per victim sample.
    """

    qam_order: int = 256
    samples_per_symbol: int = 3
    carrier_offset: float = 0.23
    rolloff: float = 0.25
    power_db: float = 0.0
    filter_span: int = 16

    def __post_init__(self):
        m = int(round(math.sqrt(self.qam_order)))
        if m * m != self.qam_order or (m & (m - 1)) != 0:
            raise ValueError("qam_order must be a power of 4")
        occupied = (1.0 + self.rolloff) / self.samples_per_symbol
        if abs(self.carrier_offset) + occupied / 2 > 0.5:
            raise ValueError("interferer band exceeds the processing bandwidth")

    @property
    def occupied_fraction(self) -> float:
        return (1.0 + self.rolloff) / self.samples_per_symbol

    def alphabet(self) -> Alphabet:
        return square_qam(self.qam_order)


def sharing_preset(power_db: float = 0.0) -> InterfererParams:
    """256-QAM occupying ~42% of the processing band at +0.23 fs offset.

    A wideband QAM sitting beside the narrow overlapped signal, far enough
    out in frequency that the two barely overlap spectrally at large K.
    """
    return InterfererParams(
        qam_order=256,
        samples_per_symbol=3,
        carrier_offset=0.23,
        rolloff=0.25,
        power_db=power_db,
    )


def calibrate_noise(samples, eta: float, K: int, ebn0_db: float) -> NoiseCalibration:
    """Noise variance per complex sample for a requested Eb/N0."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("nonempty samples required")
    es = float(np.mean(np.abs(samples) ** 2))
    if es == 0.0:
        raise ValueError("zero-energy signal cannot be calibrated")
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    sigma_sq = es * K / (K * eta * ebn0)
    return NoiseCalibration(
        ebn0_db=float(ebn0_db),
        bits_per_symbol_total=int(round(K * eta)),
        sample_energy=es,
        noise_variance=sigma_sq,
    )


def awgn(samples, sigma_sq: float, seed) -> np.ndarray:
    """Add circular complex Gaussian noise with total variance sigma_sq."""
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be non-negative")
    samples = np.asarray(samples, dtype=np.complex128)
    if sigma_sq == 0.0:
        return samples.copy()
    rng = np.random.default_rng(seed)
    scale = math.sqrt(sigma_sq / 2.0)
    noise = rng.standard_normal(samples.size) + 1j * rng.standard_normal(samples.size)
    return samples + scale * noise


def rrc_taps(sps: int, rolloff: float, span: int) -> np.ndarray:
    """Root-raised-cosine filter, unit energy, `span` symbols long."""
    n = span * sps
    t = (np.arange(n + 1) - n / 2) / sps
    b = rolloff
    h = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            h[i] = 1.0 - b + 4.0 * b / np.pi
        elif b > 0 and abs(abs(ti) - 1.0 / (4.0 * b)) < 1e-12:
            h[i] = (b / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
            )
        else:
            num = np.sin(np.pi * ti * (1 - b)) + 4 * b * ti * np.cos(np.pi * ti * (1 + b))
            den = np.pi * ti * (1 - (4 * b * ti) ** 2)
            h[i] = num / den
    return h / np.sqrt(np.sum(h * h))


def _qam_baseband(bits, params: InterfererParams) -> np.ndarray:
    alphabet = params.alphabet()
    symbols = map_bits(bits, alphabet)
    sps = params.samples_per_symbol
    up = np.zeros(symbols.size * sps, dtype=np.complex128)
    up[::sps] = symbols
    h = rrc_taps(sps, params.rolloff, params.filter_span)
    return np.convolve(up, h)


def make_qam_interferer(params: InterfererParams, bits) -> np.ndarray:
    """RRC-shaped QAM at the configured carrier offset, unit mean power.

    The scale is the deterministic sqrt(sps) factor (unit power in
    expectation), not a per-realization normalization, so the receiver's gain
    reference is exact.
    """
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    eta = params.alphabet().bits_per_symbol
    if bits.size == 0 or bits.size % eta:
        raise ValueError(f"bit count must be a positive multiple of {eta}")
    base = _qam_baseband(bits, params) * math.sqrt(params.samples_per_symbol)
    n = np.arange(base.size)
    return base * np.exp(2j * np.pi * params.carrier_offset * n)


def demod_qam(samples, params: InterfererParams, n_bits: int):
    """Coherent demodulation of the interferer: mix down, matched filter,
    downsample, slice.  Returns (bits, ambiguous-slice fraction), where a
    slice counts as ambiguous when its error exceeds a quarter of the
    constellation's minimum distance.
    """
    alphabet = params.alphabet()
    eta = alphabet.bits_per_symbol
    if n_bits % eta:
        raise ValueError("n_bits must be a multiple of bits per QAM symbol")
    n_syms = n_bits // eta
    samples = np.asarray(samples, dtype=np.complex128)
    n = np.arange(samples.size)
    base = samples * np.exp(-2j * np.pi * params.carrier_offset * n)
    sps = params.samples_per_symbol
    h = rrc_taps(sps, params.rolloff, params.filter_span)
    filtered = np.convolve(base, h)
    delay = params.filter_span * sps  # two cascaded half-span RRC delays
    points = filtered[delay : delay + n_syms * sps : sps]
    if points.size < n_syms:
        raise ValueError("signal too short for the requested bit count")
    points = points / math.sqrt(sps)
    idx = slice_to_indices(points, alphabet)
    err = np.abs(points - alphabet.points[idx])
    min_dist = np.min(np.abs(alphabet.points[0] - np.delete(alphabet.points, 0)))
    failure = float(np.mean(err > 0.25 * min_dist))
    return indices_to_bits(idx, alphabet), failure


def regenerate_qam(bits, params: InterfererParams, length: int) -> np.ndarray:
    """Re-synthesize the transmitted interferer waveform from sliced bits."""
    sig = make_qam_interferer(params, bits)
    out = np.zeros(length, dtype=np.complex128)
    m = min(length, sig.size)
    out[:m] = sig[:m]
    return out


def superpose(meta_samples, interferer_samples, power_ratio_db: float) -> np.ndarray:
    """meta + g * interferer with g set by the dB power ratio; -inf leaves
    the victim untouched.  The shorter input is zero-padded."""
    a = np.asarray(meta_samples, dtype=np.complex128)
    b = np.asarray(interferer_samples, dtype=np.complex128)
    n = max(a.size, b.size)
    out = np.zeros(n, dtype=np.complex128)
    out[: a.size] = a
    if power_ratio_db == -math.inf:
        return out
    g = 10.0 ** (power_ratio_db / 20.0)
    out[: b.size] += g * b
    return out
