"""Sequence decoders for the overlapped signal.

viterbi_decode is exact maximum-likelihood over the ISI trellis (state = the
last K-1 symbol indices) and is limited to small K.  smc_decode is sequential
importance resampling: uniform prior proposals, Gaussian likelihood weights,
systematic resampling when the effective particle count drops, and fixed-lag
weighted-majority symbol decisions.  joint_decode additionally demodulates a
known cooperative QAM interferer and folds its regenerated waveform into each
particle's predicted sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import InterfererParams, demod_qam, regenerate_qam
from .mux import Alphabet, indices_to_bits

_LIKELIHOOD_FLOOR = 1e-30


class StateSpaceError(ValueError):
    """Trellis too large for exact decoding; use the particle decoder."""


class JointDecodingError(RuntimeError):
    """Interferer slicing too unreliable for the cooperative assumption."""


@dataclass
class SmcConfig:
    particles: int = 2000
    resample_threshold: float = 0.5  # resample when N_eff < threshold * M
    lag: int | None = None  # fixed decision lag, default 2K

    def __post_init__(self):
        if self.particles < 2:
            raise ValueError("at least 2 particles required")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold must be in (0, 1]")


@dataclass(frozen=True)
class DecodeResult:
    bits: np.ndarray
    symbols: np.ndarray
    confidence: np.ndarray | None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ParticleEnsemble:
    """Candidate symbol histories with normalized importance weights."""

    histories: np.ndarray  # (M, t) symbol indices
    weights: np.ndarray  # (M,) normalized
    window: np.ndarray  # (M, K-1) complex values of the last K-1 symbols

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
            raise ValueError("weights must be non-negative and sum to 1")


def effective_particle_count(weights) -> float:
    """N_eff = 1 / sum(w^2) for normalized weights."""
    w = np.asarray(weights, dtype=np.float64)
    if abs(w.sum() - 1.0) > 1e-6:
        raise ValueError("weights must be normalized")
    return float(1.0 / np.sum(w * w))


def _systematic_indices(weights, u: float) -> np.ndarray:
    m = len(weights)
    positions = (np.arange(m) + u) / m
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions)


def systematic_resample(ensemble: ParticleEnsemble, seed) -> ParticleEnsemble:
    """Draw M offspring by systematic resampling; weights reset to 1/M."""
    rng = np.random.default_rng(seed)
    idx = _systematic_indices(ensemble.weights, rng.uniform())
    m = len(idx)
    return ParticleEnsemble(
        histories=ensemble.histories[idx],
        weights=np.full(m, 1.0 / m),
        window=ensemble.window[idx],
    )


def _state_digits(n_states: int, memory: int, n_sym: int) -> np.ndarray:
    """digits[s, j-1] = symbol index at lag j encoded in state s."""
    digits = np.empty((n_states, memory), dtype=np.int64)
    s = np.arange(n_states)
    for j in range(memory):  # lag j+1 has place value A^(memory-1-j)
        digits[:, j] = (s // n_sym ** (memory - 1 - j)) % n_sym
    return digits


def viterbi_decode(
    samples, pulse, alphabet: Alphabet, state_limit: int = 2**20
) -> DecodeResult:
    """Exact MLSD by add-compare-select over the full frame, tail included."""
    y = np.asarray(samples, dtype=np.complex128).ravel()
    h = pulse.taps.astype(np.complex128)
    K = pulse.samples_per_symbol
    A = len(alphabet.points)
    L_t = y.size - K + 1
    if L_t < 1:
        raise ValueError("samples shorter than one pulse length")
    memory = K - 1
    if A**memory > state_limit:
        raise StateSpaceError(
            f"{A**memory} trellis states exceed the limit {state_limit}; "
            "use smc_decode"
        )
    points = alphabet.points

    if memory == 0:
        idx = np.argmin(np.abs(y[:, None] - h[0] * points[None, :]), axis=1)
        return DecodeResult(
            bits=indices_to_bits(idx, alphabet),
            symbols=idx.astype(np.int64),
            confidence=None,
            diagnostics={"decoder": "viterbi", "states": 1},
        )

    S = A**memory
    digits = _state_digits(S, memory, A)
    sym_digits = points[digits]  # (S, memory)
    full_partial = sym_digits @ h[1:]
    s_all = np.arange(S)
    newest = s_all // A ** (memory - 1)  # input symbol that produced state s
    pred_base = (s_all % A ** (memory - 1)) * A  # predecessors: pred_base + d
    prev = pred_base[:, None] + np.arange(A)[None, :]  # (S, A)

    metrics = np.zeros(S)
    backptr = np.empty((L_t, S), dtype=np.int32)
    for t in range(L_t):
        if t < memory:
            partial = sym_digits[:, :t] @ h[1 : t + 1] if t else np.zeros(S, complex)
        else:
            partial = full_partial
        # branch[s_pred, c] = |y_t - (h0*p[c] + partial[s_pred])|^2
        branch = np.abs(y[t] - (partial[:, None] + h[0] * points[None, :])) ** 2
        cand = metrics[prev] + branch[prev, newest[:, None]]
        best = np.argmin(cand, axis=1)
        metrics = cand[s_all, best]
        backptr[t] = prev[s_all, best]

    # closing cost: remaining K-1 samples depend only on the final state,
    # whose digit d (newest first) is the symbol at lag d + i from tail step i
    for i in range(1, memory + 1):
        t = L_t - 1 + i
        pred = sym_digits[:, : memory - i + 1] @ h[i:]
        metrics = metrics + np.abs(y[t] - pred) ** 2

    state = int(np.argmin(metrics))
    symbols = np.empty(L_t, dtype=np.int64)
    for t in range(L_t - 1, -1, -1):
        symbols[t] = newest[state]
        state = int(backptr[t, state])
    return DecodeResult(
        bits=indices_to_bits(symbols, alphabet),
        symbols=symbols,
        confidence=None,
        diagnostics={"decoder": "viterbi", "states": S},
    )


def _smc_core(
    samples,
    pulse,
    alphabet: Alphabet,
    sigma_sq: float,
    config: SmcConfig,
    seed,
    extra=None,
):
    y = np.asarray(samples, dtype=np.complex128).ravel()
    h = pulse.taps.astype(np.complex128)
    K = pulse.samples_per_symbol
    A = len(alphabet.points)
    L_r = y.size
    L_t = L_r - K + 1
    if L_t < 1:
        raise ValueError("samples shorter than one pulse length")
    if extra is not None:
        y = y - np.asarray(extra, dtype=np.complex128)[:L_r]

    M = config.particles
    lag = config.lag if config.lag is not None else 2 * K
    sigma = max(float(sigma_sq), _LIKELIHOOD_FLOOR)
    rng = np.random.default_rng(seed)
    points = alphabet.points

    hist = np.empty((M, L_t), dtype=np.int8)
    window = np.zeros((M, K - 1), dtype=np.complex128)  # window[:, j-1] = x_{t-j}
    logw = np.zeros(M)
    decided = np.full(L_t, -1, dtype=np.int64)
    confidence = np.zeros(L_t)
    resample_count = 0
    degeneracy_resets = 0
    min_neff = float(M)

    for t in range(L_r):
        if t < L_t:
            prop = rng.integers(0, A, M)
            hist[:, t] = prop
            pred = points[prop] * h[0]
        else:
            pred = np.zeros(M, dtype=np.complex128)
        if K > 1:
            pred = pred + window @ h[1:]
        logw = logw - np.abs(y[t] - pred) ** 2 / sigma

        mx = logw.max()
        if not np.isfinite(mx):
            logw[:] = 0.0
            mx = 0.0
            degeneracy_resets += 1
        w = np.exp(logw - mx)
        total = w.sum()
        if total == 0.0 or not np.isfinite(total):
            w[:] = 1.0
            total = float(M)
            degeneracy_resets += 1
        w /= total
        neff = 1.0 / np.sum(w * w)
        min_neff = min(min_neff, neff)

        d = t - lag
        if 0 <= d < L_t:
            votes = np.bincount(hist[:, d], weights=w, minlength=A)
            decided[d] = int(np.argmax(votes))
            confidence[d] = float(votes[decided[d]])

        if neff < config.resample_threshold * M and t < L_r - 1:
            idx = _systematic_indices(w, rng.uniform())
            hist = hist[idx]
            window = window[idx]
            logw = np.zeros(M)
            resample_count += 1
        else:
            with np.errstate(divide="ignore"):  # zero-weight particles -> -inf
                logw = np.log(w)

        # shift the convolution window for the next sample (zeros in the tail)
        if K > 1:
            window[:, 1:] = window[:, :-1]
            window[:, 0] = points[hist[:, t]] if t < L_t else 0.0

    top = int(np.argmax(logw))
    top_conf = float(np.exp(logw[top]) / np.exp(logw).sum())
    for d in range(L_t):
        if decided[d] < 0:
            decided[d] = int(hist[top, d])
            confidence[d] = top_conf

    return DecodeResult(
        bits=indices_to_bits(decided, alphabet),
        symbols=decided,
        confidence=confidence,
        diagnostics={
            "decoder": "smc",
            "particles": M,
            "resample_count": resample_count,
            "min_neff": min_neff,
            "degeneracy_resets": degeneracy_resets,
        },
    )


def smc_decode(
    samples, pulse, alphabet: Alphabet, sigma_sq: float, config: SmcConfig, seed
) -> DecodeResult:
    """SIR particle decoding; deterministic given (inputs, config, seed)."""
    return _smc_core(samples, pulse, alphabet, sigma_sq, config, seed)


def joint_decode(
    samples,
    pulse,
    alphabet: Alphabet,
    interferer: InterfererParams,
    sigma_sq: float,
    config: SmcConfig,
    seed,
    n_qam_bits: int,
    max_slicing_failure: float = 0.10,
):
    """Decode under spectrum sharing: demodulate the cooperative QAM first,
    regenerate its waveform, and run SIR against the combined prediction.

    Returns (meta DecodeResult, recovered QAM bits).
    """
    samples = np.asarray(samples, dtype=np.complex128).ravel()
    if interferer.power_db == -math.inf:
        result = _smc_core(samples, pulse, alphabet, sigma_sq, config, seed)
        return result, np.zeros(0, dtype=np.uint8)

    # demod_qam slices against the unit-power constellation, so the power
    # ratio has to come off before demodulation and go back on for the
    # regenerated waveform
    gain = 10.0 ** (interferer.power_db / 20.0)
    qam_bits, failure = demod_qam(samples / gain, interferer, n_qam_bits)
    if failure > max_slicing_failure:
        raise JointDecodingError(
            f"interferer slicing failure rate {failure:.1%} exceeds "
            f"{max_slicing_failure:.0%}; SNR too low for cooperative decoding"
        )
    regen = gain * regenerate_qam(qam_bits, interferer, samples.size)
    result = _smc_core(samples, pulse, alphabet, sigma_sq, config, seed, extra=regen)
    diag = dict(result.diagnostics)
    diag["qam_slicing_failure"] = failure
    result = DecodeResult(
        bits=result.bits,
        symbols=result.symbols,
        confidence=result.confidence,
        diagnostics=diag,
    )
    return result, qam_bits
