"""Bit mapping, overlap encoding, and the artificial channel matrix.

The overlap scheme sends one symbol per sample interval T/K while each symbol
rings for K samples, so the transmitted stream is the convolution of the
symbol sequence with the pulse taps.  Stacking shifted tap copies as columns
gives the tall banded Toeplitz matrix H with y = Hx.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class Alphabet:
    """Complex constellation with a bijective bit labelling."""

    name: str
    points: np.ndarray
    bits_per_symbol: int
    #: labels[i] = bit tuple for points[i]
    labels: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        object.__setattr__(self, "points", pts)
        if len(pts) != 2**self.bits_per_symbol:
            raise ValueError("alphabet size must be 2**bits_per_symbol")
        if len(set(self.labels)) != len(pts):
            raise ValueError("bit labelling must be a bijection")
        mean_energy = float(np.mean(np.abs(pts) ** 2))
        if abs(mean_energy - 1.0) > 1e-9:
            raise ValueError("alphabet must have unit mean energy")

    def bits_to_index(self, bits) -> int:
        return self._label_index[tuple(int(b) for b in bits)]

    @property
    def _label_index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def index_to_bits(self, idx: int):
        return self.labels[idx]


def complex_bpsk() -> Alphabet:
    """The 4-point unit circle alphabet (+1, +j, -1, -j), Gray labelled."""
    return Alphabet(
        name="complex-bpsk",
        points=np.array([1.0 + 0j, 1j, -1.0 + 0j, -1j]),
        bits_per_symbol=2,
        labels=((0, 0), (0, 1), (1, 1), (1, 0)),
    )


def square_qam(order: int) -> Alphabet:
    """Square QAM with per-axis Gray labelling, unit mean energy."""
    m = int(round(np.sqrt(order)))
    if m * m != order or order < 4:
        raise ValueError("order must be a square power of 4")
    bits_axis = int(np.log2(m))
    if 2**bits_axis != m:
        raise ValueError("order must be a power of 4")
    levels = np.arange(m) * 2.0 - (m - 1)
    gray = [i ^ (i >> 1) for i in range(m)]

    def axis_bits(g):
        return tuple((g >> (bits_axis - 1 - b)) & 1 for b in range(bits_axis))

    points = []
    labels = []
    for i in range(m):
        for q in range(m):
            points.append(levels[i] + 1j * levels[q])
            labels.append(axis_bits(gray[i]) + axis_bits(gray[q]))
    pts = np.array(points)
    pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
    return Alphabet(
        name=f"qam{order}",
        points=pts,
        bits_per_symbol=2 * bits_axis,
        labels=tuple(labels),
    )


def map_bits(bits, alphabet: Alphabet) -> np.ndarray:
    """Map a bit array to constellation points."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    eta = alphabet.bits_per_symbol
    if bits.size % eta:
        raise ValueError(f"bit count {bits.size} not divisible by eta={eta}")
    if bits.size == 0:
        return np.zeros(0, dtype=np.complex128)
    groups = bits.reshape(-1, eta)
    lut = np.zeros(2**eta, dtype=np.int64)
    for idx, lab in enumerate(alphabet.labels):
        word = 0
        for b in lab:
            word = (word << 1) | b
        lut[word] = idx
    words = groups @ (1 << np.arange(eta - 1, -1, -1, dtype=np.int64))
    return alphabet.points[lut[words]]


def demap_symbols(symbols, alphabet: Alphabet) -> np.ndarray:
    """Nearest-point slice followed by the inverse bit labelling."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    idx = slice_to_indices(symbols, alphabet)
    return indices_to_bits(idx, alphabet)


def slice_to_indices(symbols, alphabet: Alphabet) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    d = np.abs(symbols[:, None] - alphabet.points[None, :])
    return np.argmin(d, axis=1)


def indices_to_bits(indices, alphabet: Alphabet) -> np.ndarray:
    labels = np.array(alphabet.labels, dtype=np.uint8)
    return labels[np.asarray(indices, dtype=np.int64)].ravel()


def encode(symbols, pulse) -> np.ndarray:
    """Full convolution of the symbol stream with the pulse taps."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    if symbols.size == 0:
        raise ValueError("symbols must be nonempty")
    return np.convolve(symbols, pulse.taps.astype(np.complex128))


@dataclass(frozen=True)
class ChannelMatrix:
    """Banded Toeplitz matrix whose columns are shifted pulse copies."""

    taps: np.ndarray
    n_cols: int

    @property
    def n_rows(self) -> int:
        return self.n_cols + len(self.taps) - 1

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def dense(self) -> np.ndarray:
        K = len(self.taps)
        H = np.zeros((self.n_rows, self.n_cols))
        for c in range(self.n_cols):
            H[c : c + K, c] = self.taps
        return H

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128).ravel()
        if x.size != self.n_cols:
            raise ValueError("dimension mismatch")
        return np.convolve(x, self.taps.astype(np.complex128))

    def gram(self) -> np.ndarray:
        """H^T H as a dense symmetric Toeplitz matrix (tap autocorrelation)."""
        K = len(self.taps)
        acorr = np.correlate(self.taps, self.taps, mode="full")[K - 1 :]
        first = np.zeros(self.n_cols)
        first[: min(K, self.n_cols)] = acorr[: min(K, self.n_cols)]
        return scipy.linalg.toeplitz(first)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.dense(), delimiter=",")


@dataclass(frozen=True)
class SingularSpectrum:
    """Descending singular values of a channel matrix."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if np.any(np.diff(v) > 1e-12 * max(1.0, v[0] if v.size else 0.0)):
            raise ValueError("singular values must be non-increasing")
        if v.size and v[-1] < -1e-12:
            raise ValueError("singular values must be non-negative")


def build_channel_matrix(pulse, L_t: int) -> ChannelMatrix:
    if L_t < 1:
        raise ValueError(f"L_t must be >= 1, got {L_t}")
    return ChannelMatrix(taps=np.asarray(pulse.taps, dtype=np.float64), n_cols=L_t)


# Above this column count the dense SVD is replaced by an eigendecomposition
# of the Toeplitz Gram matrix; validated against the dense route in tests.
_DENSE_SVD_LIMIT = 512


def singular_spectrum(H: ChannelMatrix) -> SingularSpectrum:
    """All L_t singular values of H, descending."""
    if H.n_cols <= _DENSE_SVD_LIMIT:
        vals = np.linalg.svd(H.dense(), compute_uv=False)
    else:
        eig = scipy.linalg.eigvalsh(H.gram())
        vals = np.sqrt(np.clip(eig, 0.0, None))[::-1]
    if not np.all(np.isfinite(vals)):
        raise np.linalg.LinAlgError("singular value computation did not converge")
    return SingularSpectrum(values=np.sort(vals)[::-1])


@dataclass(frozen=True)
class Frame:
    """One encoded block: bits -> symbols -> samples."""

    bits: np.ndarray
    symbols: np.ndarray
    samples: np.ndarray
    pulse: object
    alphabet: Alphabet

    def __post_init__(self):
        K = self.pulse.samples_per_symbol
        if self.samples.size != self.symbols.size + K - 1:
            raise ValueError("L_r must equal L_t + K - 1")
        if self.bits.size != self.symbols.size * self.alphabet.bits_per_symbol:
            raise ValueError("bit count inconsistent with symbol count")


def make_frame(bits, pulse, alphabet: Alphabet) -> Frame:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    symbols = map_bits(bits, alphabet)
    samples = encode(symbols, pulse)
    return Frame(bits=bits, symbols=symbols, samples=samples, pulse=pulse, alphabet=alphabet)


def write_frame(frame: Frame, path) -> None:
    """Binary record: little-endian float64 (re, im) pairs plus a JSON sidecar."""
    path = str(path)
    inter = np.empty(2 * frame.samples.size, dtype="<f8")
    inter[0::2] = frame.samples.real
    inter[1::2] = frame.samples.imag
    inter.tofile(path)
    sidecar = {
        "samples_per_symbol": frame.pulse.samples_per_symbol,
        "symbol_time": frame.pulse.symbol_time,
        "pulse_kind": str(frame.pulse.kind.value),
        "pulse_params": frame.pulse.params,
        "alphabet": frame.alphabet.name,
        "bits_per_symbol": frame.alphabet.bits_per_symbol,
        "n_symbols": int(frame.symbols.size),
    }
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_samples(path):
    """Read back the binary record; returns (samples, sidecar dict)."""
    path = str(path)
    raw = np.fromfile(path, dtype="<f8")
    samples = raw[0::2] + 1j * raw[1::2]
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    return samples, sidecar
