"""Estimator-style wrappers so the encoder and decoders compose with
scikit-learn pipelines: transform() multiplexes bit frames into sample
streams, predict() recovers bits."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .decoder import SmcConfig, smc_decode, viterbi_decode
from .harness import WaveformSpec
from .mux import complex_bpsk, make_frame


def _as_bit_matrix(X):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("expected a 2-d array of bit frames")
    if not np.isin(X, (0, 1)).all():
        raise ValueError("bit frames must contain only 0 and 1")
    return X.astype(np.uint8)


class MetaMultiplexer(TransformerMixin, BaseEstimator):
    """Overlap-encode frames of bits into complex sample streams.

    Each input row is one frame of bits; each output row is the corresponding
    L_t + K - 1 complex samples.
    """

    def __init__(self, waveform="rect", k=4, nbar=None, bt_product=0.3):
        self.waveform = waveform
        self.k = k
        self.nbar = nbar
        self.bt_product = bt_product

    def fit(self, X=None, y=None):
        spec = WaveformSpec(name=self.waveform, nbar=self.nbar, bt_product=self.bt_product)
        self.pulse_ = spec.make(self.k)
        self.alphabet_ = complex_bpsk()
        return self

    def transform(self, X):
        check_is_fitted(self, "pulse_")
        X = _as_bit_matrix(X)
        out = [make_frame(row, self.pulse_, self.alphabet_).samples for row in X]
        return np.vstack(out)


class SequenceDecoder(BaseEstimator):
    """Recover bit frames from overlapped sample streams.

    method="viterbi" is exact and limited to small overlap factors;
    method="smc" is the particle decoder and needs the noise variance.
    """

    def __init__(
        self,
        waveform="rect",
        k=4,
        method="viterbi",
        sigma_sq=0.0,
        particles=2000,
        resample_threshold=0.5,
        lag=None,
        seed=0,
        nbar=None,
        bt_product=0.3,
    ):
        self.waveform = waveform
        self.k = k
        self.method = method
        self.sigma_sq = sigma_sq
        self.particles = particles
        self.resample_threshold = resample_threshold
        self.lag = lag
        self.seed = seed
        self.nbar = nbar
        self.bt_product = bt_product

    def fit(self, X=None, y=None):
        if self.method not in ("viterbi", "smc"):
            raise ValueError(f"unknown method {self.method!r}")
        spec = WaveformSpec(name=self.waveform, nbar=self.nbar, bt_product=self.bt_product)
        self.pulse_ = spec.make(self.k)
        self.alphabet_ = complex_bpsk()
        return self

    def predict(self, X):
        check_is_fitted(self, "pulse_")
        X = np.asarray(X, dtype=np.complex128)
        if X.ndim == 1:
            X = X[None, :]
        rows = []
        for i, row in enumerate(X):
            if self.method == "viterbi":
                res = viterbi_decode(row, self.pulse_, self.alphabet_)
            else:
                cfg = SmcConfig(
                    particles=self.particles,
                    resample_threshold=self.resample_threshold,
                    lag=self.lag,
                )
                res = smc_decode(
                    row, self.pulse_, self.alphabet_, self.sigma_sq, cfg,
                    np.random.SeedSequence([self.seed, i]),
                )
            rows.append(res.bits)
        return np.vstack(rows)
