"""Waterfilling, equal-power capacity, and required-Eb/N0 tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metamux.capacity import (
    AllocationMode,
    capacity,
    capacity_ebn0,
    equal_power,
    finite_length_factor,
    pulse_spectrum,
    required_ebn0,
    spectral_efficiency,
    waterfill,
)
from metamux.mux import SingularSpectrum
from metamux.waveform import PulseKind, make_pulse


def _spectrum(lam):
    return SingularSpectrum(values=np.sort(np.asarray(lam, dtype=float))[::-1])


class TestWaterfill:
    def test_textbook_two_channel_case(self):
        # gains l^2 = [3, 1], N=1, P=2: mu = 5/3, powers [4/3, 2/3]
        alloc = waterfill(np.array([3.0, 1.0]), 1.0, 2.0)
        assert alloc.mu == pytest.approx(5.0 / 3.0, abs=1e-12)
        assert alloc.powers == pytest.approx([4.0 / 3.0, 2.0 / 3.0], abs=1e-12)

    def test_power_budget_is_met_exactly(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            lam2 = rng.uniform(0.01, 9.0, size=rng.integers(1, 30))
            p = rng.uniform(0.1, 50.0)
            alloc = waterfill(lam2, 1.0, p)
            assert alloc.powers.sum() == pytest.approx(p, rel=1e-10)

    @given(
        n=st.integers(1, 20),
        seed=st.integers(0, 2**31),
        power=st.floats(0.01, 100.0),
    )
    @settings(max_examples=100, deadline=None)
    def test_kkt_conditions(self, n, seed, power):
        # active channels sit exactly at the water level; inactive ones have
        # a noise floor at or above it
        rng = np.random.default_rng(seed)
        lam2 = rng.uniform(0.01, 16.0, size=n)
        alloc = waterfill(lam2, 1.0, power)
        floors = 1.0 / lam2
        active = alloc.powers > 0
        assert alloc.powers[active] + floors[active] == pytest.approx(
            np.full(int(active.sum()), alloc.mu), rel=1e-9
        )
        assert np.all(floors[~active] >= alloc.mu - 1e-9)
        assert np.all(alloc.powers >= 0)

    def test_single_channel_gets_everything(self):
        alloc = waterfill(np.array([4.0]), 1.0, 5.0)
        assert alloc.powers == pytest.approx([5.0])

    def test_zero_gain_channel_gets_nothing(self):
        alloc = waterfill(np.array([1.0, 0.0]), 1.0, 3.0)
        assert alloc.powers == pytest.approx([3.0, 0.0])

    def test_zero_budget(self):
        alloc = waterfill(np.array([2.0, 1.0]), 1.0, 0.0)
        assert alloc.powers == pytest.approx([0.0, 0.0])

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            waterfill(np.array([-1.0]), 1.0, 1.0)
        with pytest.raises(ValueError):
            waterfill(np.array([1.0]), 0.0, 1.0)
        with pytest.raises(ValueError):
            waterfill(np.array([1.0]), 1.0, -1.0)


class TestCapacity:
    def test_waterfill_two_channel_value(self):
        # C = 0.5*(log2(1 + 4/3*3) + log2(1 + 2/3*1)) = 0.5*log2(25/3)
        lam2 = np.array([3.0, 1.0])
        alloc = waterfill(lam2, 1.0, 2.0)
        rep = capacity(_spectrum(np.sqrt(lam2)), alloc)
        assert rep.unfactored_bits_per_symbol == pytest.approx(
            0.5 * np.log2(25.0 / 3.0), abs=1e-12
        )

    def test_equal_power_two_channel_value(self):
        lam2 = np.array([3.0, 1.0])
        alloc = equal_power(lam2, 1.0, 2.0)
        rep = capacity(_spectrum(np.sqrt(lam2)), alloc, mode=AllocationMode.EQUAL_POWER)
        # 0.5*(log2(1+3) + log2(1+1)) = 1.5
        assert rep.unfactored_bits_per_symbol == pytest.approx(1.5, abs=1e-12)

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=100, deadline=None)
    def test_waterfill_never_below_equal_power(self, seed):
        rng = np.random.default_rng(seed)
        lam2 = rng.uniform(0.01, 9.0, size=rng.integers(1, 25))
        p = rng.uniform(0.1, 20.0)
        spec = _spectrum(np.sqrt(lam2))
        lam2_sorted = spec.values**2
        cw = capacity(spec, waterfill(lam2_sorted, 1.0, p))
        ce = capacity(spec, equal_power(lam2_sorted, 1.0, p))
        assert cw.unfactored_bits_per_symbol >= ce.unfactored_bits_per_symbol - 1e-9

    def test_shannon_special_case_k1(self):
        # a single unit-gain channel reduces to 0.5*log2(1 + P/N)
        for snr in (0.1, 1.0, 10.0, 100.0):
            alloc = waterfill(np.array([1.0]), 1.0, snr)
            rep = capacity(_spectrum([1.0]), alloc, K=1)
            assert rep.total_bits_per_symbol == pytest.approx(
                0.5 * np.log2(1.0 + snr), abs=1e-12
            )

    def test_finite_length_factor(self):
        # (L_t/K) / (L_t/K + (K-1)/K); tends to 1 as L_t grows
        assert finite_length_factor(10, 1) == pytest.approx(1.0)
        assert finite_length_factor(90, 10) == pytest.approx(9.0 / 9.9)
        assert finite_length_factor(10**7, 10) == pytest.approx(1.0, abs=1e-5)
        assert finite_length_factor(None, 10) == 1.0

    def test_factor_applied_to_total(self):
        lam2 = np.array([3.0, 1.0])
        alloc = waterfill(lam2, 1.0, 2.0)
        rep = capacity(_spectrum(np.sqrt(lam2)), alloc, L_t=16, K=4)
        factor = finite_length_factor(16, 4)
        assert rep.total_bits_per_symbol == pytest.approx(
            factor * rep.unfactored_bits_per_symbol, rel=1e-12
        )


class TestCapacityEbn0:
    def test_equal_power_closed_form(self):
        k = 8
        pulse = make_pulse(PulseKind.RECTANGULAR, k)
        spec = pulse_spectrum(pulse)
        rep = capacity_ebn0(spec, 2.0, k, 10.0, mode=AllocationMode.EQUAL_POWER)
        # C_I = sum 0.5*log2(1 + eta * (Ts/T) * (Eb/N0) * l_i^2), Ts/T = 1/K
        expect = 0.5 * np.sum(np.log2(1.0 + 2.0 * 10.0 / k * spec.values**2))
        assert rep.unfactored_bits_per_symbol == pytest.approx(expect, rel=1e-12)

    def test_capacity_increases_with_snr(self):
        spec = pulse_spectrum(make_pulse(PulseKind.RECTANGULAR, 4))
        vals = [
            capacity_ebn0(spec, 2.0, 4, db).total_bits_per_symbol
            for db in (0.0, 5.0, 10.0, 15.0)
        ]
        assert np.all(np.diff(vals) > 0)

    def test_required_ebn0_inverts_capacity(self):
        k = 4
        pulse = make_pulse(PulseKind.RECTANGULAR, k)
        req = required_ebn0(k, pulse, eta=2.0, target_bits=2.0 * k)
        rep = capacity_ebn0(pulse_spectrum(pulse), 2.0, k, req)
        assert rep.total_bits_per_symbol == pytest.approx(2.0 * k, rel=1e-5)

    def test_required_ebn0_grows_with_k(self):
        # squeezing 2K bits into the same symbol time costs more per bit
        reqs = [
            required_ebn0(k, make_pulse(PulseKind.RECTANGULAR, k), eta=2.0)
            for k in (1, 2, 4, 8, 16)
        ]
        assert np.all(np.diff(reqs) > 0)

    def test_waterfill_requires_no_more_than_equal_power(self):
        k = 8
        pulse = make_pulse(PulseKind.TAYLOR, k)
        rw = required_ebn0(k, pulse, 2.0, mode=AllocationMode.WATERFILL)
        re_ = required_ebn0(k, pulse, 2.0, mode=AllocationMode.EQUAL_POWER)
        assert rw <= re_ + 1e-6


class TestSpectralEfficiency:
    def test_normalizes_by_bandwidth_and_time(self):
        spec = pulse_spectrum(make_pulse(PulseKind.RECTANGULAR, 4))
        rep = capacity_ebn0(spec, 2.0, 4, 10.0)
        eff = spectral_efficiency(rep, B=2.0, T=1.0)
        assert eff == pytest.approx(rep.unfactored_bits_per_symbol / 2.0)

    def test_rejects_nonpositive_band(self):
        spec = pulse_spectrum(make_pulse(PulseKind.RECTANGULAR, 2))
        rep = capacity_ebn0(spec, 2.0, 2, 10.0)
        with pytest.raises(ValueError):
            spectral_efficiency(rep, B=0.0, T=1.0)
