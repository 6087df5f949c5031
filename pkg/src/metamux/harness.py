"""Reproducible experiment runners: capacity sweeps, BER waterfalls,
spectrum reports, and spectrum-sharing runs.

Every stochastic quantity is derived from the master seed plus structural
indices (grid point, frame), so reruns are byte-identical regardless of
execution order.  Wall-clock timings are written to a separate sidecar so the
primary CSV/JSON outputs stay deterministic.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .capacity import (
    AllocationMode,
    capacity_ebn0,
    pulse_spectrum,
    required_ebn0,
    spectral_efficiency,
)
from .channel import (
    InterfererParams,
    awgn,
    calibrate_noise,
    make_qam_interferer,
    sharing_preset,
    superpose,
)
from .decoder import SmcConfig, joint_decode, smc_decode, viterbi_decode
from .mux import complex_bpsk, make_frame
from .waveform import (
    BandwidthExceedsGrid,
    PulseKind,
    bounded_psd_bandwidth,
    fpcb_bandwidth,
    magnitude_spectrum,
    make_pulse,
    spectrum_to_csv,
)

#: Default overlap-factor grid for capacity-vs-K sweeps.
DEFAULT_K_LIST = (2, 4, 8, 10, 20, 30, 50, 60, 100, 200, 300, 450, 600, 900, 1200, 1800)

_WAVEFORM_PRESETS = {
    "rect": {"kind": "rect"},
    "taylor35": {"kind": "taylor", "sidelobe_db": 35.0},
    "taylor50": {"kind": "taylor", "sidelobe_db": 50.0},
    "gaussian": {"kind": "gaussian"},
    "hamming": {"kind": "hamming"},
}


class ConfigError(ValueError):
    """Configuration validation failure, with the offending field named."""


@dataclass(frozen=True)
class WaveformSpec:
    name: str = "rect"
    sidelobe_db: float | None = None
    nbar: int | None = None
    bt_product: float = 0.3

    def make(self, K: int):
        if self.name not in _WAVEFORM_PRESETS:
            raise ConfigError(
                f"waveform.name: unknown waveform {self.name!r}; "
                f"choose from {sorted(_WAVEFORM_PRESETS)}"
            )
        preset = _WAVEFORM_PRESETS[self.name]
        kwargs = {}
        if preset["kind"] == "taylor":
            kwargs["sidelobe_db"] = (
                self.sidelobe_db if self.sidelobe_db is not None else preset["sidelobe_db"]
            )
            if self.nbar is not None:
                kwargs["nbar"] = self.nbar
        if preset["kind"] == "gaussian":
            kwargs["bt_product"] = self.bt_product
        return make_pulse(PulseKind(preset["kind"]), K, **kwargs)


@dataclass
class ExperimentConfig:
    seed: int
    k: int = 8
    waveform: WaveformSpec = field(default_factory=WaveformSpec)
    ebn0_grid_db: tuple = (10.0, 14.0, 18.0)
    bit_budget: int = 100_000
    min_errors: int = 100
    frame_symbols: int | None = None  # default 10 * K
    decoder: str = "auto"
    particles: int = 2000
    resample_threshold: float = 0.5
    lag: int | None = None
    viterbi_state_limit: int = 2**16
    interferer: InterfererParams | None = None
    k_list: tuple = DEFAULT_K_LIST
    pad_factor: int = 1024

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.seed is None:
            raise ConfigError("seed: a seed is mandatory (no wall-clock seeding)")
        if self.k < 1:
            raise ConfigError(f"k: must be >= 1, got {self.k}")
        grid = tuple(float(x) for x in self.ebn0_grid_db)
        if not grid:
            raise ConfigError("ebn0_grid_db: grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("ebn0_grid_db: grid must be strictly increasing")
        self.ebn0_grid_db = grid
        if self.bit_budget < 10_000:
            raise ConfigError(f"bit_budget: must be >= 10000, got {self.bit_budget}")
        if self.decoder not in ("auto", "viterbi", "smc"):
            raise ConfigError(f"decoder: unknown decoder {self.decoder!r}")
        if self.particles < 2:
            raise ConfigError("particles: at least 2 required")
        if not self.k_list or any(k < 1 for k in self.k_list):
            raise ConfigError("k_list: entries must be positive")
        self.k_list = tuple(int(k) for k in self.k_list)

    @property
    def frame_length(self) -> int:
        return self.frame_symbols if self.frame_symbols else 10 * self.k

    def smc_config(self) -> SmcConfig:
        return SmcConfig(
            particles=self.particles,
            resample_threshold=self.resample_threshold,
            lag=self.lag,
        )

    def to_json(self) -> str:
        def enc(o):
            if dataclasses.is_dataclass(o) and not isinstance(o, type):
                return dataclasses.asdict(o)
            raise TypeError(type(o))

        d = dataclasses.asdict(self)
        return json.dumps(d, indent=2, sort_keys=True, default=enc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        if "waveform" in d and d["waveform"] is not None:
            d["waveform"] = WaveformSpec(**d["waveform"])
        if d.get("interferer") is not None:
            d["interferer"] = InterfererParams(**d["interferer"])
        for key in ("ebn0_grid_db", "k_list"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class BerRecord:
    ebn0_db: float
    k: int
    waveform: str
    bits_sent: int
    bit_errors: int
    ber: float
    frames: int
    runtime_s: float
    seed: int
    decoder: str = ""


def _frame_seeds(master_seed: int, point_index: int, frame_index: int):
    """Independent child seeds for (bits, noise, decoder, interferer)."""
    ss = np.random.SeedSequence([int(master_seed), point_index, frame_index])
    return ss.spawn(4)


def occupied_bandwidth(pulse, attenuation_db: float = 35.0, pad_factor: int = 1024):
    """35 dB bounded-PSD bandwidth of the pulse, None when it exceeds the grid."""
    spec = magnitude_spectrum(pulse, pad_factor)
    try:
        return bounded_psd_bandwidth(spec, attenuation_db)
    except BandwidthExceedsGrid:
        return None


def run_capacity_sweep(config: ExperimentConfig, out_dir=None):
    """Required Eb/N0 for the 2K-bit target plus capacity curves per K.

    CSV schema: k,ebn0_db,mode,c_bits_per_symbol,eta_bits_s_hz,waveform
    """
    alphabet = complex_bpsk()
    eta = float(alphabet.bits_per_symbol)
    rows = []
    for k in config.k_list:
        pulse = config.waveform.make(k)
        spec = pulse_spectrum(pulse)
        bandwidth = occupied_bandwidth(pulse, pad_factor=config.pad_factor)
        for mode in (AllocationMode.WATERFILL, AllocationMode.EQUAL_POWER):
            req = required_ebn0(k, pulse, eta, target_bits=2.0 * k, mode=mode)
            rows.append(_capacity_row(k, req, f"required-{mode.value}", 2.0 * k, bandwidth, config))
            for ebn0 in config.ebn0_grid_db:
                rep = capacity_ebn0(spec, eta, k, ebn0, mode=mode)
                eff = (
                    spectral_efficiency(rep, bandwidth, pulse.symbol_time)
                    if bandwidth
                    else None
                )
                rows.append(
                    _capacity_row(k, ebn0, mode.value, rep.total_bits_per_symbol, bandwidth, config, eff)
                )
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = Path(out_dir) / "capacity.csv"
        with open(path, "w") as fh:
            fh.write("k,ebn0_db,mode,c_bits_per_symbol,eta_bits_s_hz,waveform\n")
            for r in rows:
                fh.write(
                    f"{r['k']},{r['ebn0_db']!r},{r['mode']},{r['c_bits_per_symbol']!r},"
                    f"{'' if r['eta_bits_s_hz'] is None else repr(r['eta_bits_s_hz'])},"
                    f"{r['waveform']}\n"
                )
    return rows


def _capacity_row(k, ebn0, mode, c_bits, bandwidth, config, eff=None):
    if eff is None and bandwidth:
        eff = c_bits / (bandwidth * 1.0)
    return {
        "k": k,
        "ebn0_db": float(ebn0),
        "mode": mode,
        "c_bits_per_symbol": float(c_bits),
        "eta_bits_s_hz": eff,
        "waveform": config.waveform.name,
    }


def _choose_decoder(config: ExperimentConfig, alphabet) -> str:
    if config.decoder != "auto":
        return config.decoder
    states = len(alphabet.points) ** (config.k - 1)
    return "viterbi" if states <= config.viterbi_state_limit else "smc"


def _decode_frame(kind, noisy, pulse, alphabet, sigma_sq, config, dec_seed):
    if kind == "viterbi":
        return viterbi_decode(noisy, pulse, alphabet, state_limit=config.viterbi_state_limit)
    return smc_decode(noisy, pulse, alphabet, sigma_sq, config.smc_config(), dec_seed)


def run_ber_sweep(config: ExperimentConfig, out_dir=None):
    """Encode -> calibrate -> impair -> decode per grid point, with early
    stop at min_errors errors or the bit budget."""
    alphabet = complex_bpsk()
    pulse = config.waveform.make(config.k)
    decoder_kind = _choose_decoder(config, alphabet)
    eta = alphabet.bits_per_symbol
    frame_bits = config.frame_length * eta

    writer = _IncrementalCsv(out_dir, "ber.csv") if out_dir else None
    records = []
    timings = {}
    for point_idx, ebn0 in enumerate(config.ebn0_grid_db):
        t0 = time.perf_counter()
        bits_sent = errors = frames = 0
        while bits_sent < config.bit_budget and errors < config.min_errors:
            bit_seed, noise_seed, dec_seed, _ = _frame_seeds(config.seed, point_idx, frames)
            rng = np.random.default_rng(bit_seed)
            bits = rng.integers(0, 2, frame_bits).astype(np.uint8)
            frame = make_frame(bits, pulse, alphabet)
            calib = calibrate_noise(frame.samples, eta, config.k, ebn0)
            noisy = awgn(frame.samples, calib.noise_variance, noise_seed)
            result = _decode_frame(
                decoder_kind, noisy, pulse, alphabet, calib.noise_variance, config, dec_seed
            )
            errors += int(np.sum(result.bits != bits))
            bits_sent += frame_bits
            frames += 1
        runtime = time.perf_counter() - t0
        rec = BerRecord(
            ebn0_db=float(ebn0),
            k=config.k,
            waveform=config.waveform.name,
            bits_sent=bits_sent,
            bit_errors=errors,
            ber=errors / bits_sent,
            frames=frames,
            runtime_s=runtime,
            seed=config.seed,
            decoder=decoder_kind,
        )
        records.append(rec)
        timings[str(ebn0)] = runtime
        if writer:
            writer.append(rec)
    if writer:
        writer.close()
        with open(Path(out_dir) / "ber_timing.json", "w") as fh:
            json.dump(timings, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return records


class _IncrementalCsv:
    """Append-only record writer; the file is valid after any record boundary.

    Wall-clock runtime is intentionally left out of the CSV so identical
    (config, seed) reruns are byte-identical; timings go to the sidecar.
    """

    HEADER = "ebn0_db,k,waveform,decoder,bits_sent,bit_errors,ber,frames,seed\n"

    def __init__(self, out_dir, name):
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        self.fh = open(Path(out_dir) / name, "w")
        self.fh.write(self.HEADER)
        self.fh.flush()

    def append(self, r: BerRecord):
        self.fh.write(
            f"{r.ebn0_db!r},{r.k},{r.waveform},{r.decoder},{r.bits_sent},"
            f"{r.bit_errors},{r.ber!r},{r.frames},{r.seed}\n"
        )
        self.fh.flush()

    def close(self):
        self.fh.close()


def run_spectrum_report(config: ExperimentConfig, out_dir):
    """Deterministic pulse spectrum CSV plus a JSON bandwidth report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pulse = config.waveform.make(config.k)
    spec = magnitude_spectrum(pulse, config.pad_factor)

    report = {
        "waveform": config.waveform.name,
        "k": config.k,
        "symbol_time": pulse.symbol_time,
        "processing_bandwidth_hz": pulse.sample_rate,
        "grid_resolution_hz": spec.resolution,
        "bounded_psd_hz": {},
        "fpcb_hz": {},
    }
    for atten in (35.0, 50.0):
        try:
            report["bounded_psd_hz"][f"{atten:g}"] = bounded_psd_bandwidth(spec, atten)
        except BandwidthExceedsGrid as exc:
            report["bounded_psd_hz"][f"{atten:g}"] = {
                "exceeds_grid": True,
                "grid_limit_hz": exc.grid_limit_hz,
            }
    report["fpcb_hz"]["0.99"] = fpcb_bandwidth(spec, 0.99)

    csv_path = out / "spectrum.csv"
    with open(csv_path, "w") as fh:
        fh.write(f"# waveform={config.waveform.name} k={config.k}\n")
        fh.write(
            f"# sample_rate_hz={pulse.sample_rate!r} resolution_hz={spec.resolution!r}\n"
        )
        fh.write("freq_hz,density_db\n")
        for f, d in zip(spec.freqs, spec.density_db):
            fh.write(f"{float(f)!r},{float(d)!r}\n")
    with open(out / "bandwidth.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def run_sharing_experiment(config: ExperimentConfig, out_dir=None):
    """Joint vs interferer-blind vs interferer-free decoding on shared frames.

    Returns (records, summary) where summary reports the Eb/N0 penalty of the
    joint decoder against the no-interferer baseline.
    """
    if config.interferer is None:
        raise ConfigError("interferer: a preset is required for the sharing run")
    params = config.interferer
    alphabet = complex_bpsk()
    pulse = config.waveform.make(config.k)
    eta = alphabet.bits_per_symbol
    frame_bits = config.frame_length * eta
    qam_eta = params.alphabet().bits_per_symbol
    smc_cfg = config.smc_config()

    writer = _IncrementalCsv(out_dir, "sharing.csv") if out_dir else None
    counters = {
        kind: [[0, 0] for _ in config.ebn0_grid_db] for kind in ("joint", "naive", "baseline")
    }
    qam_failures = 0
    for point_idx, ebn0 in enumerate(config.ebn0_grid_db):
        bits_sent = 0
        frames = 0
        while bits_sent < config.bit_budget:
            bit_seed, noise_seed, dec_seed, int_seed = _frame_seeds(
                config.seed, point_idx, frames
            )
            rng = np.random.default_rng(bit_seed)
            bits = rng.integers(0, 2, frame_bits).astype(np.uint8)
            frame = make_frame(bits, pulse, alphabet)
            L_r = frame.samples.size

            sps = params.samples_per_symbol
            n_qam_syms = max(1, (L_r - params.filter_span * sps) // sps - 1)
            n_qam_bits = n_qam_syms * qam_eta
            qrng = np.random.default_rng(int_seed)
            qam_bits = qrng.integers(0, 2, n_qam_bits).astype(np.uint8)
            interferer = make_qam_interferer(params, qam_bits)

            # the interferer's filter tail runs past the victim frame; the
            # receiver only sees the victim's observation window
            mixed = superpose(frame.samples, interferer, params.power_db)[:L_r]
            calib = calibrate_noise(frame.samples, eta, config.k, ebn0)
            noisy_mixed = awgn(mixed, calib.noise_variance, noise_seed)
            noisy_clean = awgn(frame.samples, calib.noise_variance, noise_seed)

            try:
                joint_res, _ = joint_decode(
                    noisy_mixed, pulse, alphabet, params, calib.noise_variance,
                    smc_cfg, dec_seed, n_qam_bits,
                )
                joint_errs = int(np.sum(joint_res.bits != bits))
            except Exception:
                qam_failures += 1
                joint_errs = frame_bits // 2
            naive_res = smc_decode(
                noisy_mixed, pulse, alphabet, calib.noise_variance, smc_cfg, dec_seed
            )
            base_res = smc_decode(
                noisy_clean, pulse, alphabet, calib.noise_variance, smc_cfg, dec_seed
            )
            counters["joint"][point_idx][0] += joint_errs
            counters["naive"][point_idx][0] += int(np.sum(naive_res.bits != bits))
            counters["baseline"][point_idx][0] += int(np.sum(base_res.bits != bits))
            for kind in counters:
                counters[kind][point_idx][1] += frame_bits
            bits_sent += frame_bits
            frames += 1

    records = []
    for kind in ("joint", "naive", "baseline"):
        for point_idx, ebn0 in enumerate(config.ebn0_grid_db):
            errs, sent = counters[kind][point_idx]
            rec = BerRecord(
                ebn0_db=float(ebn0),
                k=config.k,
                waveform=config.waveform.name,
                bits_sent=sent,
                bit_errors=errs,
                ber=errs / sent,
                frames=sent // frame_bits,
                runtime_s=0.0,
                seed=config.seed,
                decoder=kind,
            )
            records.append(rec)
            if writer:
                writer.append(rec)
    if writer:
        writer.close()

    summary = _sharing_summary(records, config, qam_failures)
    if out_dir is not None:
        with open(Path(out_dir) / "sharing_summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return records, summary


def _interp_ebn0_at_ber(points, target_ber):
    """Eb/N0 at which the BER curve reaches target_ber, log-linear between
    grid points; None when the curve never gets there."""
    for i, r in enumerate(points):
        ber = r.ber if r.ber > 0 else 0.5 / r.bits_sent
        if ber <= target_ber:
            if i == 0:
                return r.ebn0_db
            prev = points[i - 1]
            pber = prev.ber if prev.ber > 0 else 0.5 / prev.bits_sent
            lb0, lb1, lt = math.log10(pber), math.log10(ber), math.log10(target_ber)
            if lb1 >= lb0:
                return r.ebn0_db
            frac = (lt - lb0) / (lb1 - lb0)
            return prev.ebn0_db + frac * (r.ebn0_db - prev.ebn0_db)
    return None


def _sharing_summary(records, config, qam_failures):
    grid = list(config.ebn0_grid_db)
    by = {kind: [r for r in records if r.decoder == kind] for kind in ("joint", "baseline")}
    penalty = None
    anchor = None
    for r in sorted(by["baseline"], key=lambda r: r.ebn0_db):
        if r.ber < 1e-3:
            anchor = r
            break
    if anchor is not None:
        joint = sorted(by["joint"], key=lambda r: r.ebn0_db)
        # zero measured BER is below resolution; anchor at the counting floor
        target = anchor.ber if anchor.ber > 0 else 0.5 / anchor.bits_sent
        crossing = _interp_ebn0_at_ber(joint, target)
        if crossing is None:
            # joint never reaches the anchor BER on the grid
            crossing = grid[-1] + (grid[-1] - grid[0])
        penalty = crossing - anchor.ebn0_db
    return {
        "baseline_anchor_ebn0_db": None if anchor is None else anchor.ebn0_db,
        "baseline_anchor_ber": None if anchor is None else anchor.ber,
        "joint_penalty_db": penalty,
        "qam_slicing_failures": qam_failures,
    }
