"""Command-line front end.

Subcommands: capacity, ber, spectrum, share, encode, decode.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channel import calibrate_noise, sharing_preset
from .decoder import SmcConfig, smc_decode, viterbi_decode
from .harness import (
    ConfigError,
    ExperimentConfig,
    WaveformSpec,
    run_ber_sweep,
    run_capacity_sweep,
    run_sharing_experiment,
    run_spectrum_report,
)
from .mux import complex_bpsk, make_frame, read_samples, write_frame

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parse_grid(text: str):
    try:
        start, step, stop = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"--ebn0: expected start:step:stop, got {text!r}")
    if step <= 0 or stop < start:
        raise ConfigError("--ebn0: step must be positive and stop >= start")
    n = int(round((stop - start) / step)) + 1
    return tuple(start + i * step for i in range(n))


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig(seed=0)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if getattr(args, "waveform", None) is not None:
        cfg.waveform = WaveformSpec(name=args.waveform)
    if getattr(args, "ebn0", None) is not None:
        cfg.ebn0_grid_db = _parse_grid(args.ebn0)
    # encode's --bits is a frame size, not a sweep budget
    if args.command in ("ber", "share") and getattr(args, "bits", None) is not None:
        cfg.bit_budget = args.bits
    if getattr(args, "particles", None) is not None:
        cfg.particles = args.particles
    cfg.validate()
    return cfg


def _add_common(p, waveform=True):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed (mandatory via flag or config)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--k", type=int, help="overlap factor")
    if waveform:
        p.add_argument(
            "--waveform",
            choices=["rect", "taylor35", "taylor50", "gaussian", "hamming"],
        )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metamux", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="capacity sweep over K")
    _add_common(p)
    p.add_argument("--ebn0", help="grid start:step:stop in dB")

    p = sub.add_parser("ber", help="BER waterfall")
    _add_common(p)
    p.add_argument("--ebn0", help="grid start:step:stop in dB")
    p.add_argument("--bits", type=int, help="bit budget per grid point")
    p.add_argument("--particles", type=int, help="SMC particle count")

    p = sub.add_parser("spectrum", help="pulse spectrum and bandwidth report")
    _add_common(p)

    p = sub.add_parser("share", help="spectrum-sharing joint decoding run")
    _add_common(p)
    p.add_argument("--ebn0", help="grid start:step:stop in dB")
    p.add_argument("--bits", type=int, help="bit budget per grid point")
    p.add_argument("--particles", type=int, help="SMC particle count")

    p = sub.add_parser("encode", help="encode random or file bits to a frame record")
    _add_common(p)
    p.add_argument("--bits", type=int, default=20000, help="random bit count")
    p.add_argument("--bits-in", help="file of ASCII 0/1 bits to encode instead")
    p.add_argument("--frame-out", default="frame.bin", help="binary record path")

    p = sub.add_parser("decode", help="decode a frame record back to bits")
    _add_common(p)
    p.add_argument("--frame-in", required=True, help="binary record path")
    p.add_argument("--ebn0", type=float, default=None, help="Eb/N0 for SMC weighting")
    p.add_argument("--particles", type=int, help="SMC particle count")
    p.add_argument("--bits-out", default="decoded.bits", help="decoded bit file")
    return ap


def _cmd_encode(cfg, args):
    alphabet = complex_bpsk()
    pulse = cfg.waveform.make(cfg.k)
    if args.bits_in:
        text = Path(args.bits_in).read_text().split()
        bits = np.array([int(b) for chunk in text for b in chunk], dtype=np.uint8)
    else:
        rng = np.random.default_rng(cfg.seed)
        bits = rng.integers(0, 2, args.bits).astype(np.uint8)
    usable = (bits.size // alphabet.bits_per_symbol) * alphabet.bits_per_symbol
    frame = make_frame(bits[:usable], pulse, alphabet)
    out = Path(args.out) / args.frame_out
    out.parent.mkdir(parents=True, exist_ok=True)
    write_frame(frame, out)
    print(f"wrote {frame.samples.size} samples to {out}")


def _cmd_decode(cfg, args):
    alphabet = complex_bpsk()
    samples, sidecar = read_samples(Path(args.frame_in))
    k = sidecar["samples_per_symbol"]
    spec = WaveformSpec(name={"rect": "rect", "taylor": "taylor35"}.get(
        sidecar["pulse_kind"], sidecar["pulse_kind"]
    ))
    if sidecar["pulse_kind"] == "taylor":
        sll = sidecar.get("pulse_params", {}).get("sidelobe_db", 35)
        spec = WaveformSpec(name="taylor50" if sll == 50 else "taylor35")
    pulse = spec.make(k)
    states = len(alphabet.points) ** (k - 1)
    if states <= cfg.viterbi_state_limit:
        result = viterbi_decode(samples, pulse, alphabet)
    else:
        if args.ebn0 is None:
            raise ConfigError("--ebn0: required for particle decoding of large K")
        calib = calibrate_noise(samples, alphabet.bits_per_symbol, k, args.ebn0)
        smc_cfg = SmcConfig(particles=args.particles or cfg.particles)
        result = smc_decode(samples, pulse, alphabet, calib.noise_variance, smc_cfg, cfg.seed)
    out = Path(args.out) / args.bits_out
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(str(int(b)) for b in result.bits) + "\n")
    with open(str(out) + ".diag.json", "w") as fh:
        json.dump(result.diagnostics, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    print(f"decoded {result.bits.size} bits to {out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "capacity":
            run_capacity_sweep(cfg, out)
        elif args.command == "ber":
            run_ber_sweep(cfg, out)
        elif args.command == "spectrum":
            run_spectrum_report(cfg, out)
        elif args.command == "share":
            if cfg.interferer is None:
                cfg.interferer = sharing_preset()
            run_sharing_experiment(cfg, out)
        elif args.command == "encode":
            _cmd_encode(cfg, args)
        elif args.command == "decode":
            _cmd_decode(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
