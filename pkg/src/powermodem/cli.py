"""Command-line interface: ``powermodem <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import channel, framing, modplan, rx, txload
from .errors import ModemError
from .harness import ber, spectra, wavio

log = logging.getLogger("powermodem")


def _plan(path: str) -> modplan.ModulationPlan:
    return modplan.plan_from_config(Path(path).read_text())


def _profile(spec: str, seed: int | None = None) -> channel.ChannelProfile:
    if spec in channel.PRESETS:
        prof = channel.preset(spec)
    else:
        prof = channel.profile_from_config(Path(spec).read_text())
    return prof if seed is None else prof.with_seed(seed)


def _payload(args) -> bytes:
    if args.hex is not None:
        return bytes.fromhex(args.hex)
    if args.data is not None:
        return Path(args.data).read_bytes()
    raise SystemExit("give --data FILE or --hex HEX")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_tx(args) -> int:
    plan = _plan(args.plan)
    frames = framing.packetize(_payload(args))
    bits = framing.serialize(frames)
    cores = [int(c) for c in args.cores.split(",")]
    schedule = txload.build_load_schedule(bits, plan, cores, args.symbol_cycles, mode=args.mode)
    report = txload.run_transmission(schedule, spin_threshold_hz=args.spin_threshold)
    out = report.to_dict()
    out["frames"] = [f.hex() for f in frames]
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    plan = _plan(args.plan)
    profile = _profile(args.profile, args.seed)
    frames = framing.packetize(_payload(args))
    symbols = modplan.bits_to_symbols(framing.serialize(frames), plan.order)
    lead = int(round(args.lead_ms * 1e-3 * plan.sample_rate))
    w = channel.apply_channel(symbols, plan, profile, args.cores,
                              lead_samples=lead, tail_samples=plan.samples_per_symbol)
    clipped = wavio.write_wav(args.out, w)
    print(json.dumps({
        "wav": args.out,
        "samples": len(w),
        "sample_rate_hz": w.sample_rate,
        "clipped_samples": clipped,
        "frames": [f.hex() for f in frames],
        "noise_margin_db": channel.noise_margin_db(plan, profile, args.cores),
        "plan": plan.summary(),
        "profile": profile.summary(),
    }, indent=2, sort_keys=True, default=float))
    return 0


def cmd_rx(args) -> int:
    plan = _plan(args.plan)
    w = wavio.read_wav(args.wav)
    if w.sample_rate != plan.sample_rate:
        plan = modplan.ModulationPlan(plan.order, plan.symbol_period, plan.carriers, w.sample_rate)
    sync = rx.acquire_sync(w, plan, threshold=args.threshold)
    n_symbols = (len(w) - sync.start_offset) // plan.samples_per_symbol
    symbols, energies = rx.demodulate(w, plan, sync, n_symbols)
    bits = modplan.symbols_to_bits(symbols)
    payloads, stats = rx.recover_frames(bits)
    if args.raw_bits:
        Path(args.raw_bits).write_text("".join(map(str, bits)) + "\n")
    if args.energies:
        Path(args.energies).write_text(energies.to_csv(plan.carriers))
    print(json.dumps({
        "sync_offset": sync.start_offset,
        "sync_confidence": sync.confidence,
        "symbols": len(symbols),
        "frames_found": stats.frames_found,
        "crc_failures": stats.crc_failures,
        "payloads": [framing.bits_to_bytes(p).hex() for p in payloads],
        "data_hex": b"".join(framing.bits_to_bytes(p) for p in payloads).hex(),
    }, indent=2, sort_keys=True))
    return 0


def cmd_ber_sweep(args) -> int:
    profile = _profile(args.profile)
    if args.margins:
        plan = _plan(args.plan) if args.plan else modplan.plan_bfsk(1.0 / (args.rate or 1000.0), args.f0, args.f1)
        points = ber.margin_points(plan, _floats(args.margins), profile, args.cores)
    else:
        rates = _floats(args.rates) if args.rates else []
        points = ber.rate_points(rates, args.f0, args.f1, profile, args.cores)
    reports = ber.ber_sweep(points, args.n_bits, args.seed, workers=args.workers,
                            common_random_numbers=args.crn)
    _emit(ber.reports_to_csv(reports), args.out)
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True))
    return 0


def cmd_psd(args) -> int:
    w = wavio.read_wav(args.wav)
    _emit(spectra.psd(w, args.segment, args.overlap).to_csv(), args.out)
    return 0


def cmd_spectrogram(args) -> int:
    w = wavio.read_wav(args.wav)
    plan = _plan(args.plan) if args.plan else None
    _emit(spectra.spectrogram(w, args.window, args.hop, plan=plan).to_csv(), args.out)
    return 0


def cmd_wav_info(args) -> int:
    info = wavio.wav_info(args.wav)
    if info["channels"] == 1 and info["sample_width_bytes"] == 2:
        w = wavio.read_wav(args.wav)
        info["peak_ma"] = float(np.abs(w.samples).max()) if len(w) else 0.0
        info["rms_ma"] = float(np.sqrt(np.mean(w.samples ** 2))) if len(w) else 0.0
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="powermodem", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--data", help="payload file (raw bytes)")
        p.add_argument("--hex", help="payload as a hex string")

    p = sub.add_parser("tx", help="transmit by keying CPU load on the given cores")
    p.add_argument("--plan", required=True)
    data_args(p)
    p.add_argument("--cores", required=True, help="comma-separated core indices")
    p.add_argument("--mode", choices=[txload.BFSK, txload.ALG1], default=txload.BFSK)
    p.add_argument("--symbol-cycles", type=int, default=None)
    p.add_argument("--spin-threshold", type=float, default=txload.SPIN_THRESHOLD_HZ)
    p.set_defaults(func=cmd_tx)

    p = sub.add_parser("simulate", help="render frames through the channel model to a WAV file")
    p.add_argument("--plan", required=True)
    p.add_argument("--profile", default="pc_line", help="preset name or profile file")
    data_args(p)
    p.add_argument("--cores", type=int, default=channel.DEFAULT_CORES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lead-ms", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rx", help="demodulate a capture and recover frames")
    p.add_argument("--plan", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--raw-bits")
    p.add_argument("--energies")
    p.add_argument("--threshold", type=float, default=rx.DEFAULT_SYNC_THRESHOLD)
    p.set_defaults(func=cmd_rx)

    p = sub.add_parser("ber-sweep", help="BER over bit rates or noise margins, CSV out")
    p.add_argument("--profile", default="pc_line")
    p.add_argument("--rates", help="comma-separated bit rates (B-FSK, T = 1/rate)")
    p.add_argument("--margins", help="comma-separated Eb/N0 margins in dB")
    p.add_argument("--plan", help="plan file for margin sweeps")
    p.add_argument("--rate", type=float, help="bit rate for margin sweeps without --plan")
    p.add_argument("--f0", type=float, default=10_000.0)
    p.add_argument("--f1", type=float, default=18_000.0)
    p.add_argument("--cores", type=int, default=channel.DEFAULT_CORES)
    p.add_argument("--n-bits", type=int, default=ber.DEFAULT_N_BITS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help=f"default ${ber.WORKERS_ENV} or 1")
    p.add_argument("--crn", action="store_true", help="common random numbers across points")
    p.add_argument("--out", default="-")
    p.add_argument("--json", help="also write full reports as JSON")
    p.set_defaults(func=cmd_ber_sweep)

    p = sub.add_parser("psd", help="Welch PSD of a WAV capture, CSV out")
    p.add_argument("--wav", required=True)
    p.add_argument("--segment", type=int, default=4096)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("spectrogram", help="STFT of a WAV capture, CSV out")
    p.add_argument("--wav", required=True)
    p.add_argument("--plan", help="size the window to one symbol, hop to half a symbol")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--hop", type=int, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("wav-info", help="describe a WAV file")
    p.add_argument("--wav", required=True)
    p.set_defaults(func=cmd_wav_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ModemError, ValueError, OSError) as exc:
        print(f"powermodem: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
