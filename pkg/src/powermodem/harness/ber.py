"""Bit-error-rate trials and sweeps over the simulated channel."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..channel import DEFAULT_CORES, ChannelProfile, apply_channel, noise_margin_db, with_margin
from ..errors import NoPreambleFound
from ..framing import FRAME_BITS, PAYLOAD_BITS, encode_frame
from ..modplan import ModulationPlan, bits_to_symbols, bit_rate, plan_bfsk, symbols_to_bits
from ..rx import SyncEstimate, acquire_sync, demodulate, recover_frames, refine_sync

log = logging.getLogger(__name__)

WORKERS_ENV = "POWERMODEM_WORKERS"
DEFAULT_N_BITS = 100_000


@dataclass
class BerReport:
    plan: dict
    profile: dict
    cores: int
    margin_db: float
    bits_sent: int
    bit_errors: int
    ber: float
    frames_sent: int
    frames_accepted: int
    frames_crc_failed: int
    sync_failures: int
    seed: int
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            # wall time varies run to run; keep reports byte-identical by default
            d.pop("wall_time")
        return d

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)


CSV_COLUMNS = [
    ("M", "M"), ("T_ms", "T_ms"), ("bit_rate", "bit_rate_bps"), ("carriers", "carriers_hz"),
    ("profile", "profile"), ("tap", "tap"), ("cores", "cores"), ("margin", "margin_db"),
    ("bits_sent", "bits_sent"), ("bit_errors", "bit_errors"), ("ber", "ber"),
    ("frames_sent", "frames_sent"), ("frames_accepted", "frames_accepted"),
    ("frames_crc_failed", "frames_crc_failed"), ("sync_failures", "sync_failures"), ("seed", "seed"),
]


def _seed_sequence(seed) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed if isinstance(seed, (list, tuple)) else int(seed))


def ber_trial(
    plan: ModulationPlan,
    profile: ChannelProfile,
    n_bits: int = DEFAULT_N_BITS,
    seed: int = 0,
    *,
    cores: int = DEFAULT_CORES,
    inject_flips: int = 0,
    known_timing: bool = False,
) -> BerReport:
    """Send ``n_bits`` random payload bits through framing, channel and receiver.

    Each frame is rendered on its own with a random silent lead-in shorter
    than one symbol; the receiver acquires the preamble, refines timing over
    the frame, and demodulates. Payload bits are compared regardless of CRC
    outcome. ``inject_flips`` flips that many received payload bits at evenly
    spaced positions, bypassing the channel. Results depend only on the
    arguments.
    """
    if n_bits < 1000:
        warnings.warn("BER estimates from fewer than 1000 bits are not meaningful", stacklevel=2)
    t_start = time.perf_counter()
    ss = _seed_sequence(seed)
    data_ss, frames_ss = ss.spawn(2)
    payload = np.random.default_rng(data_ss).integers(0, 2, n_bits, dtype=np.uint8)
    n_frames = -(-n_bits // PAYLOAD_BITS)
    padded = np.zeros(n_frames * PAYLOAD_BITS, dtype=np.uint8)
    padded[:n_bits] = payload

    n = plan.samples_per_symbol
    received = np.empty_like(padded)
    frame_bits = []
    sync_failures = 0
    for i, frame_ss in enumerate(frames_ss.spawn(n_frames)):
        frame = encode_frame(padded[i * PAYLOAD_BITS:(i + 1) * PAYLOAD_BITS])
        syms = bits_to_symbols(frame.bits, plan.order)
        rng = np.random.default_rng(frame_ss)
        lead = int(rng.integers(0, n))
        noise_seed = int(rng.integers(0, 2**63))
        w = apply_channel(syms, plan, profile.with_seed(noise_seed), cores,
                          lead_samples=lead, tail_samples=n)
        if known_timing:
            sync = SyncEstimate(lead, 1.0)
        else:
            try:
                sync = acquire_sync(w, plan, search=(0, n))
            except NoPreambleFound:
                # the frame is known to be there; decode from the best guess
                sync_failures += 1
                sync = acquire_sync(w, plan, search=(0, n), threshold=None)
            sync = refine_sync(w, plan, sync, len(syms))
        out, _ = demodulate(w, plan, sync, len(syms))
        bits = symbols_to_bits(out, FRAME_BITS)
        if bits.size < FRAME_BITS:
            bits = np.concatenate([bits, np.zeros(FRAME_BITS - bits.size, dtype=np.uint8)])
        received[i * PAYLOAD_BITS:(i + 1) * PAYLOAD_BITS] = bits[4:4 + PAYLOAD_BITS]
        frame_bits.append(bits)

    if inject_flips:
        positions = np.unique(np.linspace(0, n_bits - 1, inject_flips).round().astype(int))
        if positions.size != inject_flips:
            raise ValueError("more flips requested than distinct bit positions")
        received[positions] ^= 1
        for p in positions:
            frame_bits[p // PAYLOAD_BITS][4 + p % PAYLOAD_BITS] ^= 1

    errors = int(np.count_nonzero(received[:n_bits] != payload))
    _, stats = recover_frames(np.concatenate(frame_bits) if frame_bits else np.zeros(0, np.uint8))
    return BerReport(
        plan=plan.summary(),
        profile=profile.summary(),
        cores=cores,
        margin_db=round(noise_margin_db(plan, profile, cores), 9),
        bits_sent=n_bits,
        bit_errors=errors,
        ber=errors / n_bits,
        frames_sent=n_frames,
        frames_accepted=stats.accepted,
        frames_crc_failed=stats.crc_failures,
        sync_failures=sync_failures,
        seed=int(seed) if not isinstance(seed, (list, tuple)) else list(seed),
        wall_time=time.perf_counter() - t_start,
    )


@dataclass(frozen=True)
class SweepPoint:
    plan: ModulationPlan
    profile: ChannelProfile
    cores: int = DEFAULT_CORES


def rate_points(rates, f0: float, f1: float, profile: ChannelProfile, cores: int = DEFAULT_CORES,
                sample_rate: float = 48_000.0) -> list[SweepPoint]:
    """B-FSK points at the given bit rates (T = 1/rate) on fixed carriers."""
    return [SweepPoint(plan_bfsk(1.0 / r, f0, f1, sample_rate), profile, cores) for r in rates]


def margin_points(plan: ModulationPlan, margins_db, profile: ChannelProfile,
                  cores: int = DEFAULT_CORES) -> list[SweepPoint]:
    """Fixed plan, white noise set for each Eb/N0 margin."""
    return [SweepPoint(plan, with_margin(profile, plan, m, cores), cores) for m in margins_db]


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _run_point(args) -> BerReport:
    point, n_bits, seed = args
    return ber_trial(point.plan, point.profile, n_bits, seed, cores=point.cores)


def ber_sweep(
    points,
    n_bits: int = DEFAULT_N_BITS,
    seed: int = 0,
    *,
    workers: int | None = None,
    common_random_numbers: bool = False,
) -> list[BerReport]:
    """Run :func:`ber_trial` at every point, in point order.

    Point ``i`` draws from the stream ``(seed, i)``, or from ``seed`` itself
    when ``common_random_numbers`` is set (same payloads, lead-ins and noise
    realizations at every point, which makes trends comparable at small bit
    counts). Worker count never changes the results.
    """
    points = list(points)
    jobs = [(p, n_bits, seed if common_random_numbers else [int(seed), i])
            for i, p in enumerate(points)]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_run_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, jobs))


def _row(r: BerReport) -> dict:
    return {
        "M": r.plan["M"],
        "T_ms": f"{r.plan['T_ms']:.6g}",
        "bit_rate": f"{r.plan['bit_rate']:.6g}",
        "carriers": " ".join(f"{f:g}" for f in r.plan["carriers_hz"]),
        "profile": r.profile["name"],
        "tap": r.profile["tap"],
        "cores": r.cores,
        "margin": f"{r.margin_db:.4f}",
        "bits_sent": r.bits_sent,
        "bit_errors": r.bit_errors,
        "ber": f"{r.ber:.8g}",
        "frames_sent": r.frames_sent,
        "frames_accepted": r.frames_accepted,
        "frames_crc_failed": r.frames_crc_failed,
        "sync_failures": r.sync_failures,
        "seed": json.dumps(r.seed).replace(" ", ""),
    }


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([header for _, header in CSV_COLUMNS])
    for r in reports:
        row = _row(r)
        writer.writerow([row[key] for key, _ in CSV_COLUMNS])
    return buf.getvalue()
