"""CPU-load carrier generation.

Each selected core runs a worker that alternates busy-wait and idle phases
of ``1/(2 f)`` seconds to draw current at carrier frequency ``f``.

Two keying modes:

* ``alg1`` - on-off keying of one carrier: a '1' bit runs ``cycles_for_one``
  busy/idle cycles, a '0' bit idles for ``cycles_for_zero`` cycle times.
* ``bfsk`` - every symbol runs busy/idle cycles at that symbol's carrier
  (works for any M).

Workers are separate processes (the GIL would serialize busy-wait threads),
each pinned to its core with ``sched_setaffinity`` where available.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
import threading
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AffinityUnsupported,
    ClockResolutionTooCoarse,
    EmptyCoreSet,
    FrequencyTooHigh,
    RateTooHigh,
    TransmissionBusy,
)
from .framing import as_bits
from .modplan import ModulationPlan, bits_to_symbols

log = logging.getLogger(__name__)

ALG1 = "alg1"
BFSK = "bfsk"

# shortest half-cycle a Python busy-wait loop reproduces with any fidelity
MIN_HALF_CYCLE = 5e-6
# above this carrier, idle phases end with a short spin to hit the deadline
SPIN_THRESHOLD_HZ = 400.0
OVERRUN_FACTOR = 1.10
# time given to worker processes to come up before the shared start instant
STARTUP_DELAY = 0.25


@dataclass(frozen=True)
class Segment:
    """A run of busy/idle cycles at ``freq``, or pure idle when ``freq`` is None."""

    freq: float | None
    cycles: int
    duration: float


@dataclass(frozen=True)
class LoadSchedule:
    core_ids: tuple[int, ...]
    carrier_freq: float
    cycles_for_zero: int
    cycles_for_one: int
    bits: np.ndarray
    mode: str = BFSK
    carriers: tuple[float, ...] = ()
    symbols: tuple[int, ...] = ()
    symbol_period: float = 0.0

    @property
    def half_cycle(self) -> float:
        return 0.5 / self.carrier_freq

    def segments(self) -> list[Segment]:
        if self.mode == ALG1:
            out = []
            for b in self.bits:
                if b:
                    out.append(Segment(self.carrier_freq, self.cycles_for_one,
                                       self.cycles_for_one * 2 * self.half_cycle))
                else:
                    out.append(Segment(None, self.cycles_for_zero,
                                       self.cycles_for_zero * 2 * self.half_cycle))
            return out
        out = []
        for s in self.symbols:
            f = self.carriers[s]
            cycles = _symbol_cycles_at(f, self.symbol_period)
            out.append(Segment(f, cycles, cycles / f))
        return out

    @property
    def nominal_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments()))


def _symbol_cycles_at(freq: float, T: float) -> int:
    return max(1, int(round(T * freq)))


def build_load_schedule(
    bits,
    plan: ModulationPlan,
    cores,
    symbol_cycles: int | None = None,
    *,
    mode: str = BFSK,
) -> LoadSchedule:
    """Translate bits into per-core busy/idle timing.

    By default every bit (or symbol) lasts one symbol period:
    ``cycles = round(T * f)`` at the carrier in use. ``symbol_cycles``
    overrides the cycle count of the keyed carrier in ``alg1`` mode.
    """
    cores = tuple(sorted(set(int(c) for c in cores)))
    if not cores:
        raise EmptyCoreSet("at least one core is required")
    ncpu = os.cpu_count() or 1
    bad = [c for c in cores if not 0 <= c < ncpu]
    if bad:
        raise ValueError(f"cores {bad} not present (machine has {ncpu})")
    if mode not in (ALG1, BFSK):
        raise ValueError(f"mode must be {ALG1!r} or {BFSK!r}")
    bits = as_bits(bits)
    top = max(plan.carriers)
    if 0.5 / top < MIN_HALF_CYCLE:
        raise FrequencyTooHigh(f"half cycle at {top:g} Hz is below {MIN_HALF_CYCLE * 1e6:g} us")
    T = plan.symbol_period
    if mode == ALG1:
        if plan.order != 2:
            raise ValueError("alg1 keying uses a single carrier; give a binary plan")
        f = plan.carriers[1]
        n1 = symbol_cycles or _symbol_cycles_at(f, T)
        return LoadSchedule(cores, f, n1, n1, bits, ALG1, tuple(plan.carriers), (), T)
    stream = bits_to_symbols(bits, plan.order)
    f0, f1 = plan.carriers[0], plan.carriers[-1]
    n1 = _symbol_cycles_at(f1, T)
    n0 = _symbol_cycles_at(f0, T)
    return LoadSchedule(cores, f1, n0, n1, bits, BFSK, tuple(plan.carriers),
                        tuple(int(s) for s in stream.symbols), T)


@dataclass
class TransmissionReport:
    bits_sent: int
    wall_time: float
    nominal_time: float
    overruns: dict
    pinned: bool
    affinity: dict
    mode: str
    trace: "UtilizationTrace | None" = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "bits_sent": self.bits_sent,
            "wall_time_s": self.wall_time,
            "nominal_time_s": self.nominal_time,
            "overruns": {str(k): v for k, v in self.overruns.items()},
            "pinned": self.pinned,
            "affinity": {str(k): sorted(v) for k, v in self.affinity.items()},
            "mode": self.mode,
        }


def _spin_until(deadline: int) -> None:
    now = time.monotonic_ns
    while now() < deadline:
        pass


def _idle_until(deadline: int, spin_margin: int) -> None:
    remaining = deadline - time.monotonic_ns()
    if remaining > spin_margin:
        time.sleep((remaining - spin_margin) / 1e9)
    if spin_margin:
        _spin_until(deadline)


def _worker(core, segments, barrier, start_ns, stop, results, spin_threshold, spin_margin_ns):
    pinned = True
    try:
        os.sched_setaffinity(0, {core})
    except (AttributeError, OSError):
        pinned = False
    try:
        affinity = sorted(os.sched_getaffinity(0))
    except AttributeError:
        affinity = []
    barrier.wait()
    t = start_ns.value
    _idle_until(t, 0)
    overruns = 0
    for freq, cycles, duration in segments:
        if stop.value:
            break
        if freq is None:
            end = t + int(round(duration * 1e9))
            _idle_until(end, 0)
            t = end
            continue
        half = 0.5e9 / freq
        margin = spin_margin_ns if freq > spin_threshold else 0
        base = t
        for j in range(cycles):
            busy_end = base + int(round((2 * j + 1) * half))
            idle_end = base + int(round((2 * j + 2) * half))
            t0 = time.monotonic_ns()
            _spin_until(busy_end)
            t1 = time.monotonic_ns()
            if t1 - max(t0, busy_end - half) > OVERRUN_FACTOR * half:
                overruns += 1
            _idle_until(idle_end, margin)
            if time.monotonic_ns() - t1 > OVERRUN_FACTOR * half:
                overruns += 1
        t = base + int(round(2 * cycles * half))
    results.put((core, pinned, affinity, overruns))


def _sleep_overshoot_ns(samples: int = 20) -> int:
    over = []
    for _ in range(samples):
        t0 = time.monotonic_ns()
        time.sleep(1e-5)
        over.append(time.monotonic_ns() - t0 - 10_000)
    return int(np.median(over))


_TX_GUARD = threading.Lock()


def run_transmission(
    schedule: LoadSchedule,
    *,
    spin_threshold_hz: float = SPIN_THRESHOLD_HZ,
    monitor_rate: float | None = None,
) -> TransmissionReport:
    """Execute ``schedule`` on its cores and wait for completion.

    All workers start at one shared monotonic instant and follow absolute
    deadlines, so phase errors do not accumulate. A phase running past 110 %
    of its nominal length counts as an overrun. With ``monitor_rate`` set,
    the workers' CPU usage is sampled during the run and returned as
    ``report.trace``. Only one transmission may run per process at a time.
    """
    if not _TX_GUARD.acquire(blocking=False):
        raise TransmissionBusy("a transmission is already running in this process")
    try:
        res = time.get_clock_info("monotonic").resolution
        if res > schedule.half_cycle / 10:
            raise ClockResolutionTooCoarse(f"monotonic clock resolution {res} s too coarse")
        if not hasattr(os, "sched_setaffinity"):
            warnings.warn("CPU affinity unsupported on this platform; workers run unpinned",
                          stacklevel=2)
        segs = [(s.freq, s.cycles, s.duration) for s in schedule.segments()]
        spin_margin = _sleep_overshoot_ns()
        ctx = mp.get_context("fork") if hasattr(os, "fork") else mp.get_context()
        barrier = ctx.Barrier(len(schedule.core_ids) + 1)
        start_ns = ctx.Value("q", 0)
        stop = ctx.Value("b", 0)
        results = ctx.Queue()
        procs = [
            ctx.Process(target=_worker, args=(c, segs, barrier, start_ns, stop, results,
                                              spin_threshold_hz, spin_margin), daemon=True)
            for c in schedule.core_ids
        ]
        for p in procs:
            p.start()
        start_ns.value = time.monotonic_ns() + int(STARTUP_DELAY * 1e9)
        barrier.wait()
        trace = None
        try:
            if monitor_rate:
                trace = sample_utilization(
                    schedule.nominal_duration, monitor_rate,
                    pids=[p.pid for p in procs], start_ns=start_ns.value,
                )
            out = [results.get() for _ in procs]
        except BaseException:
            stop.value = 1
            raise
        finally:
            for p in procs:
                p.join(timeout=schedule.nominal_duration + 5)
        wall = (time.monotonic_ns() - start_ns.value) / 1e9
        pinned = all(o[1] for o in out)
        if not pinned:
            warnings.warn(str(AffinityUnsupported("could not pin every worker")), stacklevel=2)
        return TransmissionReport(
            bits_sent=int(schedule.bits.size),
            wall_time=wall,
            nominal_time=schedule.nominal_duration,
            overruns={o[0]: o[3] for o in out},
            pinned=pinned,
            affinity={o[0]: set(o[2]) for o in out},
            mode=schedule.mode,
            trace=trace,
        )
    finally:
        _TX_GUARD.release()


@dataclass(frozen=True)
class UtilizationTrace:
    samples: np.ndarray  # (n_samples, n_series), busy fraction in [0, 1]
    sample_rate: float
    source: str = ""
    labels: tuple = ()


def _read_schedstat(pid: int) -> int:
    with open(f"/proc/{pid}/schedstat") as fh:
        return int(fh.read().split()[0])


def _read_proc_stat() -> dict:
    busy = {}
    with open("/proc/stat") as fh:
        for line in fh:
            if line.startswith("cpu") and line[3].isdigit():
                parts = line.split()
                vals = [int(v) for v in parts[1:]]
                idle = vals[3] + (vals[4] if len(vals) > 4 else 0)
                busy[int(parts[0][3:])] = (sum(vals) - idle, sum(vals))
    return busy


def max_sample_rate(pids=None) -> float:
    """Highest sampling rate the accounting source can support."""
    if pids:
        return 5000.0
    return float(os.sysconf("SC_CLK_TCK"))


def sample_utilization(
    duration: float,
    rate: float,
    *,
    pids=None,
    cores=None,
    start_ns: int | None = None,
) -> UtilizationTrace:
    """Sample busy fractions for ``duration`` seconds at ``rate`` Hz.

    With ``pids`` the per-process scheduler run time (nanosecond accounting)
    is used, one series per pid. Otherwise per-core jiffy counters from
    ``/proc/stat`` are read, one series per core, limited to the kernel tick
    rate.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    limit = max_sample_rate(pids)
    if rate > limit:
        raise RateTooHigh(f"{rate} Hz exceeds the {limit:g} Hz accounting resolution")
    n = int(round(duration * rate))
    if pids:
        labels = tuple(pids)
        source = "schedstat"

        def read():
            # busy ns per pid; the "total" is elapsed ns, filled in from the timestamp
            return np.array([_read_schedstat(p) for p in pids], dtype=np.float64), None
    else:
        stat = _read_proc_stat()
        labels = tuple(sorted(stat if cores is None else cores))
        source = "proc_stat"

        def read():
            s = _read_proc_stat()
            return (np.array([s[c][0] for c in labels], dtype=np.float64),
                    np.array([s[c][1] for c in labels], dtype=np.float64))
    if n <= 0:
        return UtilizationTrace(np.zeros((0, len(labels))), rate, source, labels)

    t0 = start_ns if start_ns is not None else time.monotonic_ns()
    period = 1e9 / rate
    # Cumulative counters are read near each grid instant and then
    # interpolated onto the exact grid. On a loaded machine reads can run
    # late (the sampler competes with the workers it watches); interpolating
    # the cumulative curves keeps every nanosecond of busy time in the bin it
    # belongs to instead of smearing it into whichever read came next.
    stamps, busy_log, total_log = [], [], []

    def record():
        busy, total = read()
        now = time.monotonic_ns()
        stamps.append(float(now))
        busy_log.append(busy)
        total_log.append(np.full(len(labels), float(now)) if total is None else total)

    record()
    for k in range(n + 1):
        _idle_until(t0 + int(round(k * period)), 0)
        record()
    stamps = np.asarray(stamps)
    grid = t0 + period * np.arange(n + 1)
    busy_log, total_log = np.asarray(busy_log), np.asarray(total_log)
    out = np.zeros((n, len(labels)))
    for j in range(len(labels)):
        busy = np.diff(np.interp(grid, stamps, busy_log[:, j]))
        total = np.diff(np.interp(grid, stamps, total_log[:, j]))
        out[:, j] = np.divide(busy, total, out=np.zeros_like(busy), where=total > 0)
    return UtilizationTrace(np.clip(out, 0.0, 1.0), rate, source, labels)


def dominant_frequency(trace: UtilizationTrace, series: int = 0) -> float:
    """Frequency of the largest non-DC spectral peak of one trace series."""
    x = trace.samples[:, series] - trace.samples[:, series].mean()
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    freqs = np.fft.rfftfreq(x.size, 1.0 / trace.sample_rate)
    return float(freqs[1:][np.argmax(spec[1:])])
