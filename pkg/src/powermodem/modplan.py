"""Modulation plans for M-FSK keying and the bit/symbol mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BandViolation, InvalidOrder, NyquistViolation, PlanError, SpacingViolation
from .framing import as_bits

DEFAULT_SAMPLE_RATE = 48_000.0
# below 5 kHz the line-level noise makes transmission impractical
DEFAULT_BAND = (5_000.0, 24_000.0)
SPACING_FACTOR = 4.0  # minimum carrier spacing, in units of 1/T
CARRIER_WIDTH_FACTOR = 3.0  # spectral width of one keyed carrier, in units of 1/T


def _is_power_of_two(m: int) -> bool:
    return m >= 2 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class ModulationPlan:
    """Carrier set and timing for an M-FSK transmission.

    Symbol ``i`` is sent on ``carriers[i]`` (natural binary order).
    """

    order: int
    symbol_period: float
    carriers: tuple[float, ...]
    sample_rate: float = DEFAULT_SAMPLE_RATE

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    @property
    def samples_per_symbol(self) -> int:
        # symbol boundaries are quantized to the sample grid
        return int(round(self.symbol_period * self.sample_rate))

    @property
    def spacing(self) -> float:
        """Minimum carrier spacing required by the symbol period (4/T)."""
        return SPACING_FACTOR / self.symbol_period

    @property
    def carrier_bandwidth(self) -> float:
        return CARRIER_WIDTH_FACTOR / self.symbol_period

    def to_config(self) -> str:
        carriers = ",".join(_fmt(f) for f in self.carriers)
        return (
            f"M={self.order}\n"
            f"T_ms={_fmt(self.symbol_period * 1000.0)}\n"
            f"carriers_hz={carriers}\n"
            f"sample_rate_hz={_fmt(self.sample_rate)}\n"
        )

    def summary(self) -> dict:
        return {
            "M": self.order,
            "T_ms": self.symbol_period * 1000.0,
            "carriers_hz": list(self.carriers),
            "sample_rate_hz": self.sample_rate,
            "bit_rate": bit_rate(self),
            "bandwidth_hz": bandwidth(self),
        }


def _fmt(x: float) -> str:
    return repr(float(x)).removesuffix(".0") if float(x).is_integer() else repr(float(x))


def validate_plan(
    plan: ModulationPlan,
    *,
    band: tuple[float, float] | None = DEFAULT_BAND,
    enforce_spacing: bool = True,
) -> ModulationPlan:
    """Check plan invariants, raising the matching PlanError subclass.

    ``band=None`` disables the usable-band check; ``enforce_spacing=False``
    allows carriers closer than 4/T (non-orthogonal, noiseless experiments).
    """
    if not _is_power_of_two(plan.order):
        raise InvalidOrder(f"order must be a power of two >= 2, got {plan.order}")
    if len(plan.carriers) != plan.order:
        raise PlanError(f"expected {plan.order} carriers, got {len(plan.carriers)}")
    if plan.symbol_period <= 0 or plan.sample_rate <= 0:
        raise PlanError("symbol period and sample rate must be positive")
    if plan.samples_per_symbol < 8:
        raise PlanError("symbol period shorter than 8 samples")
    nyquist = plan.sample_rate / 2
    for f in plan.carriers:
        if not 0 < f < nyquist:
            raise NyquistViolation(f"carrier {f} Hz outside (0, {nyquist}) Hz")
    diffs = np.diff(plan.carriers)
    if np.any(diffs <= 0):
        raise PlanError("carriers must be strictly ascending")
    # small relative slack so that exactly-4/T spacing survives float rounding
    if enforce_spacing and np.any(diffs < plan.spacing * (1 - 1e-9)):
        raise SpacingViolation(
            f"carrier spacing {diffs.min():g} Hz below 4/T = {plan.spacing:g} Hz"
        )
    if band is not None:
        lo, hi = band
        if min(plan.carriers) < lo or max(plan.carriers) > hi:
            raise BandViolation(f"carriers must lie within {lo:g}-{hi:g} Hz")
    return plan


def plan_bfsk(
    T: float,
    f0: float,
    f1: float,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    *,
    band: tuple[float, float] | None = DEFAULT_BAND,
) -> ModulationPlan:
    """Binary FSK: bit 0 on ``f0``, bit 1 on ``f1``.

    ``f0`` may be above ``f1``; the carriers keep their bit assignment.
    """
    if f0 == f1:
        raise SpacingViolation("f0 and f1 must differ")
    nyquist = sample_rate / 2
    for f in (f0, f1):
        if not 0 < f < nyquist:
            raise NyquistViolation(f"carrier {f} Hz outside (0, {nyquist}) Hz")
    if abs(f1 - f0) < (SPACING_FACTOR / T) * (1 - 1e-9):
        raise SpacingViolation(f"|f1 - f0| = {abs(f1 - f0):g} Hz below 4/T = {SPACING_FACTOR / T:g} Hz")
    plan = ModulationPlan(2, float(T), (float(f0), float(f1)), float(sample_rate))
    # validate on a sorted copy: the bfsk mapping may be descending
    check = ModulationPlan(2, float(T), tuple(sorted(plan.carriers)), float(sample_rate))
    validate_plan(check, band=band)
    return plan


def plan_mfsk(
    M: int,
    T: float,
    base: float,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    *,
    spacing: float | None = None,
    band: tuple[float, float] | None = DEFAULT_BAND,
) -> ModulationPlan:
    """M-FSK with carriers ``base + i * spacing``; spacing defaults to 4/T.

    An explicit ``spacing`` below 4/T is accepted (and not checked) so that
    dense carrier sets can be studied; anything else is validated.
    """
    if not isinstance(M, (int, np.integer)) or not _is_power_of_two(int(M)):
        raise InvalidOrder(f"order must be a power of two >= 2, got {M}")
    step = SPACING_FACTOR / T if spacing is None else float(spacing)
    carriers = tuple(float(base + i * step) for i in range(int(M)))
    plan = ModulationPlan(int(M), float(T), carriers, float(sample_rate))
    return validate_plan(plan, band=band, enforce_spacing=spacing is None or step >= plan.spacing)


def plan_mfsk_in_band(M: int, lo: float, hi: float, sample_rate: float = DEFAULT_SAMPLE_RATE) -> ModulationPlan:
    """Shortest-T plan whose 4/T-spaced carriers exactly span ``[lo, hi]``."""
    T = SPACING_FACTOR * (M - 1) / (hi - lo)
    return plan_mfsk(M, T, lo, sample_rate, band=None)


def bandwidth(plan: ModulationPlan) -> float:
    """Occupied bandwidth M*4/T + 3/T = (4M + 3)/T."""
    return plan.order * plan.spacing + plan.carrier_bandwidth


def bit_rate(plan: ModulationPlan) -> float:
    """log2(M)/T bit/s."""
    return plan.bits_per_symbol / plan.symbol_period


def plan_from_config(text: str) -> ModulationPlan:
    """Parse a key=value (or JSON) plan block; see ``ModulationPlan.to_config``."""
    from .config import parse_config

    cfg = parse_config(text)
    carriers = cfg["carriers_hz"]
    if isinstance(carriers, str):
        carriers = [float(c) for c in carriers.split(",") if c.strip()]
    plan = ModulationPlan(
        order=int(cfg["M"]),
        symbol_period=float(cfg["T_ms"]) / 1000.0,
        carriers=tuple(float(c) for c in carriers),
        sample_rate=float(cfg.get("sample_rate_hz", DEFAULT_SAMPLE_RATE)),
    )
    # bfsk plans may list carriers descending; validate on the sorted set
    check = ModulationPlan(plan.order, plan.symbol_period, tuple(sorted(plan.carriers)), plan.sample_rate)
    band = None if str(cfg.get("band_check", "true")).lower() in ("false", "0", "no") else DEFAULT_BAND
    enforce = str(cfg.get("spacing_check", "true")).lower() not in ("false", "0", "no")
    validate_plan(check, band=band, enforce_spacing=enforce)
    return plan


@dataclass(frozen=True)
class SymbolStream:
    symbols: np.ndarray
    order: int
    pad_bits: int = 0

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    def __len__(self) -> int:
        return len(self.symbols)

    def __post_init__(self):
        if self.symbols.size and (self.symbols.min() < 0 or self.symbols.max() >= self.order):
            raise ValueError(f"symbols must lie in [0, {self.order})")


def bits_to_symbols(bits, M: int) -> SymbolStream:
    """Group bits MSB-first into log2(M)-bit symbols, zero-padding the tail."""
    if not _is_power_of_two(M):
        raise InvalidOrder(f"order must be a power of two >= 2, got {M}")
    bits = as_bits(bits)
    k = int(math.log2(M))
    pad = (-bits.size) % k
    if pad:
        bits = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    groups = bits.reshape(-1, k).astype(np.int64)
    weights = 1 << np.arange(k - 1, -1, -1)
    return SymbolStream(groups @ weights, M, pad)


def symbols_to_bits(stream: SymbolStream, n_bits: int | None = None) -> np.ndarray:
    """Inverse of :func:`bits_to_symbols`; drops the declared padding."""
    k = stream.bits_per_symbol
    syms = np.asarray(stream.symbols, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    bits = ((syms[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    if n_bits is None:
        n_bits = bits.size - stream.pad_bits
    return bits[:n_bits]
