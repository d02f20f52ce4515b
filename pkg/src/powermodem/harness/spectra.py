"""PSD and spectrogram export (plot-ready arrays, no rendering)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..channel import Waveform
from ..errors import TooShort
from ..modplan import ModulationPlan

_TINY = 1e-30


@dataclass(frozen=True)
class SpectrumData:
    frequencies: np.ndarray
    values: np.ndarray  # dB; (n_freq,) for a PSD, (n_freq, n_time) for a spectrogram
    times: np.ndarray | None = None
    unit: str = "dB"

    def to_csv(self) -> str:
        if self.times is None:
            lines = [f"frequency_hz,psd_{self.unit}"]
            lines += [f"{f:.6g},{v:.6f}" for f, v in zip(self.frequencies, self.values)]
        else:
            lines = ["time_s,frequency_hz,magnitude_" + self.unit]
            for j, t in enumerate(self.times):
                lines += [f"{t:.6g},{f:.6g},{v:.6f}" for f, v in zip(self.frequencies, self.values[:, j])]
        return "\n".join(lines) + "\n"


def psd(w: Waveform, segment: int = 4096, overlap: float = 0.5, nfft: int | None = None) -> SpectrumData:
    """Welch averaged periodogram (Hann window), one-sided, in dB re 1 mA^2/Hz."""
    if segment > len(w):
        raise TooShort(f"segment of {segment} samples exceeds waveform of {len(w)}")
    freqs, pxx = signal.welch(
        w.samples, fs=w.sample_rate, window="hann", nperseg=segment,
        noverlap=int(segment * overlap), nfft=nfft, scaling="density", detrend=False,
    )
    return SpectrumData(freqs, 10 * np.log10(np.maximum(pxx, _TINY)))


def spectrogram(
    w: Waveform,
    window: int | None = None,
    hop: int | None = None,
    *,
    plan: ModulationPlan | None = None,
    nfft: int | None = None,
    taper: str = "hann",
) -> SpectrumData:
    """STFT power in dB.

    With a plan and no explicit sizes, the window is one symbol and the hop
    half a symbol, i.e. two time bins per symbol. ``taper="boxcar"`` matches
    the receiver's rectangular integration window.
    """
    if window is None:
        window = plan.samples_per_symbol if plan else 256
    if hop is None:
        hop = max(1, window // 2)
    if hop > window:
        raise ValueError("hop must not exceed the window")
    if window > len(w):
        raise TooShort(f"window of {window} samples exceeds waveform of {len(w)}")
    freqs, times, sxx = signal.spectrogram(
        w.samples, fs=w.sample_rate, window=taper, nperseg=window,
        noverlap=window - hop, nfft=nfft, scaling="density", mode="psd", detrend=False,
    )
    return SpectrumData(freqs, 10 * np.log10(np.maximum(sxx, _TINY)), times)


def band_level(spec: SpectrumData, lo: float, hi: float) -> float:
    """Mean linear power in [lo, hi) Hz, returned in dB."""
    mask = (spec.frequencies >= lo) & (spec.frequencies < hi)
    lin = 10 ** (np.asarray(spec.values)[mask] / 10)
    return float(10 * np.log10(lin.mean()))


def spectral_width(spec: SpectrumData, center: float, drop_db: float = 20.0) -> float:
    """Width of the contiguous region around the peak near ``center`` lying
    within ``drop_db`` of that peak (linear interpolation at the edges)."""
    f = spec.frequencies
    v = spec.values if spec.times is None else 10 * np.log10(np.mean(10 ** (spec.values / 10), axis=1))
    near = np.abs(f - center) <= 0.1 * center
    peak = int(np.flatnonzero(near)[np.argmax(v[near])])
    level = v[peak] - drop_db

    def edge(direction: int) -> float:
        i = peak
        while 0 <= i + direction < f.size and v[i + direction] > level:
            i += direction
        j = i + direction
        if not 0 <= j < f.size:
            return f[i]
        # interpolate between the last bin above and the first below
        frac = (v[i] - level) / (v[i] - v[j])
        return f[i] + frac * (f[j] - f[i])

    return float(edge(+1) - edge(-1))
