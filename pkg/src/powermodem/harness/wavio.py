"""16-bit mono PCM WAV interchange for captured and simulated currents."""

from __future__ import annotations

import wave

import numpy as np

from ..channel import Waveform
from ..errors import UnsupportedFormat

# current (mA) that maps to int16 full scale
FULL_SCALE_MA = 64.0


def lsb(full_scale: float = FULL_SCALE_MA) -> float:
    return full_scale / 32768.0


def write_wav(path, w: Waveform, full_scale: float = FULL_SCALE_MA) -> int:
    """Write ``w`` as 16-bit PCM; returns the number of clipped samples."""
    scaled = np.round(w.samples / lsb(full_scale))
    clipped = int(np.count_nonzero((scaled < -32768) | (scaled > 32767)))
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    rate = int(round(w.sample_rate))
    if rate != w.sample_rate:
        raise UnsupportedFormat("WAV sample rates must be integral")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())
    return clipped


def wav_info(path) -> dict:
    try:
        with wave.open(str(path), "rb") as fh:
            return {
                "channels": fh.getnchannels(),
                "sample_width_bytes": fh.getsampwidth(),
                "sample_rate_hz": fh.getframerate(),
                "frames": fh.getnframes(),
                "duration_s": fh.getnframes() / fh.getframerate(),
            }
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(str(exc)) from exc


def read_wav(path, full_scale: float = FULL_SCALE_MA) -> Waveform:
    """Read a mono 16-bit PCM WAV, returning currents in mA."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1:
                raise UnsupportedFormat(f"expected mono, got {fh.getnchannels()} channels")
            if fh.getsampwidth() != 2:
                raise UnsupportedFormat(f"expected 16-bit samples, got {8 * fh.getsampwidth()}-bit")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(str(exc)) from exc
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return Waveform(pcm * lsb(full_scale), float(rate))
