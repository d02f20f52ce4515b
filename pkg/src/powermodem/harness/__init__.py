from .ber import (
    BerReport,
    SweepPoint,
    ber_sweep,
    ber_trial,
    default_workers,
    margin_points,
    rate_points,
    reports_to_csv,
)
from .spectra import SpectrumData, band_level, psd, spectral_width, spectrogram
from .wavio import FULL_SCALE_MA, lsb, read_wav, wav_info, write_wav

__all__ = [
    "BerReport", "SweepPoint", "ber_sweep", "ber_trial", "default_workers", "margin_points",
    "rate_points", "reports_to_csv", "SpectrumData", "band_level", "psd", "spectral_width",
    "spectrogram", "FULL_SCALE_MA", "lsb", "read_wav", "wav_info", "write_wav",
]
