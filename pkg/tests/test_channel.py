import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from powermodem import channel
from powermodem.channel import (
    ChannelProfile,
    Waveform,
    add_noise,
    apply_channel,
    attenuate,
    noise_margin_db,
    preset,
    profile_from_config,
    synthesize_waveform,
    with_margin,
)
from powermodem.errors import UnknownCoreCount
from powermodem.harness.spectra import band_level, psd
from powermodem.modplan import SymbolStream, bits_to_symbols, plan_bfsk
from powermodem.rx import carrier_energy


def _syms(seq, M=2):
    return SymbolStream(np.asarray(seq, dtype=np.int64), M)


def test_eight_core_amplitude(keyed_plan, noiseless):
    w = synthesize_waveform(_syms([0] * 20), keyed_plan, noiseless, cores=8)
    # 19 mA peak-to-peak load swing -> 9.5 mA fundamental peak
    assert np.abs(w.samples).max() == pytest.approx(9.5, rel=1e-3)


def test_amplitude_table_defaults():
    prof = preset("pc_line")
    assert [prof.swing(c) for c in (2, 4, 6, 8)] == [2.5, 12.0, 15.0, 19.0]
    assert 2.5 < prof.swing(3) < 12.0
    strict = preset("pc_line", interpolate=False)
    with pytest.raises(UnknownCoreCount):
        strict.swing(3)


def test_non_monotone_amplitudes_rejected():
    with pytest.raises(ValueError):
        ChannelProfile(amplitude_by_cores={2: 5.0, 4: 1.0})


def test_empty_symbols(keyed_plan, noiseless):
    assert len(synthesize_waveform(_syms([]), keyed_plan, noiseless)) == 0


def test_single_symbol_tone(keyed_plan, noiseless):
    w = synthesize_waveform(_syms([0]), keyed_plan, noiseless)
    assert len(w) == 240
    spec = np.abs(np.fft.rfft(w.samples))
    freqs = np.fft.rfftfreq(240, 1 / 48_000)
    assert freqs[np.argmax(spec)] == pytest.approx(10_000.0)


def test_phase_continuity(keyed_plan, noiseless, rng):
    w = synthesize_waveform(_syms(rng.integers(0, 2, 50)), keyed_plan, noiseless, cores=4)
    a = 6.0
    max_step = a * 2 * np.pi * 18_000 / 48_000
    assert np.abs(np.diff(w.samples)).max() <= max_step * (1 + 1e-9)


def test_parseval_energy(keyed_plan, noiseless, rng):
    w = synthesize_waveform(_syms(rng.integers(0, 2, 100)), keyed_plan, noiseless, cores=4)
    expected = 6.0 ** 2 / 2 * w.duration
    assert w.energy() == pytest.approx(expected, rel=0.01)


def test_harmonics_flag():
    prof = preset("noiseless", harmonics=True)
    n = 2400
    low = plan_bfsk(0.005, 5_000.0, 6_000.0)
    w = synthesize_waveform(_syms([0] * 10), low, prof, cores=4)
    fund = carrier_energy(w, 5_000.0, 0, n)
    third = carrier_energy(w, 15_000.0, 0, n)
    assert third / fund == pytest.approx(1 / 9, rel=1e-6)


def test_attenuation_examples():
    w = Waveform(np.ones(10))
    one_km = attenuate(w, ChannelProfile(distance_km=1.0))
    assert one_km.samples[0] == pytest.approx(10 ** -0.5, rel=1e-12)
    assert attenuate(w, ChannelProfile(distance_km=0.0)).samples[0] == 1.0
    assert attenuate(w, ChannelProfile(distance_km=2.0)).samples[0] == pytest.approx(0.1, rel=1e-12)


@given(st.floats(0, 5), st.floats(0, 5))
def test_attenuation_composes(d1, d2):
    w = Waveform(np.linspace(-1, 1, 7))
    twice = attenuate(attenuate(w, ChannelProfile(distance_km=d1)), ChannelProfile(distance_km=d2))
    once = attenuate(w, ChannelProfile(distance_km=d1 + d2))
    np.testing.assert_allclose(twice.samples, once.samples, rtol=1e-12, atol=0)


def test_zero_noise_is_identity(rng):
    w = Waveform(rng.standard_normal(1000))
    assert add_noise(w, preset("noiseless")) is w


def test_noise_is_deterministic():
    w = Waveform(np.zeros(4800))
    a = add_noise(w, preset("pc_line", rng_seed=9))
    b = add_noise(w, preset("pc_line", rng_seed=9))
    c = add_noise(w, preset("pc_line", rng_seed=10))
    assert a.samples.tobytes() == b.samples.tobytes()
    assert not np.array_equal(a.samples, c.samples)


def _noise(profile, seconds=10.0):
    return add_noise(Waveform(np.zeros(int(seconds * 48_000))), profile)


def test_line_level_low_band_noisier():
    spec = psd(_noise(preset("pc_line"), 2.0), 4096)
    assert band_level(spec, 100, 5_000) > band_level(spec, 5_000, 24_000) + 6


def test_phase_level_high_band_quieter():
    spec = psd(_noise(preset("phase"), 2.0), 4096)
    assert band_level(spec, 15_000, 24_000) < band_level(spec, 100, 15_000) - 6


@pytest.mark.parametrize("name", ["pc_line", "phase"])
def test_noise_psd_matches_profile(name):
    prof = preset(name)
    spec = psd(_noise(prof, 10.0), 4096)
    for lo, hi, level in prof.noise_bands:
        # stay clear of the band edges where the Welch window smears the step
        measured = band_level(spec, lo + 200, hi - 200)
        assert measured == pytest.approx(10 * np.log10(level), abs=2.0)


def test_apply_channel_noiseless_equals_synthesis(keyed_plan, noiseless, rng):
    syms = _syms(rng.integers(0, 2, 30))
    a = apply_channel(syms, keyed_plan, noiseless, 4)
    b = synthesize_waveform(syms, keyed_plan, noiseless, 4)
    assert np.array_equal(a.samples, b.samples)


def test_apply_channel_seeded(keyed_plan, rng):
    syms = _syms(rng.integers(0, 2, 30))
    prof = preset("pc_line", rng_seed=4, distance_km=0.3)
    a = apply_channel(syms, keyed_plan, prof, 4, lead_samples=17)
    b = apply_channel(syms, keyed_plan, prof, 4, lead_samples=17)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert len(a) == 30 * 240 + 17


def test_phase_level_six_db_contrast():
    plan = plan_bfsk(0.1, 19_000.0, 20_000.0)
    # 0.3 mA on the '1' carrier, 0.15 mA on the '0' carrier
    # the contrast is a property of the tap gain, so measure it without noise
    prof = preset("phase", amplitude_by_cores={4: 0.6}, noise_bands=((0.0, 24_000.0, 0.0),),
                  gain_bands=((18_500.0, 19_500.0, 20 * np.log10(0.5)),))
    w = apply_channel(bits_to_symbols("1010101010", 2), plan, prof, 4)
    n = plan.samples_per_symbol
    one = np.mean([carrier_energy(w, 20_000.0, k * n, n) for k in range(0, 10, 2)])
    zero = np.mean([carrier_energy(w, 19_000.0, k * n, n) for k in range(1, 10, 2)])
    assert 10 * np.log10(one / zero) == pytest.approx(6.0, abs=1.0)


def test_default_line_margin_is_13_db():
    plan = plan_bfsk(0.001, 7_000.0, 11_000.0)
    assert noise_margin_db(plan, preset("pc_line"), 4) == pytest.approx(13.0, abs=0.01)


def test_with_margin(keyed_plan):
    prof = with_margin(preset("noiseless"), keyed_plan, 9.5, cores=6)
    assert noise_margin_db(keyed_plan, prof, 6) == pytest.approx(9.5, abs=1e-9)


def test_device_offsets_above_12_khz():
    plan = plan_bfsk(0.001, 13_000.0, 17_000.0)
    pc = noise_margin_db(plan, preset("pc_line"))
    assert pc - noise_margin_db(plan, preset("server_line")) == pytest.approx(15.0)
    assert pc - noise_margin_db(plan, preset("iot_line")) == pytest.approx(25.0)


def test_profile_config_key_value():
    prof = profile_from_config(
        "preset=pc_line\n"
        "amplitude_by_cores=1:1,2:3\n"
        "noise_bands=0-10000:1e-3,10000-24000:2e-4\n"
        "distance_km=0.5\n"
        "rng_seed=3\n"
    )
    assert prof.swing(2) == 3.0
    assert prof.psd_at([500.0, 20_000.0]).tolist() == [1e-3, 2e-4]
    assert prof.distance_km == 0.5


def test_profile_config_json():
    prof = profile_from_config('{"preset": "phase", "distance_km": 1.5}')
    assert prof.tap == channel.PHASE_LEVEL and prof.distance_km == 1.5


def test_waveform_rejects_nan():
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]))
