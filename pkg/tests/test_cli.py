import json

import numpy as np
import pytest

from powermodem.channel import Waveform
from powermodem.harness import write_wav

from powermodem.cli import main
from powermodem.modplan import plan_bfsk


@pytest.fixture
def plan_file(tmp_path):
    path = tmp_path / "plan.cfg"
    path.write_text(plan_bfsk(0.001, 7_000.0, 11_000.0).to_config())
    return path


@pytest.fixture
def capture(tmp_path, plan_file, capsys):
    wav = tmp_path / "cap.wav"
    assert main(["simulate", "--plan", str(plan_file), "--profile", "pc_line",
                 "--hex", "deadbeef0badf00d", "--seed", "5", "--lead-ms", "2.3",
                 "--out", str(wav)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["frames"] == ["adeadbeefca", "a0badf00d" + info["frames"][1][-2:]]
    assert info["clipped_samples"] == 0
    return wav


def test_simulate_then_rx_round_trip(capture, plan_file, tmp_path, capsys):
    bits_path, energies = tmp_path / "bits.txt", tmp_path / "e.csv"
    assert main(["rx", "--plan", str(plan_file), "--wav", str(capture),
                 "--raw-bits", str(bits_path), "--energies", str(energies)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["data_hex"] == "deadbeef0badf00d"
    assert out["frames_found"] == 2 and out["crc_failures"] == 0
    assert bits_path.read_text().startswith("1010")
    assert energies.read_text().splitlines()[0] == "symbol,energy_7000hz_mA2,energy_11000hz_mA2"


def test_simulate_is_seeded(tmp_path, plan_file, capsys):
    outs = []
    for name in ("a.wav", "b.wav"):
        main(["simulate", "--plan", str(plan_file), "--hex", "01020304", "--seed", "9",
              "--out", str(tmp_path / name)])
        outs.append((tmp_path / name).read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_rx_without_preamble_fails(tmp_path, plan_file, capsys):
    wav = tmp_path / "quiet.wav"
    write_wav(wav, Waveform(np.zeros(4800)))
    assert main(["rx", "--plan", str(plan_file), "--wav", str(wav)]) == 2
    assert "error" in capsys.readouterr().err


def test_wav_info(capture, capsys):
    assert main(["wav-info", "--wav", str(capture)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["channels"] == 1 and info["sample_rate_hz"] == 48_000
    assert info["peak_ma"] > 5.0


def test_psd_csv(capture, tmp_path):
    out = tmp_path / "psd.csv"
    assert main(["psd", "--wav", str(capture), "--segment", "1024", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "frequency_hz,psd_dB" and len(lines) == 1 + 513


def test_spectrogram_csv(capture, plan_file, capsys):
    assert main(["spectrogram", "--wav", str(capture), "--plan", str(plan_file)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "time_s,frequency_hz,magnitude_dB"
    assert len(lines) > 1000


def test_ber_sweep_rates(tmp_path, capsys):
    js = tmp_path / "r.json"
    assert main(["ber-sweep", "--profile", "noiseless", "--rates", "500,1000",
                 "--f0", "7000", "--f1", "11000", "--n-bits", "1000", "--json", str(js)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and lines[0].startswith("M,T_ms,bit_rate_bps")
    reports = json.loads(js.read_text())
    assert [r["ber"] for r in reports] == [0.0, 0.0]
    assert reports[0]["plan"]["carriers_hz"] == [7000.0, 11000.0]


def test_ber_sweep_margins_deterministic(tmp_path, plan_file):
    texts = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["ber-sweep", "--profile", "noiseless", "--plan", str(plan_file),
                     "--margins", "6,9", "--n-bits", "1000", "--seed", "3", "--crn",
                     "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_ber_sweep_empty(capsys):
    assert main(["ber-sweep", "--profile", "noiseless"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1


def test_tx_runs(tmp_path, capsys):
    plan = tmp_path / "slow.cfg"
    plan.write_text("M=2\nT_ms=2\ncarriers_hz=2000,4000\nband_check=false\n")
    assert main(["tx", "--plan", str(plan), "--hex", "0f", "--cores", "0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bits_sent"] == 44 and out["frames"] == ["a0f000000" + out["frames"][0][-2:]]
    assert out["wall_time_s"] == pytest.approx(0.088, rel=0.2)


def test_bad_plan_reports_error(tmp_path, capsys):
    plan = tmp_path / "bad.cfg"
    plan.write_text("M=2\nT_ms=1\ncarriers_hz=10000,10500\n")
    assert main(["simulate", "--plan", str(plan), "--hex", "00", "--out",
                 str(tmp_path / "x.wav")]) == 2
    assert "4/T" in capsys.readouterr().err


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
