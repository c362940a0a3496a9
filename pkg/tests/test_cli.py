import csv
import math

import numpy as np
import pytest

from slowlight.cli import (
    CONTRAST_COLUMNS,
    EXIT_IO,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_VALIDATION,
    FIT_COLUMNS,
    SPECTRUM_COLUMNS,
    TRACE_COLUMNS,
    ConfigError,
    load_config,
    main,
    parse_config,
    run_scenario,
    table_csv,
)
from slowlight.model import khz_to_rad_per_us


def test_minimal_transient_config_gets_reference_defaults():
    s = parse_config("scenario = transient\n")
    assert s.rabi_p() == pytest.approx(khz_to_rad_per_us(10.0))
    assert s.rabi_a() == pytest.approx(khz_to_rad_per_us(100.0))
    relax = s.relaxation()
    assert relax.population_decay[("5", "2")] == pytest.approx(1e-3)
    assert relax.coherence_decay_total[frozenset(("3", "5"))] == pytest.approx(0.05)
    assert s["probe.fwhm_us"] == 10.0


def test_hole_defaults_and_override():
    assert parse_config("").hole().fwhm_khz == 600.0
    assert parse_config("hole.fwhm_kHz = 600").hole().fwhm_khz == 600.0
    assert parse_config("hole.fwhm_kHz = 300  # narrower").hole().fwhm_khz == 300.0


@pytest.mark.parametrize("text,match", [
    ("rabi.A_kHz = -5", "rabi.A_kHz"),
    ("scenario = fig9", "unknown scenario"),
    ("\n\nbogus.key = 1", ":3: unknown key"),
    ("probe.fwhm_us = ten", ":1: cannot read"),
    ("just words", ":1: expected"),
    ("seed = 1\nseed = 2", "already set on line 1"),
    ("hole.depth = 1.2", "hole.depth"),
    ("repump.explicit = maybe", "cannot read"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text, "cfg")


def test_khz_round_trip():
    s = parse_config("rabi.A_kHz = 123.456")
    assert s.rabi_a() / (2 * math.pi) * 1e3 == pytest.approx(123.456, rel=1e-12)


def test_table_csv_nine_significant_digits():
    text = table_csv(("a", "b"), [(1 / 3, 0.0), (2e-12, 123456789012.0)])
    assert text.splitlines() == ["a,b", "0.333333333,0", "2e-12,1.23456789e+11"]


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _header(path):
    with open(path, newline="") as fh:
        return tuple(next(csv.reader(fh)))


def test_slowlight_outputs(tmp_path):
    cfg = _write(tmp_path, "scenario = slowlight\nhole.fwhm_kHz = 300\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--plots"]) == EXIT_OK
    assert _header(out / "trace.csv") == TRACE_COLUMNS
    assert _header(out / "spectrum.csv") == SPECTRUM_COLUMNS
    assert (out / "trace.svg").exists()
    summary = (out / "summary.txt").read_text()
    delay = float(summary.split("delay_centroid_us = ")[1].split()[0])
    assert delay == pytest.approx(4.244, rel=0.05)


def test_transient_outputs_and_analyze(tmp_path, capsys):
    cfg = _write(tmp_path, "scenario = transient\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert _header(out / "trace.csv") == TRACE_COLUMNS
    capsys.readouterr()
    assert main(["analyze", "--trace", str(out / "trace.csv"), "--window", "0,50"]) == EXIT_OK
    text = capsys.readouterr().out
    f = float(text.split("f_osc_population_5_minus_3_kHz = ")[1].split()[0])
    assert f == pytest.approx(100.0, rel=0.05)


def test_detuning_sweep_table(tmp_path):
    cfg = _write(tmp_path, "scenario = detuning-sweep\nsweep.detunings_MHz = 0, 1, 2\n"
                           "control.duration_us = 20\n")
    out = tmp_path / "out"
    run_scenario(load_config(cfg), out)
    assert _header(out / "contrast.csv") == CONTRAST_COLUMNS
    rows = np.genfromtxt(out / "contrast.csv", delimiter=",", names=True)
    mod = rows["modulation"]
    assert np.all(np.diff(mod) < 0)
    assert rows["transfer_oracle"][-1] == pytest.approx(0.1 ** 2 / (0.1 ** 2 + 4), rel=1e-8)


def test_intensity_sweep_fit(tmp_path):
    cfg = _write(tmp_path, "scenario = intensity-sweep\nsweep.intensities_Wcm2 = 4, 9, 16\n")
    out = tmp_path / "out"
    run_scenario(load_config(cfg), out)
    assert _header(out / "fit.csv") == FIT_COLUMNS
    r2 = float((out / "summary.txt").read_text().split("fit_r_squared = ")[1].split()[0])
    assert r2 >= 0.99


def test_sweep_command_writes_per_point_dirs(tmp_path):
    cfg = _write(tmp_path, "scenario = transient\ncontrol.duration_us = 20\n")
    out = tmp_path / "sw"
    rc = main(["sweep", "--config", str(cfg), "--param", "intensity.A_Wcm2",
               "--values", "4,16", "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "intensity.A_Wcm2=4" / "trace.csv").exists()
    assert "[intensity.A_Wcm2 = 16]" in (out / "summary.txt").read_text()


def test_exit_codes(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == EXIT_IO
    bad = _write(tmp_path, "rabi.A_kHz = -5\n")
    assert main(["simulate", "--config", str(bad)]) == EXIT_VALIDATION
    unknown = _write(tmp_path, "scenario = transient\n", "ok.cfg")
    assert main(["sweep", "--config", str(unknown), "--param", "nope", "--values", "1"]) == \
        EXIT_VALIDATION
    narrow = _write(tmp_path, "scenario = slowlight\nprobe.fwhm_us = 0.01\n", "narrow.cfg")
    assert main(["simulate", "--config", str(narrow), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
    assert not (tmp_path / "o").exists()
    assert main(["analyze", "--trace", str(tmp_path / "none.csv"), "--window", "0,1"]) == EXIT_IO
    assert main(["analyze", "--trace", str(bad), "--window", "1,0"]) == EXIT_VALIDATION


def test_failed_run_leaves_no_partial_output(tmp_path):
    bad = _write(tmp_path, "scenario = slowlight\nprobe.fwhm_us = 0.01\n")
    out = tmp_path / "o"
    out.mkdir()
    main(["simulate", "--config", str(bad), "--out", str(out)])
    assert list(out.iterdir()) == []
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".slowlight")] == []


@pytest.mark.parametrize("scenario", ["slowlight", "transient"])
def test_outputs_are_deterministic(tmp_path, scenario):
    cfg = _write(tmp_path, f"scenario = {scenario}\nnoise.level = 0.01\nseed = 5\n")
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(load_config(cfg), a)
    run_scenario(load_config(cfg), b)
    for f in sorted(a.glob("*.csv")):
        assert f.read_bytes() == (b / f.name).read_bytes()
