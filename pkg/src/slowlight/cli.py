"""Command-line front end: config files, scenario runs, CSV/SVG/summary output.

Config files are flat ``key = value`` lines; ``#`` starts a comment.
Keys carry their units in the name (``_kHz``, ``_MHz``, ``_us``, ``_Wcm2``).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, propagation, spectra
from .analysis import AnalysisError
from .liouville import IntegrationError, InvariantError, SteadyStateError, evolve
from .model import (
    GAUSSIAN,
    RECTANGULAR,
    IntensityCalibration,
    ModelError,
    Pulse,
    RelaxationSpec,
    ScenarioConfig,
    build_pr_yso_scheme,
    initial_populations,
    khz_to_rad_per_us,
    mhz_to_rad_per_us,
    rabi_from_intensity,
)
from .propagation import PropagationError, ProbePulseSpec
from .spectra import SpectrumError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

SCENARIOS = ("slowlight", "switch", "detuning-sweep", "transient", "intensity-sweep")

TRACE_COLUMNS = ("t_us", "I_in", "I_out", "rho22", "rho33", "rho55", "Im_rho_probe", "Omega_A")
SPECTRUM_COLUMNS = ("detuning_kHz", "alphaL", "phase_rad")
CONTRAST_COLUMNS = ("detuning_MHz", "dip", "modulation", "transfer_oracle")
FIT_COLUMNS = ("I_A_Wcm2", "sqrt_I", "f_osc_kHz", "f_fit_kHz", "residual_kHz")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, err: Exception):
        super().__init__(f"[{stage}] {err}")
        self.stage = stage
        self.cause = err


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


# key -> (type, default); None defaults mean "derived"
SCHEMA: dict[str, tuple] = {
    "scenario": (str, "transient"),
    "seed": (int, 0),
    "noise.level": (float, 0.0),
    "probe.fwhm_us": (float, 10.0),
    "probe.detuning_kHz": (float, 0.0),
    "probe.center_us": (float, 0.0),
    "intensity.P_Wcm2": (float, 3.0),
    "intensity.A_Wcm2": (float, 10.0),
    "rabi.P_kHz": (float, None),
    "rabi.A_kHz": (float, None),
    "calib.P_kHz_per_sqrtWcm2": (float, 10.0 / math.sqrt(3.0)),
    "calib.A_kHz_per_sqrtWcm2": (float, 100.0 / math.sqrt(10.0)),
    "relax.G25_kHz": (float, 1.0),
    "relax.G35_kHz": (float, 1.0),
    "relax.g25_kHz": (float, 50.0),
    "relax.g35_kHz": (float, 50.0),
    "relax.g23_kHz": (float, 0.0),
    "init.state": (str, "post-repump"),
    "hole.D": (float, 10.0),
    "hole.depth": (float, 0.8),
    "hole.jitter_kHz": (float, 300.0),
    "hole.homogeneous_kHz": (float, 0.0),
    "hole.fwhm_kHz": (float, None),
    "hole.span_fwhm": (float, 64.0),
    "hole.points_per_fwhm": (int, 64),
    "control.detuning_MHz": (float, 0.0),
    "control.duration_us": (float, 50.0),
    "control.start_us": (float, None),
    "switch.od_eff": (float, None),
    "repump.explicit": (_bool, False),
    "repump.R1_Wcm2": (float, 25.0),
    "repump.R2_Wcm2": (float, 11.0),
    "repump.duration_us": (float, 20.0),
    "repump.gap_us": (float, 200.0),
    "calib.R1_kHz_per_sqrtWcm2": (float, 100.0 / math.sqrt(10.0)),
    "sim.sample_step_us": (float, 0.05),
    "sim.rtol": (float, 1e-8),
    "sim.atol": (float, 1e-10),
    "sim.t_start_us": (float, None),
    "sim.t_stop_us": (float, None),
    "sweep.detunings_MHz": (_floats, (0.0, 0.5, 1.0, 2.0)),
    "sweep.intensities_Wcm2": (_floats, tuple(float(i) for i in range(2, 21, 2))),
}

POSITIVE = {"probe.fwhm_us", "hole.fwhm_kHz", "hole.span_fwhm", "hole.points_per_fwhm",
            "sim.sample_step_us", "sim.rtol", "sim.atol", "calib.P_kHz_per_sqrtWcm2",
            "calib.A_kHz_per_sqrtWcm2", "calib.R1_kHz_per_sqrtWcm2", "hole.jitter_kHz",
            "repump.duration_us"}
NON_NEGATIVE = {"intensity.P_Wcm2", "intensity.A_Wcm2", "rabi.P_kHz", "rabi.A_kHz",
                "relax.G25_kHz", "relax.G35_kHz", "relax.g25_kHz", "relax.g35_kHz",
                "relax.g23_kHz", "hole.D", "hole.homogeneous_kHz", "control.duration_us",
                "switch.od_eff", "noise.level", "repump.R1_Wcm2", "repump.R2_Wcm2",
                "repump.gap_us"}


@dataclass
class Settings:
    """Parsed configuration; ``values`` holds every schema key."""

    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, key):
        return self.values[key]

    def with_override(self, key: str, raw: str) -> "Settings":
        vals = dict(self.values)
        vals[key] = _coerce(key, raw, f"override {key}")
        return _validated(Settings(vals, self.source))

    @property
    def scenario(self) -> str:
        return self.values["scenario"]

    # -- derived physics objects

    def calibration(self) -> IntensityCalibration:
        return IntensityCalibration({("2", "5"): self["calib.P_kHz_per_sqrtWcm2"],
                                     ("3", "5"): self["calib.A_kHz_per_sqrtWcm2"],
                                     ("1", "5"): self["calib.R1_kHz_per_sqrtWcm2"]})

    def repump_pulses(self, probe_start: float) -> tuple:
        """R1 on (1,5) then R2 on (3,5), ending ``repump.gap_us`` before ``probe_start``."""
        if not self["repump.explicit"]:
            return ()
        d, end = self["repump.duration_us"], probe_start - self["repump.gap_us"]
        cal = self.calibration()
        return (Pulse(("1", "5"), RECTANGULAR, end - 2 * d, d,
                      rabi_from_intensity(self["repump.R1_Wcm2"], cal, ("1", "5")), label="R1"),
                Pulse(("3", "5"), RECTANGULAR, end - d, d,
                      rabi_from_intensity(self["repump.R2_Wcm2"], cal, ("3", "5")), label="R2"))

    def rabi_p(self) -> float:
        if self["rabi.P_kHz"] is not None:
            return khz_to_rad_per_us(self["rabi.P_kHz"])
        return rabi_from_intensity(self["intensity.P_Wcm2"], self.calibration(), ("2", "5"))

    def rabi_a(self, intensity: float | None = None) -> float:
        if intensity is None and self["rabi.A_kHz"] is not None:
            return khz_to_rad_per_us(self["rabi.A_kHz"])
        I = self["intensity.A_Wcm2"] if intensity is None else intensity
        return rabi_from_intensity(I, self.calibration(), ("3", "5"))

    def relaxation(self) -> RelaxationSpec:
        coh = {("2", "5"): self["relax.g25_kHz"], ("3", "5"): self["relax.g35_kHz"]}
        if self["relax.g23_kHz"]:
            coh[("2", "3")] = self["relax.g23_kHz"]
        return RelaxationSpec.from_khz(
            {("5", "2"): self["relax.G25_kHz"], ("5", "3"): self["relax.G35_kHz"]}, coh)

    def scenario_config(self, pulses=()) -> ScenarioConfig:
        scheme = build_pr_yso_scheme()
        return ScenarioConfig(scheme, self.relaxation(), tuple(pulses),
                              initial_populations(self["init.state"], scheme),
                              self["sim.sample_step_us"], self["sim.rtol"], self["sim.atol"])

    def hole(self) -> spectra.HoleBurnConfig:
        fwhm = self["hole.fwhm_kHz"]
        if fwhm is None:
            fwhm = spectra.hole_fwhm_from_jitter(self["hole.jitter_kHz"],
                                                 self["hole.homogeneous_kHz"])
        return spectra.HoleBurnConfig(self["hole.D"], self["hole.depth"], fwhm)

    def spectrum(self) -> spectra.AbsorptionSpectrum:
        cfg = self.hole()
        grid = spectra.make_grid(cfg.fwhm, self["hole.span_fwhm"], self["hole.points_per_fwhm"])
        return spectra.kramers_kronig(spectra.hole_spectrum(cfg, grid))

    def probe(self) -> ProbePulseSpec:
        return ProbePulseSpec(self["probe.fwhm_us"], self["probe.detuning_kHz"],
                              self["intensity.P_Wcm2"], self["probe.center_us"])


def _coerce(key: str, raw: str, where: str):
    if key not in SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    kind, _ = SCHEMA[key]
    raw = raw.strip()
    if raw.lower() in ("", "none", "auto"):
        if SCHEMA[key][1] is None:
            return None
        raise ConfigError(f"{where}: {key} needs a value")
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {getattr(kind, '__name__', kind)} "
                          f"for {key}") from None


def _validated(s: Settings) -> Settings:
    v = s.values
    if v["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {v['scenario']!r}; "
                          f"choose from {', '.join(SCENARIOS)}")
    if v["init.state"] not in ("post-repump", "thermal"):
        raise ConfigError(f"init.state: unknown preset {v['init.state']!r}")
    for key in POSITIVE:
        x = v[key]
        if x is not None and not (x > 0 and math.isfinite(x)):
            raise ConfigError(f"{key}: must be > 0, got {x}")
    for key in NON_NEGATIVE:
        x = v[key]
        if x is not None and not (x >= 0 and math.isfinite(x)):
            raise ConfigError(f"{key}: must be >= 0, got {x}")
    if not 0.0 <= v["hole.depth"] <= 1.0:
        raise ConfigError(f"hole.depth: must lie in [0, 1], got {v['hole.depth']}")
    for key in ("sweep.detunings_MHz", "sweep.intensities_Wcm2"):
        if not v[key]:
            raise ConfigError(f"{key}: empty list")
    if any(x < 0 for x in v["sweep.intensities_Wcm2"]):
        raise ConfigError("sweep.intensities_Wcm2: intensities must be >= 0")
    return s


def parse_config(text: str, source: str = "<string>") -> Settings:
    values = {k: d for k, (_, d) in SCHEMA.items()}
    seen = {}
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {line.strip()!r}")
        key, raw = (x.strip() for x in body.split("=", 1))
        where = f"{source}:{no}"
        if key in seen:
            raise ConfigError(f"{where}: {key} already set on line {seen[key]}")
        seen[key] = no
        values[key] = _coerce(key, raw, where)
    return _validated(Settings(values, source))


def load_config(path) -> Settings:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise OSError(f"cannot read config {path}: {err.strerror or err}") from err
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class Outputs:
    """Files to write (name -> text) plus plot callbacks and summary lines."""

    files: dict = field(default_factory=dict)
    plots: list = field(default_factory=list)
    summary: list = field(default_factory=list)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0:
        return "0"
    return f"{x:.9g}"


def table_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ModelError, SpectrumError, PropagationError, AnalysisError, IntegrationError,
            InvariantError, SteadyStateError, FloatingPointError, np.linalg.LinAlgError) as err:
        raise StageError(name, err) from err


def _spectrum_csv(sp) -> str:
    return table_csv(SPECTRUM_COLUMNS, zip(sp.detuning_khz(), sp.alpha_l, sp.phase))


def _trace_rows(t, I_in, I_out, series=None, probe=("2", "5"), init=None, control_label="A"):
    n = t.size
    if series is None:
        pops = [np.full(n, init.get(l, 0.0)) for l in ("2", "3", "5")]
        im = np.zeros(n)
        om = np.zeros(n)
    else:
        pops = [series.population(l) for l in ("2", "3", "5")]
        im = series.probe_coherence(*probe).imag
        om = series.envelopes.get(control_label, np.zeros(n))
    return zip(t, I_in, I_out, *pops, im, om)


def _noise(settings: Settings, y: np.ndarray) -> np.ndarray:
    level = settings["noise.level"]
    if level == 0:
        return y
    rng = np.random.default_rng(settings["seed"])
    return y + level * np.ptp(y) * rng.standard_normal(y.size)


def scenario_slowlight(s: Settings) -> Outputs:
    out = Outputs()
    sp = _stage("spectrum", s.spectrum)
    src, slow = _stage("propagation", propagation.propagate_pulse, s.probe(), sp,
                       step=s["sim.sample_step_us"])
    d = _stage("analysis", analysis.measure_delay, src, slow)
    tau = _stage("spectrum", spectra.group_delay, sp, khz_to_rad_per_us(s["probe.detuning_kHz"]))
    out.files["spectrum.csv"] = _spectrum_csv(sp)
    init = initial_populations(s["init.state"])
    out.files["trace.csv"] = table_csv(TRACE_COLUMNS, _trace_rows(
        src.t, src.intensity, slow.intensity, init=init))
    out.summary += [f"delay_centroid_us = {d.centroid:.6g}", f"delay_peak_us = {d.peak:.6g}",
                    f"group_delay_us = {tau:.6g}",
                    f"transmission_peak = {slow.intensity.max() / src.intensity.max():.6g}"]
    out.plots.append(("trace.svg", "t (us)", [("input", src.t, src.intensity),
                                             ("slow light", slow.t, slow.intensity)]))
    out.plots.append(("spectrum.svg", "detuning (kHz)", [("alphaL", sp.detuning_khz(), sp.alpha_l),
                                                         ("phase", sp.detuning_khz(), sp.phase)]))
    return out


def _control(s: Settings, start: float, detuning_mhz: float | None = None,
             intensity: float | None = None) -> Pulse:
    det = s["control.detuning_MHz"] if detuning_mhz is None else detuning_mhz
    return Pulse(("3", "5"), RECTANGULAR, start=start, duration=s["control.duration_us"],
                 rabi_peak=s.rabi_a(intensity), detuning=mhz_to_rad_per_us(det), label="A")


def _switch(s: Settings, sp, detuning_mhz=None):
    probe = s.probe()
    _, slow = _stage("propagation", propagation.propagate_pulse, probe, sp,
                     step=s["sim.sample_step_us"])
    start = s["control.start_us"]
    if start is None:
        start = propagation.peak_time(slow)
    control = _control(s, start, detuning_mhz)
    cfg = _stage("model", s.scenario_config)
    res = _stage("switching", propagation.run_switching_scenario, probe, sp, control, cfg,
                 s.calibration(), s["switch.od_eff"])
    window = (control.start, control.start + control.duration)
    return res, window


def scenario_switch(s: Settings) -> Outputs:
    out = Outputs()
    sp = _stage("spectrum", s.spectrum)
    res, window = _switch(s, sp)
    slow, sw = res.slow_trace, res.switched_trace
    out.files["trace.csv"] = table_csv(TRACE_COLUMNS, _trace_rows(
        slow.t, slow.intensity, sw.intensity, res.series, res.probe_pulse.transition))
    dip = _stage("analysis", analysis.switching_dip, slow, sw, window)
    mod = _stage("analysis", analysis.switching_modulation, slow, sw, window)
    out.summary += [f"control_start_us = {window[0]:.6g}", f"od_eff = {res.od_eff:.6g}",
                    f"switching_dip = {dip:.6g}", f"switching_modulation = {mod:.6g}"]
    ratio = sw.intensity / np.maximum(slow.intensity, 1e-300)
    try:
        est = analysis.extract_oscillation_frequency(slow.t, ratio, window)
        out.summary.append(f"f_osc_transmission_kHz = {est.frequency_khz:.6g}")
    except AnalysisError as err:
        out.summary.append(f"f_osc_transmission_kHz = n/a ({err})")
    out.plots.append(("trace.svg", "t (us)", [("slow light", slow.t, slow.intensity),
                                             ("switched", sw.t, sw.intensity)]))
    return out


def scenario_detuning_sweep(s: Settings) -> Outputs:
    out = Outputs()
    sp = _stage("spectrum", s.spectrum)
    rows = []
    omega = s.rabi_a()
    for det in s["sweep.detunings_MHz"]:
        res, window = _switch(s, sp, det)
        slow, sw = res.slow_trace, res.switched_trace
        dip = _stage("analysis", analysis.switching_dip, slow, sw, window)
        mod = _stage("analysis", analysis.switching_modulation, slow, sw, window)
        d = mhz_to_rad_per_us(det)
        rows.append((det, dip, mod, omega ** 2 / (omega ** 2 + d ** 2)))
        out.files[f"trace_delta_{_fmt(det)}MHz.csv"] = table_csv(TRACE_COLUMNS, _trace_rows(
            slow.t, slow.intensity, sw.intensity, res.series, res.probe_pulse.transition))
    out.files["contrast.csv"] = table_csv(CONTRAST_COLUMNS, rows)
    mods = [r[2] for r in rows]
    out.summary += [f"contrast_delta_{_fmt(r[0])}MHz = dip {r[1]:.6g}, modulation {r[2]:.6g}"
                    for r in rows]
    out.summary.append(f"modulation_monotone = {all(b <= a for a, b in zip(mods, mods[1:]))}")
    out.plots.append(("contrast.svg", "detuning (MHz)",
                      [("modulation", np.array([r[0] for r in rows]), np.array(mods))]))
    return out


def transient_run(s: Settings, intensity_a: float | None = None):
    """Gaussian probe centred on the control start; returns series, reference and traces."""
    center = s["probe.center_us"]
    probe = Pulse(("2", "5"), GAUSSIAN, start=center, duration=s["probe.fwhm_us"],
                  rabi_peak=s.rabi_p(), label="P")
    start = center if s["control.start_us"] is None else s["control.start_us"]
    control = _control(s, start, intensity=intensity_a)
    repump = s.repump_pulses(probe.window[0])
    t0 = center - 4 * s["probe.fwhm_us"]
    if repump:
        t0 = min(t0, repump[0].start)
    if s["sim.t_start_us"] is not None:
        t0 = s["sim.t_start_us"]
    t1 = s["sim.t_stop_us"] if s["sim.t_stop_us"] is not None else start + control.duration + 10.0
    cfg = _stage("model", s.scenario_config, repump + (probe, control))
    series = _stage("liouville", evolve, cfg, (t0, t1))
    ref = _stage("liouville", evolve,
                 replace(cfg, pulses=repump + (probe, replace(control, rabi_peak=0.0))), (t0, t1))
    p = next(p for p in cfg.pulses if p.label == "P")
    gamma = propagation.coherence_rate(cfg.relaxation, *p.transition)
    od = s["switch.od_eff"]
    if od is None:
        od = s["hole.D"] * (1.0 - s["hole.depth"])
    _, _, ratio = _stage("transmission", propagation.control_transmission, series, ref, p, od, gamma)
    I_in = s["intensity.P_Wcm2"] * (series.envelopes["P"] / p.rabi_peak) ** 2
    return series, I_in, I_in * ratio, ratio, (control.start, control.start + control.duration)


def scenario_transient(s: Settings) -> Outputs:
    out = Outputs()
    series, I_in, I_out, ratio, window = transient_run(s)
    out.files["trace.csv"] = table_csv(TRACE_COLUMNS, _trace_rows(series.t, I_in, I_out, series))
    inv = series.population("5") - series.population("3")
    for name, y in (("population_5_minus_3", inv), ("transmission", ratio)):
        try:
            est = analysis.extract_oscillation_frequency(series.t, _noise(s, y), window)
            out.summary.append(f"f_osc_{name}_kHz = {est.frequency_khz:.6g} "
                               f"(cycles {est.cycles:.3g}, flagged {est.flagged})")
        except AnalysisError as err:
            out.summary.append(f"f_osc_{name}_kHz = n/a ({err})")
    out.plots.append(("trace.svg", "t (us)", [("rho55-rho33", series.t, inv),
                                             ("I_out/I_ref", series.t, ratio)]))
    return out


def scenario_intensity_sweep(s: Settings) -> Outputs:
    out = Outputs()
    pts = []
    for I in s["sweep.intensities_Wcm2"]:
        series, _, _, _, window = transient_run(s, intensity_a=I)
        y = _noise(s, series.population("5") - series.population("3"))
        est = _stage("analysis", analysis.extract_oscillation_frequency, series.t, y, window)
        pts.append((I, est.frequency_khz))
    fit = _stage("analysis", analysis.fit_sqrt_law, pts)
    rows = [(I, math.sqrt(I), f, fit.slope * math.sqrt(I) + fit.intercept, r)
            for (I, f), r in zip(pts, fit.residuals)]
    out.files["fit.csv"] = table_csv(FIT_COLUMNS, rows)
    out.summary += [f"fit_slope_kHz_per_sqrtWcm2 = {fit.slope:.6g}",
                    f"fit_intercept_kHz = {fit.intercept:.6g}", f"fit_r_squared = {fit.r_squared:.6g}",
                    f"max_abs_residual_kHz = {np.abs(fit.residuals).max():.6g}"]
    x = np.sqrt([p[0] for p in pts])
    out.plots.append(("fit.svg", "sqrt(I_A) (sqrt(W/cm^2))",
                      [("f_osc", x, np.array([p[1] for p in pts])), ("fit", x, fit.predict(x ** 2))]))
    return out


RUNNERS = {
    "slowlight": scenario_slowlight,
    "switch": scenario_switch,
    "detuning-sweep": scenario_detuning_sweep,
    "transient": scenario_transient,
    "intensity-sweep": scenario_intensity_sweep,
}


def _svg(path: Path, xlabel: str, curves) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in curves:
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def run_scenario(settings: Settings, out_dir, plots: bool = False) -> list[Path]:
    """Run ``settings.scenario`` and move its outputs into ``out_dir`` in one step."""
    result = RUNNERS[settings.scenario](settings)
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".slowlight-", dir=out_dir.parent))
    try:
        for name, text in result.files.items():
            (tmp / name).write_text(text)
        summary = [f"scenario = {settings.scenario}", f"config = {settings.source}"] + result.summary
        (tmp / "summary.txt").write_text("\n".join(summary) + "\n")
        if plots:
            for name, xlabel, curves in result.plots:
                _svg(tmp / name, xlabel, curves)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for f in sorted(tmp.iterdir()):
            os.replace(f, out_dir / f.name)
            written.append(out_dir / f.name)
        return written
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


# ---------------------------------------------------------------------------
# analyze


def read_trace(path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise OSError(f"cannot read trace {path}: {err.strerror or err}") from err
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = rows[0]
    if "t_us" not in header:
        raise ConfigError(f"{path}: no t_us column")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows")
    return {h: data[:, i] for i, h in enumerate(header)}


def analyze_trace(cols: dict, window) -> list[str]:
    t = cols["t_us"]
    signals = []
    if {"rho55", "rho33"} <= cols.keys():
        signals.append(("population_5_minus_3", cols["rho55"] - cols["rho33"]))
    if {"I_in", "I_out"} <= cols.keys():
        ok = cols["I_in"] > 1e-3 * cols["I_in"].max()
        ratio = np.where(ok, cols["I_out"] / np.where(ok, cols["I_in"], 1.0), 1.0)
        signals.append(("transmission", ratio))
    if not signals:
        raise ConfigError("trace has neither rho55/rho33 nor I_in/I_out columns")
    lines = []
    for name, y in signals:
        try:
            e = analysis.extract_oscillation_frequency(t, y, window)
            lines.append(f"f_osc_{name}_kHz = {e.frequency_khz:.6g} (cycles {e.cycles:.3g}, "
                         f"extrema {1e3 * e.extrema_frequency if e.extrema_frequency else float('nan'):.6g}, "
                         f"flagged {e.flagged})")
        except AnalysisError as err:
            lines.append(f"f_osc_{name}_kHz = n/a ({err})")
    return lines


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowlight", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the scenario named in a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--plots", action="store_true", help="also write SVG line plots")

    p = sub.add_parser("sweep", help="rerun a scenario over values of one config key")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", default="out")
    p.add_argument("--plots", action="store_true")

    p = sub.add_parser("analyze", help="oscillation frequency of a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--window", required=True, help="t0,t1 in us")
    return ap


def _window_arg(text: str):
    try:
        t0, t1 = (float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"--window expects 't0,t1', got {text!r}") from None
    if not t1 > t0:
        raise ConfigError(f"--window: t1 must exceed t0, got {text!r}")
    return t0, t1


def _dispatch(args) -> None:
    if args.command == "simulate":
        s = load_config(args.config)
        for f in run_scenario(s, args.out, args.plots):
            print(f)
    elif args.command == "sweep":
        s = load_config(args.config)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise ConfigError("--values is empty")
        points = [(v, s.with_override(args.param, v)) for v in values]
        lines = []
        for v, sv in points:
            sub = Path(args.out) / f"{args.param}={v}"
            run_scenario(sv, sub, args.plots)
            lines.append(f"[{args.param} = {v}]")
            lines += (sub / "summary.txt").read_text().splitlines()[2:]
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "summary.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
    else:
        cols = read_trace(args.trace)
        print("\n".join(analyze_trace(cols, _window_arg(args.window))))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except (ConfigError, ModelError, SpectrumError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as err:
        if isinstance(err.cause, (ModelError, SpectrumError)):
            print(f"error: {err}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
