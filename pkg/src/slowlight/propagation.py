"""Slow-light propagation through the hole and thin-medium switching of the output.

Fields use the ``exp(-i*omega*t)`` convention: a spectral phase that grows
with detuning, ``phi = tau*omega``, delays the envelope by ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import peak_position
from .liouville import TimeSeries, evolve, sample_grid
from .model import (
    PR_YSO_CALIBRATION,
    RECTANGULAR,
    SAMPLED,
    IntensityCalibration,
    Pulse,
    ScenarioConfig,
    khz_to_rad_per_us,
    rabi_from_intensity,
)
from .spectra import AbsorptionSpectrum, SpectrumError, group_delay

EPS_OMEGA_REL = 1e-3
EDGE_FRACTION = 0.02
EDGE_ENERGY_TOL = 1e-6
FILTER_REFINE = 8


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OpticalPulseTrace:
    """Complex field envelope on a uniform time grid (us); ``|E|^2`` in W/cm^2."""

    t: np.ndarray
    field: np.ndarray
    label: str = ""

    def __post_init__(self):
        if self.t.shape != self.field.shape:
            raise PropagationError("time grid and field differ in length")
        if not np.all(np.isfinite(self.field)):
            raise PropagationError(f"trace {self.label!r} has non-finite values")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.field) ** 2

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])

    def energy(self) -> float:
        return float(self.intensity.sum() * self.step)


@dataclass(frozen=True)
class ProbePulseSpec:
    """Gaussian probe; ``fwhm_us`` is the intensity FWHM."""

    fwhm_us: float = 10.0
    detuning_khz: float = 0.0
    intensity_wcm2: float = 3.0
    center_us: float = 0.0

    def __post_init__(self):
        if not self.fwhm_us > 0:
            raise PropagationError("probe FWHM must be > 0")
        if not self.intensity_wcm2 >= 0:
            raise PropagationError("probe intensity must be >= 0")

    @property
    def spectral_fwhm(self) -> float:
        """Intensity-spectrum FWHM in rad/us of the transform-limited pulse."""
        return 4.0 * math.log(2.0) / self.fwhm_us

    def field(self, t) -> np.ndarray:
        x = (np.asarray(t, dtype=float) - self.center_us) / self.fwhm_us
        return math.sqrt(self.intensity_wcm2) * np.exp(-2.0 * math.log(2.0) * x * x) + 0j


def default_time_grid(probe: ProbePulseSpec, spectrum: AbsorptionSpectrum | None = None,
                      step: float = 0.05) -> np.ndarray:
    """Window of 5 FWHM before the peak and 5 FWHM plus three expected delays after it."""
    delay = 0.0
    if spectrum is not None and spectrum.phase is not None:
        try:
            delay = abs(group_delay(spectrum, khz_to_rad_per_us(probe.detuning_khz)))
        except SpectrumError:
            delay = 0.0
    t0 = probe.center_us - 5.0 * probe.fwhm_us
    t1 = probe.center_us + 5.0 * probe.fwhm_us + 3.0 * delay
    return sample_grid(t0, t1, step)


def apply_transfer(trace: OpticalPulseTrace, transfer, label: str = "") -> OpticalPulseTrace:
    """Multiply the envelope spectrum by ``transfer(omega)`` (``omega`` relative to the carrier)."""
    n = trace.t.size
    omega = 2.0 * math.pi * np.fft.fftfreq(n, trace.step)
    spec = np.fft.fft(trace.field)
    # fft bin k carries the exp(-i*omega*t) component at -omega_k
    out = np.fft.ifft(spec * transfer(-omega))
    return OpticalPulseTrace(trace.t, out, label or trace.label)


def propagate_pulse(probe: ProbePulseSpec, spectrum: AbsorptionSpectrum, t=None,
                    step: float = 0.05) -> tuple[OpticalPulseTrace, OpticalPulseTrace]:
    """Send the Gaussian probe through ``exp(-alpha_l/2 + i*phi)``.

    Returns ``(input, output)`` traces on a common time grid.
    """
    if spectrum.phase is None:
        raise PropagationError("spectrum has no phase; run kramers_kronig first")
    if probe.spectral_fwhm > 0.25 * spectrum.span:
        raise PropagationError(
            f"probe bandwidth {probe.spectral_fwhm:.4g} rad/us exceeds a quarter of the "
            f"spectral grid span ({spectrum.span:.4g} rad/us)"
        )
    t = default_time_grid(probe, spectrum, step) if t is None else np.asarray(t, dtype=float)
    carrier = khz_to_rad_per_us(probe.detuning_khz)
    src = OpticalPulseTrace(t, probe.field(t), "P_in")
    out = apply_transfer(src, lambda w: spectrum.transfer(carrier + w), "P_out")
    _check_edges(src)
    _check_edges(out)
    return src, out


def _check_edges(trace: OpticalPulseTrace) -> None:
    I = trace.intensity
    total = I.sum()
    if total == 0:
        return
    k = max(1, int(EDGE_FRACTION * I.size))
    edge = (I[:k].sum() + I[-k:].sum()) / total
    if edge > EDGE_ENERGY_TOL:
        raise PropagationError(
            f"time window too short for {trace.label!r}: {edge:.2g} of the energy sits "
            "at the window edges"
        )


# ---------------------------------------------------------------------------
# thin-medium readout


def medium_filtered_envelope(t: np.ndarray, omega: np.ndarray, gamma: float) -> np.ndarray:
    """Solve ``dy/dt = gamma*(omega - y)`` exactly for a piecewise-linear ``omega``.

    This is the envelope an unsaturated optical coherence follows, so it is
    the right normaliser for the coherence when the probe changes on the
    scale of ``1/gamma``.
    """
    if not gamma > 0:
        raise PropagationError("probe coherence decay rate must be > 0")
    y = np.empty_like(omega, dtype=float)
    y[0] = omega[0]
    h = np.diff(t)
    e = np.exp(-gamma * h)
    c = h + np.expm1(-gamma * h) / gamma
    slope = np.diff(omega) / h
    for i in range(h.size):
        y[i + 1] = e[i] * y[i] + (1.0 - e[i]) * omega[i] + slope[i] * c[i]
    return y


def filtered_probe_envelope(t: np.ndarray, pulse: Pulse, gamma: float,
                            refine: int = FILTER_REFINE) -> np.ndarray:
    """:func:`medium_filtered_envelope` of ``pulse`` sampled at ``t``.

    Rectangular pulses are filtered in closed form; other shapes on a grid
    ``refine`` times finer than ``t``.
    """
    t = np.asarray(t, dtype=float)
    if pulse.shape == RECTANGULAR:
        if not gamma > 0:
            raise PropagationError("probe coherence decay rate must be > 0")
        t0, t1 = pulse.start, pulse.start + pulse.duration
        rise = -np.expm1(-gamma * np.clip(t - t0, 0.0, t1 - t0))
        tail = np.exp(-gamma * np.clip(t - t1, 0.0, None))
        return pulse.rabi_peak * rise * tail
    fine = np.linspace(t[0], t[-1], refine * (t.size - 1) + 1)
    return medium_filtered_envelope(fine, pulse.envelope_at(fine), gamma)[::refine]


def absorption_coefficient(series: TimeSeries, probe_pulse: Pulse, gamma_probe: float,
                           eps_rel: float = EPS_OMEGA_REL) -> np.ndarray:
    """Normalized instantaneous absorption ``a(t) = 2*gamma*Im(rho_ge)/Omega_f(t)``.

    ``Omega_f`` is the probe envelope filtered by the coherence decay (equal to
    the envelope itself for a steady probe), so an unsaturated medium with all
    population in the probe ground level gives ``a = 1`` at every instant.
    Where ``Omega_f`` drops below ``eps_rel`` of its peak, ``a`` is set to 0.
    """
    label = probe_pulse.label
    if label not in series.envelopes:
        raise PropagationError(f"probe {label!r} not found in the time series")
    g, e = probe_pulse.transition
    omega = np.asarray(series.envelopes[label], dtype=float)
    filt = filtered_probe_envelope(series.t, probe_pulse, gamma_probe)
    peak = filt.max()
    if peak <= 0:
        return np.zeros_like(filt)
    rho = series.probe_coherence(g, e) * np.exp(1j * probe_pulse.phase)
    ok = filt > eps_rel * peak
    inside = omega > 1e-2 * omega.max()
    undefined = np.count_nonzero(inside & ~ok)
    if inside.any() and undefined > 0.2 * np.count_nonzero(inside):
        raise PropagationError(
            f"{undefined} of {np.count_nonzero(inside)} in-pulse samples fall below the "
            f"probe threshold eps = {eps_rel:g} x peak"
        )
    return np.where(ok, 2.0 * gamma_probe * rho.imag / np.where(ok, filt, 1.0), 0.0)


def transmit_thin(series: TimeSeries, probe_pulse: Pulse, od_eff: float, gamma_probe: float,
                  intensity_in: np.ndarray | None = None,
                  eps_rel: float = EPS_OMEGA_REL) -> OpticalPulseTrace:
    """``I_out(t) = I_in(t) * exp(-od_eff * a(t))``.

    ``intensity_in`` defaults to ``(Omega_p/Omega_p,peak)^2``.
    """
    a = absorption_coefficient(series, probe_pulse, gamma_probe, eps_rel)
    if intensity_in is None:
        omega = np.asarray(series.envelopes[probe_pulse.label], dtype=float)
        peak = omega.max()
        intensity_in = (omega / peak) ** 2 if peak > 0 else np.zeros_like(omega)
    field = np.sqrt(np.asarray(intensity_in, dtype=float)) * np.exp(-0.5 * od_eff * a)
    return OpticalPulseTrace(series.t, field + 0j, "P_thin")


# ---------------------------------------------------------------------------
# switching scenario


@dataclass(frozen=True, eq=False)
class SwitchingResult:
    input_trace: OpticalPulseTrace
    slow_trace: OpticalPulseTrace
    switched_trace: OpticalPulseTrace
    series: TimeSeries
    reference: TimeSeries
    absorption: np.ndarray
    reference_absorption: np.ndarray
    probe_pulse: Pulse
    control: Pulse
    od_eff: float


def slow_light_probe_pulse(slow: OpticalPulseTrace, peak_rabi: float,
                           transition=("2", "5"), label: str = "P") -> Pulse:
    """Sampled probe pulse whose Rabi envelope follows ``|E(t)|`` of the slow light."""
    amp = np.abs(slow.field)
    top = amp.max()
    if top == 0:
        raise PropagationError("slow-light trace carries no field")
    return Pulse(transition, SAMPLED, rabi_peak=peak_rabi, label=label,
                 envelope_t=slow.t, envelope=amp / top)


def peak_time(trace: OpticalPulseTrace) -> float:
    """Intensity peak time with parabolic refinement."""
    return peak_position(trace.t, trace.intensity)


def run_switching_scenario(probe: ProbePulseSpec, spectrum: AbsorptionSpectrum, control: Pulse,
                           config: ScenarioConfig,
                           calibration: IntensityCalibration = PR_YSO_CALIBRATION,
                           od_eff: float | None = None, probe_transition=("2", "5"),
                           t=None) -> SwitchingResult:
    """Slow light through the hole, then switched by ``control`` in a thin slice.

    The delayed slow-light envelope drives the probe transition (its Rabi
    frequency scaled from the input peak intensity by the field transmission).
    The medium is evolved twice, with and without the control, and the
    control-induced absorption change is applied to the slow light:
    ``I_sw = I_slow * exp(-od_eff * (a - a_ref))``. ``od_eff`` defaults to the
    residual optical depth at the probe carrier.
    """
    src, slow = propagate_pulse(probe, spectrum, t=t, step=config.sample_step)
    g, e = config.scheme.orient(*probe_transition)
    rabi_in = rabi_from_intensity(probe.intensity_wcm2, calibration, (g, e))
    gain = np.abs(slow.field).max() / max(np.abs(src.field).max(), 1e-300)
    p_pulse = slow_light_probe_pulse(slow, rabi_in * gain, (g, e))
    if od_eff is None:
        od_eff = float(np.interp(khz_to_rad_per_us(probe.detuning_khz), spectrum.omega,
                                 spectrum.alpha_l))
    gamma = coherence_rate(config.relaxation, g, e)

    span = (float(slow.t[0]), float(slow.t[-1]))
    base = tuple(config.pulses)
    cfg = replace(config, pulses=base + (p_pulse, control))
    series = evolve(cfg, span)
    off = replace(control, rabi_peak=0.0)
    ref = evolve(replace(config, pulses=base + (p_pulse, off)), span)
    p_checked = next(p for p in cfg.pulses if p.label == p_pulse.label)
    a, a_ref, ratio = control_transmission(series, ref, p_checked, od_eff, gamma)
    field = slow.field * np.sqrt(ratio)
    switched = OpticalPulseTrace(slow.t, field, "P_switched")
    return SwitchingResult(src, slow, switched, series, ref, a, a_ref, p_checked,
                           next(p for p in cfg.pulses if p.label == control.label), od_eff)


def control_transmission(series: TimeSeries, reference: TimeSeries, probe_pulse: Pulse,
                         od_eff: float, gamma_probe: float):
    """Absorption with and without the control and the intensity ratio they imply.

    Returns ``(a, a_ref, exp(-od_eff*(a - a_ref)))``.
    """
    a = absorption_coefficient(series, probe_pulse, gamma_probe)
    a_ref = absorption_coefficient(reference, probe_pulse, gamma_probe)
    return a, a_ref, np.exp(-od_eff * (a - a_ref))


def coherence_rate(relax, g: str, e: str) -> float:
    """Total decay rate (1/us) of the ``(g, e)`` coherence."""
    total = relax.coherence_decay_total.get(frozenset((g, e)))
    natural = 0.5 * (relax.decay_out(g) + relax.decay_out(e))
    if total is None:
        return natural
    return max(total, natural)
