import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from slowlight.analysis import (
    AnalysisError,
    extract_oscillation_frequency,
    fit_sqrt_law,
    measure_delay,
    pulse_area,
    switching_dip,
    switching_modulation,
)
from slowlight.model import GAUSSIAN, RECTANGULAR, SAMPLED, Pulse, khz_to_rad_per_us
from slowlight.propagation import OpticalPulseTrace

T = np.arange(0.0, 50.0, 0.05)


def _damped(f_khz, tau=30.0, t=T):
    return np.exp(-t / tau) * np.cos(2 * math.pi * f_khz * 1e-3 * t) + 0.3 * np.exp(-t / 80)


@pytest.mark.parametrize("f_khz", [60.0, 100.0, 141.0])
def test_frequency_of_damped_cosine(f_khz):
    e = extract_oscillation_frequency(T, _damped(f_khz), (0, 50))
    assert e.frequency_khz == pytest.approx(f_khz, rel=0.01)
    assert not e.flagged
    assert e.cycles == pytest.approx(f_khz * 0.05 * 49.95 / 50, rel=0.02)


def test_frequency_with_noise_is_stable():
    rng = np.random.default_rng(7)
    y = _damped(100.0) + 0.05 * rng.standard_normal(T.size)
    e = extract_oscillation_frequency(T, y, (0, 50))
    assert e.frequency_khz == pytest.approx(100.0, rel=0.02)


def test_trend_only_trace_raises():
    with pytest.raises(AnalysisError, match="no oscillation detected"):
        extract_oscillation_frequency(T, 1 + 0.01 * T - 3e-4 * T ** 2, (0, 50))


def test_window_validation():
    with pytest.raises(AnalysisError, match="empty window"):
        extract_oscillation_frequency(T, _damped(100), (10, 5))
    with pytest.raises(AnalysisError, match="samples"):
        extract_oscillation_frequency(T, _damped(100), (10, 10.2))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(-50, 50), st.floats(70, 130))
def test_frequency_invariant_under_scale_and_offset(scale, offset, f_khz):
    y = _damped(f_khz)
    a = extract_oscillation_frequency(T, y, (0, 50)).frequency
    b = extract_oscillation_frequency(T, scale * y + offset, (0, 50)).frequency
    assert b == pytest.approx(a, rel=1e-6)


def test_sqrt_law_exact_points():
    f = fit_sqrt_law([(1, 2), (4, 4), (9, 6)])
    assert f.slope == pytest.approx(2.0)
    assert f.intercept == pytest.approx(0.0, abs=1e-12)
    assert f.r_squared == pytest.approx(1.0)


def test_sqrt_law_residual_flags_outlier():
    pts = [(i, 3 * math.sqrt(i)) for i in range(1, 10)]
    pts[4] = (5, 3 * math.sqrt(5) + 2.0)
    f = fit_sqrt_law(pts)
    assert int(np.argmax(np.abs(f.residuals))) == 4
    assert f.r_squared < 1


@pytest.mark.parametrize("pts,match", [
    ([(1, 1), (4, 2)], "at least 3"),
    ([(4, 1), (4, 2), (4, 3)], "distinct"),
    ([(1, 1), (-4, 2), (9, 3)], ">= 0"),
    ([(1, 1), (4, float("nan")), (9, 3)], "non-finite"),
])
def test_sqrt_law_input_errors(pts, match):
    with pytest.raises(AnalysisError, match=match):
        fit_sqrt_law(pts)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(-100, 100)), min_size=3, max_size=10),
       st.floats(0.1, 10))
def test_sqrt_law_is_equivariant(pts, c):
    assume(len({p[0] for p in pts}) >= 2)
    assume(np.ptp([p[1] for p in pts]) > 1e-3)
    a = fit_sqrt_law(pts)
    b = fit_sqrt_law([(i, c * f) for i, f in pts])
    assert b.slope == pytest.approx(c * a.slope, rel=1e-6, abs=1e-9)
    assert b.intercept == pytest.approx(c * a.intercept, rel=1e-6, abs=1e-9)
    assert b.r_squared == pytest.approx(a.r_squared, abs=1e-9)


def test_pulse_area_examples():
    rect = Pulse(("3", "5"), RECTANGULAR, 0, 5.0, khz_to_rad_per_us(100))
    assert pulse_area(rect) == pytest.approx(math.pi)
    assert pulse_area(Pulse(("3", "5"), RECTANGULAR, 0, 5.0, 0.0)) == 0.0
    g = Pulse(("3", "5"), GAUSSIAN, 0, 1.0, 2 * math.pi * 0.5)
    assert pulse_area(g) == pytest.approx(2 * math.pi * 0.5 * 1.0644670194312262)
    # numerical integral of the gaussian envelope as an independent check
    t = np.linspace(-10, 10, 200001)
    assert pulse_area(g) == pytest.approx(np.trapezoid(g.envelope_at(t), t), rel=1e-9)
    s = Pulse(("3", "5"), SAMPLED, rabi_peak=2.0, envelope_t=[0, 1, 3], envelope=[0, 1, 0])
    assert pulse_area(s) == pytest.approx(3.0)


@settings(max_examples=40)
@given(st.floats(0, 5), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0, 3))
def test_pulse_area_additive(rabi, d1, d2, start):
    a = Pulse(("3", "5"), RECTANGULAR, start, d1, rabi)
    b = Pulse(("3", "5"), RECTANGULAR, start + d1, d2, rabi)
    whole = Pulse(("3", "5"), RECTANGULAR, start, d1 + d2, rabi)
    assert pulse_area(a) + pulse_area(b) == pytest.approx(pulse_area(whole))


def _gauss(t0, fwhm=10.0):
    t = np.arange(-100, 100, 0.05)
    return OpticalPulseTrace(t, np.exp(-2 * math.log(2) * ((t - t0) / fwhm) ** 2) + 0j)


def test_measure_delay_of_shifted_trace():
    a, b = _gauss(0.0), _gauss(10.0)
    d = measure_delay(a, b)
    assert d.centroid == pytest.approx(10.0, abs=0.05 / 100)
    assert d.peak == pytest.approx(10.0, abs=0.05 / 100)
    assert measure_delay(a, a).centroid == 0.0


def test_measure_delay_zero_energy():
    z = OpticalPulseTrace(np.arange(0, 1, 0.1), np.zeros(10, complex))
    with pytest.raises(AnalysisError):
        measure_delay(z, _gauss(0.0))


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_measure_delay_antisymmetric(x, y):
    a, b = _gauss(x), _gauss(y)
    assert measure_delay(a, b).centroid == pytest.approx(-measure_delay(b, a).centroid, abs=1e-9)


def test_switching_contrast_measures():
    slow = _gauss(0.0)
    dipped = OpticalPulseTrace(slow.t, slow.field * np.where(np.abs(slow.t) < 2, 0.5, 1.0))
    assert switching_dip(slow, dipped, (-5, 5)) == pytest.approx(1 - 0.25)
    assert switching_modulation(slow, dipped, (-5, 5)) == pytest.approx(0.75)
    brighter = OpticalPulseTrace(slow.t, slow.field * np.where(np.abs(slow.t) < 2, 2.0, 1.0))
    assert switching_dip(slow, brighter, (-5, 5)) == pytest.approx(0.0)
    assert switching_modulation(slow, brighter, (-5, 5)) == pytest.approx(3.0)
    with pytest.raises(AnalysisError):
        switching_dip(slow, dipped, (90, 95))
