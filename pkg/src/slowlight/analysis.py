"""Oscillation frequencies, square-root scaling fits, pulse areas, delays and contrasts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GAUSSIAN, RECTANGULAR, SAMPLED, Pulse

MIN_ZERO_PAD = 8
PEAK_OVER_FLOOR = 3.0
EXTREMA_DISAGREE = 0.05


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class OscillationEstimate:
    """Frequency in 1/us (cycles, multiply by 1e3 for kHz)."""

    frequency: float
    cycles: float
    peak_to_floor: float
    extrema_frequency: float | None
    flagged: bool

    @property
    def frequency_khz(self) -> float:
        return 1e3 * self.frequency


def _window(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise AnalysisError("t and y must be 1-D arrays of equal length")
    if window is not None:
        t0, t1 = window
        if not t1 > t0:
            raise AnalysisError(f"empty window ({t0}, {t1})")
        m = (t >= t0) & (t <= t1)
        t, y = t[m], y[m]
    if t.size < 32:
        raise AnalysisError(f"window holds {t.size} samples, need at least 32")
    d = np.diff(t)
    if np.any(d <= 0) or np.abs(d - d[0]).max() > 1e-6 * d[0]:
        raise AnalysisError("samples must be uniformly spaced")
    if not np.all(np.isfinite(y)):
        raise AnalysisError("signal contains non-finite values")
    return t, y


def _extrema_frequency(t: np.ndarray, y: np.ndarray) -> float | None:
    idx = np.nonzero(np.diff(np.sign(np.diff(y))) != 0)[0] + 1
    if idx.size < 3:
        return None
    tt = t[idx]
    return float((idx.size - 1) / (2.0 * (tt[-1] - tt[0])))


def extract_oscillation_frequency(t, y, window=None) -> OscillationEstimate:
    """Dominant frequency of ``y(t)`` inside ``window``.

    Quadratic detrend, Hann taper, >= 8x zero padding and a parabolic fit to
    the log-magnitude peak. Zero crossings of the detrended signal give a
    cross-check; disagreement above 5% sets ``flagged``.
    """
    t, y = _window(t, y, window)
    n = t.size
    dt = float(t[1] - t[0])
    x = (t - t[0]) / (t[-1] - t[0])
    r = y - np.polyval(np.polyfit(x, y, 2), x)
    if np.ptp(r) <= 1e-14 * max(1.0, np.abs(y).max()):
        raise AnalysisError("no oscillation detected: signal is flat after detrending")
    m = 1 << int(math.ceil(math.log2(MIN_ZERO_PAD * n)))
    spec = np.abs(np.fft.rfft(r * np.hanning(n), m))
    freqs = np.fft.rfftfreq(m, dt)
    # skip the region the detrend and taper leave near DC
    lo = max(1, int(math.ceil(1.5 * m / n)))
    if lo >= spec.size - 1:
        raise AnalysisError("window too short to resolve an oscillation")
    k = lo + int(np.argmax(spec[lo:]))
    floor = float(np.median(spec[lo:]))
    ratio = spec[k] / floor if floor > 0 else math.inf
    if ratio < PEAK_OVER_FLOOR:
        raise AnalysisError(f"no oscillation detected: spectral peak only {ratio:.2f}x the median floor")
    f = freqs[k]
    if 0 < k < spec.size - 1:
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        den = a - 2 * b + c
        if den < 0:
            f += 0.5 * (a - c) / den * (freqs[1] - freqs[0])
    fx = _extrema_frequency(t, r)
    flagged = fx is None or abs(fx - f) > EXTREMA_DISAGREE * f
    return OscillationEstimate(float(f), float(f * (t[-1] - t[0])), float(ratio), fx, flagged)


@dataclass(frozen=True, eq=False)
class SqrtLawFit:
    """``f = slope * sqrt(I) + intercept``."""

    slope: float
    intercept: float
    r_squared: float
    residuals: np.ndarray

    def predict(self, intensity):
        return self.slope * np.sqrt(np.asarray(intensity, dtype=float)) + self.intercept


def fit_sqrt_law(points) -> SqrtLawFit:
    """Ordinary least squares of frequency against ``sqrt(intensity)``.

    ``points`` is an iterable of ``(intensity, frequency)`` pairs.
    """
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise AnalysisError("points must be (intensity, frequency) pairs")
    if arr.shape[0] < 3:
        raise AnalysisError(f"need at least 3 points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise AnalysisError("points contain non-finite values")
    if np.any(arr[:, 0] < 0):
        raise AnalysisError("intensities must be >= 0")
    if np.unique(arr[:, 0]).size < 2:
        raise AnalysisError("need at least two distinct intensities")
    x = np.sqrt(arr[:, 0])
    y = arr[:, 1]
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (slope * x + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((res ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return SqrtLawFit(float(slope), float(icpt), r2, res)


def pulse_area(p: Pulse) -> float:
    """``int Omega(t) dt`` in rad."""
    if p.shape == RECTANGULAR:
        return p.rabi_peak * p.duration
    if p.shape == GAUSSIAN:
        return p.rabi_peak * p.duration * math.sqrt(math.pi / (4.0 * math.log(2.0)))
    if p.shape == SAMPLED:
        return p.rabi_peak * float(np.trapezoid(p.envelope, p.envelope_t))
    raise AnalysisError(f"unknown pulse shape {p.shape!r}")


@dataclass(frozen=True)
class DelayEstimate:
    centroid: float
    peak: float


def _centroid(t, I):
    s = I.sum()
    if s <= 0:
        raise AnalysisError("trace carries no energy")
    return float((t * I).sum() / s)


def peak_position(t, I) -> float:
    """Location of the maximum of ``I`` with parabolic sub-sample refinement."""
    k = int(np.argmax(I))
    if 0 < k < I.size - 1:
        a, b, c = I[k - 1:k + 2]
        den = a - 2 * b + c
        if den != 0:
            return float(t[k] + 0.5 * (a - c) / den * (t[1] - t[0]))
    return float(t[k])


def measure_delay(reference, delayed) -> DelayEstimate:
    """Delay of ``delayed`` behind ``reference`` (traces with ``t`` and ``intensity``)."""
    ta, Ia = np.asarray(reference.t), np.asarray(reference.intensity)
    tb, Ib = np.asarray(delayed.t), np.asarray(delayed.intensity)
    return DelayEstimate(_centroid(tb, Ib) - _centroid(ta, Ia), peak_position(tb, Ib) - peak_position(ta, Ia))


def _ratio_in_window(slow, switched, window, floor_rel=1e-3):
    t = np.asarray(slow.t)
    Is, Iw = np.asarray(slow.intensity), np.asarray(switched.intensity)
    m = (t >= window[0]) & (t <= window[1]) & (Is > floor_rel * Is.max())
    if not m.any():
        raise AnalysisError("slow light carries no intensity inside the control window")
    return Iw[m] / Is[m]


def switching_dip(slow, switched, window) -> float:
    """``1 - min(I_switched/I_slow)`` inside ``window``."""
    return float(1.0 - _ratio_in_window(slow, switched, window).min())


def switching_modulation(slow, switched, window) -> float:
    """``max |1 - I_switched/I_slow|`` inside ``window``, whichever way the control acts."""
    return float(np.abs(1.0 - _ratio_in_window(slow, switched, window)).max())
