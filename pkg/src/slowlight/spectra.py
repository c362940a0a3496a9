"""Hole-burnt absorption profiles, their minimal-phase dispersion and group delay.

Frequencies are angular detunings in rad/us measured from the burning laser,
so a phase derivative ``d(phi)/d(omega)`` comes out directly in us.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import khz_to_rad_per_us, mhz_to_rad_per_us, rad_per_us_to_khz

MIN_SPAN_FWHM = 20.0
MIN_POINTS_PER_FWHM = 50.0
EDGE_SETTLE_TOL = 1e-3
KK_PAD = 4


class SpectrumError(ValueError):
    pass


def hole_fwhm_from_jitter(jitter_khz: float = 300.0, homogeneous_khz: float = 0.0) -> float:
    """Hole FWHM (kHz) burnt by a jittering laser: twice laser plus ion width."""
    return 2.0 * (jitter_khz + homogeneous_khz)


@dataclass(frozen=True)
class AntiHole:
    center_mhz: float
    depth: float  # negative values add absorption
    fwhm_khz: float


@dataclass(frozen=True)
class HoleBurnConfig:
    optical_depth: float = 10.0
    depth: float = 0.8
    fwhm_khz: float = 300.0
    center_mhz: float = 0.0
    anti_holes: tuple = ()

    def __post_init__(self):
        if not self.optical_depth >= 0:
            raise SpectrumError(f"optical depth must be >= 0, got {self.optical_depth}")
        if not 0.0 <= self.depth <= 1.0:
            raise SpectrumError(f"hole depth must lie in [0, 1], got {self.depth}")
        if not self.fwhm_khz > 0:
            raise SpectrumError(f"hole FWHM must be > 0, got {self.fwhm_khz}")
        object.__setattr__(self, "anti_holes", tuple(
            a if isinstance(a, AntiHole) else AntiHole(*a) for a in self.anti_holes))
        for a in self.anti_holes:
            if not a.fwhm_khz > 0:
                raise SpectrumError("anti-hole FWHM must be > 0")

    @property
    def fwhm(self) -> float:
        """Hole FWHM in rad/us."""
        return khz_to_rad_per_us(self.fwhm_khz)

    @property
    def center(self) -> float:
        return mhz_to_rad_per_us(self.center_mhz)


@dataclass(frozen=True, eq=False)
class AbsorptionSpectrum:
    """Optical depth ``alpha_l`` and spectral phase ``phase`` on a uniform grid."""

    omega: np.ndarray
    alpha_l: np.ndarray
    phase: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def step(self) -> float:
        return float(self.omega[1] - self.omega[0])

    @property
    def span(self) -> float:
        return float(self.omega[-1] - self.omega[0])

    def detuning_khz(self) -> np.ndarray:
        return rad_per_us_to_khz(self.omega)

    def transfer(self, omega) -> np.ndarray:
        """Field transfer ``exp(-alpha_l/2 + i*phi)`` interpolated at ``omega``."""
        if self.phase is None:
            raise SpectrumError("phase not computed; run kramers_kronig first")
        a = np.interp(omega, self.omega, self.alpha_l)
        p = np.interp(omega, self.omega, self.phase)
        return np.exp(-0.5 * a + 1j * p)


def make_grid(fwhm: float, span_fwhm: float = 64.0, points_per_fwhm: int = 64,
              center: float = 0.0) -> np.ndarray:
    """Uniform power-of-two grid (rad/us) around ``center``; ``fwhm`` in rad/us."""
    n = int(round(span_fwhm * points_per_fwhm))
    if n & (n - 1):
        n = 1 << n.bit_length()
    step = fwhm / points_per_fwhm
    return center + step * (np.arange(n) - n // 2)


def _check_grid(grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 8:
        raise SpectrumError("frequency grid must be 1-D with at least 8 points")
    d = np.diff(grid)
    if np.any(d <= 0) or np.abs(d - d[0]).max() > 1e-9 * abs(d[0]) * grid.size:
        raise SpectrumError("frequency grid must be uniform and increasing")
    return float(d[0])


def _lorentzian(omega, center, fwhm):
    h = 0.5 * fwhm
    return h * h / ((omega - center) ** 2 + h * h)


def hole_spectrum(cfg: HoleBurnConfig, grid) -> AbsorptionSpectrum:
    """``alpha_l = D * (1 - d*L(omega) - sum_i d_i*L_i(omega))`` with unit-peak Lorentzians."""
    grid = np.asarray(grid, dtype=float)
    step = _check_grid(grid)
    n = grid.size
    if n & (n - 1):
        raise SpectrumError(f"grid length {n} is not a power of two")
    width = cfg.fwhm
    if grid[-1] - grid[0] < MIN_SPAN_FWHM * width:
        raise SpectrumError(
            f"grid span {grid[-1] - grid[0]:.4g} rad/us is narrower than "
            f"{MIN_SPAN_FWHM:g} hole widths ({MIN_SPAN_FWHM * width:.4g})"
        )
    if width / step < MIN_POINTS_PER_FWHM:
        raise SpectrumError(
            f"grid resolves the hole with {width / step:.1f} points per FWHM, "
            f"needs {MIN_POINTS_PER_FWHM:g}"
        )
    shape = cfg.depth * _lorentzian(grid, cfg.center, width)
    for a in cfg.anti_holes:
        shape = shape + a.depth * _lorentzian(grid, mhz_to_rad_per_us(a.center_mhz),
                                              khz_to_rad_per_us(a.fwhm_khz))
    alpha = cfg.optical_depth * (1.0 - shape)
    if alpha.min() < -1e-12 * max(1.0, cfg.optical_depth):
        raise SpectrumError("hole and anti-hole settings give negative absorption")
    alpha = np.maximum(alpha, 0.0)
    return AbsorptionSpectrum(grid, alpha, None, {"span": float(grid[-1] - grid[0]),
                                                  "resolution": step})


def hilbert_fft(u: np.ndarray, pad: int = KK_PAD) -> np.ndarray:
    """Discrete Hilbert transform ``(1/pi) P int u(y)/(x-y) dy`` on a uniform grid.

    ``u`` should decay to zero at both ends; it is zero-padded ``pad``-fold on
    each side so the periodic images of the FFT kernel stay far away.
    """
    n = u.size
    m = 1 << int(math.ceil(math.log2(n * (2 * pad + 1))))
    lead = (m - n) // 2
    x = np.zeros(m)
    x[lead:lead + n] = u
    X = np.fft.fft(x)
    k = np.fft.fftfreq(m)
    h = np.fft.ifft(-1j * np.sign(k) * X).real
    return h[lead:lead + n]


def kramers_kronig(spectrum: AbsorptionSpectrum) -> AbsorptionSpectrum:
    """Fill in the minimal phase ``phi = H[-alpha_l/2]``.

    The edge baseline is removed first (a constant optical depth carries no
    dispersion), which also makes the zero padding seamless. The absorption
    must have settled at both edges.
    """
    _check_grid(spectrum.omega)
    alpha = np.asarray(spectrum.alpha_l, dtype=float)
    n = alpha.size
    feature = float(alpha.max() - alpha.min())
    if feature > 0:
        k = max(1, n // 20)
        drift = max(abs(alpha[0] - alpha[k]), abs(alpha[-1] - alpha[-1 - k]),
                    abs(alpha[0] - alpha[-1]))
        if drift > EDGE_SETTLE_TOL * feature:
            raise SpectrumError(
                f"absorption not settled at the grid edges (relative drift {drift / feature:.2g} "
                f"> {EDGE_SETTLE_TOL:g}); widen the grid"
            )
    base = 0.5 * (alpha[0] + alpha[-1])
    u = -0.5 * (alpha - base)
    phase = hilbert_fft(u) if feature > 0 else np.zeros(n)
    return replace(spectrum, phase=phase)


def _fd4(y: np.ndarray, h: float) -> np.ndarray:
    d = np.full(y.size, np.nan)
    d[2:-2] = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * h)
    return d


def group_delay(spectrum: AbsorptionSpectrum, omega0: float = 0.0) -> float:
    """``d(phi)/d(omega)`` at ``omega0`` in us (fourth-order central difference)."""
    if spectrum.phase is None:
        raise SpectrumError("phase not computed; run kramers_kronig first")
    w = spectrum.omega
    quarter = 0.25 * (w[-1] - w[0])
    if not (w[0] + quarter <= omega0 <= w[-1] - quarter):
        raise SpectrumError(f"omega0 = {omega0:.4g} rad/us lies outside the central half of the grid")
    d = _fd4(np.asarray(spectrum.phase, dtype=float), spectrum.step)
    return float(np.interp(omega0, w, d))


def group_delay_profile(spectrum: AbsorptionSpectrum) -> np.ndarray:
    """Group delay at every grid point (NaN within two points of the edges)."""
    return _fd4(np.asarray(spectrum.phase, dtype=float), spectrum.step)

