"""Level schemes, driving pulses, relaxation and unit conventions.

Units
-----
Times are in microseconds. Rabi frequencies and detunings configured in
``kHz`` / ``MHz`` are ordinary frequencies ``nu`` and run internally as
``Omega = 2*pi*nu`` in rad/us. Relaxation rates configured in ``kHz`` are
decay constants (1/ms) and become 1/us without the 2*pi, unless
``angular=True`` is asked for. Conversions live here and nowhere else.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

GROUND = "ground"
EXCITED = "excited"

RECTANGULAR = "rectangular"
GAUSSIAN = "gaussian"
SAMPLED = "sampled"
SHAPES = (RECTANGULAR, GAUSSIAN, SAMPLED)

# gaussian envelopes are treated as switched off beyond this many FWHM from the peak
GAUSSIAN_SUPPORT_FWHM = 3.0


class ModelError(ValueError):
    """Invalid level scheme, pulse or scenario configuration."""


# ---------------------------------------------------------------------------
# unit conversion


def khz_to_rad_per_us(nu_khz: float) -> float:
    return TWO_PI * nu_khz * 1e-3


def mhz_to_rad_per_us(nu_mhz: float) -> float:
    return TWO_PI * nu_mhz


def rate_khz_to_per_us(rate_khz: float, angular: bool = False) -> float:
    """Decay constant in 1/us from a value in kHz (i.e. 1/ms)."""
    return (TWO_PI if angular else 1.0) * rate_khz * 1e-3


def rad_per_us_to_khz(omega: float) -> float:
    return omega / TWO_PI * 1e3


def rad_per_us_to_mhz(omega: float) -> float:
    return omega / TWO_PI


# ---------------------------------------------------------------------------
# level scheme


def _pair(a: str, b: str) -> frozenset:
    return frozenset((a, b))


@dataclass(frozen=True)
class LevelScheme:
    """Labelled atomic levels with ground/excited roles and allowed transitions."""

    levels: tuple[str, ...]
    roles: tuple[str, ...]
    transitions: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(l) for l in self.levels))
        object.__setattr__(self, "roles", tuple(self.roles))
        object.__setattr__(
            self, "transitions", frozenset(_pair(str(a), str(b)) for a, b in self.transitions)
        )
        if len(self.levels) < 2:
            raise ModelError("a level scheme needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise ModelError(f"duplicate level labels in {self.levels}")
        if len(self.roles) != len(self.levels):
            raise ModelError("one role per level required")
        for r in self.roles:
            if r not in (GROUND, EXCITED):
                raise ModelError(f"unknown level role {r!r}")
        for tr in self.transitions:
            if len(tr) != 2:
                raise ModelError(f"degenerate transition {set(tr)}")
            a, b = sorted(tr)
            self._check_optical(a, b)

    @property
    def n(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        try:
            return self.levels.index(str(label))
        except ValueError:
            raise ModelError(f"unknown level label {label!r}") from None

    def role(self, label: str) -> str:
        return self.roles[self.index(label)]

    def _check_optical(self, a: str, b: str) -> None:
        ra, rb = self.role(a), self.role(b)
        if ra == rb:
            raise ModelError(f"transition ({a},{b}) connects two {ra} levels")

    def orient(self, a: str, b: str) -> tuple[str, str]:
        """Return ``(ground, excited)`` for an allowed transition given in any order."""
        a, b = str(a), str(b)
        self.index(a), self.index(b)
        self._check_optical(a, b)
        if _pair(a, b) not in self.transitions:
            raise ModelError(f"transition ({a},{b}) is not allowed in this scheme")
        return (a, b) if self.role(a) == GROUND else (b, a)


def build_pr_yso_scheme() -> LevelScheme:
    """Three hyperfine ground levels |1>,|2>,|3> sharing the excited level |5>.

    The second excited hyperfine level |4> is left out since no field drives it.
    """
    return LevelScheme(
        levels=("1", "2", "3", "5"),
        roles=(GROUND, GROUND, GROUND, EXCITED),
        transitions=frozenset({_pair("2", "5"), _pair("3", "5"), _pair("1", "5")}),
    )


# ---------------------------------------------------------------------------
# pulses


@dataclass(frozen=True)
class Pulse:
    """A driving field on one transition.

    ``start`` is the switch-on time for rectangular and sampled pulses and the
    peak time for gaussian pulses. ``duration`` is the full length of a
    rectangular pulse and the FWHM of the Rabi-frequency envelope of a
    gaussian one. ``rabi_peak`` and ``detuning`` are angular (rad/us);
    detuning is laser minus transition frequency.

    Sampled pulses carry their envelope explicitly (``envelope_t`` in us,
    ``envelope`` normalized to unit peak, linearly interpolated, zero outside).
    """

    transition: tuple[str, str]
    shape: str = RECTANGULAR
    start: float = 0.0
    duration: float = 0.0
    rabi_peak: float = 0.0
    detuning: float = 0.0
    phase: float = 0.0
    label: str = ""
    envelope_t: np.ndarray | None = field(default=None, compare=False, repr=False)
    envelope: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "transition", tuple(str(x) for x in self.transition))
        if len(self.transition) != 2:
            raise ModelError("a pulse transition is a pair of level labels")
        if self.shape not in SHAPES:
            raise ModelError(f"unknown pulse shape {self.shape!r}")
        for name in ("start", "duration", "rabi_peak", "detuning", "phase"):
            if not math.isfinite(getattr(self, name)):
                raise ModelError(f"pulse {self.label!r}: {name} is not finite")
        if self.shape == SAMPLED:
            if self.envelope_t is None or self.envelope is None:
                raise ModelError(f"sampled pulse {self.label!r} needs envelope samples")
            t = np.array(self.envelope_t, dtype=float)
            v = np.array(self.envelope, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2 or np.any(np.diff(t) <= 0):
                raise ModelError(f"sampled pulse {self.label!r}: bad envelope samples")
            t.setflags(write=False)
            v.setflags(write=False)
            object.__setattr__(self, "envelope_t", t)
            object.__setattr__(self, "envelope", v)
            object.__setattr__(self, "start", float(t[0]))
            object.__setattr__(self, "duration", float(t[-1] - t[0]))

    @property
    def is_noop(self) -> bool:
        return self.rabi_peak == 0.0

    @property
    def window(self) -> tuple[float, float]:
        """Time interval outside which the envelope is zero (or negligible)."""
        if self.shape == GAUSSIAN:
            half = GAUSSIAN_SUPPORT_FWHM * self.duration
            return (self.start - half, self.start + half)
        return (self.start, self.start + self.duration)

    def envelope_at(self, t):
        """Rabi frequency ``Omega(t)`` in rad/us; accepts scalars or arrays."""
        t = np.asarray(t, dtype=float)
        if self.is_noop:
            return np.zeros_like(t)[()]
        if self.shape == RECTANGULAR:
            inside = (t >= self.start) & (t < self.start + self.duration)
            return np.where(inside, self.rabi_peak, 0.0)[()]
        if self.shape == GAUSSIAN:
            x = 2.0 * (t - self.start) / self.duration
            return (self.rabi_peak * np.exp2(-(x * x)))[()]
        v = np.interp(t, self.envelope_t, self.envelope, left=0.0, right=0.0)
        return (self.rabi_peak * v)[()]

    def breakpoints(self) -> tuple[float, ...]:
        """Times where the envelope is not smooth."""
        if self.is_noop or self.shape == GAUSSIAN:
            return ()
        if self.shape == RECTANGULAR:
            return (self.start, self.start + self.duration)
        return (float(self.envelope_t[0]), float(self.envelope_t[-1]))


PulseSequence = tuple  # tuple[Pulse, ...]


def _sort_key(p: Pulse):
    return (p.window[0], p.start, p.label, p.transition)


def validate_pulse_sequence(seq: Sequence[Pulse], scheme: LevelScheme) -> tuple[Pulse, ...]:
    """Check every pulse against ``scheme`` and return a time-sorted tuple.

    Transitions are rewritten as ``(ground, excited)``. Overlapping pulses are
    allowed; their couplings add.
    """
    checked = []
    for p in seq:
        if p.duration < 0:
            raise ModelError(f"pulse {p.label!r}: negative duration {p.duration}")
        if p.duration == 0 and not p.is_noop:
            raise ModelError(f"pulse {p.label!r}: zero duration with nonzero amplitude")
        a, b = p.transition
        # role checks come before the allowed-transition check so the error names the cause
        scheme.index(a), scheme.index(b)
        if scheme.role(a) == scheme.role(b):
            raise ModelError(
                f"pulse {p.label!r}: transition ({a},{b}) connects two {scheme.role(a)} levels"
            )
        checked.append(replace(p, transition=scheme.orient(a, b)))
    return tuple(sorted(checked, key=_sort_key))


# ---------------------------------------------------------------------------
# relaxation


@dataclass(frozen=True)
class RelaxationSpec:
    """Population decay channels and total coherence decay rates (1/us).

    ``population_decay`` maps ``(excited, ground)`` to a rate.
    ``coherence_decay_total`` maps a level pair to the TOTAL decay rate of the
    corresponding off-diagonal element; pairs not listed decay at the natural
    rate ``(out_i + out_j) / 2``.
    """

    population_decay: Mapping[tuple[str, str], float] = field(default_factory=dict)
    coherence_decay_total: Mapping[frozenset, float] = field(default_factory=dict)

    def __post_init__(self):
        pop = {(str(e), str(g)): float(r) for (e, g), r in dict(self.population_decay).items()}
        coh = {frozenset(str(x) for x in k): float(r)
               for k, r in dict(self.coherence_decay_total).items()}
        for k, r in list(pop.items()) + list(coh.items()):
            if not (r >= 0 and math.isfinite(r)):
                raise ModelError(f"relaxation rate for {tuple(k)} must be finite and >= 0, got {r}")
        for k in coh:
            if len(k) != 2:
                raise ModelError(f"coherence decay needs a pair of distinct levels, got {set(k)}")
        object.__setattr__(self, "population_decay", pop)
        object.__setattr__(self, "coherence_decay_total", coh)

    @classmethod
    def from_khz(cls, population_decay_khz=None, coherence_decay_khz=None,
                 angular: bool = False) -> "RelaxationSpec":
        pop = {k: rate_khz_to_per_us(v, angular) for k, v in (population_decay_khz or {}).items()}
        coh = {frozenset(k): rate_khz_to_per_us(v, angular)
               for k, v in (coherence_decay_khz or {}).items()}
        return cls(pop, coh)

    def decay_out(self, level: str) -> float:
        return sum(r for (e, _), r in self.population_decay.items() if e == level)

    def check(self, scheme: LevelScheme) -> list[str]:
        """Validate labels against ``scheme``; return consistency warnings.

        A total coherence rate below half the summed population decay of its
        two levels is unphysical and gets a warning (the natural rate is used).
        """
        for e, g in self.population_decay:
            scheme.index(e), scheme.index(g)
            if e == g:
                raise ModelError(f"population decay from {e} onto itself")
        warnings = []
        for pair, rate in self.coherence_decay_total.items():
            a, b = sorted(pair)
            scheme.index(a), scheme.index(b)
            natural = 0.5 * (self.decay_out(a) + self.decay_out(b))
            if rate < natural:
                warnings.append(
                    f"coherence decay ({a},{b}) = {rate:.6g}/us is below the natural "
                    f"rate {natural:.6g}/us"
                )
        for w in warnings:
            log.warning(w)
        return warnings

    def optical_t1(self, level: str) -> float:
        """Population lifetime of ``level`` in us (inf if it does not decay)."""
        out = self.decay_out(level)
        return math.inf if out == 0 else 1.0 / out


# ---------------------------------------------------------------------------
# intensity calibration


@dataclass(frozen=True)
class IntensityCalibration:
    """Per-transition constants ``k`` (kHz per sqrt(W/cm^2)) with ``nu_Rabi = k*sqrt(I)``."""

    k_khz: Mapping[frozenset, float]

    def __post_init__(self):
        k = {frozenset(str(x) for x in tr): float(v) for tr, v in dict(self.k_khz).items()}
        for tr, v in k.items():
            if not v > 0:
                raise ModelError(f"calibration constant for {sorted(tr)} must be > 0")
        object.__setattr__(self, "k_khz", k)

    def k_for(self, transition) -> float:
        key = frozenset(str(x) for x in transition)
        try:
            return self.k_khz[key]
        except KeyError:
            raise ModelError(f"no intensity calibration for transition {sorted(key)}") from None


def rabi_from_intensity(intensity: float, cal, transition=None) -> float:
    """Angular Rabi frequency (rad/us) for an intensity in W/cm^2.

    ``cal`` is either an :class:`IntensityCalibration` (then ``transition`` is
    required) or a bare constant ``k`` in kHz per sqrt(W/cm^2).
    """
    if intensity < 0:
        raise ModelError(f"intensity must be >= 0, got {intensity}")
    k = cal.k_for(transition) if isinstance(cal, IntensityCalibration) else float(cal)
    if not k > 0:
        raise ModelError("calibration constant must be > 0")
    return khz_to_rad_per_us(k * math.sqrt(intensity))


# reference pairings: P at 3 W/cm^2 gives 10 kHz, A at 10 W/cm^2 gives 100 kHz
PR_YSO_CALIBRATION = IntensityCalibration(
    {frozenset(("2", "5")): 10.0 / math.sqrt(3.0), frozenset(("3", "5")): 100.0 / math.sqrt(10.0)}
)


def pr_yso_relaxation(G_khz: float = 1.0, g_khz: float = 50.0, g23_khz: float = 0.0,
                      angular: bool = False) -> RelaxationSpec:
    """Excited |5> decays to |2> and |3> at ``G`` each; optical coherences decay at ``g``.

    ``g23_khz`` optionally dephases the |2>-|3> Raman coherence on top of its
    natural (zero) rate.
    """
    coh = {("2", "5"): g_khz, ("3", "5"): g_khz}
    if g23_khz:
        coh[("2", "3")] = g23_khz
    return RelaxationSpec.from_khz({("5", "2"): G_khz, ("5", "3"): G_khz}, coh, angular)


# ---------------------------------------------------------------------------
# scenario configuration


def initial_populations(kind: str, scheme: LevelScheme | None = None) -> dict[str, float]:
    """``post-repump``: everything in |2>; ``thermal``: ground levels equally populated."""
    scheme = scheme or build_pr_yso_scheme()
    if kind == "post-repump":
        return {l: (1.0 if l == "2" else 0.0) for l in scheme.levels}
    if kind == "thermal":
        grounds = [l for l, r in zip(scheme.levels, scheme.roles) if r == GROUND]
        return {l: (1.0 / len(grounds) if l in grounds else 0.0) for l in scheme.levels}
    raise ModelError(f"unknown initial population preset {kind!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    scheme: LevelScheme
    relaxation: RelaxationSpec
    pulses: tuple
    initial_populations: Mapping[str, float]
    sample_step: float = 0.05
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        pops = {str(k): float(v) for k, v in dict(self.initial_populations).items()}
        for k, v in pops.items():
            self.scheme.index(k)
            if not 0.0 <= v <= 1.0:
                raise ModelError(f"initial population of {k} = {v} outside [0, 1]")
        if abs(sum(pops.values()) - 1.0) > 1e-12:
            raise ModelError(f"initial populations sum to {sum(pops.values())!r}, not 1")
        if not self.sample_step > 0:
            raise ModelError("sample_step must be > 0")
        if not (self.rtol > 0 and self.atol > 0):
            raise ModelError("integrator tolerances must be > 0")
        self.relaxation.check(self.scheme)
        object.__setattr__(self, "initial_populations", pops)
        object.__setattr__(self, "pulses", validate_pulse_sequence(self.pulses, self.scheme))

    def rho0(self) -> np.ndarray:
        """Diagonal initial density matrix; optical coherences start at zero."""
        rho = np.zeros((self.scheme.n, self.scheme.n), dtype=complex)
        for k, v in self.initial_populations.items():
            i = self.scheme.index(k)
            rho[i, i] = v
        return rho
