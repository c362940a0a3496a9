"""Rotating-wave Hamiltonians and Lindblad master-equation integration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eig

from .model import GAUSSIAN, RECTANGULAR, LevelScheme, ModelError, Pulse, RelaxationSpec, ScenarioConfig

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-7
MIN_STEPS_PER_FWHM = 10
MAX_STEP_SAMPLES = 20


class IntegrationError(RuntimeError):
    """The integrator could not reach the requested tolerance."""

    def __init__(self, message: str, t_fail: float | None = None):
        super().__init__(message)
        self.t_fail = t_fail


class InvariantError(RuntimeError):
    """A density-matrix invariant was violated beyond tolerance."""


class SteadyStateError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Hamiltonian


def _active(p: Pulse, t: float) -> bool:
    lo, hi = p.window
    return lo <= t < hi if p.shape != GAUSSIAN else lo <= t <= hi


def _frame_detunings(pulses, t: float) -> dict[tuple[str, str], float]:
    """Detuning defining the rotating frame of each driven transition at time ``t``.

    A transition uses the detuning of the pulse active on it, otherwise the
    most recent one that started, otherwise the first one to come.
    """
    by_tr: dict[tuple[str, str], list[Pulse]] = {}
    for p in pulses:
        if not p.is_noop:
            by_tr.setdefault(p.transition, []).append(p)
    out = {}
    for tr, ps in by_tr.items():
        active = [p for p in ps if _active(p, t)]
        if len({p.detuning for p in active}) > 1:
            raise ModelError(
                f"simultaneous pulses {[p.label for p in active]} on transition {tr} "
                "with different detunings are not supported"
            )
        if active:
            out[tr] = active[0].detuning
            continue
        started = [p for p in ps if p.window[0] <= t]
        chosen = max(started, key=lambda p: p.window[0]) if started else ps[0]
        out[tr] = chosen.detuning
    return out


def frame_energies(scheme: LevelScheme, detunings: Mapping[tuple[str, str], float]) -> np.ndarray:
    """Level energies (rad/us) of the frame rotating with every field.

    Each connected component of driven transitions is traversed from its first
    level (energy 0); a field of detuning ``d`` on ``(g, e)`` fixes
    ``E_e - E_g = -d``. Loops with inconsistent detunings are rejected.
    """
    adj: dict[str, list[tuple[str, float]]] = {}
    for (g, e), d in detunings.items():
        adj.setdefault(g, []).append((e, -d))
        adj.setdefault(e, []).append((g, d))
    energy: dict[str, float] = {}
    for root in scheme.levels:
        if root in energy or root not in adj:
            continue
        energy[root] = 0.0
        stack = [root]
        while stack:
            a = stack.pop()
            for b, step in adj[a]:
                want = energy[a] + step
                if b in energy:
                    if abs(energy[b] - want) > 1e-12 * (1.0 + abs(want)):
                        raise ModelError("driven transitions form a loop with inconsistent detunings")
                else:
                    energy[b] = want
                    stack.append(b)
    E = np.zeros(scheme.n)
    for lvl, v in energy.items():
        E[scheme.index(lvl)] = v
    return E


def build_hamiltonian(scheme: LevelScheme, pulses, t: float) -> np.ndarray:
    """``H(t)/hbar`` in rad/us for validated pulses.

    Detunings sit on the diagonal in the multi-field rotating frame; each
    driven transition ``(g, e)`` gets ``H[e, g] = Omega(t)/2 * exp(i*phase)``.
    """
    H = np.diag(frame_energies(scheme, _frame_detunings(pulses, t))).astype(complex)
    for p in pulses:
        if p.is_noop:
            continue
        g, e = scheme.index(p.transition[0]), scheme.index(p.transition[1])
        c = 0.5 * float(p.envelope_at(t)) * np.exp(1j * p.phase)
        H[e, g] += c
        H[g, e] += np.conj(c)
    return H


# ---------------------------------------------------------------------------
# dissipation


@dataclass(frozen=True)
class Dissipator:
    """Relaxation compiled against a level ordering.

    ``transfer[g, e]`` is the decay rate e -> g, ``out[e]`` the total decay out
    of e and ``damping[i, j]`` the total decay rate of ``rho[i, j]`` (i != j).
    """

    transfer: np.ndarray
    out: np.ndarray
    damping: np.ndarray

    @classmethod
    def compile(cls, scheme: LevelScheme, relax: RelaxationSpec) -> "Dissipator":
        n = scheme.n
        transfer = np.zeros((n, n))
        for (e, g), rate in relax.population_decay.items():
            transfer[scheme.index(g), scheme.index(e)] += rate
        out = transfer.sum(axis=0)
        damping = 0.5 * (out[:, None] + out[None, :])
        for pair, rate in relax.coherence_decay_total.items():
            a, b = (scheme.index(x) for x in sorted(pair))
            # pure-dephasing completion; never below the natural rate
            total = max(rate, damping[a, b])
            damping[a, b] = damping[b, a] = total
        np.fill_diagonal(damping, 0.0)
        for a in (transfer, out, damping):
            a.setflags(write=False)
        return cls(transfer, out, damping)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = -self.damping * rho
        p = np.diagonal(rho)
        d[np.diag_indices_from(d)] = self.transfer @ p - self.out * p
        return d


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, relax, scheme: LevelScheme | None = None) -> np.ndarray:
    """``d rho/dt = -i[H, rho] + D(rho)``.

    ``D`` holds one Lindblad channel ``sqrt(G)|g><e|`` per population decay
    plus pure dephasing topping each coherence up to its total rate.
    ``relax`` may be a :class:`RelaxationSpec` (then ``scheme`` is needed) or
    an already compiled :class:`Dissipator`.
    """
    if not isinstance(relax, Dissipator):
        if scheme is None:
            raise ModelError("a level scheme is needed to compile the relaxation")
        relax = Dissipator.compile(scheme, relax)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != H.shape or rho.shape != relax.damping.shape:
        raise ModelError(f"dimension mismatch: rho {rho.shape}, H {H.shape}")
    return -1j * (H @ rho - rho @ H) + relax.apply(rho)


def liouvillian(H: np.ndarray, relax, scheme: LevelScheme | None = None) -> np.ndarray:
    """Matrix of the generator acting on row-major ``rho.ravel()``."""
    n = H.shape[0]
    L = np.empty((n * n, n * n), dtype=complex)
    basis = np.zeros((n, n), dtype=complex)
    diss = relax if isinstance(relax, Dissipator) else Dissipator.compile(scheme, relax)
    for k in range(n * n):
        basis.flat[k] = 1.0
        L[:, k] = lindblad_rhs(basis, H, diss).ravel()
        basis.flat[k] = 0.0
    return L


# ---------------------------------------------------------------------------
# time series


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Density matrices sampled on a uniform grid plus the driving envelopes.

    ``rho`` has shape ``(n_samples, n, n)``; ``envelopes`` maps pulse labels to
    ``Omega(t)`` in rad/us. ``hermiticity_drift`` is ``max|rho - rho^dagger|``
    per sample before re-symmetrization.
    """

    t: np.ndarray
    rho: np.ndarray
    scheme: LevelScheme
    envelopes: Mapping[str, np.ndarray] = field(default_factory=dict)
    hermiticity_drift: np.ndarray | None = None

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def population(self, level: str) -> np.ndarray:
        i = self.scheme.index(level)
        return self.rho[:, i, i].real

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.rho, axis1=1, axis2=2))

    def coherence(self, a: str, b: str) -> np.ndarray:
        """``rho[a, b]`` over time."""
        return self.rho[:, self.scheme.index(a), self.scheme.index(b)]

    def probe_coherence(self, ground: str, excited: str) -> np.ndarray:
        """``rho[ground, excited]``: its imaginary part is positive for absorption."""
        return self.coherence(ground, excited)


def check_invariants(series: TimeSeries) -> dict[str, float]:
    """Worst-case trace, Hermiticity and positivity figures; raises on violation."""
    tr = np.abs(np.trace(series.rho, axis1=1, axis2=2) - 1.0).max()
    herm = float(series.hermiticity_drift.max()) if series.hermiticity_drift is not None else 0.0
    min_eig = float(np.linalg.eigvalsh(series.rho).min())
    pops = series.populations
    report = {"trace_error": float(tr), "hermiticity_drift": herm, "min_eigenvalue": min_eig}
    if tr > TRACE_TOL:
        raise InvariantError(f"trace drift {tr:.3g} exceeds {TRACE_TOL}")
    if herm > HERMITICITY_TOL:
        raise InvariantError(f"Hermiticity drift {herm:.3g} exceeds {HERMITICITY_TOL}")
    if min_eig < -POSITIVITY_TOL:
        raise InvariantError(f"density matrix eigenvalue {min_eig:.3g} below -{POSITIVITY_TOL}")
    if pops.min() < -POSITIVITY_TOL or pops.max() > 1 + POSITIVITY_TOL:
        raise InvariantError("population outside [0, 1]")
    return report


# ---------------------------------------------------------------------------
# integration


def sample_grid(t0: float, t1: float, step: float) -> np.ndarray:
    n = int(math.floor((t1 - t0) / step * (1 + 1e-12))) + 1
    return t0 + step * np.arange(n)


def _default_span(pulses) -> tuple[float, float]:
    active = [p for p in pulses if not p.is_noop]
    if not active:
        raise ModelError("t_span is required when there are no pulses")
    return min(p.window[0] for p in active), max(p.window[1] for p in active)


def _check_bichromatic(pulses) -> None:
    ps = [p for p in pulses if not p.is_noop]
    for i, a in enumerate(ps):
        for b in ps[i + 1:]:
            if a.transition == b.transition and a.detuning != b.detuning:
                lo = max(a.window[0], b.window[0])
                hi = min(a.window[1], b.window[1])
                if lo < hi:
                    raise ModelError(
                        f"pulses {a.label!r} and {b.label!r} overlap on {a.transition} "
                        "with different detunings"
                    )


def _smooth_edges(p: Pulse) -> tuple[float, ...]:
    # a gaussian has no kinks, but its support edges keep the first step from skipping it
    return p.window if p.shape == GAUSSIAN and not p.is_noop else ()


def _max_step(pulses, a: float, b: float) -> float:
    """Largest step that still resolves every smooth pulse overlapping ``[a, b]``."""
    limit = math.inf
    for p in pulses:
        if p.is_noop or p.shape == RECTANGULAR:
            continue
        lo, hi = p.window
        if lo < b and hi > a:
            if p.shape == GAUSSIAN:
                limit = min(limit, p.duration / MIN_STEPS_PER_FWHM)
            else:
                limit = min(limit, MAX_STEP_SAMPLES * float(np.min(np.diff(p.envelope_t))))
    return limit


def evolve(config: ScenarioConfig, t_span=None, rho0: np.ndarray | None = None,
           check: bool = True) -> TimeSeries:
    """Integrate the master equation and sample it on a uniform grid.

    Adaptive Dormand-Prince 4(5) steps, restarted at every envelope
    discontinuity so no step straddles a pulse edge. ``rho`` is symmetrized
    at the sample points after the Hermiticity drift has been recorded.
    """
    scheme, pulses = config.scheme, config.pulses
    t0, t1 = t_span if t_span is not None else _default_span(pulses)
    if not t1 > t0:
        raise ModelError(f"empty time span ({t0}, {t1})")
    _check_bichromatic(pulses)
    diss = Dissipator.compile(scheme, config.relaxation)
    n = scheme.n
    grid = sample_grid(t0, t1, config.sample_step)

    drives = [(scheme.index(p.transition[0]), scheme.index(p.transition[1]),
               p, np.exp(1j * p.phase)) for p in pulses if not p.is_noop]
    detuning_sets: dict = {}
    for p in pulses:
        if not p.is_noop:
            detuning_sets.setdefault(p.transition, set()).add(p.detuning)
    constant_frame = all(len(s) == 1 for s in detuning_sets.values())
    E0 = frame_energies(scheme, {tr: next(iter(s)) for tr, s in detuning_sets.items()})

    def hamiltonian(t):
        E = E0 if constant_frame else frame_energies(scheme, _frame_detunings(pulses, t))
        H = np.diag(E).astype(complex)
        for g, e, p, ph in drives:
            c = 0.5 * float(p.envelope_at(t)) * ph
            H[e, g] += c
            H[g, e] += np.conj(c)
        return H

    def rhs(t, y):
        rho = y.reshape(n, n)
        H = hamiltonian(t)
        return (-1j * (H @ rho - rho @ H) + diss.apply(rho)).ravel()

    edges = [b for p in pulses for b in (*p.breakpoints(), *_smooth_edges(p))]
    cuts = sorted({t0, t1, *(b for b in edges if t0 < b < t1)})
    y = (config.rho0() if rho0 is None else np.array(rho0, dtype=complex)).ravel()
    samples = np.empty((grid.size, n * n), dtype=complex)
    for a, b in zip(cuts[:-1], cuts[1:]):
        last = b == cuts[-1]
        idx = np.nonzero((grid >= a) & ((grid <= b) if last else (grid < b)))[0]
        t_eval = grid[idx]
        if not t_eval.size or t_eval[-1] != b:
            t_eval = np.append(t_eval, b)
        sol = solve_ivp(rhs, (a, b), y, method="RK45", t_eval=t_eval,
                        rtol=config.rtol, atol=config.atol, max_step=_max_step(pulses, a, b))
        if sol.status != 0:
            t_fail = float(sol.t[-1]) if sol.t.size else a
            raise IntegrationError(f"integration failed at t = {t_fail:.6g} us: {sol.message}",
                                   t_fail)
        samples[idx] = sol.y[:, :idx.size].T
        y = sol.y[:, -1]
    rho = samples.reshape(-1, n, n)
    drift = np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))).max(axis=(1, 2))
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
    envelopes = {}
    for p in pulses:
        key = p.label or f"{p.transition[0]}-{p.transition[1]}"
        envelopes[key] = envelopes.get(key, 0.0) + p.envelope_at(grid)
    series = TimeSeries(grid, rho, scheme, envelopes, drift)
    if check:
        check_invariants(series)
    return series


# ---------------------------------------------------------------------------
# steady state


def steady_state(H: np.ndarray, relax, scheme: LevelScheme | None = None,
                 rho0: np.ndarray | None = None, tol: float = 1e-9) -> np.ndarray:
    """Stationary state of a time-independent generator.

    The null space of the vectorized generator is found by SVD. When it is
    one-dimensional the trace-normalized null vector is returned. A larger
    null space (e.g. several undriven ground levels) is an error unless
    ``rho0`` is given, in which case the long-time limit of ``rho0`` is
    returned through the spectral projector onto eigenvalue 0.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    L = liouvillian(H, relax, scheme)
    scale = max(1.0, np.abs(L).max())
    _, s, vh = np.linalg.svd(L)
    null = np.sum(s <= tol * scale)
    if null == 0:
        raise SteadyStateError("generator has no stationary state")
    if null == 1:
        rho = vh[-1].conj().reshape(n, n)
        rho = rho / np.trace(rho)
    else:
        if rho0 is None:
            raise SteadyStateError(f"stationary states are degenerate (null space dimension {null})")
        w, vl, vr = eig(L, left=True, right=True)
        zero = np.abs(w) <= 1e-8 * scale
        V, W = vr[:, zero], vl[:, zero].conj().T
        # left and right eigenvectors are only biorthogonal up to normalization
        P = V @ np.linalg.solve(W @ V, W)
        rho = (P @ np.asarray(rho0, dtype=complex).ravel()).reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    return rho
