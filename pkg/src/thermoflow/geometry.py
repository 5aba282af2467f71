"""Chart-level geometry in the affine ``eta`` coordinates.

Tangent vectors are expressed in the coordinate basis ``d/d eta``; the
metric acting on them is the Hessian of ``psi``, and the cubic form uses
the Amari-Chentsov components ``C^{ijk} = -d3 psi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResolutionError, SingularMetric
from .systems import State, ThermoSystem

MAX_CONDITION = 1e12
DEFAULT_MAX_REL_STEP = 0.05


@dataclass(frozen=True)
class TangentVec:
    base: State
    components: tuple[float, float]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) != 2 or not np.all(np.isfinite(comps)):
            raise DomainError(f"tangent components must be two finite numbers: {comps!r}")
        object.__setattr__(self, "components", comps)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.components)

    def scaled(self, factor: float) -> "TangentVec":
        return TangentVec(self.base, tuple(factor * c for c in self.components))


@dataclass(frozen=True)
class Curve:
    """Time-ordered samples of states; ``eta`` has shape ``(n, 2)``."""

    t: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if t.ndim != 1 or t.size < 2 or eta.shape != (t.size, 2):
            raise DomainError("a curve needs at least two samples with matching (n, 2) states")
        if np.any(np.diff(t) <= 0):
            raise DomainError("curve times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def from_samples(cls, samples) -> "Curve":
        t, states = zip(*samples)
        return cls(np.array(t, dtype=float), np.array([s.eta for s in states]))

    def states(self) -> list[State]:
        return [State.from_eta(e) for e in self.eta]


# -- vectorized kernels ---------------------------------------------------------


def metric_quadratic(system: ThermoSystem, eta, v) -> np.ndarray:
    """``g_eta(v, v)`` for batches of base points and vectors."""
    h = system._hess(np.asarray(eta, dtype=float))
    v = np.asarray(v, dtype=float)
    return np.einsum("...i,...ij,...j->...", v, h, v)


def cubic_values(system: ThermoSystem, eta, v) -> np.ndarray:
    """``C(v, v, v)`` for batches of base points and vectors."""
    c = system.c_tensor(np.asarray(eta, dtype=float))
    v = np.asarray(v, dtype=float)
    return np.einsum("...ijk,...i,...j,...k->...", c, v, v, v)


def segment_length_sq(system: ThermoSystem, eta_mid, deta) -> np.ndarray:
    """Squared midpoint-rule length of chart segments."""
    return np.maximum(metric_quadratic(system, eta_mid, deta), 0.0)


def check_resolution(system: ThermoSystem, eta_mid, deta, max_rel_step=DEFAULT_MAX_REL_STEP):
    rel = np.max(np.abs(deta) / system.chart_scale(eta_mid), axis=-1)
    worst = float(np.max(rel)) if rel.size else 0.0
    if worst > max_rel_step:
        raise ResolutionError(
            f"segment spans {worst:.3g} of the local chart scale (bound {max_rel_step}); "
            "refine the grid"
        )


# -- public operations ----------------------------------------------------------


def grad_divergence(system: ThermoSystem, state: State, q: State) -> TangentVec:
    """Riemannian gradient of ``D*_q`` at ``state``; its eta components are ``eta - eta_q``."""
    g = system.metric_eta(state)
    system.check(q)
    if g.condition_number() > MAX_CONDITION:
        raise SingularMetric(f"metric condition number {g.condition_number():.3g} at {state}")
    return TangentVec(state, tuple(state.eta - q.eta))


def norm_sq(system: ThermoSystem, state: State, v: TangentVec) -> float:
    if v.base != state:
        raise DomainError("tangent vector is not based at the given state")
    return max(system.metric_eta(state)(v.vector), 0.0)


def cubic_form(system: ThermoSystem, state: State, v: TangentVec) -> float:
    if v.base != state:
        raise DomainError("tangent vector is not based at the given state")
    return system.amari_chentsov_eta(state)(v.vector)


def curve_length(system: ThermoSystem, curve: Curve, max_rel_step: float = DEFAULT_MAX_REL_STEP) -> float:
    """Riemannian length by the midpoint rule on chart segments."""
    system._check(curve.eta)
    deta = np.diff(curve.eta, axis=0)
    mid = 0.5 * (curve.eta[1:] + curve.eta[:-1])
    check_resolution(system, mid, deta, max_rel_step)
    return float(np.sum(np.sqrt(segment_length_sq(system, mid, deta))))
