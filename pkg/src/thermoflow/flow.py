"""Relaxation dynamics: gradient flows of the availability divergence.

Undriven relaxation is linear in the affine chart,
``d eta / dt = -lambda (eta - eta_q)``, and is solved in closed form by
:func:`relax_analytic`. :func:`relax_ode` integrates the same flow in the
dual ``theta`` chart with fixed-step RK4 as an independent check, and
:func:`driven_flow` handles a time-dependent rate and a moving target.

Trajectories keep the offset ``eta - eta_q`` separately from ``eta`` so
that quantities which vanish at the target stay accurate deep into the
exponential tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import ConvergenceError, DomainError, ResolutionError, StepError
from .geometry import (
    DEFAULT_MAX_REL_STEP,
    Curve,
    cubic_values,
    metric_quadratic,
    segment_length_sq,
)
from .systems import State, ThermoSystem

DEFAULT_GRID_POINTS = 10_001
HORIZON_RATE_PRODUCT = 20.0


@dataclass(frozen=True)
class RelaxSpec:
    p0: State
    q: State
    lam: float = 1.0
    horizon: Optional[float] = None
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"relaxation rate must be positive, got {self.lam!r}")
        if self.horizon is None:
            object.__setattr__(self, "horizon", HORIZON_RATE_PRODUCT / self.lam)
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if int(self.grid_points) != self.grid_points or self.grid_points < 2:
            raise DomainError("grid_points must be an integer >= 2")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, int(self.grid_points))


@dataclass(frozen=True)
class DrivenSpec:
    """Flow toward a moving target ``target_path(t)`` at rate ``rate_path(t)``."""

    p0: State
    target_path: Callable[[float], State]
    rate_path: Callable[[float], float]
    horizon: float
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if int(self.grid_points) != self.grid_points or self.grid_points < 2:
            raise DomainError("grid_points must be an integer >= 2")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, int(self.grid_points))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled relaxation with its derived series.

    ``divergence`` is ``D*_{q(t)}`` of the current state, ``speed_sq`` is
    ``||gamma_dot||^2``, ``cubic`` is ``C(gamma_dot, gamma_dot, gamma_dot)`` and
    ``dissipated`` is the running integral of ``||gamma_dot||^2 / lambda``.
    """

    system: ThermoSystem
    t: np.ndarray
    target: np.ndarray
    offset: np.ndarray
    rate: np.ndarray
    rate_mid: np.ndarray
    velocity: np.ndarray
    divergence: np.ndarray
    speed_sq: np.ndarray
    cubic: np.ndarray
    segment_sq: np.ndarray
    dissipated: np.ndarray
    driven: bool = False
    offset_fn: Optional[Callable] = field(default=None, repr=False)

    @property
    def eta(self) -> np.ndarray:
        return self.target + self.offset

    @property
    def curve(self) -> Curve:
        return Curve(self.t, self.eta)

    @property
    def q(self) -> State:
        return State.from_eta(self.target[-1])

    @property
    def p0(self) -> State:
        return State.from_eta(self.eta[0])

    @property
    def lam(self) -> float:
        if self.driven or not np.all(self.rate == self.rate[0]):
            raise DomainError("trajectory does not have a constant rate")
        return float(self.rate[0])

    def __len__(self):
        return self.t.size

    def offset_at(self, t) -> np.ndarray:
        """Offset ``eta - eta_q`` at arbitrary times inside the horizon."""
        if self.offset_fn is None:
            raise DomainError("continuous evaluation is only available for undriven trajectories")
        return self.offset_fn(np.asarray(t, dtype=float))

    def local(self, t):
        """``(eta, velocity)`` at arbitrary times for undriven trajectories."""
        off = self.offset_at(t)
        return self.target[0] + off, -self.lam * off


def _assemble(system, t, target, offset, rate, rate_mid, driven, offset_fn=None) -> Trajectory:
    eta = target + offset
    velocity = -rate[:, None] * offset
    divergence = system.divergence_delta(target, offset)
    speed_sq = np.maximum(metric_quadratic(system, eta, velocity), 0.0)
    cubic = cubic_values(system, eta, velocity)

    h = np.diff(t)
    deta = np.diff(offset, axis=0) + np.diff(target, axis=0)
    mid = 0.5 * (eta[1:] + eta[:-1])
    seg = segment_length_sq(system, mid, deta)
    increments = seg / h / rate_mid
    dissipated = np.concatenate([[0.0], np.cumsum(increments)])
    return Trajectory(
        system=system,
        t=t,
        target=target,
        offset=offset,
        rate=rate,
        rate_mid=rate_mid,
        velocity=velocity,
        divergence=divergence,
        speed_sq=speed_sq,
        cubic=cubic,
        segment_sq=seg,
        dissipated=dissipated,
        driven=driven,
        offset_fn=offset_fn,
    )


def _undriven_arrays(spec: RelaxSpec, n: int):
    target = np.broadcast_to(spec.q.eta, (n, 2)).copy()
    rate = np.full(n, float(spec.lam))
    return target, rate, np.full(n - 1, float(spec.lam))


def relax_analytic(system: ThermoSystem, spec: RelaxSpec) -> Trajectory:
    """Closed-form solution ``eta(t) = eta_q + (eta_0 - eta_q) exp(-lambda t)``."""
    system.check(spec.p0)
    system.check(spec.q)
    t = spec.times
    d0 = spec.p0.eta - spec.q.eta
    lam = float(spec.lam)

    def offset_fn(tt):
        return np.multiply.outer(np.exp(-lam * tt), d0)

    target, rate, rate_mid = _undriven_arrays(spec, t.size)
    return _assemble(system, t, target, offset_fn(t), rate, rate_mid, False, offset_fn)


def relax_ode(system: ThermoSystem, spec: RelaxSpec) -> Trajectory:
    """RK4 integration of ``theta_dot = -lambda H(eta) (eta - eta_q)`` in the dual chart.

    The state variable is ``theta - theta_q``; the affine coordinates are
    recovered at each stage by inverting the Legendre map.
    """
    system.check(spec.p0)
    system.check(spec.q)
    t = spec.times
    lam = float(spec.lam)
    eta_q = spec.q.eta
    guess = [spec.p0.eta - eta_q]

    def to_eta(y):
        try:
            d = system.eta_from_theta_delta(eta_q, y, guess[0])
            system._check(eta_q + d)
        except (ConvergenceError, DomainError) as exc:
            raise StepError(f"integration step left the valid chart: {exc}") from exc
        guess[0] = d
        return d

    def rhs(y):
        d = to_eta(y)
        return -lam * (system._hess(eta_q + d) @ d)

    offsets = np.empty((t.size, 2))
    offsets[0] = spec.p0.eta - eta_q
    y = system.theta_delta(eta_q, offsets[0])
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        offsets[i + 1] = to_eta(y)

    spline = CubicHermiteSpline(t, offsets, -lam * offsets, axis=0)
    target, rate, rate_mid = _undriven_arrays(spec, t.size)
    return _assemble(system, t, target, offsets, rate, rate_mid, False, spline)


def _as_eta(value) -> np.ndarray:
    if isinstance(value, State):
        return value.eta
    return np.asarray(value, dtype=float)


def driven_flow(system: ThermoSystem, spec: DrivenSpec) -> Trajectory:
    """RK4 integration of ``eta_dot = -lambda(t) (eta - eta_q(t))``."""
    system.check(spec.p0)
    t = spec.times
    target = np.array([_as_eta(spec.target_path(ti)) for ti in t])
    rate = np.array([float(spec.rate_path(ti)) for ti in t])
    t_mid = 0.5 * (t[1:] + t[:-1])
    rate_mid = np.array([float(spec.rate_path(ti)) for ti in t_mid])
    if not (np.all(np.isfinite(rate)) and np.all(rate > 0) and np.all(rate_mid > 0)):
        raise DomainError("rate schedule must stay positive on the horizon")
    system._check(target)
    jumps = np.max(np.abs(np.diff(target, axis=0)) / system.chart_scale(target[:-1]), axis=-1)
    if jumps.size and jumps.max() > DEFAULT_MAX_REL_STEP:
        raise DomainError("target path is not continuous at the grid resolution")

    def rhs(ti, eta):
        return -float(spec.rate_path(ti)) * (eta - _as_eta(spec.target_path(ti)))

    eta = np.empty((t.size, 2))
    eta[0] = spec.p0.eta
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        y = eta[i]
        k1 = rhs(t[i], y)
        k2 = rhs(t[i] + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t[i] + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t[i + 1], y + h * k3)
        eta[i + 1] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not system._admissible(eta[i + 1]):
            raise StepError(f"driven flow left the valid chart at t={t[i + 1]:.6g}")

    return _assemble(system, t, target, eta - target, rate, rate_mid, True)


# -- identity residuals ---------------------------------------------------------


def _central(traj: Trajectory, y: np.ndarray):
    if len(traj) < 3:
        raise ResolutionError("at least three samples are needed for central differences")
    h = np.diff(traj.t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ResolutionError("central differences need a uniform time grid")
    h = h[0]
    d1 = (y[2:] - y[:-2]) / (2 * h)
    d2 = (y[2:] - 2 * y[1:-1] + y[:-2]) / (h * h)
    return d1, d2


def _safe_ratio(num, den):
    num = np.abs(num)
    out = np.zeros_like(num)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    out[~nz & (num > 0)] = np.inf
    return out


def pregeodesic_residual(traj: Trajectory, lam: float) -> float:
    """Max relative defect of ``eta_ddot + lambda eta_dot = 0`` at interior samples."""
    d1, d2 = _central(traj, traj.offset)
    scale = traj.system.chart_scale(traj.eta[1:-1])
    num = np.max(np.abs(d2 + lam * d1) / scale, axis=-1)
    den = np.max(np.abs(lam * d1) / scale, axis=-1)
    return float(np.max(_safe_ratio(num, den)))


def dissipation_residual(traj: Trajectory) -> float:
    """Max relative defect of ``-lambda dD/dt = ||gamma_dot||^2`` at interior samples."""
    lam = traj.lam
    d1, _ = _central(traj, traj.divergence)
    s2 = traj.speed_sq[1:-1]
    return float(np.max(_safe_ratio(-lam * d1 - s2, s2)))


def second_derivative_residual(traj: Trajectory) -> float:
    """Max relative defect of ``-lambda D'' = -C(v,v,v) - 2 lambda ||v||^2``."""
    lam = traj.lam
    _, d2 = _central(traj, traj.divergence)
    s2 = traj.speed_sq[1:-1]
    cub = traj.cubic[1:-1]
    rhs = -cub - 2 * lam * s2
    return float(np.max(_safe_ratio(-lam * d2 - rhs, np.abs(cub) + 2 * lam * s2)))
