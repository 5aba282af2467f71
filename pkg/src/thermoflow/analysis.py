"""Equidistant initial states, asymmetry classification and dissipation bounds.

Two relaxations ``gamma1`` and ``gamma2`` toward the same target start at
states with equal availability divergence. Their divergence difference
``delta D* = D*(gamma2) - D*(gamma1)`` vanishes at both ends, so it has an
interior extremum; that extremum sits where the two speeds match, and the
sign of the cubic-form difference there decides which branch is faster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, DomainError, GridError, ResolutionError
from .flow import DEFAULT_GRID_POINTS, RelaxSpec, Trajectory, relax_analytic
from .geometry import check_resolution, cubic_values, metric_quadratic
from .systems import ClassicalIdealGasTP, State, ThermoSystem

EQUIDISTANT_RTOL = 1e-12
PRODUCT_GUARD_RTOL = 1e-8


# -- constraint lines and equidistant pairs -------------------------------------


@dataclass(frozen=True)
class ConstraintLine:
    """Affine line ``eta(s) = origin + s * direction`` in the chart."""

    origin: tuple[float, float]
    direction: tuple[float, float]

    def eta(self, s: float) -> np.ndarray:
        return np.asarray(self.origin, dtype=float) + s * np.asarray(self.direction, dtype=float)

    def __call__(self, s: float) -> State:
        return State.from_eta(self.eta(s))

    @classmethod
    def through(cls, a: State, b: State) -> "ConstraintLine":
        """Line with ``s = 0`` at ``a`` and ``s = 1`` at ``b``."""
        return cls(tuple(a.eta), tuple(b.eta - a.eta))


def isobar(P: float) -> ConstraintLine:
    """Constant pressure; the parameter is the temperature."""
    return ConstraintLine((0.0, -float(P)), (1.0, 0.0))


def iso_mu(mu: float) -> ConstraintLine:
    """Constant chemical potential; the parameter is the temperature."""
    return ConstraintLine((0.0, float(mu)), (1.0, 0.0))


def isotherm(T: float) -> ConstraintLine:
    """Constant temperature; the parameter is the second chart coordinate."""
    return ConstraintLine((float(T), 0.0), (0.0, 1.0))


@dataclass(frozen=True)
class EquidistantPair:
    hot: State
    cold: State
    q: State
    divergence_value: float


def _divergence_on(system: ThermoSystem, q: State, line: ConstraintLine, s: float) -> float:
    eta = line.eta(s)
    system._check(eta)
    return float(system.divergence_delta(q.eta, eta - q.eta))


def solve_equidistant(
    system: ThermoSystem,
    q: State,
    given: State,
    line: ConstraintLine,
    bracket: tuple[float, float],
) -> EquidistantPair:
    """Find the state on ``line`` whose divergence from ``q`` equals that of ``given``."""
    system.check(q)
    system.check(given)
    if given == q:
        raise DomainError("the given state coincides with the target")
    target = system.divergence(given, q)
    lo, hi = (float(b) for b in bracket)
    if not lo < hi:
        raise DomainError(f"bracket must be an increasing interval, got {bracket!r}")

    def f(s):
        return _divergence_on(system, q, line, s) - target

    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        root = lo
    elif f_hi == 0.0:
        root = hi
    elif f_lo * f_hi > 0:
        raise BracketError(
            f"divergence minus target has the same sign at both bracket ends ({f_lo:.3g}, {f_hi:.3g})"
        )
    else:
        xtol = EQUIDISTANT_RTOL * max(abs(lo), abs(hi))
        root = brentq(f, lo, hi, xtol=xtol, rtol=EQUIDISTANT_RTOL, maxiter=500)
    other = line(root)
    hot, cold = (given, other) if given.T >= other.T else (other, given)
    return EquidistantPair(hot=hot, cold=cold, q=q, divergence_value=target)


# -- asymmetry classification ---------------------------------------------------


@dataclass(frozen=True)
class AsymmetryReport:
    """Outcome of comparing two equidistant relaxations.

    ``t_stars`` are the speed-matching times; ``cubic_1``/``cubic_2`` are the
    cubic forms of the two velocities there, and ``delta_dd`` the resulting
    ``(C2 - C1) / lambda`` jump in the second derivative of ``delta D*``.
    """

    t_stars: tuple[float, ...]
    cubic_1: tuple[float, ...]
    cubic_2: tuple[float, ...]
    delta_dd: tuple[float, ...]
    faster: str
    extrema_t: tuple[float, ...]
    extrema_value: tuple[float, ...]
    consistent: bool

    @property
    def t_star(self) -> Optional[float]:
        return self.t_stars[0] if self.t_stars else None


def _check_pair(traj1: Trajectory, traj2: Trajectory) -> float:
    if traj1.system is not traj2.system and traj1.system != traj2.system:
        raise DomainError("trajectories belong to different systems")
    if traj1.t.shape != traj2.t.shape or not np.array_equal(traj1.t, traj2.t):
        raise DomainError("trajectories must share a time grid")
    if not np.array_equal(traj1.target, traj2.target):
        raise DomainError("trajectories must share the target state")
    lam1, lam2 = traj1.lam, traj2.lam
    if lam1 != lam2:
        raise DomainError("trajectories must share the relaxation rate")
    return lam1


def _speed_at(traj: Trajectory, t: float) -> float:
    eta, v = traj.local(t)
    return float(metric_quadratic(traj.system, eta, v))


def _cubic_at(traj: Trajectory, t: float) -> float:
    eta, v = traj.local(t)
    return float(cubic_values(traj.system, eta, v))


def speed_match_times(traj1: Trajectory, traj2: Trajectory, xtol: float = 1e-12) -> list[float]:
    """Times where ``||gamma1_dot||^2 - ||gamma2_dot||^2`` changes sign, refined by root bracketing."""
    diff = traj1.speed_sq - traj2.speed_sq
    scale = np.maximum(traj1.speed_sq, traj2.speed_sq)
    # differences at roundoff level carry no sign information
    sig = np.where(np.abs(diff) > 1e-12 * scale, np.sign(diff), 0.0)
    idx = np.nonzero(sig)[0]
    times = []
    for a, b in zip(idx[:-1], idx[1:]):
        if sig[a] * sig[b] > 0:
            continue
        ta, tb = traj1.t[a], traj1.t[b]

        def f(t):
            return _speed_at(traj1, t) - _speed_at(traj2, t)

        fa, fb = f(ta), f(tb)
        if fa * fb > 0:
            times.append(0.5 * (ta + tb))
        else:
            times.append(brentq(f, ta, tb, xtol=xtol, rtol=4 * np.finfo(float).eps))
    return times


def _parabolic_vertex(t, y, i):
    """Vertex of the parabola through samples ``i-1, i, i+1``."""
    h = t[i + 1] - t[i]
    den = y[i - 1] - 2 * y[i] + y[i + 1]
    if den == 0:
        return t[i], y[i]
    shift = 0.5 * (y[i - 1] - y[i + 1]) / den
    return t[i] + shift * h, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift


def divergence_gap_extrema(traj1: Trajectory, traj2: Trajectory):
    """Interior extrema of ``D*(gamma2) - D*(gamma1)`` with parabolic refinement."""
    gap = traj2.divergence - traj1.divergence
    noise = 1e-12 * np.maximum(traj1.divergence, traj2.divergence).max(initial=0.0)
    out = []
    for i in range(1, gap.size - 1):
        left, right = gap[i] - gap[i - 1], gap[i + 1] - gap[i]
        if abs(gap[i]) <= noise:
            continue
        if (left > 0 and right <= 0) or (left < 0 and right >= 0):
            if left == 0 or right == 0 and i + 2 < gap.size and gap[i + 2] == gap[i + 1]:
                continue
            out.append(_parabolic_vertex(traj1.t, gap, i))
    return out


def classify_asymmetry(system: ThermoSystem, traj1: Trajectory, traj2: Trajectory) -> AsymmetryReport:
    """Decide which of two equidistant relaxations approaches the target faster."""
    if traj1.system is not system or traj2.system is not system:
        raise DomainError("trajectories were not computed for this system")
    lam = _check_pair(traj1, traj2)
    times = speed_match_times(traj1, traj2)
    extrema = divergence_gap_extrema(traj1, traj2)

    if not times:
        s1, s2 = traj1.speed_sq[0], traj2.speed_sq[0]
        if abs(s1 - s2) > 1e-12 * max(s1, s2):
            raise GridError("the speeds differ but never match within the horizon")
        return AsymmetryReport((), (), (), (), "inconclusive", (), (), not extrema)

    c1 = tuple(_cubic_at(traj1, t) for t in times)
    c2 = tuple(_cubic_at(traj2, t) for t in times)
    dd = tuple((b - a) / lam for a, b in zip(c1, c2))
    if all(a > b for a, b in zip(c1, c2)):
        faster = "gamma1"
    elif all(a < b for a, b in zip(c1, c2)):
        faster = "gamma2"
    else:
        faster = "inconclusive"

    cell = float(np.max(np.diff(traj1.t)))
    consistent = all(any(abs(te - ts) <= cell for ts in times) for te, _ in extrema)
    return AsymmetryReport(
        t_stars=tuple(float(t) for t in times),
        cubic_1=c1,
        cubic_2=c2,
        delta_dd=dd,
        faster=faster,
        extrema_t=tuple(float(t) for t, _ in extrema),
        extrema_value=tuple(float(v) for _, v in extrema),
        consistent=consistent,
    )


def isobaric_product_check(traj_hot: Trajectory, traj_cold: Trajectory, q: State) -> float:
    """Relative defect of ``T+ T- = Tq^2`` at the critical time of ``delta D*``.

    Both trajectories must be isobaric ideal-gas relaxations toward ``q``
    from equidistant initial states.
    """
    system = traj_hot.system
    if not isinstance(system, ClassicalIdealGasTP):
        raise DomainError("the product identity applies to the classical ideal gas only")
    _check_pair(traj_hot, traj_cold)
    for tr in (traj_hot, traj_cold):
        if not (np.all(tr.offset[:, 1] == 0.0) and np.all(tr.target[:, 1] == q.eta2)):
            raise DomainError("trajectories must be isobaric at the target pressure")
        if not np.all(tr.target[:, 0] == q.T):
            raise DomainError("trajectories must relax toward q")
    d_hot, d_cold = traj_hot.divergence[0], traj_cold.divergence[0]
    if abs(d_hot - d_cold) > PRODUCT_GUARD_RTOL * max(d_hot, d_cold):
        raise DomainError(
            f"initial states are not equidistant (divergences {d_hot:.12g} and {d_cold:.12g})"
        )

    extrema = divergence_gap_extrema(traj_hot, traj_cold)
    times = speed_match_times(traj_hot, traj_cold)
    if len(extrema) != 1 or len(times) != 1:
        raise GridError(
            f"expected one critical point, found {len(extrema)} extrema and {len(times)} speed matches"
        )
    t_star = times[0]
    if abs(extrema[0][0] - t_star) > float(np.max(np.diff(traj_hot.t))):
        raise GridError("parabolic and speed-match estimates of the critical time disagree")
    t_plus = traj_hot.local(t_star)[0][0]
    t_minus = traj_cold.local(t_star)[0][0]
    return float(abs(t_plus * t_minus - q.T**2) / q.T**2)


# -- bound audits ---------------------------------------------------------------


@dataclass(frozen=True)
class TurRow:
    tau: float
    dissipated: float
    length: float
    bound: float
    ratio: float


def _segments(traj: Trajectory, k: int):
    seg = traj.segment_sq[:k]
    h = np.diff(traj.t[: k + 1])
    mid = 0.5 * (traj.eta[1 : k + 1] + traj.eta[:k])
    deta = np.diff(traj.eta[: k + 1], axis=0)
    check_resolution(traj.system, mid, deta)
    return seg, h


def tur_audit(traj: Trajectory, lam: float, taus) -> list[TurRow]:
    """Dissipated availability against the length bound ``L^2 / (lambda tau)``.

    Each ``tau`` is snapped to the nearest grid time; both sides are built
    from the same chart segments so the ratio obeys Cauchy-Schwarz exactly.
    """
    if traj.driven:
        raise DomainError("tur_audit expects an undriven trajectory")
    rows = []
    t = traj.t
    for tau in taus:
        tau = float(tau)
        if not (0 < tau <= t[-1] - t[0] + 0.5 * (t[1] - t[0])):
            raise DomainError(f"tau={tau!r} lies outside the trajectory horizon")
        k = max(1, int(np.argmin(np.abs(t - (t[0] + tau)))))
        seg, h = _segments(traj, k)
        used = float(t[k] - t[0])
        dissipated = float(np.sum(seg / h)) / lam
        length = float(np.sum(np.sqrt(seg)))
        bound = length**2 / (lam * used)
        ratio = dissipated / bound if bound > 0 else math.nan
        rows.append(TurRow(used, dissipated, length, bound, ratio))
    return rows


@dataclass(frozen=True)
class HorseCarrotRow:
    dissipated: float
    mean_inverse_rate: float
    length: float
    bound: float
    ratio: float


def horse_carrot_audit(driven: Trajectory) -> HorseCarrotRow:
    """Dissipation of a driven relaxation against ``mean(1/lambda) L^2 / tau``."""
    k = len(driven) - 1
    seg, h = _segments(driven, k)
    power = seg / h
    total_power = float(np.sum(power))
    dissipated = float(np.sum(power / driven.rate_mid))
    tau = float(driven.t[-1] - driven.t[0])
    length = float(np.sum(np.sqrt(seg)))
    if total_power == 0.0:
        return HorseCarrotRow(0.0, math.nan, 0.0, 0.0, math.nan)
    eps_bar = dissipated / total_power
    bound = eps_bar * length**2 / tau
    return HorseCarrotRow(dissipated, eps_bar, length, bound, dissipated / bound)


# -- scenarios ------------------------------------------------------------------


@dataclass
class RunReport:
    """Scenario outcome; ``series`` holds named arrays that the CLI writes as CSV."""

    scenario: dict
    t_star: Optional[float] = None
    delta_A: Optional[float] = None
    faster: Optional[str] = None
    audits: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)


MPEMBA_CONSTANTS = {
    "c": 1.5,
    "n0kb": 1.0,
    "lam": 1.0,
    "q": (275.0, 1.0e5),
    "p1": (375.0, 1.0e5),
    "p2": (300.0, 189487.5),
}


def availability_rate(system: ThermoSystem, eta, eta_q, lam: float) -> np.ndarray:
    """``A = -lambda^3 C(grad D*, grad D*, grad D*)`` at chart points ``eta``."""
    eta = np.asarray(eta, dtype=float)
    grad = eta - np.asarray(eta_q, dtype=float)
    return -(lam**3) * cubic_values(system, eta, grad)


def relaxation_pair(system, q, p1, p2, lam=1.0, horizon=None, grid_points=DEFAULT_GRID_POINTS):
    traj1 = relax_analytic(system, RelaxSpec(p1, q, lam, horizon, grid_points))
    traj2 = relax_analytic(system, RelaxSpec(p2, q, lam, horizon, grid_points))
    return traj1, traj2


def delta_series(traj1: Trajectory, traj2: Trajectory, lam: float) -> dict:
    """Differences in the ``gamma2 - gamma1`` convention."""
    a1 = availability_rate(traj1.system, traj1.eta, traj1.target, lam)
    a2 = availability_rate(traj2.system, traj2.eta, traj2.target, lam)
    return {
        "t": traj1.t,
        "delta_D_star": traj2.divergence - traj1.divergence,
        "delta_speed_sq": (traj2.speed_sq - traj1.speed_sq) / lam**2,
        "delta_A": (a2 - a1) / lam**3,
    }


def mpemba_scenario(grid_points: int = DEFAULT_GRID_POINTS, horizon: Optional[float] = None) -> RunReport:
    """Hot ideal gas at ambient pressure against a cooler, compressed partner.

    ``delta_A`` is ``A(gamma1) - A(gamma2)`` at the critical time, positive
    when the hot branch is ahead; the ``delta_D_star`` series follows the
    ``D*(gamma2) - D*(gamma1)`` convention.
    """
    k = MPEMBA_CONSTANTS
    system = ClassicalIdealGasTP(c=k["c"], n0kb=k["n0kb"])
    q, p1, p2 = State.tp(*k["q"]), State.tp(*k["p1"]), State.tp(*k["p2"])
    lam = k["lam"]
    traj1, traj2 = relaxation_pair(system, q, p1, p2, lam, horizon, grid_points)
    report = classify_asymmetry(system, traj1, traj2)
    t_star = report.t_star
    e1, v1 = traj1.local(t_star)
    e2, v2 = traj2.local(t_star)
    a1 = float(cubic_values(system, e1, v1))
    a2 = float(cubic_values(system, e2, v2))
    series = delta_series(traj1, traj2, lam)
    gap = series["delta_D_star"][1:-1]
    return RunReport(
        scenario={
            "kind": system.kind,
            "c": k["c"],
            "n0kb": k["n0kb"],
            "lambda": lam,
            "q": list(k["q"]),
            "p1": list(k["p1"]),
            "p2": list(k["p2"]),
            "grid_points": int(grid_points),
            "horizon": float(traj1.t[-1]),
        },
        t_star=t_star,
        delta_A=a1 - a2,
        faster=report.faster,
        notes={
            "delta_D_star_convention": "D*(gamma2) - D*(gamma1)",
            "delta_D_star_sign": "positive" if np.all(gap > 0) else "mixed",
            "sign_discrepancy_flag": True,
            "t_star_parabolic": report.extrema_t[0] if report.extrema_t else None,
            "critical_point_consistent": report.consistent,
            "divergence_p1": float(traj1.divergence[0]),
            "divergence_p2": float(traj2.divergence[0]),
        },
        series={"pair": series, "gamma1": traj1, "gamma2": traj2},
    )


def divergence_level_set(system: ThermoSystem, q: State, level: float, t_range, eta2_range, n: int = 200):
    """Polylines of the level set ``D*_q = level`` sampled on a rectangular grid."""
    import contourpy

    if level <= 0:
        raise DomainError("level must be positive")
    T = np.linspace(*t_range, n)
    E = np.linspace(*eta2_range, n)
    TT, EE = np.meshgrid(T, E)
    eta = np.stack([TT, EE], axis=-1)
    system._check(eta)
    D = system.divergence_delta(np.broadcast_to(q.eta, eta.shape), eta - q.eta)
    gen = contourpy.contour_generator(T, E, D)
    return [np.asarray(line) for line in gen.lines(level)]


def tune_mpemba_partner(system: ThermoSystem, q: State, p1: State, partner_temperatures, eta2_bracket, lam=1.0):
    """For each partner temperature, solve for the equidistant state along the isotherm
    and classify the pair. A sweep, not an optimizer."""
    rows = []
    for T2 in partner_temperatures:
        try:
            pair = solve_equidistant(system, q, p1, isotherm(T2), eta2_bracket)
        except (BracketError, DomainError):
            continue
        p2 = pair.cold if pair.hot == p1 else pair.hot
        traj1, traj2 = relaxation_pair(system, q, p1, p2, lam)
        try:
            rep = classify_asymmetry(system, traj1, traj2)
        except GridError:
            continue
        rows.append({"T2": float(T2), "partner": p2, "t_star": rep.t_star, "faster": rep.faster})
    return rows


__all__ = [
    "AsymmetryReport",
    "ConstraintLine",
    "EquidistantPair",
    "HorseCarrotRow",
    "ResolutionError",
    "RunReport",
    "TurRow",
    "availability_rate",
    "classify_asymmetry",
    "delta_series",
    "divergence_gap_extrema",
    "divergence_level_set",
    "horse_carrot_audit",
    "isobar",
    "iso_mu",
    "isobaric_product_check",
    "isotherm",
    "mpemba_scenario",
    "relaxation_pair",
    "solve_equidistant",
    "speed_match_times",
    "tune_mpemba_partner",
    "tur_audit",
]
