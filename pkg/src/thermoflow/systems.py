"""Catalog of thermodynamic systems on a two-dimensional equilibrium manifold.

Every system is described by a convex potential ``psi(eta)``, the Legendre
transform of the internal energy, written in the affine chart
``eta = (T, eta2)``. ``eta2`` is minus the pressure for a closed fluid and
the chemical potential for a gas in a rigid container. Derivatives of
``psi`` give the dual coordinates ``theta = (S, V)`` or ``(S, N)``, the
metric (Hessian) and minus the Amari-Chentsov tensor (third derivatives).

All private ``_psi``/``_grad``/``_hess``/``_third`` kernels are vectorized
over a leading batch dimension; the public operations take :class:`State`
values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from .errors import ConvergenceError, DomainError
from .tensors import SymTensor2, SymTensor3

__all__ = [
    "State",
    "DualState",
    "ThermoSystem",
    "ClassicalIdealGasTP",
    "QuantumRigidGas",
    "ClassicalRigidGas",
    "QuadraticToy",
    "QuantumRegimeWarning",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

# below this relative chart step, differences are evaluated by quadrature of
# the Hessian instead of subtracting nearly equal potentials
_SMALL_STEP = 0.05


class QuantumRegimeWarning(UserWarning):
    """A fermion state is too degenerate for the asymmetry claims to apply."""


@dataclass(frozen=True)
class State:
    """Equilibrium state in the affine ``eta`` chart.

    ``eta2`` is ``-P`` for the closed ideal gas and ``mu`` for rigid gases.
    """

    T: float
    eta2: float

    def __post_init__(self):
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "eta2", float(self.eta2))
        if not (math.isfinite(self.T) and math.isfinite(self.eta2)):
            raise DomainError(f"state coordinates must be finite: {self!r}")
        if self.T <= 0.0:
            raise DomainError(f"temperature must be positive, got T={self.T!r}")

    @classmethod
    def from_eta(cls, eta) -> "State":
        return cls(float(eta[0]), float(eta[1]))

    @classmethod
    def tp(cls, T: float, P: float) -> "State":
        """Closed-fluid state from temperature and pressure."""
        return cls(T, -float(P))

    @property
    def eta(self) -> np.ndarray:
        return np.array([self.T, self.eta2])

    @property
    def P(self) -> float:
        return -self.eta2

    @property
    def mu(self) -> float:
        return self.eta2


@dataclass(frozen=True)
class DualState:
    """Dual coordinates ``theta = (S, X)`` with the internal energy alongside."""

    theta: tuple[float, float]
    energy: float

    @property
    def entropy(self) -> float:
        return self.theta[0]

    @property
    def extensive(self) -> float:
        """Volume for the closed fluid, particle number for rigid gases."""
        return self.theta[1]


def _xm1_log(d):
    """``d - log(1 + d)`` without cancellation for small ``d``."""
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    small = np.abs(d) < 0.1
    ds = d[small]
    acc = np.zeros_like(ds)
    power = ds * ds
    for k in range(2, 40):
        acc += (1.0 if k % 2 == 0 else -1.0) * power / k
        power = power * ds
    out[small] = acc
    dl = d[~small]
    out[~small] = dl - np.log1p(dl)
    return out


class ThermoSystem:
    """Base class: a strictly convex potential ``psi(T, eta2)``."""

    kind = "abstract"
    eta_labels = ("T", "eta2")

    # -- kernels to provide -------------------------------------------------
    def _psi(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _grad(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _hess(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _third(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, eta: np.ndarray) -> None:
        eta = np.asarray(eta, dtype=float)
        if not np.all(np.isfinite(eta)):
            raise DomainError("non-finite state coordinates")
        if np.any(eta[..., 0] <= 0.0):
            raise DomainError("temperature must be positive")

    def chart_scale(self, eta: np.ndarray) -> np.ndarray:
        """Characteristic magnitude of each coordinate near ``eta``."""
        eta = np.asarray(eta, dtype=float)
        return np.maximum(np.abs(eta), 1e-300)

    # -- vectorized derived quantities --------------------------------------
    def energy(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.sum(self._grad(eta) * eta, axis=-1) - self._psi(eta)

    def c_tensor(self, eta) -> np.ndarray:
        """Amari-Chentsov components ``-d3 psi`` with shape ``(..., 2, 2, 2)``."""
        return -self._third(np.asarray(eta, dtype=float))

    def _relative_step(self, eta_q, delta):
        return np.max(np.abs(delta) / self.chart_scale(eta_q), axis=-1)

    def theta_delta(self, eta_q, delta) -> np.ndarray:
        """``theta(eta_q + delta) - theta(eta_q)`` accurate for small ``delta``."""
        eta_q, delta = np.broadcast_arrays(np.asarray(eta_q, float), np.asarray(delta, float))
        shape = eta_q.shape
        eq = eta_q.reshape(-1, 2)
        dl = delta.reshape(-1, 2)
        out = np.empty_like(dl)
        small = self._relative_step(eq, dl) < _SMALL_STEP
        big = ~small
        if np.any(big):
            out[big] = self._grad(eq[big] + dl[big]) - self._grad(eq[big])
        if np.any(small):
            pts = eq[small, None, :] + _GL_NODES[None, :, None] * dl[small, None, :]
            h = self._hess(pts)
            out[small] = np.einsum("m,nmij,nj->ni", _GL_WEIGHTS, h, dl[small])
        return out.reshape(shape)

    def divergence_delta(self, eta_q, delta) -> np.ndarray:
        """Bregman divergence of ``eta_q + delta`` from ``eta_q``.

        Equal to ``psi(q) - psi(p) + theta(p) . (eta_p - eta_q)``; near
        ``q`` the integral form ``int_0^1 s delta^T H(q + s delta) delta ds``
        is used to keep full relative precision.
        """
        eta_q, delta = np.broadcast_arrays(np.asarray(eta_q, float), np.asarray(delta, float))
        shape = eta_q.shape[:-1]
        eq = eta_q.reshape(-1, 2)
        dl = delta.reshape(-1, 2)
        out = np.empty(eq.shape[0])
        small = self._relative_step(eq, dl) < _SMALL_STEP
        big = ~small
        if np.any(big):
            ep = eq[big] + dl[big]
            out[big] = self._psi(eq[big]) - self._psi(ep) + np.sum(self._grad(ep) * dl[big], axis=-1)
        if np.any(small):
            pts = eq[small, None, :] + _GL_NODES[None, :, None] * dl[small, None, :]
            h = self._hess(pts)
            quad = np.einsum("ni,nmij,nj->nm", dl[small], h, dl[small])
            out[small] = quad @ (_GL_WEIGHTS * _GL_NODES)
        out = np.maximum(out, 0.0)
        return out.reshape(shape)

    def eta_from_theta_delta(self, eta_q, dtheta, guess=None) -> np.ndarray:
        """Invert :meth:`theta_delta` for one point by damped Newton iteration."""
        eta_q = np.asarray(eta_q, dtype=float)
        dtheta = np.asarray(dtheta, dtype=float)
        if guess is None:
            delta = np.linalg.solve(self._hess(eta_q), dtheta)
        else:
            delta = np.array(guess, dtype=float)
        scale = self.chart_scale(eta_q)
        prev = np.inf
        for _ in range(60):
            resid = self.theta_delta(eta_q, delta) - dtheta
            step = np.linalg.solve(self._hess(eta_q + delta), resid)
            lam = 1.0
            while not self._admissible(eta_q + delta - lam * step):
                lam *= 0.5
                if lam < 1e-12:
                    raise ConvergenceError("Newton inversion cannot stay inside the chart")
            delta = delta - lam * step
            size = np.max(np.abs(step) / scale)
            rel = size / max(np.max(np.abs(delta) / scale), 1e-300)
            # stop at the roundoff floor, where steps stop shrinking
            if size == 0.0 or rel <= 1e-13 or (rel <= 1e-10 and size >= 0.5 * prev):
                return delta
            prev = size
        raise ConvergenceError("Newton inversion of the Legendre map did not converge")

    def _admissible(self, eta) -> bool:
        try:
            self._check(eta)
        except DomainError:
            return False
        return True

    # -- public operations on State values ----------------------------------
    def check(self, state: State) -> State:
        """Raise :class:`DomainError` unless ``state`` is valid for this system."""
        self._check(state.eta)
        return state

    def psi(self, state: State) -> float:
        self.check(state)
        return float(self._psi(state.eta))

    def theta_of(self, state: State) -> DualState:
        self.check(state)
        th = self._grad(state.eta)
        return DualState((float(th[0]), float(th[1])), float(self.energy(state.eta)))

    def entropy_of(self, state: State) -> float:
        self.check(state)
        s = float(self._grad(state.eta)[0])
        ref = getattr(self, "reference", None)
        if ref is not None:
            s -= float(self._grad(ref.eta)[0])
        return s

    def metric_eta(self, state: State) -> SymTensor2:
        self.check(state)
        return SymTensor2.from_matrix(self._hess(state.eta))

    def amari_chentsov_eta(self, state: State) -> SymTensor3:
        self.check(state)
        return SymTensor3.from_array(self.c_tensor(state.eta))

    def divergence(self, p: State, q: State) -> float:
        """Negative availability ``D*_q(p)``; zero iff ``p == q``."""
        self.check(p)
        self.check(q)
        return float(self.divergence_delta(q.eta, p.eta - q.eta))

    def state(self, T: float, eta2: float) -> State:
        return self.check(State(T, eta2))


# -- closed ideal gas ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassicalIdealGasTP(ThermoSystem):
    """Closed ideal gas in the chart ``(T, -P)``; ``U = c N0kB T``, ``PV = N0kB T``.

    ``reference`` fixes the zero of entropy.
    """

    c: float = 1.5
    n0kb: float = 1.0
    reference: State = field(default_factory=lambda: State.tp(275.0, 1e5))

    kind = "ideal-gas-tp"
    eta_labels = ("T", "negP")

    def __post_init__(self):
        if not (self.c > 0 and self.n0kb > 0):
            raise DomainError("ideal gas requires c > 0 and n0kb > 0")
        self._check(self.reference.eta)

    def _check(self, eta):
        super()._check(eta)
        if np.any(np.asarray(eta)[..., 1] >= 0.0):
            raise DomainError("pressure must be positive (eta2 = -P < 0)")

    def chart_scale(self, eta):
        return np.abs(np.asarray(eta, dtype=float))

    def _split(self, eta):
        eta = np.asarray(eta, dtype=float)
        return eta[..., 0], -eta[..., 1]

    def _psi(self, eta):
        T, P = self._split(eta)
        c, n = self.c, self.n0kb
        return n * T * ((c + 1) * np.log(T / self.reference.T) - np.log(P / self.reference.P) - (c + 1))

    def _grad(self, eta):
        T, P = self._split(eta)
        c, n = self.c, self.n0kb
        S = n * ((c + 1) * np.log(T / self.reference.T) - np.log(P / self.reference.P))
        return np.stack([S, n * T / P], axis=-1)

    def _hess(self, eta):
        T, P = self._split(eta)
        c, n = self.c, self.n0kb
        off = n / P
        row0 = np.stack([(c + 1) * n / T, off], axis=-1)
        row1 = np.stack([off, n * T / P**2], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def _third(self, eta):
        T, P = self._split(eta)
        c, n = self.c, self.n0kb
        comps = (-(c + 1) * n / T**2, np.zeros_like(T), n / P**2, 2 * n * T / P**3)
        return _fill_sym3(comps)

    def energy(self, eta):
        T, _ = self._split(eta)
        return self.c * self.n0kb * T

    def theta_delta(self, eta_q, delta):
        eta_q, delta = np.broadcast_arrays(np.asarray(eta_q, float), np.asarray(delta, float))
        Tq, Pq = eta_q[..., 0], -eta_q[..., 1]
        dT, dP = delta[..., 0], -delta[..., 1]
        n, c = self.n0kb, self.c
        dS = n * ((c + 1) * np.log1p(dT / Tq) - np.log1p(dP / Pq))
        dV = n * (dT * Pq - Tq * dP) / ((Pq + dP) * Pq)
        return np.stack([dS, dV], axis=-1)

    def divergence_delta(self, eta_q, delta):
        eta_q, delta = np.broadcast_arrays(np.asarray(eta_q, float), np.asarray(delta, float))
        Tq, Pq = eta_q[..., 0], -eta_q[..., 1]
        dT, dP = delta[..., 0], -delta[..., 1]
        n, c = self.n0kb, self.c
        r_m1 = -dP / (Pq + dP)  # Pq/P - 1
        d = n * ((c + 1) * Tq * _xm1_log(dT / Tq) + dT * r_m1 + Tq * _xm1_log(r_m1))
        return np.maximum(d, 0.0)

    def eta_from_theta_delta(self, eta_q, dtheta, guess=None):
        eta_q = np.asarray(eta_q, dtype=float)
        dtheta = np.asarray(dtheta, dtype=float)
        Tq, Pq = eta_q[..., 0], -eta_q[..., 1]
        n, c = self.n0kb, self.c
        vq = Tq / Pq
        dlog_v = np.log1p(dtheta[..., 1] / (n * vq))
        dlog_T = (dtheta[..., 0] / n - dlog_v) / c
        if np.any(~np.isfinite(dlog_T)):
            raise ConvergenceError("dual coordinates outside the image of the ideal-gas chart")
        with np.errstate(over="ignore"):
            dT = Tq * np.expm1(dlog_T)
            dP = Pq * np.expm1(dlog_T - dlog_v)
        if np.any(~np.isfinite(dT) | ~np.isfinite(dP)):
            raise ConvergenceError("dual step overflows the ideal-gas chart")
        return np.stack([dT, -dP], axis=-1)


# -- rigid gases: potentials of the form pref * T**beta * H(mu / kT) ----------


def _fill_sym3(comps):
    c111, c112, c122, c222 = np.broadcast_arrays(*comps)
    out = np.empty(c111.shape + (2, 2, 2))
    table = (c111, c112, c122, c222)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                out[..., i, j, k] = table[i + j + k]
    return out


def _poly_dx(h: dict) -> dict:
    out: dict = {}
    for (m, n), coef in h.items():
        if m > 0:
            out[(m - 1, n)] = out.get((m - 1, n), 0.0) + coef * m
        out[(m, n + 1)] = out.get((m, n + 1), 0.0) + coef
    return out


def _poly_dT(h: dict, beta: float) -> dict:
    # d/dT [T**beta H(x)] = T**(beta-1) (beta H - x H'),  x = mu/(kT)
    out = {key: beta * coef for key, coef in h.items()}
    for (m, n), coef in _poly_dx(h).items():
        out[(m + 1, n)] = out.get((m + 1, n), 0.0) - coef
    return out


class _ScalingPotential(ThermoSystem):
    """``psi = pref * T**beta * F(mu / (kb T))`` with ``F`` given by its derivatives.

    Each partial derivative ``d_T^i d_mu^j psi`` equals
    ``pref * kb**-j * T**(beta-i-j) * H_ij(x)`` where ``H_ij`` is a polynomial
    in ``x`` and the derivatives ``F^(n)(x)``; the polynomials are built once.
    """

    eta_labels = ("T", "mu")

    def _setup(self, pref: float, beta: float, kb: float):
        polys = {}
        base = {(0, 0): 1.0}
        for i in range(4):
            hij = base
            for j in range(4 - i):
                polys[(i, j)] = hij
                hij = _poly_dx(hij)
            base = _poly_dT(base, beta - i)
        # subclasses are frozen dataclasses
        object.__setattr__(self, "_pref", pref)
        object.__setattr__(self, "_beta", beta)
        object.__setattr__(self, "_kb", kb)
        object.__setattr__(self, "_polys", polys)

    def _fderivs(self, x: np.ndarray) -> list:
        raise NotImplementedError

    def chart_scale(self, eta):
        eta = np.asarray(eta, dtype=float)
        T = np.abs(eta[..., 0])
        return np.stack([T, self._kb * T], axis=-1)

    def _check(self, eta):
        super()._check(eta)
        if np.any(np.asarray(eta)[..., 1] >= 0.0):
            raise DomainError("rigid gases require a negative chemical potential")

    def _partials(self, eta, orders):
        eta = np.asarray(eta, dtype=float)
        T, mu = eta[..., 0], eta[..., 1]
        x = mu / (self._kb * T)
        fd = self._fderivs(x)
        out = []
        for i, j in orders:
            poly = self._polys[(i, j)]
            h = np.zeros_like(x)
            for (m, n), coef in poly.items():
                if coef != 0.0:
                    h = h + coef * x**m * fd[n]
            out.append(self._pref * self._kb ** (-j) * T ** (self._beta - i - j) * h)
        return out

    def _psi(self, eta):
        return self._partials(eta, [(0, 0)])[0]

    def _grad(self, eta):
        return np.stack(self._partials(eta, [(1, 0), (0, 1)]), axis=-1)

    def _hess(self, eta):
        tt, tm, mm = self._partials(eta, [(2, 0), (1, 1), (0, 2)])
        return np.stack([np.stack([tt, tm], -1), np.stack([tm, mm], -1)], -2)

    def _third(self, eta):
        return _fill_sym3(self._partials(eta, [(3, 0), (2, 1), (1, 2), (0, 3)]))

    def fugacity(self, state: State) -> float:
        return math.exp(state.mu / (self._kb * state.T))


@dataclass(frozen=True, eq=False)
class QuantumRigidGas(_ScalingPotential):
    """Ideal Fermi or Bose gas at fixed volume, chart ``(T, mu)``.

    ``psi = -+ kappa Gamma(a+1) (kb T)**(a+2) Li_{a+2}(-+ xi)``, upper sign
    for fermions, lower for bosons.
    """

    statistics: str = "boson"
    kappa: float = 1.0
    a: float = 0.5
    kb: float = 1.0
    reference: State | None = None
    settings: specfun.EvalSettings = specfun.DEFAULT_SETTINGS
    fermion_xi_warn: float = 0.5

    def __post_init__(self):
        if self.statistics not in ("fermion", "boson"):
            raise DomainError(f"statistics must be 'fermion' or 'boson', got {self.statistics!r}")
        if not (self.kappa > 0 and self.a >= 0.5 and self.kb > 0):
            raise DomainError("quantum gas requires kappa > 0, a >= 1/2, kb > 0")
        pref = self.kappa * specfun.gamma(self.a + 1) * self.kb ** (self.a + 2)
        self._setup(pref, self.a + 2, self.kb)
        if self.reference is not None:
            self._check(self.reference.eta)

    @property
    def kind(self):
        return f"{self.statistics}-rigid"

    @property
    def sign(self) -> float:
        return -1.0 if self.statistics == "fermion" else 1.0

    def _check(self, eta):
        super()._check(eta)
        if self.statistics == "fermion":
            eta = np.asarray(eta, dtype=float)
            xi = np.exp(eta[..., 1] / (self.kb * eta[..., 0]))
            if np.any(xi > self.fermion_xi_warn):
                warnings.warn(
                    f"fermion fugacity exceeds {self.fermion_xi_warn}; state is near the "
                    "degenerate regime",
                    QuantumRegimeWarning,
                    stacklevel=3,
                )

    def _fderivs(self, x):
        s = self.sign
        z = s * np.exp(x)
        b = self.a + 2
        return [s * specfun.polylog(b - n, z, self.settings) for n in range(4)]

    def particle_number(self, state: State) -> float:
        return self.theta_of(state).theta[1]


@dataclass(frozen=True, eq=False)
class ClassicalRigidGas(_ScalingPotential):
    """Classical ideal gas at fixed volume: ``psi = prefactor (kb T)**(c+1) xi``.

    Gives ``N = prefactor (kb T)**c xi`` and ``U = c kb T N``.
    """

    c: float = 1.5
    prefactor: float = 1.0
    kb: float = 1.0
    reference: State | None = None

    kind = "classical-rigid"

    def __post_init__(self):
        if not (self.c > 0 and self.prefactor > 0 and self.kb > 0):
            raise DomainError("classical rigid gas requires c, prefactor, kb > 0")
        self._setup(self.prefactor * self.kb ** (self.c + 1), self.c + 1, self.kb)
        if self.reference is not None:
            self._check(self.reference.eta)

    @classmethod
    def matched_to(cls, gas: QuantumRigidGas) -> "ClassicalRigidGas":
        """Classical counterpart sharing the quantum gas's high-dilution limit."""
        return cls(c=gas.a + 1, prefactor=gas.kappa * specfun.gamma(gas.a + 1), kb=gas.kb)

    def _fderivs(self, x):
        e = np.exp(x)
        return [e, e, e, e]


@dataclass(frozen=True, eq=False)
class QuadraticToy(ThermoSystem):
    """Test system with ``psi = 1/2 (eta - center)^T A (eta - center)``.

    Its divergence is symmetric and its Amari-Chentsov tensor vanishes.
    """

    a11: float = 1.0
    a12: float = 0.0
    a22: float = 1.0
    center: tuple[float, float] = (1.0, 0.0)

    kind = "toy-quadratic"

    def __post_init__(self):
        if not (self.a11 > 0 and self.a11 * self.a22 - self.a12**2 > 0):
            raise DomainError("toy potential matrix must be positive definite")

    @property
    def _A(self):
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    def chart_scale(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))

    def _psi(self, eta):
        d = np.asarray(eta, dtype=float) - np.asarray(self.center)
        return 0.5 * np.einsum("...i,ij,...j->...", d, self._A, d)

    def _grad(self, eta):
        d = np.asarray(eta, dtype=float) - np.asarray(self.center)
        return d @ self._A

    def _hess(self, eta):
        eta = np.asarray(eta, dtype=float)
        return np.broadcast_to(self._A, eta.shape[:-1] + (2, 2)).copy()

    def _third(self, eta):
        eta = np.asarray(eta, dtype=float)
        return np.zeros(eta.shape[:-1] + (2, 2, 2))

    def divergence_delta(self, eta_q, delta):
        delta = np.asarray(delta, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", delta, self._A, delta)
