"""Real-argument special functions for the quantum-gas equations of state.

Only the region ``|z| < 1`` of the polylogarithm is supported: physical
fugacity arguments are ``-xi`` (fermions) or ``+xi`` (bosons) with
``xi = exp(mu / kT) < 1`` for ``mu < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

MIN_ORDER = -0.5


@dataclass(frozen=True)
class EvalSettings:
    """Truncation controls for series evaluation.

    ``tol`` is relative to the running partial sum; ``max_terms`` caps the
    number of series terms before :class:`ConvergenceError` is raised.
    """

    tol: float = 1e-12
    max_terms: int = 1_000_000

    def __post_init__(self):
        if not (0.0 < self.tol < 1.0):
            raise DomainError(f"tol must lie in (0, 1), got {self.tol!r}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms!r}")


DEFAULT_SETTINGS = EvalSettings()

_FIRST_BLOCK = 64
_MAX_BLOCK = 1 << 16


def _check_order(s: float) -> float:
    s = float(s)
    if not math.isfinite(s) or s < MIN_ORDER:
        raise DomainError(f"polylog order must be finite and >= {MIN_ORDER}, got {s!r}")
    return s


def polylog(s, z, settings: EvalSettings = DEFAULT_SETTINGS):
    """Polylogarithm ``Li_s(z) = sum_{k>=1} z**k / k**s`` for real ``|z| < 1``.

    ``z`` may be a scalar or an array; the result has the same shape. Terms
    are summed in blocks (pairwise within a block, Kahan-compensated across
    blocks) until a geometric bound on the remaining tail drops below
    ``settings.tol`` times the partial sum.
    """
    s = _check_order(s)
    za = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(za)) or np.any(np.abs(za) >= 1.0):
        raise DomainError("polylog requires finite |z| < 1")

    flat = za.ravel()
    total = np.zeros_like(flat)
    carry = np.zeros_like(flat)
    active = flat != 0.0
    log_abs = np.zeros_like(flat)
    log_abs[active] = np.log(np.abs(flat[active]))
    negative = flat < 0.0
    growth = max(0.0, -s)

    k_start = 1
    block = _FIRST_BLOCK
    while np.any(active):
        if k_start > settings.max_terms:
            raise ConvergenceError(
                f"polylog(s={s}) did not converge within {settings.max_terms} terms"
            )
        k_stop = min(k_start + block, settings.max_terms + 1)
        k = np.arange(k_start, k_stop, dtype=float)
        idx = np.nonzero(active)[0]

        mags = np.exp(np.outer(log_abs[idx], k) - s * np.log(k))
        odd = (k.astype(np.int64) % 2) == 1
        signs = np.where(negative[idx, None] & odd[None, :], -1.0, 1.0)
        block_sum = (signs * mags).sum(axis=1)

        # Kahan step on the block sums
        y = block_sum - carry[idx]
        t = total[idx] + y
        carry[idx] = (t - total[idx]) - y
        total[idx] = t

        k_next = float(k_stop)
        next_mag = np.exp(log_abs[idx] * k_next - s * math.log(k_next))
        ratio = np.exp(log_abs[idx]) * (1.0 + 1.0 / k_next) ** growth
        with np.errstate(divide="ignore"):
            tail = np.where(ratio < 1.0, next_mag / (1.0 - ratio), np.inf)
        partial = np.abs(total[idx])
        done = (tail <= settings.tol * partial) | ((partial == 0.0) & (next_mag < settings.tol))
        active[idx[done]] = False

        k_start = k_stop
        block = min(block * 2, _MAX_BLOCK)

    out = total.reshape(za.shape)
    return float(out) if out.ndim == 0 else out


def gamma(x: float) -> float:
    """Gamma function for real ``x > 0``."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma requires finite x > 0, got {x!r}")
    return math.gamma(x)
