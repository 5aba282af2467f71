"""Symmetric coefficient containers over a two-dimensional chart."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric rank-2 tensor stored by its three independent components."""

    c11: float
    c12: float
    c22: float

    @classmethod
    def from_matrix(cls, m) -> "SymTensor2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.c11, self.c12], [self.c12, self.c22]])

    def __call__(self, u, v=None) -> float:
        u = np.asarray(u, dtype=float)
        v = u if v is None else np.asarray(v, dtype=float)
        return float(u @ self.matrix @ v)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def condition_number(self) -> float:
        ev = np.abs(self.eigenvalues())
        return float(ev.max() / ev.min()) if ev.min() > 0 else float("inf")


@dataclass(frozen=True)
class SymTensor3:
    """Fully symmetric rank-3 tensor stored by its four independent components."""

    c111: float
    c112: float
    c122: float
    c222: float

    @classmethod
    def from_array(cls, a) -> "SymTensor3":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0, 0]), float(a[0, 0, 1]), float(a[0, 1, 1]), float(a[1, 1, 1]))

    @property
    def array(self) -> np.ndarray:
        out = np.empty((2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    out[i, j, k] = (self.c111, self.c112, self.c122, self.c222)[i + j + k]
        return out

    def __call__(self, u, v=None, w=None) -> float:
        u = np.asarray(u, dtype=float)
        v = u if v is None else np.asarray(v, dtype=float)
        w = u if w is None else np.asarray(w, dtype=float)
        return float(np.einsum("ijk,i,j,k->", self.array, u, v, w))
