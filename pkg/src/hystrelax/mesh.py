"""Uniform 1-D grid with zero-flux (Neumann) boundaries.

Fields are plain numpy arrays of length ``mesh.n``; the mesh supplies the
discrete Laplacian, the implicit diffusion solve and the quadratures that
stand in for the ``L^2`` and ``H^1`` inner products.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs


@dataclass(frozen=True)
class Mesh:
    x_len: float
    n: int
    h: float = field(init=False)

    def __post_init__(self):
        if not self.x_len > 0:
            raise ValueError(f"x_len must be positive, got {self.x_len}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need at least 3 nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", self.x_len / (self.n - 1))

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.x_len, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != self.n:
            raise ValueError(f"field has {f.shape[-1]} nodes, mesh has {self.n}")
        return f

    def laplacian(self, f) -> np.ndarray:
        """Second differences with ghost-node reflection at both ends.

        Works along the last axis, so a stack of fields is fine.
        """
        f = self.check(f)
        out = np.empty_like(f)
        out[..., 1:-1] = f[..., :-2] - 2.0 * f[..., 1:-1] + f[..., 2:]
        out[..., 0] = 2.0 * (f[..., 1] - f[..., 0])
        out[..., -1] = 2.0 * (f[..., -2] - f[..., -1])
        return out / self.h**2

    def helmholtz_matrix(self, alpha: float) -> np.ndarray:
        """Dense ``I - alpha * laplacian`` (for tests and small problems)."""
        return np.eye(self.n) - alpha * self.laplacian(np.eye(self.n)).T

    def solve_helmholtz(self, f, alpha: float) -> np.ndarray:
        """Solve ``(I - alpha * laplacian) g = f``."""
        return _helmholtz_factor(self, float(alpha)).solve(self.check(f))

    def inner_h(self, f, g) -> float:
        f, g = self.check(f), self.check(g)
        return float(np.sum(self.weights * f * g, axis=-1))

    def norm_h(self, f):
        f = self.check(f)
        return np.sqrt(np.sum(self.weights * f * f, axis=-1))

    def norm_grad(self, f):
        """``L^2`` norm of the forward-difference gradient."""
        f = self.check(f)
        d = np.diff(f, axis=-1) / self.h
        return np.sqrt(self.h * np.sum(d * d, axis=-1))

    def integrate(self, f):
        return np.sum(self.weights * self.check(f), axis=-1)


class _HelmholtzFactor:
    """LU factors of the tridiagonal ``I - alpha * laplacian``."""

    def __init__(self, mesh: Mesh, alpha: float):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        n, r = mesh.n, alpha / mesh.h**2
        d = np.full(n, 1.0 + 2.0 * r)
        du = np.full(n - 1, -r)
        dl = np.full(n - 1, -r)
        du[0] = -2.0 * r
        dl[-1] = -2.0 * r
        dl, d, du, du2, ipiv, info = dgttrf(dl, d, du)
        if info != 0:
            raise ArithmeticError(f"tridiagonal factorization failed (info={info})")
        self._lu = (dl, d, du, du2, ipiv)

    def solve(self, f: np.ndarray) -> np.ndarray:
        b = np.array(f, dtype=float, order="F")
        if b.ndim == 2:
            b = b.T.copy(order="F")
        x, info = dgttrs(*self._lu, b)
        if info != 0:
            raise ArithmeticError(f"tridiagonal solve failed (info={info})")
        return x.T if np.ndim(f) == 2 else x


@lru_cache(maxsize=64)
def _helmholtz_factor(mesh: Mesh, alpha: float) -> _HelmholtzFactor:
    return _HelmholtzFactor(mesh, alpha)


def laplacian_apply(mesh: Mesh, f) -> np.ndarray:
    return mesh.laplacian(f)


def solve_helmholtz(mesh: Mesh, f, alpha: float) -> np.ndarray:
    return mesh.solve_helmholtz(f, alpha)


def inner_h(mesh: Mesh, f, g) -> float:
    return mesh.inner_h(f, g)


def norm_h(mesh: Mesh, f):
    return mesh.norm_h(f)


def norm_grad(mesh: Mesh, f):
    return mesh.norm_grad(f)
