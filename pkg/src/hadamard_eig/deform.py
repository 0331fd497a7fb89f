"""Deformation families T_t and the pullback coefficients they induce.

A family is described by two callbacks evaluated on arrays of reference
points: ``map_eval(x, t)`` returning T_t(x) and ``jac_eval(x, t, cells)``
returning the Jacobian DT_t(x) together with its first and second
t-derivatives. ``cells`` gives the containing triangle of every point and is
only needed by piecewise-linear velocity fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mesh import Mesh

__all__ = [
    "SingularDeformationError",
    "DeformationFamily",
    "PullbackCoeffs",
    "AnalyticField",
    "NodalField",
    "affine_family",
    "identity_family",
    "pullback_coeffs",
    "field_from_config",
]


class SingularDeformationError(ValueError):
    def __init__(self, point, t, det):
        self.point = tuple(float(c) for c in point)
        self.t = float(t)
        self.det = float(det)
        super().__init__(f"det DT_t = {self.det:.3e} <= 0 at x={self.point}, t={self.t}")


@dataclass(frozen=True)
class DeformationFamily:
    map_eval: Callable
    jac_eval: Callable
    t_range: tuple = (-np.inf, np.inf)
    name: str = "custom"

    def contains(self, t: float) -> bool:
        lo, hi = self.t_range
        return lo < t < hi


@dataclass(frozen=True)
class PullbackCoeffs:
    """a_t = det DT_t, Q_t = DT_t^{-1} DT_t^{-T} and their t-derivatives.

    Fields are arrays over evaluation points: ``a`` has shape (P,) and ``Q``
    shape (P, 2, 2), likewise for the derivatives.
    """

    a: np.ndarray
    a_dot: np.ndarray
    a_ddot: np.ndarray
    Q: np.ndarray
    Q_dot: np.ndarray
    Q_ddot: np.ndarray


class AnalyticField:
    """Closed-form linear velocity fields W(x) = scale * L x."""

    _LINEAR = {
        "dilation": np.eye(2),
        "stretch_x": np.array([[1.0, 0.0], [0.0, 0.0]]),
        "stretch_y": np.array([[0.0, 0.0], [0.0, 1.0]]),
        "shear": np.array([[0.0, 1.0], [0.0, 0.0]]),
        "zero": np.zeros((2, 2)),
    }

    def __init__(self, name: str, scale: float = 1.0):
        if name not in self._LINEAR:
            raise ValueError(f"unknown analytic field {name!r}; choose from {sorted(self._LINEAR)}")
        self.name = name
        self.scale = float(scale)
        self.L = self.scale * self._LINEAR[name]

    def value(self, x, cells=None):
        return np.asarray(x, float) @ self.L.T

    def jacobian(self, x, cells=None):
        x = np.asarray(x, float)
        return np.broadcast_to(self.L, x.shape[:-1] + (2, 2)).copy()

    def max_gradient_norm(self) -> float:
        return float(np.linalg.norm(self.L, 2))


class NodalField:
    """Piecewise-linear field given by one 2-vector per mesh vertex."""

    def __init__(self, mesh: Mesh, values):
        values = np.asarray(values, float)
        if values.shape != (mesh.n_vertices, 2):
            raise ValueError(f"nodal field needs shape ({mesh.n_vertices}, 2), got {values.shape}")
        self.name = "nodal"
        self.mesh = mesh
        self.values = values
        p = mesh.vertices[mesh.triangles]
        # DW per triangle from the two edge vectors
        E = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        w = values[mesh.triangles]
        dW = np.stack([w[:, 1] - w[:, 0], w[:, 2] - w[:, 0]], axis=-1)
        self._grad = dW @ np.linalg.inv(E)

    def _cells(self, cells):
        if cells is None:
            raise ValueError("nodal fields need the containing triangle of every point")
        return np.asarray(cells, dtype=np.int64)

    def value(self, x, cells=None):
        cells = self._cells(cells)
        x = np.asarray(x, float)
        base = self.mesh.vertices[self.mesh.triangles[cells, 0]]
        w0 = self.values[self.mesh.triangles[cells, 0]]
        return w0 + np.einsum("pij,pj->pi", self._grad[cells], x - base)

    def jacobian(self, x, cells=None):
        return self._grad[self._cells(cells)].copy()

    def max_gradient_norm(self) -> float:
        return float(np.max(np.linalg.norm(self._grad, 2, axis=(1, 2)))) if len(self._grad) else 0.0


def affine_family(W, eps0: Optional[float] = None) -> DeformationFamily:
    """T_t x = x + t W(x).

    The default half-width of the t-interval is ``0.9 / max |DW|`` so that
    I + t DW stays invertible.
    """
    if eps0 is None:
        g = W.max_gradient_norm()
        eps0 = np.inf if g == 0 else 0.9 / g

    def map_eval(x, t, cells=None):
        x = np.asarray(x, float)
        return x + t * W.value(x, cells)

    def jac_eval(x, t, cells=None):
        DW = W.jacobian(x, cells)
        F = np.eye(2) + t * DW
        return F, DW, np.zeros_like(DW)

    return DeformationFamily(map_eval, jac_eval, (-float(eps0), float(eps0)), getattr(W, "name", "affine"))


def identity_family() -> DeformationFamily:
    return affine_family(AnalyticField("zero"))


def _sym(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def pullback_coeffs(fam: DeformationFamily, x, t: float, cells=None) -> PullbackCoeffs:
    """Pullback coefficients at points ``x`` (shape (P, 2) or (2,))."""
    x = np.asarray(x, float)
    single = x.ndim == 1
    xs = x.reshape(-1, 2)
    F, Fd, Fdd = (np.asarray(m, float).reshape(-1, 2, 2) for m in fam.jac_eval(xs, t, cells))

    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    bad = np.flatnonzero(~(det > 0))
    if bad.size:
        i = bad[0]
        raise SingularDeformationError(xs[i], t, det[i])

    Finv = np.linalg.inv(F)
    M = Finv @ Fd
    N = Finv @ Fdd
    trM = np.trace(M, axis1=1, axis2=2)
    trM2 = np.einsum("pij,pji->p", M, M)
    trN = np.trace(N, axis1=1, axis2=2)

    a = det
    a_dot = a * trM
    a_ddot = a * (trM ** 2 - trM2 + trN)

    Q = _sym(Finv @ np.swapaxes(Finv, 1, 2))
    MQ = M @ Q
    Q_dot = _sym(-(MQ + np.swapaxes(MQ, 1, 2)))
    # d/dt M = F^{-1} F_ddot - M^2
    Md = N - M @ M
    MdQ = Md @ Q
    MQd = M @ Q_dot
    Q_ddot = _sym(-(MdQ + np.swapaxes(MdQ, 1, 2)) - (MQd + np.swapaxes(MQd, 1, 2)))

    if single:
        return PullbackCoeffs(a[0], a_dot[0], a_ddot[0], Q[0], Q_dot[0], Q_ddot[0])
    return PullbackCoeffs(a, a_dot, a_ddot, Q, Q_dot, Q_ddot)


def field_from_config(spec: dict, mesh: Mesh):
    """Build a velocity field from its JSON description."""
    kind = spec.get("kind")
    if kind == "analytic":
        return AnalyticField(spec["name"], spec.get("scale", 1.0))
    if kind == "nodal":
        return NodalField(mesh, spec["values"])
    raise ValueError(f"unknown deformation kind {kind!r}")
