"""P1 assembly of the pulled-back forms A_t, B_t and their t-derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .deform import DeformationFamily, pullback_coeffs
from .mesh import Mesh

__all__ = [
    "FORMS",
    "FormBundle",
    "QUADRATURE_RULES",
    "assemble_forms",
    "eval_form",
    "dump_matrix",
]

FORMS = ("A", "B", "A_dot", "B_dot", "A_ddot", "B_ddot")


def _dunavant4():
    a1, w1 = 0.44594849091596488632, 0.22338158967801146570
    a2, w2 = 0.091576213509770743460, 0.10995174365532186764
    pts, wts = [], []
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w, w, w]
    return np.array(pts), np.array(wts)


def _radon5():
    s = np.sqrt(15.0)
    pts, wts = [(1 / 3, 1 / 3, 1 / 3)], [9 / 40]
    for a, w in (((6 - s) / 21, (155 - s) / 1200), ((6 + s) / 21, (155 + s) / 1200)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w, w, w]
    return np.array(pts), np.array(wts)


# barycentric points, weights normalized to sum 1
QUADRATURE_RULES = {4: _dunavant4(), 5: _radon5()}


@dataclass(frozen=True, eq=False)
class FormBundle:
    """The six discrete forms on the free degrees of freedom.

    Matrices are scipy sparse (mesh assembly) or dense arrays (synthetic
    pencils). ``free_dofs[i]`` is the mesh vertex carried by DOF ``i``.
    """

    A: object
    B: object
    A_dot: object
    B_dot: object
    A_ddot: object
    B_ddot: object
    free_dofs: np.ndarray = field(default=None)
    shifted: bool = False
    t: float = 0.0
    n_vertices: int | None = None

    def __post_init__(self):
        n = self.A.shape[0]
        for name in FORMS:
            if getattr(self, name).shape != (n, n):
                raise ValueError(f"form {name} has shape {getattr(self, name).shape}, expected {(n, n)}")
        if self.free_dofs is None:
            object.__setattr__(self, "free_dofs", np.arange(n))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def shift(self) -> float:
        """Amount added to every eigenvalue by the coercivity shift."""
        return 1.0 if self.shifted else 0.0

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.A)

    def form(self, which: str):
        if which not in FORMS:
            raise KeyError(f"unknown form {which!r}; expected one of {FORMS}")
        return getattr(self, which)

    def dense(self, which: str) -> np.ndarray:
        M = self.form(which)
        return M.toarray() if sp.issparse(M) else np.asarray(M)

    def to_vertices(self, u) -> np.ndarray:
        """Lift a free-DOF vector to all mesh vertices (zero on Dirichlet nodes)."""
        n = self.n_vertices if self.n_vertices is not None else self.dim
        out = np.zeros(n)
        out[self.free_dofs] = u
        return out

    @classmethod
    def from_matrices(cls, A, B, A_dot=None, B_dot=None, A_ddot=None, B_ddot=None, t=0.0, shifted=False):
        zero = np.zeros_like(np.asarray(A, float)) if not sp.issparse(A) else sp.csr_matrix(A.shape)
        mats = [A, B, A_dot, B_dot, A_ddot, B_ddot]
        mats = [zero if m is None else (m if sp.issparse(m) else np.asarray(m, float)) for m in mats]
        return cls(*mats, shifted=shifted, t=t)


def _element_geometry(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    E = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    area = 0.5 * (E[:, 0, 0] * E[:, 1, 1] - E[:, 0, 1] * E[:, 1, 0])
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = ref @ np.linalg.inv(E)  # (M, 3, 2)
    return p, area, grads


def _element_matrices(mesh: Mesh, fam: DeformationFamily, t: float, order: int):
    bary, w = QUADRATURE_RULES[order]
    p, area, G = _element_geometry(mesh)
    nt, nq = len(p), len(w)
    xq = np.einsum("qi,mid->mqd", bary, p).reshape(-1, 2)
    cells = np.repeat(np.arange(nt), nq)
    c = pullback_coeffs(fam, xq, t, cells)

    def rs(arr, shape):
        return arr.reshape((nt, nq) + shape)

    a, ad, add = rs(c.a, ()), rs(c.a_dot, ()), rs(c.a_ddot, ())
    Q, Qd, Qdd = rs(c.Q, (2, 2)), rs(c.Q_dot, (2, 2)), rs(c.Q_ddot, (2, 2))

    stiff_coeffs = (
        Q * a[..., None, None],
        Qd * a[..., None, None] + Q * ad[..., None, None],
        Qdd * a[..., None, None] + 2.0 * Qd * ad[..., None, None] + Q * add[..., None, None],
    )
    mass_coeffs = (a, ad, add)

    phiphi = np.einsum("qi,qj->qij", bary, bary)
    out = []
    for S, m in zip(stiff_coeffs, mass_coeffs):
        Sbar = np.einsum("q,mqij->mij", w, S)
        Sbar = 0.5 * (Sbar + np.swapaxes(Sbar, 1, 2))
        K = area[:, None, None] * np.einsum("mia,mab,mjb->mij", G, Sbar, G)
        Mm = area[:, None, None] * np.einsum("q,mq,qij->mij", w, m, phiphi)
        out.append((K, Mm))
    return out


def _scatter(mesh: Mesh, elem: np.ndarray, free: np.ndarray):
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    M = sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = M[free][:, free]
    M = 0.5 * (M + M.T)
    M = M.tocsr()
    M.sort_indices()
    return M


def assemble_forms(mesh: Mesh, fam: DeformationFamily, t: float, quad_order: int = 4) -> FormBundle:
    """Assemble A_t, B_t, their first and second t-derivatives on free DOFs.

    Free DOFs are the vertices not touching a DIRICHLET edge. Without any
    DIRICHLET edge, B is added to every stiffness-type form (``shifted``) so
    that A stays positive definite; eigenvalues then move up by exactly one.
    """
    if quad_order not in QUADRATURE_RULES:
        raise ValueError(f"quadrature order must be one of {sorted(QUADRATURE_RULES)}")
    free = mesh.free_vertices()
    if free.size == 0:
        raise ValueError("mesh has no free degrees of freedom")

    parts = _element_matrices(mesh, fam, t, quad_order)
    (A, B), (Ad, Bd), (Add, Bdd) = [(_scatter(mesh, K, free), _scatter(mesh, Mm, free)) for K, Mm in parts]

    shifted = not mesh.has_dirichlet
    if shifted:
        A, Ad, Add = (A + B).tocsr(), (Ad + Bd).tocsr(), (Add + Bdd).tocsr()
    return FormBundle(A, B, Ad, Bd, Add, Bdd, free_dofs=free, shifted=shifted, t=float(t),
                      n_vertices=mesh.n_vertices)


def eval_form(bundle: FormBundle, which: str, u, v) -> float:
    """u^T M v for the selected form."""
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    if u.shape != (bundle.dim,) or v.shape != (bundle.dim,):
        raise ValueError(f"vectors must have length {bundle.dim}, got {u.shape} and {v.shape}")
    return float(u @ (bundle.form(which) @ v))


def dump_matrix(M) -> str:
    """Coordinate text dump ``row col value`` sorted by (row, col)."""
    C = sp.coo_matrix(M)
    order = np.lexsort((C.col, C.row))
    return "".join(f"{C.row[i]} {C.col[i]} {C.data[i]:.17g}\n" for i in order)
