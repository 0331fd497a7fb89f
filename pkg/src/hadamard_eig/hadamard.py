"""First and second unilateral derivatives of eigenvalue clusters.

For a cluster lambda_k = ... = lambda_{k+m-1} with B-orthonormal basis Y,
the right derivatives are the ascending eigenvalues nu of

    G = Y^T (A_dot - lambda B_dot) Y,

and the left derivatives are the same numbers in reverse order. Grouping
equal nu into sub-clusters with common value lam' and rotated basis Phi, the
second derivatives are the ascending eigenvalues of

    H = Phi^T (A_ddot - lambda B_ddot - 2 lam' B_dot) Phi - 2 Gamma^T C Gamma,

where C = A - lambda B and the columns of Gamma are the corrections gamma(phi)
of :func:`solve_gamma`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assemble import FormBundle, assemble_forms
from .deform import DeformationFamily
from .gevp import EigenPacket, solve_gevp
from .mesh import Mesh

__all__ = [
    "Tolerances",
    "Cluster",
    "FirstOrderResult",
    "SecondOrderResult",
    "SensitivityReport",
    "PreconditionError",
    "GammaSolveError",
    "GammaSolver",
    "detect_clusters",
    "make_cluster",
    "first_derivatives",
    "solve_gamma",
    "second_derivatives",
    "sensitivity",
    "full_report",
]


class PreconditionError(ValueError):
    pass


class GammaSolveError(RuntimeError):
    def __init__(self, message, pivot):
        self.pivot = pivot
        super().__init__(f"{message} (smallest pivot {pivot:.3e})")


@dataclass(frozen=True)
class Tolerances:
    cluster: float = 1e-8
    derivative: float = 1e-6
    residual: float = 1e-10
    fd_h0: float = 1e-3


@dataclass(frozen=True, eq=False)
class Cluster:
    """Indices k..k+m-1 (1-based) sharing the eigenvalue ``lam``.

    ``lam`` is the reported value; the pencil value used in the forms is
    ``lam + shift``.
    """

    k: int
    m: int
    lam: float
    basis: np.ndarray
    shift: float = 0.0

    @property
    def pencil_lam(self) -> float:
        return self.lam + self.shift

    @property
    def indices(self) -> range:
        return range(self.k, self.k + self.m)


@dataclass(frozen=True, eq=False)
class FirstOrderResult:
    cluster: Cluster
    nu: np.ndarray
    rotated_basis: np.ndarray

    @property
    def right(self) -> np.ndarray:
        """Right derivatives of lambda_k, ..., lambda_{k+m-1}."""
        return self.nu

    @property
    def left(self) -> np.ndarray:
        """Left derivatives of lambda_k, ..., lambda_{k+m-1}."""
        return self.nu[::-1]


@dataclass(frozen=True, eq=False)
class SecondOrderResult:
    """Sub-cluster l..r-1 (1-based, r exclusive) with common first derivative."""

    parent: FirstOrderResult
    l: int
    r: int
    lam_prime: float
    sigma: np.ndarray
    gamma_vectors: np.ndarray
    H: np.ndarray

    @property
    def positions(self) -> range:
        """0-based positions of the sub-cluster inside its cluster."""
        k = self.parent.cluster.k
        return range(self.l - k, self.r - k)


def detect_clusters(values, rel_tol: float = 1e-8) -> list[tuple[int, int]]:
    """Maximal runs of numerically equal ascending values as (k, m), k 1-based."""
    values = np.asarray(values, float)
    out = []
    start = 0
    for j in range(1, len(values) + 1):
        if j == len(values) or abs(values[j] - values[j - 1]) > rel_tol * max(1.0, abs(values[j - 1])):
            out.append((start + 1, j - start))
            start = j
    return out


def make_cluster(packet: EigenPacket, k: int, m: int) -> Cluster:
    idx = slice(k - 1, k - 1 + m)
    lam = float(np.mean(packet.values[idx]))
    return Cluster(k, m, lam, packet.vectors[:, idx], packet.shifted_correction)


def _check_orthonormal(Y, B, tol=1e-10):
    gram = Y.T @ (B @ Y)
    err = np.max(np.abs(gram - np.eye(Y.shape[1])))
    if not err <= tol:
        raise PreconditionError(f"cluster basis is not B-orthonormal (max deviation {err:.3e})")


def _sym(M):
    return 0.5 * (M + M.T)


def first_derivatives(bundle: FormBundle, packet: EigenPacket | None, cluster: Cluster) -> FirstOrderResult:
    """Eigenvalues of the G matrix of ``cluster``.

    ``packet`` is accepted for interface symmetry; the cluster carries its basis.
    """
    Y = cluster.basis
    _check_orthonormal(Y, bundle.B)
    lam = cluster.pencil_lam
    E = bundle.A_dot @ Y - lam * (bundle.B_dot @ Y)
    G = _sym(Y.T @ E)
    nu, U = la.eigh(G)
    return FirstOrderResult(cluster, nu, Y @ U)


class GammaSolver:
    """Factorized bordered system for gamma(u) on one cluster.

    Solves [[C, BY], [Y^T B, 0]] [w; mu] = [-c; 0] with C = A - lambda B and
    c = (A_dot - lambda B_dot - lam' B) u. The constraint keeps w B-orthogonal
    to the cluster; the multiplier absorbs the cluster component of the
    equation.
    """

    def __init__(self, bundle: FormBundle, cluster: Cluster):
        self.bundle = bundle
        self.cluster = cluster
        lam = cluster.pencil_lam
        Y = cluster.basis
        self.BY = np.asarray(bundle.B @ Y)
        n, m = Y.shape
        if bundle.is_sparse:
            C = (bundle.A - lam * bundle.B).tocsc()
            K = sp.bmat([[C, sp.csc_matrix(self.BY)], [sp.csc_matrix(self.BY.T), None]], format="csc")
            try:
                lu = spla.splu(K)
            except RuntimeError:
                raise GammaSolveError("bordered system is singular", 0.0) from None
            piv = np.abs(lu.U.diagonal())
            self._solve = lu.solve
            self.C = C
        else:
            C = np.asarray(bundle.A, float) - lam * np.asarray(bundle.B, float)
            K = np.block([[C, self.BY], [self.BY.T, np.zeros((m, m))]])
            lu, ipiv = la.lu_factor(K, check_finite=False)
            piv = np.abs(np.diag(lu))
            self._solve = lambda rhs: la.lu_solve((lu, ipiv), rhs, check_finite=False)
            self.C = C
        self.smallest_pivot = float(piv.min())
        if not self.smallest_pivot > np.finfo(float).eps * float(piv.max()) * n:
            raise GammaSolveError("bordered system is numerically singular", self.smallest_pivot)
        self.n, self.m = n, m

    def c_dot(self, U, lam_prime):
        b = self.bundle
        lam = self.cluster.pencil_lam
        return b.A_dot @ U - lam * (b.B_dot @ U) - lam_prime * (b.B @ U)

    def solve(self, U, lam_prime, tol=1e-8):
        U = np.asarray(U, float)
        single = U.ndim == 1
        U2 = U[:, None] if single else U
        rhs_top = -np.asarray(self.c_dot(U2, lam_prime))
        rhs = np.vstack([rhs_top, np.zeros((self.m, U2.shape[1]))])
        sol = self._solve(rhs)
        W, mu = sol[: self.n], sol[self.n:]
        resid = np.asarray(self.C @ W) - rhs_top + self.BY @ mu
        scale = np.linalg.norm(rhs_top, axis=0) + np.linalg.norm(np.asarray(self.C @ W), axis=0)
        bad = np.linalg.norm(resid, axis=0) > tol * np.maximum(scale, 1.0)
        if bad.any():
            raise GammaSolveError("gamma residual check failed", self.smallest_pivot)
        return (W[:, 0], mu[:, 0]) if single else (W, mu)


def solve_gamma(bundle: FormBundle, cluster: Cluster, u, lam_prime: float) -> np.ndarray:
    """gamma(u): B-orthogonal to the cluster, C(w, v) = -C_dot(u, v) on that complement."""
    w, _ = GammaSolver(bundle, cluster).solve(u, lam_prime)
    return w


def _group(values, tol):
    groups = []
    start = 0
    for j in range(1, len(values) + 1):
        if j == len(values) or values[j] - values[j - 1] > tol:
            groups.append((start, j))
            start = j
    return groups


def second_derivatives(bundle: FormBundle, first: FirstOrderResult, deriv_tol: float = 1e-6,
                       solver: GammaSolver | None = None) -> list[SecondOrderResult]:
    """H-matrix eigenvalues for every sub-cluster of equal first derivatives."""
    cl = first.cluster
    lam = cl.pencil_lam
    solver = solver or GammaSolver(bundle, cl)
    out = []
    for a, b in _group(first.nu, deriv_tol):
        lam_prime = float(np.mean(first.nu[a:b]))
        Phi = first.rotated_basis[:, a:b]
        Gam, _ = solver.solve(Phi, lam_prime)
        D = bundle.A_ddot @ Phi - lam * (bundle.B_ddot @ Phi) - 2.0 * lam_prime * (bundle.B_dot @ Phi)
        H = _sym(Phi.T @ D) - 2.0 * _sym(Gam.T @ np.asarray(solver.C @ Gam))
        sigma = la.eigvalsh(H)
        out.append(SecondOrderResult(first, cl.k + a, cl.k + b, lam_prime, sigma, Gam, H))
    return out


@dataclass(eq=False)
class SensitivityReport:
    t: float
    eigenvalues: np.ndarray
    clusters: list
    first: list
    second: list
    tolerances: Tolerances = field(default_factory=Tolerances)
    packet: EigenPacket | None = None

    def _per_index(self, fill):
        out = np.full(len(self.eigenvalues), np.nan)
        for fo, subs in zip(self.first, self.second):
            fill(out, fo, subs)
        return out

    def right_first(self) -> np.ndarray:
        def fill(out, fo, subs):
            out[fo.cluster.k - 1: fo.cluster.k - 1 + fo.cluster.m] = fo.right
        return self._per_index(fill)

    def left_first(self) -> np.ndarray:
        def fill(out, fo, subs):
            out[fo.cluster.k - 1: fo.cluster.k - 1 + fo.cluster.m] = fo.left
        return self._per_index(fill)

    def right_second(self) -> np.ndarray:
        """lambda''_j from the right: sigma of each sub-cluster, ascending in j."""
        def fill(out, fo, subs):
            for s in subs:
                out[s.l - 1: s.r - 1] = s.sigma
        return self._per_index(fill)

    def left_second(self) -> np.ndarray:
        """lambda''_j from the left: sub-clusters sit at mirrored positions."""
        def fill(out, fo, subs):
            k, m = fo.cluster.k, fo.cluster.m
            for s in subs:
                a, b = s.l - k, s.r - k
                lo = k - 1 + (m - b)
                out[lo: lo + (b - a)] = s.sigma
        return self._per_index(fill)

    def to_dict(self) -> dict:
        clusters = []
        for fo, subs in zip(self.first, self.second):
            cl = fo.cluster
            clusters.append({
                "k": cl.k,
                "m": cl.m,
                "lambda": float(cl.lam),
                "nu": [float(x) for x in fo.nu],
                "right_first": [float(x) for x in fo.right],
                "left_first": [float(x) for x in fo.left],
                "subclusters": [
                    {"l": s.l, "r": s.r, "lambda_prime": float(s.lam_prime),
                     "sigma": [float(x) for x in s.sigma]}
                    for s in subs
                ],
            })
        return {
            "t": float(self.t),
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "clusters": clusters,
            "tolerances": asdict(self.tolerances),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _complete_packet(bundle: FormBundle, k_max: int, tol: Tolerances) -> tuple[EigenPacket, list]:
    """Solve enough eigenpairs that the cluster containing index k_max is complete."""
    n = bundle.dim
    k_max = min(k_max, n)
    k_solve = min(n, k_max + 4)
    while True:
        packet = solve_gevp(bundle, k_solve, tol.residual)
        clusters = detect_clusters(packet.values, tol.cluster)
        last = next(c for c in clusters if c[0] <= k_max < c[0] + c[1])
        end = last[0] + last[1] - 1
        if end < k_solve or k_solve == n:
            break
        k_solve = min(n, 2 * k_solve)
    keep = [c for c in clusters if c[0] <= k_max]
    end = keep[-1][0] + keep[-1][1] - 1
    trimmed = EigenPacket(packet.values[:end], packet.vectors[:, :end], packet.t,
                          packet.shifted_correction, packet.residuals[:end])
    return trimmed, keep


def sensitivity(bundle: FormBundle, k_max: int, tolerances: Tolerances | None = None) -> SensitivityReport:
    """First and second derivatives of the k_max smallest eigenvalues of a bundle.

    The trailing cluster is always completed, so the report may hold more
    than ``k_max`` eigenvalues.
    """
    tol = tolerances or Tolerances()
    packet, ranges = _complete_packet(bundle, k_max, tol)
    clusters, firsts, seconds = [], [], []
    for k, m in ranges:
        cl = make_cluster(packet, k, m)
        fo = first_derivatives(bundle, packet, cl)
        clusters.append(cl)
        firsts.append(fo)
        seconds.append(second_derivatives(bundle, fo, tol.derivative))
    return SensitivityReport(bundle.t, packet.values, clusters, firsts, seconds, tol, packet)


def full_report(mesh: Mesh, fam: DeformationFamily, t: float, k_max: int,
                tolerances: Tolerances | None = None) -> SensitivityReport:
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    return sensitivity(assemble_forms(mesh, fam, t), k_max, tolerances)
