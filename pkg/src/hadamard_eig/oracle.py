"""Independent checks: one-sided finite differences of sorted eigenvalue
curves, an eigenbasis-split solve for gamma(u), and random quadratic pencils
with planted multiplicities."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .assemble import FormBundle, assemble_forms
from .gevp import EigenPacket, solve_gevp
from .hadamard import Cluster

__all__ = [
    "FDEstimate",
    "PencilFamily",
    "fd_first_derivative",
    "fd_second_derivative",
    "vsplit_gamma",
    "random_pencil",
    "mesh_curve",
    "save_pencil",
    "load_pencil",
]


@dataclass(frozen=True)
class FDEstimate:
    value: float
    error: float
    monotone: bool
    raw: tuple


def _richardson(d0, d1, d2, noise=0.0):
    """Eliminate the O(h) and O(h^2) terms of samples at h, h/2, h/4.

    Successive differences below ``noise`` (the rounding level of the
    quotients) do not count against monotonicity.
    """
    r_a = 2.0 * d1 - d0
    r_b = 2.0 * d2 - d1
    r = (4.0 * r_b - r_a) / 3.0
    monotone = abs(d2 - d1) < abs(d1 - d0) or max(abs(d2 - d1), abs(d1 - d0)) <= noise
    return r, abs(r - r_b), monotone


# rounding level of eigenvalue samples, relative
_NOISE = 64 * np.finfo(float).eps


def _side(side) -> float:
    if side in ("+", 1, +1.0):
        return 1.0
    if side in ("-", -1, -1.0):
        return -1.0
    raise ValueError(f"side must be '+' or '-', got {side!r}")


def _estimate(samples, what, noise=0.0):
    value, err, mono = _richardson(*samples, noise=noise)
    if not mono:
        warnings.warn(f"non-monotone Richardson sequence for {what}", RuntimeWarning, stacklevel=3)
    return FDEstimate(float(value), float(err), bool(mono), tuple(float(s) for s in samples))


def fd_first_derivative(curve, t: float, j: int, h0: float = 1e-3, side="+", base=None) -> FDEstimate:
    """One-sided difference quotient of the j-th (1-based) sorted eigenvalue.

    ``curve(t)`` returns the ascending eigenvalues at t. Uses steps h0, h0/2,
    h0/4 and Richardson extrapolation; ``error`` is the last correction.
    """
    s = _side(side)
    lam0 = curve(t)[j - 1] if base is None else base
    samples = []
    for h in (h0, h0 / 2, h0 / 4):
        samples.append((curve(t + s * h)[j - 1] - lam0) / (s * h))
    noise = _NOISE * max(abs(lam0), 1.0) / (h0 / 4)
    return _estimate(samples, f"first derivative of lambda_{j}", noise)


def fd_second_derivative(curve, t: float, j: int, first_deriv: float, h0: float = 1e-3,
                         side="+", base=None) -> FDEstimate:
    """2/h^2 (lambda_j(t+h) - lambda_j(t) - h lambda_j'), extrapolated like the first derivative."""
    s = _side(side)
    lam0 = curve(t)[j - 1] if base is None else base
    samples = []
    for h in (h0, h0 / 2, h0 / 4):
        hh = s * h
        samples.append(2.0 / hh ** 2 * (curve(t + hh)[j - 1] - lam0 - hh * first_deriv))
    noise = 2.0 * _NOISE * max(abs(lam0), 1.0) / (h0 / 4) ** 2
    return _estimate(samples, f"second derivative of lambda_{j}", noise)


def vsplit_gamma(bundle: FormBundle, full: EigenPacket, cluster: Cluster, u, lam_prime: float) -> np.ndarray:
    """gamma(u) assembled from separate solves below and above the cluster.

    Below the cluster C = A - lambda B is negative definite, above it is
    positive definite; each piece is a Cholesky solve of the Galerkin system
    in the span of the corresponding eigenvectors. Needs every eigenpair.
    """
    n = bundle.dim
    if full.vectors.shape[1] != n:
        raise ValueError(f"need the complete eigendecomposition ({n} pairs), got {full.vectors.shape[1]}")
    A = bundle.dense("A")
    B = bundle.dense("B")
    lam = cluster.pencil_lam
    C = A - lam * B
    u = np.asarray(u, float)
    cdot = bundle.dense("A_dot") @ u - lam * (bundle.dense("B_dot") @ u) - lam_prime * (B @ u)

    k, m = cluster.k, cluster.m
    w = np.zeros(n)
    Z0 = full.vectors[:, : k - 1]
    Z1 = full.vectors[:, k - 1 + m:]
    if Z0.shape[1]:
        C00 = Z0.T @ C @ Z0
        c0 = la.cho_factor(-0.5 * (C00 + C00.T))
        w += Z0 @ la.cho_solve(c0, Z0.T @ cdot)
    if Z1.shape[1]:
        C11 = Z1.T @ C @ Z1
        c1 = la.cho_factor(0.5 * (C11 + C11.T))
        w += Z1 @ la.cho_solve(c1, -(Z1.T @ cdot))
    return w


@dataclass(frozen=True, eq=False)
class PencilFamily:
    """A(t) = A0 + t A1 + t^2 A2 and B(t) = B0 + t B1 + t^2 B2, all symmetric."""

    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    interval: tuple = (-0.1, 0.1)
    seed: int | None = None
    plan: tuple = ()

    @property
    def dimension(self) -> int:
        return self.A0.shape[0]

    def A(self, t):
        return self.A0 + t * self.A1 + t * t * self.A2

    def B(self, t):
        return self.B0 + t * self.B1 + t * t * self.B2

    def bundle(self, t: float) -> FormBundle:
        return FormBundle.from_matrices(self.A(t), self.B(t), self.A1 + 2 * t * self.A2,
                                        self.B1 + 2 * t * self.B2, 2 * self.A2, 2 * self.B2, t=t)

    def eigenvalues(self, t: float) -> np.ndarray:
        return la.eigh(self.A(t), self.B(t), eigvals_only=True)

    def check_spd(self, samples: int = 11) -> None:
        for t in np.linspace(self.interval[0], self.interval[1], samples):
            for name, M in (("A", self.A(t)), ("B", self.B(t))):
                try:
                    la.cholesky(M)
                except la.LinAlgError:
                    raise ValueError(f"{name}(t) is not positive definite at t={t}") from None


def _random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _random_sym(rng, n, norm):
    M = rng.standard_normal((n, n))
    M = 0.5 * (M + M.T)
    s = np.linalg.norm(M, 2)
    return M * (norm / s) if s > 0 else M


def random_pencil(dimension: int, seed: int, plan, perturbation: float = 1.0,
                  nu_gap: float = 0.5, eps: float = 0.1) -> PencilFamily:
    """SPD quadratic pencil whose t = 0 spectrum carries planted multiplicities.

    ``plan`` is a sequence of (eigenvalue, multiplicity). The generalized
    eigenvectors at t = 0 are the columns of a random well-conditioned X and
    the remaining eigenvalues are spread at least 0.3 away from each other
    and from the planted ones. Inside each planted cluster the first-order
    splitting is prescribed so that neighbouring derivatives differ by at
    least ``nu_gap * perturbation``. Deterministic per seed.
    """
    plan = tuple((float(lam), int(mult)) for lam, mult in plan)
    n = int(dimension)
    total = sum(m for _, m in plan)
    if total > n or any(m < 1 for _, m in plan) or any(lam <= 0 for lam, _ in plan):
        raise ValueError(f"infeasible plan {plan} for dimension {n}")
    if len({lam for lam, _ in plan}) != len(plan):
        raise ValueError("planted eigenvalues must be distinct")
    rng = np.random.default_rng(seed)

    vals = [lam for lam, m in plan for _ in range(m)]
    taken = [lam for lam, _ in plan]
    lo, hi = 1.0, 1.0 + 0.6 * n + max(taken, default=0.0)
    while len(vals) < n:
        x = rng.uniform(lo, hi)
        if all(abs(x - y) >= 0.3 for y in taken):
            vals.append(x)
            taken.append(x)
    D = np.array(vals)

    X = _random_orthogonal(rng, n) @ np.diag(rng.uniform(0.8, 1.25, n)) @ _random_orthogonal(rng, n)
    Y = np.linalg.inv(X)

    def pull(M):
        out = Y.T @ M @ Y
        return 0.5 * (out + out.T)

    A0 = pull(np.diag(D))
    B0 = pull(np.eye(n))
    tA1 = _random_sym(rng, n, perturbation)
    tA2 = _random_sym(rng, n, 0.5 * perturbation)
    tB1 = _random_sym(rng, n, 0.2 * perturbation)
    tB2 = _random_sym(rng, n, 0.1 * perturbation)
    if perturbation > 0:
        start = 0
        for lam, m in plan:
            sl = slice(start, start + m)
            base = rng.uniform(-1.0, 1.0) * perturbation
            steps = rng.uniform(1.0, 2.0, m - 1) * nu_gap * perturbation
            nus = base + np.concatenate([[0.0], np.cumsum(steps)])
            R = _random_orthogonal(rng, m)
            tA1[sl, sl] = R @ np.diag(nus) @ R.T + lam * tB1[sl, sl]
            start += m
    fam = PencilFamily(A0, pull(tA1), pull(tA2), B0, pull(tB1), pull(tB2), (-eps, eps), seed, plan)
    fam.check_spd()
    return fam


def save_pencil(fam: PencilFamily) -> str:
    data = {
        "dimension": fam.dimension,
        "seed": fam.seed,
        "plan": [list(p) for p in fam.plan],
        "interval": list(fam.interval),
    }
    for name in ("A0", "A1", "A2", "B0", "B1", "B2"):
        data[name] = getattr(fam, name).tolist()
    return json.dumps(data)


def load_pencil(text: str) -> PencilFamily:
    data = json.loads(text)
    mats = {name: np.array(data[name], float) for name in ("A0", "A1", "A2", "B0", "B1", "B2")}
    return PencilFamily(interval=tuple(data.get("interval", (-0.1, 0.1))), seed=data.get("seed"),
                        plan=tuple(tuple(p) for p in data.get("plan", ())), **mats)


def mesh_curve(mesh, fam, k: int, tol: float = 1e-10):
    """t -> the k smallest (reported) eigenvalues of the deformed mesh problem."""

    def curve(t):
        return solve_gevp(assemble_forms(mesh, fam, t), k, tol).values

    return curve
