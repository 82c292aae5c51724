"""Independent reference computations.

Nothing here imports a solver module; oracles only touch geometry
primitives and numpy, so they stay usable when a solver is broken.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..errors import OracleUnavailable
from ..geometry import NormedSpace

MAX_CONDITION = 1e12


@dataclass
class OracleResult:
    kind: str  # affine_fixed_point | brute_force_diameter | power_iteration_norm | pairwise_sampling
    value: object
    tolerance_used: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        v = self.value
        if isinstance(v, np.ndarray):
            v = v.tolist()
        return {"kind": self.kind, "value": v, "tolerance_used": self.tolerance_used,
                "details": {k: (x.tolist() if isinstance(x, np.ndarray) else x)
                            for k, x in self.details.items()}}


def affine_fixed_point_oracle(A, b) -> OracleResult:
    """Solve ``(I - A) p = b`` by LU with partial pivoting (LAPACK ``gesv``).

    Raises OracleUnavailable when ``I - A`` is singular or its condition
    number exceeds ``MAX_CONDITION``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    M = np.eye(len(b)) - A
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise OracleUnavailable(f"I - A is singular or ill-conditioned (cond={cond:.3e})")
    p = np.linalg.solve(M, b)
    resid = float(np.abs(M @ p - b).max())
    return OracleResult("affine_fixed_point", p, MAX_CONDITION,
                        {"condition": float(cond), "residual": resid})


def stacked_fixed_point_oracle(affine_pairs) -> OracleResult:
    """Unique common fixed point of several affine maps ``x -> A_i x + b_i``.

    Stacks the systems ``(I - A_i) p = b_i`` and solves them in the least
    squares sense; the answer is accepted only if the stacked matrix has full
    column rank and the system is consistent.
    """
    blocks = [(np.eye(len(b)) - np.asarray(A, float), np.asarray(b, float)) for A, b in affine_pairs]
    M = np.vstack([m for m, _ in blocks])
    rhs = np.concatenate([r for _, r in blocks])
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > MAX_CONDITION:
        raise OracleUnavailable("common fixed point is not unique (stacked system rank-deficient)")
    p, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = float(np.abs(M @ p - rhs).max())
    if resid > 1e-9 * max(1.0, float(np.abs(rhs).max())):
        raise OracleUnavailable(f"stacked system inconsistent (residual {resid:.3e}); no common fixed point")
    return OracleResult("affine_fixed_point", p, MAX_CONDITION,
                        {"condition": float(s[0] / s[-1]), "residual": resid})


def brute_force_diameter(space: NormedSpace, points) -> OracleResult:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    best, pair = 0.0, (0, 0)
    for i, j in combinations(range(len(pts)), 2):
        d = space.dist(pts[i], pts[j])
        if d > best:
            best, pair = d, (i, j)
    return OracleResult("brute_force_diameter", best, 0.0, {"pair": list(pair)})


def power_iteration_norm(A, rtol=1e-10, max_iter=100_000, seed=0) -> OracleResult:
    """Spectral norm of ``A`` by power iteration on ``A^T A``.

    Stops when successive singular-value estimates agree to ``rtol``
    relative; the estimate is a Rayleigh quotient, so it never exceeds the
    true norm by more than rounding.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    G = A.T @ A
    if not np.any(G):
        return OracleResult("power_iteration_norm", 0.0, rtol, {"iterations": 0})
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = np.linalg.norm(A @ v)
    for it in range(1, max_iter + 1):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return OracleResult("power_iteration_norm", 0.0, rtol, {"iterations": it})
        v = w / nw
        new = float(np.linalg.norm(A @ v))
        if abs(new - sigma) <= rtol * new:
            return OracleResult("power_iteration_norm", new, rtol, {"iterations": it})
        sigma = new
    return OracleResult("power_iteration_norm", float(sigma), rtol,
                        {"iterations": max_iter, "converged": False})


def rayleigh_sweep_norm(A, resolution=None) -> OracleResult:
    """Brute-force ``max ||A v||_2`` over a grid of unit vectors (dim <= 3).

    The grid is refined once around the best direction.  Accuracy is about
    1e-9 relative in two dimensions and 1e-6 in three.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[1]
    if d == 1:
        return OracleResult("power_iteration_norm", float(np.abs(A).max()), 0.0, {"grid": 1})
    if d == 2:
        n = resolution or 20_000
        t = np.linspace(0.0, np.pi, n, endpoint=False)
        best = _best_2d(A, t)
        h = np.pi / n
        t2 = np.linspace(best - h, best + h, n)
        val = float(np.linalg.norm(A @ np.vstack([np.cos(t2), np.sin(t2)]), axis=0).max())
        return OracleResult("power_iteration_norm", val, 1e-9, {"grid": 2 * n})
    if d == 3:
        n = resolution or 400
        th, ph = np.meshgrid(np.linspace(0, np.pi, n), np.linspace(0, np.pi, n), indexing="ij")
        V = _sphere(th.ravel(), ph.ravel())
        norms = np.linalg.norm(A @ V, axis=0)
        k = int(np.argmax(norms))
        h = np.pi / (n - 1)
        th2, ph2 = np.meshgrid(np.linspace(th.ravel()[k] - h, th.ravel()[k] + h, n),
                               np.linspace(ph.ravel()[k] - h, ph.ravel()[k] + h, n), indexing="ij")
        V2 = _sphere(th2.ravel(), ph2.ravel())
        val = float(max(norms.max(), np.linalg.norm(A @ V2, axis=0).max()))
        return OracleResult("power_iteration_norm", val, 1e-6, {"grid": 2 * n * n})
    raise OracleUnavailable("Rayleigh sweep is only defined for dim <= 3")


def _best_2d(A, t):
    n = np.linalg.norm(A @ np.vstack([np.cos(t), np.sin(t)]), axis=0)
    return float(t[int(np.argmax(n))])


def _sphere(th, ph):
    # half-sphere suffices since ||A(-v)|| = ||A v||
    return np.vstack([np.cos(th), np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph)])


def pairwise_sampling(space: NormedSpace, fn, X, Y) -> OracleResult:
    """Largest observed ``||f x - f y|| / ||x - y||`` over the given pairs."""
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    num = space.norm_of(fn(X) - fn(Y))
    den = space.norm_of(X - Y)
    ok = den > 0
    if not np.any(ok):
        return OracleResult("pairwise_sampling", 0.0, 0.0, {"pairs": 0})
    ratio = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    k = int(np.argmax(ratio))
    return OracleResult("pairwise_sampling", float(ratio[k]), 0.0,
                        {"pairs": int(ok.sum()), "witness": [X[k].tolist(), Y[k].tolist()]})
