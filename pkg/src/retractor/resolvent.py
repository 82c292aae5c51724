"""Contraction solves and the anchored resolvent of a nonexpansive map.

For a nonexpansive ``T`` on ``C``, an anchor ``x`` and an accuracy index
``n >= 1``, the resolvent ``F_n x`` is the unique ``z`` in ``C`` with::

    z = x / n + (1 - 1/n) T z

It exists because the right-hand side is a contraction with modulus
``1 - 1/n``.  It satisfies ``||T F_n x - F_n x|| = ||T F_n x - x|| / n``,
which is at most ``diam(C) / n``, and ``F_n`` is nonexpansive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NonConvergence, UncertifiedMapError
from .geometry import NormedSpace

DEFAULT_RELAX = 0.5
DEFAULT_INNER_MAX_ITER = 1_000_000


@dataclass
class ContractionSolve:
    q: float
    tol: float
    max_iter: int
    iterations_used: int = 0
    residual: float = 0.0
    first_step: float = 0.0
    steps: list = field(default_factory=list, repr=False)
    row_iterations: np.ndarray | None = field(default=None, repr=False)

    def apriori_bound(self) -> int | None:
        """Iteration count the a-priori Banach estimate guarantees, or None if
        the first step was already zero."""
        return apriori_iteration_bound(self.q, self.tol, self.first_step)

    def to_dict(self):
        return {"q": self.q, "tol": self.tol, "max_iter": self.max_iter,
                "iterations_used": self.iterations_used, "residual": self.residual,
                "first_step": self.first_step}


def apriori_iteration_bound(q, tol, first_step):
    """Upper bound on the evaluations needed before ``||z_{k+1} - z_k|| <= tol (1 - q)``.

    Steps shrink at least like ``q**k * first_step``, so the stopping test
    passes once ``k >= ln(tol (1-q) / first_step) / ln q``.
    """
    if first_step <= 0:
        return None
    target = tol * (1.0 - q)
    if first_step <= target:
        return 1
    if q == 0.0:
        return 2
    return max(math.ceil(math.log(target / first_step) / math.log(q)), 0) + 1


def banach_solve(f, z0, q, tol, max_iter, space: NormedSpace, record=False, rows_arg=False):
    """Iterate ``z <- f(z)`` for a ``q``-contraction until the a-posteriori test holds.

    Stops a row as soon as ``||z_{k+1} - z_k|| <= tol * (1 - q)``, which
    puts it within ``q * tol`` of the fixed point and makes
    ``||f(z) - z|| <= q * tol``.  ``z0`` may be a point or an ``(m, dim)``
    batch; ``f`` must act row by row.  Finished rows are dropped from later
    evaluations, so each row's answer is the same as if it had been solved
    alone.  With ``rows_arg=True``, ``f`` is called as ``f(z, rows)`` where
    ``rows`` (an index array or slice) selects the matching rows of the
    original batch (for row-dependent maps).

    Returns ``(z, ContractionSolve)``.  Raises NonConvergence if a row is
    still moving after ``max_iter`` evaluations.
    """
    if not 0.0 <= q < 1.0:
        raise ContractViolation(f"contraction modulus must lie in [0, 1), got {q}")
    if tol <= 0 or max_iter < 1:
        raise ContractViolation("tol must be positive and max_iter at least 1")
    single = np.ndim(z0) == 1
    Z = np.array(z0, dtype=float, ndmin=2)
    m = len(Z)
    call = f if rows_arg else (lambda W, idx: f(W))
    norms = space.row_norms
    threshold = tol * (1.0 - q)
    active = slice(None)  # every row still moving
    iters = np.zeros(m, dtype=int)
    info = ContractionSolve(q, tol, max_iter)
    for k in range(1, max_iter + 1):
        Za = Z[active]
        F = call(Za, active)
        step = norms(F - Za)
        Z[active] = F
        if k == 1:
            info.first_step = float(step.max())
        if record:
            info.steps.append(float(step.max()))
        moving = step > threshold
        n_moving = np.count_nonzero(moving)
        if n_moving < len(step):
            rows = np.arange(m)[active]
            iters[rows[~moving]] = k
            if not n_moving:
                break
            active = rows[moving]
    else:
        iters[active] = max_iter
        info.iterations_used = max_iter
        info.residual = float(step.max())
        raise NonConvergence(info.residual, max_iter, info)
    info.iterations_used = int(iters.max())
    info.row_iterations = iters
    info.residual = float(space.norm_of(call(Z, np.arange(m)) - Z).max())
    return (Z[0] if single else Z), info


@dataclass
class ResolventResult:
    n: int
    point: np.ndarray
    residual_T: object  # float, or an array for a batch
    inner: ContractionSolve

    def to_dict(self):
        r = self.residual_T
        return {"n": self.n, "point": np.asarray(self.point).tolist(),
                "residual_T": r.tolist() if isinstance(r, np.ndarray) else r,
                "inner": self.inner.to_dict()}


def _require_certified(T, allow_uncertified):
    if not allow_uncertified and not T.certified:
        raise UncertifiedMapError(
            f"map {T.name!r} has no nonexpansiveness certificate; certify it first"
        )


def resolve(T, x, n, inner_tol, relax=DEFAULT_RELAX, max_iter=DEFAULT_INNER_MAX_ITER,
            allow_uncertified=False, record=False) -> ResolventResult:
    """Compute ``F_n x`` for a point or a batch of anchors.

    The contraction ``g(z) = x/n + (1 - 1/n) T z`` is solved through its
    relaxation ``z + relax * (g(z) - z)``, which has the same fixed point and
    modulus ``1 - relax/n``.  ``relax=1`` iterates ``g`` itself.  Relaxation
    damps the rotational part of isometries, which otherwise makes the plain
    iteration crawl at rate ``1 - 1/n``.

    The start point is the anchor ``x``.  The returned point lies within
    ``inner_tol`` of the exact resolvent, so
    ``residual_T <= diam(C)/n + 2 * inner_tol``.
    """
    _require_certified(T, allow_uncertified)
    if int(n) != n or n < 1:
        raise ContractViolation(f"accuracy index n must be a positive integer, got {n}")
    if not 0.0 < relax <= 1.0:
        raise ContractViolation("relax must lie in (0, 1]")
    n = int(n)
    space = T.space
    X = space.check(x)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    Tf = T.kind.apply  # X is 2-d here, so skip raw()'s reshaping
    inv_n = 1.0 / n

    if relax == 1.0:
        def g(Z, rows):
            TZ = Tf(Z)
            return TZ + (X[rows] - TZ) * inv_n
    else:
        def g(Z, rows):
            TZ = Tf(Z)
            return Z + relax * (TZ + (X[rows] - TZ) * inv_n - Z)

    q = 1.0 - relax * inv_n
    Z, info = banach_solve(g, X, q, inner_tol, max_iter, space, record=record, rows_arg=True)
    res = space.norm_of(Tf(Z) - Z)
    if single:
        return ResolventResult(n, Z[0], float(res[0]), info)
    return ResolventResult(n, Z, res, info)


def accuracy_index(diam, eps):
    """Smallest ``n`` with ``diam / n <= eps``."""
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    return max(1, math.ceil(diam / eps))


def single_retraction(T, eps, inner_tol=None, relax=DEFAULT_RELAX,
                      max_iter=DEFAULT_INNER_MAX_ITER, allow_uncertified=False):
    """Approximate retraction onto ``Fix T``: ``x -> F_{n*} x`` with ``n* = ceil(diam C / eps)``.

    Every output ``y`` has ``||T y - y|| <= eps + 2 * inner_tol``
    (``inner_tol`` defaults to ``eps / 10``).
    """
    from .retraction import Leaf, RetractionProc

    _require_certified(T, allow_uncertified)
    inner_tol = eps / 10 if inner_tol is None else inner_tol
    n = accuracy_index(T.body.diam, eps)
    leaf = Leaf(T, n, inner_tol, relax, max_iter, eps + 2 * inner_tol)
    return RetractionProc(leaf, (T,), eps + 2 * inner_tol, refinements=0,
                          allow_uncertified=allow_uncertified)


def displacement_bound(T, x, n, inner_tol):
    """Bound on ``||F_n x - x||`` from ``x``'s own residual.

    ``F_n x - x = (1 - 1/n)(T F_n x - T x) + (1 - 1/n)(T x - x)`` gives
    ``||F_n x - x|| <= (n - 1) ||T x - x||``; the inner solve adds ``inner_tol``.
    """
    r = T.space.norm_of(T.raw(x) - np.asarray(x, dtype=float))
    return (n - 1) * r + inner_tol
