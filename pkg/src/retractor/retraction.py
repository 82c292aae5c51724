"""Approximate nonexpansive retractions onto the common fixed points of a
finite commuting family ``T_1, ..., T_N``.

The construction is recursive:

* ``R_1 = F_{n*}`` for ``T_1`` (the anchored resolvent at an accuracy
  index chosen from the stage tolerance);
* ``R_{k+1} x`` is the limit of the averaged iteration of
  ``S = T_{k+1} o R_k`` started at ``x`` with ``gamma = 1/2``, i.e. of
  ``z <- z/2 + T_{k+1} R_k z / 2``.

Exact limits are replaced by tolerance-driven stopping.  Stage ``k`` of
``N`` aims at residual ``eps_k = eps / (2 (N - k + 1))``; the final output is
checked against ``max_i ||T_i y - y|| <= eps`` on every call and re-solved
with tightened tolerances when the check fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ContractFailure,
    ContractViolation,
    KMTimeout,
    NonConvergence,
    PartialBuildError,
    UncertifiedMapError,
)
from .km import DEFAULT_GAMMA, DEFAULT_MAX_ITER, km_iterate
from .maps import CommutingFamily, Unchecked
from .resolvent import DEFAULT_INNER_MAX_ITER, DEFAULT_RELAX, accuracy_index, resolve

REFINE_FACTOR = 0.1


@dataclass(frozen=True, eq=False)
class Leaf:
    map: object
    n: int
    inner_tol: float
    relax: float = DEFAULT_RELAX
    max_iter: int = DEFAULT_INNER_MAX_ITER
    eps: float = 0.0

    depth = 1

    def describe(self):
        return {"stage": 1, "type": "resolvent", "map": self.map.name, "n": self.n,
                "inner_tol": self.inner_tol, "relax": self.relax, "eps": self.eps}


@dataclass(frozen=True, eq=False)
class Node:
    previous: object
    new_map: object
    gamma: float
    step_tol: float
    max_iter: int
    eps: float

    @property
    def depth(self):
        return self.previous.depth + 1

    def describe(self):
        return {"stage": self.depth, "type": "averaged", "map": self.new_map.name,
                "gamma": self.gamma, "step_tol": self.step_tol, "max_iter": self.max_iter,
                "eps": self.eps}


def stages_of(node):
    out = []
    while isinstance(node, Node):
        out.append(node)
        node = node.previous
    out.append(node)
    return out[::-1]


@dataclass
class StageStats:
    calls: int = 0
    rows: int = 0
    iterations: int = 0
    max_iterations: int = 0

    def add(self, rows, its, max_its):
        self.calls += 1
        self.rows += rows
        self.iterations += its
        self.max_iterations = max(self.max_iterations, max_its)


@dataclass
class ApplyDiagnostics:
    residuals: np.ndarray
    max_residual: float
    eps: float
    refinements: np.ndarray
    stages: list
    traces: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {"residuals": self.residuals.tolist(), "max_residual": self.max_residual,
                "eps": self.eps, "refinements": self.refinements.tolist(),
                "stages": [s.__dict__ for s in self.stages]}


@dataclass(frozen=True, eq=False)
class RetractionProc:
    """A computable approximate retraction.

    Call it (or use :func:`apply`) on a point or an ``(m, dim)`` batch.
    Outputs satisfy ``max_i ||T_i y - y|| <= eps`` for the family members;
    violations trigger up to ``refinements`` re-solves with every tolerance
    scaled by ``REFINE_FACTOR`` before ContractFailure is raised.
    """

    root: object
    family: tuple
    eps: float
    refinements: int = 2
    allow_uncertified: bool = False
    build_report: dict = field(default_factory=dict, compare=False)

    @property
    def stages(self):
        return stages_of(self.root)

    @property
    def space(self):
        return self.family[0].space

    def __call__(self, x):
        return apply(self, x)[0]

    def tightened(self, factor=REFINE_FACTOR):
        return replace(self, root=_tighten(self.root, factor, self.family[0].body.diam))

    def describe(self):
        return [s.describe() for s in self.stages]


def _tighten(node, f, diam):
    if isinstance(node, Leaf):
        eps = node.eps * f
        inner = node.inner_tol * f
        n = accuracy_index(diam, max(eps - 2 * inner, eps / 10)) if diam > 0 else 1
        return replace(node, eps=eps, inner_tol=inner, n=n)
    return replace(node, previous=_tighten(node.previous, f, diam),
                   step_tol=node.step_tol * f, eps=node.eps * f)


def _evaluate(node, X, stats, allow, traces=None):
    if isinstance(node, Leaf):
        try:
            res = resolve(node.map, X, node.n, node.inner_tol, node.relax, node.max_iter,
                          allow_uncertified=allow, record=traces is not None)
        except NonConvergence as exc:
            raise PartialBuildError(1, exc) from exc
        info = res.inner
        stats[0].add(len(X), int(info.row_iterations.sum()), info.iterations_used)
        if traces is not None and 1 not in traces:
            traces[1] = [(1, k, s, s / node.relax) for k, s in enumerate(info.steps)]
        return res.point
    k = node.depth
    prev, T = node.previous, node.new_map.raw

    def S(Z):
        return T(_evaluate(prev, Z, stats, allow))

    try:
        Y, tr = km_iterate(S, X, node.gamma, node.step_tol, node.max_iter, space=node.new_map.space)
    except KMTimeout as exc:
        raise PartialBuildError(k, exc) from exc
    stats[k - 1].add(len(X), int(tr.row_iterations.sum()), int(tr.row_iterations.max()))
    if traces is not None:
        traces[k] = tr.rows(stage=k)
        # lower stages get a standalone trace from the same anchors
        _evaluate(prev, X, [StageStats() for _ in stats], allow, traces)
    return Y


def apply(R: RetractionProc, x, trace=False):
    """Apply ``R`` to a point or batch; returns ``(y, ApplyDiagnostics)``.

    With ``trace=True`` the diagnostics carry per-stage iteration traces
    (stage ``k``'s own run from the same anchors) as CSV-ready rows.
    """
    space = R.space
    X = space.check(x)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    family = CommutingFamily(R.family) if not isinstance(R.family, CommutingFamily) else R.family
    N = len(R.stages)
    stats = [StageStats() for _ in range(N)]
    traces = {} if trace else None
    Y = _evaluate(R.root, X, stats, R.allow_uncertified, traces)
    res = family.residuals(Y)
    refined = np.zeros(len(X), dtype=int)
    proc = R
    for level in range(1, R.refinements + 1):
        bad = res.max(axis=1) > R.eps
        if not bad.any():
            break
        proc = proc.tightened()
        Y[bad] = _evaluate(proc.root, X[bad], stats, R.allow_uncertified)
        res[bad] = family.residuals(Y[bad])
        refined[bad] = level
    worst = float(res.max())
    diag = ApplyDiagnostics(res, worst, R.eps, refined, stats,
                            {k: v for k, v in sorted((traces or {}).items())})
    if worst > R.eps:
        raise ContractFailure(
            f"residual {worst:.3e} exceeds eps={R.eps:.3e} after {R.refinements} refinements",
            residuals=res, trace=diag.traces or None,
        )
    if single:
        diag.residuals = res[0]
        return Y[0], diag
    return Y, diag


def stage_output(R: RetractionProc, k, X):
    """``R_k X`` for the stage-``k`` prefix of ``R`` (no contract check or refinement)."""
    node = R.stages[k - 1]
    X = np.atleast_2d(R.space.check(X))
    return _evaluate(node, X, [StageStats() for _ in range(k)], R.allow_uncertified)


def stage_budget(eps, N):
    """Per-stage residual targets ``eps / (2 (N - k + 1))`` for ``k = 1..N``."""
    return [eps / (2 * (N - k + 1)) for k in range(1, N + 1)]


def build_retraction(family, eps, km_step_tol=None, max_iter=DEFAULT_MAX_ITER,
                     gamma=DEFAULT_GAMMA, inner_tol=None, relax=DEFAULT_RELAX,
                     refinements=2, budget=None, allow_uncertified=False, probe=True):
    """Build the recursive retraction for a certified commuting family.

    Stage 1 is the resolvent of ``T_1`` with inner tolerance ``eps_1 / 10``
    (or ``inner_tol``) and accuracy index ``ceil(diam / (eps_1 - 2 inner_tol))``,
    so its outputs have ``T_1``-residual at most ``eps_1``.  Stage ``k > 1``
    runs the averaged iteration with step tolerance
    ``min(km_step_tol, eps_k / 4)``.

    With ``probe=True`` the procedure is run once on the body center so that
    stage failures surface here as PartialBuildError.
    """
    if not isinstance(family, CommutingFamily):
        family = CommutingFamily(tuple(family))
    if eps <= 0:
        raise ContractViolation("eps must be positive")
    if not allow_uncertified:
        bad = [m.name for m in family if not m.certified]
        if bad:
            raise UncertifiedMapError(f"uncertified family members: {bad}")
        if isinstance(family.certificate, Unchecked):
            raise UncertifiedMapError("family has no commutativity certificate")
    N = len(family)
    budget = stage_budget(eps, N) if budget is None else list(budget)
    if len(budget) != N:
        raise ContractViolation("budget needs one tolerance per family member")
    diam = family.body.diam
    e1 = budget[0]
    itol = e1 / 10 if inner_tol is None else inner_tol
    if 2 * itol >= e1:
        raise ContractViolation("inner_tol must be below half the first stage tolerance")
    n = accuracy_index(diam, e1 - 2 * itol) if diam > 0 else 1
    node = Leaf(family[0], n, itol, relax, DEFAULT_INNER_MAX_ITER, e1)
    for T, ek in zip(family.maps[1:], budget[1:]):
        st = ek / 4 if km_step_tol is None else min(km_step_tol, ek / 4)
        node = Node(node, T, gamma, st, max_iter, ek)
    R = RetractionProc(node, family.maps, eps, refinements, allow_uncertified)
    report = {"eps": eps, "budget": budget, "stages": R.describe()}
    if probe:
        _, diag = apply(R, family.body.center())
        report["probe"] = {"max_residual": diag.max_residual,
                           "stages": [s.__dict__ for s in diag.stages]}
    object.__setattr__(R, "build_report", report)
    return R


def fixed_set_identity_check(family, R, extra, samples=20, seed=0, c=10.0, eps=None):
    """Audit ``Fix(family) ∩ Fix(extra) = Fix(extra o R)`` at tolerance scale eps.

    Forward inclusion: points built as approximate common fixed points of the
    family plus ``extra`` (a retraction of the enlarged family applied to
    samples) must satisfy ``||extra(R x) - x|| <= c eps``.
    Reverse inclusion: approximate fixed points of ``extra o R`` (found by the
    averaged iteration from samples) must have every family residual and the
    ``extra`` residual ``<= c eps``.
    """
    from .geometry import sample_points
    from .maps import certify_commuting

    if not isinstance(family, CommutingFamily):
        family = CommutingFamily(tuple(family))
    eps = R.eps if eps is None else eps
    space, body = family.space, family.body
    X = sample_points(body, samples, seed)
    tol = eps / 2

    big = CommutingFamily(family.maps + (extra,))
    big = replace(big, certificate=certify_commuting(big, seed=seed))
    Rbig = build_retraction(big, tol, allow_uncertified=R.allow_uncertified, probe=False)
    P, _ = apply(Rbig, X)
    fwd = space.norm_of(extra.raw(R(P)) - P)

    def S(Z):
        return extra.raw(R(Z))

    Q, _ = km_iterate(S, X, DEFAULT_GAMMA, tol / 2, DEFAULT_MAX_ITER, space=space)
    fixed_resid = space.norm_of(S(Q) - Q)
    rev = np.maximum(family.residuals(Q).max(axis=1), space.norm_of(extra.raw(Q) - Q))
    bound = c * eps
    return {
        "passed": bool(fwd.max() <= bound and rev.max() <= bound),
        "bound": bound,
        "tol": tol,
        "forward": {"points": P.tolist(), "margins": (bound - fwd).tolist(),
                    "max_gap": float(fwd.max())},
        "reverse": {"points": Q.tolist(), "fixed_residual": fixed_resid.tolist(),
                    "margins": (bound - rev).tolist(), "max_residual": float(rev.max())},
    }

