"""Krasnoselskii-Mann averaging and asymptotic-regularity monitoring.

For nonexpansive ``S`` on a bounded convex set and ``gamma`` in (0, 1),
the averaged iteration ``z <- (1 - gamma) z + gamma S z`` is asymptotically
regular: its step norms decrease monotonically to zero.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, KMTimeout

DEFAULT_GAMMA = 0.5
DEFAULT_MAX_ITER = 1_000_000
MONOTONE_SLACK = 1e-10

STEP_TOL, RESIDUAL_TOL, MAX_ITER = "step_tol", "residual_tol", "max_iter"


@dataclass
class KMTrace:
    gamma: float
    step_tol: float
    iterates_kept: deque = field(default_factory=lambda: deque(maxlen=8), repr=False)
    step_norms: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    stop_reason: str | None = None
    row_iterations: np.ndarray | None = field(default=None, repr=False)

    @property
    def iterations(self):
        return len(self.step_norms)

    def rows(self, stage=0):
        """CSV rows ``(stage, iteration, step_norm, residual)``."""
        return [(stage, k, s, r) for k, (s, r) in enumerate(zip(self.step_norms, self.residuals))]


def km_iterate(S, x0, gamma=DEFAULT_GAMMA, step_tol=1e-10, max_iter=DEFAULT_MAX_ITER,
               space=None, keep=8, trace=None):
    """Run the averaged iteration of ``S`` from ``x0`` (a point or a batch).

    ``S`` is a CertifiedMap or a row-wise callable on ``(m, dim)`` arrays;
    a plain callable needs ``space``.  A row stops once its step norm is
    ``<= step_tol`` or its residual ``||S z - z||`` is ``<= step_tol / gamma``;
    stopped rows are dropped from later evaluations of ``S``.

    Returns ``(z, KMTrace)``.  The trace stores, per iteration, the largest
    step and residual over the rows still running.  Pass a previous trace
    (and its last point as ``x0``) to resume.  Raises KMTimeout, carrying the
    trace and current point, after ``max_iter`` iterations.
    """
    if not 0.0 < gamma < 1.0:
        raise ContractViolation(f"gamma must lie in (0, 1), got {gamma}")
    if step_tol <= 0 or max_iter < 1:
        raise ContractViolation("step_tol must be positive and max_iter at least 1")
    if space is None:
        space = S.space
    fn = S.raw if hasattr(S, "raw") else S
    single = np.ndim(x0) == 1
    Z = np.array(space.check(x0), dtype=float, ndmin=2)
    if trace is None:
        trace = KMTrace(gamma, step_tol, deque(maxlen=keep))
    active = np.arange(len(Z))
    iters = np.zeros(len(Z), dtype=int)
    res_tol = step_tol / gamma
    for _ in range(max_iter):
        Za = Z[active]
        R = fn(Za) - Za
        Zn = Za + gamma * R
        res = space.norm_of(R)
        step = space.norm_of(Zn - Za)
        Z[active] = Zn
        iters[active] += 1
        trace.step_norms.append(float(step.max()))
        trace.residuals.append(float(res.max()))
        trace.iterates_kept.append(Z[0].copy() if single else Z.copy())
        by_step = step <= step_tol
        done = by_step | (res <= res_tol)
        if done.all():
            trace.stop_reason = STEP_TOL if by_step[-1] else RESIDUAL_TOL
            active = active[:0]
            break
        active = active[~done]
    if active.size:
        trace.stop_reason = MAX_ITER
        trace.row_iterations = iters
        raise KMTimeout(trace, Z[0] if single else Z)
    trace.row_iterations = iters
    return (Z[0] if single else Z), trace


def averaged(S, gamma):
    """The averaged map ``z -> z + gamma (S z - z)`` as a row-wise callable."""
    fn = S.raw if hasattr(S, "raw") else S
    return lambda Z: Z + gamma * (fn(Z) - Z)


@dataclass
class RegularityReport:
    passed: bool
    monotone: bool
    first_violation: int | None
    worst_increase: float
    final_step: float
    step_tol: float
    stop_reason: str | None
    tail: list

    def to_dict(self):
        return dict(self.__dict__)


def asymptotic_regularity_check(trace: KMTrace, slack=MONOTONE_SLACK, tail=20) -> RegularityReport:
    """Audit a KM trace: step norms nonincreasing (up to ``slack``) and, unless
    the run timed out, a final step no larger than the step tolerance.

    A violation is reported, not raised; ``first_violation`` is the index
    ``k`` with ``step[k+1] > step[k] + slack``.
    """
    s = np.asarray(trace.step_norms)
    if s.size == 0:
        raise ContractViolation("empty trace")
    inc = np.diff(s)
    bad = np.nonzero(inc > slack)[0]
    monotone = bad.size == 0
    final_ok = True
    if trace.stop_reason != MAX_ITER:
        final_ok = s[-1] <= trace.step_tol or trace.residuals[-1] <= trace.step_tol / trace.gamma
    return RegularityReport(
        passed=bool(monotone and final_ok),
        monotone=bool(monotone),
        first_violation=None if monotone else int(bad[0]),
        worst_increase=float(inc.max()) if inc.size else 0.0,
        final_step=float(s[-1]),
        step_tol=trace.step_tol,
        stop_reason=trace.stop_reason,
        tail=[float(v) for v in s[-tail:]],
    )
