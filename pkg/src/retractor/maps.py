"""Catalog of self-maps of a convex body with nonexpansiveness certificates.

A map is a *kind* (the formula) bound to a body plus a certificate saying
how much we trust its Lipschitz constant:

* ``Proved(L)``: ``L`` is an exact (or provably upper) Lipschitz constant.
* ``Sampled``: the largest ratio seen over random pairs stayed <= 1.
* ``Unchecked``: nothing is known; solvers refuse these by default.

Kinds evaluate batches ``(m, dim)`` row by row with no cross-row
arithmetic, so a row's image never depends on what else is in the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce

import numpy as np

from .errors import (
    ContractViolation,
    DomainError,
    NonCommutingError,
    NonexpansiveRejected,
    SelfMapError,
)
from .geometry import ConvexBody, NormedSpace, sample_points
from .harness.oracles import power_iteration_norm, rayleigh_sweep_norm

LIPSCHITZ_SLACK = 1e-9
COMMUTING_THRESHOLD = 1e-8
AFFINE_COMMUTING_ATOL = 1e-12
EVAL_TOL = 1e-6


def _matvec(A, X, diag=None):
    # Column-by-column accumulation instead of BLAS, so each row's rounding
    # is independent of the batch it sits in.
    if diag is not None:
        return X * diag
    Y = X[:, :1] * A[:, 0]
    for k in range(1, A.shape[1]):
        Y += X[:, k:k + 1] * A[:, k]
    return Y


# --------------------------------------------------------------------------
# kinds


@dataclass(frozen=True, eq=False)
class Affine:
    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float)).copy()
        b = np.asarray(self.offset, dtype=float).copy()
        if A.shape != (len(b), len(b)):
            raise ContractViolation(f"affine map needs a square matrix matching offset, got {A.shape}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", b)
        d = np.diagonal(A).copy()
        object.__setattr__(self, "_diag", None if np.any(A - np.diag(d)) else d)

    @property
    def dim(self):
        return len(self.offset)

    def apply(self, X):
        return _matvec(self.matrix, X, self._diag) + self.offset

    def affine(self):
        return self.matrix, self.offset

    def lipschitz(self, space):
        return operator_norm(self.matrix, space)

    def to_dict(self):
        return {"kind": "affine", "matrix": self.matrix.tolist(), "offset": self.offset.tolist()}


def _rotation_matrix(deg):
    q, r = divmod(float(deg), 90.0)
    if r == 0.0:
        c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][int(q) % 4]
    else:
        t = math.radians(deg)
        c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]], dtype=float)


@dataclass(frozen=True, eq=False)
class Rotation2D:
    """Rotation of the first two coordinates about ``center`` by ``angle_deg``.

    Remaining coordinates pass through unchanged.
    """

    dim: int
    angle_deg: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.dim < 2 or len(self.center) != 2:
            raise ContractViolation("Rotation2D needs dim >= 2 and a 2-vector center")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        Q = _rotation_matrix(self.angle_deg)
        c = np.array(self.center)
        object.__setattr__(self, "_q", Q)
        object.__setattr__(self, "_shift", c - Q @ c)

    def apply(self, X):
        Y = X.copy()
        Y[:, :2] = _matvec(self._q, X[:, :2]) + self._shift
        return Y

    def affine(self):
        A = np.eye(self.dim)
        A[:2, :2] = self._q
        b = np.zeros(self.dim)
        b[:2] = self._shift
        return A, b

    def lipschitz(self, space):
        if space.norm == "l2":
            return 1.0, "orthogonal"
        return operator_norm(self.affine()[0], space)

    def to_dict(self):
        return {"kind": "rotation2d", "angle_deg": self.angle_deg, "center": list(self.center)}


@dataclass(frozen=True, eq=False)
class Isometry:
    """Signed coordinate permutation ``y_i = signs[i] * x[permutation[i]]``."""

    permutation: tuple
    signs: tuple

    def __post_init__(self):
        perm = tuple(int(i) for i in self.permutation)
        signs = tuple(float(s) for s in self.signs)
        if sorted(perm) != list(range(len(perm))) or len(signs) != len(perm):
            raise ContractViolation("isometry needs a permutation of range(dim) and one sign per coordinate")
        if any(s not in (1.0, -1.0) for s in signs):
            raise ContractViolation("isometry signs must be +1 or -1")
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "signs", signs)

    @property
    def dim(self):
        return len(self.permutation)

    def apply(self, X):
        return X[:, list(self.permutation)] * np.array(self.signs)

    def affine(self):
        A = np.zeros((self.dim, self.dim))
        A[np.arange(self.dim), self.permutation] = self.signs
        return A, np.zeros(self.dim)

    def lipschitz(self, space):
        if space.norm in ("l1", "l2", "linf"):
            return 1.0, "signed permutation"
        return operator_norm(self.affine()[0], space)

    def to_dict(self):
        return {"kind": "isometry", "permutation": list(self.permutation), "signs": list(self.signs)}


COORD_OPS = ("identity", "clamp", "scale", "shift_clamp")


@dataclass(frozen=True, eq=False)
class CoordWise:
    """Independent 1-Lipschitz scalar maps, one per coordinate.

    ``ops`` entries: ``("identity",)``, ``("clamp", lo, hi)``,
    ``("scale", lam)`` with ``|lam| <= 1``, ``("shift_clamp", s, lo, hi)``.
    Every op compiles to ``clip(scale * x + shift, lo, hi)``.
    """

    ops: tuple

    def __post_init__(self):
        ops = tuple(tuple(op) for op in self.ops)
        n = len(ops)
        scale, shift = np.ones(n), np.zeros(n)
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
        for i, op in enumerate(ops):
            name, args = op[0], tuple(float(a) for a in op[1:])
            if name == "identity" and not args:
                pass
            elif name == "clamp" and len(args) == 2 and args[0] <= args[1]:
                lo[i], hi[i] = args
            elif name == "scale" and len(args) == 1 and abs(args[0]) <= 1:
                scale[i] = args[0]
            elif name == "shift_clamp" and len(args) == 3 and args[1] <= args[2]:
                shift[i], lo[i], hi[i] = args
            else:
                raise ContractViolation(f"bad coordinate op {op!r}")
            ops = ops[:i] + ((name, *args),) + ops[i + 1:]
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "_arrays", (scale, shift, lo, hi))

    @property
    def dim(self):
        return len(self.ops)

    def apply(self, X):
        scale, shift, lo, hi = self._arrays
        return np.clip(X * scale + shift, lo, hi)

    def affine(self):
        if any(op[0] not in ("identity", "scale") for op in self.ops):
            return None
        scale, shift, _, _ = self._arrays
        return np.diag(scale), shift.copy()

    def lipschitz(self, space):
        # absolute norms: coordinatewise L_i-Lipschitz maps are max(L_i)-Lipschitz
        return float(np.abs(self._arrays[0]).max()), "coordinatewise maximum"

    def to_dict(self):
        return {"kind": "coordwise", "ops": [list(op) for op in self.ops]}


@dataclass(frozen=True, eq=False)
class SquareMap:
    """``(x_1, ..., x_d) -> (x_1**2, 0, x_2, ..., x_{d-1})``, a continuous map
    of the unit l1 ball that is *not* nonexpansive (negative control)."""

    dim: int

    def apply(self, X):
        Y = np.zeros_like(X)
        Y[:, 0] = X[:, 0] ** 2
        Y[:, 2:] = X[:, 1:-1]
        return Y

    def affine(self):
        return None

    def lipschitz(self, space):
        return None

    def probe_pairs(self):
        e = np.zeros(self.dim)
        e[0] = 1.0
        return [(e, 0.5 * e)]

    def to_dict(self):
        return {"kind": "square"}


@dataclass(frozen=True, eq=False)
class Composite:
    """Kinds applied in list order: ``steps[0]`` first."""

    steps: tuple

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps or len({s.dim for s in steps}) != 1:
            raise ContractViolation("composite needs at least one step, all of one dimension")
        object.__setattr__(self, "steps", steps)

    @property
    def dim(self):
        return self.steps[0].dim

    def apply(self, X):
        for s in self.steps:
            X = s.apply(X)
        return X

    def affine(self):
        parts = [s.affine() for s in self.steps]
        if any(p is None for p in parts):
            return None
        A, b = np.eye(self.dim), np.zeros(self.dim)
        for Ai, bi in parts:
            A, b = Ai @ A, Ai @ b + bi
        return A, b

    def lipschitz(self, space):
        aff = self.affine()
        if aff is not None:
            return operator_norm(aff[0], space)
        factors = [s.lipschitz(space) for s in self.steps]
        if any(f is None for f in factors):
            return None
        return reduce(lambda a, f: a * f[0], factors, 1.0), "product of factors"

    def probe_pairs(self):
        return [p for s in self.steps for p in getattr(s, "probe_pairs", lambda: [])()]

    def to_dict(self):
        return {"kind": "composite", "steps": [s.to_dict() for s in self.steps]}


def kind_from_dict(d: dict, dim: int):
    k = d.get("kind")
    if k == "affine":
        return Affine(d["matrix"], d["offset"])
    if k == "rotation2d":
        return Rotation2D(dim, float(d["angle_deg"]), tuple(d.get("center", (0.0, 0.0))))
    if k == "isometry":
        return Isometry(d["permutation"], d.get("signs", [1.0] * dim))
    if k == "coordwise":
        return CoordWise(d["ops"])
    if k == "square":
        return SquareMap(dim)
    if k == "composite":
        return Composite([kind_from_dict(s, dim) for s in d["steps"]])
    if k == "identity":
        return CoordWise([("identity",)] * dim)
    raise ContractViolation(f"unknown map kind {k!r}")


# --------------------------------------------------------------------------
# operator norms


def operator_norm(A, space: NormedSpace):
    """Induced norm of the linear map ``A`` under ``space``'s norm.

    Returns ``(value, method)``.  l1 / linf / weighted l1 use the exact
    column / row formulas; l2 uses power iteration, cross-checked by a
    brute-force sweep of the unit sphere when ``dim <= 3``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a = np.abs(A)
    if space.norm == "l1":
        return float(a.sum(axis=0).max()), "max column sum"
    if space.norm == "linf":
        return float(a.sum(axis=1).max()), "max row sum"
    if space.norm == "weighted_l1":
        w = np.asarray(space.weights)
        return float(((w[:, None] * a).sum(axis=0) / w).max()), "weighted column sum"
    res = power_iteration_norm(A, rtol=1e-10)
    value = res.value
    if A.shape[1] <= 3:
        sweep = rayleigh_sweep_norm(A).value
        if sweep > value * (1 + 1e-9) + 1e-12 or sweep < value * (1 - 1e-5) - 1e-12:
            raise ContractViolation(
                f"power iteration ({value!r}) and sphere sweep ({sweep!r}) disagree"
            )
        return value, "power iteration, sweep-checked"
    return value, "power iteration"


# --------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Proved:
    value: float
    method: str = ""

    def to_dict(self):
        return {"kind": "proved", "value": self.value, "method": self.method}


@dataclass(frozen=True)
class Sampled:
    pairs: int
    max_ratio: float
    witness: tuple | None = None

    def to_dict(self):
        w = None if self.witness is None else [list(map(float, p)) for p in self.witness]
        return {"kind": "sampled", "pairs": self.pairs, "max_ratio": self.max_ratio, "witness": w}


@dataclass(frozen=True)
class Unchecked:
    def to_dict(self):
        return {"kind": "unchecked"}


@dataclass(frozen=True)
class ProvedAffine:
    max_defect: float

    def to_dict(self):
        return {"kind": "proved_affine", "max_defect": self.max_defect}


@dataclass(frozen=True)
class SampledCommuting:
    max_defect: float
    points: int

    def to_dict(self):
        return {"kind": "sampled", "max_defect": self.max_defect, "points": self.points}


# --------------------------------------------------------------------------
# maps and families


@dataclass(frozen=True, eq=False)
class CertifiedMap:
    kind: object
    body: ConvexBody
    certificate: object = field(default_factory=Unchecked)
    name: str = "T"

    def __post_init__(self):
        if self.kind.dim != self.body.dim:
            raise ContractViolation(
                f"map {self.name!r} has dimension {self.kind.dim}, body has {self.body.dim}"
            )

    @property
    def space(self):
        return self.body.space

    @property
    def certified(self):
        return not isinstance(self.certificate, Unchecked)

    @property
    def known_expansive(self):
        return isinstance(self.kind, SquareMap)

    def raw(self, X):
        """Unchecked evaluation of a point or batch (solver inner loops)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.kind.apply(X[None, :])[0]
        return self.kind.apply(X)

    def __call__(self, x):
        return eval_map(self, x)

    def with_certificate(self, cert):
        return replace(self, certificate=cert)

    def to_dict(self):
        d = self.kind.to_dict()
        d["name"] = self.name
        return d


def eval_map(m: CertifiedMap, x, tol=EVAL_TOL):
    """Evaluate ``m`` at ``x`` with domain and self-map checks at ``tol``."""
    x = m.space.check(x)
    din = np.atleast_1d(m.body.distance(x))
    if np.any(din > tol):
        raise DomainError(f"input to map {m.name!r} lies {din.max():.3e} outside its body")
    y = m.raw(x)
    dout = np.atleast_1d(m.body.distance(y))
    if np.any(dout > tol):
        k = int(np.argmax(dout))
        xs, ys = np.atleast_2d(x), np.atleast_2d(y)
        raise SelfMapError(m.name, xs[k], ys[k], float(dout[k]))
    return y


def check_self_map(m: CertifiedMap, samples=1000, seed=0, tol=1e-9):
    """Sampled self-map check; returns the largest image distance to the body."""
    X = sample_points(m.body, samples, seed)
    Y = m.raw(X)
    d = np.atleast_1d(m.body.distance(Y))
    k = int(np.argmax(d))
    if d[k] > tol:
        raise SelfMapError(m.name, X[k], Y[k], float(d[k]))
    return float(d[k])


def _sample_pairs(m: CertifiedMap, samples, seed):
    rng = np.random.default_rng(seed)
    body = m.body
    X = sample_points(body, samples + 1, seed)[1:]
    Y = sample_points(body, samples + 1, seed + 1)[1:]
    # every other pair is a short chord, to catch local expansion
    t = rng.uniform(1e-4, 1e-2, samples)[:, None]
    Y[::2] = X[::2] + t[::2] * (Y[::2] - X[::2])
    probes = [(x, y) for x, y in getattr(m.kind, "probe_pairs", lambda: [])()
              if body.contains(x) and body.contains(y)]
    if probes:
        X = np.vstack([np.array([p[0] for p in probes]), X])
        Y = np.vstack([np.array([p[1] for p in probes]), Y])
    return X, Y, len(probes)


def certify_nonexpansive(m: CertifiedMap, samples=1000, seed=0):
    """Issue a nonexpansiveness certificate or raise NonexpansiveRejected."""
    lip = m.kind.lipschitz(m.space)
    if lip is not None:
        value, method = lip
        if value > 1 + LIPSCHITZ_SLACK:
            raise NonexpansiveRejected(m.name, value)
        return Proved(float(value), method)
    X, Y, n_probe = _sample_pairs(m, samples, seed)
    num = m.space.norm_of(m.raw(X) - m.raw(Y))
    den = m.space.norm_of(X - Y)
    ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    bad = np.nonzero(ratio[:n_probe] > 1 + LIPSCHITZ_SLACK)[0]
    # a failing documented probe pair is the preferred witness
    k = int(bad[0]) if bad.size else int(np.argmax(ratio))
    witness = (X[k].copy(), Y[k].copy())
    if ratio[k] > 1 + LIPSCHITZ_SLACK:
        raise NonexpansiveRejected(m.name, float(ratio[k]), witness)
    k = int(np.argmax(ratio))
    witness = (X[k].copy(), Y[k].copy())
    return Sampled(len(X), float(ratio[k]), witness)


def certify(m: CertifiedMap, samples=1000, seed=0) -> CertifiedMap:
    return m.with_certificate(certify_nonexpansive(m, samples, seed))


@dataclass(frozen=True, eq=False)
class CommutingFamily:
    maps: tuple
    certificate: object = field(default_factory=Unchecked)

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ContractViolation("a family needs at least one map")
        if any(m.body is not maps[0].body and m.body.to_dict() != maps[0].body.to_dict()
               for m in maps):
            raise ContractViolation("all family members must share one body")
        object.__setattr__(self, "maps", maps)

    def __len__(self):
        return len(self.maps)

    def __iter__(self):
        return iter(self.maps)

    def __getitem__(self, i):
        return self.maps[i]

    @property
    def body(self):
        return self.maps[0].body

    @property
    def space(self):
        return self.body.space

    def residuals(self, Y):
        """``||T_i y - y||`` for each member; shape ``(m, n_maps)`` for a batch."""
        Y = np.asarray(Y, dtype=float)
        cols = [self.space.norm_of(T.raw(Y) - Y) for T in self.maps]
        return np.array(cols) if Y.ndim == 1 else np.column_stack(cols)


def certify_commuting(family: CommutingFamily, samples=1000, seed=0):
    """Commutativity certificate; raises NonCommutingError with an (i, j, x) witness.

    Compositions are evaluated from the formulas without domain checks, so
    maps that are not self-maps of the body can still be compared.
    """
    maps = family.maps
    affs = [m.kind.affine() for m in maps]
    n = len(maps)
    if all(a is not None for a in affs):
        worst = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                (Ai, bi), (Aj, bj) = affs[i], affs[j]
                d = max(np.abs(Ai @ Aj - Aj @ Ai).max(), np.abs(Ai @ bj + bi - Aj @ bi - bj).max())
                worst = max(worst, float(d))
        if worst <= AFFINE_COMMUTING_ATOL:
            return ProvedAffine(worst)
    X = sample_points(family.body, samples, seed)
    worst, wit = 0.0, None
    for i in range(n):
        for j in range(i + 1, n):
            Ti, Tj = maps[i].raw, maps[j].raw
            d = family.space.norm_of(Ti(Tj(X)) - Tj(Ti(X)))
            # first near-maximal point, so ties resolve to the body center
            k = int(np.argmax(d >= d.max() * (1 - 1e-9)))
            if d[k] > worst:
                worst, wit = float(d[k]), (i, j, X[k].copy())
    if worst > COMMUTING_THRESHOLD:
        raise NonCommutingError(*wit, worst)
    return SampledCommuting(worst, len(X))


def square_map_example(d: int, name="square") -> CertifiedMap:
    """The truncated squaring map on the unit l1 ball of ``R^d``.

    Its fixed points in the truncation are ``(1, 0, ..., 0)`` and the origin;
    ``(-1, 0, ..., 0)`` maps to ``(1, 0, ..., 0)``.  Certificate: Unchecked.
    """
    if d < 2:
        raise ContractViolation("square map needs d >= 2")
    body = ConvexBody.ball(NormedSpace(d, "l1"))
    return CertifiedMap(SquareMap(d), body, Unchecked(), name)


def identity_map(body: ConvexBody, name="identity") -> CertifiedMap:
    return CertifiedMap(CoordWise([("identity",)] * body.dim), body, Proved(1.0, "identity"), name)
