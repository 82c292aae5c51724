"""Finite-dimensional normed spaces and the compact convex bodies maps act on.

Points are plain ``numpy`` float arrays.  Every routine accepts a single
point of shape ``(dim,)`` or a batch of shape ``(m, dim)``; norms and
distances are taken along the last axis.

Supported norms are ``l1``, ``l2``, ``linf`` and ``weighted_l1``.  All four
are absolute norms (``|x_i| <= |y_i|`` for all ``i`` implies
``||x|| <= ||y||``), a fact several closed forms below rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import ContractViolation

NORMS = ("l1", "l2", "linf", "weighted_l1")
SHAPES = ("ball", "box", "simplex", "hull")

# Relative rounding allowance used by membership on top of the caller's tol.
ROUNDING_RTOL = 8 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class NormedSpace:
    dim: int
    norm: str = "l2"
    weights: tuple | None = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ContractViolation(f"dim must be a positive integer, got {self.dim!r}")
        if self.norm not in NORMS:
            raise ContractViolation(f"unknown norm {self.norm!r}; expected one of {NORMS}")
        if self.norm == "weighted_l1":
            if self.weights is None or len(self.weights) != self.dim:
                raise ContractViolation("weighted_l1 needs one weight per coordinate")
            if any(not w > 0 for w in self.weights):
                raise ContractViolation("weights must be strictly positive")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        elif self.weights is not None:
            raise ContractViolation(f"weights only apply to weighted_l1, not {self.norm}")
        object.__setattr__(self, "_w", None if self.weights is None else np.array(self.weights))

    def __eq__(self, other):
        return (
            isinstance(other, NormedSpace)
            and (self.dim, self.norm, self.weights) == (other.dim, other.norm, other.weights)
        )

    def __hash__(self):
        return hash((self.dim, self.norm, self.weights))

    def check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim not in (1, 2) or v.shape[-1] != self.dim:
            raise ContractViolation(f"expected vectors of length {self.dim}, got shape {v.shape}")
        return v

    def norm_of(self, v):
        """Norm along the last axis; a float for one vector, an array for a batch."""
        v = self.check(v)
        a = np.abs(v)
        if self.norm == "l1":
            out = a.sum(axis=-1)
        elif self.norm == "l2":
            out = np.sqrt((v * v).sum(axis=-1))
        elif self.norm == "linf":
            out = a.max(axis=-1)
        else:
            out = (a * self._w).sum(axis=-1)
        return float(out) if v.ndim == 1 else out

    def row_norms(self, V):
        """Unchecked norms of the rows of a 2-d float array (solver inner loops)."""
        if self.norm == "l2":
            return np.sqrt((V * V).sum(axis=1))
        if self.norm == "l1":
            return np.abs(V).sum(axis=1)
        if self.norm == "linf":
            return np.abs(V).max(axis=1)
        return (np.abs(V) * self._w).sum(axis=1)

    def dist(self, p, q):
        return self.norm_of(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))

    def to_dict(self) -> dict:
        d = {"dim": self.dim, "norm": self.norm}
        if self.weights is not None:
            d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NormedSpace":
        return cls(int(d["dim"]), d.get("norm", "l2"), d.get("weights"))


def norm_of(space: NormedSpace, v):
    return space.norm_of(v)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A compact convex body: a norm ball, a box, a scaled simplex or a polytope.

    Use the ``ball``/``box``/``simplex``/``hull`` constructors.  ``params``
    holds the shape data as numpy arrays; ``diam`` is cached at construction.
    """

    space: NormedSpace
    shape: str
    params: dict = field(default_factory=dict)
    diam: float = 0.0

    @classmethod
    def ball(cls, space, center=None, radius=1.0):
        center = np.zeros(space.dim) if center is None else space.check(center).copy()
        if center.ndim != 1 or not radius > 0:
            raise ContractViolation("ball needs one center point and a positive radius")
        return cls._make(space, "ball", center=center, radius=float(radius))

    @classmethod
    def box(cls, space, lower, upper):
        lower, upper = space.check(lower).copy(), space.check(upper).copy()
        if lower.ndim != 1 or np.any(lower > upper):
            raise ContractViolation("box needs lower <= upper coordinatewise")
        return cls._make(space, "box", lower=lower, upper=upper)

    @classmethod
    def simplex(cls, space, scale=1.0):
        if not scale > 0:
            raise ContractViolation("simplex scale must be positive")
        return cls._make(space, "simplex", scale=float(scale))

    @classmethod
    def hull(cls, space, vertices):
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if v.shape[0] < 1 or v.shape[1] != space.dim:
            raise ContractViolation(f"hull needs a nonempty (k, {space.dim}) vertex array")
        return cls._make(space, "hull", vertices=v.copy())

    @classmethod
    def _make(cls, space, shape, **params):
        for a in params.values():
            if isinstance(a, np.ndarray):
                a.setflags(write=False)
        body = cls(space, shape, params)
        object.__setattr__(body, "diam", _diameter(body))
        return body

    @property
    def dim(self) -> int:
        return self.space.dim

    def center(self) -> np.ndarray:
        """Center of a ball or box, barycenter of a simplex or vertex mean of a hull."""
        p = self.params
        if self.shape == "ball":
            return p["center"].copy()
        if self.shape == "box":
            return 0.5 * (p["lower"] + p["upper"])
        if self.shape == "simplex":
            return np.full(self.dim, p["scale"] / self.dim)
        return p["vertices"].mean(axis=0)

    def vertices(self) -> np.ndarray | None:
        if self.shape == "simplex":
            return self.params["scale"] * np.eye(self.dim)
        if self.shape == "hull":
            return self.params["vertices"]
        return None

    def distance(self, p):
        """Distance from ``p`` (point or batch) to the body, in the body's norm."""
        p = self.space.check(p)
        prm = self.params
        if self.shape == "ball":
            d = self.space.norm_of(p - prm["center"]) - prm["radius"]
            return np.maximum(d, 0.0) if p.ndim == 2 else max(0.0, d)
        if self.shape == "box":
            # the coordinatewise clamp is nearest for every absolute norm
            return self.space.norm_of(p - np.clip(p, prm["lower"], prm["upper"]))
        if p.ndim == 2:
            return np.array([self.distance(row) for row in p])
        return _distance(self, p)

    def contains(self, p, tol=0.0, rtol=ROUNDING_RTOL):
        return membership(self, p, tol, rtol)

    def to_dict(self) -> dict:
        p = self.params
        if self.shape == "ball":
            return {"shape": "ball", "center": p["center"].tolist(), "radius": p["radius"]}
        if self.shape == "box":
            return {"shape": "box", "lower": p["lower"].tolist(), "upper": p["upper"].tolist()}
        if self.shape == "simplex":
            return {"shape": "simplex", "scale": p["scale"]}
        return {"shape": "hull", "vertices": p["vertices"].tolist()}

    @classmethod
    def from_dict(cls, space: NormedSpace, d: dict) -> "ConvexBody":
        shape = d.get("shape")
        if shape == "ball":
            return cls.ball(space, d.get("center"), d.get("radius", 1.0))
        if shape == "box":
            return cls.box(space, d["lower"], d["upper"])
        if shape == "simplex":
            return cls.simplex(space, d.get("scale", 1.0))
        if shape == "hull":
            return cls.hull(space, d["vertices"])
        raise ContractViolation(f"unknown body shape {shape!r}; expected one of {SHAPES}")


def membership(body: ConvexBody, p, tol=0.0, rtol=ROUNDING_RTOL):
    """True iff ``p`` lies within ``tol`` of ``body``.

    ``rtol`` is a rounding allowance relative to the body's size, so that
    boundary points produced in floating point are not rejected at ``tol=0``.
    Returns a bool for one point and a boolean array for a batch.
    """
    if tol < 0:
        raise ContractViolation("tol must be nonnegative")
    slack = tol + rtol * max(1.0, body.diam, _scale(body))
    d = body.distance(p)
    return bool(d <= slack) if np.ndim(d) == 0 else d <= slack


def diameter(body: ConvexBody) -> float:
    return body.diam


def sample_points(body: ConvexBody, count: int, seed: int) -> np.ndarray:
    """``count`` points of ``body``, the center first, the rest drawn from ``seed``."""
    if count < 1:
        raise ContractViolation("count must be at least 1")
    rng = np.random.default_rng(seed)
    out = np.empty((count, body.dim))
    out[0] = body.center()
    m = count - 1
    if m == 0:
        return out
    p, d = body.params, body.dim
    if body.shape == "ball":
        kind = body.space.norm
        if kind == "l2":
            g = rng.standard_normal((m, d))
        elif kind == "linf":
            g = rng.uniform(-1.0, 1.0, (m, d))
        else:
            g = rng.laplace(size=(m, d))
        n = body.space.norm_of(g)
        n[n == 0] = 1.0
        r = p["radius"] * rng.uniform(0.0, 1.0, m) ** (1.0 / d)
        out[1:] = p["center"] + g / n[:, None] * r[:, None]
    elif body.shape == "box":
        out[1:] = rng.uniform(p["lower"], p["upper"], (m, d))
    elif body.shape == "simplex":
        out[1:] = p["scale"] * rng.dirichlet(np.ones(d), m)
    else:
        v = p["vertices"]
        out[1:] = rng.dirichlet(np.ones(len(v)), m) @ v
    return out


def _scale(body):
    p = body.params
    if body.shape == "ball":
        return float(np.abs(p["center"]).max()) + p["radius"]
    if body.shape == "box":
        return float(max(np.abs(p["lower"]).max(), np.abs(p["upper"]).max()))
    if body.shape == "simplex":
        return p["scale"]
    return float(np.abs(p["vertices"]).max())


def _diameter(body):
    space, p = body.space, body.params
    if body.shape == "ball":
        return 2.0 * p["radius"]
    if body.shape == "box":
        # absolute norms: the farthest pair of box points differs by upper - lower
        return space.norm_of(p["upper"] - p["lower"])
    if body.shape == "simplex":
        if body.dim == 1:
            return 0.0
        s = p["scale"]
        if space.norm == "l1":
            return 2.0 * s
        if space.norm == "l2":
            return float(np.sqrt(2.0)) * s
        if space.norm == "linf":
            return s
        w = np.sort(np.asarray(space.weights))
        return s * float(w[-1] + w[-2])
    v = p["vertices"]
    if len(v) == 1:
        return 0.0
    return max(space.dist(a, b) for a, b in combinations(v, 2))


def _distance(body, p):
    space, prm = body.space, body.params
    if body.shape == "simplex":
        return _simplex_distance(space, p, prm["scale"])
    return _hull_distance(space, p, prm["vertices"])


def project_simplex_l2(p, scale):
    """Euclidean projection onto ``{q >= 0, sum q = scale}`` (sort-based)."""
    u = np.sort(p)[::-1]
    css = np.cumsum(u) - scale
    k = np.arange(1, len(p) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(p - theta, 0.0)


def _simplex_distance(space, p, s):
    if space.norm == "l2":
        return space.dist(p, project_simplex_l2(p, s))
    if space.norm == "l1":
        neg = -p[p < 0].sum()
        return float(neg + abs(p[p > 0].sum() - s))
    if space.norm == "linf":
        return _simplex_linf_distance(p, s)
    return _hull_distance(space, p, s * np.eye(len(p)))


def _simplex_linf_distance(p, s):
    # Feasibility of radius t: each q_i ranges over [max(p_i-t,0), max(p_i+t,0)]
    # and the ranges must straddle the required total s.  Monotone in t.
    def feasible(t):
        lo = np.maximum(p - t, 0.0).sum()
        hi = np.maximum(p + t, 0.0).sum()
        return lo <= s <= hi

    if feasible(0.0):
        return 0.0
    a, b = 0.0, float(np.abs(p).max() + s)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        a, b = (a, mid) if feasible(mid) else (mid, b)
    return b


def _hull_lp(space, p, V, norm):
    """LP distance from p to conv(V) under l1 / weighted_l1 / linf.

    Returns the barycentric weights of the minimizer.
    """
    k, d = V.shape
    if norm == "linf":
        # variables: lambda (k), s (1)
        c = np.r_[np.zeros(k), 1.0]
        A = np.block([[-V.T, -np.ones((d, 1))], [V.T, -np.ones((d, 1))]])
        A_eq = np.r_[np.ones(k), 0.0][None, :]
    else:
        w = np.ones(d) if norm == "l1" else np.asarray(space.weights)
        c = np.r_[np.zeros(k), w]
        A = np.block([[-V.T, -np.eye(d)], [V.T, -np.eye(d)]])
        A_eq = np.r_[np.ones(k), np.zeros(d)][None, :]
    b = np.r_[-p, p]
    res = linprog(
        c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[1.0], bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    lam = np.clip(res.x[:k], 0.0, None)
    return lam / lam.sum()


def _hull_distance(space, p, V):
    """Distance to conv(V).

    Polyhedral norms: an LP over barycentric weights, then the distance to the
    recovered point is recomputed in floating point (an upper bound that is
    tight up to the LP's accuracy).  l2: the l1-optimal point gives an upper
    bound and the linf LP value a lower bound; only when they straddle the
    question do we refine with SLSQP on the barycentric weights.
    """
    if len(V) == 1:
        return space.dist(p, V[0])
    if space.norm != "l2":
        lam = _hull_lp(space, p, V, space.norm)
        return space.dist(p, lam @ V)
    lam = _hull_lp(space, p, V, "l1")
    upper = space.dist(p, lam @ V)
    if upper == 0.0:
        return 0.0
    lam2 = _hull_lp(space, p, V, "linf")
    lower = float(np.abs(p - lam2 @ V).max())
    if upper <= 1e-12 or lower >= upper:
        return upper
    k = len(V)
    res = minimize(
        lambda l: float(np.sum((l @ V - p) ** 2)),
        lam,
        jac=lambda l: 2.0 * V @ (l @ V - p),
        bounds=[(0.0, None)] * k,
        constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1.0}],
        method="SLSQP",
        options={"ftol": 1e-16, "maxiter": 500},
    )
    lr = np.clip(res.x, 0.0, None)
    lr = lr / lr.sum()
    return min(upper, space.dist(p, lr @ V))
