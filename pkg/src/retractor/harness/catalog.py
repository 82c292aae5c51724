"""Standard problem instances used by the audits, tests and demos."""

from __future__ import annotations

import numpy as np

from ..geometry import ConvexBody, NormedSpace
from ..maps import (
    Affine,
    CertifiedMap,
    CommutingFamily,
    Composite,
    CoordWise,
    Isometry,
    Rotation2D,
    certify,
    certify_commuting,
    operator_norm,
)


def certified_family(maps, samples=1000, seed=0) -> CommutingFamily:
    maps = tuple(m if m.certified else certify(m, samples, seed) for m in maps)
    fam = CommutingFamily(maps)
    return CommutingFamily(maps, certify_commuting(fam, samples, seed))


def rotation_pair(dim=2, angles=(73.0, 191.0)) -> CommutingFamily:
    """Two rotations about the origin on the unit l2 ball; common fixed point 0."""
    body = ConvexBody.ball(NormedSpace(dim, "l2"))
    maps = [CertifiedMap(Rotation2D(dim, a), body, name=f"rot{a:g}") for a in angles]
    return certified_family(maps)


def coordwise_affine_family(dim, n_maps=3, seed=0, norm="linf", factors=(0.0, 0.25, 0.5)):
    """``n_maps`` diagonal affine maps on ``[-1, 1]^dim`` sharing one fixed point.

    Map ``i`` acts on coordinate ``j`` as ``x_j -> p_j + d_ij (x_j - p_j)``
    with ``d_ij`` drawn from ``factors`` or 1 (untouched); every coordinate is
    contracted by at least one map, so the common fixed point ``p`` is unique.
    Returns ``(family, p)``.
    """
    rng = np.random.default_rng(seed)
    body = ConvexBody.box(NormedSpace(dim, norm), -np.ones(dim), np.ones(dim))
    p = rng.uniform(-0.5, 0.5, dim)
    D = np.ones((n_maps, dim))
    owner = rng.integers(0, n_maps, dim)
    for j in range(dim):
        D[owner[j], j] = rng.choice(factors)
        for i in range(n_maps):
            if i != owner[j] and rng.uniform() < 0.3:
                D[i, j] = rng.choice(factors)
    maps = [
        CertifiedMap(Affine(np.diag(D[i]), (1.0 - D[i]) * p), body, name=f"diag{i}")
        for i in range(n_maps)
    ]
    return certified_family(maps, seed=seed), p


def clamp_family(dim=2):
    """Nonlinear commuting pair on ``[-1, 1]^dim``: clamp coordinate 0, halve coordinate 1."""
    body = ConvexBody.box(NormedSpace(dim, "l2"), -np.ones(dim), np.ones(dim))
    ops1 = [("clamp", -0.5, 0.5)] + [("identity",)] * (dim - 1)
    ops2 = [("identity",), ("scale", 0.5)] + [("identity",)] * (dim - 2)
    maps = [CertifiedMap(CoordWise(ops1), body, name="clamp0"),
            CertifiedMap(CoordWise(ops2), body, name="half1")]
    return certified_family(maps)


def ball_catalog(dim, norm, seed=0):
    """Certified nonexpansive self-maps of the unit ``norm`` ball in ``R^dim``."""
    rng = np.random.default_rng(seed)
    space = NormedSpace(dim, norm)
    body = ConvexBody.ball(space)
    c = rng.uniform(-1, 1, dim)
    c *= 0.6 / space.norm_of(c)
    A = rng.standard_normal((dim, dim))
    A *= 0.6 / operator_norm(A, space)[0]
    b = rng.uniform(-1, 1, dim)
    b *= 0.3 / space.norm_of(b)
    perm = rng.permutation(dim)
    signs = rng.choice([-1.0, 1.0], dim)
    scales = rng.uniform(-1, 1, dim)
    ops = [("scale", s) if k % 2 else ("clamp", -0.4, 0.4) for k, s in enumerate(scales)]
    angle = 73.0 if norm == "l2" else 90.0
    kinds = {
        "identity": CoordWise([("identity",)] * dim),
        "constant": Affine(np.zeros((dim, dim)), c),
        "contraction": Affine(A, b),
        "isometry": Isometry(perm, signs),
        "coordwise": CoordWise(ops),
        "rotation": Rotation2D(dim, angle),
        "composite": Composite([Rotation2D(dim, angle), CoordWise(ops)]),
    }
    return [certify(CertifiedMap(k, body, name=name), seed=seed) for name, k in kinds.items()]
