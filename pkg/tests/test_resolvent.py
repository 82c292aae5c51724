import math

import numpy as np
import pytest

from retractor import (Affine, CertifiedMap, ConvexBody, NormedSpace, Rotation2D, banach_solve,
                       certify, identity_map, resolve, single_retraction)
from retractor.errors import ContractViolation, NonConvergence, OracleUnavailable, UncertifiedMapError
from retractor.harness.catalog import ball_catalog
from retractor.harness.oracles import affine_fixed_point_oracle
from retractor.resolvent import accuracy_index, apriori_iteration_bound, displacement_bound

SP = NormedSpace(2, "l2")
DISC = ConvexBody.ball(SP)
Q = np.array([[0.0, -1.0], [1.0, 0.0]])
QUARTER = certify(CertifiedMap(Rotation2D(2, 90.0), DISC, name="quarter"))


def test_banach_linear_contraction():
    z, info = banach_solve(lambda Z: 0.5 * Z, np.array([1.0, 0.0]), 0.5, 1e-8, 1000, SP)
    assert np.linalg.norm(z) <= 1e-8
    assert info.residual <= 1e-8
    assert info.iterations_used <= info.apriori_bound()


def test_banach_constant_map_one_step():
    c = np.array([0.1, 0.2])
    z, info = banach_solve(lambda Z: np.broadcast_to(c, Z.shape).copy(), np.zeros(2), 0.0, 1e-12, 10, SP)
    assert np.array_equal(z, c)
    assert info.iterations_used == 2  # the second evaluation confirms a zero step


def test_banach_resolvent_example():
    x = np.array([1.0, 0.0])
    z, info = banach_solve(lambda Z: 0.5 * x + 0.5 * Z @ Q.T, x, 0.5, 1e-13, 1000, SP)
    assert np.allclose(z, [0.4, 0.2], atol=1e-12)
    assert np.allclose(z, affine_fixed_point_oracle(0.5 * Q, 0.5 * x).value, atol=1e-12)


def test_banach_errors():
    with pytest.raises(ContractViolation):
        banach_solve(lambda Z: Z, np.zeros(2), 1.0, 1e-6, 10, SP)
    with pytest.raises(NonConvergence) as info:
        banach_solve(lambda Z: 0.99 * Z, np.ones(2), 0.99, 1e-12, 5, SP)
    assert info.value.iterations == 5 and info.value.residual > 0


def test_apriori_bound_formula():
    # q=0.5, tol=1e-8, d=1: ln(5e-9)/ln(0.5) = 27.57 -> 28, plus one
    assert apriori_iteration_bound(0.5, 1e-8, 1.0) == 29
    assert apriori_iteration_bound(0.5, 1e-8, 0.0) is None


def test_resolve_identity_exact():
    x = np.array([0.3, 0.4])
    for n in (1, 2, 17, 1000):
        r = resolve(identity_map(DISC), x, n, 1e-12)
        assert np.array_equal(r.point, x)


def test_resolve_constant_closed_form():
    c = np.array([0.3, -0.1])
    K = certify(CertifiedMap(Affine(np.zeros((2, 2)), c), DISC))
    x = np.array([-0.5, 0.5])
    for n in (1, 3, 50):
        r = resolve(K, x, n, 1e-14)
        assert np.allclose(r.point, x / n + (1 - 1 / n) * c, atol=1e-13)


def test_resolve_rotation_example():
    r = resolve(QUARTER, np.array([1.0, 0.0]), 2, 1e-13)
    assert np.allclose(r.point, [0.4, 0.2], atol=1e-12)
    assert r.residual_T == pytest.approx(math.sqrt(0.4), abs=1e-12)
    assert r.residual_T <= DISC.diam / 2


def test_resolve_relax_one_matches_plain_scheme():
    x = np.array([0.6, -0.3])
    a = resolve(QUARTER, x, 5, 1e-13, relax=1.0)
    b = resolve(QUARTER, x, 5, 1e-13, relax=0.5)
    assert np.allclose(a.point, b.point, atol=1e-12)
    assert a.inner.q == pytest.approx(0.8) and b.inner.q == pytest.approx(0.9)


def test_resolve_requires_certificate():
    bare = CertifiedMap(Rotation2D(2, 90.0), DISC)
    with pytest.raises(UncertifiedMapError):
        resolve(bare, np.zeros(2), 3, 1e-9)
    resolve(bare, np.zeros(2), 3, 1e-9, allow_uncertified=True)
    with pytest.raises(ContractViolation):
        resolve(QUARTER, np.zeros(2), 0, 1e-9)


def test_residual_identity_and_bound_batch():
    X = np.random.default_rng(0).uniform(-0.7, 0.7, (100, 2))
    it = 1e-10
    for n in (10, 100, 1000):
        r = resolve(QUARTER, X, n, it)
        TF = QUARTER.raw(r.point)
        assert np.all(r.residual_T <= 2 / n + 2 * it)
        gap = np.abs(SP.norm_of(TF - r.point) - SP.norm_of(TF - X) / n)
        assert np.all(gap <= 4 * it)


def test_batch_rows_match_single_solves():
    X = np.random.default_rng(1).uniform(-0.7, 0.7, (6, 2))
    r = resolve(QUARTER, X, 40, 1e-10)
    for k, x in enumerate(X):
        assert np.array_equal(resolve(QUARTER, x, 40, 1e-10).point, r.point[k])


def test_accuracy_index():
    assert accuracy_index(2.0, 1e-3) == 2000
    assert accuracy_index(2.0, 5.0) == 1
    with pytest.raises(ContractViolation):
        accuracy_index(1.0, 0.0)


def test_single_retraction_examples():
    ident = single_retraction(identity_map(DISC), 1e-3)
    x = np.array([0.2, -0.6])
    assert np.array_equal(ident(x), x)

    c = np.array([0.3, 0.1])
    K = certify(CertifiedMap(Affine(np.zeros((2, 2)), c), DISC))
    R = single_retraction(K, 1e-3)
    assert R.root.n == 2000
    X = np.random.default_rng(2).uniform(-0.7, 0.7, (20, 2))
    err = SP.norm_of(R(X) - c)
    assert np.all(err <= 5e-4 * SP.norm_of(X - c) + R.root.inner_tol)
    tight = single_retraction(K, 1e-3, inner_tol=1e-13)
    assert np.allclose(SP.norm_of(tight(X) - c), 5e-4 * SP.norm_of(X - c), atol=1e-12)

    R = single_retraction(QUARTER, 1e-3)
    y = R(np.array([1.0, 0.0]))
    assert np.linalg.norm(QUARTER.raw(y) - y) <= 1e-3 + 2e-4
    assert np.linalg.norm(y) <= 1e-3


def test_displacement_bound_near_fixed_points():
    x = np.array([1e-9, 0.0])
    n, it = 2000, 1e-4
    r = resolve(QUARTER, x, n, it)
    assert np.linalg.norm(r.point - x) <= displacement_bound(QUARTER, x, n, it)


@pytest.mark.parametrize("norm", ["l1", "l2"])
def test_affine_single_retraction_matches_linear_solve(norm):
    for T in ball_catalog(3, norm, seed=1):
        aff = T.kind.affine()
        if aff is None or T.name in ("identity", "isometry"):
            continue
        try:
            p = affine_fixed_point_oracle(*aff).value
        except OracleUnavailable:
            continue
        R = single_retraction(T, 1e-6)
        X = np.random.default_rng(3).uniform(-0.3, 0.3, (10, 3))
        n = R.root.n
        M = np.linalg.inv(np.eye(3) - (1 - 1 / n) * aff[0])
        L = np.abs(M).sum(axis=0).max() if norm == "l1" else np.linalg.norm(M, 2)
        err = T.space.norm_of(R(X) - p)
        assert np.all(err <= L * T.space.norm_of(X - p) / n + 2 * R.root.inner_tol), T.name
