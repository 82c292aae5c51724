import numpy as np
import pytest

from retractor import (Affine, CertifiedMap, CommutingFamily, Composite, ConvexBody, CoordWise,
                       Isometry, NormedSpace, Rotation2D, SquareMap, certify, certify_commuting,
                       certify_nonexpansive, eval_map, identity_map, square_map_example)
from retractor.errors import (ContractViolation, DomainError, NonCommutingError,
                              NonexpansiveRejected, SelfMapError)
from retractor.harness.catalog import ball_catalog
from retractor.maps import (Proved, ProvedAffine, Sampled, SampledCommuting, Unchecked,
                            check_self_map, kind_from_dict, operator_norm)

L2_DISC = ConvexBody.ball(NormedSpace(2, "l2"))


def test_eval_examples():
    Q = CertifiedMap(Rotation2D(2, 90.0), L2_DISC)
    assert np.array_equal(eval_map(Q, [1.0, 0.0]), [0.0, 1.0])
    sq = square_map_example(3)
    assert np.array_equal(eval_map(sq, [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    c = np.array([0.3, -0.2])
    K = CertifiedMap(Affine(np.zeros((2, 2)), c), L2_DISC)
    assert np.array_equal(eval_map(K, [0.5, 0.5]), c)


def test_eval_domain_and_self_map_errors():
    Q = CertifiedMap(Rotation2D(2, 90.0), L2_DISC, name="q")
    with pytest.raises(DomainError):
        eval_map(Q, [2.0, 0.0])
    shift = CertifiedMap(Affine(np.eye(2), [0.5, 0.0]), L2_DISC, name="shift")
    with pytest.raises(SelfMapError, match="shift"):
        eval_map(shift, [1.0, 0.0])
    with pytest.raises(SelfMapError):
        check_self_map(shift)


def test_square_map_truncation():
    sq = square_map_example(2)
    assert np.array_equal(sq.raw([-1.0, 0.0]), [1.0, 0.0])
    sq3 = square_map_example(3)
    assert np.array_equal(sq3.raw(np.zeros(3)), np.zeros(3))
    assert np.allclose(sq3.raw([0.2, 0.3, -0.4]), [0.04, 0.0, 0.3])
    assert isinstance(sq3.certificate, Unchecked) and sq3.known_expansive
    with pytest.raises(ContractViolation):
        square_map_example(1)


def test_affine_l1_certificate():
    body = ConvexBody.ball(NormedSpace(2, "l1"))
    m = CertifiedMap(Affine([[0.5, 0.2], [0.3, 0.6]], [0.0, 0.0]), body)
    cert = certify_nonexpansive(m)
    assert isinstance(cert, Proved) and cert.value == pytest.approx(0.8, abs=1e-15)


def test_operator_norms():
    A = np.array([[0.5, -0.2], [0.3, 0.6]])
    assert operator_norm(A, NormedSpace(2, "l1"))[0] == pytest.approx(0.8)
    assert operator_norm(A, NormedSpace(2, "linf"))[0] == pytest.approx(0.9)
    assert operator_norm(A, NormedSpace(2, "l2"))[0] == pytest.approx(np.linalg.norm(A, 2), rel=1e-10)
    w = NormedSpace(2, "weighted_l1", (1.0, 2.0))
    # columns: (0.5*1 + 0.3*2)/1 = 1.1, (0.2*1 + 0.6*2)/2 = 0.7
    assert operator_norm(A, w)[0] == pytest.approx(1.1)


@pytest.mark.parametrize("angle", [0.0, 30.0, 73.0, 90.0, 191.0])
def test_rotations_proved_one_in_l2(angle):
    cert = certify_nonexpansive(CertifiedMap(Rotation2D(2, angle), L2_DISC))
    assert cert == Proved(1.0, "orthogonal")


def test_square_map_rejected_with_witness():
    with pytest.raises(NonexpansiveRejected) as info:
        certify_nonexpansive(square_map_example(2))
    x, y = info.value.witness
    assert np.array_equal(x, [1.0, 0.0]) and np.array_equal(y, [0.5, 0.0])
    assert info.value.value == 1.5  # |Tx - Ty|_1 = 0.75 against |x - y|_1 = 0.5


def test_expansive_affine_rejected():
    m = CertifiedMap(Affine(2 * np.eye(2), np.zeros(2)), L2_DISC)
    with pytest.raises(NonexpansiveRejected):
        certify_nonexpansive(m)


def test_coordwise_and_isometry_certificates():
    body = ConvexBody.box(NormedSpace(3, "linf"), -np.ones(3), np.ones(3))
    cw = CertifiedMap(CoordWise([("clamp", -0.5, 0.5), ("scale", -0.7), ("shift_clamp", 0.3, -1, 1)]), body)
    assert certify_nonexpansive(cw).value == 1.0
    iso = CertifiedMap(Isometry([2, 0, 1], [1, -1, 1]), body)
    assert certify_nonexpansive(iso).value == 1.0


def test_composite_order_and_certificate():
    q = Rotation2D(2, 90.0)
    half = CoordWise([("scale", 0.5), ("identity",)])
    comp = Composite([q, half])  # q first, then half
    assert np.allclose(comp.apply(np.array([[1.0, 0.0]])), [[0.0, 1.0]])
    assert np.allclose(Composite([half, q]).apply(np.array([[1.0, 0.0]])), [[0.0, 0.5]])
    cert = certify_nonexpansive(CertifiedMap(comp, L2_DISC))
    assert cert.value <= 1.0 + 1e-12


def test_sampled_certificate_for_nonlinear_composite():
    body = ConvexBody.ball(NormedSpace(2, "l1"))
    comp = Composite([Rotation2D(2, 90.0), CoordWise([("clamp", -0.4, 0.4), ("identity",)])])
    cert = certify_nonexpansive(CertifiedMap(comp, body))
    bound = cert.value if isinstance(cert, Proved) else cert.max_ratio
    assert bound <= 1 + 1e-9


def test_commuting_certificates():
    r1 = certify(CertifiedMap(Rotation2D(2, 73.0), L2_DISC))
    r2 = certify(CertifiedMap(Rotation2D(2, 191.0), L2_DISC))
    cert = certify_commuting(CommutingFamily((r1, r2)))
    assert isinstance(cert, ProvedAffine) and cert.max_defect <= 1e-12
    clamp = certify(CertifiedMap(CoordWise([("clamp", -0.5, 0.5), ("identity",)]), L2_DISC))
    cert = certify_commuting(CommutingFamily((identity_map(L2_DISC), clamp)))
    assert isinstance(cert, SampledCommuting) and cert.max_defect == 0.0


def test_noncommuting_witness():
    disc = ConvexBody.ball(NormedSpace(2, "l2"), radius=2.0)
    a = certify(CertifiedMap(Rotation2D(2, 90.0, (0.0, 0.0)), disc))
    b = certify(CertifiedMap(Rotation2D(2, 90.0, (0.5, 0.0)), disc))
    with pytest.raises(NonCommutingError) as info:
        certify_commuting(CommutingFamily((a, b)))
    i, j, x = info.value.witness
    assert (i, j) == (0, 1) and np.array_equal(x, [0.0, 0.0])
    # direct evaluation: a(b(0)) = (0.5, 0.5), b(a(0)) = (0.5, -0.5)
    assert info.value.defect == pytest.approx(1.0)


def test_family_requires_shared_body():
    other = ConvexBody.ball(NormedSpace(2, "l2"), radius=2.0)
    with pytest.raises(ContractViolation):
        CommutingFamily((identity_map(L2_DISC), identity_map(other)))
    with pytest.raises(ContractViolation):
        CommutingFamily(())


@pytest.mark.parametrize("norm", ["l1", "l2"])
def test_catalog_proved_maps_hold_on_pairs(norm):
    rng_seed = 5
    for m in ball_catalog(4, norm, seed=rng_seed):
        X = np.random.default_rng(1).uniform(-0.5, 0.5, (10_000, 4))
        Y = np.random.default_rng(2).uniform(-0.5, 0.5, (10_000, 4))
        sp = m.space
        L = m.certificate.value if isinstance(m.certificate, Proved) else 1.0
        assert np.all(sp.norm_of(m.raw(X) - m.raw(Y)) <= L * sp.norm_of(X - Y) + 1e-9), m.name
        assert check_self_map(m) <= 1e-9


def test_eval_is_bit_deterministic():
    for m in ball_catalog(3, "l2"):
        X = np.random.default_rng(0).uniform(-0.5, 0.5, (50, 3))
        a = m.raw(X)
        assert np.array_equal(a, m.raw(X.copy()))
        assert np.array_equal(a, np.array([m.raw(x) for x in X]))


def test_kind_from_dict_round_trip():
    kinds = [Affine([[0.5, 0], [0, 0.5]], [0.1, 0]), Rotation2D(2, 45.0, (0.1, 0.0)),
             Isometry([1, 0], [1, -1]), CoordWise([("clamp", -1, 1), ("scale", 0.5)]), SquareMap(2),
             Composite([Rotation2D(2, 90.0), CoordWise([("identity",), ("scale", -1)])])]
    X = np.random.default_rng(0).uniform(-0.5, 0.5, (5, 2))
    for k in kinds:
        again = kind_from_dict(k.to_dict(), 2)
        assert again.to_dict() == k.to_dict()
        assert np.array_equal(again.apply(X), k.apply(X))
    with pytest.raises(ContractViolation):
        kind_from_dict({"kind": "warp"}, 2)
