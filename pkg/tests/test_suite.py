import json

import pytest

from retractor import cli
from retractor.errors import NonCommutingError, NonexpansiveRejected
from retractor.harness.report import RunReport
from retractor.harness.suite import REGISTRY, AuditConfig, run_property_suite
from retractor.problem import ProblemSpec

EXPECTED = [
    "geometry.norm_axioms", "geometry.diameter_exact", "geometry.diameter_positive",
    "geometry.convexity", "geometry.distance_within_diameter", "geometry.sample_membership",
    "maps.shared_body", "maps.self_map", "maps.proved_lipschitz", "maps.sampled_ratio",
    "maps.composite_product", "maps.square_map_unchecked", "maps.affine_commuting_defect",
    "maps.sampled_commuting_defect", "maps.eval_determinism",
    "resolvent.residual_bound", "resolvent.nonexpansive", "resolvent.residual_identity",
    "resolvent.apriori_bound", "resolvent.point_in_body", "resolvent.affine_oracle",
    "km.step_monotone", "km.final_step", "km.gamma_half_residual", "km.fejer",
    "km.averaged_equivalence",
    "retraction.residual_contract", "retraction.nonexpansive", "retraction.idempotence",
    "retraction.order_robustness", "retraction.affine_oracle", "retraction.stage_km_residual",
    "retraction.stage_previous_residual", "retraction.fixed_set_identity",
    "harness.oracle_independence",
]


def test_registry_is_complete():
    assert list(REGISTRY) == EXPECTED


def test_config_defaults():
    cfg = AuditConfig()
    assert (cfg.geometry_pairs, cfg.lipschitz_pairs, cfg.resolvent_points) == (1000, 10_000, 100)
    assert (cfg.retraction_points, cfg.retraction_pairs) == (50, 200)
    assert cfg.nonexp_factor == 10.0 and cfg.identity_factor == 10.0


@pytest.fixture(scope="module")
def rotations_report():
    from pathlib import Path
    spec = Path(__file__).resolve().parents[1] / "demos" / "specs" / "rotations.json"
    return ProblemSpec.load(spec), run_property_suite(ProblemSpec.load(spec))


def test_rotations_all_pass(rotations_report):
    _, rep = rotations_report
    assert rep.passed, rep.failures
    ids = [a["id"] for a in rep.audits]
    assert ids == EXPECTED
    for a in rep.audits:
        if a["status"] == "pass":
            assert a["margin"] == pytest.approx(a["bound"] - a["value"])


def test_report_schema(rotations_report):
    _, rep = rotations_report
    d = json.loads(rep.to_json())
    assert d["version"] == "retractor.run_report/1"
    assert set(d) >= {"problem", "certificates", "stages", "audits", "timings", "seed", "summary"}
    assert len(d["problem"]["digest"]) == 64
    assert "timings" not in rep.to_dict(timings=False)


def test_reports_are_reproducible(rotations_report):
    spec, rep = rotations_report
    again = run_property_suite(spec)
    assert again.to_json(timings=False) == rep.to_json(timings=False)
    other = run_property_suite(spec, seed=1)
    assert other.to_json(timings=False) != rep.to_json(timings=False)


def test_identity_family_near_zero_work(spec_path):
    rep = run_property_suite(ProblemSpec.load(spec_path("identity")))
    assert rep.passed
    assert rep.stages[0]["type"] == "resolvent"


def test_certification_failures_raise(spec_path):
    with pytest.raises(NonexpansiveRejected) as info:
        run_property_suite(ProblemSpec.load(spec_path("squaremap")))
    assert info.value.value >= 1.5
    with pytest.raises(NonCommutingError):
        run_property_suite(ProblemSpec.load(spec_path("noncommuting")))


def test_square_map_override_records_without_crashing(spec_path):
    rep = run_property_suite(ProblemSpec.load(spec_path("squaremap")), allow_uncertified=True)
    by_id = {a["id"]: a for a in rep.audits}
    assert rep.certificates["maps"]["square"]["kind"] == "rejected"
    assert "first_violation" in by_id["km.step_monotone"]["details"]
    assert by_id["maps.square_map_unchecked"]["status"] == "pass"


def test_verify_exit_one_on_audit_failure(spec_path, monkeypatch, tmp_path, capsys):
    fake = RunReport({}, "0" * 64, 0, audits=[
        {"id": "retraction.idempotence", "status": "fail", "value": 1.0, "bound": 0.1, "margin": -0.9}])
    monkeypatch.setattr(cli, "run_property_suite", lambda *a, **k: fake)
    monkeypatch.chdir(tmp_path)
    assert cli.main(["verify", spec_path("identity")]) == 1
    assert "retraction.idempotence" in capsys.readouterr().err
