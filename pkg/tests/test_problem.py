import json

import numpy as np
import pytest

from retractor.errors import SpecError
from retractor.problem import OUTPUT_DEFAULTS, SOLVER_DEFAULTS, ProblemSpec

BASE = {
    "space": {"dim": 2, "norm": "l2"},
    "body": {"shape": "ball", "radius": 1.0},
    "maps": [{"name": "r", "kind": "rotation2d", "angle_deg": 73}],
    "family": [0],
}


def test_defaults_filled_and_round_trip(spec_path):
    for name in ("rotations", "squaremap", "noncommuting", "identity", "coordwise"):
        spec = ProblemSpec.load(spec_path(name))
        d = spec.to_dict()
        assert set(d["solver"]) == set(SOLVER_DEFAULTS)
        assert set(d["outputs"]) == set(OUTPUT_DEFAULTS)
        again = ProblemSpec.from_dict(json.loads(json.dumps(d)))
        assert again.to_dict() == d
        assert again.digest() == spec.digest()


def test_explicit_defaults_reproduce_default_behavior():
    implicit = ProblemSpec.from_dict(BASE)
    explicit = ProblemSpec.from_dict(dict(BASE, solver=dict(SOLVER_DEFAULTS),
                                          outputs=dict(OUTPUT_DEFAULTS)))
    assert implicit.to_dict() == explicit.to_dict()
    assert np.array_equal(implicit.evaluation_points(), explicit.evaluation_points())


def test_evaluation_points_default_center_plus_eight():
    spec = ProblemSpec.from_dict(BASE)
    X = spec.evaluation_points()
    assert X.shape == (9, 2) and np.array_equal(X[0], [0.0, 0.0])
    spec = ProblemSpec.from_dict(dict(BASE, outputs={"points": [[0.1, 0.2]], "sample_count": 0}))
    assert np.array_equal(spec.evaluation_points(), [[0.1, 0.2], [0.0, 0.0]])


def test_overrides():
    spec = ProblemSpec.from_dict(BASE).with_overrides(eps=1e-3, seed=4, gamma=None, report="r.json")
    assert spec.solver["eps"] == 1e-3 and spec.solver["seed"] == 4
    assert spec.solver["gamma"] == 0.5 and spec.outputs["report"] == "r.json"


@pytest.mark.parametrize("patch", [
    {"family": [1]},
    {"family": []},
    {"family": [True]},
    {"solver": {"eps": 0}},
    {"solver": {"gamma": 1.0}},
    {"solver": {"max_iter": 0}},
    {"solver": {"bogus": 1}},
    {"outputs": {"points": [[1.0]]}},
    {"space": {"dim": 2, "norm": "l7"}},
    {"body": {"shape": "torus"}},
    {"maps": []},
    {"schema": "other/2"},
])
def test_invalid_specs(patch):
    with pytest.raises(SpecError):
        ProblemSpec.from_dict(dict(BASE, **patch))


def test_missing_section_and_bad_map():
    d = dict(BASE)
    del d["body"]
    with pytest.raises(SpecError):
        ProblemSpec.from_dict(d)
    spec = ProblemSpec.from_dict(dict(BASE, maps=[{"name": "w", "kind": "warp"}]))
    with pytest.raises(SpecError):
        spec.build_maps()


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SpecError):
        ProblemSpec.load(bad)
    with pytest.raises(SpecError):
        ProblemSpec.load(tmp_path / "missing.json")
