"""Problem specs: the JSON document the CLI and the property suite consume.

A spec names a normed space, a body, a list of kind-tagged maps, the
ordered family (indices into ``maps``), solver settings and outputs::

    {
      "space": {"dim": 2, "norm": "l2"},
      "body": {"shape": "ball", "radius": 1.0},
      "maps": [{"name": "r1", "kind": "rotation2d", "angle_deg": 73}],
      "family": [0],
      "solver": {"eps": 1e-6},
      "outputs": {"report": "report.json"}
    }

Missing solver/output fields take the values in ``SOLVER_DEFAULTS`` and
``OUTPUT_DEFAULTS``; :meth:`ProblemSpec.to_dict` always writes every field.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, SpecError
from .geometry import ConvexBody, NormedSpace, sample_points
from .maps import CertifiedMap, kind_from_dict

SCHEMA = "retractor.problem/1"

# step_tol / inner_tol of None mean "derive from the stage tolerance".
SOLVER_DEFAULTS = {
    "eps": 1e-6,
    "gamma": 0.5,
    "step_tol": None,
    "max_iter": 1_000_000,
    "inner_tol": None,
    "relax": 0.5,
    "refinements": 2,
    "seed": 0,
}

OUTPUT_DEFAULTS = {
    "report": None,
    "trace": None,
    "points": [],
    "sample_count": 8,
}


@dataclass(eq=False)
class ProblemSpec:
    space: NormedSpace
    body: ConvexBody
    maps: list
    family: list
    solver: dict = field(default_factory=lambda: dict(SOLVER_DEFAULTS))
    outputs: dict = field(default_factory=lambda: copy.deepcopy(OUTPUT_DEFAULTS))

    def __post_init__(self):
        self.solver = _merge(SOLVER_DEFAULTS, self.solver, "solver")
        self.outputs = _merge(OUTPUT_DEFAULTS, self.outputs, "outputs")
        _validate(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        if not isinstance(d, dict):
            raise SpecError("spec must be a JSON object")
        if d.get("schema", SCHEMA) != SCHEMA:
            raise SpecError(f"unsupported schema {d['schema']!r}")
        for key in ("space", "body", "maps", "family"):
            if key not in d:
                raise SpecError(f"spec is missing {key!r}")
        try:
            space = NormedSpace.from_dict(d["space"])
            body = ConvexBody.from_dict(space, d["body"])
            maps = [dict(m) for m in d["maps"]]
            for k, m in enumerate(maps):
                m.setdefault("name", f"T{k}")
            return cls(space, body, maps, list(d["family"]),
                       dict(d.get("solver", {})), dict(d.get("outputs", {})))
        except SpecError:
            raise
        except (ContractViolation, KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"invalid spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ProblemSpec":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise SpecError(f"cannot read spec {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SpecError(f"malformed JSON in {path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "space": self.space.to_dict(),
            "body": self.body.to_dict(),
            "maps": copy.deepcopy(self.maps),
            "family": list(self.family),
            "solver": dict(self.solver),
            "outputs": copy.deepcopy(self.outputs),
        }

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    def with_overrides(self, **kw) -> "ProblemSpec":
        """Copy with solver/output fields replaced (``None`` values are ignored)."""
        d = self.to_dict()
        for k, v in kw.items():
            if v is None:
                continue
            if k in SOLVER_DEFAULTS:
                d["solver"][k] = v
            elif k in OUTPUT_DEFAULTS:
                d["outputs"][k] = v
            else:
                raise SpecError(f"unknown override {k!r}")
        return ProblemSpec.from_dict(d)

    def build_maps(self) -> list:
        """Uncertified CertifiedMaps for every entry of ``maps``."""
        out = []
        for m in self.maps:
            try:
                kind = kind_from_dict(m, self.space.dim)
                out.append(CertifiedMap(kind, self.body, name=m["name"]))
            except (ContractViolation, KeyError, TypeError, ValueError) as exc:
                raise SpecError(f"bad map {m.get('name')!r}: {exc}") from exc
        return out

    def family_maps(self, maps=None) -> list:
        maps = self.build_maps() if maps is None else maps
        return [maps[i] for i in self.family]

    def evaluation_points(self) -> np.ndarray:
        """Explicit points, then the body center and ``sample_count`` samples."""
        pts = [np.asarray(p, dtype=float) for p in self.outputs["points"]]
        drawn = sample_points(self.body, self.outputs["sample_count"] + 1, self.solver["seed"])
        return np.vstack(pts + [drawn]) if pts else drawn


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _merge(defaults, given, section):
    unknown = set(given) - set(defaults)
    if unknown:
        raise SpecError(f"unknown {section} fields: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def _validate(spec):
    s, o = spec.solver, spec.outputs
    if not spec.maps:
        raise SpecError("spec needs at least one map")
    if not spec.family:
        raise SpecError("family must list at least one map index")
    for i in spec.family:
        if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < len(spec.maps):
            raise SpecError(f"family index {i!r} out of range")
    names = [m.get("name") for m in spec.maps]
    if len(set(names)) != len(names):
        raise SpecError("map names must be unique")
    if not isinstance(s["eps"], (int, float)) or not s["eps"] > 0:
        raise SpecError("solver.eps must be positive")
    if not 0 < s["gamma"] < 1:
        raise SpecError("solver.gamma must lie in (0, 1)")
    if int(s["max_iter"]) != s["max_iter"] or s["max_iter"] < 1:
        raise SpecError("solver.max_iter must be a positive integer")
    for key in ("step_tol", "inner_tol"):
        if s[key] is not None and not s[key] > 0:
            raise SpecError(f"solver.{key} must be positive or null")
    if not 0 < s["relax"] <= 1:
        raise SpecError("solver.relax must lie in (0, 1]")
    if int(s["refinements"]) != s["refinements"] or s["refinements"] < 0:
        raise SpecError("solver.refinements must be a nonnegative integer")
    if not isinstance(s["seed"], int):
        raise SpecError("solver.seed must be an integer")
    if int(o["sample_count"]) != o["sample_count"] or o["sample_count"] < 0:
        raise SpecError("outputs.sample_count must be a nonnegative integer")
    for p in o["points"]:
        if len(p) != spec.space.dim:
            raise SpecError(f"evaluation point {p} has the wrong dimension")
