"""Property suite: certify a problem, build its retraction and audit every
invariant of the library against independent checks.

Each audit has a static id in ``REGISTRY`` and records ``pass``, ``fail``,
``skipped`` or ``error`` together with the measured value, the bound it was
held to and the margin ``bound - value``.  All sample counts and slack
factors live in :class:`AuditConfig`.
"""

from __future__ import annotations

import ast
import inspect
import logging
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import (
    CertificationError,
    ContractFailure,
    ConvergenceError,
    NonCommutingError,
    NonexpansiveRejected,
    OracleUnavailable,
    SelfMapError,
)
from ..geometry import membership, sample_points
from ..km import KMTimeout, asymptotic_regularity_check, averaged, km_iterate
from ..maps import (
    CommutingFamily,
    Composite,
    Proved,
    ProvedAffine,
    Sampled,
    SampledCommuting,
    SquareMap,
    Unchecked,
    certify_commuting,
    certify_nonexpansive,
    check_self_map,
    identity_map,
    operator_norm,
)
from ..resolvent import resolve, single_retraction
from ..retraction import (
    apply,
    build_retraction,
    fixed_set_identity_check,
    stage_output,
)
from . import oracles
from .oracles import affine_fixed_point_oracle, brute_force_diameter, stacked_fixed_point_oracle
from .report import RunReport

log = logging.getLogger("retractor.suite")


@dataclass(frozen=True)
class AuditConfig:
    geometry_pairs: int = 1000
    norm_rtol: float = 1e-12
    convexity_tol: float = 1e-9
    diameter_slack: float = 1e-9
    self_map_samples: int = 1000
    self_map_tol: float = 1e-9
    certify_samples: int = 1000
    lipschitz_pairs: int = 10_000
    lipschitz_slack: float = 1e-9
    commuting_points: int = 1000
    affine_commuting_atol: float = 1e-12
    commuting_threshold: float = 1e-8
    resolvent_points: int = 100
    resolvent_ns: tuple = (10, 100, 1000)
    resolvent_inner_tol: float = 1e-9
    body_tol: float = 1e-6
    km_points: int = 20
    km_step_tol: float = 1e-9
    km_max_iter: int = 200_000
    km_equivalence_steps: int = 10
    monotone_slack: float = 1e-10
    gamma_half_tol: float = 1e-12
    retraction_points: int = 50
    retraction_pairs: int = 200
    nonexp_factor: float = 10.0
    idempotence_factor: float = 2.0
    oracle_factor: float = 5.0
    identity_samples: int = 20
    identity_factor: float = 10.0

    def to_dict(self):
        return asdict(self)


# Every audited invariant, in execution order.
REGISTRY = {
    "geometry.norm_axioms": "norm axioms on sampled vectors, triples and scalars",
    "geometry.diameter_exact": "cached diameter equals the closed form / vertex brute force",
    "geometry.diameter_positive": "diameter is positive unless the body is a point",
    "geometry.convexity": "convex combinations of sampled members are members",
    "geometry.distance_within_diameter": "sampled pair distances never exceed the diameter",
    "geometry.sample_membership": "sample_points returns members, center first",
    "maps.shared_body": "all family members act on one body",
    "maps.self_map": "every map sends sampled body points into the body",
    "maps.proved_lipschitz": "Proved(L) maps satisfy |Tx-Ty| <= L|x-y| on sampled pairs",
    "maps.sampled_ratio": "Sampled certificates hold on fresh pairs",
    "maps.composite_product": "composite certificates are at most the product of factors",
    "maps.square_map_unchecked": "the square map stays Unchecked and is rejected",
    "maps.affine_commuting_defect": "ProvedAffine families commute at sampled points",
    "maps.sampled_commuting_defect": "sampled commuting defect is below threshold",
    "maps.eval_determinism": "evaluation is bit-identical across calls and batch layouts",
    "resolvent.residual_bound": "|T F_n x - F_n x| <= diam/n + 2 inner_tol",
    "resolvent.nonexpansive": "|F_n x - F_n y| <= |x - y| + 4 inner_tol",
    "resolvent.residual_identity": "|T F_n x - F_n x| = |T F_n x - x| / n within 4 inner_tol",
    "resolvent.apriori_bound": "inner iteration counts respect the a-priori contraction bound",
    "resolvent.point_in_body": "resolvent points lie in the body",
    "resolvent.affine_oracle": "single-map retraction agrees with the linear-solve fixed point",
    "km.step_monotone": "averaged-iteration step norms are nonincreasing",
    "km.final_step": "runs stop with the final step (or residual) below tolerance",
    "km.gamma_half_residual": "with gamma = 1/2 the residual is twice the step",
    "km.fejer": "distance to a known fixed point is nonincreasing",
    "km.averaged_equivalence": "km_iterate equals plain iteration of the averaged map",
    "retraction.residual_contract": "max_i |T_i R x - R x| <= eps on sampled x",
    "retraction.nonexpansive": "|Rx - Ry| <= |x - y| + nonexp_factor eps on sampled pairs",
    "retraction.idempotence": "|R R x - R x| <= 2 eps",
    "retraction.order_robustness": "reversed family order meets the contract; output shift reported",
    "retraction.affine_oracle": "affine families: |R x - p*| <= 5 eps against the stacked solve",
    "retraction.stage_km_residual": "stage k: |T_k R_{k-1} y - y| <= eps_k at its output",
    "retraction.stage_previous_residual": "stage k: |R_{k-1} y - y| <= eps_k at its output",
    "retraction.fixed_set_identity": "Fix(family) and Fix(extra) meet in Fix(extra o R)",
    "harness.oracle_independence": "the oracle module imports no solver module",
}


class Skip(Exception):
    pass


@dataclass
class Certified:
    maps: list
    family: CommutingFamily
    certificates: dict
    problems: list


def certify_problem(problem, allow_uncertified=False, samples=1000, seed=0,
                    self_map_samples=1000, self_map_tol=1e-9):
    """Certify the family of ``problem``: nonexpansiveness, then commutativity,
    then the self-map property.

    Raises the first CertificationError / SelfMapError unless
    ``allow_uncertified``, in which case failures are recorded and the maps
    keep an Unchecked certificate.
    """
    maps = problem.build_maps()
    problems = []
    certs = {"maps": {}, "family": None, "self_map": {}}
    used = sorted(set(problem.family))
    for i in used:
        m = maps[i]
        try:
            maps[i] = m.with_certificate(certify_nonexpansive(m, samples, seed))
        except NonexpansiveRejected as exc:
            if not allow_uncertified:
                raise
            problems.append(exc)
            certs["maps"][m.name] = {"kind": "rejected", "value": exc.value,
                                     "witness": _witness(exc.witness)}
            continue
        certs["maps"][m.name] = maps[i].certificate.to_dict()
    family = CommutingFamily(problem.family_maps(maps))
    try:
        family = replace(family, certificate=certify_commuting(family, samples, seed))
        certs["family"] = family.certificate.to_dict()
    except NonCommutingError as exc:
        if not allow_uncertified:
            raise
        problems.append(exc)
        i, j, x = exc.witness
        certs["family"] = {"kind": "rejected", "defect": exc.defect,
                           "witness": {"i": i, "j": j, "x": np.asarray(x).tolist()}}
    for i in used:
        m = maps[i]
        try:
            certs["self_map"][m.name] = check_self_map(m, self_map_samples, seed, self_map_tol)
        except SelfMapError as exc:
            if not allow_uncertified:
                raise
            problems.append(exc)
            certs["self_map"][m.name] = {"violation": exc.distance}
    return Certified(maps, family, certs, problems)


def _witness(w):
    return None if w is None else [np.asarray(p).tolist() for p in w]


def solver_kwargs(problem, allow_uncertified=False):
    s = problem.solver
    return dict(km_step_tol=s["step_tol"], max_iter=s["max_iter"], gamma=s["gamma"],
                inner_tol=s["inner_tol"], relax=s["relax"], refinements=s["refinements"],
                allow_uncertified=allow_uncertified)


class _Suite:
    def __init__(self, problem, cert, cfg, seed, allow):
        self.problem = problem
        self.cert = cert
        self.cfg = cfg
        self.seed = seed
        self.allow = allow
        self.family = cert.family
        self.body = self.family.body
        self.space = self.family.space
        self.eps = problem.solver["eps"]
        self.results = []
        self.timings = {}
        self._cache = {}

    # -- bookkeeping -------------------------------------------------------

    def record(self, aid, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
            value, bound = float(out["value"]), float(out["bound"])
            ok = out.get("passed", value <= bound)
            res = {"status": "pass" if ok else "fail", "value": value, "bound": bound,
                   "margin": bound - value, "details": out.get("details", {})}
        except Skip as exc:
            res = {"status": "skipped", "reason": str(exc)}
        except (ConvergenceError, CertificationError, SelfMapError) as exc:
            res = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
        res["id"] = aid
        self.results.append(res)
        self.timings[aid] = time.perf_counter() - t0
        log.info("%s: %s", aid, res["status"])

    def samples(self, count, offset):
        return sample_points(self.body, count, self.seed + offset)

    def uses(self):
        return [m for m in self.family]

    def retraction(self):
        if "R" not in self._cache:
            t0 = time.perf_counter()
            try:
                self._cache["R"] = build_retraction(
                    self.family, self.eps, **solver_kwargs(self.problem, self.allow))
            except ConvergenceError as exc:
                self._cache["R"] = exc
            self.timings["build"] = time.perf_counter() - t0
        R = self._cache["R"]
        if isinstance(R, Exception):
            raise R
        return R

    def retraction_outputs(self):
        if "RX" not in self._cache:
            R = self.retraction()
            X = self.samples(self.cfg.retraction_points, 40)
            try:
                Y, diag = apply(R, X)
                self._cache["RX"] = (X, Y, diag.residuals, None)
            except ContractFailure as exc:
                self._cache["RX"] = (X, None, exc.residuals, exc)
        return self._cache["RX"]

    def resolvents(self, T, n):
        key = ("F", T.name, n)
        if key not in self._cache:
            cfg = self.cfg
            X = self.samples(cfg.resolvent_points, 20)
            Y = self.samples(cfg.resolvent_points, 21)
            rx = resolve(T, X, n, cfg.resolvent_inner_tol, self.problem.solver["relax"],
                         allow_uncertified=self.allow)
            ry = resolve(T, Y, n, cfg.resolvent_inner_tol, self.problem.solver["relax"],
                         allow_uncertified=self.allow)
            self._cache[key] = (X, Y, rx, ry)
        return self._cache[key]

    def km_runs(self, T):
        """Per-point averaged-iteration runs of ``T`` with full iterate history."""
        key = ("KM", T.name)
        if key not in self._cache:
            cfg = self.cfg
            runs = []
            for x in self.samples(cfg.km_points, 30):
                hist = [np.array(x)]
                try:
                    z, tr = km_iterate(T.raw, x, self.problem.solver["gamma"], cfg.km_step_tol,
                                       cfg.km_max_iter, space=self.space, keep=cfg.km_max_iter)
                except KMTimeout as exc:
                    tr = exc.trace
                hist.extend(tr.iterates_kept)
                runs.append((x, np.array(hist), tr))
            self._cache[key] = runs
        return self._cache[key]

    # -- geometry ----------------------------------------------------------

    def geometry_norm_axioms(self):
        rng = np.random.default_rng(self.seed + 1)
        d, n, sp = self.space.dim, self.cfg.geometry_pairs, self.space
        U, V = rng.standard_normal((2, n, d))
        a = rng.uniform(-5, 5, n)
        nu, nv, nuv = sp.norm_of(U), sp.norm_of(V), sp.norm_of(U + V)
        tri = (nuv - nu - nv) / np.maximum(nu + nv, 1.0)
        hom = np.abs(sp.norm_of(a[:, None] * U) - np.abs(a) * nu) / np.maximum(np.abs(a) * nu, 1.0)
        zero = sp.norm_of(np.zeros(d))
        worst = max(float(tri.max()), float(hom.max()), float(zero), float(-nu.min()))
        return {"value": worst, "bound": self.cfg.norm_rtol,
                "passed": worst <= self.cfg.norm_rtol and bool((nu > 0).all()),
                "details": {"triangle": float(tri.max()), "homogeneity": float(hom.max())}}

    def geometry_diameter_exact(self):
        b, sp = self.body, self.space
        if b.shape == "ball":
            ref = 2 * b.params["radius"]
        elif b.shape == "box":
            ref = sp.norm_of(b.params["upper"] - b.params["lower"])
        else:
            ref = brute_force_diameter(sp, b.vertices()).value
        err = abs(b.diam - ref)
        return {"value": err, "bound": 1e-12 * max(1.0, ref),
                "details": {"cached": b.diam, "reference": ref}}

    def geometry_diameter_positive(self):
        b = self.body
        single = b.shape == "hull" and np.all(b.vertices() == b.vertices()[0])
        ok = (b.diam == 0) if single else (b.diam > 0)
        return {"value": 0.0 if ok else 1.0, "bound": 0.0, "details": {"diam": b.diam}}

    def _pairs(self, offset):
        n = self.cfg.geometry_pairs
        P = self.samples(n + 1, offset)[1:]
        Q = self.samples(n + 1, offset + 1)[1:]
        return P, Q

    def geometry_convexity(self):
        P, Q = self._pairs(2)
        lam = np.random.default_rng(self.seed + 4).uniform(0, 1, len(P))[:, None]
        M = lam * P + (1 - lam) * Q
        d = np.atleast_1d(self.body.distance(M))
        ok = membership(self.body, M, self.cfg.convexity_tol)
        return {"value": float(d.max()), "bound": self.cfg.convexity_tol,
                "passed": bool(np.all(ok))}

    def geometry_distance_within_diameter(self):
        P, Q = self._pairs(5)
        gap = self.space.norm_of(P - Q) - self.body.diam
        return {"value": float(gap.max()), "bound": self.cfg.diameter_slack}

    def geometry_sample_membership(self):
        X = self.samples(self.cfg.geometry_pairs, 7)
        d = np.atleast_1d(self.body.distance(X))
        ok = bool(np.all(membership(self.body, X))) and np.array_equal(X[0], self.body.center())
        return {"value": float(d.max()), "bound": 0.0, "passed": ok}

    # -- maps --------------------------------------------------------------

    def maps_shared_body(self):
        bodies = {repr(m.body.to_dict()) for m in self.family}
        return {"value": float(len(bodies) - 1), "bound": 0.0}

    def maps_self_map(self):
        worst = 0.0
        for m in self.uses():
            X = sample_points(self.body, self.cfg.self_map_samples, self.seed)
            worst = max(worst, float(np.max(self.body.distance(m.raw(X)))))
        return {"value": worst, "bound": self.cfg.self_map_tol}

    def maps_proved_lipschitz(self):
        proved = [m for m in self.uses() if isinstance(m.certificate, Proved)]
        if not proved:
            raise Skip("no Proved certificates")
        n = self.cfg.lipschitz_pairs
        X = self.samples(n + 1, 8)[1:]
        Y = self.samples(n + 1, 9)[1:]
        dx = self.space.norm_of(X - Y)
        worst, per = -np.inf, {}
        for m in proved:
            gap = self.space.norm_of(m.raw(X) - m.raw(Y)) - m.certificate.value * dx
            per[m.name] = float(gap.max())
            worst = max(worst, per[m.name])
        return {"value": worst, "bound": self.cfg.lipschitz_slack, "details": per}

    def maps_sampled_ratio(self):
        sampled = [m for m in self.uses() if isinstance(m.certificate, Sampled)]
        if not sampled:
            raise Skip("no Sampled certificates")
        worst, per = 0.0, {}
        for m in sampled:
            ratio = oracles.pairwise_sampling(
                self.space, m.raw, self.samples(self.cfg.certify_samples, 10),
                self.samples(self.cfg.certify_samples, 11)).value
            per[m.name] = {"recorded": m.certificate.max_ratio, "fresh": ratio}
            worst = max(worst, ratio, m.certificate.max_ratio)
        return {"value": worst, "bound": 1 + self.cfg.lipschitz_slack, "details": per}

    def maps_composite_product(self):
        comps = [m for m in self.uses()
                 if isinstance(m.kind, Composite) and isinstance(m.certificate, Proved)]
        if not comps:
            raise Skip("no proved composite maps")
        worst, per = -np.inf, {}
        for m in comps:
            prod = float(np.prod([s.lipschitz(self.space)[0] for s in m.kind.steps]))
            per[m.name] = {"certificate": m.certificate.value, "product": prod}
            worst = max(worst, m.certificate.value - min(prod, 1.0))
        return {"value": worst, "bound": self.cfg.lipschitz_slack, "details": per}

    def maps_square_map_unchecked(self):
        sq = [m for m in self.problem.build_maps() if isinstance(m.kind, SquareMap)]
        if not sq:
            raise Skip("no square map in the problem")
        ratios = []
        for m in sq:
            if not isinstance(m.certificate, Unchecked) or not m.known_expansive:
                return {"value": 1.0, "bound": 0.0}
            try:
                certify_nonexpansive(m, self.cfg.certify_samples, self.seed)
            except NonexpansiveRejected as exc:
                ratios.append(exc.value)
                continue
            return {"value": 1.0, "bound": 0.0, "details": {"accepted": m.name}}
        return {"value": 0.0, "bound": 0.0, "details": {"rejected_ratios": ratios}}

    def _commuting_defect(self, X):
        maps, worst = self.family.maps, 0.0
        for i in range(len(maps)):
            for j in range(i + 1, len(maps)):
                Ti, Tj = maps[i].raw, maps[j].raw
                worst = max(worst, float(self.space.norm_of(Ti(Tj(X)) - Tj(Ti(X))).max()))
        return worst

    def maps_affine_commuting_defect(self):
        if not isinstance(self.family.certificate, ProvedAffine):
            raise Skip("family is not ProvedAffine")
        X = self.samples(self.cfg.commuting_points, 12)
        return {"value": self._commuting_defect(X), "bound": self.cfg.affine_commuting_atol}

    def maps_sampled_commuting_defect(self):
        if not isinstance(self.family.certificate, SampledCommuting):
            raise Skip("family commutativity is not sampled")
        X = self.samples(self.cfg.commuting_points, 13)
        return {"value": self._commuting_defect(X), "bound": self.cfg.commuting_threshold}

    def maps_eval_determinism(self):
        X = self.samples(64, 14)
        bad = 0
        for m in self.uses():
            a, b = m.raw(X), m.raw(X.copy())
            rows = np.array([m.raw(x) for x in X])
            bad += int(not np.array_equal(a, b)) + int(not np.array_equal(a, rows))
        return {"value": float(bad), "bound": 0.0}

    # -- resolvent ---------------------------------------------------------

    def _over_resolvents(self, measure):
        worst, per = -np.inf, {}
        for T in self.uses():
            for n in self.cfg.resolvent_ns:
                X, Y, rx, ry = self.resolvents(T, n)
                v = float(measure(T, n, X, Y, rx, ry))
                per[f"{T.name}/n={n}"] = v
                worst = max(worst, v)
        return worst, per

    def resolvent_residual_bound(self):
        it = self.cfg.resolvent_inner_tol
        d = self.body.diam
        worst, per = self._over_resolvents(
            lambda T, n, X, Y, rx, ry: (rx.residual_T - (d / n + 2 * it)).max())
        return {"value": worst, "bound": 0.0, "details": {"excess": per}}

    def resolvent_nonexpansive(self):
        it = self.cfg.resolvent_inner_tol
        sp = self.space
        worst, per = self._over_resolvents(
            lambda T, n, X, Y, rx, ry: (sp.norm_of(rx.point - ry.point) - sp.norm_of(X - Y)).max())
        return {"value": worst, "bound": 4 * it, "details": per}

    def resolvent_residual_identity(self):
        sp = self.space

        def gap(T, n, X, Y, rx, ry):
            TF = T.raw(rx.point)
            return np.abs(sp.norm_of(TF - rx.point) - sp.norm_of(TF - X) / n).max()

        worst, per = self._over_resolvents(gap)
        return {"value": worst, "bound": 4 * self.cfg.resolvent_inner_tol, "details": per}

    def resolvent_apriori_bound(self):
        def excess(T, n, X, Y, rx, ry):
            out = -np.inf
            for r in (rx, ry):
                b = r.inner.apriori_bound()
                out = max(out, r.inner.iterations_used - (b if b is not None else 1))
            return out

        worst, per = self._over_resolvents(excess)
        return {"value": worst, "bound": 0.0, "details": per}

    def resolvent_point_in_body(self):
        worst, _ = self._over_resolvents(
            lambda T, n, X, Y, rx, ry: np.max(self.body.distance(rx.point)))
        return {"value": worst, "bound": self.cfg.body_tol}

    def resolvent_affine_oracle(self):
        worst, per = -np.inf, {}
        X = self.samples(self.cfg.resolvent_points, 22)
        for T in self.uses():
            aff = T.kind.affine()
            if aff is None:
                continue
            try:
                p = affine_fixed_point_oracle(*aff).value
            except OracleUnavailable:
                continue
            A = aff[0]
            R = single_retraction(T, self.eps, allow_uncertified=self.allow)
            leaf = R.root
            n, q = leaf.n, 1.0 - 1.0 / leaf.n
            # F_n x - p = (1/n) (I - q A)^{-1} (x - p)
            L = operator_norm(np.linalg.inv(np.eye(len(A)) - q * A), self.space)[0]
            Y, _ = apply(R, X)
            err = self.space.norm_of(Y - p)
            allowed = L * self.space.norm_of(X - p) / n + 2 * leaf.inner_tol
            per[T.name] = {"max_error": float(err.max()), "inverse_norm": L, "n": n}
            worst = max(worst, float((err - allowed).max()))
        if not per:
            raise Skip("no affine map with a unique fixed point")
        return {"value": worst, "bound": 0.0, "details": per}

    # -- km ----------------------------------------------------------------

    def _km_all(self):
        for T in self.uses():
            for x, hist, tr in self.km_runs(T):
                yield T, x, hist, tr

    def km_step_monotone(self):
        worst, first = -np.inf, None
        for T, x, hist, tr in self._km_all():
            rep = asymptotic_regularity_check(tr, self.cfg.monotone_slack)
            worst = max(worst, rep.worst_increase)
            if not rep.monotone and first is None:
                first = {"map": T.name, "index": rep.first_violation, "x": x.tolist()}
        return {"value": worst, "bound": self.cfg.monotone_slack,
                "details": {"first_violation": first}}

    def km_final_step(self):
        worst, per = -np.inf, {}
        for T, x, hist, tr in self._km_all():
            v = min(tr.step_norms[-1] - tr.step_tol,
                    tr.residuals[-1] - tr.step_tol / tr.gamma)
            per.setdefault(T.name, []).append(tr.stop_reason)
            worst = max(worst, v)
        return {"value": worst, "bound": 0.0,
                "details": {k: sorted(set(v)) for k, v in per.items()}}

    def km_gamma_half_residual(self):
        if self.problem.solver["gamma"] != 0.5:
            raise Skip("gamma is not 1/2")
        worst = 0.0
        for T, x, hist, tr in self._km_all():
            s, r = np.array(tr.step_norms), np.array(tr.residuals)
            worst = max(worst, float((np.abs(r - 2 * s) / np.maximum(r, 1.0)).max()))
        return {"value": worst, "bound": self.cfg.gamma_half_tol}

    def km_fejer(self):
        worst, per = -np.inf, {}
        for T in self.uses():
            aff = T.kind.affine()
            if aff is None:
                continue
            try:
                p = affine_fixed_point_oracle(*aff).value
            except OracleUnavailable:
                continue
            for x, hist, tr in self.km_runs(T):
                d = self.space.norm_of(hist - p)
                if len(d) > 1:
                    worst = max(worst, float(np.diff(d).max()))
            per[T.name] = p.tolist()
        if not per:
            raise Skip("no map with an analytically known fixed point")
        return {"value": worst, "bound": self.cfg.monotone_slack, "details": {"fixed_points": per}}

    def km_averaged_equivalence(self):
        k = self.cfg.km_equivalence_steps
        gamma = self.problem.solver["gamma"]
        X = self.samples(8, 31)
        bad = 0
        for T in self.uses():
            try:
                Z, _ = km_iterate(T.raw, X, gamma, 1e-300, k, space=self.space)
                # rows that stopped early sit exactly at a fixed point of the averaged map
            except KMTimeout as exc:
                Z = exc.point
            W = X.copy()
            f = averaged(T, gamma)
            for _ in range(k):
                W = f(W)
            bad += int(not np.array_equal(Z, W))
        return {"value": float(bad), "bound": 0.0}

    # -- retraction --------------------------------------------------------

    def retraction_residual_contract(self):
        X, Y, res, exc = self.retraction_outputs()
        return {"value": float(np.max(res)), "bound": self.eps,
                "details": {"contract_failure": None if exc is None else str(exc)}}

    def _require_outputs(self):
        X, Y, res, exc = self.retraction_outputs()
        if exc is not None:
            raise exc
        return X, Y

    def retraction_nonexpansive(self):
        R = self.retraction()
        n = self.cfg.retraction_pairs
        P = self.samples(n + 1, 41)[1:]
        Q = self.samples(n + 1, 42)[1:]
        Y, _ = apply(R, np.vstack([P, Q]))
        gap = self.space.norm_of(Y[:n] - Y[n:]) - self.space.norm_of(P - Q)
        d = self.space.norm_of(P - Q)
        ratio = self.space.norm_of(Y[:n] - Y[n:]) / np.where(d > 0, d, 1.0)
        return {"value": float(gap.max()), "bound": self.cfg.nonexp_factor * self.eps,
                "details": {"worst_ratio": float(ratio.max())}}

    def retraction_idempotence(self):
        R = self.retraction()
        X, Y = self._require_outputs()
        YY, _ = apply(R, Y)
        return {"value": float(self.space.norm_of(YY - Y).max()),
                "bound": self.cfg.idempotence_factor * self.eps}

    def retraction_order_robustness(self):
        X, Y = self._require_outputs()
        maps = self.family.maps[::-1]
        fam = replace(self.family, maps=maps)
        Rr = build_retraction(fam, self.eps, **solver_kwargs(self.problem, self.allow))
        try:
            Yr, diag = apply(Rr, X)
        except ContractFailure as exc:
            return {"value": float(np.max(exc.residuals)), "bound": self.eps,
                    "details": {"order": [m.name for m in maps]}}
        return {"value": diag.max_residual, "bound": self.eps,
                "details": {"order": [m.name for m in maps],
                            "output_shift": float(self.space.norm_of(Yr - Y).max())}}

    def retraction_affine_oracle(self):
        affs = [m.kind.affine() for m in self.family]
        if any(a is None for a in affs):
            raise Skip("family is not affine")
        try:
            p = stacked_fixed_point_oracle(affs).value
        except OracleUnavailable as exc:
            raise Skip(f"no unique common fixed point: {exc}")
        X, Y = self._require_outputs()
        return {"value": float(self.space.norm_of(Y - p).max()),
                "bound": self.cfg.oracle_factor * self.eps, "details": {"p": p.tolist()}}

    def _stage_measure(self, which):
        R = self.retraction()
        if len(R.stages) < 2:
            raise Skip("single-stage retraction")
        X = self.samples(self.cfg.retraction_points, 43)
        worst, per = -np.inf, {}
        for k in range(2, len(R.stages) + 1):
            Y = stage_output(R, k, X)
            P = stage_output(R, k - 1, Y)
            Z = self.family[k - 1].raw(P) if which == "km" else P
            v = float(self.space.norm_of(Z - Y).max())
            ek = R.stages[k - 1].eps
            per[k] = {"value": v, "eps_k": ek}
            worst = max(worst, v - ek)
        return {"value": worst, "bound": 0.0, "details": per}

    def retraction_stage_km_residual(self):
        return self._stage_measure("km")

    def retraction_stage_previous_residual(self):
        return self._stage_measure("previous")

    def retraction_fixed_set_identity(self):
        maps = self.family.maps
        if len(maps) == 1:
            fam, extra, R = self.family, identity_map(self.body), self.retraction()
        else:
            fam = CommutingFamily(maps[:-1])
            fam = replace(fam, certificate=self.family.certificate)
            extra = maps[-1]
            R = build_retraction(fam, self.eps, **solver_kwargs(self.problem, self.allow))
        rep = fixed_set_identity_check(fam, R, extra, self.cfg.identity_samples, self.seed,
                                       self.cfg.identity_factor, self.eps)
        value = max(rep["forward"]["max_gap"], rep["reverse"]["max_residual"])
        return {"value": value, "bound": rep["bound"], "passed": rep["passed"],
                "details": {"extra": extra.name,
                            "forward_min_margin": min(rep["forward"]["margins"]),
                            "reverse_min_margin": min(rep["reverse"]["margins"])}}

    # -- harness -----------------------------------------------------------

    def harness_oracle_independence(self):
        tree = ast.parse(inspect.getsource(oracles))
        solver = {"maps", "resolvent", "km", "retraction"}
        bad = []
        for node in ast.walk(tree):
            if isinstance(node, ast.ImportFrom) and node.module:
                if set(node.module.split(".")) & solver:
                    bad.append(node.module)
            elif isinstance(node, ast.Import):
                bad += [a.name for a in node.names if set(a.name.split(".")) & solver]
        return {"value": float(len(bad)), "bound": 0.0, "details": {"imports": bad}}

    def run(self):
        for aid in REGISTRY:
            self.record(aid, getattr(self, aid.replace(".", "_")))
        return self.results


def run_property_suite(problem, seed=None, config=None, allow_uncertified=False) -> RunReport:
    """Certify ``problem``, build its retraction and run every registered audit.

    Certification failures raise (CertificationError / SelfMapError) unless
    ``allow_uncertified``; solver failures inside an audit are recorded as
    ``error`` entries rather than raised.
    """
    cfg = AuditConfig() if config is None else config
    seed = problem.solver["seed"] if seed is None else int(seed)
    t0 = time.perf_counter()
    cert = certify_problem(problem, allow_uncertified, cfg.certify_samples, seed,
                           cfg.self_map_samples, cfg.self_map_tol)
    t_cert = time.perf_counter() - t0
    suite = _Suite(problem, cert, cfg, seed, allow_uncertified)
    results = suite.run()
    stages = []
    R = suite._cache.get("R")
    if R is not None and not isinstance(R, Exception):
        stages = R.describe()
    report = RunReport(
        problem=problem.to_dict(),
        digest=problem.digest(),
        seed=seed,
        certificates=dict(cert.certificates, problems=[str(p) for p in cert.problems],
                          audit_config=cfg.to_dict()),
        stages=stages,
        audits=results,
        timings=dict(suite.timings, certify=t_cert, total=time.perf_counter() - t0),
    )
    return report
