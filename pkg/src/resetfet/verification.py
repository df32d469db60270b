"""Invariant suites behind ``resetfet verify``.

Each suite returns a :class:`SuiteReport`: a list of named checks with the
computed value, the reference, the error and the tolerance.  Reports hold
no timings or host data, so identical inputs give identical JSON.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic, bvp, ifet
from . import montecarlo as mc
from .core import ResettingParams
from .errors import VerificationFailed

__all__ = ["Check", "SuiteReport", "ORACLE_CASES", "identities", "examples", "oracle_bvp", "oracle_mc", "SUITES"]


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    reference: float | None = None
    error: float | None = None
    tolerance: float | None = None
    note: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, reference, tol, *, kind="abs", note=""):
        value, reference = float(value), float(reference)
        err = abs(value - reference)
        if kind == "rel":
            err /= max(abs(reference), 1e-300)
        self.checks.append(Check(name, bool(err <= tol), value, reference, err, tol, note))

    def as_dict(self):
        return {"suite": self.suite, "passed": self.passed, "settings": self.settings,
                "checks": [asdict(c) for c in self.checks]}


# (label, params, start) spanning mu in {0, 1} and r in {0.5, 1, 5}
ORACLE_CASES = (
    ("mu0_r0.5", ResettingParams(0.0, 0.5, 0.125, b=1.0), 0.4),
    ("mu0_r1", ResettingParams(0.0, 1.0, 0.5, b=1.0), 0.3),
    ("mu0_r5", ResettingParams(0.0, 5.0, 0.25, b=1.0), 0.6),
    ("mu1_r1", ResettingParams(1.0, 1.0, 0.25, b=1.0), 0.3),
    ("mu1_r5", ResettingParams(1.0, 5.0, 0.25, b=1.0), 0.7),
)


def _closed_values(p: ResettingParams, x: float) -> dict:
    out = {
        "pi_left": analytic.exit_prob_left(p, x),
        "tau_mean": analytic.fet_mean(p, x),
        "tau_second": analytic.fet_second_moment(p, x),
    }
    if p.mu == 0.0:
        out["area_mean"] = analytic.fea_mean_undrifted(p, x)
        out["area_second"] = analytic.fea_second_moment_undrifted(p, x)
        out["tau_area"] = analytic.joint_moment_tau_area_undrifted(p, x)
    return {k: float(v) for k, v in out.items()}


def identities() -> SuiteReport:
    rep = SuiteReport("identities")
    xs = np.linspace(0.05, 0.95, 20)
    lams = np.linspace(0.1, 20.0, 20)
    p0 = ResettingParams(0.0, 0.0, 0.5, b=1.0)
    worst = 0.0
    for x in xs:
        diff = np.abs(np.asarray(analytic.fet_lt(p0, x, lams)) - np.asarray(analytic.fet_lt_darling_siegert(1.0, x, lams)))
        worst = max(worst, float(diff.max()))
    rep.add("darling_siegert_20x20", worst, 0.0, 1e-10)

    worst = 0.0
    for p, x in [(c[1], c[2]) for c in ORACLE_CASES]:
        q = np.asarray(analytic.survival_lt(p, x, lams))
        m = np.asarray(analytic.fet_lt(p, x, lams))
        worst = max(worst, float(np.max(np.abs(q - (1 - m) / lams))))
    rep.add("survival_lt_equals_(1-M)/lambda", worst, 0.0, 1e-12)

    worst = 0.0
    for p, _ in [(c[1], c[2]) for c in ORACLE_CASES]:
        grid = np.linspace(p.a, p.b, 51)
        s = np.asarray(analytic.exit_prob_left(p, grid)) + np.asarray(analytic.exit_prob_right(p, grid))
        worst = max(worst, float(np.max(np.abs(s - 1))))
    rep.add("exit_probabilities_sum_to_one", worst, 0.0, 1e-12)

    # translating (a, b) and every position leaves every law unchanged
    base = ResettingParams(0.7, 2.0, 0.35, a=0.0, b=1.2)
    moved = ResettingParams(0.7, 2.0, 0.35 - 0.9, a=-0.9, b=0.3)
    x, z = 0.5, 0.8
    worst = 0.0
    for f in (analytic.exit_prob_left, analytic.fet_mean, analytic.fet_second_moment):
        worst = max(worst, abs(float(f(base, x)) - float(f(moved, x - 0.9))))
    worst = max(worst, abs(float(analytic.fet_lt(base, x, 1.7)) - float(analytic.fet_lt(moved, x - 0.9, 1.7))))
    worst = max(worst, abs(float(analytic.max_exit_joint_cdf(base, x, z))
                           - float(analytic.max_exit_joint_cdf(moved, x - 0.9, z - 0.9))))
    rep.add("translation_invariance", worst, 0.0, 1e-12)
    return rep


def examples() -> SuiteReport:
    rep = SuiteReport("examples")
    for ex in range(1, 7):
        r = ifet.verify_example(ex, raise_on_fail=False)
        rep.checks.append(Check(f"example_{ex}", r.passed, r.max_error, 0.0, r.max_error, r.tolerance,
                                note=f"worst lambda {r.worst_lambda:.6g}"))
    return rep


def oracle_bvp(n: int = 2000) -> SuiteReport:
    rep = SuiteReport("oracle-bvp", settings={"n": n})
    for label, p, x in ORACLE_CASES:
        closed = _closed_values(p, x)
        pi = bvp.solve_nonlocal_bvp(bvp.exit_prob_left_problem(p, n))
        t1, t2 = bvp.solve_fet_moments(p, n, orders=2)
        num = {"pi_left": pi(x), "tau_mean": t1(x), "tau_second": t2(x)}
        if p.mu == 0.0:
            s1, s2 = bvp.solve_fea_moments(p, n)
            num.update(area_mean=s1(x), area_second=s2(x), tau_area=bvp.solve_joint_moment(p, n)(x))
        for key, ref in closed.items():
            rep.add(f"{label}:{key}", num[key], ref, 1e-5)
    return rep


def oracle_mc(n: int = 100_000, seed: int = 0, k: float = 3.0) -> SuiteReport:
    rep = SuiteReport("oracle-mc", settings={"n": n, "seed": seed, "k_se": k})
    for label, p, x in ORACLE_CASES:
        est = mc.estimate_statistics(p, x, mc.SimConfig(n_paths=n, seed=seed))
        for key, ref in _closed_values(p, x).items():
            e = getattr(est, key)
            rep.checks.append(Check(f"{label}:{key}", bool(abs(e.mean - ref) <= k * e.std_err), e.mean, ref,
                                    abs(e.mean - ref), k * e.std_err, note=f"std_err {e.std_err:.6e}"))
    return rep


SUITES = {"identities": identities, "examples": examples, "oracle-bvp": oracle_bvp, "oracle-mc": oracle_mc}


def require(report: SuiteReport) -> SuiteReport:
    """Raise :class:`VerificationFailed` naming the first failing check."""
    for c in report.checks:
        if not c.passed:
            raise VerificationFailed(f"{report.suite}: {c.name} error {c.error!r} > {c.tolerance!r}", error=c.error)
    return report
