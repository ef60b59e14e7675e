"""Trace audits: safety, step fraction, iterate gap, linearised regret,
set sandwich, pessimistic-set validity and the regret guarantee.

Audits are harness-side and may read the true constraint.  Every check is a
pure function of its inputs and returns an ``AuditReport``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algo import MP_OGD, ROGD, THEOREM, AlgoParams, RunResult
from .problem import ProblemInstance, QuadraticForm
from .sets import BallSet, PESSIMISTIC, max_quadratic_on_ball

TOL = 1e-9
REGRET_RTOL = 1e-6


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one check.

    ``worst`` is the worst value of the audited quantity over the trace
    (e.g. the largest constraint value, the smallest step fraction);
    ``bound`` is what it is compared against.
    """

    name: str
    passed: bool
    worst: float
    bound: float
    tolerance: float
    failing_round: int | None = None
    seed: int | None = None
    informational: bool = False
    note: str = ""

    @property
    def locator(self) -> tuple[int | None, int] | None:
        if self.passed or self.failing_round is None:
            return None
        return (self.seed, self.failing_round)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass
class AuditSummary:
    reports: dict[str, AuditReport] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when every non-informational check passed."""
        return all(r.passed for r in self.reports.values() if not r.informational)

    def __getitem__(self, name: str) -> AuditReport:
        return self.reports[name]

    def failures(self) -> list[AuditReport]:
        return [r for r in self.reports.values() if not r.passed and not r.informational]


def _records(trace):
    return trace.records if isinstance(trace, RunResult) else list(trace)


def _seed(trace):
    return trace.seed if isinstance(trace, RunResult) else None


def check_safety(trace, instance: ProblemInstance, tol: float = TOL) -> AuditReport:
    """Every played point satisfies ``g <= tol`` and lies in X (to ``tol``)."""
    g = instance.constraint.value
    X = instance.action_set
    worst = -math.inf
    failing = None
    for rec in _records(trace):
        for p in rec.points:
            val = g(p)
            worst = max(worst, val)
            outside = float(np.linalg.norm(p - X.center)) > X.radius + tol
            if failing is None and (val > tol or outside):
                failing = rec.t
    return AuditReport("safety", failing is None, worst, 0.0, tol, failing, _seed(trace))


def check_gamma(trace, kappa: float, tol: float = TOL) -> AuditReport:
    """Every step fraction is at least ``1 / kappa``."""
    bound = 1.0 / kappa
    worst = math.inf
    failing = None
    for rec in _records(trace):
        worst = min(worst, rec.gamma)
        if failing is None and not rec.gamma >= bound - tol:
            failing = rec.t
    return AuditReport("gamma", failing is None, worst, bound, tol, failing, _seed(trace))


def check_distance(trace, params: AlgoParams, tol: float = TOL) -> AuditReport:
    """``||x_t - x~_t|| <= rho`` with ``rho = 2 (kappa - 1) d G eta``."""
    rho = params.distance_radius()
    worst = 0.0
    failing = None
    for rec in _records(trace):
        gap = float(np.linalg.norm(rec.x - rec.x_tilde))
        worst = max(worst, gap)
        if failing is None and gap > rho + tol:
            failing = rec.t
    informational = params.delta > params.lemma1_delta()
    note = "delta above the step-fraction threshold" if informational else ""
    return AuditReport("distance", failing is None, worst, rho, tol, failing, _seed(trace),
                       informational, note)


def lemma3_violations(trace, x_star, params: AlgoParams) -> np.ndarray:
    """Per-round ``lhs - rhs`` of the linearised-regret step inequality."""
    v = np.asarray(x_star, dtype=float)
    eta = params.eta
    extra = 0.5 * eta * params.dim**2 * params.G**2
    out = []
    for rec in _records(trace):
        lhs = float(rec.grad_f @ (rec.x_tilde - v))
        a = rec.x_tilde - v
        b = rec.x_tilde_next - v
        rhs = (float(a @ a) - float(b @ b)) / (2.0 * eta) + extra
        out.append(lhs - rhs)
    return np.array(out)


def check_lemma3(trace, x_star, params: AlgoParams, tol: float = TOL) -> AuditReport:
    """``grad_est f_t(x_t).(x~_t - v) <= (||x~_t - v||^2 - ||x~_{t+1} - v||^2)/(2 eta)
    + eta d^2 G^2 / 2`` at every round, with ``v = x_*``."""
    viol = lemma3_violations(trace, x_star, params)
    recs = _records(trace)
    bad = np.flatnonzero(viol > tol)
    failing = recs[bad[0]].t if bad.size else None
    worst = float(np.max(viol)) if viol.size else -math.inf
    return AuditReport("lemma3", failing is None, worst, 0.0, tol, failing, _seed(trace))


def check_regret_bound(result: RunResult, params: AlgoParams, rtol: float = REGRET_RTOL) -> AuditReport:
    """``R_T <= 2 D G sqrt(d (d/4 + kappa - 1) T) + 1``; binding only under
    the theorem schedule."""
    bound = params.regret_bound()
    passed = result.regret <= bound * (1.0 + rtol)
    informational = params.schedule != THEOREM
    note = "schedule mismatch - informational" if informational else ""
    return AuditReport("regret_bound", passed, result.regret, bound, rtol,
                       None if passed else result.horizon, result.seed, informational, note)


def _sandwich_margins(rec, constraint: QuadraticForm) -> tuple[float, float]:
    """Violation amounts (<= 0 when fine) of ``pess ⊆ {g<=0}`` and ``{g<=0} ⊆ opt``."""
    ball = constraint.as_ball()
    c_p, c_o = rec.pess_center, rec.opt_center
    rho_p = math.sqrt(max(rec.pess_radius_sq, 0.0))
    rho_o = math.sqrt(max(rec.opt_radius_sq, 0.0))
    if ball is not None:
        b, xi = ball
        inner = float(np.linalg.norm(c_p - b)) + rho_p - xi if rec.pess_radius_sq >= 0 else -math.inf
        outer = float(np.linalg.norm(c_o - b)) + xi - rho_o
        return inner, outer

    A, b, c = constraint.A, constraint.b, constraint.c
    if rec.pess_radius_sq >= 0:
        # max of g over the pessimistic ball
        off = c_p - b
        inner = max_quadratic_on_ball(A, A @ off, rho_p) + float(off @ A @ off) + c
    else:
        inner = -math.inf
    # max distance from the optimistic centre over the ellipsoid {g <= 0}
    lam, V = np.linalg.eigh(A)
    W = V @ np.diag(np.sqrt(-c / lam)) @ V.T
    off = b - c_o
    far_sq = max_quadratic_on_ball(W @ W, W @ off, 1.0) + float(off @ off)
    outer = math.sqrt(max(far_sq, 0.0)) - rho_o
    return inner, outer


def check_sandwich(trace, instance: ProblemInstance, tol: float = TOL) -> AuditReport:
    """Pessimistic ball inside the true feasible set, which in turn lies inside
    the optimistic ball, at every round."""
    worst = -math.inf
    failing = None
    for rec in _records(trace):
        inner, outer = _sandwich_margins(rec, instance.constraint)
        m = max(inner, outer)
        worst = max(worst, m)
        if failing is None and m > tol:
            failing = rec.t
    return AuditReport("sandwich", failing is None, worst, 0.0, tol, failing, _seed(trace))


def check_validity(trace, params: AlgoParams) -> AuditReport:
    """``x_t`` belongs to its round's pessimistic set (exact membership)."""
    worst = -math.inf
    failing = None
    for rec in _records(trace):
        pess = BallSet(rec.pess_center, rec.pess_radius_sq, params.action_set, PESSIMISTIC)
        diff = rec.x - pess.center
        worst = max(worst, float(diff @ diff) - pess.radius_sq)
        if failing is None and not pess.contains(rec.x):
            failing = rec.t
    return AuditReport("validity", failing is None, worst, 0.0, 0.0, failing, _seed(trace))


def audit_run(result: RunResult, instance: ProblemInstance) -> AuditSummary:
    """All checks that apply to the algorithm that produced ``result``."""
    params = result.params
    summary = AuditSummary()
    summary.reports["safety"] = check_safety(result, instance)
    if result.algo == MP_OGD:
        return summary
    for report in (
        check_validity(result, params),
        check_gamma(result, params.kappa),
        check_distance(result, params),
        check_lemma3(result, result.x_star, params),
        check_sandwich(result, instance),
        check_regret_bound(result, params),
    ):
        if result.algo == ROGD and report.name != "safety":
            report = _as_informational(report, "first-order baseline")
        summary.reports[report.name] = report
    return summary


def _as_informational(report: AuditReport, note: str) -> AuditReport:
    from dataclasses import replace

    return replace(report, informational=True, note=note)
