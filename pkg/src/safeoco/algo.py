"""MP-ROGD, its parameter schedules, and the MP-OGD / ROGD baselines.

The algorithms only ever see value queries ``f_t(p)`` and ``g(p)`` at the
points they play (or, for the first-order baseline, values and gradients at
the single played point).  Drawing costs, the offline optimum and regret
are harness work done by the ``run_*`` drivers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .gradest import forward_diff
from .problem import (
    CostOracle,
    ProblemInstance,
    SummedCost,
    offline_optimum,
    round_regret,
)
from .sets import (
    BallRegion,
    EmptySetError,
    Region,
    build_optimistic,
    build_pessimistic,
    dykstra,
    max_feasible_mu,
    project_intersection,
)

MP_ROGD = "mp-rogd"
MP_OGD = "mp-ogd"
ROGD = "rogd"
ALGORITHMS = (MP_ROGD, MP_OGD, ROGD)

THEOREM = "theorem"
EXPERIMENT = "experiment"
SCHEDULES = (THEOREM, EXPERIMENT)

ValueOracle = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class AlgoParams:
    """Step size, shrinkage and probe radius plus the constants the player is told."""

    eta: float
    alpha: float
    delta: float
    horizon: int
    dim: int
    k: int
    G: float
    D: float
    L: float
    M: float
    eps: float
    r: float
    schedule: str = "custom"
    action_set: Region | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.action_set is None:
            object.__setattr__(self, "action_set", BallRegion.unit(self.dim))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.eta < 0 or self.delta < 0 or not 0 <= self.alpha < 1:
            raise ValueError(f"invalid step parameters eta={self.eta}, alpha={self.alpha}, delta={self.delta}")

    @property
    def kappa(self) -> float:
        return self.L / self.M

    @property
    def slack(self) -> float:
        """Gradient-error allowance ``sqrt(d) L delta D / 2`` in the set bounds."""
        return 0.5 * math.sqrt(self.dim) * self.L * self.delta * self.D

    def validity_delta(self) -> float:
        """Largest probe radius keeping ``x_t`` in the pessimistic set."""
        return 2.0 * self.alpha * self.eps / (math.sqrt(self.dim) * self.L * self.D)

    def lemma1_delta(self) -> float:
        """Largest probe radius keeping every ``gamma_t >= 1 / kappa``."""
        k = self.kappa
        return (k - 1.0) / (k + 1.0) * self.validity_delta()

    def check_safety(self) -> None:
        if not self.delta > 0:
            raise ValueError("probe radius must be positive")
        if self.delta > self.validity_delta():
            raise ValueError(f"delta={self.delta} exceeds 2 alpha eps / (sqrt(d) L D) = {self.validity_delta()}")
        if self.delta > self.alpha * self.r:
            raise ValueError(f"delta={self.delta} exceeds alpha r = {self.alpha * self.r}")

    def regret_bound(self) -> float:
        """Regret guarantee ``2 D G sqrt(d (d/4 + kappa - 1) T) + 1``."""
        d, T = self.dim, self.horizon
        return 2.0 * self.D * self.G * math.sqrt(d * (0.25 * d + self.kappa - 1.0) * T) + 1.0

    def distance_radius(self) -> float:
        """Iterate-gap radius ``rho = 2 (kappa - 1) d G eta``."""
        return 2.0 * (self.kappa - 1.0) * self.dim * self.G * self.eta


def _check_constants(G, D, L, M, eps, r, T, d):
    if min(G, D, L, M, eps, r) <= 0:
        raise ValueError("all problem constants must be positive")
    if L <= M:
        raise ValueError(f"condition number L/M must exceed 1 (L={L}, M={M})")
    if T < 1 or d < 1:
        raise ValueError("horizon and dimension must be positive")


def theorem1_params(G, D, L, M, eps, r, T: int, d: int) -> AlgoParams:
    """Step size, shrinkage and probe radius carrying the O(d sqrt(T)) guarantee."""
    _check_constants(G, D, L, M, eps, r, T, d)
    kappa = L / M
    eta = D / (2.0 * math.sqrt((d / 4.0 + kappa - 1.0) * d * G**2 * T))
    alpha = min(0.5, d * G / D * (1.0 - 1.0 / kappa) * eta)
    delta = min(
        1.0 / ((0.5 * math.sqrt(d) * L * D + G) * T),
        2.0 * (kappa - 1.0) * alpha * eps / ((kappa + 1.0) * math.sqrt(d) * L * D),
        alpha * r,
    )
    return AlgoParams(eta, alpha, delta, T, d, d + 1, G, D, L, M, eps, r, schedule=THEOREM)


def experiment_params(instance: ProblemInstance, T: int, use_theorem: bool = False) -> AlgoParams:
    """The schedule used in the synthetic experiments.

    ``eta = D/(d G sqrt(T))``, ``alpha = d G M (1 - 1/kappa) eta / D`` and
    ``delta = min(1/T, (kappa-1) alpha eps / ((kappa+1) sqrt(d) L D), alpha r)``,
    taken as printed.  ``use_theorem`` returns ``theorem1_params`` instead.
    """
    G, D, L, M, eps, r, d = (instance.G, instance.D, instance.L, instance.M,
                             instance.eps, instance.r, instance.dim)
    if use_theorem:
        return replace(theorem1_params(G, D, L, M, eps, r, T, d), action_set=instance.action_set)
    _check_constants(G, D, L, M, eps, r, T, d)
    kappa = L / M
    eta = D / (d * G * math.sqrt(T))
    alpha = d * G * M * (1.0 - 1.0 / kappa) * eta / D
    if alpha >= 1.0:
        # alpha = M (1 - 1/kappa) / sqrt(T), so short horizons fall outside [0, 1)
        raise ValueError(f"experiment schedule gives alpha = {alpha:.3g} >= 1 at T = {T}; "
                         f"it needs T > {(M * (1.0 - 1.0 / kappa)) ** 2:.3g}")
    delta = min(
        1.0 / T,
        (kappa - 1.0) * alpha * eps / ((kappa + 1.0) * math.sqrt(d) * L * D),
        alpha * r,
    )
    return AlgoParams(eta, alpha, delta, T, d, d + 1, G, D, L, M, eps, r,
                      schedule=EXPERIMENT, action_set=instance.action_set)


def schedule_params(instance: ProblemInstance, T: int, schedule: str) -> AlgoParams:
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    return experiment_params(instance, T, use_theorem=schedule == THEOREM)


def mp_ogd_params(instance: ProblemInstance, T: int) -> AlgoParams:
    """``eta = D/(d G sqrt(T))``, ``delta = 1/T`` and ``alpha = delta / r_in``
    where ``r_in`` is the largest origin ball inside the true constraint."""
    d = instance.dim
    r_in = instance.constraint.inner_radius()
    eta = instance.D / (d * instance.G * math.sqrt(T))
    delta = 1.0 / T
    alpha = delta / r_in
    return AlgoParams(eta, alpha, delta, T, d, d + 1, instance.G, instance.D, instance.L,
                      instance.M, instance.eps, r_in, schedule=EXPERIMENT,
                      action_set=instance.action_set)


# Optional shrink toward the origin for the first-order baseline.  Without
# it the iterate can sit exactly on the constraint boundary, where the next
# round's pessimistic-set membership is decided by rounding.
ROGD_SHRINK = 0.0


def rogd_params(instance: ProblemInstance, T: int, shrink: float = ROGD_SHRINK) -> AlgoParams:
    """``eta = D/(G sqrt(T))``; exact gradients so no probes and no slack."""
    d = instance.dim
    eta = instance.D / (instance.G * math.sqrt(T))
    return AlgoParams(eta, shrink, 0.0, T, d, 1, instance.G, instance.D, instance.L,
                      instance.M, instance.eps, instance.r, schedule=EXPERIMENT,
                      action_set=instance.action_set)


# --------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class RoundRecord:
    t: int
    points: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    grad_f: np.ndarray
    grad_g: np.ndarray | None
    x: np.ndarray
    x_tilde: np.ndarray
    x_tilde_next: np.ndarray
    gamma: float
    opt_center: np.ndarray | None = None
    opt_radius_sq: float = math.nan
    pess_center: np.ndarray | None = None
    pess_radius_sq: float = math.nan

    @property
    def k(self) -> int:
        return self.points.shape[0]


@dataclass
class RunResult:
    algo: str
    params: AlgoParams
    records: list[RoundRecord]
    x_star: np.ndarray
    regret: float
    regret_series: dict[int, float]
    wall_ms: float
    seed: int | None = None
    audit: object | None = None
    opt_values: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return len(self.records)

    @property
    def avg_regret(self) -> float:
        return self.regret / self.horizon

    @property
    def played_points(self) -> np.ndarray:
        return np.stack([rec.points for rec in self.records])

    @property
    def cost_values(self) -> np.ndarray:
        return np.stack([rec.f_values for rec in self.records])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([rec.gamma for rec in self.records])

    @property
    def iterates(self) -> np.ndarray:
        return np.stack([rec.x for rec in self.records])

    @property
    def optimistic_iterates(self) -> np.ndarray:
        return np.stack([rec.x_tilde for rec in self.records])

    @property
    def max_g_value(self) -> float:
        return max(float(np.max(rec.g_values)) for rec in self.records)

    @property
    def min_gamma(self) -> float:
        return float(np.min(self.gammas))

    @property
    def max_iterate_gap(self) -> float:
        return max(float(np.linalg.norm(rec.x - rec.x_tilde)) for rec in self.records)


@dataclass(frozen=True)
class MPROGDState:
    x: np.ndarray
    x_tilde: np.ndarray

    @classmethod
    def initial(cls, dim: int) -> "MPROGDState":
        return cls(np.zeros(dim), np.zeros(dim))


# --------------------------------------------------------------------------
# MP-ROGD


def mp_rogd_step(
    state: MPROGDState,
    cost_oracle: ValueOracle,
    constraint_oracle: ValueOracle,
    params: AlgoParams,
    t: int = 0,
) -> tuple[MPROGDState, RoundRecord]:
    """One round: probe, estimate, build sets, optimistic step, line search, shrink."""
    x, x_tilde = state.x, state.x_tilde
    X = params.action_set
    est_f = forward_diff(cost_oracle, x, params.delta, params.dim)
    est_g = forward_diff(constraint_oracle, x, params.delta, params.dim)
    slack = params.slack

    opt = build_optimistic(est_g.base_value, est_g.estimate, x, params.M, slack, X)
    pess = build_pessimistic(est_g.base_value, est_g.estimate, x, params.L, slack, X)
    if pess.empty:
        raise EmptySetError(f"round {t}: pessimistic set is empty; delta is too large")

    x_tilde_next = project_intersection(X, opt, x_tilde - params.eta * est_f.estimate)
    gamma = max_feasible_mu(x, x_tilde_next, pess)
    x_next = (1.0 - params.alpha) * (x + gamma * (x_tilde_next - x))

    record = RoundRecord(
        t=t,
        points=est_f.points,
        f_values=est_f.values,
        g_values=est_g.values,
        grad_f=est_f.estimate,
        grad_g=est_g.estimate,
        x=x,
        x_tilde=x_tilde,
        x_tilde_next=x_tilde_next,
        gamma=gamma,
        opt_center=opt.center,
        opt_radius_sq=opt.radius_sq,
        pess_center=pess.center,
        pess_radius_sq=pess.radius_sq,
    )
    return MPROGDState(x_next, x_tilde_next), record


def rogd_step(
    state: MPROGDState,
    cost: CostOracle,
    constraint,
    params: AlgoParams,
    t: int = 0,
) -> tuple[MPROGDState, RoundRecord]:
    """First-order round: exact ``f_t``, ``grad f_t``, ``g`` and ``grad g`` at ``x_t``.

    Same optimistic/pessimistic machinery as MP-ROGD with zero estimation
    slack and a single played point.
    """
    x, x_tilde = state.x, state.x_tilde
    X = params.action_set
    f_val, grad_f = cost.value(x), cost.gradient(x)
    g_val, grad_g = constraint.value(x), constraint.gradient(x)

    opt = build_optimistic(g_val, grad_g, x, params.M, 0.0, X)
    pess = build_pessimistic(g_val, grad_g, x, params.L, 0.0, X)
    if pess.empty:
        raise EmptySetError(f"round {t}: pessimistic set is empty")
    x_tilde_next = project_intersection(X, opt, x_tilde - params.eta * grad_f)
    gamma = max_feasible_mu(x, x_tilde_next, pess)
    x_next = (1.0 - params.alpha) * (x + gamma * (x_tilde_next - x))

    record = RoundRecord(
        t=t,
        points=x[None, :].copy(),
        f_values=np.array([f_val]),
        g_values=np.array([g_val]),
        grad_f=grad_f,
        grad_g=grad_g,
        x=x,
        x_tilde=x_tilde,
        x_tilde_next=x_tilde_next,
        gamma=gamma,
        opt_center=opt.center,
        opt_radius_sq=opt.radius_sq,
        pess_center=pess.center,
        pess_radius_sq=pess.radius_sq,
    )
    return MPROGDState(x_next, x_tilde_next), record


# --------------------------------------------------------------------------
# harness drivers


def _checkpoint_list(checkpoints: Iterable[int] | None, T: int) -> list[int]:
    cps = sorted({int(c) for c in (checkpoints or ()) if 1 <= int(c) <= T} | {T})
    return cps


def geometric_checkpoints(T: int, per_decade: int = 10) -> list[int]:
    """Roughly log-spaced rounds from 1 to T inclusive."""
    n = max(2, int(math.ceil(per_decade * math.log10(max(T, 10)))) + 1)
    return sorted({int(round(v)) for v in np.geomspace(1, T, n)} | {T})


def _finish(algo, params, instance, records, costs, checkpoints, start, audit):
    """Offline optimum, regret and prefix-regret series for a finished run."""
    T = len(records)
    cps = _checkpoint_list(checkpoints, T)

    series: dict[int, float] = {}
    x_star = None
    opt_values = None
    # Accumulate in round order so every prefix sum equals sum_costs(costs[:cp]).
    P = np.zeros((params.dim, params.dim))
    q = np.zeros(params.dim)
    r = 0.0
    done = 0
    for cp in cps:
        for cost in costs[done:cp]:
            Pi, qi, ri = cost.quadratic_parts()
            P += Pi
            q += qi
            r += ri
        done = cp
        xs = offline_optimum(instance, SummedCost(P.copy(), q.copy(), r))
        vals = np.array([f.value(xs) for f in costs[:cp]])
        series[cp] = math.fsum(round_regret(rec.f_values, v) for rec, v in zip(records[:cp], vals))
        if cp == T:
            x_star, opt_values = xs, vals

    wall_ms = (time.perf_counter() - start) * 1e3
    result = RunResult(
        algo=algo,
        params=params,
        records=records,
        x_star=x_star,
        regret=series[T],
        regret_series=series,
        wall_ms=wall_ms,
        seed=instance.seed,
        opt_values=opt_values,
    )
    if audit:
        from .audit import audit_run

        result.audit = audit_run(result, instance)
    return result


def run_mp_rogd(
    instance: ProblemInstance,
    params: AlgoParams,
    checkpoints: Iterable[int] | None = None,
    audit: bool = False,
    check_params: bool = True,
) -> RunResult:
    """Run MP-ROGD for ``params.horizon`` rounds on ``instance``."""
    if check_params:
        params.check_safety()
    start = time.perf_counter()
    g_value = instance.constraint.value
    state = MPROGDState.initial(params.dim)
    records, costs = [], []
    for t in range(1, params.horizon + 1):
        f = instance.costs.draw(t)
        costs.append(f)
        state, rec = mp_rogd_step(state, f.value, g_value, params, t)
        records.append(rec)
    return _finish(MP_ROGD, params, instance, records, costs, checkpoints, start, audit)


def run_rogd(
    instance: ProblemInstance,
    params: AlgoParams,
    checkpoints: Iterable[int] | None = None,
    audit: bool = False,
) -> RunResult:
    """First-order baseline with exact gradients at one played point per round."""
    start = time.perf_counter()
    state = MPROGDState.initial(params.dim)
    records, costs = [], []
    for t in range(1, params.horizon + 1):
        f = instance.costs.draw(t)
        costs.append(f)
        state, rec = rogd_step(state, f, instance.constraint, params, t)
        records.append(rec)
    return _finish(ROGD, params, instance, records, costs, checkpoints, start, audit)


def _scaled_projector(instance: ProblemInstance, factor: float):
    ball = instance.constraint.as_ball()
    if ball is not None:
        region = BallRegion(factor * ball[0], factor * ball[1])
        return region.project

    def project(y):
        return factor * instance.constraint.project(y / factor)

    return project


def run_mp_ogd(
    instance: ProblemInstance,
    params: AlgoParams,
    checkpoints: Iterable[int] | None = None,
    audit: bool = False,
) -> RunResult:
    """Multi-point projected OGD with full knowledge of the feasible set.

    ``x_{t+1} = Proj_{(1 - alpha) Y}(x_t - eta grad_est f_t(x_t))``.
    """
    start = time.perf_counter()
    shrink = 1.0 - params.alpha
    X = params.action_set
    if not isinstance(X, BallRegion):
        raise TypeError("MP-OGD needs a ball action set to scale")
    projectors = [X.scaled(shrink).project, _scaled_projector(instance, shrink)]
    x = np.zeros(params.dim)
    records, costs = [], []
    for t in range(1, params.horizon + 1):
        f = instance.costs.draw(t)
        costs.append(f)
        est = forward_diff(f.value, x, params.delta, params.dim)
        g_values = np.array([instance.constraint.value(p) for p in est.points])
        x_next, _ = dykstra(projectors, x - params.eta * est.estimate)
        records.append(RoundRecord(
            t=t,
            points=est.points,
            f_values=est.values,
            g_values=g_values,
            grad_f=est.estimate,
            grad_g=None,
            x=x,
            x_tilde=x,
            x_tilde_next=x_next,
            gamma=math.nan,
        ))
        x = x_next
    return _finish(MP_OGD, params, instance, records, costs, checkpoints, start, audit)


RUNNERS = {MP_ROGD: run_mp_rogd, MP_OGD: run_mp_ogd, ROGD: run_rogd}


def default_params(algo: str, instance: ProblemInstance, T: int, schedule: str = EXPERIMENT) -> AlgoParams:
    if algo == MP_ROGD:
        return schedule_params(instance, T, schedule)
    if algo == MP_OGD:
        return mp_ogd_params(instance, T)
    if algo == ROGD:
        return rogd_params(instance, T)
    raise ValueError(f"unknown algorithm {algo!r}")


def run(algo: str, instance: ProblemInstance, T: int, schedule: str = EXPERIMENT,
        checkpoints: Iterable[int] | None = None, audit: bool = False) -> RunResult:
    return RUNNERS[algo](instance, default_params(algo, instance, T, schedule), checkpoints, audit=audit)
