"""Problem instances, the two synthetic settings, offline optimum and regret.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``.  The
constraint of an instance is drawn from the stream ``(seed, 0)`` and the
cost of round ``t`` from ``(seed, 1, t)``, so runs with different horizons
on the same seed see identical cost prefixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sets import BallRegion, dykstra, max_quadratic_on_ball

LINEAR = "linear"
QUADRATIC = "quadratic"

_CONSTRAINT_STREAM = 0
_COST_STREAM = 1


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


# --------------------------------------------------------------------------
# constraint


@dataclass(frozen=True)
class QuadraticForm:
    """``g(x) = (x - b)^T A (x - b) + c`` with symmetric PSD ``A``.

    The scalar case ``A = a I`` gives ``a ||x - b||^2 + c``; the diagonal
    case with ``b = 0`` gives ``x^T A x + c``.
    """

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
            raise ValueError("A must be d x d and b of length d")
        if not np.array_equal(A, A.T):
            raise ValueError("A must be exactly symmetric")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def ball(cls, a: float, b, c: float) -> "QuadraticForm":
        b = np.asarray(b, dtype=float)
        return cls(a * np.eye(b.shape[0]), b, c)

    @classmethod
    def diagonal(cls, diag, c: float) -> "QuadraticForm":
        diag = np.asarray(diag, dtype=float)
        return cls(np.diag(diag), np.zeros_like(diag), c)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def value(self, x) -> float:
        diff = np.asarray(x, dtype=float) - self.b
        return float(diff @ self.A @ diff) + self.c

    __call__ = value

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.A @ (np.asarray(x, dtype=float) - self.b)

    def hessian_eigenvalues(self) -> np.ndarray:
        return 2.0 * np.linalg.eigvalsh(self.A)

    @property
    def is_isotropic(self) -> bool:
        return bool(np.array_equal(self.A, self.A[0, 0] * np.eye(self.dim)))

    def as_ball(self) -> tuple[np.ndarray, float] | None:
        """``(center, radius)`` of ``{g <= 0}`` when it is a ball, else None."""
        if not self.is_isotropic or self.A[0, 0] <= 0 or self.c > 0:
            return None
        return self.b.copy(), math.sqrt(-self.c / self.A[0, 0])

    def inner_radius(self) -> float:
        """Radius of the largest origin-centred ball inside ``{g <= 0}``."""
        ball = self.as_ball()
        if ball is not None:
            return max(ball[1] - float(np.linalg.norm(ball[0])), 0.0)
        if np.any(self.b):
            raise NotImplementedError("inner radius only for balls or centred ellipsoids")
        lam_max = float(np.linalg.eigvalsh(self.A)[-1])
        return math.sqrt(max(-self.c, 0.0) / lam_max)

    def project(self, y, tol: float = 1e-15, max_iter: int = 200) -> np.ndarray:
        """Euclidean projection onto the sublevel set ``{g <= 0}``."""
        y = np.asarray(y, dtype=float)
        if self.value(y) <= 0:
            return y
        ball = self.as_ball()
        if ball is not None:
            center, radius = ball
            diff = y - center
            return center + diff * (radius / math.sqrt(float(diff @ diff)))
        if self.c > 0:
            raise ValueError("sublevel set is empty")
        # KKT: x = b + (I + 2 nu A)^{-1}(y - b), with nu > 0 solving g(x) = 0.
        lam, V = np.linalg.eigh(self.A)
        z = V.T @ (y - self.b)

        def level(nu):
            w = z / (1.0 + 2.0 * nu * lam)
            return float(w @ (lam * w)) + self.c

        lo, hi = 0.0, 1.0
        while level(hi) > 0:
            hi *= 2.0
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi) or hi - lo <= tol * hi:
                break
            if level(mid) > 0:
                lo = mid
            else:
                hi = mid
        return self.b + V @ (z / (1.0 + 2.0 * hi * lam))


# --------------------------------------------------------------------------
# cost oracles


class CostOracle:
    """Per-round cost. ``value`` is what the player sees; ``gradient`` is
    reserved for harness code, baselines with first-order feedback and audits."""

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def quadratic_parts(self) -> tuple[np.ndarray, np.ndarray, float]:
        """``(P, q, r)`` with ``f(x) = x^T P x + q^T x + r``."""
        raise NotImplementedError

    def __call__(self, x) -> float:
        return self.value(x)


class LinearCost(CostOracle):
    """``f(x) = theta^T x``."""

    def __init__(self, theta):
        self.theta = np.asarray(theta, dtype=float)

    def value(self, x) -> float:
        return float(self.theta @ x)

    def gradient(self, x) -> np.ndarray:
        return self.theta.copy()

    def quadratic_parts(self):
        d = self.theta.shape[0]
        return np.zeros((d, d)), self.theta.copy(), 0.0


class QuadraticCost(CostOracle):
    """``f(x) = (x - b)^T A (x - b)``."""

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def value(self, x) -> float:
        diff = x - self.b
        return float(diff @ self.A @ diff)

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.A @ (np.asarray(x, dtype=float) - self.b)

    def quadratic_parts(self):
        Ab = self.A @ self.b
        return self.A.copy(), -2.0 * Ab, float(self.b @ Ab)


class SummedCost(CostOracle):
    """Sum of several costs collapsed to ``x^T P x + q^T x + r``."""

    def __init__(self, P, q, r: float = 0.0):
        self.P = np.asarray(P, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.r = float(r)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.P @ x + self.q @ x) + self.r

    def gradient(self, x) -> np.ndarray:
        return 2.0 * self.P @ np.asarray(x, dtype=float) + self.q

    def quadratic_parts(self):
        return self.P.copy(), self.q.copy(), self.r


def sum_costs(costs: Sequence[CostOracle], dim: int) -> SummedCost:
    P = np.zeros((dim, dim))
    q = np.zeros(dim)
    r = 0.0
    for cost in costs:
        Pi, qi, ri = cost.quadratic_parts()
        P += Pi
        q += qi
        r += ri
    return SummedCost(P, q, r)


# --------------------------------------------------------------------------
# cost streams


class CostStream:
    """Seeded, indexable source of round costs (rounds are 1-based)."""

    dim: int

    def draw(self, t: int) -> CostOracle:
        raise NotImplementedError

    def draws(self, horizon: int) -> list[CostOracle]:
        return [self.draw(t) for t in range(1, horizon + 1)]


@dataclass(frozen=True)
class LinearCostStream(CostStream):
    """``theta_t ~ U[0, 1]^d``."""

    seed: int
    dim: int

    def theta(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("rounds start at 1")
        return _rng(self.seed, _COST_STREAM, t).uniform(0.0, 1.0, self.dim)

    def draw(self, t: int) -> LinearCost:
        return LinearCost(self.theta(t))


def quadratic_cost_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    raw = rng.uniform(0.0, 1.0, (dim, dim))
    sym = 0.5 * (raw + raw.T)
    norm = (sym - 0.5 * np.eye(dim)) / (dim - 0.5)
    return 5.0 * (norm + np.eye(dim))


@dataclass(frozen=True)
class QuadraticCostStream(CostStream):
    """``A_t`` from a symmetrised, spectrum-normalised uniform matrix and
    ``b_t ~ U[1, 2]^d``."""

    seed: int
    dim: int

    def params(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        if t < 1:
            raise ValueError("rounds start at 1")
        rng = _rng(self.seed, _COST_STREAM, t)
        A = quadratic_cost_matrix(rng, self.dim)
        b = rng.uniform(1.0, 2.0, self.dim)
        return A, b

    def draw(self, t: int) -> QuadraticCost:
        return QuadraticCost(*self.params(t))


@dataclass(frozen=True)
class ZeroCostStream(CostStream):
    dim: int

    def draw(self, t: int) -> LinearCost:
        return LinearCost(np.zeros(self.dim))


# --------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class ProblemInstance:
    """A safe OCO instance plus the constants the player is told.

    ``constraint`` and the gradients of ``costs`` are harness-side only;
    algorithms receive value queries.
    """

    dim: int
    action_set: BallRegion
    constraint: QuadraticForm
    costs: CostStream
    G: float
    D: float
    L: float
    M: float
    eps: float
    r: float
    setting: str = "custom"
    seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def kappa(self) -> float:
        return self.L / self.M

    def feasible(self, x, tol: float = 0.0) -> bool:
        return self.constraint.value(x) <= tol and self.action_set.contains(x)

    def project_feasible(self, y, tol: float = 1e-12, max_sweeps: int = 10_000) -> np.ndarray:
        """Projection onto ``Y = X ∩ {g <= 0}``."""
        x, _ = dykstra([self.action_set.project, self.constraint.project], y, tol, max_sweeps)
        return x

    def with_costs(self, costs: CostStream) -> "ProblemInstance":
        from dataclasses import replace

        return replace(self, costs=costs)


def max_gradient_norm(cost: CostOracle, center, radius: float) -> float:
    """Exact ``max ||grad f(x)||`` over the ball ``B(center, radius)``."""
    P, q, _ = cost.quadratic_parts()
    P = 0.5 * (P + P.T)
    w = 2.0 * P @ np.asarray(center, dtype=float) + q
    # ||2 P u + w||^2 = u^T (4 P^2) u + 2 (2 P w)^T u + ||w||^2
    top = max_quadratic_on_ball(4.0 * P @ P, 2.0 * P @ w, radius) + float(w @ w)
    return math.sqrt(max(top, 0.0))


def instance_invariants(instance: ProblemInstance, rounds: int = 100) -> dict[str, bool]:
    """Check the standing assumptions of ``instance`` exactly.

    The cost bound is checked on the first ``rounds`` draws.
    """
    g = instance.constraint
    X = instance.action_set
    lam = g.hessian_eigenvalues()
    origin = np.zeros(instance.dim)
    ball = g.as_ball()
    if ball is not None:
        center, xi = ball
        inner_ok = float(np.linalg.norm(center)) + instance.r <= xi
        sub_in_X = float(np.linalg.norm(center - X.center)) + xi <= X.radius
    else:
        if np.any(g.b):
            raise NotImplementedError("invariants only for balls or centred ellipsoids")
        inner_ok = float(lam[-1]) / 2.0 * instance.r**2 + g.c <= 0.0
        sub_in_X = g.c <= 0 and math.sqrt(-g.c / (float(lam[0]) / 2.0)) <= X.radius
    return {
        "condition": instance.L >= instance.M > 0 and instance.kappa > 1,
        "slack": g.value(origin) <= -instance.eps,
        "inner_ball": inner_ok and instance.r + float(np.linalg.norm(X.center)) <= X.radius,
        "gradient_bound": all(
            max_gradient_norm(instance.costs.draw(t), X.center, X.radius) <= instance.G
            for t in range(1, rounds + 1)
        ),
        "diameter": 2.0 * X.radius <= instance.D,
        "curvature": bool(np.all(lam >= instance.M) and np.all(lam <= instance.L)),
        "sublevel_in_X": bool(sub_in_X),
    }


def gen_linear_setting(seed: int, dim: int, paper_epsilon: bool = False) -> ProblemInstance:
    """Linear costs over the unit ball with a random spherical constraint.

    ``g(x) = a ||x - b||^2 - xi^2 a`` with ``a ~ U[1, 10]``, ``b`` uniform on
    the sphere of radius 0.2 and ``xi ~ U[0.3, 0.8]``.

    The reported slack is ``eps = -g(0) = a (xi^2 - 0.04)``.  With
    ``paper_epsilon`` it is ``-c = a xi^2`` instead, which overstates the
    slack at the origin by ``0.04 a``.
    """
    seed = _check_seed(seed)
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    rng = _rng(seed, _CONSTRAINT_STREAM)
    a = rng.uniform(1.0, 10.0)
    direction = rng.standard_normal(dim)
    b = 0.2 * direction / np.linalg.norm(direction)
    xi = rng.uniform(0.3, 0.8)
    c = -(xi**2) * a
    constraint = QuadraticForm.ball(a, b, c)
    eps = -c if paper_epsilon else -constraint.value(np.zeros(dim))
    return ProblemInstance(
        dim=dim,
        action_set=BallRegion.unit(dim),
        constraint=constraint,
        costs=LinearCostStream(seed, dim),
        G=math.sqrt(dim),
        D=2.0,
        L=20.0,
        M=2.0,
        eps=eps,
        r=0.1,
        setting=LINEAR,
        seed=seed,
        meta={"a": a, "b": b, "c": c, "xi": xi},
    )


def gen_quadratic_setting(seed: int, dim: int, paper_sign: bool = False) -> ProblemInstance:
    """Random quadratic costs with a centred ellipsoidal constraint.

    ``g(x) = x^T diag(a) x - min_i a_i`` with ``a ~ U[1, 10]^d``.  Passing
    ``paper_sign`` uses ``+min_i a_i``, which leaves the origin infeasible.
    """
    seed = _check_seed(seed)
    if dim < 2:
        raise ValueError(f"quadratic setting needs dim >= 2, got {dim}")
    rng = _rng(seed, _CONSTRAINT_STREAM)
    a = rng.uniform(1.0, 10.0, dim)
    c = float(np.min(a)) if paper_sign else -float(np.min(a))
    return ProblemInstance(
        dim=dim,
        action_set=BallRegion.unit(dim),
        constraint=QuadraticForm.diagonal(a, c),
        costs=QuadraticCostStream(seed, dim),
        G=60.0,
        D=2.0,
        L=20.0,
        M=2.0,
        eps=1.0,
        r=1.0 / math.sqrt(10.0),
        setting=QUADRATIC,
        seed=seed,
        meta={"a": a, "c": c},
    )


SETTINGS = {LINEAR: gen_linear_setting, QUADRATIC: gen_quadratic_setting}


def make_instance(setting: str, seed: int, dim: int) -> ProblemInstance:
    try:
        gen = SETTINGS[setting]
    except KeyError:
        raise ValueError(f"unknown setting {setting!r}") from None
    return gen(seed, dim)


# --------------------------------------------------------------------------
# offline optimum and regret


class ConvergenceError(RuntimeError):
    pass


def offline_optimum(
    instance: ProblemInstance,
    cost_draws: Sequence[CostOracle] | CostOracle,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
) -> np.ndarray:
    """Best fixed feasible action in hindsight.

    Projected gradient descent on the summed cost over ``X ∩ {g <= 0}``,
    with Dykstra projections, until the iterate moves less than ``tol``.
    """
    total = cost_draws if isinstance(cost_draws, CostOracle) else sum_costs(cost_draws, instance.dim)
    P, q, _ = total.quadratic_parts()
    x = np.zeros(instance.dim)
    if not P.any() and not q.any():
        return x

    curv = 2.0 * float(np.linalg.eigvalsh(0.5 * (P + P.T))[-1])
    qn = float(np.linalg.norm(q))
    if curv > 0:
        step = 1.0 / curv
    else:
        # Linear objective: a step several diameters long lands next to the
        # minimiser, after which the iteration contracts quickly.
        step = 10.0 * instance.D / qn

    x = instance.project_feasible(x)
    for _ in range(max_iter):
        x_next = instance.project_feasible(x - step * total.gradient(x))
        move = x_next - x
        x = x_next
        if math.sqrt(float(move @ move)) < tol:
            return x
    raise ConvergenceError(f"projected gradient did not settle within {max_iter} iterations")


def regret(played_points, x_star, cost_draws: Sequence[CostOracle]) -> float:
    """``(1/k) sum_t sum_i f_t(x_{t,i}) - sum_t f_t(x_*)``.

    ``played_points`` is a ``(T, k, d)`` array or anything with a
    ``played_points`` attribute of that shape (a ``RunResult``).
    """
    pts = np.asarray(getattr(played_points, "played_points", played_points), dtype=float)
    if pts.ndim != 3:
        raise ValueError(f"played points must have shape (T, k, d), got {pts.shape}")
    if pts.shape[0] != len(cost_draws):
        raise ValueError(f"trace has {pts.shape[0]} rounds but {len(cost_draws)} costs were given")
    x_star = np.asarray(x_star, dtype=float)
    return math.fsum(
        round_regret([f.value(p) for p in round_pts], f.value(x_star))
        for f, round_pts in zip(cost_draws, pts)
    )


def round_regret(values, best: float) -> float:
    """One round's contribution ``mean_i (f_t(x_{t,i}) - f_t(x_*))``."""
    return math.fsum(v - best for v in values) / len(values)
