"""Ball-form action sets, Dykstra projection and the safe line search.

Both the optimistic and the pessimistic set of a round are sublevel sets of
a quadratic with isotropic curvature, so completing the square turns each
into a Euclidean ball intersected with the known action set X.  Everything
here works on that canonical form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

OPTIMISTIC = "optimistic"
PESSIMISTIC = "pessimistic"


class EmptySetError(ValueError):
    """A ball set has negative squared radius."""


class ProjectionError(RuntimeError):
    """Dykstra's iteration hit its sweep cap before settling."""


class PreconditionError(ValueError):
    """The line-search start point lies outside the pessimistic set."""


class Region(Protocol):
    """Closed convex set offering membership and Euclidean projection."""

    def contains(self, x: np.ndarray) -> bool: ...

    def project(self, y: np.ndarray) -> np.ndarray: ...


def project_ball(y: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    diff = y - center
    norm = math.sqrt(float(diff @ diff))
    if norm <= radius:
        return y
    scale = radius / norm
    x = center + diff * scale
    # Rounding can leave x a few ulps outside; pull it in until it is not.
    while float((x - center) @ (x - center)) > radius * radius and scale > 0:
        scale = float(np.nextafter(scale, 0.0)) * (1.0 - 2.0**-50)
        x = center + diff * scale
    return x


@dataclass(frozen=True)
class BallRegion:
    """Closed Euclidean ball ``{x : ||x - center|| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not self.radius >= 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")

    @classmethod
    def unit(cls, dim: int) -> "BallRegion":
        return cls(np.zeros(dim), 1.0)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, x: np.ndarray) -> bool:
        diff = x - self.center
        return bool(diff @ diff <= self.radius * self.radius)

    def project(self, y: np.ndarray) -> np.ndarray:
        return project_ball(y, self.center, self.radius)

    def scaled(self, factor: float) -> "BallRegion":
        """The image of this ball under ``x -> factor * x``."""
        return BallRegion(factor * self.center, factor * self.radius)


@dataclass(frozen=True)
class BallSet:
    """``{x in ambient : ||x - center||^2 <= radius_sq}``.

    ``radius_sq`` is kept as computed (it may be negative, which marks the
    empty set) so membership never goes through a square root.
    """

    center: np.ndarray
    radius_sq: float
    ambient: Region
    kind: str = OPTIMISTIC
    radius: float = field(init=False)

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius_sq", float(self.radius_sq))
        object.__setattr__(self, "radius", math.sqrt(max(self.radius_sq, 0.0)))

    @property
    def empty(self) -> bool:
        return self.radius_sq < 0

    def ball_contains(self, x: np.ndarray) -> bool:
        diff = x - self.center
        return bool(diff @ diff <= self.radius_sq)

    def contains(self, x: np.ndarray) -> bool:
        return self.ball_contains(x) and self.ambient.contains(x)

    def project_ball(self, y: np.ndarray) -> np.ndarray:
        """Projection onto the ball alone (ignores the ambient set)."""
        if self.empty:
            raise EmptySetError(f"{self.kind} set is empty (radius^2 = {self.radius_sq})")
        return project_ball(y, self.center, self.radius)


def _complete_square(g_val, g_grad_est, x_t, curvature, offset):
    # offset + g^T (x - x_t) + (curvature / 2) ||x - x_t||^2 <= 0
    g_grad_est = np.asarray(g_grad_est, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    center = x_t - g_grad_est / curvature
    radius_sq = float(g_grad_est @ g_grad_est) / curvature**2 - 2.0 * offset / curvature
    return center, radius_sq


def build_optimistic(g_val: float, g_grad_est, x_t, M: float, slack: float, X: Region) -> BallSet:
    """Outer estimate of the feasible set from M-strong convexity.

    ``{x in X : g_val - slack + g_grad_est.(x - x_t) + M/2 ||x - x_t||^2 <= 0}``
    """
    if M <= 0:
        raise ValueError("strong convexity constant must be positive")
    center, radius_sq = _complete_square(g_val, g_grad_est, x_t, M, g_val - slack)
    return BallSet(center, radius_sq, X, OPTIMISTIC)


def build_pessimistic(g_val: float, g_grad_est, x_t, L: float, slack: float, X: Region) -> BallSet:
    """Inner estimate of the feasible set from L-smoothness.

    ``{x in X : g_val + slack + g_grad_est.(x - x_t) + L/2 ||x - x_t||^2 <= 0}``
    """
    if L <= 0:
        raise ValueError("smoothness constant must be positive")
    center, radius_sq = _complete_square(g_val, g_grad_est, x_t, L, g_val + slack)
    return BallSet(center, radius_sq, X, PESSIMISTIC)


def contains(ball_set: BallSet, x) -> bool:
    return ball_set.contains(np.asarray(x, dtype=float))


def dykstra(
    projectors: Sequence[Callable[[np.ndarray], np.ndarray]],
    y,
    tol: float = 1e-12,
    max_sweeps: int = 10_000,
) -> tuple[np.ndarray, int]:
    """Euclidean projection onto an intersection by Dykstra's algorithm.

    Returns the point and the number of sweeps used.  The result lies in the
    last set exactly and in the others up to the final sweep's movement.
    """
    x = np.array(y, dtype=float)
    increments = [np.zeros_like(x) for _ in projectors]
    for sweep in range(1, max_sweeps + 1):
        x_prev = x
        for i, proj in enumerate(projectors):
            shifted = x + increments[i]
            x = proj(shifted)
            increments[i] = shifted - x
        move = x - x_prev
        if math.sqrt(float(move @ move)) < tol:
            return x, sweep
    raise ProjectionError(f"Dykstra did not settle within {max_sweeps} sweeps")


def project_intersection(
    X: Region, ball: BallSet, y, tol: float = 1e-12, max_sweeps: int = 10_000
) -> np.ndarray:
    """Projection of ``y`` onto ``X ∩ ball``; the result lies exactly in X."""
    if ball.empty:
        raise EmptySetError(f"{ball.kind} set is empty (radius^2 = {ball.radius_sq})")
    x, _ = dykstra([ball.project_ball, X.project], y, tol=tol, max_sweeps=max_sweeps)
    return x


def _largest_root(x_t, y, a, center, radius_sq) -> float:
    # a mu^2 + b mu + q <= 0 with q <= 0; larger root of the quadratic.
    off = x_t - center
    b = 2.0 * float(y @ off)
    q = float(off @ off) - radius_sq
    disc = math.sqrt(max(b * b - 4.0 * a * q, 0.0))
    if b > 0:
        if q >= 0:
            return 0.0
        return -2.0 * q / (b + disc)
    return (-b + disc) / (2.0 * a)


def max_feasible_mu(x_t, target, pess: BallSet, bisect_iters: int = 64) -> float:
    """Largest ``mu in [0, 1]`` with ``x_t + mu (target - x_t)`` in ``pess``.

    Closed form on both balls when the ambient set is a ``BallRegion``;
    bisection against ``pess.ambient.contains`` otherwise.
    """
    x_t = np.asarray(x_t, dtype=float)
    target = np.asarray(target, dtype=float)
    if pess.empty or not pess.contains(x_t):
        raise PreconditionError("line search start point is outside the pessimistic set")
    y = target - x_t
    a = float(y @ y)
    if a == 0.0:
        return 1.0

    mu = min(1.0, _largest_root(x_t, y, a, pess.center, pess.radius_sq))
    ambient = pess.ambient
    if isinstance(ambient, BallRegion):
        mu = min(mu, _largest_root(x_t, y, a, ambient.center, ambient.radius**2))
    elif not ambient.contains(x_t + mu * y):
        lo, hi = 0.0, mu
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            if ambient.contains(x_t + mid * y):
                lo = mid
            else:
                hi = mid
        mu = lo
    mu = max(mu, 0.0)

    # Rounding in the root can land a hair outside; walk back until exact.
    steps = 0
    while mu > 0.0 and not pess.contains(x_t + mu * y):
        mu = float(np.nextafter(mu, 0.0)) if steps < 16 else mu * (1.0 - 2.0**-40)
        steps += 1
    return mu


def max_quadratic_on_ball(H, g, radius: float) -> float:
    """``max u^T H u + 2 g^T u`` over ``||u|| <= radius`` for PSD ``H``.

    The maximiser of a convex quadratic sits on the sphere; it solves
    ``(nu I - H) u = g`` with ``nu >= lambda_max(H)``, found by bisection on
    the secular equation in the eigenbasis of ``H``.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    if radius == 0:
        return 0.0
    lam, V = np.linalg.eigh(H)
    gt = V.T @ g
    lam_max = lam[-1]
    scale = max(1.0, float(np.max(np.abs(lam))), float(np.linalg.norm(g)))
    top = np.isclose(lam, lam_max, rtol=0, atol=1e-14 * scale)

    def norm_sq(nu):
        return float(np.sum(gt**2 / (nu - lam) ** 2))

    if np.all(np.abs(gt[top]) <= 1e-14 * scale):
        # Possible hard case: nu = lambda_max if the remainder is short enough.
        rest = ~top
        partial = np.zeros_like(gt)
        partial[rest] = gt[rest] / (lam_max - lam[rest])
        used = float(partial @ partial)
        if used <= radius**2:
            u = partial.copy()
            u[np.argmax(top)] = math.sqrt(radius**2 - used)
            return float(u @ (lam * u) + 2.0 * gt @ u)

    gnorm = float(np.linalg.norm(gt))
    lo = lam_max
    hi = lam_max + gnorm / radius + 1.0
    while norm_sq(hi) > radius**2:
        hi = lam_max + 2.0 * (hi - lam_max)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if norm_sq(mid) > radius**2:
            lo = mid
        else:
            hi = mid
    u = gt / (hi - lam)
    u *= radius / max(float(np.linalg.norm(u)), 1e-300)
    return float(u @ (lam * u) + 2.0 * gt @ u)
