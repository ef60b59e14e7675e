# The optimistic and pessimistic balls for a single round, built by hand.
#
# The optimistic ball is the larger of the two; projecting onto it and X and
# then pulling back toward x_t until the pessimistic ball is reached keeps the
# played point feasible for the true constraint.
#
# Run with:  python3 demos/03_sets_geometry.py

import numpy as np

from safeoco.gradest import forward_diff
from safeoco.sets import BallRegion, build_optimistic, build_pessimistic, max_feasible_mu, project_intersection

X = BallRegion.unit(2)
g = lambda x: 2.0 * float(x @ x) - 0.5       # true constraint, L = M = 4
x_t = np.array([0.2, 0.1])
delta, L, M, D = 1e-3, 4.0, 4.0, 2.0
slack = 0.5 * np.sqrt(2) * L * delta * D

est = forward_diff(g, x_t, delta)
opt = build_optimistic(est.base_value, est.estimate, x_t, M, slack, X)
pess = build_pessimistic(est.base_value, est.estimate, x_t, L, slack, X)
print("optimistic  center", opt.center, "radius", opt.radius)
print("pessimistic center", pess.center, "radius", pess.radius)

# %% an aggressive target far outside the feasible region
target = project_intersection(X, opt, np.array([1.0, 1.0]))
gamma = max_feasible_mu(x_t, target, pess)
x_next = x_t + gamma * (target - x_t)
print("projected target", target, "g =", round(g(target), 6))
print("gamma", round(gamma, 4), "next point", x_next, "g =", round(g(x_next), 6))
