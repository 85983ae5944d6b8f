"""Random strictly convex QP generator shared by the solver tests."""

import numpy as np

from hcbf.qp import QpProblem


def random_qp(rng, max_vars=12, max_rows=40, feasible=True):
    m = int(rng.integers(1, max_vars + 1))
    k = int(rng.integers(0, max_rows + 1))
    A = rng.normal(size=(m, m))
    H = A @ A.T + rng.uniform(0.1, 2.0) * np.eye(m)
    H = 0.5 * (H + H.T)
    f = rng.normal(size=m) * rng.uniform(0.5, 5.0)
    G = rng.normal(size=(k, m))
    x_feas = rng.normal(size=m) * 0.5
    g = G @ x_feas - rng.exponential(0.5, size=k)
    if not feasible:
        g = g + 10.0
    width = rng.uniform(0.5, 3.0, size=m)
    lb = x_feas - width
    ub = x_feas + width
    # leave a few coordinates unbounded on one or both sides
    lb[rng.random(m) < 0.2] = -np.inf
    ub[rng.random(m) < 0.2] = np.inf
    return QpProblem.build(H, f, G, g, lb, ub)
