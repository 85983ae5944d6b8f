"""Reference computations that share no code path with the library."""

import numpy as np


def _stack_rows(H, f, G, g, lb, ub):
    m = H.shape[0]
    lo = np.isfinite(lb)
    up = np.isfinite(ub)
    C = np.vstack([G, np.eye(m)[lo], -np.eye(m)[up]])
    b = np.concatenate([g, lb[lo], -ub[up]])
    return C, b


def qp_dual_projected_gradient_batch(problems, iters=6000):
    """Approximate solutions of many small QPs by accelerated projected gradient on their duals.

    Each problem  min 1/2 x'Hx + f'x  s.t. Cx >= b  (box rows folded into C) has dual
    max_{y >= 0} -1/2 y'My + (b + C H^-1 f)'y with M = C H^-1 C'. Problems are padded to
    a common size and iterated together; x(y) = H^-1 (C'y - f).
    """
    packed = [(p.H, p.f) + _stack_rows(p.H, p.f, p.G, p.g, p.lb, p.ub) for p in problems]
    B = len(packed)
    k_max = max(max(C.shape[0] for _, _, C, _ in packed), 1)
    M = np.zeros((B, k_max, k_max))
    q = np.full((B, k_max), -1.0)  # padded rows: y stays at 0
    step = np.empty(B)
    for i, (H, f, C, b) in enumerate(packed):
        k = C.shape[0]
        Hinv = np.linalg.inv(H)
        M[i, :k, :k] = C @ Hinv @ C.T
        q[i, :k] = b + C @ Hinv @ f
        step[i] = 1.0 / max(np.linalg.eigvalsh(M[i]).max(), 1e-12)
    y = np.zeros((B, k_max))
    w = y.copy()
    theta = np.ones(B)
    for _ in range(iters):
        grad = q - (M @ w[:, :, None])[:, :, 0]
        y_new = np.maximum(w + step[:, None] * grad, 0.0)
        # gradient-based adaptive restart
        restart = np.einsum("bi,bi->b", grad, y_new - y) < 0
        theta_new = 0.5 * (1 + np.sqrt(1 + 4 * theta * theta))
        mom = np.where(restart, 0.0, (theta - 1) / theta_new)
        w = y_new + mom[:, None] * (y_new - y)
        theta = np.where(restart, 1.0, theta_new)
        y = y_new
    out = []
    for i, (H, f, C, b) in enumerate(packed):
        yi = y[i, :C.shape[0]]
        out.append((np.linalg.solve(H, C.T @ yi - f), yi))
    return out


def polish(problem, x, y, tol=1e-7):
    """Exact KKT solve on the active set guessed from an approximate primal-dual pair.

    Returns the polished x, or None when the guessed active set does not satisfy the
    optimality conditions.
    """
    H, f = problem.H, problem.f
    C, b = _stack_rows(H, f, problem.G, problem.g, problem.lb, problem.ub)
    scale = max(1.0, np.abs(y).max(initial=0.0))
    act = np.flatnonzero((y > 1e-6 * scale) | (np.abs(C @ x - b) < 1e-7))
    m = H.shape[0]
    for _ in range(C.shape[0] + 1):
        Ca = C[act]
        K = np.block([[H, -Ca.T], [Ca, np.zeros((act.size, act.size))]])
        try:
            sol = np.linalg.lstsq(K, np.concatenate([-f, b[act]]), rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        xp, ya = sol[:m], sol[m:]
        if ya.size and ya.min() < -tol:
            act = np.delete(act, int(np.argmin(ya)))  # drop the wrongly guessed row
            continue
        if (C @ xp - b).min(initial=0.0) < -tol:
            return None
        return xp
    return None


def gift_wrap_hull(points):
    """Convex hull by brute force: keep every edge with all points on one side, then chain them."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) < 3:
        return pts
    edges = {}
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            if i == j:
                continue
            left = right = 0
            on_segment_extension = False
            for k, c in enumerate(pts):
                if k in (i, j):
                    continue
                cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                if cr > 1e-12:
                    left += 1
                elif cr < -1e-12:
                    right += 1
                else:
                    # collinear point beyond the segment: edge a-b is not a hull edge
                    t = ((c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1]))
                    if t < 0 or t > (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2:
                        on_segment_extension = True
            if right == 0 and left > 0 and not on_segment_extension:
                edges[a] = b
    if not edges:
        return []
    start = next(iter(edges))
    hull = [start]
    cur = edges[start]
    while cur != start and len(hull) <= len(pts):
        hull.append(cur)
        cur = edges[cur]
    return hull


def shoelace(poly):
    if len(poly) < 3:
        return 0.0
    x = np.array([p[0] for p in poly])
    y = np.array([p[1] for p in poly])
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def central_difference_jacobian(fk, q, h=1e-6):
    q = np.asarray(q, dtype=float)
    cols = []
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        cols.append((fk(q + e) - fk(q - e)) / (2 * h))
    return np.array(cols).T
