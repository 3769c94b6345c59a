"""Hot numeric kernels.

Every kernel exists twice: an explicit-loop version compiled with numba and
a vectorized numpy version. The public names bind to one of them at import
time according to :data:`lipgo._accel.USE_NUMBA`; both are importable under
their suffixed names so they can be compared against each other.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "cone_minorant",
    "hull_select",
    "gkls_values",
    "gkls_gradients",
    "BACKEND",
]


# ---------------------------------------------------------------------------
# cone minorant: max_i (z_i - L * ||x - x_i||)


@njit
def cone_minorant_numba(points, values, lipschitz, queries):
    k, n = points.shape
    q = queries.shape[0]
    out = np.empty(q)
    for p in range(q):
        best = -np.inf
        for i in range(k):
            acc = 0.0
            for j in range(n):
                diff = queries[p, j] - points[i, j]
                acc += diff * diff
            cand = values[i] - lipschitz * np.sqrt(acc)
            if cand > best:
                best = cand
        out[p] = best
    return out


def cone_minorant_numpy(points, values, lipschitz, queries):
    diff = queries[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.einsum("qkn,qkn->qk", diff, diff))
    return np.max(values[None, :] - lipschitz * dist, axis=1)


# ---------------------------------------------------------------------------
# potential optimality over (measure, value) pairs
#
# A point i is selected iff some K > 0 gives
#     f_i - K d_i <= f_j - K d_j  for all j,   f_i - K d_i <= threshold.
# Only per-measure minima can qualify; among those the candidates are the
# vertices of the lower-right convex hull starting at the lowest value
# (rightmost on ties). Collinear hull points are kept since they admit
# exactly one K.


def hull_select_numba(d, f, threshold):
    # numpy's sort is several times faster than numba's, so only the scan
    # is compiled
    return _hull_scan(d, f, np.argsort(d), threshold)


@njit
def _hull_scan(d, f, order, threshold):
    n = d.shape[0]
    group = np.empty(n, dtype=np.int64)
    gd = np.empty(n)
    gf = np.empty(n)
    ng = 0
    for r in range(n):
        i = order[r]
        if ng == 0 or d[i] != gd[ng - 1]:
            gd[ng] = d[i]
            gf[ng] = f[i]
            ng += 1
        elif f[i] < gf[ng - 1]:
            gf[ng - 1] = f[i]
        group[i] = ng - 1

    start = 0
    for g in range(ng):
        if gf[g] <= gf[start]:
            start = g

    hull = np.empty(ng, dtype=np.int64)
    h = 0
    for g in range(start, ng):
        while h >= 2:
            o = hull[h - 2]
            a = hull[h - 1]
            cross = (gd[a] - gd[o]) * (gf[g] - gf[o]) - (gf[a] - gf[o]) * (gd[g] - gd[o])
            if cross < 0.0:
                h -= 1
            else:
                break
        hull[h] = g
        h += 1

    chosen = np.zeros(ng, dtype=np.bool_)
    for k in range(h):
        g = hull[k]
        if k == h - 1:
            chosen[g] = True
            continue
        nxt = hull[k + 1]
        k_high = (gf[nxt] - gf[g]) / (gd[nxt] - gd[g])
        if k_high > 0.0 and gf[g] - k_high * gd[g] <= threshold:
            chosen[g] = True

    mask = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        g = group[i]
        if chosen[g] and f[i] == gf[g]:
            mask[i] = True
    return mask


def hull_select_numpy(d, f, threshold):
    gd, group = np.unique(d, return_inverse=True)
    gf = np.full(gd.shape[0], np.inf)
    np.minimum.at(gf, group, f)
    ng = gd.shape[0]
    start = ng - 1 - int(np.argmin(gf[::-1]))

    hull = []
    for g in range(start, ng):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (gd[a] - gd[o]) * (gf[g] - gf[o]) - (gf[a] - gf[o]) * (gd[g] - gd[o])
            if cross < 0.0:
                hull.pop()
            else:
                break
        hull.append(g)

    hull = np.asarray(hull)
    chosen = np.zeros(ng, dtype=bool)
    chosen[hull[-1]] = True
    if hull.size > 1:
        left, right = hull[:-1], hull[1:]
        k_high = (gf[right] - gf[left]) / (gd[right] - gd[left])
        chosen[left] = (k_high > 0.0) & (gf[left] - k_high * gd[left] <= threshold)
    return chosen[group] & (f == gf[group])


# ---------------------------------------------------------------------------
# GKLS differentiable class: paraboloid ||x - T||^2 + t, replaced inside each
# ball (M_i, rho_i) by a cubic in s = ||x - M_i|| that matches value and
# gradient on the sphere and bottoms out at f_i in the centre.
#
#   C_i(x) = 2<u,w> s^2 / rho^2 - 2 A s^3 / rho^3 + s^2 - 4 <u,w> s / rho
#            + 3 A s^2 / rho^2 + f_i
#   u = x - M_i,  w = T - M_i,  A = ||w||^2 + t - f_i


@njit
def gkls_values_numba(x, vertex, floor, centers, minima, radii, coef_a):
    q, n = x.shape
    m = centers.shape[0]
    out = np.empty(q)
    for p in range(q):
        par = 0.0
        for j in range(n):
            diff = x[p, j] - vertex[j]
            par += diff * diff
        val = par + floor
        for i in range(m):
            ss = 0.0
            for j in range(n):
                diff = x[p, j] - centers[i, j]
                ss += diff * diff
            rho = radii[i]
            if ss < rho * rho:
                s = np.sqrt(ss)
                uw = 0.0
                for j in range(n):
                    uw += (x[p, j] - centers[i, j]) * (vertex[j] - centers[i, j])
                a = coef_a[i]
                val = (
                    2.0 * uw * ss / (rho * rho)
                    - 2.0 * a * ss * s / (rho * rho * rho)
                    + ss
                    - 4.0 * uw * s / rho
                    + 3.0 * a * ss / (rho * rho)
                    + minima[i]
                )
                break
        out[p] = val
    return out


@njit
def gkls_gradients_numba(x, vertex, floor, centers, minima, radii, coef_a):
    q, n = x.shape
    m = centers.shape[0]
    out = np.empty((q, n))
    for p in range(q):
        for j in range(n):
            out[p, j] = 2.0 * (x[p, j] - vertex[j])
        for i in range(m):
            ss = 0.0
            for j in range(n):
                diff = x[p, j] - centers[i, j]
                ss += diff * diff
            rho = radii[i]
            if ss < rho * rho:
                if ss == 0.0:
                    for j in range(n):
                        out[p, j] = 0.0
                    break
                s = np.sqrt(ss)
                uw = 0.0
                for j in range(n):
                    uw += (x[p, j] - centers[i, j]) * (vertex[j] - centers[i, j])
                a = coef_a[i]
                cw = 2.0 * ss / (rho * rho) - 4.0 * s / rho
                cu = (
                    4.0 * uw / (rho * rho)
                    - 6.0 * a * s / (rho * rho * rho)
                    + 2.0
                    - 4.0 * uw / (rho * s)
                    + 6.0 * a / (rho * rho)
                )
                for j in range(n):
                    out[p, j] = cw * (vertex[j] - centers[i, j]) + cu * (x[p, j] - centers[i, j])
                break
    return out


def _ball_terms(x, vertex, centers, radii):
    u = x[:, None, :] - centers[None, :, :]
    ss = np.einsum("qmn,qmn->qm", u, u)
    inside = ss < radii[None, :] ** 2
    # balls are disjoint, so at most one hit per row
    hit = inside.any(axis=1)
    ball = np.argmax(inside, axis=1)
    rows = np.nonzero(hit)[0]
    b = ball[rows]
    u_hit = u[rows, b, :]
    ss_hit = ss[rows, b]
    w_hit = vertex[None, :] - centers[b]
    uw = np.einsum("qn,qn->q", u_hit, w_hit)
    return rows, b, u_hit, w_hit, ss_hit, uw


def gkls_values_numpy(x, vertex, floor, centers, minima, radii, coef_a):
    diff = x - vertex[None, :]
    out = np.einsum("qn,qn->q", diff, diff) + floor
    rows, b, _, _, ss, uw = _ball_terms(x, vertex, centers, radii)
    if rows.size:
        s = np.sqrt(ss)
        rho = radii[b]
        a = coef_a[b]
        out[rows] = (
            2.0 * uw * ss / rho**2
            - 2.0 * a * ss * s / rho**3
            + ss
            - 4.0 * uw * s / rho
            + 3.0 * a * ss / rho**2
            + minima[b]
        )
    return out


def gkls_gradients_numpy(x, vertex, floor, centers, minima, radii, coef_a):
    out = 2.0 * (x - vertex[None, :])
    rows, b, u, w, ss, uw = _ball_terms(x, vertex, centers, radii)
    if rows.size:
        s = np.sqrt(ss)
        rho = radii[b]
        a = coef_a[b]
        safe_s = np.where(s > 0.0, s, 1.0)
        cw = 2.0 * ss / rho**2 - 4.0 * s / rho
        cu = 4.0 * uw / rho**2 - 6.0 * a * s / rho**3 + 2.0 - 4.0 * uw / (rho * safe_s) + 6.0 * a / rho**2
        grad = cw[:, None] * w + cu[:, None] * u
        grad[s == 0.0] = 0.0
        out[rows] = grad
    return out


if USE_NUMBA:
    BACKEND = "numba"
    cone_minorant = cone_minorant_numba
    hull_select = hull_select_numba
    gkls_values = gkls_values_numba
    gkls_gradients = gkls_gradients_numba
else:
    BACKEND = "numpy"
    cone_minorant = cone_minorant_numpy
    hull_select = hull_select_numpy
    gkls_values = gkls_values_numpy
    gkls_gradients = gkls_gradients_numpy
