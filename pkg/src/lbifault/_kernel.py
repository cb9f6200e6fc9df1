"""Compiled inner loop of the sparse-Kaczmarz linearized Bregman solver.

Row ``k`` of the slope+step dictionary touches the slope dual and every step
dual ``1..k`` with the *same* increment ``d_k = r_k / ||a_k||^2``.  Within one
sweep the step duals that have already been entered are therefore all shifted
by a common scalar ``t`` (the running sum of the ``d`` values), and each one
can be stored as a frozen offset ``W_c = v_c - t``.  The step part of
``a_k^T beta`` is then

    sum_{c <= k} shrink(W_c + t)
        = sum_pos(W) + n_pos * (t - lam) + sum_neg(W) + n_neg * (t + lam)

where "pos"/"neg" are the entries outside the dead zone.  Entries change
class only when ``t`` drifts across ``+-lam - W_c``; four lazy-deletion heaps
find those crossings, so a row costs O(1) plus O(log N) per crossing instead
of O(k).  The aggregates are rebuilt from scratch at every sweep.
"""

import numpy as np
from numba import njit

# heap slots, each a binary min-heap over (key, idx, ver) in flat arrays
UP = 0  # dead entries keyed on -W: next to turn positive
DOWN = 1  # dead entries keyed on W: next to turn negative
POS = 2  # positive entries keyed on W: next to fall back into the dead zone
NEG = 3  # negative entries keyed on -W: next to rise back into the dead zone


@njit(cache=True, nogil=True, inline="always")
def shrink_scalar(x, lam):
    if x > lam:
        return x - lam
    if x < -lam:
        return x + lam
    return 0.0


@njit(cache=True, nogil=True)
def _sift_down(keys, idx, ver, base, size, pos):
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and keys[base + child + 1] < keys[base + child]:
            child += 1
        a = base + pos
        b = base + child
        if keys[a] <= keys[b]:
            break
        keys[a], keys[b] = keys[b], keys[a]
        idx[a], idx[b] = idx[b], idx[a]
        ver[a], ver[b] = ver[b], ver[a]
        pos = child


@njit(cache=True, nogil=True)
def _compact(keys, idx, ver, base, size, cur_ver):
    out = 0
    for p in range(size):
        q = base + p
        if ver[q] == cur_ver[idx[q]]:
            o = base + out
            keys[o] = keys[q]
            idx[o] = idx[q]
            ver[o] = ver[q]
            out += 1
    for p in range(out // 2 - 1, -1, -1):
        _sift_down(keys, idx, ver, base, out, p)
    return out


@njit(cache=True, nogil=True)
def _push(keys, idx, ver, sizes, h, cap, key, i, cur_ver):
    base = h * cap
    size = sizes[h]
    if size == cap:
        size = _compact(keys, idx, ver, base, size, cur_ver)
    pos = size
    keys[base + pos] = key
    idx[base + pos] = i
    ver[base + pos] = cur_ver[i]
    while pos > 0:
        parent = (pos - 1) >> 1
        a = base + parent
        b = base + pos
        if keys[a] <= keys[b]:
            break
        keys[a], keys[b] = keys[b], keys[a]
        idx[a], idx[b] = idx[b], idx[a]
        ver[a], ver[b] = ver[b], ver[a]
        pos = parent
    sizes[h] = size + 1


@njit(cache=True, nogil=True)
def _pop(keys, idx, ver, sizes, h, cap):
    base = h * cap
    size = sizes[h] - 1
    if size > 0:
        keys[base] = keys[base + size]
        idx[base] = idx[base + size]
        ver[base] = ver[base + size]
        _sift_down(keys, idx, ver, base, size, 0)
    sizes[h] = size


@njit(cache=True, nogil=True)
def _top(keys, idx, ver, sizes, h, cap, cur_ver):
    """Index of the valid top entry of heap ``h`` (stale tops dropped), or -1."""
    base = h * cap
    while sizes[h] > 0:
        if ver[base] == cur_ver[idx[base]]:
            return idx[base]
        _pop(keys, idx, ver, sizes, h, cap)
    return -1


@njit(cache=True, nogil=True)
def lbi_sweeps(y, v, v0, alpha, lam, ramp, shrink_slope, res_norms, active):
    """Run ``alpha`` full sweeps of sparse-Kaczmarz LBI in place.

    Parameters
    ----------
    y : float64 array, shape (n,)
    v : float64 array, shape (n,)
        Step duals (candidate ``c`` at ``v[c - 1]``); updated in place.
    v0 : float
        Slope dual on entry.
    alpha : int
        Number of sweeps.
    lam : float
        Shrinkage threshold.
    ramp : float
        Slope column entry of row ``k`` is ``ramp * k``.
    shrink_slope : bool
        Whether the slope coefficient is soft-thresholded.
    res_norms, active : arrays of length ``alpha``
        Receive the residual norm and active-set size after each sweep.

    Returns
    -------
    float
        The slope dual after the last sweep.
    """
    n = y.shape[0]
    cap = 4 * n + 8
    keys = np.empty(4 * cap)
    idx = np.empty(4 * cap, dtype=np.int64)
    ver = np.empty(4 * cap, dtype=np.int64)
    sizes = np.zeros(4, dtype=np.int64)
    w = np.empty(n)
    cur_ver = np.zeros(n, dtype=np.int64)

    for sweep in range(alpha):
        sizes[:] = 0
        n_pos = 0
        n_neg = 0
        sum_pos = 0.0
        sum_neg = 0.0
        t = 0.0
        for c in range(n):
            k = c + 1
            # candidate k enters with its start-of-sweep dual
            vc = v[c]
            wc = vc - t
            w[c] = wc
            cur_ver[c] += 1
            if vc > lam:
                n_pos += 1
                sum_pos += wc
                _push(keys, idx, ver, sizes, POS, cap, wc, c, cur_ver)
            elif vc < -lam:
                n_neg += 1
                sum_neg += wc
                _push(keys, idx, ver, sizes, NEG, cap, -wc, c, cur_ver)
            else:
                _push(keys, idx, ver, sizes, UP, cap, -wc, c, cur_ver)
                _push(keys, idx, ver, sizes, DOWN, cap, wc, c, cur_ver)

            changed = True
            while changed:
                changed = False
                j = _top(keys, idx, ver, sizes, UP, cap, cur_ver)
                while j >= 0 and w[j] + t > lam:
                    _pop(keys, idx, ver, sizes, UP, cap)
                    cur_ver[j] += 1
                    n_pos += 1
                    sum_pos += w[j]
                    _push(keys, idx, ver, sizes, POS, cap, w[j], j, cur_ver)
                    changed = True
                    j = _top(keys, idx, ver, sizes, UP, cap, cur_ver)
                j = _top(keys, idx, ver, sizes, DOWN, cap, cur_ver)
                while j >= 0 and w[j] + t < -lam:
                    _pop(keys, idx, ver, sizes, DOWN, cap)
                    cur_ver[j] += 1
                    n_neg += 1
                    sum_neg += w[j]
                    _push(keys, idx, ver, sizes, NEG, cap, -w[j], j, cur_ver)
                    changed = True
                    j = _top(keys, idx, ver, sizes, DOWN, cap, cur_ver)
                j = _top(keys, idx, ver, sizes, POS, cap, cur_ver)
                while j >= 0 and w[j] + t <= lam:
                    _pop(keys, idx, ver, sizes, POS, cap)
                    cur_ver[j] += 1
                    n_pos -= 1
                    sum_pos -= w[j]
                    _push(keys, idx, ver, sizes, UP, cap, -w[j], j, cur_ver)
                    _push(keys, idx, ver, sizes, DOWN, cap, w[j], j, cur_ver)
                    changed = True
                    j = _top(keys, idx, ver, sizes, POS, cap, cur_ver)
                j = _top(keys, idx, ver, sizes, NEG, cap, cur_ver)
                while j >= 0 and w[j] + t >= -lam:
                    _pop(keys, idx, ver, sizes, NEG, cap)
                    cur_ver[j] += 1
                    n_neg -= 1
                    sum_neg -= w[j]
                    _push(keys, idx, ver, sizes, UP, cap, -w[j], j, cur_ver)
                    _push(keys, idx, ver, sizes, DOWN, cap, w[j], j, cur_ver)
                    changed = True
                    j = _top(keys, idx, ver, sizes, NEG, cap, cur_ver)

            step_sum = sum_pos + n_pos * (t - lam) + sum_neg + n_neg * (t + lam)
            b0 = shrink_scalar(v0, lam) if shrink_slope else v0
            rk = ramp * k
            d = (y[c] - (rk * b0 + step_sum)) / (rk * rk + k)
            v0 += rk * d
            t += d

        for c in range(n):
            v[c] = w[c] + t
        b0 = shrink_scalar(v0, lam) if shrink_slope else v0
        acc = 0.0
        sq = 0.0
        nnz = 1 if b0 != 0.0 else 0
        for c in range(n):
            bc = shrink_scalar(v[c], lam)
            if bc != 0.0:
                nnz += 1
            acc += bc
            e = y[c] - (ramp * (c + 1) * b0 + acc)
            sq += e * e
        res_norms[sweep] = np.sqrt(sq)
        active[sweep] = nnz
    return v0
