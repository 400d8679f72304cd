"""SGD inner loops.

Each kernel mutates parameter arrays in place and reports divergence through
a status code instead of raising, so the same source runs under numba and
as plain Python. Status codes: 0 ok, 1 utility/prediction, 2 first-order
weights, 3 factors, 4 global bias. Random draws are made by the callers and
passed in as arrays.
"""

import math

import numpy as np

from ._jit import njit

OK, BAD_UTILITY, BAD_W, BAD_V, BAD_W0 = 0, 1, 2, 3, 4
STATUS_GROUPS = {BAD_UTILITY: "g", BAD_W: "w", BAD_V: "V", BAD_W0: "w0"}


@njit
def log_sigmoid_and_delta(g):
    """Return (ln sigmoid(g), 1 / (1 + e^g)) without overflow."""
    if g >= 0.0:
        e = math.exp(-g)
        return -math.log1p(e), e / (1.0 + e)
    e = math.exp(g)
    return g - math.log1p(e), 1.0 / (1.0 + e)


@njit
def pair_update(w, V, u, i, j, zi, zv, lr, reg_w, reg_v, use_bias, ctx, diff):
    """One FM-Pair ascent step on (u, i, j, z); returns (ln sigmoid(g), status).

    ``ctx`` and ``diff`` are length-k scratch buffers. All gradients are taken
    at the parameter values on entry.
    """
    k = V.shape[1]
    nz = zi.shape[0]
    g = 0.0
    if use_bias:
        g = w[i] - w[j]
    for f in range(k):
        s = V[u, f]
        for p in range(nz):
            s += zv[p] * V[zi[p], f]
        ctx[f] = s
        diff[f] = V[i, f] - V[j, f]
        g += s * diff[f]
    if not math.isfinite(g):
        return 0.0, BAD_UTILITY
    loglik, delta = log_sigmoid_and_delta(g)

    status = OK
    if use_bias:
        wi = w[i]
        wj = w[j]
        if i == j:
            # the two gradient terms cancel; the shared weight is shrunk once
            w[i] = wi - lr * reg_w * wi
        else:
            w[i] = wi + lr * (delta - reg_w * wi)
            w[j] = wj + lr * (-delta - reg_w * wj)
        if not (math.isfinite(w[i]) and math.isfinite(w[j])):
            status = BAD_W
    finite = True
    for f in range(k):
        vu = V[u, f]
        vi = V[i, f]
        vj = V[j, f]
        V[u, f] = vu + lr * (delta * diff[f] - reg_v * vu)
        if i == j:
            V[i, f] = vi - lr * reg_v * vi
        else:
            V[i, f] = vi + lr * (delta * ctx[f] - reg_v * vi)
            V[j, f] = vj + lr * (-delta * ctx[f] - reg_v * vj)
        finite = finite and math.isfinite(V[u, f] + V[i, f] + V[j, f])
    for p in range(nz):
        z = zi[p]
        xz = zv[p]
        for f in range(k):
            vz = V[z, f]
            V[z, f] = vz + lr * (delta * xz * diff[f] - reg_v * vz)
            finite = finite and math.isfinite(V[z, f])
    if not finite and status == OK:
        status = BAD_V
    return loglik, status


@njit
def pair_epoch(w, V, users, pos, neg, rows, aux_ptr, aux_idx, aux_val, lr, reg_w, reg_v, use_bias):
    """Apply ``pair_update`` to every sample; returns (sum ln sigmoid(g), status, step)."""
    k = V.shape[1]
    ctx = np.empty(k)
    diff = np.empty(k)
    total = 0.0
    for t in range(users.shape[0]):
        r = rows[t]
        lo = aux_ptr[r]
        hi = aux_ptr[r + 1]
        ll, status = pair_update(
            w, V, users[t], pos[t], neg[t], aux_idx[lo:hi], aux_val[lo:hi], lr, reg_w, reg_v, use_bias, ctx, diff
        )
        if status != OK:
            return total, status, t
        total += ll
    return total, OK, -1


@njit
def _side_sum(V, item, a_idx, a_val, f):
    s = V[item, f]
    for p in range(a_idx.shape[0]):
        s += a_val[p] * V[a_idx[p], f]
    return s


@njit
def pair_update_attr(w, V, u, i, j, zi, zv, ai, av, aj, bv, lr, reg_w, reg_v, use_bias, ctx, P, N, ids, xs, side, gv):
    """FM-Pair step where each item carries its own attribute features.

    The positive side is x(u, i, z, a(i)) and the negative side
    x(u, j, z, a(j)); g = f(pos) - f(neg). ``ai``/``av`` and ``aj``/``bv``
    are the attribute ids and values of i and j. A parameter present on
    both sides gets the sum of its two gradients and one shrinkage term.
    ``ctx``, ``P``, ``N`` (k), ``ids``, ``xs``, ``side`` (m) and ``gv`` (m x k) are
    scratch buffers with m >= 2 + len(ai) + len(aj).
    """
    k = V.shape[1]
    nz = zi.shape[0]
    na = ai.shape[0]
    nb = aj.shape[0]
    g = 0.0
    if use_bias:
        g = w[i] - w[j]
        for p in range(na):
            g += av[p] * w[ai[p]]
        for p in range(nb):
            g -= bv[p] * w[aj[p]]
    for f in range(k):
        s = V[u, f]
        for p in range(nz):
            s += zv[p] * V[zi[p], f]
        ctx[f] = s
        P[f] = _side_sum(V, i, ai, av, f)
        N[f] = _side_sum(V, j, aj, bv, f)
        g += s * (P[f] - N[f])
        # item-side pairwise terms, 0.5 * (sum^2 - sum of squares) per side
        sq = V[i, f] * V[i, f]
        for p in range(na):
            t = av[p] * V[ai[p], f]
            sq += t * t
        g += 0.5 * (P[f] * P[f] - sq)
        sq = V[j, f] * V[j, f]
        for p in range(nb):
            t = bv[p] * V[aj[p], f]
            sq += t * t
        g -= 0.5 * (N[f] * N[f] - sq)
    if not math.isfinite(g):
        return 0.0, BAD_UTILITY
    loglik, delta = log_sigmoid_and_delta(g)

    # item-side entries; gradients taken before any update, xs ends up signed
    m = 2 + na + nb
    ids[0] = i
    xs[0] = 1.0
    side[0] = 1.0
    ids[1] = j
    xs[1] = 1.0
    side[1] = -1.0
    for p in range(na):
        ids[2 + p] = ai[p]
        xs[2 + p] = av[p]
        side[2 + p] = 1.0
    for p in range(nb):
        ids[2 + na + p] = aj[p]
        xs[2 + na + p] = bv[p]
        side[2 + na + p] = -1.0
    for q in range(m):
        x = xs[q]
        for f in range(k):
            own = P[f] if side[q] > 0 else N[f]
            gv[q, f] = side[q] * x * (ctx[f] + own - x * V[ids[q], f])
        xs[q] = side[q] * x
    # insertion sort by id so shared attributes sit next to each other
    for q in range(1, m):
        t = q
        while t > 0 and ids[t - 1] > ids[t]:
            ids[t - 1], ids[t] = ids[t], ids[t - 1]
            xs[t - 1], xs[t] = xs[t], xs[t - 1]
            side[t - 1], side[t] = side[t], side[t - 1]
            for f in range(k):
                gv[t - 1, f], gv[t, f] = gv[t, f], gv[t - 1, f]
            t -= 1

    status = OK
    finite = True
    for f in range(k):
        vu = V[u, f]
        V[u, f] = vu + lr * (delta * (P[f] - N[f]) - reg_v * vu)
        finite = finite and math.isfinite(V[u, f])
    for p in range(nz):
        z = zi[p]
        xz = zv[p]
        for f in range(k):
            vz = V[z, f]
            V[z, f] = vz + lr * (delta * xz * (P[f] - N[f]) - reg_v * vz)
            finite = finite and math.isfinite(V[z, f])
    q = 0
    while q < m:
        fid = ids[q]
        end = q + 1
        while end < m and ids[end] == fid:
            end += 1
        for f in range(k):
            acc = 0.0
            for t in range(q, end):
                acc += gv[t, f]
            v = V[fid, f]
            V[fid, f] = v + lr * (delta * acc - reg_v * v)
            finite = finite and math.isfinite(V[fid, f])
        if use_bias:
            acc = 0.0
            for t in range(q, end):
                acc += xs[t]
            b = w[fid]
            w[fid] = b + lr * (delta * acc - reg_w * b)
            if not math.isfinite(w[fid]):
                status = BAD_W
        q = end
    if not finite and status == OK:
        status = BAD_V
    return loglik, status


@njit
def pair_epoch_attr(
    w, V, users, pos, neg, rows, aux_ptr, aux_idx, aux_val, attr_ptr, attr_idx, attr_val, item_lo,
    lr, reg_w, reg_v, use_bias,
):
    """``pair_epoch`` with per-item attribute features (CSR over item id - ``item_lo``)."""
    k = V.shape[1]
    widest = 0
    for r in range(attr_ptr.shape[0] - 1):
        widest = max(widest, attr_ptr[r + 1] - attr_ptr[r])
    m = 2 + 2 * widest
    ctx = np.empty(k)
    P = np.empty(k)
    N = np.empty(k)
    ids = np.empty(m, dtype=np.int64)
    xs = np.empty(m)
    side = np.empty(m)
    gv = np.empty((m, k))
    total = 0.0
    for t in range(users.shape[0]):
        r = rows[t]
        i = pos[t]
        j = neg[t]
        a0 = attr_ptr[i - item_lo]
        a1 = attr_ptr[i - item_lo + 1]
        b0 = attr_ptr[j - item_lo]
        b1 = attr_ptr[j - item_lo + 1]
        ll, status = pair_update_attr(
            w, V, users[t], i, j, aux_idx[aux_ptr[r] : aux_ptr[r + 1]], aux_val[aux_ptr[r] : aux_ptr[r + 1]],
            attr_idx[a0:a1], attr_val[a0:a1], attr_idx[b0:b1], attr_val[b0:b1],
            lr, reg_w, reg_v, use_bias, ctx, P, N, ids, xs, side, gv,
        )
        if status != OK:
            return total, status, t
        total += ll
    return total, OK, -1


@njit
def bprmf_epoch(P, Q, users, pos, neg, lr, reg):
    """BPR with a plain MF utility; ``users``/``pos``/``neg`` index rows of P and Q."""
    k = P.shape[1]
    diff = np.empty(k)
    total = 0.0
    for t in range(users.shape[0]):
        u = users[t]
        i = pos[t]
        j = neg[t]
        g = 0.0
        for f in range(k):
            diff[f] = Q[i, f] - Q[j, f]
            g += P[u, f] * diff[f]
        if not math.isfinite(g):
            return total, BAD_UTILITY, t
        ll, delta = log_sigmoid_and_delta(g)
        total += ll
        finite = True
        for f in range(k):
            pu = P[u, f]
            qi = Q[i, f]
            qj = Q[j, f]
            P[u, f] = pu + lr * (delta * diff[f] - reg * pu)
            if i == j:
                Q[i, f] = qi - lr * reg * qi
            else:
                Q[i, f] = qi + lr * (delta * pu - reg * qi)
                Q[j, f] = qj + lr * (-delta * pu - reg * qj)
            finite = finite and math.isfinite(P[u, f] + Q[i, f] + Q[j, f])
        if not finite:
            return total, BAD_V, t
    return total, OK, -1


@njit
def pointwise_update(w0, w, V, xi, xv, y, lr, reg_w0, reg_w, reg_v, q):
    """One squared-loss descent step; ``w0`` is a length-1 array. Returns (sq. error, status)."""
    k = V.shape[1]
    nz = xi.shape[0]
    pred = w0[0]
    for p in range(nz):
        pred += w[xi[p]] * xv[p]
    inter = 0.0
    for f in range(k):
        s = 0.0
        s2 = 0.0
        for p in range(nz):
            vx = V[xi[p], f] * xv[p]
            s += vx
            s2 += vx * vx
        q[f] = s
        inter += s * s - s2
    pred += 0.5 * inter
    if not math.isfinite(pred):
        return 0.0, BAD_UTILITY
    e = pred - y
    b = w0[0]
    w0[0] = b - lr * (2.0 * e + 2.0 * reg_w0 * b)
    if not math.isfinite(w0[0]):
        return e * e, BAD_W0
    status = OK
    for p in range(nz):
        j = xi[p]
        x = xv[p]
        wj = w[j]
        w[j] = wj - lr * (2.0 * e * x + 2.0 * reg_w * wj)
        if not math.isfinite(w[j]):
            status = BAD_W
        for f in range(k):
            v = V[j, f]
            V[j, f] = v - lr * (2.0 * e * x * (q[f] - v * x) + 2.0 * reg_v * v)
            if status == OK and not math.isfinite(V[j, f]):
                status = BAD_V
    return e * e, status


@njit
def pointwise_epoch(w0, w, V, order, x_ptr, x_idx, x_val, y, lr, reg_w0, reg_w, reg_v):
    q = np.empty(V.shape[1])
    total = 0.0
    for t in range(order.shape[0]):
        r = order[t]
        lo = x_ptr[r]
        hi = x_ptr[r + 1]
        se, status = pointwise_update(w0, w, V, x_idx[lo:hi], x_val[lo:hi], y[r], lr, reg_w0, reg_w, reg_v, q)
        if status != OK:
            return total, status, t
        total += se
    return total, OK, -1


@njit
def predict_csr(w0, w, V, x_ptr, x_idx, x_val):
    """FM scores of every row of a CSR matrix."""
    m = x_ptr.shape[0] - 1
    k = V.shape[1]
    out = np.empty(m)
    for r in range(m):
        lo = x_ptr[r]
        hi = x_ptr[r + 1]
        acc = w0
        for p in range(lo, hi):
            acc += w[x_idx[p]] * x_val[p]
        inter = 0.0
        for f in range(k):
            s = 0.0
            s2 = 0.0
            for p in range(lo, hi):
                vx = V[x_idx[p], f] * x_val[p]
                s += vx
                s2 += vx * vx
            inter += s * s - s2
        out[r] = acc + 0.5 * inter
    return out
