"""Scalar-loop kernels compiled with numba.

The numpy twin in :mod:`slnet.kernels.vec` implements the same arithmetic on
arrays; both are exercised against each other in the test-suite.
"""

import math

import numpy as np

from .._accel import njit

INVPHI = 0.6180339887498949
GOLDEN_ITERS = 90

# member table columns
M_TYPE, M_Z, M_VAL, M_KAPPA, M_LO, M_HI, M_BETA, M_ARC, M_KIND, M_C, M_LAM, M_T0, M_T1, M_DIR = range(14)
M_COLS = 14
MEMBER_NODE, MEMBER_CELL, MEMBER_EXIT = 0, 1, 2


@njit
def lag(kind, c, lam, t0, t1, tab_a, tab_v, alpha):
    if kind == 0:
        return 0.5 * alpha * alpha + c
    if kind == 1:
        a = abs(alpha) + 1.0
        return 0.25 * lam * a * a + c
    if alpha < tab_a[t0] - 1e-12 or alpha > tab_a[t1 - 1] + 1e-12:
        return np.inf
    if alpha <= tab_a[t0]:
        return tab_v[t0] + c
    if alpha >= tab_a[t1 - 1]:
        return tab_v[t1 - 1] + c
    lo = t0
    hi = t1 - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tab_a[mid] <= alpha:
            lo = mid
        else:
            hi = mid
    w = (alpha - tab_a[lo]) / (tab_a[hi] - tab_a[lo])
    return tab_v[lo] + w * (tab_v[hi] - tab_v[lo]) + c


@njit
def argmax(kind, lam, t0, t1, tab_a, tab_v, p):
    if kind == 0:
        return p
    if kind == 1:
        x = 2.0 * abs(p) / lam - 1.0
        if x <= 0.0:
            return 0.0
        return x if p > 0 else -x
    best = -np.inf
    arg = tab_a[t0]
    for k in range(t0, t1):
        s = tab_a[k] * p - tab_v[k]
        if s > best:
            best = s
            arg = tab_a[k]
    return arg


@njit
def ham(kind, c, lam, t0, t1, tab_a, tab_v, p):
    a = argmax(kind, lam, t0, t1, tab_a, tab_v, p)
    return a * p - lag(kind, c, lam, t0, t1, tab_a, tab_v, a)


@njit
def speed(kind, c, lam, t0, t1, tab_a, tab_v, level, direction):
    if level == -np.inf:
        return 0.0
    if kind == 0:
        x = 2.0 * (level + c)
        return math.sqrt(x) if x > 0.0 else 0.0
    if kind == 1:
        x = 1.0 + 4.0 * (level + c) / lam
        return math.sqrt(x) if x > 0.0 else 0.0
    if direction > 0:
        for k in range(t0, t1 - 1):
            a0 = tab_a[k]
            a1 = tab_a[k + 1]
            if a1 <= 0.0:
                continue
            s = (tab_v[k + 1] - tab_v[k]) / (a1 - a0)
            if s * a0 - tab_v[k] - c > level:
                return max(a0, 0.0)
        return max(tab_a[t1 - 1], 0.0)
    for k in range(t1 - 1, t0, -1):
        if tab_a[k - 1] >= 0.0:
            continue
        s = (tab_v[k] - tab_v[k - 1]) / (tab_a[k] - tab_a[k - 1])
        if s * tab_a[k] - tab_v[k] - c > level:
            return max(-tab_a[k], 0.0)
    return max(-tab_a[t0], 0.0)


@njit
def energy(kind, c, lam, alpha):
    """``alpha L'(alpha) - L(alpha)``, the Hamiltonian at the slope dual to ``alpha`` (closed forms only)."""
    if kind == 0:
        return 0.5 * alpha * alpha - c
    return 0.25 * lam * (alpha * alpha - 1.0) - c


@njit
def max_speed(kind, t0, t1, tab_a, direction):
    if kind != 2:
        return np.inf
    if direction > 0:
        return max(tab_a[t1 - 1], 0.0)
    return max(-tab_a[t0], 0.0)


@njit
def member_value(mem, i, bar_l0, r, tab_a, tab_v):
    """Cheapest way to spend time ``r`` ending at the node through member ``i``.

    Returns ``(value, time spent moving on the member's arc)``.
    """
    mtype = int(mem[i, M_TYPE])
    if mtype == MEMBER_EXIT:
        return mem[i, M_VAL], 0.0
    kind = int(mem[i, M_KIND])
    c = mem[i, M_C]
    lam = mem[i, M_LAM]
    t0 = int(mem[i, M_T0])
    t1 = int(mem[i, M_T1])
    if mtype == MEMBER_CELL:
        lo = mem[i, M_LO]
        if r < lo * (1.0 - 1e-14):
            return np.inf, 0.0
        if mem[i, M_KAPPA] <= bar_l0:
            t = min(mem[i, M_HI], r)
        else:
            t = min(lo, r)
        val = mem[i, M_VAL] + mem[i, M_KAPPA] * t
        if r > t:
            val += (r - t) * bar_l0
        return val, t
    z = mem[i, M_Z]
    dirsign = mem[i, M_DIR]
    if z == 0.0:
        l0 = lag(kind, c, lam, t0, t1, tab_a, tab_v, 0.0)
        if r <= 0.0:
            return mem[i, M_VAL], 0.0
        if l0 <= bar_l0:
            return mem[i, M_VAL] + r * l0, r
        return mem[i, M_VAL] + r * bar_l0, 0.0
    if r <= 0.0:
        return np.inf, 0.0
    t = r
    if bar_l0 < np.inf:
        sp = speed(kind, c, lam, t0, t1, tab_a, tab_v, -bar_l0, dirsign)
        if sp > 0.0 and z / sp < r:
            t = z / sp
    val = mem[i, M_VAL] + t * lag(kind, c, lam, t0, t1, tab_a, tab_v, dirsign * z / t)
    if r > t:
        val += (r - t) * bar_l0
    return val, t


@njit
def crossing_value(tau, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v):
    arc_cost = tau * lag(ikind, ic, ilam, it0, it1, tab_a, tab_v, sig_i * d / tau)
    rest, t = member_value(mem, i, bar_l0, dt - tau, tab_a, tab_v)
    return arc_cost + rest, t


@njit
def golden_crossing(a, b, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v):
    """Minimise the convex crossing cost over ``tau in [a, b]``; returns (value, tau, t_arc)."""
    fa, ta = crossing_value(a, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v)
    fb, tb = crossing_value(b, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v)
    best, btau, bt = fa, a, ta
    if fb < best:
        best, btau, bt = fb, b, tb
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, t1_ = crossing_value(x1, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v)
    f2, t2_ = crossing_value(x2, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v)
    lo, hi = a, b
    for _ in range(GOLDEN_ITERS):
        if f1 < best:
            best, btau, bt = f1, x1, t1_
        if f2 < best:
            best, btau, bt = f2, x2, t2_
        if f1 <= f2:
            hi = x2
            x2, f2, t2_ = x1, f1, t1_
            x1 = hi - INVPHI * (hi - lo)
            f1, t1_ = crossing_value(x1, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v)
        else:
            lo = x1
            x1, f1, t1_ = x2, f2, t2_
            x2 = lo + INVPHI * (hi - lo)
            f2, t2_ = crossing_value(x2, d, sig_i, ikind, ic, ilam, it0, it1, mem, i, bar_l0, dt, tab_a, tab_v)
    if f1 < best:
        best, btau, bt = f1, x1, t1_
    if f2 < best:
        best, btau, bt = f2, x2, t2_
    return best, btau, bt


@njit
def max_slope(v, arc_ptr, arc_n, arc_h, arc_g, node_type, node_bval):
    m = 0.0
    for a in range(arc_n.shape[0]):
        p0 = arc_ptr[a]
        h = arc_h[a]
        for k in range(arc_n[a]):
            s = abs(v[arc_g[p0 + k + 1]] - v[arc_g[p0 + k]]) / h
            if s > m:
                m = s
    for nd in range(node_type.shape[0]):
        if node_type[nd] == 2 and abs(node_bval[nd]) > m:
            m = abs(node_bval[nd])
    return m


@njit
def build_members(nd, v, dt, mu_arc, mem,
                  arc_ptr, arc_n, arc_h, arc_kind, arc_lam, arc_tid, arc_g, arc_c,
                  node_g, node_type, node_inc_ptr, node_inc_arc, node_inc_sig,
                  tab_a, tab_v, tab_ptr):
    """Fill ``mem`` with the candidate feet reachable from node ``nd``; returns the count."""
    if node_type[nd] == 1:
        mem[0, M_TYPE] = MEMBER_EXIT
        mem[0, M_VAL] = v[node_g[nd]]
        mem[0, M_ARC] = -1
        return 1
    cnt = 0
    for slot in range(node_inc_ptr[nd], node_inc_ptr[nd + 1]):
        j = node_inc_arc[slot]
        sig = node_inc_sig[slot]
        p0 = arc_ptr[j]
        n = arc_n[j]
        h = arc_h[j]
        k0 = 0 if sig > 0 else n
        q_max = min(n, int(math.ceil(mu_arc[j] * dt / h)) + 1)
        kind = arc_kind[j]
        lam = arc_lam[j]
        tid = arc_tid[j]
        t0 = tab_ptr[tid] if kind == 2 else 0
        t1 = tab_ptr[tid + 1] if kind == 2 else 0
        c = arc_c[p0 + k0]
        for q in range(q_max + 1):
            mem[cnt, M_TYPE] = MEMBER_NODE
            mem[cnt, M_Z] = q * h
            mem[cnt, M_VAL] = v[arc_g[p0 + k0 + sig * q]]
            mem[cnt, M_ARC] = j
            mem[cnt, M_KIND] = kind
            mem[cnt, M_C] = c
            mem[cnt, M_LAM] = lam
            mem[cnt, M_T0] = t0
            mem[cnt, M_T1] = t1
            mem[cnt, M_DIR] = -sig
            cnt += 1
        for q in range(q_max):
            vq = v[arc_g[p0 + k0 + sig * q]]
            vq1 = v[arc_g[p0 + k0 + sig * (q + 1)]]
            m_z = (vq1 - vq) / h
            alpha = argmax(kind, lam, t0, t1, tab_a, tab_v, sig * m_z)
            beta = -sig * alpha
            if beta <= 0.0:
                continue
            mem[cnt, M_TYPE] = MEMBER_CELL
            mem[cnt, M_Z] = q * h
            mem[cnt, M_VAL] = vq - m_z * q * h
            mem[cnt, M_KAPPA] = m_z * beta + lag(kind, c, lam, t0, t1, tab_a, tab_v, alpha)
            mem[cnt, M_LO] = q * h / beta
            mem[cnt, M_HI] = (q + 1) * h / beta
            mem[cnt, M_BETA] = beta
            mem[cnt, M_ARC] = j
            mem[cnt, M_KIND] = kind
            mem[cnt, M_C] = c
            mem[cnt, M_LAM] = lam
            mem[cnt, M_T0] = t0
            mem[cnt, M_T1] = t1
            mem[cnt, M_DIR] = -sig
            cnt += 1
    return cnt


@njit
def _arrival_speed(mem, i, t):
    """Signed control on the departure arc, non-positive by convention."""
    if t <= 0.0:
        return 0.0
    if int(mem[i, M_TYPE]) == MEMBER_CELL:
        return -mem[i, M_BETA]
    return -mem[i, M_Z] / t


@njit
def step_kernel(v, dt, tol, mu_arc, big_m,
                arc_ptr, arc_n, arc_h, arc_len, arc_kind, arc_lam, arc_tid, arc_from, arc_to, arc_g, arc_c,
                node_g, node_type, node_bar_l0, node_bval, node_bnext,
                node_inc_ptr, node_inc_arc, node_inc_sig,
                tab_a, tab_v, tab_ptr,
                out, wb, wnode, wa_i, wa_x, ws0, wj, wa_j, wb1, wb2, mem, scratch):
    n_arcs = arc_n.shape[0]
    n_nodes = node_g.shape[0]
    for g in range(v.shape[0]):
        wb1[g] = np.inf
        wb2[g] = np.inf
        wnode[g] = -1
        wj[g] = -1
        ws0[g] = 0.0
        wa_j[g] = 0.0
        wa_x[g] = 0.0

    # stay-on-arc branch
    for a in range(n_arcs):
        p0 = arc_ptr[a]
        n = arc_n[a]
        h = arc_h[a]
        ell = arc_len[a]
        reach = mu_arc[a] * dt
        kind = arc_kind[a]
        lam = arc_lam[a]
        tid = arc_tid[a]
        t0 = tab_ptr[tid] if kind == 2 else 0
        t1 = tab_ptr[tid + 1] if kind == 2 else 0
        nf = arc_from[a]
        nt = arc_to[a]
        ghost_lo = node_type[nf] == 2
        ghost_hi = node_type[nt] == 2
        k_start = 0 if node_type[nf] >= 2 else 1
        k_end = n if node_type[nt] >= 2 else n - 1
        lo_lim = -1 if ghost_lo else 0
        hi_lim = n if ghost_hi else n - 1
        for k in range(k_start, k_end + 1):
            s = ell if k == n else k * h
            c = arc_c[p0 + k]
            ylo = s - reach
            yhi = s + reach
            if not ghost_lo and ylo < 0.0:
                ylo = 0.0
            if not ghost_hi and yhi > ell:
                yhi = ell
            clo = min(max(int(math.floor(ylo / h)), lo_lim), hi_lim)
            chi = max(min(int(math.ceil(yhi / h)) - 1, hi_lim), clo)
            best = np.inf
            best_alpha = 0.0
            for cc in range(clo, chi + 1):
                if cc < 0:
                    if not ghost_lo:
                        continue
                    cl = ylo
                    ch = 0.0
                    by = 0.0
                    bv = v[arc_g[p0]]
                    m = -node_bval[nf]
                elif cc >= n:
                    if not ghost_hi:
                        continue
                    cl = ell
                    ch = yhi
                    by = ell
                    bv = v[arc_g[p0 + n]]
                    m = node_bval[nt]
                else:
                    cl = max(cc * h, ylo)
                    ch = min(ell if cc == n - 1 else (cc + 1) * h, yhi)
                    by = cc * h
                    bv = v[arc_g[p0 + cc]]
                    m = (v[arc_g[p0 + cc + 1]] - bv) / h
                if cl > ch:
                    continue
                y = s - dt * argmax(kind, lam, t0, t1, tab_a, tab_v, m)
                if y < cl:
                    y = cl
                elif y > ch:
                    y = ch
                alpha = (s - y) / dt
                val = bv + m * (y - by) + dt * lag(kind, c, lam, t0, t1, tab_a, tab_v, alpha)
                if val < best:
                    best = val
                    best_alpha = alpha
            g = arc_g[p0 + k]
            wb1[g] = best
            wa_i[g] = best_alpha

    # crossing branch and junction update
    for nd in range(n_nodes):
        ntype = node_type[nd]
        if ntype >= 2:
            continue
        bar_l0 = node_bar_l0[nd]
        cnt = build_members(nd, v, dt, mu_arc, mem, arc_ptr, arc_n, arc_h, arc_kind, arc_lam, arc_tid,
                            arc_g, arc_c, node_g, node_type, node_inc_ptr, node_inc_arc, node_inc_sig,
                            tab_a, tab_v, tab_ptr)
        if ntype == 1:
            level = 0.0
        else:
            level = -bar_l0
            for slot in range(node_inc_ptr[nd], node_inc_ptr[nd + 1]):
                j = node_inc_arc[slot]
                kind = arc_kind[j]
                t0 = tab_ptr[arc_tid[j]] if kind == 2 else 0
                t1 = tab_ptr[arc_tid[j] + 1] if kind == 2 else 0
                cj = arc_c[arc_ptr[j] + (0 if node_inc_sig[slot] > 0 else arc_n[j])]
                if kind == 2:
                    hp = ham(kind, cj, arc_lam[j], t0, t1, tab_a, tab_v, big_m)
                    hm = ham(kind, cj, arc_lam[j], t0, t1, tab_a, tab_v, -big_m)
                    level = max(level, hp, hm)
                else:
                    level = max(level, energy(kind, cj, arc_lam[j], mu_arc[j]))
        for slot in range(node_inc_ptr[nd], node_inc_ptr[nd + 1]):
            i = node_inc_arc[slot]
            sig = node_inc_sig[slot]
            p0 = arc_ptr[i]
            n = arc_n[i]
            h = arc_h[i]
            kind = arc_kind[i]
            lam = arc_lam[i]
            t0 = tab_ptr[arc_tid[i]] if kind == 2 else 0
            t1 = tab_ptr[arc_tid[i] + 1] if kind == 2 else 0
            k0 = 0 if sig > 0 else n
            for q in range(1, n):
                d = q * h
                k = k0 + sig * q
                c = arc_c[p0 + k]
                if kind == 2:
                    a_cross = max_speed(kind, t0, t1, tab_a, sig)
                else:
                    a_cross = 1.25 * speed(kind, c, lam, t0, t1, tab_a, tab_v, level, sig) + 1e-12
                if d >= a_cross * dt:
                    continue
                tau_lo = d / a_cross
                node_best = np.inf
                for mi in range(cnt):
                    tau_hi = dt
                    if int(mem[mi, M_TYPE]) == MEMBER_CELL:
                        tau_hi = dt - mem[mi, M_LO]
                    if tau_hi <= tau_lo:
                        scratch[mi, 0] = np.inf
                        continue
                    val, tau, tarc = golden_crossing(tau_lo, tau_hi, d, sig, kind, c, lam, t0, t1,
                                                     mem, mi, bar_l0, dt, tab_a, tab_v)
                    scratch[mi, 0] = val
                    scratch[mi, 1] = tau
                    scratch[mi, 2] = tarc
                    if val < node_best:
                        node_best = val
                if node_best == np.inf:
                    continue
                g = arc_g[p0 + k]
                if node_best < wb2[g] - tol:
                    for mi in range(cnt):
                        if scratch[mi, 0] <= node_best + tol:
                            tau = scratch[mi, 1]
                            tarc = scratch[mi, 2]
                            wnode[g] = nd
                            wj[g] = int(mem[mi, M_ARC])
                            ws0[g] = max(dt - tau - tarc, 0.0)
                            wa_j[g] = _arrival_speed(mem, mi, tarc)
                            wa_x[g] = d / tau
                            break
                if node_best < wb2[g]:
                    wb2[g] = node_best
        g = node_g[nd]
        if ntype == 1:
            out[g] = node_bnext[nd]
            wb[g] = 0
            continue
        best = np.inf
        for mi in range(cnt):
            val, tarc = member_value(mem, mi, bar_l0, dt, tab_a, tab_v)
            scratch[mi, 0] = val
            scratch[mi, 2] = tarc
            if val < best:
                best = val
        for mi in range(cnt):
            if scratch[mi, 0] <= best + tol:
                tarc = scratch[mi, 2]
                wnode[g] = nd
                wj[g] = int(mem[mi, M_ARC])
                ws0[g] = dt - tarc
                wa_j[g] = _arrival_speed(mem, mi, tarc)
                break
        out[g] = best
        wb[g] = 3
        wb1[g] = np.inf
        wb2[g] = best
        wa_i[g] = 0.0

    # combine branches on arc samples
    for a in range(n_arcs):
        p0 = arc_ptr[a]
        n = arc_n[a]
        nf = arc_from[a]
        nt = arc_to[a]
        k_start = 0 if node_type[nf] >= 2 else 1
        k_end = n if node_type[nt] >= 2 else n - 1
        for k in range(k_start, k_end + 1):
            g = arc_g[p0 + k]
            if wb2[g] < wb1[g] - tol:
                wb[g] = 2
                wa_i[g] = wa_x[g]
                out[g] = wb2[g]
            else:
                wb[g] = 1
                wnode[g] = -1
                wj[g] = -1
                ws0[g] = 0.0
                wa_j[g] = 0.0
                out[g] = wb1[g] if wb1[g] <= wb2[g] else wb2[g]
