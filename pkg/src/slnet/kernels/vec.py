"""Pure-numpy twin of :mod:`slnet.kernels.nb`.

Loops run over small fixed ranges (cell offsets, golden iterations, nodes);
the per-sample and per-candidate work is vectorised.
"""

import numpy as np

from . import prims
from . import StepResult, NODE_DIRICHLET, NODE_JUNCTION, NODE_NEUMANN
from .nb import (GOLDEN_ITERS, INVPHI, M_ARC, M_BETA, M_C, M_COLS, M_DIR, M_HI, M_KAPPA, M_KIND, M_LAM, M_LO,
                 M_T0, M_TYPE, M_VAL, M_Z, MEMBER_CELL, MEMBER_EXIT, MEMBER_NODE)

M_TID = M_T0  # the numpy path stores the table id here instead of the slice start


def _stay_branch(lay, v, dt, mu_arc, node_bval, wb1, wa_i):
    tabs = lay.tabs
    for a in range(lay.arc_n.shape[0]):
        p0 = lay.arc_ptr[a]
        n = int(lay.arc_n[a])
        h = lay.arc_h[a]
        ell = lay.arc_len[a]
        reach = mu_arc[a] * dt
        kind, lam, tid = lay.arc_kind[a], lay.arc_lam[a], lay.arc_tid[a]
        nf, nt = lay.arc_from[a], lay.arc_to[a]
        ghost_lo = lay.node_type[nf] == NODE_NEUMANN
        ghost_hi = lay.node_type[nt] == NODE_NEUMANN
        k_start = 0 if lay.node_type[nf] >= 2 else 1
        k_end = n if lay.node_type[nt] >= 2 else n - 1
        if k_end < k_start:
            continue
        k = np.arange(k_start, k_end + 1)
        s = np.where(k == n, ell, k * h)
        c = lay.arc_c[p0 + k]
        vals = v[lay.arc_g[p0:p0 + n + 1]]
        ylo = s - reach
        yhi = s + reach
        if not ghost_lo:
            ylo = np.maximum(ylo, 0.0)
        if not ghost_hi:
            yhi = np.minimum(yhi, ell)
        lo_lim = -1 if ghost_lo else 0
        hi_lim = n if ghost_hi else n - 1
        clo = np.clip(np.floor(ylo / h).astype(np.int64), lo_lim, hi_lim)
        chi = np.maximum(np.minimum(np.ceil(yhi / h).astype(np.int64) - 1, hi_lim), clo)
        best = np.full(k.shape, np.inf)
        best_alpha = np.zeros(k.shape)
        slopes = np.diff(vals) / h
        for cc in range(int(clo.min()), int(chi.max()) + 1):
            live = (clo <= cc) & (cc <= chi)
            if cc < 0:
                if not ghost_lo:
                    continue
                cl, ch, by, bv, m = ylo, np.zeros_like(s), 0.0, vals[0], -node_bval[nf]
            elif cc >= n:
                if not ghost_hi:
                    continue
                cl, ch, by, bv, m = np.full_like(s, ell), yhi, ell, vals[n], node_bval[nt]
            else:
                cl = np.maximum(cc * h, ylo)
                ch = np.minimum(ell if cc == n - 1 else (cc + 1) * h, yhi)
                by, bv, m = cc * h, vals[cc], slopes[cc]
            live &= cl <= ch
            if not np.any(live):
                continue
            y = s - dt * prims.argmax(kind, lam, tid, m, tabs)
            y = np.minimum(np.maximum(y, cl), ch)
            alpha = (s - y) / dt
            with np.errstate(invalid="ignore"):
                val = bv + m * (y - by) + dt * prims.lag(kind, c, lam, tid, alpha, tabs)
            better = live & (val < best)
            best[better] = val[better]
            best_alpha[better] = alpha[better]
        g = lay.arc_g[p0 + k]
        wb1[g] = best
        wa_i[g] = best_alpha


def build_members(lay, v, dt, mu_arc):
    """Candidate feet for every crossing node; returns (table, node of each row)."""
    tabs = lay.tabs
    rows, owners = [], []
    for nd in range(lay.node_g.shape[0]):
        ntype = lay.node_type[nd]
        if ntype == NODE_DIRICHLET:
            r = np.zeros((1, M_COLS))
            r[0, M_TYPE] = MEMBER_EXIT
            r[0, M_VAL] = v[lay.node_g[nd]]
            r[0, M_ARC] = -1
            rows.append(r)
            owners.append(np.full(1, nd))
            continue
        if ntype != NODE_JUNCTION:
            continue
        for slot in range(lay.node_inc_ptr[nd], lay.node_inc_ptr[nd + 1]):
            j = lay.node_inc_arc[slot]
            sig = int(lay.node_inc_sig[slot])
            p0 = lay.arc_ptr[j]
            n = int(lay.arc_n[j])
            h = lay.arc_h[j]
            k0 = 0 if sig > 0 else n
            q_max = min(n, int(np.ceil(mu_arc[j] * dt / h)) + 1)
            kind, lam, tid = lay.arc_kind[j], lay.arc_lam[j], lay.arc_tid[j]
            c = lay.arc_c[p0 + k0]
            q = np.arange(q_max + 1)
            vq = v[lay.arc_g[p0 + k0 + sig * q]]
            node = np.zeros((q.size, M_COLS))
            node[:, M_TYPE] = MEMBER_NODE
            node[:, M_Z] = q * h
            node[:, M_VAL] = vq
            cell = np.zeros((q_max, M_COLS))
            qc = q[:-1]
            m_z = np.diff(vq) / h
            alpha = prims.argmax(kind, lam, tid, sig * m_z, tabs)
            beta = -sig * alpha
            cell[:, M_TYPE] = MEMBER_CELL
            cell[:, M_Z] = qc * h
            cell[:, M_VAL] = vq[:-1] - m_z * qc * h
            cell[:, M_KAPPA] = m_z * beta + prims.lag(kind, c, lam, tid, alpha, tabs)
            with np.errstate(divide="ignore", invalid="ignore"):
                cell[:, M_LO] = qc * h / beta
                cell[:, M_HI] = (qc + 1) * h / beta
            cell[:, M_BETA] = beta
            cell = cell[beta > 0.0]
            both = np.concatenate([node, cell])
            both[:, M_ARC] = j
            both[:, M_KIND] = kind
            both[:, M_C] = c
            both[:, M_LAM] = lam
            both[:, M_TID] = tid
            both[:, M_DIR] = -sig
            rows.append(both)
            owners.append(np.full(both.shape[0], nd))
    if not rows:
        return np.zeros((0, M_COLS)), np.zeros(0, dtype=np.int64)
    return np.concatenate(rows), np.concatenate(owners)


def member_value(mem, bar_l0, r, tabs):
    """Vectorised twin of ``nb.member_value`` over aligned rows of ``mem``."""
    mtype = mem[:, M_TYPE].astype(np.int64)
    kind = mem[:, M_KIND].astype(np.int64)
    c, lam, tid = mem[:, M_C], mem[:, M_LAM], mem[:, M_TID].astype(np.int64)
    z, dirsign, base = mem[:, M_Z], mem[:, M_DIR], mem[:, M_VAL]
    val = np.full(r.shape, np.inf)
    t = np.zeros(r.shape)
    pay0 = np.where(np.isinf(bar_l0), 0.0, bar_l0)

    ex = mtype == MEMBER_EXIT
    val[ex] = base[ex]

    cl = mtype == MEMBER_CELL
    if np.any(cl):
        lo, hi, kap = mem[cl, M_LO], mem[cl, M_HI], mem[cl, M_KAPPA]
        rr = r[cl]
        tc = np.where(kap <= bar_l0[cl], np.minimum(hi, rr), np.minimum(lo, rr))
        vc = base[cl] + kap * tc + np.where(rr > tc, (rr - tc) * pay0[cl], 0.0)
        vc = np.where(rr > tc, np.where(np.isinf(bar_l0[cl]), np.inf, vc), vc)
        vc[rr < lo * (1.0 - 1e-14)] = np.inf
        val[cl] = vc
        t[cl] = np.where(rr < lo * (1.0 - 1e-14), 0.0, tc)

    nz = (mtype == MEMBER_NODE) & (z == 0.0)
    if np.any(nz):
        rr = r[nz]
        l0 = prims.lag(kind[nz], c[nz], lam[nz], tid[nz], 0.0, tabs)
        use_arc = l0 <= bar_l0[nz]
        vz = np.where(use_arc, base[nz] + rr * l0, base[nz] + rr * pay0[nz])
        vz = np.where(rr <= 0.0, base[nz], vz)
        val[nz] = vz
        t[nz] = np.where((rr > 0.0) & use_arc, rr, 0.0)

    np_ = (mtype == MEMBER_NODE) & (z > 0.0) & (r > 0.0)
    if np.any(np_):
        rr = r[np_]
        b = bar_l0[np_]
        finite = ~np.isinf(b)
        level = np.where(finite, -b, -np.inf)
        sp = prims.speed(kind[np_], c[np_], lam[np_], tid[np_], level, dirsign[np_], tabs)
        with np.errstate(divide="ignore"):
            tz = np.where(sp > 0.0, z[np_] / np.where(sp > 0.0, sp, 1.0), np.inf)
        tt = np.where(finite & (tz < rr), tz, rr)
        lag = prims.lag(kind[np_], c[np_], lam[np_], tid[np_], dirsign[np_] * z[np_] / tt, tabs)
        vn = base[np_] + tt * lag + np.where(rr > tt, (rr - tt) * np.where(finite, b, 0.0), 0.0)
        val[np_] = vn
        t[np_] = tt
    return val, t


def _crossing(tau, d, sig, ikind, ic, ilam, itid, mem, bar_l0, dt, tabs):
    arc = tau * prims.lag(ikind, ic, ilam, itid, sig * d / tau, tabs)
    rest, t = member_value(mem, bar_l0, dt - tau, tabs)
    return arc + rest, t


def golden(a, b, args):
    f = lambda x: _crossing(x, *args)  # noqa: E731
    fa, ta = f(a)
    fb, tb = f(b)
    best, btau, bt = fa.copy(), a.copy(), ta.copy()
    _keep(best, btau, bt, fb, b, tb)
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, t1 = f(x1)
    f2, t2 = f(x2)
    lo, hi = a.copy(), b.copy()
    for _ in range(GOLDEN_ITERS):
        _keep(best, btau, bt, f1, x1, t1)
        _keep(best, btau, bt, f2, x2, t2)
        left = f1 <= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx1 = np.where(left, hi - INVPHI * (hi - lo), x2)
        nx2 = np.where(left, x1, lo + INVPHI * (hi - lo))
        probe = np.where(left, nx1, nx2)
        fp, tp = f(probe)
        f1, t1, f2, t2 = (np.where(left, fp, f2), np.where(left, tp, t2),
                          np.where(left, f1, fp), np.where(left, t1, tp))
        x1, x2 = nx1, nx2
    _keep(best, btau, bt, f1, x1, t1)
    _keep(best, btau, bt, f2, x2, t2)
    return best, btau, bt


def _keep(best, btau, bt, f, x, t):
    m = f < best
    best[m] = f[m]
    btau[m] = x[m]
    bt[m] = t[m]


def _arrival_speed(mem, t):
    out = np.where(mem[:, M_TYPE] == MEMBER_CELL, -mem[:, M_BETA], 0.0)
    node = (mem[:, M_TYPE] != MEMBER_CELL) & (t > 0.0)
    out[node] = -mem[node, M_Z] / t[node]
    return np.where(t > 0.0, out, 0.0)


def _levels(lay, big_m, mu_arc):
    tabs = lay.tabs
    level = np.where(np.isinf(lay.node_bar_l0), -np.inf, -lay.node_bar_l0)
    level = np.where(lay.node_type == NODE_DIRICHLET, 0.0, level)
    for nd in np.flatnonzero(lay.node_type == NODE_JUNCTION):
        sl = slice(lay.node_inc_ptr[nd], lay.node_inc_ptr[nd + 1])
        arcs = lay.node_inc_arc[sl]
        kidx = np.where(lay.node_inc_sig[sl] > 0, 0, lay.arc_n[arcs])
        cj = lay.arc_c[lay.arc_ptr[arcs] + kidx]
        args = (lay.arc_kind[arcs], cj, lay.arc_lam[arcs], lay.arc_tid[arcs])
        table = lay.arc_kind[arcs] == prims.TABLE
        hp = prims.ham(*args, big_m, tabs)
        hm = prims.ham(*args, -big_m, tabs)
        en = prims.energy(lay.arc_kind[arcs], cj, lay.arc_lam[arcs], mu_arc[arcs])
        cand = np.where(table, np.maximum(hp, hm), en)
        level[nd] = max(level[nd], float(np.max(cand)))
    return level


def step(lay, v, dt, tol, mu_arc, big_m, node_bval, node_bnext):
    tabs = lay.tabs
    n = lay.n_samples
    wb1 = np.full(n, np.inf)
    wb2 = np.full(n, np.inf)
    wa_i = np.zeros(n)
    wa_x = np.zeros(n)
    ws0 = np.zeros(n)
    wa_j = np.zeros(n)
    wnode = np.full(n, -1, dtype=np.int64)
    wj = np.full(n, -1, dtype=np.int64)
    wb = np.zeros(n, dtype=np.int64)
    out = np.empty(n)

    _stay_branch(lay, v, dt, mu_arc, node_bval, wb1, wa_i)

    mem, owner = build_members(lay, v, dt, mu_arc)
    level = _levels(lay, big_m, mu_arc)
    bar_of_row = lay.node_bar_l0[owner] if owner.size else np.zeros(0)

    # crossing candidates: (sample, member) pairs
    pg, pd, psig, parc, pc, pnode, prow, plo = [], [], [], [], [], [], [], []
    for nd in np.flatnonzero(lay.node_type <= NODE_DIRICHLET):
        rows = np.flatnonzero(owner == nd)
        for slot in range(lay.node_inc_ptr[nd], lay.node_inc_ptr[nd + 1]):
            i = lay.node_inc_arc[slot]
            sig = int(lay.node_inc_sig[slot])
            p0 = lay.arc_ptr[i]
            ni = int(lay.arc_n[i])
            if ni < 2:
                continue
            q = np.arange(1, ni)
            d = q * lay.arc_h[i]
            k = (0 if sig > 0 else ni) + sig * q
            c = lay.arc_c[p0 + k]
            if lay.arc_kind[i] == prims.TABLE:
                a_cross = prims.max_speed(lay.arc_kind[i], lay.arc_tid[i], sig, tabs) * np.ones_like(d)
            else:
                a_cross = 1.25 * prims.speed(lay.arc_kind[i], c, lay.arc_lam[i], lay.arc_tid[i],
                                             level[nd], sig, tabs) + 1e-12
            ok = d < a_cross * dt
            if not np.any(ok):
                continue
            d, k, c, a_cross = d[ok], k[ok], c[ok], a_cross[ok]
            g = lay.arc_g[p0 + k]
            nr = rows.size
            pg.append(np.repeat(g, nr))
            pd.append(np.repeat(d, nr))
            psig.append(np.full(g.size * nr, sig))
            parc.append(np.full(g.size * nr, i))
            pc.append(np.repeat(c, nr))
            pnode.append(np.full(g.size * nr, nd))
            prow.append(np.tile(rows, g.size))
            plo.append(np.repeat(d / a_cross, nr))

    if pg:
        pg, pd, psig, parc, pc, pnode, prow, plo = map(np.concatenate, (pg, pd, psig, parc, pc, pnode, prow, plo))
        pm = mem[prow]
        hi = np.where(pm[:, M_TYPE] == MEMBER_CELL, dt - pm[:, M_LO], dt)
        live = hi > plo
        val = np.full(pg.size, np.inf)
        tau = np.zeros(pg.size)
        tarc = np.zeros(pg.size)
        if np.any(live):
            args = (pd[live], psig[live], lay.arc_kind[parc[live]], pc[live], lay.arc_lam[parc[live]],
                    lay.arc_tid[parc[live]], pm[live], bar_of_row[prow[live]], dt, tabs)
            val[live], tau[live], tarc[live] = golden(plo[live], hi[live], args)
        # reduce per (sample, node) in node order, first member within tol
        order = np.lexsort((np.arange(pg.size), pg, pnode))
        pg, pnode, prow, val, tau, tarc, pd = (x[order] for x in (pg, pnode, prow, val, tau, tarc, pd))
        key = pnode * n + pg
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        grp_min = np.minimum.reduceat(val, starts)
        grp = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, key.size]))
        within = val <= grp_min[grp] + tol
        first = np.full(starts.size, -1)
        idx = np.flatnonzero(within)
        first_idx = np.unique(grp[idx], return_index=True)
        first[first_idx[0]] = idx[first_idx[1]]
        for s_, f_ in zip(range(starts.size), first):
            nbest = grp_min[s_]
            if not np.isfinite(nbest):
                continue
            g = pg[f_]
            if nbest < wb2[g] - tol:
                row = mem[prow[f_]]
                wnode[g] = pnode[f_]
                wj[g] = int(row[M_ARC])
                ws0[g] = max(dt - tau[f_] - tarc[f_], 0.0)
                wa_j[g] = _arrival_speed(row[None, :], tarc[f_:f_ + 1])[0]
                wa_x[g] = pd[f_] / tau[f_]
            if nbest < wb2[g]:
                wb2[g] = nbest

    # junction and Dirichlet node updates
    for nd in range(lay.node_g.shape[0]):
        g = lay.node_g[nd]
        ntype = lay.node_type[nd]
        if ntype == NODE_DIRICHLET:
            out[g] = node_bnext[nd]
            wb[g] = 0
        elif ntype == NODE_JUNCTION:
            rows = np.flatnonzero(owner == nd)
            r = np.full(rows.size, dt)
            val, tarc = member_value(mem[rows], bar_of_row[rows], r, tabs)
            best = float(np.min(val))
            f_ = int(np.flatnonzero(val <= best + tol)[0])
            wnode[g] = nd
            wj[g] = int(mem[rows[f_], M_ARC])
            ws0[g] = dt - tarc[f_]
            wa_j[g] = _arrival_speed(mem[rows[f_]][None, :], tarc[f_:f_ + 1])[0]
            out[g] = best
            wb[g] = 3
            wb1[g] = np.inf
            wb2[g] = best
            wa_i[g] = 0.0

    on_arc = np.zeros(n, dtype=bool)
    for a in range(lay.arc_n.shape[0]):
        p0 = lay.arc_ptr[a]
        na = int(lay.arc_n[a])
        k_start = 0 if lay.node_type[lay.arc_from[a]] >= 2 else 1
        k_end = na if lay.node_type[lay.arc_to[a]] >= 2 else na - 1
        on_arc[lay.arc_g[p0 + k_start:p0 + k_end + 1]] = True
    cross = on_arc & (wb2 < wb1 - tol)
    stay = on_arc & ~cross
    out[cross] = wb2[cross]
    wb[cross] = 2
    wa_i[cross] = wa_x[cross]
    out[stay] = np.where(wb1[stay] <= wb2[stay], wb1[stay], wb2[stay])
    wb[stay] = 1
    wnode[stay] = -1
    wj[stay] = -1
    ws0[stay] = 0.0
    wa_j[stay] = 0.0
    return StepResult(out, wb, wnode, wa_i, ws0, wj, wa_j, wb1, wb2)
