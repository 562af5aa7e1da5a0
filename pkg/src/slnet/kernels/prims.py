"""Vectorised Lagrangian primitives shared by the numpy kernels and the Lagrangian classes.

Every Lagrangian is ``L(alpha) = base(alpha) + c`` where ``base`` depends on
``kind``:

* ``QUAD``  : ``alpha**2 / 2``
* ``FLUX``  : ``lam / 4 * (|alpha| + 1)**2``
* ``TABLE`` : piecewise linear through ``(tab_a, tab_v)``, ``+inf`` outside

Arguments broadcast against each other.  ``tabs`` is the triple
``(tab_a, tab_v, tab_ptr)`` of concatenated tables.
"""

import numpy as np

QUAD, FLUX, TABLE = 0, 1, 2

_EMPTY_TABS = (np.zeros(0), np.zeros(0), np.zeros(1, dtype=np.int64))


def _table(tabs, tid):
    tab_a, tab_v, tab_ptr = tabs
    t0, t1 = tab_ptr[tid], tab_ptr[tid + 1]
    return tab_a[t0:t1], tab_v[t0:t1]


def _each_table(tabs, kind, tid):
    """Yield (mask, a, v) for every distinct table appearing where kind == TABLE."""
    mask_t = kind == TABLE
    if not np.any(mask_t):
        return
    for t in np.unique(tid[mask_t]):
        yield mask_t & (tid == t), *_table(tabs, int(t))


def lag(kind, c, lam, tid, alpha, tabs=_EMPTY_TABS):
    kind, c, lam, tid, alpha = np.broadcast_arrays(
        np.asarray(kind), np.asarray(c, float), np.asarray(lam, float),
        np.asarray(tid), np.asarray(alpha, float))
    out = np.empty(alpha.shape)
    m = kind == QUAD
    out[m] = 0.5 * alpha[m] ** 2
    m = kind == FLUX
    out[m] = 0.25 * lam[m] * (np.abs(alpha[m]) + 1.0) ** 2
    for m, a, v in _each_table(tabs, kind, tid):
        x = alpha[m]
        val = np.interp(x, a, v)
        val[(x < a[0] - 1e-12) | (x > a[-1] + 1e-12)] = np.inf
        out[m] = val
    return out + c


def argmax(kind, lam, tid, p, tabs=_EMPTY_TABS):
    """Maximiser of ``alpha * p - L(alpha)`` (independent of the offset ``c``)."""
    kind, lam, tid, p = np.broadcast_arrays(
        np.asarray(kind), np.asarray(lam, float), np.asarray(tid), np.asarray(p, float))
    out = np.empty(p.shape)
    m = kind == QUAD
    out[m] = p[m]
    m = kind == FLUX
    if np.any(m):
        pm, lm = p[m], lam[m]
        out[m] = np.sign(pm) * np.maximum(2.0 * np.abs(pm) / lm - 1.0, 0.0)
    for m, a, v in _each_table(tabs, kind, tid):
        scores = p[m][:, None] * a[None, :] - v[None, :]
        out[m] = a[np.argmax(scores, axis=1)]
    return out


def ham(kind, c, lam, tid, p, tabs=_EMPTY_TABS):
    """Legendre transform ``sup_alpha (alpha p - L(alpha))``."""
    a = argmax(kind, lam, tid, p, tabs)
    return a * np.asarray(p, float) - lag(kind, c, lam, tid, a, tabs)


def _table_speed(a, v, c, level, direction):
    if direction < 0:
        a, v = -a[::-1], v[::-1]
    slopes = np.diff(v) / np.diff(a)
    keep = a[1:] > 0.0
    start = np.maximum(a[:-1][keep], 0.0)
    energy = slopes[keep] * a[:-1][keep] - v[:-1][keep] - c
    if start.size == 0:
        return np.zeros(np.shape(level))
    idx = np.searchsorted(energy, level, side="right")
    last = a[-1] if a[-1] > 0 else 0.0
    return np.where(idx < start.size, start[np.minimum(idx, start.size - 1)], last)


def speed(kind, c, lam, tid, level, direction, tabs=_EMPTY_TABS):
    """Speed ``s >= 0`` along ``direction`` whose energy ``E = a L'(a) - L(a)`` equals ``level``.

    ``E`` is the Hamiltonian evaluated at the slope dual to ``a``; it is
    non-decreasing in ``|a|`` so the inverse is well defined (generalised
    inverse for tables).  Returns 0 when ``level`` is below ``E(0)``.
    """
    kind, c, lam, tid, level, direction = np.broadcast_arrays(
        np.asarray(kind), np.asarray(c, float), np.asarray(lam, float),
        np.asarray(tid), np.asarray(level, float), np.asarray(direction))
    out = np.zeros(level.shape)
    with np.errstate(invalid="ignore"):
        m = kind == QUAD
        out[m] = np.sqrt(np.maximum(2.0 * (level[m] + c[m]), 0.0))
        m = kind == FLUX
        out[m] = np.sqrt(np.maximum(1.0 + 4.0 * (level[m] + c[m]) / lam[m], 0.0))
    for m, a, v in _each_table(tabs, kind, tid):
        for d in (-1, 1):
            md = m & (np.sign(direction) == d)
            if np.any(md):
                out[md] = [_table_speed(a, v, ci, li, d) for ci, li in zip(c[md], level[md])]
    out[np.isneginf(level)] = 0.0
    return out


def energy(kind, c, lam, alpha):
    """``alpha L'(alpha) - L(alpha)`` for the closed-form kinds."""
    kind, c, lam, alpha = np.broadcast_arrays(np.asarray(kind), np.asarray(c, float), np.asarray(lam, float),
                                              np.asarray(alpha, float))
    return np.where(kind == QUAD, 0.5 * alpha ** 2 - c, 0.25 * lam * (alpha ** 2 - 1.0) - c)


def max_speed(kind, tid, direction, tabs=_EMPTY_TABS):
    """Largest admissible speed along ``direction`` (finite only for tables)."""
    kind, tid, direction = np.broadcast_arrays(np.asarray(kind), np.asarray(tid), np.asarray(direction))
    out = np.full(kind.shape, np.inf)
    for m, a, v in _each_table(tabs, kind, tid):
        out[m] = np.where(direction[m] > 0, max(a[-1], 0.0), max(-a[0], 0.0))
    return out
