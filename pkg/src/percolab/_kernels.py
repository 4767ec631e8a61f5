"""Bit-parallel numba kernels for oriented bond percolation.

Row layout: the wet sites of level ``n`` are packed into uint64 words by the
compact index ``i = (y - (n & 1)) // 2``.  Bit ``b`` of absolute word ``w``
holds index ``64 * w + b``.  Bond randomness is drawn lazily from a
counter-based hash of (seed, trial, level, direction, absolute word, plane),
so every caller that touches the same bond sees the same value regardless of
the window it simulates.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
ALL_ONES = U64(0xFFFFFFFFFFFFFFFF)
GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)

PROB_BITS = 53
# pmode: 0 -> p <= 0, 1 -> 0 < p < 1, 2 -> p >= 1
MODE_CLOSED = 0
MODE_MIXED = 1
MODE_OPEN = 2

LEFT = 0
RIGHT = 1

EDGE_NONE_HI = np.int64(2**30)
EDGE_NONE_LO = np.int64(-(2**30))


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(cache=True)
def trial_key(seed, trial):
    k = mix64(U64(seed) * GOLDEN + U64(0x632BE59BD9B4E019))
    return mix64(k ^ (U64(trial) * GOLDEN + U64(0x8CB92BA72F3D8DD7)))


@njit(cache=True, inline="always")
def level_key(tkey, level, direction):
    return mix64(U64(tkey) + (U64(level) * U64(2) + U64(direction) + U64(1)) * _M2)


@njit(cache=True, inline="always")
def bond_word(lkey, w, p_bits, pmode):
    """64 bond indicators; bit b is open iff its uniform U < p (53-bit exact)."""
    if pmode == MODE_CLOSED:
        return U64(0)
    if pmode == MODE_OPEN:
        return ALL_ONES
    lkey = U64(lkey)
    p_bits = U64(p_bits)
    base = lkey + (U64(w) << U64(6)) * GOLDEN
    undecided = ALL_ONES
    res = U64(0)
    for b in range(PROB_BITS):
        r = mix64(base + U64(b + 1) * GOLDEN)
        if (p_bits >> U64(PROB_BITS - 1 - b)) & U64(1):
            res |= undecided & ~r
            undecided &= r
        else:
            undecided &= ~r
        if undecided == U64(0):
            break
    return res


@njit(cache=True, inline="always")
def popcount(x):
    x = x - ((x >> U64(1)) & U64(0x5555555555555555))
    x = (x & U64(0x3333333333333333)) + ((x >> U64(2)) & U64(0x3333333333333333))
    x = (x + (x >> U64(4))) & U64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * U64(0x0101010101010101)) >> U64(56))


@njit(cache=True, inline="always")
def lowest_bit(x):
    return popcount((x & (~x + U64(1))) - U64(1))


@njit(cache=True, inline="always")
def highest_bit(x):
    n = 0
    if x >> U64(32):
        x >>= U64(32)
        n += 32
    if x >> U64(16):
        x >>= U64(16)
        n += 16
    if x >> U64(8):
        x >>= U64(8)
        n += 8
    if x >> U64(4):
        x >>= U64(4)
        n += 4
    if x >> U64(2):
        x >>= U64(2)
        n += 2
    if x >> U64(1):
        n += 1
    return n


@njit(cache=True, inline="always")
def range_mask(lo, hi):
    """Word with bits lo..hi (inclusive, 0 <= lo <= hi <= 63) set."""
    m = ALL_ONES >> U64(63 - hi)
    return m & (ALL_ONES << U64(lo))


@njit(cache=True)
def fill_masks(rows, nrows, k0, k1, wbase, tkey, level, p_bits, pmode, rmask, lmask):
    """Bond words for local words k0..k1; zero where no row is wet."""
    kr = level_key(tkey, level, RIGHT)
    kl = level_key(tkey, level, LEFT)
    for k in range(k0, k1 + 1):
        any_wet = U64(0)
        for r in range(nrows):
            any_wet |= rows[r, k]
        if any_wet == U64(0):
            rmask[k] = U64(0)
            lmask[k] = U64(0)
        else:
            rmask[k] = bond_word(kr, wbase + k, p_bits, pmode)
            lmask[k] = bond_word(kl, wbase + k, p_bits, pmode)


@njit(cache=True)
def step_rows(rows, out, nrows, k0, k1, parity, rmask, lmask):
    """Advance packed rows one level over local words k0..k1.

    parity 0 (even -> odd):  new[j] = old[j] & R[j] | old[j+1] & L[j+1]
    parity 1 (odd -> even):  new[j] = old[j-1] & R[j-1] | old[j] & L[j]
    """
    nw = rows.shape[1]
    for r in range(nrows):
        for k in range(k0, k1 + 1):
            a = rows[r, k] & rmask[k]
            b = rows[r, k] & lmask[k]
            if parity == 0:
                v = a | (b >> U64(1))
                if k + 1 < nw:
                    v |= (rows[r, k + 1] & lmask[k + 1]) << U64(63)
            else:
                v = (a << U64(1)) | b
                if k - 1 >= 0:
                    v |= (rows[r, k - 1] & rmask[k - 1]) >> U64(63)
            out[r, k] = v


@njit(cache=True)
def clip_rows(rows, nrows, ilo, ihi, wbase):
    """Zero every bit whose absolute index lies outside [ilo, ihi]."""
    nw = rows.shape[1]
    wlo = (ilo >> 6) - wbase
    whi = (ihi >> 6) - wbase
    for r in range(nrows):
        for k in range(nw):
            if k < wlo or k > whi:
                rows[r, k] = U64(0)
            else:
                lo = 0
                hi = 63
                if k == wlo:
                    lo = ilo & 63
                if k == whi:
                    hi = ihi & 63
                if lo != 0 or hi != 63:
                    rows[r, k] &= range_mask(lo, hi)


@njit(cache=True)
def row_max(row, k0, k1, wbase):
    for k in range(k1, k0 - 1, -1):
        if row[k] != U64(0):
            return (wbase + k) * 64 + highest_bit(row[k])
    return EDGE_NONE_LO


@njit(cache=True)
def row_min(row, k0, k1, wbase):
    for k in range(k0, k1 + 1):
        if row[k] != U64(0):
            return (wbase + k) * 64 + lowest_bit(row[k])
    return EDGE_NONE_HI


@njit(cache=True)
def row_count(row, k0, k1):
    c = 0
    for k in range(k0, k1 + 1):
        c += popcount(row[k])
    return c


@njit(cache=True)
def fill_index_range(row, ilo, ihi, wbase):
    """Set bits for absolute indices ilo..ihi (inclusive)."""
    for i in range(ilo, ihi + 1):
        k = (i >> 6) - wbase
        row[k] |= U64(1) << U64(i & 63)


@njit(cache=True)
def evolve_generic(init, wbase, horizon, ilo0, ihi0, seed, trial, p_bits, pmode, level0):
    """Evolve arbitrary packed rows for ``horizon`` levels inside a fixed site window.

    ``ilo0/ihi0`` hold the window in site coordinates (xmin, xmax); rows are clipped
    to it after each step.  Returns an array (horizon + 1, nrows, nw).
    """
    nrows, nw = init.shape
    traj = np.zeros((horizon + 1, nrows, nw), dtype=np.uint64)
    rows = init.copy()
    out = np.zeros_like(rows)
    rmask = np.zeros(nw, dtype=np.uint64)
    lmask = np.zeros(nw, dtype=np.uint64)
    tkey = trial_key(seed, trial)
    traj[0] = rows
    xmin = ilo0
    xmax = ihi0
    for s in range(horizon):
        n = level0 + s
        par = n & 1
        fill_masks(rows, nrows, 0, nw - 1, wbase, tkey, n, p_bits, pmode, rmask, lmask)
        step_rows(rows, out, nrows, 0, nw - 1, par, rmask, lmask)
        npar = (n + 1) & 1
        ilo = (xmin - npar + 1) >> 1
        ihi = (xmax - npar) >> 1
        if ihi < ilo:
            out[:, :] = U64(0)
        else:
            clip_rows(out, nrows, ilo, ihi, wbase)
        rows, out = out, rows
        traj[s + 1] = rows
    return traj


@njit(cache=True)
def _trapezoid_bounds(half0, n):
    """Absolute index bounds of sites |y| <= half0 - n at level n."""
    h = half0 - n
    par = n & 1
    ilo = (-h - par + 1) >> 1
    ihi = (h - par) >> 1
    return ilo, ihi


@njit(cache=True)
def trial_kernel(seed, trial, horizon, p_bits, pmode, snap_levels, snap_half,
                 size, omin, omax, rminus, lplus, coupled, snaps):
    """Run the origin, full-line and both half-line processes on one realization.

    Processes live on the trapezoid |y| <= 2N + 2 - n, which is exact for every
    site with |y| <= N + 2 at every level n <= N.  Rows: 0 origin, 1 full line,
    2 left half-line (y <= 0), 3 right half-line (y >= 0).
    """
    half0 = 2 * horizon + 2
    ilo0, ihi0 = _trapezoid_bounds(half0, 0)
    wbase = (ilo0 >> 6) - 1
    nw = (ihi0 >> 6) - wbase + 2
    rows = np.zeros((4, nw), dtype=np.uint64)
    out = np.zeros((4, nw), dtype=np.uint64)
    rmask = np.zeros(nw, dtype=np.uint64)
    lmask = np.zeros(nw, dtype=np.uint64)
    fill_index_range(rows[0], 0, 0, wbase)
    fill_index_range(rows[1], ilo0, ihi0, wbase)
    fill_index_range(rows[2], ilo0, 0, wbase)
    fill_index_range(rows[3], 0, ihi0, wbase)
    tkey = trial_key(seed, trial)
    snap_i = 0
    nsnap = snap_levels.shape[0]
    for n in range(horizon + 1):
        par = n & 1
        ilo, ihi = _trapezoid_bounds(half0, n)
        k0 = (ilo >> 6) - wbase
        k1 = (ihi >> 6) - wbase
        if n > 0:
            clip_rows(rows, 4, ilo, ihi, wbase)
        size[n] = row_count(rows[0], k0, k1)
        r = row_max(rows[2], k0, k1, wbase)
        l = row_min(rows[3], k0, k1, wbase)
        rminus[n] = 2 * r + par if r != EDGE_NONE_LO else EDGE_NONE_LO
        lplus[n] = 2 * l + par if l != EDGE_NONE_HI else EDGE_NONE_HI
        if size[n] > 0:
            a = row_min(rows[0], k0, k1, wbase)
            b = row_max(rows[0], k0, k1, wbase)
            omin[n] = 2 * a + par
            omax[n] = 2 * b + par
            # origin row must equal the full-line row cut to [min(l, r), max(l, r)]
            lo = min(l, r)
            hi = max(l, r)
            ok = True
            if lo == EDGE_NONE_LO or hi == EDGE_NONE_HI:
                ok = False
            else:
                lo = max(lo, ilo)
                hi = min(hi, ihi)
                for k in range(k0, k1 + 1):
                    wlo = (wbase + k) * 64
                    whi = wlo + 63
                    if whi < lo or wlo > hi:
                        m = U64(0)
                    else:
                        m = range_mask(max(lo, wlo) - wlo, min(hi, whi) - wlo)
                    if rows[0, k] != (rows[1, k] & m):
                        ok = False
                        break
            coupled[n] = 1 if ok else 0
        else:
            omin[n] = EDGE_NONE_HI
            omax[n] = EDGE_NONE_LO
            coupled[n] = -1
        if snap_i < nsnap and snap_levels[snap_i] == n:
            # full-line occupation on y in [-snap_half, snap_half], y = -snap_half + j
            for j in range(2 * snap_half + 1):
                y = -snap_half + j
                if ((y + n) & 1) == 0:
                    i = (y - par) >> 1
                    k = (i >> 6) - wbase
                    snaps[snap_i, j] = np.uint8((rows[1, k] >> U64(i & 63)) & U64(1))
            snap_i += 1
        if n == horizon:
            break
        fill_masks(rows, 4, k0, k1, wbase, tkey, n, p_bits, pmode, rmask, lmask)
        step_rows(rows, out, 4, k0, k1, par, rmask, lmask)
        rows, out = out, rows


@njit(cache=True, parallel=True)
def batch_kernel(seed, trials, horizon, p_bits, pmode, snap_levels, snap_half,
                 size, omin, omax, rminus, lplus, coupled, snaps):
    for t in prange(trials.shape[0]):
        trial_kernel(seed, trials[t], horizon, p_bits, pmode, snap_levels, snap_half,
                     size[t], omin[t], omax[t], rminus[t], lplus[t], coupled[t], snaps[t])


@njit(cache=True)
def full_line_kernel(seed, trial, level, half, p_bits, pmode, out):
    """Full-line process on |y| <= half + level, read at ``level`` on |y| <= half.

    ``out[j]`` is the occupation of y = -half + 2 j' style sites: only sites with
    y + level even are written, in order of increasing y.
    """
    half0 = half + level
    ilo0, ihi0 = _trapezoid_bounds(half0, 0)
    wbase = (ilo0 >> 6) - 1
    nw = (ihi0 >> 6) - wbase + 2
    rows = np.zeros((1, nw), dtype=np.uint64)
    nxt = np.zeros((1, nw), dtype=np.uint64)
    rmask = np.zeros(nw, dtype=np.uint64)
    lmask = np.zeros(nw, dtype=np.uint64)
    fill_index_range(rows[0], ilo0, ihi0, wbase)
    tkey = trial_key(seed, trial)
    for n in range(level):
        ilo, ihi = _trapezoid_bounds(half0, n)
        k0 = (ilo >> 6) - wbase
        k1 = (ihi >> 6) - wbase
        if n > 0:
            clip_rows(rows, 1, ilo, ihi, wbase)
        fill_masks(rows, 1, k0, k1, wbase, tkey, n, p_bits, pmode, rmask, lmask)
        step_rows(rows, nxt, 1, k0, k1, n & 1, rmask, lmask)
        rows, nxt = nxt, rows
    par = level & 1
    j = 0
    for y in range(-half, half + 1):
        if ((y + level) & 1) == 0:
            i = (y - par) >> 1
            k = (i >> 6) - wbase
            out[j] = np.uint8((rows[0, k] >> U64(i & 63)) & U64(1))
            j += 1


@njit(cache=True, parallel=True)
def full_line_batch(seed, trials, level, half, p_bits, pmode, out):
    for t in prange(trials.shape[0]):
        full_line_kernel(seed, trials[t], level, half, p_bits, pmode, out[t])


@njit(cache=True)
def bench_kernel(seed, nwords, levels, p_bits, pmode):
    """Full-line stepping on a fixed window of 64 * nwords sites; returns final count."""
    rows = np.zeros((1, nwords), dtype=np.uint64)
    nxt = np.zeros((1, nwords), dtype=np.uint64)
    rmask = np.zeros(nwords, dtype=np.uint64)
    lmask = np.zeros(nwords, dtype=np.uint64)
    rows[0, :] = ALL_ONES
    tkey = trial_key(seed, 0)
    for n in range(levels):
        fill_masks(rows, 1, 0, nwords - 1, 0, tkey, n, p_bits, pmode, rmask, lmask)
        step_rows(rows, nxt, 1, 0, nwords - 1, n & 1, rmask, lmask)
        rows, nxt = nxt, rows
    return row_count(rows[0], 0, nwords - 1)


@njit(cache=True)
def single_bond(seed, trial, level, direction, index, p_bits, pmode):
    lkey = level_key(trial_key(seed, trial), level, direction)
    word = bond_word(lkey, index >> 6, p_bits, pmode)
    return (word >> U64(index & 63)) & U64(1)
