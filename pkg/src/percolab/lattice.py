"""Oriented lattice, bond randomness, row stepping and the exact enumeration oracle.

Sites are pairs ``(y, n)`` with ``y + n`` even and ``n >= 0``.  Each site has two
oriented bonds, ``left`` to ``(y - 1, n + 1)`` and ``right`` to ``(y + 1, n + 1)``,
retained independently with probability ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from . import _kernels as K
from ._validation import check_int, check_probability, probability_bits
from .exceptions import InfeasibleEnumerationError, WindowViolationError

LEFT = "left"
RIGHT = "right"
DIRECTIONS = (LEFT, RIGHT)
_DIR_CODE = {LEFT: K.LEFT, RIGHT: K.RIGHT}

ENUMERATION_CAP = 24


@dataclass(frozen=True)
class Site:
    y: int
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"level must be non-negative, got {self.n}")
        if (self.y + self.n) % 2:
            raise ValueError(f"site ({self.y}, {self.n}) violates y + n even")


@dataclass(frozen=True)
class WetRow:
    """Wet sites at one level; all share the parity of the level."""

    level: int
    sites: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "sites", frozenset(int(y) for y in self.sites))
        if self.level < 0:
            raise ValueError(f"level must be non-negative, got {self.level}")
        bad = [y for y in self.sites if (y + self.level) % 2]
        if bad:
            raise ValueError(f"sites {sorted(bad)[:5]} have the wrong parity for level {self.level}")

    @classmethod
    def origin(cls):
        return cls(0, frozenset({0}))

    @classmethod
    def even_range(cls, lo, hi, level=0):
        """All parity-compatible sites in [lo, hi] at ``level``."""
        start = lo if (lo + level) % 2 == 0 else lo + 1
        return cls(level, frozenset(range(start, hi + 1, 2)))

    def __len__(self):
        return len(self.sites)

    def __bool__(self):
        return bool(self.sites)

    def __contains__(self, y):
        return y in self.sites

    def __iter__(self):
        return iter(sorted(self.sites))

    def __le__(self, other):
        return self.level == other.level and self.sites <= other.sites

    def min(self):
        return min(self.sites)

    def max(self):
        return max(self.sites)

    def diameter(self):
        """max - min; None for the empty row."""
        if not self.sites:
            return None
        return self.max() - self.min()


@dataclass(frozen=True)
class BondRealization:
    """Open/closed bonds of the trapezoid [xmin, xmax] x [0, nmax].

    Without a ``table`` the openness of every bond is a pure function of
    ``(seed, trial, y, n, direction)`` drawn from the counter-based stream, so
    realizations with the same seed and trial agree bond-for-bond on their
    overlap.  With a ``table`` (keys ``(y, n, direction)``) listed bonds take
    the given value and all others are closed.
    """

    p: float
    xmin: int
    xmax: int
    nmax: int
    seed: int = 0
    trial: int = 0
    table: Mapping | None = None

    def __post_init__(self):
        check_probability(self.p)
        check_int(self.nmax, "nmax", minimum=0)
        check_int(self.seed, "seed", minimum=0)
        check_int(self.trial, "trial", minimum=0)
        if self.xmin > self.xmax:
            raise ValueError(f"empty window [{self.xmin}, {self.xmax}]")

    @classmethod
    def from_open_bonds(cls, open_bonds, xmin, xmax, nmax, p=0.5):
        """Explicit realization where exactly ``open_bonds`` are open."""
        table = {}
        for y, n, d in open_bonds:
            Site(y, n)
            if d not in _DIR_CODE:
                raise ValueError(f"direction must be 'left' or 'right', got {d!r}")
            table[(y, n, d)] = True
        return cls(p, xmin, xmax, nmax, table=table)

    @property
    def is_explicit(self):
        return self.table is not None

    def is_open(self, y, n, direction):
        if (y + n) % 2:
            raise ValueError(f"({y}, {n}) is not a lattice site")
        if self.table is not None:
            return bool(self.table.get((y, n, direction), False))
        pb, mode = probability_bits(self.p)
        i = (y - (n & 1)) >> 1
        return bool(K.single_bond(self.seed, self.trial, n, _DIR_CODE[direction], i, pb, mode))

    def check_row(self, row, steps=1):
        if row.level + steps > self.nmax:
            raise WindowViolationError(
                f"stepping from level {row.level} by {steps} exceeds window height {self.nmax}")
        if row.sites and (row.min() < self.xmin or row.max() > self.xmax):
            raise WindowViolationError(
                f"row spans [{row.min()}, {row.max()}] outside window [{self.xmin}, {self.xmax}]")


def _clip(sites, bonds):
    return frozenset(y for y in sites if bonds.xmin <= y <= bonds.xmax)


def step_reference(row, bonds):
    """Set-based single step; the slow path used for explicit tables and as a cross-check."""
    bonds.check_row(row)
    n = row.level
    nxt = set()
    for y in row.sites:
        if bonds.is_open(y, n, LEFT):
            nxt.add(y - 1)
        if bonds.is_open(y, n, RIGHT):
            nxt.add(y + 1)
    return WetRow(n + 1, _clip(nxt, bonds))


def _pack(rows, level, lo, hi):
    """Pack site sets at ``level`` into words covering sites [lo, hi]."""
    par = level & 1
    ilo = (lo - par) >> 1
    ihi = (hi - par + 1) >> 1
    wbase = (ilo >> 6) - 1
    nw = (ihi >> 6) - wbase + 2
    words = np.zeros((len(rows), nw), dtype=np.uint64)
    for r, sites in enumerate(rows):
        for y in sites:
            i = (y - par) >> 1
            k = (i >> 6) - wbase
            words[r, k] |= np.uint64(1) << np.uint64(i & 63)
    return words, wbase


def _unpack(words, wbase, level):
    par = level & 1
    out = []
    for row in words:
        sites = []
        for k in np.flatnonzero(row):
            v = int(row[k])
            base = (wbase + int(k)) * 64
            while v:
                b = (v & -v).bit_length() - 1
                sites.append(2 * (base + b) + par)
                v &= v - 1
        out.append(WetRow(level, frozenset(sites)))
    return out


def _evolve_words(initials, bonds, horizon):
    level = initials[0].level
    words, wbase = _pack([r.sites for r in initials], level, bonds.xmin - 2, bonds.xmax + 2)
    pb, mode = probability_bits(bonds.p)
    traj = K.evolve_generic(words, wbase, horizon, bonds.xmin, bonds.xmax,
                            bonds.seed, bonds.trial, pb, mode, level)
    per_level = [_unpack(traj[s], wbase, level + s) for s in range(horizon + 1)]
    return [[per_level[s][r] for s in range(horizon + 1)] for r in range(len(initials))]


def step(row, bonds):
    """Advance ``row`` one level through ``bonds``.

    A site is wet at level n + 1 iff one of its two parents is wet and the
    bond from that parent is open.  Sites leaving the window are dropped.
    """
    bonds.check_row(row)
    if bonds.is_explicit:
        return step_reference(row, bonds)
    return _evolve_words([row], bonds, 1)[0][1]


def evolve_coupled(initials, bonds, horizon):
    """Evolve several initial rows on one shared bond realization.

    Returns one trajectory (list of ``horizon + 1`` rows) per initial row.
    Because all processes read the same bonds, ``A <= B`` implies
    ``xi_n^A <= xi_n^B`` at every level.
    """
    initials = list(initials)
    if not initials:
        raise ValueError("initials must contain at least one row")
    horizon = check_int(horizon, "horizon", minimum=0)
    level = initials[0].level
    if any(r.level != level for r in initials):
        raise ValueError("all initial rows must share one level")
    for r in initials:
        bonds.check_row(r, steps=horizon)
    if bonds.is_explicit:
        trajs = []
        for r in initials:
            path = [r]
            for _ in range(horizon):
                path.append(step_reference(path[-1], bonds))
            trajs.append(path)
        return trajs
    return _evolve_words(initials, bonds, horizon)


# exhaustive oracle ---------------------------------------------------------

def _cone(initial, horizon):
    """Sites reachable (ignoring bond state) at each relative level 0..horizon."""
    levels = [sorted(initial.sites)]
    for _ in range(horizon):
        prev = levels[-1]
        levels.append(sorted({y + d for y in prev for d in (-1, 1)}))
    return levels


def count_bonds(initial, horizon):
    """Number of bonds the enumeration over ``horizon`` steps has to range over."""
    cone = _cone(initial, horizon)
    return 2 * sum(len(c) for c in cone[:horizon])


def _enumerate_counts(initial, horizon):
    """Joint counts of (final row, number of open bonds) over all 2^B configurations."""
    cone = _cone(initial, horizon)
    nbonds = 2 * sum(len(c) for c in cone[:horizon])
    if nbonds > ENUMERATION_CAP:
        raise InfeasibleEnumerationError(
            f"{nbonds} bonds exceed the enumeration cap of {ENUMERATION_CAP}")
    if nbonds == 0:
        return cone[-1], nbonds, {(frozenset(initial.sites), 0): 1}
    configs = np.arange(1 << nbonds, dtype=np.uint32)
    wet = {y: np.ones(configs.shape, dtype=bool) for y in cone[0]}
    b = 0
    for s in range(horizon):
        nxt = {}
        for y in cone[s]:
            for d in (-1, 1):
                opened = ((configs >> np.uint32(b)) & np.uint32(1)).astype(bool)
                b += 1
                hit = wet[y] & opened
                if y + d in nxt:
                    nxt[y + d] |= hit
                else:
                    nxt[y + d] = hit
        wet = nxt
    final_sites = cone[horizon]
    code = np.zeros(configs.shape, dtype=np.int64)
    for j, y in enumerate(final_sites):
        code |= wet[y].astype(np.int64) << j
    nopen = np.bitwise_count(configs).astype(np.int64)
    key = code * (nbonds + 1) + nopen
    uniq, counts = np.unique(key, return_counts=True)
    table = {}
    for kv, c in zip(uniq.tolist(), counts.tolist()):
        mask, k = divmod(kv, nbonds + 1)
        sites = frozenset(y for j, y in enumerate(final_sites) if (mask >> j) & 1)
        table[(sites, k)] = c
    return final_sites, nbonds, table


def exact_law(initial, p, horizon):
    """Exact law of the row at ``initial.level + horizon`` as {WetRow: probability}.

    Probabilities are ``Fraction`` when ``p`` is a ``Fraction`` and float otherwise.
    """
    check_probability(p)
    horizon = check_int(horizon, "horizon", minimum=0)
    _, nbonds, table = _enumerate_counts(initial, horizon)
    exact = isinstance(p, Fraction)
    one = Fraction(1) if exact else 1.0
    q = one - p
    law = {}
    level = initial.level + horizon
    for (sites, k), c in table.items():
        w = c * (p ** k) * (q ** (nbonds - k))
        row = WetRow(level, sites)
        law[row] = law.get(row, 0 * one) + w
    return law


def enumerate_exact(initial, p, horizon, statistic: Callable[[WetRow], float] | None = None):
    """Exact expectation of ``statistic(row at horizon)`` over all bond configurations.

    With ``statistic=None`` the full law ``{WetRow: probability}`` is returned.
    Pass an indicator (e.g. :func:`survival`) to get the probability of an event.
    """
    law = exact_law(initial, p, horizon)
    if statistic is None:
        return law
    return sum(prob * statistic(row) for row, prob in law.items())


def survival(row):
    """Indicator of a non-empty row; as a statistic it yields P(Omega_n)."""
    return 1 if row.sites else 0


def size_law(initial, p, horizon):
    """Exact law of the number of wet sites at the horizon, {size: probability}."""
    out = {}
    for row, prob in exact_law(initial, p, horizon).items():
        out[len(row)] = out.get(len(row), 0) + prob
    return dict(sorted(out.items()))


def check_self_duality(a, b, p, horizon):
    """Return (P(xi_n^A meets B), P(xi^B run n more levels meets A)).

    ``a`` is a row at level 0 and ``b`` a set of sites with the parity of
    ``horizon``; the dual run starts ``b`` at level ``horizon`` and reads it
    at level ``2 * horizon``, which has the parity of ``a``.  Both are exact.
    """
    horizon = check_int(horizon, "horizon", minimum=0)
    if a.level != 0:
        raise ValueError("A must be a row at level 0")
    b_sites = b.sites if isinstance(b, WetRow) else frozenset(b)
    b_row = WetRow(horizon, b_sites)
    a_sites = a.sites
    forward = enumerate_exact(a, p, horizon, lambda row: 1 if row.sites & b_sites else 0)
    dual = enumerate_exact(b_row, p, horizon, lambda row: 1 if row.sites & a_sites else 0)
    return forward, dual


def stepper_throughput(width=4096, levels=20000, p=0.8, seed=0):
    """Single-threaded site updates per second of the full-line bit-parallel stepper."""
    import time

    nwords = max(1, width // 64)
    pb, mode = probability_bits(p)
    K.bench_kernel(seed, nwords, 2, pb, mode)
    t0 = time.perf_counter()
    K.bench_kernel(seed, nwords, levels, pb, mode)
    elapsed = time.perf_counter() - t0
    return nwords * 64 * levels / elapsed
