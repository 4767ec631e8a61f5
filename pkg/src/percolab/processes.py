"""Coupled origin, full-line and half-line processes on shared bond randomness.

Every trial runs four processes on one realization:

* ``origin``  started from {0}
* ``full``    started from all even sites
* ``minus``   started from the even sites <= 0 (right edge ``rminus``)
* ``plus``    started from the even sites >= 0 (left edge ``lplus``)

The simulation region at level n is |y| <= 2N + 2 - n, which reproduces the
infinite-line processes exactly on |y| <= N + 2 for every n <= N.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numba
import numpy as np

# the bundled TBB is too old for numba; workqueue is always available
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "workqueue"

from . import _kernels as K
from ._validation import check_int, check_probability, probability_bits
from .exceptions import RegimeError
from .lattice import BondRealization, WetRow, evolve_coupled

EDGE_NONE_HI = int(K.EDGE_NONE_HI)
EDGE_NONE_LO = int(K.EDGE_NONE_LO)
TAU_NOT_OBSERVED = -1
PROVISIONAL_WINDOW = 20

CSV_COLUMNS = ("trial", "level", "size", "rminus", "lplus", "diameter", "survived", "tau")


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    horizon: int
    size_path: np.ndarray
    rminus_path: np.ndarray
    lplus_path: np.ndarray
    diameter_path: np.ndarray  # float, NaN where the origin process is extinct
    survived: bool
    tau: int | None
    tau_provisional: bool = False

    def diameter(self, n):
        d = self.diameter_path[n]
        return None if np.isnan(d) else int(d)


@dataclass(frozen=True)
class CouplingReport:
    level: int
    holds: bool | None  # None marks a level where the origin process is extinct
    interval: tuple | None

    @property
    def applicable(self):
        return self.holds is not None


@dataclass
class TrialBatch:
    """Columnar per-level paths of many trials; row t belongs to ``trials[t]``."""

    p: float
    horizon: int
    seed: int
    trials: np.ndarray
    size: np.ndarray
    omin: np.ndarray
    omax: np.ndarray
    rminus: np.ndarray
    lplus: np.ndarray
    coupled: np.ndarray  # 1 holds, 0 violated, -1 origin extinct
    snap_levels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    snap_half: int = 0
    snapshots: np.ndarray | None = None  # (M, nsnap, 2 * snap_half + 1), index y + snap_half

    def __len__(self):
        return len(self.trials)

    @property
    def survived(self):
        return self.size[:, -1] > 0

    def alive(self, n):
        return self.size[:, n] > 0

    def diameter(self, n=None):
        """Diameter paths as float with NaN on extinct levels."""
        sl = slice(None) if n is None else n
        d = (self.omax[:, sl] - self.omin[:, sl]).astype(float)
        d[self.size[:, sl] == 0] = np.nan
        return d

    def tau(self):
        return tau_scan_paths(self.rminus, self.lplus)

    def record(self, t):
        tau, prov = tau_scan_paths(self.rminus[t:t + 1], self.lplus[t:t + 1])
        return TrialRecord(
            trial=int(self.trials[t]),
            horizon=self.horizon,
            size_path=self.size[t].astype(np.int64),
            rminus_path=self.rminus[t].astype(np.int64),
            lplus_path=self.lplus[t].astype(np.int64),
            diameter_path=self.diameter()[t],
            survived=bool(self.size[t, -1] > 0),
            tau=None if tau[0] == TAU_NOT_OBSERVED else int(tau[0]),
            tau_provisional=bool(prov[0]),
        )

    def records(self):
        for t in range(len(self)):
            yield self.record(t)

    def subset(self, index):
        """Batch restricted to rows ``index`` (slice, mask or integer array)."""
        snaps = None if self.snapshots is None else self.snapshots[index]
        return TrialBatch(self.p, self.horizon, self.seed, self.trials[index], self.size[index],
                          self.omin[index], self.omax[index], self.rminus[index],
                          self.lplus[index], self.coupled[index], self.snap_levels,
                          self.snap_half, snaps)

    @classmethod
    def concat(cls, batches):
        first = batches[0]
        if any(b.p != first.p or b.horizon != first.horizon or b.seed != first.seed
               for b in batches):
            raise ValueError("batches must share p, horizon and seed")
        snaps = None
        if first.snapshots is not None:
            snaps = np.concatenate([b.snapshots for b in batches])
        cat = lambda name: np.concatenate([getattr(b, name) for b in batches])
        return cls(first.p, first.horizon, first.seed, cat("trials"), cat("size"), cat("omin"),
                   cat("omax"), cat("rminus"), cat("lplus"), cat("coupled"), first.snap_levels,
                   first.snap_half, snaps)

    def full_line_window_sum(self, snap_index, half_width):
        """Sum of full-line occupations over |x| <= half_width at a snapshot level."""
        if self.snapshots is None:
            raise ValueError("batch was run without snapshots")
        if half_width > self.snap_half:
            raise ValueError(f"half width {half_width} exceeds stored snapshot half {self.snap_half}")
        c = self.snap_half
        return self.snapshots[:, snap_index, c - half_width:c + half_width + 1].sum(axis=1)


def _set_workers(workers):
    if workers is None:
        return
    workers = check_int(workers, "workers", minimum=1)
    numba.set_num_threads(min(workers, numba.config.NUMBA_NUM_THREADS))


def run_trials(p, horizon, n_trials, seed=0, *, first_trial=0, snap_levels=(), snap_half=0,
               workers=None):
    """Run trials ``first_trial .. first_trial + n_trials - 1`` and collect their paths.

    Trials are independent and seeded by (seed, trial index), so the result is
    the same for any worker count.
    """
    check_probability(p)
    horizon = check_int(horizon, "horizon", minimum=1)
    n_trials = check_int(n_trials, "n_trials", minimum=1)
    seed = check_int(seed, "seed", minimum=0)
    snap_levels = np.asarray(sorted(set(int(v) for v in snap_levels)), dtype=np.int64)
    if snap_levels.size and (snap_levels[0] < 0 or snap_levels[-1] > horizon):
        raise ValueError("snapshot levels must lie in [0, horizon]")
    if snap_half > horizon:
        raise ValueError("snapshot half width must not exceed the horizon")
    _set_workers(workers)
    trials = np.arange(first_trial, first_trial + n_trials, dtype=np.int64)
    shape = (n_trials, horizon + 1)
    size = np.zeros(shape, dtype=np.int32)
    omin = np.zeros(shape, dtype=np.int32)
    omax = np.zeros(shape, dtype=np.int32)
    rminus = np.zeros(shape, dtype=np.int32)
    lplus = np.zeros(shape, dtype=np.int32)
    coupled = np.zeros(shape, dtype=np.int8)
    snaps = np.zeros((n_trials, snap_levels.size, 2 * snap_half + 1), dtype=np.uint8)
    pb, mode = probability_bits(p)
    K.batch_kernel(seed, trials, horizon, pb, mode, snap_levels, snap_half,
                   size, omin, omax, rminus, lplus, coupled, snaps)
    return TrialBatch(p=float(p), horizon=horizon, seed=seed, trials=trials, size=size,
                      omin=omin, omax=omax, rminus=rminus, lplus=lplus, coupled=coupled,
                      snap_levels=snap_levels, snap_half=snap_half,
                      snapshots=snaps if snap_levels.size else None)


def run_until_survivors(p, horizon, survivors, seed=0, *, block=2000, max_trials=10**7, **kwargs):
    """Smallest prefix of trials 0, 1, ... holding ``survivors`` trials alive at the horizon."""
    survivors = check_int(survivors, "survivors", minimum=1)
    parts = []
    found = 0
    start = 0
    while found < survivors:
        if start >= max_trials:
            raise RegimeError(f"fewer than {survivors} survivors in {max_trials} trials at p={p}")
        b = run_trials(p, horizon, block, seed, first_trial=start, **kwargs)
        parts.append(b)
        found += int(b.survived.sum())
        start += block
    batch = TrialBatch.concat(parts)
    cut = int(np.searchsorted(np.cumsum(batch.survived), survivors)) + 1
    return batch.subset(slice(0, cut))


def run_trial(p, horizon, seed=0, trial=0):
    """Single trial as a :class:`TrialRecord`."""
    return run_trials(p, horizon, 1, seed, first_trial=trial).record(0)


def trial_rows(p, horizon, seed, trial, level):
    """The four processes of one trial at ``level`` as WetRows, via the generic stepper.

    Rows are exact on |y| <= horizon; they are returned restricted to that range.
    """
    half = 2 * horizon + 2
    bonds = BondRealization(p, -half, half, horizon, seed=seed, trial=trial)
    initials = [
        WetRow.origin(),
        WetRow.even_range(-half, half),
        WetRow.even_range(-half, 0),
        WetRow.even_range(0, half),
    ]
    trajs = evolve_coupled(initials, bonds, level)
    names = ("origin", "full", "minus", "plus")
    out = {}
    for name, traj in zip(names, trajs):
        row = traj[level]
        out[name] = WetRow(level, frozenset(y for y in row.sites if abs(y) <= horizon))
    return out


def coupling_check(rows, level=None):
    """Check origin == full line restricted to [min(l+, r-), max(l+, r-)] at one level.

    ``rows`` maps ``origin``, ``full``, ``minus`` and ``plus`` to WetRows of one
    level.  A report with ``holds=None`` marks an extinct origin process.
    """
    origin = rows["origin"]
    level = origin.level if level is None else level
    if not origin.sites:
        return CouplingReport(level, None, None)
    r = max(rows["minus"].sites)
    l = min(rows["plus"].sites)
    lo, hi = min(l, r), max(l, r)
    cut = frozenset(y for y in rows["full"].sites if lo <= y <= hi)
    return CouplingReport(level, cut == origin.sites, (l, r))


def tau_scan_paths(rminus, lplus, provisional_window=PROVISIONAL_WINDOW):
    """Coupling time per row of edge paths.

    tau is the smallest n with rminus[n] == lplus[n] and rminus[m] >= lplus[m] for
    every later observed m.  Returns (tau, provisional) arrays; tau is -1 when
    no such level exists, and provisional flags a no-crossing window shorter
    than ``provisional_window`` levels.
    """
    rminus = np.atleast_2d(np.asarray(rminus))
    lplus = np.atleast_2d(np.asarray(lplus))
    m, width = rminus.shape
    horizon = width - 1
    crossed = rminus < lplus
    idx = np.arange(width)
    last_cross = np.where(crossed, idx, -1).max(axis=1)
    meet = (rminus == lplus) & (idx[None, :] > last_cross[:, None])
    has = meet.any(axis=1)
    tau = np.where(has, meet.argmax(axis=1), TAU_NOT_OBSERVED)
    provisional = has & (horizon - tau < provisional_window)
    return tau, provisional


def tau_scan(record):
    """tau of a single :class:`TrialRecord` (None when not observed)."""
    tau, _ = tau_scan_paths(record.rminus_path, record.lplus_path)
    return None if tau[0] == TAU_NOT_OBSERVED else int(tau[0])


def write_trials_csv(batch, fh, header=""):
    """One line per (trial, level); empty diameter/tau/edges mark undefined values."""
    if header:
        fh.write(header)
    tau, _ = batch.tau()
    width = batch.horizon + 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    levels = np.arange(width)
    for t in range(len(batch)):
        size = batch.size[t]
        alive = size > 0
        diam = batch.omax[t] - batch.omin[t]
        rm = batch.rminus[t]
        lp = batch.lplus[t]
        surv = int(size[-1] > 0)
        tv = "" if tau[t] == TAU_NOT_OBSERVED else str(int(tau[t]))
        trial = int(batch.trials[t])
        w.writerows(
            (trial, int(n), int(size[n]),
             "" if rm[n] == EDGE_NONE_LO else int(rm[n]),
             "" if lp[n] == EDGE_NONE_HI else int(lp[n]),
             int(diam[n]) if alive[n] else "",
             surv, tv)
            for n in levels
        )
        if buf.tell() > 1 << 22:
            fh.write(buf.getvalue())
            buf.seek(0)
            buf.truncate()
    fh.write(buf.getvalue())
