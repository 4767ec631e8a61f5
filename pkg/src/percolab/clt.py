"""Standardized cluster-size statistics and their distance to the normal target.

Three statistics are built from a :class:`~percolab.processes.TrialBatch`:

``A``        (|xi_n^O| - alpha rho n) / sqrt(d_n / 2)   survivors only
``A_prime``  (|xi_n^O| - alpha rho n) / sqrt(alpha n)   survivors only
``A_hat``    (sum_{|x| <= alpha n} xi_n^{2Z}(x) - alpha rho n) / sqrt(alpha n), all trials
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_1d
from .estimators import estimate_alpha, estimate_rho
from .exceptions import InsufficientDataError

KINDS = ("A", "A_prime", "A_hat")
MIN_KS_SIZE = 100


@dataclass(frozen=True)
class SampleBatch:
    kind: str
    level: int
    values: np.ndarray
    conditioning: str  # "survived-to-horizon" or "unconditioned"
    excluded: int = 0

    def __len__(self):
        return len(self.values)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def variance(self):
        return float(np.var(self.values, ddof=1))

    @property
    def mean_se(self):
        return math.sqrt(self.variance / len(self.values))


@dataclass(frozen=True)
class LevelComparison:
    level: int
    count: int
    var_A: float
    var_A_prime: float
    ks_A: float
    ks_A_prime: float
    ks_between: float

    @property
    def variance_ratio(self):
        return self.var_A / self.var_A_prime


def _constants(estimates):
    if isinstance(estimates, tuple):
        return float(estimates[0]), float(estimates[1])
    return float(estimates.alpha_hat), float(estimates.rho_hat)


def build_batch(kind, batch, estimates, level):
    """Standardize one level of ``batch`` with plug-in (alpha, rho).

    ``estimates`` is an :class:`~percolab.estimators.EstimateSet` or an
    ``(alpha, rho)`` pair, ideally fitted on an independent run.  For ``A``
    surviving trials with d_n = 0 are dropped and counted in ``excluded``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    alpha, rho = _constants(estimates)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    centre = alpha * rho * level
    if kind == "A_hat":
        hits = np.flatnonzero(batch.snap_levels == level)
        if hits.size == 0:
            raise ValueError(f"level {level} was not snapshotted; rerun with snap_levels")
        half = int(math.floor(alpha * level))
        sums = batch.full_line_window_sum(int(hits[0]), half)
        values = (sums - centre) / math.sqrt(alpha * level)
        return SampleBatch(kind, level, values.astype(float), "unconditioned")
    alive = batch.survived
    size = batch.size[alive, level].astype(float)
    if kind == "A_prime":
        return SampleBatch(kind, level, (size - centre) / math.sqrt(alpha * level),
                           "survived-to-horizon")
    d = (batch.omax[alive, level] - batch.omin[alive, level]).astype(float)
    keep = d > 0
    values = (size[keep] - centre) / np.sqrt(d[keep] / 2.0)
    return SampleBatch(kind, level, values, "survived-to-horizon", int((~keep).sum()))


class ECDF:
    """Right-continuous empirical distribution function."""

    def __init__(self, values):
        self.x = np.sort(check_1d(values))
        self.n = self.x.size

    def __call__(self, t):
        return np.searchsorted(self.x, t, side="right") / self.n


def normal_cdf(x, s2, mean=0.0):
    return ndtr((np.asarray(x, dtype=float) - mean) / math.sqrt(s2))


def ks_distance(values, s2, mean=0.0, min_size=MIN_KS_SIZE):
    """sup_x |ECDF(x) - Phi((x - mean) / sqrt(s2))|."""
    if isinstance(values, SampleBatch):
        values = values.values
    if not s2 > 0:
        raise ValueError(f"target variance must be positive, got {s2}")
    x = np.sort(check_1d(values, min_size=min_size))
    n = x.size
    f = normal_cdf(x, s2, mean)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def ks_two_sample(a, b):
    """sup_x |F_a(x) - F_b(x)| between two empirical laws."""
    a = np.sort(check_1d(getattr(a, "values", a)))
    b = np.sort(check_1d(getattr(b, "values", b)))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def plot_data(values, s2, mean=0.0, points=None):
    """(x, ECDF(x), Phi(x)) triples at the sorted sample points (or a subsample)."""
    e = ECDF(getattr(values, "values", values))
    x = e.x if points is None else np.quantile(e.x, np.linspace(0, 1, points))
    return np.column_stack([x, e(x), normal_cdf(x, s2, mean)])


def compare_scalings(batch, estimates, levels, s2):
    """Per level: variances and KS distances of the d_n- and alpha n-scaled statistics.

    The two statistics differ by the factor sqrt(alpha n / (d_n / 2)), so a
    shared limit shows up as a variance ratio near 1 and a small KS distance
    between the two batches.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise InsufficientDataError(f"need at least 3 levels, got {len(levels)}")
    rows = []
    for n in levels:
        a = build_batch("A", batch, estimates, n)
        ap = build_batch("A_prime", batch, estimates, n)
        rows.append(LevelComparison(
            level=n, count=len(ap), var_A=a.variance, var_A_prime=ap.variance,
            ks_A=ks_distance(a, s2), ks_A_prime=ks_distance(ap, s2),
            ks_between=ks_two_sample(a, ap)))
    return rows


def level_summary(sample, s2):
    """Row of the per-level CSV: level, kind, count, mean, variance, ks_distance."""
    return (sample.level, sample.kind, len(sample), sample.mean, sample.variance,
            ks_distance(sample, s2))


class ClusterSizeStandardizer(TransformerMixin, BaseEstimator):
    """Map a TrialBatch to one standardized statistic at a fixed level.

    If ``alpha`` or ``rho`` is None they are estimated in ``fit``; pass values
    from an independent run to avoid self-normalization.
    """

    def __init__(self, kind="A_prime", level=None, alpha=None, rho=None):
        self.kind = kind
        self.level = level
        self.alpha = alpha
        self.rho = rho

    def fit(self, X, y=None):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        self.alpha_ = self.alpha if self.alpha is not None else estimate_alpha(X).alpha
        self.rho_ = self.rho if self.rho is not None else estimate_rho(X).rho
        self.level_ = self.level if self.level is not None else X.horizon
        return self

    def transform(self, X):
        if not hasattr(self, "alpha_"):
            raise NotFittedError(f"This {type(self).__name__} instance is not fitted yet.")
        return build_batch(self.kind, X, (self.alpha_, self.rho_), self.level_).values
