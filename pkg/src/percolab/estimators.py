"""Estimators for the survival probability, edge speed, occupation variance and tail decay."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import _kernels as K
from ._validation import check_int, check_probability, probability_bits
from .exceptions import InsufficientDataError, RegimeError
from .processes import EDGE_NONE_LO, TAU_NOT_OBSERVED, TrialBatch, _set_workers, run_trials

MIN_TAIL_COUNT = 30
MIN_TAIL_POINTS = 5
DEFAULT_TRUNCATION = 50
DEFAULT_NU_LEVEL = 200


@dataclass(frozen=True)
class RhoEstimate:
    rho: float
    se: float
    rho_n: np.ndarray
    rho_n_se: np.ndarray
    n_trials: int


@dataclass(frozen=True)
class AlphaEstimate:
    alpha: float
    se: float
    alpha_edge: float
    se_edge: float
    n_survivors: int

    @property
    def joint_se(self):
        return math.hypot(self.se, self.se_edge)

    def agree(self, k=2.0):
        return abs(self.alpha - self.alpha_edge) <= k * self.joint_se


@dataclass(frozen=True)
class Sigma2Estimate:
    sigma2: float
    se: float
    covariances: np.ndarray  # lag 0, 2, 4, ... in lattice units
    covariance_se: np.ndarray
    truncation: int
    n_samples: int


@dataclass(frozen=True)
class TailFit:
    C: float
    gamma: float
    r2: float
    slope_se: float
    n_points: int
    first: int
    last: int

    @property
    def decaying(self):
        slope = -self.gamma
        return bool(slope < 0 and slope + 2 * self.slope_se < 0)


@dataclass(frozen=True)
class NuSample:
    """Full-line occupations at ``level`` on the parity sites of [-half, half]."""

    level: int
    half: int
    occupation: np.ndarray  # (n_samples, n_sites) uint8
    positions: np.ndarray

    @property
    def n_samples(self):
        return self.occupation.shape[0]


@dataclass
class EstimateSet:
    p: float
    rho_hat: float
    rho_se: float
    rho_n_path: np.ndarray
    alpha_hat: float
    alpha_se: float
    alpha_edge: float
    alpha_edge_se: float
    sigma2_hat: float
    sigma2_se: float
    decay: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        """Flat key/value document (nested tail fits become ``decay.<name>.<field>``)."""
        out = {
            "p": self.p,
            "rho_hat": self.rho_hat,
            "rho_se": self.rho_se,
            "alpha_hat": self.alpha_hat,
            "alpha_se": self.alpha_se,
            "alpha_edge": self.alpha_edge,
            "alpha_edge_se": self.alpha_edge_se,
            "sigma2_hat": self.sigma2_hat,
            "sigma2_se": self.sigma2_se,
            "rho_n_path": [float(v) for v in self.rho_n_path],
        }
        for name, fit in self.decay.items():
            for key, value in asdict(fit).items():
                out[f"decay.{name}.{key}"] = value
        for key, value in self.meta.items():
            out[f"meta.{key}"] = value
        return {k: _plain(v) for k, v in out.items()}


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _sizes(data):
    if isinstance(data, TrialBatch):
        return data.size
    arr = np.asarray(data)
    return np.atleast_2d(arr)


def estimate_rho(data, horizon=None):
    """Fraction of trials alive at each level, with binomial standard errors.

    ``rho_n[n]`` estimates P(Omega_n); the survival estimate is ``rho_n[horizon]``.
    Meaningful for at least ~10^3 trials.
    """
    size = _sizes(data)
    if size.shape[0] == 0:
        raise ValueError("estimate_rho needs at least one trial")
    if horizon is not None:
        size = size[:, :horizon + 1]
    m = size.shape[0]
    rho_n = (size > 0).mean(axis=0)
    se = np.sqrt(rho_n * (1 - rho_n) / m)
    return RhoEstimate(float(rho_n[-1]), float(se[-1]), rho_n, se, m)


def estimate_alpha(batch, level=None):
    """Edge speed from survivors' diameters, cross-checked against the half-line edge.

    alpha = mean of d_N / (2N) over trials alive at N; alpha_edge = mean of r_N / N
    over all trials where the left half-line edge is observed.
    """
    n = batch.horizon if level is None else level
    alive = batch.size[:, n] > 0
    if not alive.any():
        raise RegimeError(f"no trial survives to level {n}; p={batch.p} looks subcritical")
    if n == 0:
        raise ValueError("edge speed needs a positive level")
    d = (batch.omax[alive, n] - batch.omin[alive, n]) / (2.0 * n)
    r = batch.rminus[:, n]
    r = r[r != EDGE_NONE_LO] / float(n)
    se_d = d.std(ddof=1) / math.sqrt(d.size) if d.size > 1 else 0.0
    se_r = r.std(ddof=1) / math.sqrt(r.size) if r.size > 1 else 0.0
    return AlphaEstimate(float(d.mean()), float(se_d), float(r.mean()), float(se_r), int(d.size))


def sample_nu(p, n_samples, level=DEFAULT_NU_LEVEL, half=200, seed=0, first_trial=0, workers=None):
    """Independent full-line rows at ``level``, approximating the upper invariant law."""
    check_probability(p)
    n_samples = check_int(n_samples, "n_samples", minimum=1)
    level = check_int(level, "level", minimum=0)
    half = check_int(half, "half", minimum=0)
    _set_workers(workers)
    positions = np.array([y for y in range(-half, half + 1) if (y + level) % 2 == 0])
    out = np.zeros((n_samples, positions.size), dtype=np.uint8)
    pb, mode = probability_bits(p)
    trials = np.arange(first_trial, first_trial + n_samples, dtype=np.int64)
    K.full_line_batch(seed, trials, level, half, pb, mode, out)
    return NuSample(level, half, out, positions)


def burn_in_level(gamma_hat=None, floor=DEFAULT_NU_LEVEL):
    """Level at which full-line rows are treated as invariant-law samples."""
    if gamma_hat is None or not gamma_hat > 0:
        return floor
    return max(floor, int(math.ceil(10.0 / gamma_hat)))


def _lag_covariances(x, kmax, origin=None):
    """Unbiased cross-moment covariances by site lag, centred per position."""
    s, w = x.shape
    c = x - x.mean(axis=0)
    if origin is None:
        span = w - kmax
        base = c[:, :span]
        return np.array([(base * c[:, k:k + span]).sum() / ((s - 1) * span) for k in range(kmax + 1)])
    col = c[:, origin]
    return np.array([
        0.5 * ((col * c[:, origin + k]).sum() + (col * c[:, origin - k]).sum()) / (s - 1)
        for k in range(kmax + 1)
    ])


def estimate_sigma2(nu, truncation=DEFAULT_TRUNCATION, origin=None, n_batches=10):
    """Truncated covariance sum  c(0) + 2 * sum_{0 < x <= L} cov(xi(x), xi(0)).

    Lags run over parity-compatible x (steps of 2 lattice units).  With
    ``origin=None`` covariances are averaged over all positions of the window;
    an integer ``origin`` (a site coordinate) uses that site alone.  The
    standard error comes from ``n_batches`` batch means over samples.
    """
    truncation = check_int(truncation, "truncation", minimum=0)
    kmax = truncation // 2
    x = nu.occupation.astype(float)
    s, w = x.shape
    if s < 2 * n_batches:
        raise InsufficientDataError(f"need at least {2 * n_batches} samples, got {s}")
    if 2 * kmax >= w:
        raise ValueError(f"truncation {truncation} exceeds the sampled window of {w} sites")
    col = None
    if origin is not None:
        hits = np.flatnonzero(nu.positions == origin)
        if hits.size == 0:
            raise ValueError(f"origin {origin} is not a sampled site")
        col = int(hits[0])
        if col - kmax < 0 or col + kmax >= w:
            raise ValueError(f"truncation {truncation} exceeds the window around origin {origin}")
    cov = _lag_covariances(x, kmax, col)
    weights = np.full(kmax + 1, 2.0)
    weights[0] = 1.0
    batches = np.array_split(np.arange(s), n_batches)
    per = np.array([_lag_covariances(x[b], kmax, col) for b in batches])
    sig_b = per @ weights
    se = sig_b.std(ddof=1) / math.sqrt(n_batches)
    cov_se = per.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return Sigma2Estimate(float(cov @ weights), float(se), cov, cov_se, truncation, s)


def fit_exponential_tail(levels, probs, counts=None, min_count=MIN_TAIL_COUNT,
                         min_points=MIN_TAIL_POINTS):
    """Least-squares line through (n, log prob) on the longest usable run.

    A point is usable when its probability is positive and, if ``counts`` is
    given, backed by at least ``min_count`` events.  Returns C = exp(intercept),
    gamma = -slope and R^2 (NaN when log prob is constant).
    """
    levels = np.asarray(levels, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if levels.shape != probs.shape or levels.ndim != 1:
        raise ValueError("levels and probs must be 1-d arrays of equal length")
    usable = probs > 0
    if counts is not None:
        usable &= np.asarray(counts) >= min_count
    best = (0, -1)
    start = None
    for i, ok in enumerate(np.append(usable, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best[1] - best[0] + 1:
                best = (start, i - 1)
            start = None
    first, last = best
    npts = last - first + 1
    if npts < min_points:
        raise InsufficientDataError(f"only {max(npts, 0)} usable tail points, need {min_points}")
    x = levels[first:last + 1]
    y = np.log(probs[first:last + 1])
    xm = x.mean()
    sxx = ((x - xm) ** 2).sum()
    slope = ((x - xm) * (y - y.mean())).sum() / sxx
    intercept = y.mean() - slope * xm
    resid = y - (intercept + slope * x)
    sse = (resid ** 2).sum()
    sst = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    slope_se = math.sqrt(sse / (npts - 2) / sxx) if npts > 2 else float("inf")
    return TailFit(float(math.exp(intercept)), float(-slope), float(r2), float(slope_se),
                   int(npts), int(levels[first]), int(levels[last]))


def survival_gap_tail(batch):
    """(n, P(alive at n and dead at N), count) for n = 0..N."""
    alive = batch.size > 0
    gap = alive & ~alive[:, -1:]
    counts = gap.sum(axis=0)
    return np.arange(batch.horizon + 1), counts / len(batch), counts


def tau_tail(batch):
    """(n, P(tau >= n), count) for n = 1..N; unobserved tau counts as exceeding every n."""
    tau, _ = batch.tau()
    tau = np.where(tau == TAU_NOT_OBSERVED, batch.horizon + 1, tau)
    levels = np.arange(1, batch.horizon + 1)
    counts = (tau[:, None] >= levels[None, :]).sum(axis=0)
    return levels, counts / len(batch), counts


class PercolationEstimator(BaseEstimator):
    """Fit the constants rho, alpha, sigma^2 and the tail decay rates at one p.

    ``fit`` simulates its own trials unless a :class:`TrialBatch` is passed,
    then draws invariant-law rows for the covariance sum.  With ``rho_trials``
    set, rho comes from a separate, cheaper run of that many trials to
    ``rho_horizon``: survival to a moderate level already pins rho up to an
    exponentially small gap, and the extra trials shrink its standard error.
    """

    def __init__(self, p=0.8, horizon=400, n_trials=10000, seed=0, nu_samples=2000,
                 nu_level=None, nu_half=200, truncation=DEFAULT_TRUNCATION, rho_trials=None,
                 rho_horizon=100, workers=None):
        self.p = p
        self.horizon = horizon
        self.n_trials = n_trials
        self.seed = seed
        self.nu_samples = nu_samples
        self.nu_level = nu_level
        self.nu_half = nu_half
        self.truncation = truncation
        self.rho_trials = rho_trials
        self.rho_horizon = rho_horizon
        self.workers = workers

    def fit(self, X=None, y=None):
        check_probability(self.p)
        batch = X if X is not None else run_trials(
            self.p, self.horizon, self.n_trials, self.seed, workers=self.workers)
        self.rho_ = estimate_rho(batch)
        self.alpha_ = estimate_alpha(batch)
        self.decay_ = {}
        for name, tail in (("survival_gap", survival_gap_tail), ("tau", tau_tail)):
            levels, probs, counts = tail(batch)
            try:
                self.decay_[name] = fit_exponential_tail(levels, probs, counts)
            except InsufficientDataError:
                pass
        gap = self.decay_.get("survival_gap")
        level = self.nu_level if self.nu_level is not None else burn_in_level(
            gap.gamma if gap is not None else None)
        # invariant-law rows use trial indices disjoint from the path trials
        self.nu_ = sample_nu(self.p, self.nu_samples, level=level, half=self.nu_half,
                             seed=self.seed, first_trial=len(batch), workers=self.workers)
        if self.p >= 1.0:
            cov = np.zeros(self.truncation // 2 + 1)
            self.sigma2_ = Sigma2Estimate(0.0, 0.0, cov, cov, self.truncation, self.nu_samples)
        else:
            self.sigma2_ = estimate_sigma2(self.nu_, self.truncation)
        self.n_trials_seen_ = len(batch)
        if self.rho_trials:
            extra = run_trials(self.p, self.rho_horizon, self.rho_trials, self.seed,
                               first_trial=len(batch) + self.nu_samples, workers=self.workers)
            self.rho_ = estimate_rho(extra)
        return self

    def _check_fitted(self):
        if not hasattr(self, "rho_"):
            raise NotFittedError(f"This {type(self).__name__} instance is not fitted yet.")

    @property
    def estimate_set_(self):
        self._check_fitted()
        return EstimateSet(
            p=float(self.p),
            rho_hat=self.rho_.rho,
            rho_se=self.rho_.se,
            rho_n_path=self.rho_.rho_n,
            alpha_hat=self.alpha_.alpha,
            alpha_se=self.alpha_.se,
            alpha_edge=self.alpha_.alpha_edge,
            alpha_edge_se=self.alpha_.se_edge,
            sigma2_hat=self.sigma2_.sigma2,
            sigma2_se=self.sigma2_.se,
            decay=dict(self.decay_),
            meta={"horizon": self.horizon, "n_trials": self.n_trials_seen_, "seed": self.seed,
                  "nu_level": self.nu_.level, "nu_samples": self.nu_.n_samples,
                  "truncation": self.truncation, "rho_trials": self.rho_trials,
                  "rho_horizon": self.rho_horizon},
        )
