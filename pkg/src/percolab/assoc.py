"""Associated sequences: exhaustive association checks, the maximal inequality,
the Anscombe condition and the random-index CLT at desk scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_positive
from .clt import SampleBatch

MAX_ASSOC_DIM = 3
CHUNK = 256


# exhaustive association check ---------------------------------------------

def monotone_boolean_functions(k):
    """All non-decreasing f: {0,1}^k -> {0,1} as truth tables indexed like itertools.product."""
    points = list(itertools.product((0, 1), repeat=k))
    below = [[j for j, q in enumerate(points) if all(a <= b for a, b in zip(q, pt))]
             for pt in points]
    out = []
    for bits in itertools.product((0, 1), repeat=len(points)):
        if all(bits[j] <= bits[i] for i in range(len(points)) for j in below[i]):
            out.append(np.array(bits, dtype=float))
    return out


def _as_table(joint):
    if isinstance(joint, dict):
        k = len(next(iter(joint)))
        table = np.zeros((2,) * k)
        for key, prob in joint.items():
            table[tuple(key)] += float(prob)
        return table
    return np.asarray(joint, dtype=float)


def check_association_exhaustive(joint):
    """Minimal covariance cov(f1(X), f2(X)) over all monotone Boolean f1, f2.

    ``joint`` is a probability table of shape (2,)*k (or a dict keyed by 0/1
    tuples) with k <= 3.  An associated law gives a non-negative result.
    """
    table = _as_table(joint)
    k = table.ndim
    if k < 1 or k > MAX_ASSOC_DIM or table.shape != (2,) * k:
        raise ValueError(f"need a (2,)*k table with 1 <= k <= {MAX_ASSOC_DIM}, got {table.shape}")
    if (table < -1e-12).any() or abs(table.sum() - 1.0) > 1e-9:
        raise ValueError("joint table is not a probability distribution")
    probs = table.reshape(-1)
    funcs = monotone_boolean_functions(k)
    means = [probs @ f for f in funcs]
    best = math.inf
    for i, f in enumerate(funcs):
        for j in range(i, len(funcs)):
            c = probs @ (f * funcs[j]) - means[i] * means[j]
            best = min(best, c)
    return float(best)


def occupation_table(law, sites):
    """Joint table of the indicators xi(x), x in ``sites``, from an exact row law."""
    table = np.zeros((2,) * len(sites))
    for row, prob in law.items():
        table[tuple(int(x in row.sites) for x in sites)] += float(prob)
    return table


# generators ----------------------------------------------------------------

@dataclass
class AssociatedSequenceSpec:
    """Zero-mean associated sequence built from non-decreasing maps of independent drivers.

    kind ``iid``: X_k = Z_k.  kind ``moving_average``: X_k = sum_j w_j Z_{k-j}
    with non-negative weights.  kind ``percolation``: X_k = xi(2k) - rho along a
    full-line row at a burn-in level, rho estimated from the rows themselves.
    Drivers are standard normal or Rademacher (+-1).
    """

    kind: str = "moving_average"
    driver: str = "normal"
    weights: tuple = tuple(1.0 / (j + 1) for j in range(10))
    p: float = 0.8
    nu_level: int = 200
    seed: int = 0
    _rho: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("iid", "moving_average", "percolation"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.driver not in ("normal", "rademacher"):
            raise ValueError(f"unknown driver {self.driver!r}")
        if self.kind == "moving_average":
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or w.size == 0 or (w < 0).any() or w.sum() <= 0:
                raise ValueError("moving-average weights must be non-negative with positive sum")
        if self.kind == "iid":
            self.weights = (1.0,)

    @property
    def exact(self):
        return self.kind != "percolation"

    def autocovariance(self, h):
        """gamma(h) = cov(X_k, X_{k+h}); exact for the synthetic kinds."""
        if not self.exact:
            raise ValueError("percolation generator has no closed-form autocovariance")
        w = np.asarray(self.weights, dtype=float)
        h = abs(int(h))
        if h >= w.size:
            return 0.0
        return float(w[:w.size - h] @ w[h:])

    @property
    def sigma2(self):
        """lim Var(S_n / sqrt(n)) = Var(Z) * (sum w)^2."""
        if not self.exact:
            raise ValueError("percolation generator has no closed-form sigma^2")
        return float(np.sum(self.weights)) ** 2

    def second_moment(self):
        return self.autocovariance(0)

    def cov_with_past(self, k):
        """cov(X_k, S_{k-1}) for the 1-based index k."""
        return float(sum(self.autocovariance(h) for h in range(1, min(k - 1, len(self.weights) - 1) + 1)))

    def finite_variance(self, n):
        """Var(S_n) / n, exact."""
        return self.autocovariance(0) + 2.0 * sum(
            (1.0 - h / n) * self.autocovariance(h) for h in range(1, min(n, len(self.weights))))

    def _drivers(self, rng, shape):
        if self.driver == "normal":
            return rng.standard_normal(shape)
        return rng.integers(0, 2, size=shape) * 2.0 - 1.0

    def sample(self, n_paths, length, seed=None, first_path=0):
        """Array (n_paths, length); path i depends only on (seed, first_path + i)."""
        seed = self.seed if seed is None else seed
        if self.kind == "percolation":
            return self._sample_percolation(n_paths, length, seed, first_path)
        out = np.empty((n_paths, length))
        w = np.asarray(self.weights, dtype=float)
        r = w.size
        start = first_path
        done = 0
        while done < n_paths:
            block = start // CHUNK
            offset = start % CHUNK
            rng = np.random.default_rng([seed, block])
            z = self._drivers(rng, (CHUNK, length + r - 1))[offset:]
            take = min(n_paths - done, z.shape[0])
            z = z[:take]
            x = np.zeros((take, length))
            for j in range(r):
                x += w[j] * z[:, r - 1 - j:r - 1 - j + length]
            out[done:done + take] = x
            done += take
            start += take
        return out

    def _sample_percolation(self, n_paths, length, seed, first_path):
        from .estimators import sample_nu

        half = length
        nu = sample_nu(self.p, n_paths, level=self.nu_level, half=half, seed=seed,
                       first_trial=first_path)
        occ = nu.occupation[:, :length].astype(float)
        if self._rho is None:
            # density from an independent block of rows
            ref = sample_nu(self.p, 64, level=self.nu_level, half=half, seed=seed,
                            first_trial=10**9)
            self._rho = float(ref.occupation.mean())
        return occ - self._rho


@dataclass(frozen=True)
class RandomIndexSpec:
    """N_t = max(1, [rate t + t^shift_exponent + t^noise_exponent zeta]).

    ``theta`` is the declared limit of N_t / t; ``rate`` defaults to it.  Noise
    ``bounded`` draws zeta ~ U[-1, 1]; ``heavy`` draws standard Cauchy clipped so
    that N_t <= 3 rate t; ``none`` gives a deterministic index.
    """

    theta: float = 1.0
    rate: float | None = None
    noise: str = "bounded"
    noise_exponent: float = 0.75
    shift_exponent: float | None = None

    def __post_init__(self):
        check_positive(self.theta, "theta")
        if self.rate is not None:
            check_positive(self.rate, "rate")
        if self.noise not in ("bounded", "heavy", "none"):
            raise ValueError(f"unknown noise {self.noise!r}")

    @property
    def effective_rate(self):
        return self.theta if self.rate is None else self.rate

    def draw(self, t, n, rng):
        base = self.effective_rate * t
        if self.shift_exponent is not None:
            base += t ** self.shift_exponent
        if self.noise == "bounded":
            zeta = rng.uniform(-1.0, 1.0, n)
        elif self.noise == "heavy":
            zeta = rng.standard_cauchy(n)
        else:
            zeta = np.zeros(n)
        raw = np.floor(base + t ** self.noise_exponent * zeta)
        cap = math.floor(3 * self.effective_rate * t) + 1
        return np.clip(raw, 1, cap).astype(np.int64)

    def max_index(self, t):
        base = self.effective_rate * t + (t ** self.shift_exponent if self.shift_exponent else 0.0)
        if self.noise == "bounded":
            return int(math.floor(base + t ** self.noise_exponent)) + 1
        if self.noise == "heavy":
            return math.floor(3 * self.effective_rate * t) + 1
        return int(math.floor(base)) + 1


def _index_rng(seed, t, block):
    return np.random.default_rng([seed, 7919, int(t), block])


def _paths_with_index(spec, index, t, n_paths, seed):
    """Yield (S, N_t) blocks; S[:, k-1] = S_k."""
    length = max(index.max_index(t), int(t))
    for start in range(0, n_paths, CHUNK):
        take = min(CHUNK, n_paths - start)
        x = spec.sample(take, length, seed=seed, first_path=start)
        s = np.cumsum(x, axis=1)
        nt = index.draw(t, take, _index_rng(seed, t, start // CHUNK))
        yield s, nt


# maximal inequality ----------------------------------------------------------

def index_window(t, eps):
    """(m(t), [t], n(t)) with m(t) = [t (1 - eps)^3] + 1 and n(t) = [t (1 + eps)^3]."""
    tt = int(math.floor(t))
    return int(math.floor(t * (1 - eps) ** 3)) + 1, tt, int(math.floor(t * (1 + eps) ** 3))


@dataclass(frozen=True)
class MaximalInequalityResult:
    t: int
    eps: float
    m: int
    lhs: float
    lhs_se: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + 3 * self.lhs_se


def maximal_bound(spec, t, eps, moments=None):
    """8 / (eps^2 [t]) * (sum_{k=m}^{[t]} E X_k^2 + 2 sum_{k=m}^{[t]} cov(X_k, S_{k-1})).

    ``moments`` = (second moment, cov-with-past function) overrides the exact
    values for generators without closed forms.
    """
    m, tt, _ = index_window(t, eps)
    if moments is None:
        ex2, cov_past = spec.second_moment(), spec.cov_with_past
    else:
        ex2, cov_past = moments
    total = sum(ex2 + 2.0 * cov_past(k) for k in range(m, tt + 1))
    return 8.0 / (eps ** 2 * tt) * total


def _estimated_moments(x, max_lag=60):
    """Stationary plug-in moments from sample paths: E X^2 and cov(X_k, S_{k-1})."""
    xc = x - x.mean()
    n = x.shape[1]
    gam = [float((xc[:, :n - h] * xc[:, h:]).mean()) for h in range(min(max_lag, n - 1) + 1)]
    cum = np.cumsum([0.0] + gam[1:])

    def cov_past(k):
        return float(cum[min(k - 1, len(gam) - 1)])

    return gam[0], cov_past


def maximal_inequality_check(spec, t, eps, n_paths=2000, seed=0):
    """Empirical P(max_{m(t) <= k <= [t]} |S_k - S_[t]| >= eps sqrt[t]) against the bound."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    t = check_int(int(t), "t", minimum=1)
    n_paths = check_int(n_paths, "n_paths", minimum=1)
    m, tt, _ = index_window(t, eps)
    if m > tt:
        raise ValueError(f"m(t) = {m} exceeds [t] = {tt}; eps too small for this t")
    hits = 0
    xs = []
    for start in range(0, n_paths, CHUNK):
        take = min(CHUNK, n_paths - start)
        x = spec.sample(take, tt, seed=seed, first_path=start)
        s = np.cumsum(x, axis=1)
        dev = np.abs(s[:, m - 1:tt] - s[:, tt - 1:tt]).max(axis=1)
        hits += int((dev >= eps * math.sqrt(tt)).sum())
        if not spec.exact and len(xs) < 4:
            xs.append(x)
    lhs = hits / n_paths
    se = math.sqrt(max(lhs * (1 - lhs), 1.0 / n_paths) / n_paths)
    moments = None if spec.exact else _estimated_moments(np.vstack(xs))
    return MaximalInequalityResult(t, float(eps), m, lhs, se, maximal_bound(spec, t, eps, moments))


# Anscombe condition and random-index CLT ------------------------------------

@dataclass(frozen=True)
class AnscombeResult:
    t: int
    exceedance: dict  # eps -> empirical P(|S_{N_t} - S_[t]| >= eps sqrt[t])
    n_paths: int


def anscombe_check(spec, index, t_grid, eps_grid=(0.1, 0.25, 0.5), n_paths=2000, seed=0):
    """Empirical exceedance of |S_{N_t} - S_[t]| / sqrt[t] for each t and eps."""
    out = []
    for t in t_grid:
        tt = int(math.floor(t))
        diffs = []
        for s, nt in _paths_with_index(spec, index, t, n_paths, seed):
            rows = np.arange(s.shape[0])
            diffs.append(np.abs(s[rows, nt - 1] - s[:, tt - 1]) / math.sqrt(tt))
        d = np.concatenate(diffs)
        out.append(AnscombeResult(int(t), {float(e): float((d >= e).mean()) for e in eps_grid},
                                  n_paths))
    return out


def random_index_clt(spec, index, t, n_paths=10000, seed=0):
    """Batches of S_{N_t} / sqrt(N_t) and S_{N_t} / sqrt(theta t)."""
    by_n, by_t = [], []
    for s, nt in _paths_with_index(spec, index, t, n_paths, seed):
        sn = s[np.arange(s.shape[0]), nt - 1]
        by_n.append(sn / np.sqrt(nt))
        by_t.append(sn / math.sqrt(index.theta * t))
    level = int(t)
    return (SampleBatch("S_N/sqrt(N)", level, np.concatenate(by_n), "unconditioned"),
            SampleBatch("S_N/sqrt(theta t)", level, np.concatenate(by_t), "unconditioned"))


def fixed_index_variance(spec, t, n_paths=2000, seed=0):
    """Empirical Var(S_[t] / sqrt[t]) with its standard error."""
    tt = int(math.floor(t))
    vals = []
    for start in range(0, n_paths, CHUNK):
        take = min(CHUNK, n_paths - start)
        x = spec.sample(take, tt, seed=seed, first_path=start)
        vals.append(x.sum(axis=1) / math.sqrt(tt))
    v = np.concatenate(vals)
    var = float(v.var(ddof=1))
    return var, var * math.sqrt(2.0 / (v.size - 1))
