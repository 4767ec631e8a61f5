import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab import (AssociatedSequenceSpec, RandomIndexSpec, WetRow, anscombe_check,
                      check_association_exhaustive, exact_law, ks_distance,
                      maximal_inequality_check, random_index_clt)
from percolab.assoc import (fixed_index_variance, index_window, maximal_bound,
                            monotone_boolean_functions, occupation_table)
from percolab.clt import ks_two_sample


def product_table(ps):
    table = np.ones((2,) * len(ps))
    for idx in itertools.product((0, 1), repeat=len(ps)):
        table[idx] = math.prod(p if b else 1 - p for p, b in zip(ps, idx))
    return table


# association -------------------------------------------------------------------

def test_dedekind_counts():
    assert [len(monotone_boolean_functions(k)) for k in (1, 2, 3)] == [3, 6, 20]


def test_independent_product_is_associated():
    assert check_association_exhaustive(product_table([0.5, 0.5, 0.5])) >= -1e-15


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=3))
def test_product_laws_associated(ps):
    assert check_association_exhaustive(product_table(ps)) >= -1e-12


def test_anticorrelated_pair():
    assert check_association_exhaustive({(0, 1): 0.5, (1, 0): 0.5}) == pytest.approx(-0.25)


def test_non_normalized_table():
    with pytest.raises(ValueError):
        check_association_exhaustive(np.full((2, 2), 0.3))
    with pytest.raises(ValueError):
        check_association_exhaustive(np.full((2,) * 4, 1 / 16))


def test_percolation_pair_is_associated():
    law = exact_law(WetRow.origin(), Fraction(3, 5), 2)
    table = occupation_table(law, (-2, 0))
    assert table.sum() == pytest.approx(1.0)
    assert check_association_exhaustive(table) >= -1e-12


# generators ----------------------------------------------------------------------

def test_moving_average_moments():
    spec = AssociatedSequenceSpec()
    w = np.array([1 / (j + 1) for j in range(10)])
    assert spec.sigma2 == pytest.approx(w.sum() ** 2)
    total = spec.autocovariance(0) + 2 * sum(spec.autocovariance(h) for h in range(1, 10))
    assert total == pytest.approx(spec.sigma2)
    assert spec.autocovariance(10) == 0.0


def test_generator_validation():
    with pytest.raises(ValueError):
        AssociatedSequenceSpec(kind="garch")
    with pytest.raises(ValueError):
        AssociatedSequenceSpec(weights=(1.0, -0.5))
    with pytest.raises(ValueError):
        AssociatedSequenceSpec(kind="percolation").sigma2


def test_sample_determinism():
    spec = AssociatedSequenceSpec(seed=3)
    a = spec.sample(600, 50, seed=3)
    b = spec.sample(344, 50, seed=3, first_path=256)
    assert np.array_equal(a[256:], b)


@pytest.mark.parametrize("kind,driver", [("iid", "rademacher"), ("moving_average", "normal"),
                                         ("moving_average", "rademacher")])
def test_sample_covariances_nonnegative(kind, driver):
    x = AssociatedSequenceSpec(kind=kind, driver=driver).sample(4000, 15, seed=1)
    m = x.shape[0]
    c = np.cov(x, rowvar=False)
    se = np.sqrt((np.outer(np.diag(c), np.diag(c)) + c ** 2) / (m - 1))
    assert (c >= -3 * se).all()


@pytest.mark.parametrize("kind", ["iid", "moving_average"])
def test_variance_converges_to_sigma2(kind):
    spec = AssociatedSequenceSpec(kind=kind)
    var, se = fixed_index_variance(spec, 2000, n_paths=3000, seed=2)
    assert abs(var - spec.finite_variance(2000)) <= 3 * se
    assert abs(spec.finite_variance(2000) - spec.sigma2) / spec.sigma2 < 0.02


def test_random_index_positive_and_rate():
    idx = RandomIndexSpec(theta=1.5, noise="heavy")
    n = idx.draw(10000, 5000, np.random.default_rng(0))
    assert (n >= 1).all() and n.max() <= idx.max_index(10000)
    assert abs(np.median(n) / 10000 - 1.5) < 0.01
    with pytest.raises(ValueError):
        RandomIndexSpec(theta=0.0)


# maximal inequality ------------------------------------------------------------

def test_index_window():
    assert index_window(1000, 0.5) == (126, 1000, 3375)
    with pytest.raises(ValueError):
        maximal_inequality_check(AssociatedSequenceSpec(kind="iid"), 100, 0.0)
    with pytest.raises(ValueError):
        maximal_inequality_check(AssociatedSequenceSpec(kind="iid"), 100, -1.0)


def test_maximal_iid_bernoulli():
    spec = AssociatedSequenceSpec(kind="iid", driver="rademacher")
    r = maximal_inequality_check(spec, 1000, 0.5, n_paths=2000, seed=5)
    assert r.holds


def test_maximal_moving_average():
    r = maximal_inequality_check(AssociatedSequenceSpec(), 2000, 0.3, n_paths=1000, seed=6)
    assert r.holds


def test_maximal_trivial_bound():
    spec = AssociatedSequenceSpec(kind="iid")
    r = maximal_inequality_check(spec, 100, 0.05, n_paths=200)
    assert r.rhs >= 1 and r.holds


def test_maximal_bound_by_hand():
    spec = AssociatedSequenceSpec(kind="iid")
    m, tt, _ = index_window(500, 0.2)
    assert maximal_bound(spec, 500, 0.2) == pytest.approx(8 / (0.04 * tt) * (tt - m + 1))


# Anscombe condition and random index CLT --------------------------------------

def test_anscombe_identity_index():
    idx = RandomIndexSpec(noise="none")
    res = anscombe_check(AssociatedSequenceSpec(), idx, [100, 1000], n_paths=300)
    assert all(v == 0.0 for r in res for v in r.exceedance.values())


def test_anscombe_shifted_index_vanishes():
    idx = RandomIndexSpec(noise="none", shift_exponent=0.5)
    spec = AssociatedSequenceSpec(kind="iid")
    res = anscombe_check(spec, idx, [1000, 10000, 100000], eps_grid=(0.1,), n_paths=500, seed=1)
    ex = [r.exceedance[0.1] for r in res]
    assert ex[0] > ex[1] > ex[2]
    assert ex[0] > 0.3 and ex[2] < 0.2


def test_anscombe_negative_control():
    idx = RandomIndexSpec(theta=1.0, rate=2.0, noise="none")
    res = anscombe_check(AssociatedSequenceSpec(kind="iid"), idx, [1000, 10000],
                         eps_grid=(0.5,), n_paths=500)
    assert all(r.exceedance[0.5] > 0.5 for r in res)


def test_normal_summands_exactly_normal():
    spec = AssociatedSequenceSpec(kind="iid")
    by_n, by_t = random_index_clt(spec, RandomIndexSpec(noise="none"), 500, n_paths=4000)
    assert np.array_equal(by_n.values, by_t.values)
    assert ks_distance(by_n, 1.0) < 1.36 / math.sqrt(4000)


def test_random_index_clt_moving_average():
    spec = AssociatedSequenceSpec()
    by_n, by_t = random_index_clt(spec, RandomIndexSpec(), 2000, n_paths=3000, seed=4)
    assert ks_distance(by_n, spec.sigma2) < 0.04
    assert ks_distance(by_t, spec.sigma2) < 0.05


def test_two_normalizations_merge():
    spec = AssociatedSequenceSpec(kind="iid")
    idx = RandomIndexSpec(noise="bounded")
    gaps = [ks_two_sample(*random_index_clt(spec, idx, t, n_paths=2000, seed=9))
            for t in (100, 1000, 10000)]
    assert gaps[0] > gaps[2]


def test_percolation_summands_ks_decreases():
    spec = AssociatedSequenceSpec(kind="percolation", p=0.8, nu_level=150, seed=2)
    s2, _ = fixed_index_variance(spec, 400, n_paths=1000, seed=11)
    ks = [ks_distance(random_index_clt(spec, RandomIndexSpec(), t, n_paths=1000, seed=3)[0], s2)
          for t in (25, 400)]
    assert ks[1] < ks[0]
