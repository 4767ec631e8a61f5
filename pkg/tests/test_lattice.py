import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from percolab import (BondRealization, InfeasibleEnumerationError, Site, WetRow,
                      WindowViolationError, check_self_duality, enumerate_exact,
                      evolve_coupled, exact_law, size_law, step, survival)
from percolab.lattice import count_bonds, step_reference, stepper_throughput


def brute_force_law(initial, p, horizon):
    """Law of the final row by looping over explicit bond tables.

    Shares nothing with the vectorized enumerator beyond the set-based step.
    """
    bonds = []
    row_sites = set(initial.sites)
    for s in range(horizon):
        n = initial.level + s
        for y in sorted(row_sites):
            bonds.append((y, n, "left"))
            bonds.append((y, n, "right"))
        row_sites = {y + d for y in row_sites for d in (-1, 1)}
    span = initial.level + horizon + max(abs(y) for y in initial.sites) + 2
    law = {}
    for states in itertools.product((False, True), repeat=len(bonds)):
        opened = [b for b, s in zip(bonds, states) if s]
        real = BondRealization.from_open_bonds(opened, -span, span, initial.level + horizon)
        row = initial
        for _ in range(horizon):
            row = step_reference(row, real)
        k = len(opened)
        w = p ** k * (1 - p) ** (len(bonds) - k)
        law[row] = law.get(row, 0) + w
    return law


# types ----------------------------------------------------------------------

def test_site_parity():
    Site(1, 1)
    with pytest.raises(ValueError):
        Site(1, 2)
    with pytest.raises(ValueError):
        Site(0, -2)


def test_wetrow_parity_and_diameter():
    with pytest.raises(ValueError):
        WetRow(0, {1})
    row = WetRow(1, {-3, 1, 5})
    assert row.diameter() == 8
    assert WetRow(2).diameter() is None
    assert WetRow.even_range(-3, 3, 0).sites == frozenset({-2, 0, 2})
    assert WetRow.even_range(-3, 3, 1).sites == frozenset({-3, -1, 1, 3})


# step -----------------------------------------------------------------------

def test_step_all_open():
    real = BondRealization.from_open_bonds([(0, 0, "left"), (0, 0, "right")], -4, 4, 4)
    assert step(WetRow.origin(), real).sites == frozenset({-1, 1})


def test_step_all_closed():
    real = BondRealization.from_open_bonds([], -4, 4, 4)
    assert not step(WetRow.origin(), real)


def test_step_merging_bonds():
    real = BondRealization.from_open_bonds([(-1, 1, "right"), (1, 1, "left")], -4, 4, 4)
    assert step(WetRow(1, {-1, 1}), real) == WetRow(2, {0})


def test_step_window_violation():
    real = BondRealization(0.5, -2, 2, 3)
    with pytest.raises(WindowViolationError):
        step(WetRow(0, {4}), real)
    with pytest.raises(WindowViolationError):
        step(WetRow(3, {1}), real)


def test_step_p_extremes():
    full = BondRealization(1.0, -10, 10, 10)
    empty = BondRealization(0.0, -10, 10, 10)
    row = WetRow(0, {-2, 0, 4})
    assert step(row, full).sites == frozenset({-3, -1, 1, 3, 5})
    assert not step(row, empty)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), trial=st.integers(0, 1000),
       p=st.floats(0.05, 0.95), level=st.integers(0, 20),
       sites=st.sets(st.integers(-60, 60), min_size=1, max_size=40))
def test_bit_stepper_matches_set_stepper(seed, trial, p, level, sites):
    sites = {y for y in sites if (y + level) % 2 == 0} or {level % 2}
    real = BondRealization(p, -70, 70, level + 5, seed=seed, trial=trial)
    row = WetRow(level, sites)
    assert step(row, real) == step_reference(row, real)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.floats(0.0, 1.0),
       sites=st.sets(st.integers(-30, 30), max_size=30))
def test_step_preserves_parity(seed, p, sites):
    row = WetRow(0, {y for y in sites if y % 2 == 0})
    real = BondRealization(p, -40, 40, 10, seed=seed)
    out = step(row, real)
    assert out.level == 1
    assert all(y % 2 == 1 for y in out.sites)


def test_bond_determinism():
    a = BondRealization(0.5, -50, 50, 50, seed=7, trial=3)
    b = BondRealization(0.5, -80, 80, 80, seed=7, trial=3)
    keys = [(y, n, d) for n in range(10) for y in range(-n, n + 1, 2) for d in ("left", "right")]
    assert [a.is_open(*k) for k in keys] == [b.is_open(*k) for k in keys]
    c = BondRealization(0.5, -50, 50, 50, seed=7, trial=4)
    assert [a.is_open(*k) for k in keys] != [c.is_open(*k) for k in keys]


# coupled evolution ------------------------------------------------------------

def test_evolve_coupled_all_open():
    real = BondRealization(1.0, -10, 10, 10)
    (path,) = evolve_coupled([WetRow.origin()], real, 3)
    assert path[3].sites == frozenset({-3, -1, 1, 3})
    assert [len(r) for r in path] == [1, 2, 3, 4]


def test_evolve_coupled_empty_initials():
    with pytest.raises(ValueError):
        evolve_coupled([], BondRealization(0.5, -5, 5, 5), 2)


def test_evolve_coupled_mixed_levels():
    with pytest.raises(ValueError):
        evolve_coupled([WetRow(0, {0}), WetRow(1, {1})], BondRealization(0.5, -5, 5, 5), 2)


def test_half_lines_sandwich_origin():
    w = 60
    real = BondRealization(0.5, -w, w, 30, seed=11)
    o, minus, plus, full = evolve_coupled(
        [WetRow.origin(), WetRow.even_range(-w, 0), WetRow.even_range(0, w),
         WetRow.even_range(-w, w)], real, 30)
    for n in range(31):
        assert o[n] <= minus[n] <= full[n]
        assert o[n] <= plus[n] <= full[n]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.floats(0.0, 1.0),
       small=st.sets(st.integers(-10, 10), max_size=8),
       extra=st.sets(st.integers(-10, 10), max_size=8))
def test_monotone_in_initial_set(seed, p, small, extra):
    a = {y for y in small if y % 2 == 0}
    b = a | {y for y in extra if y % 2 == 0}
    real = BondRealization(p, -40, 40, 20, seed=seed)
    pa, pb = evolve_coupled([WetRow(0, a), WetRow(0, b)], real, 20)
    assert all(x <= y for x, y in zip(pa, pb))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.floats(0.0, 1.0), dp=st.floats(0.0, 0.5))
def test_monotone_in_p(seed, p, dp):
    q = min(1.0, p + dp)
    lo = BondRealization(p, -30, 30, 25, seed=seed)
    hi = BondRealization(q, -30, 30, 25, seed=seed)
    (a,) = evolve_coupled([WetRow.even_range(-20, 20)], lo, 25)
    (b,) = evolve_coupled([WetRow.even_range(-20, 20)], hi, 25)
    assert all(x.sites <= y.sites for x, y in zip(a, b))


# exact oracle ------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.3, 0.5, 0.8])
def test_survival_one_step(p):
    assert enumerate_exact(WetRow.origin(), p, 1, survival) == pytest.approx(2 * p - p * p)


def test_survival_one_step_exact_fraction():
    assert enumerate_exact(WetRow.origin(), Fraction(1, 2), 1, survival) == Fraction(3, 4)


def test_size_law_one_step():
    p = Fraction(2, 5)
    assert size_law(WetRow.origin(), p, 1) == {0: (1 - p) ** 2, 1: 2 * p * (1 - p), 2: p * p}


@pytest.mark.parametrize("h", [0, 1, 2, 3])
def test_full_wetting_survives(h):
    assert enumerate_exact(WetRow.origin(), 1.0, h, survival) == 1.0


def test_enumeration_cap():
    assert count_bonds(WetRow.origin(), 4) == 20
    with pytest.raises(InfeasibleEnumerationError):
        enumerate_exact(WetRow.origin(), 0.5, 5, survival)


@pytest.mark.parametrize("h", [1, 2, 3])
@pytest.mark.parametrize("p", [Fraction(1, 3), Fraction(4, 5)])
def test_enumeration_matches_brute_force(h, p):
    fast = exact_law(WetRow.origin(), p, h)
    slow = brute_force_law(WetRow.origin(), p, h)
    assert {r: v for r, v in fast.items() if v} == {r: v for r, v in slow.items() if v}


def test_enumeration_two_sites_matches_brute_force():
    init = WetRow(0, {-2, 2})
    p = Fraction(3, 5)
    assert exact_law(init, p, 2) == {r: v for r, v in brute_force_law(init, p, 2).items()}


@pytest.mark.parametrize("h", [1, 2, 3, 4])
def test_law_normalized(h):
    assert sum(exact_law(WetRow.origin(), Fraction(1, 7), h).values()) == 1


# self-duality -------------------------------------------------------------------

def test_duality_identical_sets():
    f, d = check_self_duality(WetRow.origin(), {1, -1}, 0.37, 1)
    assert f == pytest.approx(d)
    f, d = check_self_duality(WetRow.origin(), {0}, Fraction(1, 3), 2)
    assert f == d


def test_duality_three_site_target():
    f, d = check_self_duality(WetRow.origin(), {-2, 0, 2}, Fraction(3, 5), 2)
    assert f == d
    assert 0 < f < 1


def test_duality_closed_bonds():
    assert check_self_duality(WetRow(0, {0, 2}), {5}, 0.0, 1) == (0, 0)


@settings(max_examples=15, deadline=None)
@given(a=st.sets(st.sampled_from([-2, 0, 2]), min_size=1),
       b=st.sets(st.sampled_from([-2, 0, 2]), min_size=1),
       num=st.integers(0, 10))
def test_duality_property(a, b, num):
    f, d = check_self_duality(WetRow(0, a), b, Fraction(num, 10), 2)
    assert f == d


def test_throughput_positive():
    assert stepper_throughput(width=256, levels=2000) > 0
