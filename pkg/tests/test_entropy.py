from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lastmile_entropy.entropy import (
    DEFAULT_STIRLING_NS,
    DEFAULT_STIRLING_P_BARS,
    Allocation,
    EntropyProfile,
    Quadrant,
    QuadrantThresholds,
    balanced_allocation,
    classify_quadrant,
    log_factorial,
    profile,
    relative_error_pct,
    shannon_entropy,
    stirling_row,
    stirling_t1,
    stirling_t2,
    stirling_t3,
    stirling_table,
    structural_entropy,
)
from lastmile_entropy.errors import ClassificationError, DomainError

from oracles import count_microstates, exact_ln_multinomial, ln_factorial_sum

counts_strategy = st.lists(st.integers(min_value=1, max_value=40), min_size=1, max_size=30)


# --- log_factorial ------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2, 4, 10, 100, 170, 171, 500, 5000])
def test_log_factorial_matches_sum_of_logs(n):
    assert log_factorial(n) == pytest.approx(ln_factorial_sum(n), rel=1e-12, abs=1e-12)


def test_log_factorial_examples():
    assert log_factorial(0) == 0.0
    assert log_factorial(4) == pytest.approx(3.1780538, abs=1e-7)
    assert log_factorial(100) == pytest.approx(363.7394, abs=1e-4)


def test_log_factorial_real_argument_uses_gamma():
    # Gamma(2.5) = 3 sqrt(pi) / 4
    assert log_factorial(1.5) == pytest.approx(math.log(0.75 * math.sqrt(math.pi)), rel=1e-12)


@pytest.mark.parametrize("bad", [-1, -0.5, float("nan")])
def test_log_factorial_domain(bad):
    with pytest.raises(DomainError):
        log_factorial(bad)


# --- structural and Shannon entropy --------------------------------------------


def test_structural_examples():
    assert structural_entropy([1] * 100) == pytest.approx(363.74, abs=0.005)
    assert structural_entropy([50]) == 0.0
    assert structural_entropy([2, 1, 1]) == pytest.approx(math.log(12), abs=1e-12)


@pytest.mark.parametrize("counts", [(2, 1, 1), (3, 3), (1, 2, 3, 2), (4, 1), (1, 1, 1, 1, 1, 1, 1, 1)])
def test_structural_equals_log_microstate_count(counts):
    assert structural_entropy(counts) == pytest.approx(math.log(count_microstates(counts)), abs=1e-9)


@given(counts_strategy)
def test_structural_matches_exact_integer_multinomial(counts):
    assert structural_entropy(counts) == pytest.approx(exact_ln_multinomial(counts), rel=1e-10, abs=1e-9)


def test_zero_counts_are_ignored():
    assert structural_entropy([2, 0, 1, 1]) == structural_entropy([2, 1, 1])
    assert Allocation.of([2, 0, 1]).k == 2


@pytest.mark.parametrize("bad", [[], [0, 0], [-1, 2], [1.5, 2]])
def test_entropy_domain_errors(bad):
    with pytest.raises(DomainError):
        structural_entropy(bad)


def test_shannon_examples():
    assert shannon_entropy([1] * 100) == pytest.approx(math.log(100), abs=1e-12)
    assert shannon_entropy([7]) == 0.0
    expected = -(0.5 * math.log(0.5) + 2 * 0.25 * math.log(0.25))
    assert shannon_entropy([2, 1, 1]) == pytest.approx(expected, abs=1e-12)
    assert shannon_entropy([2, 1, 1]) == pytest.approx(1.0397, abs=1e-4)


@given(counts_strategy)
def test_entropy_bounds_and_invariance(counts):
    g = structural_entropy(counts)
    h = shannon_entropy(counts)
    n = sum(counts)
    assert 0.0 <= g <= log_factorial(n) + 1e-9
    assert 0.0 <= h <= math.log(len(counts)) + 1e-12
    assert structural_entropy(sorted(counts)) == pytest.approx(g, abs=1e-9)
    assert shannon_entropy(list(reversed(counts))) == pytest.approx(h, abs=1e-12)


@given(counts_strategy.filter(lambda c: len(c) >= 2))
def test_merging_two_stops_never_raises_g(counts):
    merged = [counts[0] + counts[1]] + counts[2:]
    assert structural_entropy(merged) < structural_entropy(counts) + 1e-12


@given(st.integers(min_value=1, max_value=30), st.integers(min_value=1, max_value=8))
def test_g_is_extensive_h_is_intensive(unit, k):
    small, big = [unit] * k, [2 * unit] * k
    assert shannon_entropy(small) == pytest.approx(shannon_entropy(big), abs=1e-12)
    if k > 1:
        assert structural_entropy(big) > structural_entropy(small)


# --- profile and quadrants ----------------------------------------------------


def test_profile_examples():
    p = profile([2, 1, 1])
    assert p.g_norm == pytest.approx(2.4849 / 3.1781, abs=1e-4)
    assert p.g_norm == pytest.approx(0.7819, abs=1e-4)
    assert p.h_norm == pytest.approx(0.9464, abs=1e-4)
    single = profile([50])
    assert single.g_norm == 0.0 and single.h_norm is None
    flat = profile([1] * 100)
    assert flat.g_norm == pytest.approx(1.0) and flat.h_norm == pytest.approx(1.0)
    assert profile([1]).g_norm is None


@given(counts_strategy)
def test_normalized_values_in_unit_interval(counts):
    p = profile(counts)
    for v in (p.g_norm, p.h_norm):
        assert v is None or 0.0 <= v <= 1.0


def _prof(g, h):
    return EntropyProfile(g=0.0, g_norm=g, h=0.0, h_norm=h, n=10, k=5)


@pytest.mark.parametrize(
    "g,h,expected",
    [
        (0.91, 0.96, Quadrant.HIGH_G_HIGH_H),
        (0.2, 0.9, Quadrant.LOW_G_HIGH_H),
        (0.9, 0.3, Quadrant.HIGH_G_LOW_H),
        (0.1, 0.1, Quadrant.LOW_G_LOW_H),
        (0.5, 0.5, Quadrant.HIGH_G_HIGH_H),
    ],
)
def test_quadrants(g, h, expected):
    assert classify_quadrant(_prof(g, h)) is expected


def test_quadrant_undefined_normalization():
    with pytest.raises(ClassificationError):
        classify_quadrant(_prof(0.5, None))


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_threshold_validation(bad):
    with pytest.raises(DomainError):
        QuadrantThresholds(bad, 0.5)


def test_custom_thresholds():
    assert classify_quadrant(_prof(0.6, 0.6), QuadrantThresholds(0.7, 0.7)) is Quadrant.LOW_G_LOW_H


# --- Stirling ladder ----------------------------------------------------------


def test_stirling_first_order_examples():
    a = [1] * 100
    assert stirling_t1(a) == pytest.approx(460.52, abs=0.01)
    assert relative_error_pct(stirling_t1(a), structural_entropy(a)) == pytest.approx(26.6, abs=0.05)
    assert stirling_t1([5] * 20) == pytest.approx(100 * math.log(20), abs=1e-9)
    assert stirling_t1([9]) == 0.0


def test_stirling_higher_orders():
    a = [1] * 100
    assert stirling_t2(a) == pytest.approx(371.85, abs=0.01)
    assert stirling_t3(a) == pytest.approx(363.52, abs=0.01)
    for f in (stirling_t1, stirling_t2, stirling_t3):
        assert f([12]) == pytest.approx(0.0, abs=1e-12)


def test_stirling_t2_matches_independent_expansion():
    counts = [3, 1, 4, 1, 5]
    n = sum(counts)
    h = -sum(c / n * math.log(c / n) for c in counts)
    expected = n * h + 0.5 * (math.log(2 * math.pi * n) - sum(math.log(2 * math.pi * c) for c in counts))
    assert stirling_t2(counts) == pytest.approx(expected, rel=1e-12)


@given(st.lists(st.integers(min_value=2, max_value=60), min_size=2, max_size=20))
def test_ladder_converges(counts):
    g = structural_entropy(counts)
    errs = [abs(f(counts) - g) for f in (stirling_t1, stirling_t2, stirling_t3)]
    assert errs[2] <= errs[1] <= errs[0]


def test_relative_error_zero_exact():
    assert relative_error_pct(0.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        relative_error_pct(1.0, 0.0)


def test_balanced_allocation():
    assert balanced_allocation(10, 3).counts == (4, 3, 3)
    with pytest.raises(DomainError):
        balanced_allocation(2, 3)


def test_stirling_table_shape_and_examples():
    table = stirling_table(DEFAULT_STIRLING_NS, DEFAULT_STIRLING_P_BARS)
    assert len(table) == 15
    rows = {(r.n, r.p_bar): r for r in table}
    assert rows[(100, 5.0)].g_exact == pytest.approx(267.99, abs=0.01)
    assert rows[(300, 2.0)].g_exact == pytest.approx(1310.93, abs=0.01)
    r = rows[(200, 10.0)]
    assert r.g_exact == pytest.approx(561.14, abs=0.01)
    assert "reference-mismatch:G=516.14" in r.flags
    assert rows[(200, 2.0)].err_t2 == pytest.approx(0.5, abs=0.15)
    assert abs(rows[(100, 10.0)].err_t3) < 0.01
    assert "non-divisible-layout" in rows[(100, 1.5)].flags


def test_stirling_row_domain():
    with pytest.raises(DomainError):
        stirling_row(0, 1.0)
    with pytest.raises(DomainError):
        stirling_row(10, 0.0)


@settings(max_examples=30)
@given(st.integers(min_value=2, max_value=400), st.sampled_from([1.0, 2.0, 4.0, 8.0]))
def test_stirling_row_is_exact_g_of_balanced_layout(n, p_bar):
    row = stirling_row(n, p_bar)
    assert row.g_exact == pytest.approx(exact_ln_multinomial(balanced_allocation(n, row.k).counts), rel=1e-10)
