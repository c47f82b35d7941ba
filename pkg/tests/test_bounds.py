import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from vadp.bounds import (INT64_MAX, bin_bound_full, bin_bound_simplified, bits_per_action,
                         bound_row, esa_bound, simplified_applies, vadp_bound, vadp_bound_relaxed)


def test_esa():
    assert esa_bound(0.1, 0.5, 2) == 6400
    assert esa_bound(0.1, 0.5, 4) == 40_960_000
    assert esa_bound(2, 0, 1) == 1
    assert esa_bound(0.01, 0.99, 16) == math.inf


def test_vadp():
    assert vadp_bound(0.1, 0.5, 2) == 400
    assert vadp_bound(0.1, 0.5, 4) == 3200
    assert vadp_bound(0.1, 0.5, 1) == 100
    assert vadp_bound(0.05, 0.5, 2) == 800
    assert vadp_bound(1e-9, 0.999, 60) == math.inf


def test_bin_full():
    assert bin_bound_full(0.1, 0.5, 4) == 20000
    assert bin_bound_full(0.1, 0.5, 2) == 4320
    assert bin_bound_full(0.01, 0.99, 16) == 1_042_120_420
    assert bin_bound_full(0.01, 0.99, 16) == math.floor(
        16 * Fraction("4.01") ** 3 / (Fraction("0.99") * Fraction("0.01") * Fraction("0.0001")))
    with pytest.raises(ValueError):
        bin_bound_full(0.1, 0.0, 4)
    with pytest.raises(ValueError):
        bin_bound_full(0.1, 0.5, 1)


def test_bin_simplified():
    assert bin_bound_simplified(0.01, 0.99, 16) == 1_088_000_000
    assert bin_bound_simplified(0.01, 0.99, 16) >= bin_bound_full(0.01, 0.99, 16)
    assert bin_bound_simplified(0.1, 0.5, 16) is None
    assert bin_bound_simplified(0.5, 0.99, 2) == 17 * 2 * 10**4
    assert bin_bound_simplified(0.1, 0.95, 2**20) is not None
    assert bin_bound_simplified(0.1, 0.95, 2**7) is None  # default threshold d >= 17


def test_parameter_ranges():
    for args in ((0, 0.5, 2), (0.1, 1.0, 2), (0.1, -0.1, 2), (0.1, 0.5, 0), (0.1, 0.5, 1.5)):
        with pytest.raises(ValueError):
            vadp_bound(*args)
        with pytest.raises(ValueError):
            esa_bound(*args)


def test_bits_and_row():
    assert [bits_per_action(a) for a in (1, 2, 3, 4, 5, 16, 17)] == [0, 1, 2, 2, 3, 4, 5]
    assert bound_row(0.1, 0.5, 4) == {"esa": 40_960_000, "vadp": 3200, "bin_full": 20000,
                                      "bin_simplified": None}
    assert bound_row(0.1, 0.5, 1) == {"esa": 80, "vadp": 100, "bin_full": None, "bin_simplified": None}
    assert bound_row(0.01, 0.99, 16)["bin_simplified"] == 1_088_000_000
    assert bound_row(0.1, 0.0, 2)["bin_full"] is None


eps_s = st.sampled_from([0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0])
gam_s = st.sampled_from([0.0, 0.1, 0.5, 0.9, 0.95, 0.97, 0.99, 0.999])


@given(eps_s, gam_s, st.integers(1, 12))
def test_vadp_bound_below_relaxation(eps, gamma, A):
    b = vadp_bound(eps, gamma, A)
    if b != math.inf:
        assert b <= vadp_bound_relaxed(eps, gamma, A)
        assert b <= INT64_MAX


@given(eps_s, gam_s, st.integers(1, 40))
def test_full_below_simplified_when_guard_holds(eps, gamma, bits):
    A = 2 ** bits
    if gamma > 0 and simplified_applies(gamma, A):
        assert bin_bound_full(eps, gamma, A) <= bin_bound_simplified(eps, gamma, A)


def test_default_large_bits_is_smallest_valid_at_095():
    # at gamma = 0.95 the simplified expression dominates the full one from d = 17 on
    full = lambda d: 16 * (d + 1 - Fraction("0.95")) ** 3 / Fraction("0.95")
    assert full(16) > 17 * 16**3 and full(17) <= 17 * 17**3
    assert all(full(d) <= 17 * d**3 for d in range(17, 64))
