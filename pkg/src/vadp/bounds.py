"""Closed-form upper bounds on surrogate state counts.

Inputs are converted through their decimal representation to exact
rationals, so hand-derived values such as ``vadp_bound(0.1, 0.5, 2) == 400``
come out exactly instead of one below after floating-point flooring.
Results that do not fit a signed 64-bit integer are reported as
``math.inf``.
"""

from __future__ import annotations

import math
from fractions import Fraction

INT64_MAX = 2**63 - 1
DEFAULT_LARGE_BITS = 17


def _q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def _check(eps, gamma, n_actions, gamma_positive=False, min_actions=1):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    lo_ok = gamma > 0 if gamma_positive else gamma >= 0
    if not (lo_ok and gamma < 1):
        raise ValueError(f"gamma out of range: {gamma}")
    if int(n_actions) != n_actions or n_actions < min_actions:
        raise ValueError(f"need at least {min_actions} actions, got {n_actions}")


def _capped(value: int):
    return math.inf if value > INT64_MAX else value


def bits_per_action(n_actions: int) -> int:
    """``ceil(log2 A)`` computed on integers."""
    return (int(n_actions) - 1).bit_length()


def esa_bound(eps, gamma, n_actions):
    """``floor((2 / (eps (1 - gamma)^2))^A)``."""
    _check(eps, gamma, n_actions)
    base = 2 / (_q(eps) * (1 - _q(gamma)) ** 2)
    if n_actions * math.log2(base) > 64:
        return math.inf
    return _capped(math.floor(base ** int(n_actions)))


def vadp_bound(eps, gamma, n_actions):
    """``floor((1 + 3 gamma) / (eps (1 - gamma)^2)) * A * 2^(A - 1)``."""
    _check(eps, gamma, n_actions)
    g = _q(gamma)
    bins = math.floor((1 + 3 * g) / (_q(eps) * (1 - g) ** 2))
    return _capped(bins * int(n_actions) * 2 ** (int(n_actions) - 1))


def vadp_bound_relaxed(eps, gamma, n_actions) -> Fraction:
    """``4 A 2^(A - 1) / (eps (1 - gamma)^2)``, the gamma-free relaxation."""
    _check(eps, gamma, n_actions)
    return 4 * int(n_actions) * 2 ** (int(n_actions) - 1) / (_q(eps) * (1 - _q(gamma)) ** 2)


def bin_bound_full(eps, gamma, n_actions):
    """``floor(16 (ceil(log2 A) + 1 - gamma)^3 / (gamma eps (1 - gamma)^2))``."""
    _check(eps, gamma, n_actions, gamma_positive=True, min_actions=2)
    g, d = _q(gamma), bits_per_action(n_actions)
    return _capped(math.floor(16 * (d + 1 - g) ** 3 / (g * _q(eps) * (1 - g) ** 2)))


def simplified_applies(gamma, n_actions, large_bits: int = DEFAULT_LARGE_BITS) -> bool:
    """Guard of the simplified binarized bound.

    ``gamma >= 0.99`` always suffices. ``gamma >= 0.95`` suffices once
    ``ceil(log2 A) >= large_bits``; the default 17 is the smallest bit count
    for which the simplified bound still dominates the full one at
    ``gamma = 0.95``.
    """
    if n_actions < 2:
        return False
    g = _q(gamma)
    if g >= Fraction(99, 100):
        return True
    return g >= Fraction(95, 100) and bits_per_action(n_actions) >= large_bits


def bin_bound_simplified(eps, gamma, n_actions, large_bits: int = DEFAULT_LARGE_BITS):
    """``floor(17 ceil(log2 A)^3 / (eps (1 - gamma)^2))`` or ``None`` when inapplicable."""
    if not simplified_applies(gamma, n_actions, large_bits):
        return None
    _check(eps, gamma, n_actions, gamma_positive=True, min_actions=2)
    d = bits_per_action(n_actions)
    return _capped(math.floor(17 * d**3 / (_q(eps) * (1 - _q(gamma)) ** 2)))


def bound_row(eps, gamma, n_actions) -> dict:
    """All four bounds; ``None`` marks a bound that does not apply."""
    _check(eps, gamma, n_actions)
    full = bin_bound_full(eps, gamma, n_actions) if n_actions >= 2 and gamma > 0 else None
    simple = bin_bound_simplified(eps, gamma, n_actions) if n_actions >= 2 else None
    return {
        "esa": esa_bound(eps, gamma, n_actions),
        "vadp": vadp_bound(eps, gamma, n_actions),
        "bin_full": full,
        "bin_simplified": simple,
    }
