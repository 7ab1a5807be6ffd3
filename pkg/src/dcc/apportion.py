"""Largest-remainder (Hamilton) apportionment over exact rationals."""

from __future__ import annotations

from fractions import Fraction
from math import floor
from typing import Hashable, Mapping


def quotas(weights: Mapping[Hashable, int | Fraction], total: int) -> dict:
    """Real-valued shares of ``total`` proportional to ``weights``."""
    mass = sum(weights.values())
    if mass <= 0:
        raise ValueError("weights must have positive sum")
    return {k: Fraction(total) * w / mass for k, w in weights.items()}


def largest_remainder(weights: Mapping[Hashable, int | Fraction], total: int) -> dict:
    """Split integer ``total`` proportionally to non-negative ``weights``.

    Every key gets the floor of its quota; the units left over go to the
    largest fractional remainders, ties broken by ascending key. The result
    sums to ``total`` and each share is within one unit of its quota.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if any(w < 0 for w in weights.values()):
        raise ValueError("weights must be non-negative")
    q = quotas(weights, total)
    shares = {k: floor(v) for k, v in q.items()}
    left = total - sum(shares.values())
    order = sorted(q, key=lambda k: (-(q[k] - shares[k]), k))
    for k in order[:left]:
        shares[k] += 1
    return shares
