"""Shared high-precision oracles for the test suite.

The Mittag-Leffler reference keeps the gamma argument in exact mpmath
arithmetic: evaluating Gamma at a double-rounded argument loses enough
relative accuracy to corrupt the huge alternating partial sums.
"""

from __future__ import annotations

import mpmath as mp
import pytest


def ml_reference(alpha: str | float, beta: float, z: float) -> float:
    """E_{alpha,beta}(z) by exact-arithmetic power series (use for |z| <~ 60)."""
    a = mp.mpf(str(alpha))
    b = mp.mpf(str(beta))
    zz = mp.mpf(z)
    peak = float(abs(zz)) ** float(1 / a) if zz != 0 else 0.0
    dps = 60 + int(0.55 * peak)
    with mp.workdps(dps):
        s = mp.mpf(0)
        k = 0
        while True:
            s += zz**k / mp.gamma(a * k + b)
            k += 1
            if k > 8 + 2 * peak and abs(zz) ** k / mp.gamma(a * k + b) < mp.mpf(10) ** (
                -dps + 8
            ):
                break
        return float(s)


def ml_reference_asymptotic(alpha: float, beta: float, z: float) -> float:
    """E_{alpha,beta}(z) by the inverse-power expansion, truncated at the
    smallest term (use for z <= -40)."""
    a, b, zz = mp.mpf(str(alpha)), mp.mpf(str(beta)), mp.mpf(z)
    s = mp.mpf(0)
    prev = mp.inf
    for k in range(1, 400):
        t = -(zz ** (-k)) * mp.rgamma(b - a * k)
        m = abs(t)
        if m > prev and m > 0:
            break
        s += t
        if m > 0:
            prev = m
    return float(s)


@pytest.fixture(scope="session")
def ml_ref():
    return ml_reference
