"""Two-parameter Mittag-Leffler function E_{a,b}(z) for real z <= 0 (plus a small
positive slack), tuned for the argument range produced by Laplacian eigenvalues.

Evaluation uses three regimes, selected per argument:

* power series with careful accumulation near the origin,
* numerical inversion of the Laplace transform on a parabolic contour in the
  midrange (the transform of t^{b-1} E_{a,b}(z t^a) is s^{a-b} / (s^a - z)),
* the inverse-power expansion -sum_{k>=1} z^{-k} / Gamma(b - a k) far out on
  the negative axis.

The seams between regimes are module constants; `seam_agreement` measures the
mutual error of adjacent regimes at a seam so tests can pin them down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rgamma

__all__ = [
    "MLQuery",
    "MLConvergenceError",
    "mittag_leffler",
    "ml_array",
    "ml_kernel",
    "ml_kernel_array",
    "seam_agreement",
]

# |z| <= SERIES_SEAM**alpha goes to the power series.  The cap keeps the
# alternating-sum cancellation below ~1e4, which double precision terms afford.
SERIES_SEAM = 5.0
# z <= ASYMPTOTIC_CUT goes to the inverse-power expansion.
ASYMPTOTIC_CUT = -50.0
# Parabolic contour parameters: s(theta) = MU*(1+i*theta)^2, |theta| <= SPAN,
# trapezoid with NODES+1 points on the half-line (conjugate symmetry).
CONTOUR_MU = 8.0
CONTOUR_SPAN = 2.3
CONTOUR_NODES = 64

_SERIES_KMAX = 320
_ASYM_TERMS = 60


class MLConvergenceError(RuntimeError):
    """Internal convergence criterion failed; indicates a bug, not bad input."""


@dataclass(frozen=True)
class MLQuery:
    """Arguments of one Mittag-Leffler evaluation.

    alpha must lie in (0, 1], beta must be positive, and z must be finite and
    not exceed z_max (a small positive slack absorbing roundoff in callers
    that compute z = lambda * t**alpha).
    """

    alpha: float
    beta: float
    z: float
    z_max: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not math.isfinite(self.z):
            raise ValueError(f"z must be finite, got {self.z}")
        if self.z > self.z_max:
            raise ValueError(f"z={self.z} exceeds z_max={self.z_max}")


def _series(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    """Power series sum_k z^k / Gamma(alpha k + beta) on the series regime."""
    acc = np.full(z.shape, rgamma(beta), dtype=float)
    term = np.ones_like(z)
    for k in range(1, _SERIES_KMAX):
        term = term * z
        c = rgamma(alpha * k + beta)
        acc += term * c
        if k > 4 and np.all(np.abs(term) * abs(c) <= 1e-18 * (np.abs(acc) + 1e-300)):
            return acc
    raise MLConvergenceError(
        f"power series did not converge within {_SERIES_KMAX} terms "
        f"(alpha={alpha}, beta={beta})"
    )


def _contour(
    alpha: float,
    beta: float,
    z: np.ndarray,
    nodes: int = CONTOUR_NODES,
) -> np.ndarray:
    """Trapezoid rule for (1/2 pi i) int e^s s^(a-b) / (s^a - z) ds on the
    parabola s = mu (1 + i theta)^2, valid for real z < 0 and any beta > 0."""
    h = CONTOUR_SPAN / nodes
    theta = h * np.arange(nodes + 1)
    s = CONTOUR_MU * (1.0 + 1j * theta) ** 2
    pref = np.exp(s) * s ** (alpha - beta) * (1.0 + 1j * theta)
    pref[0] *= 0.5
    sa = s**alpha
    out = np.zeros(z.shape, dtype=float)
    # node loop keeps temporaries one z-array wide
    for pk, sk in zip(pref, sa):
        dr = sk.real - z
        di = sk.imag
        out += (pk.real * dr + pk.imag * di) / (dr * dr + di * di)
    return (2.0 * CONTOUR_MU * h / np.pi) * out


def _asymptotic(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    """Inverse-power expansion for z <= ASYMPTOTIC_CUT.

    A fixed term count is used: at |z| >= 50 the envelope of the terms decays
    far below double precision before any divergent growth matters, and the
    near-pole dips of 1/Gamma(beta - alpha k) make adaptive stopping rules
    unreliable.
    """
    zinv = 1.0 / z
    term = -zinv.copy()
    out = np.zeros_like(z)
    for k in range(1, _ASYM_TERMS + 1):
        out += term * rgamma(beta - alpha * k)
        term = term * zinv
    return out


def ml_array(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    """Vectorized E_{alpha,beta} over a real array with z <= small slack.

    Performs no argument validation beyond finiteness of the output; the
    scalar wrapper owns the user-facing contract.
    """
    z = np.asarray(z, dtype=float)
    if alpha == 1.0 and beta == 1.0:
        return np.exp(z)
    out = np.empty_like(z)
    series_radius = SERIES_SEAM**alpha
    m_series = np.abs(z) <= series_radius
    m_asym = z <= ASYMPTOTIC_CUT
    m_mid = ~(m_series | m_asym)
    if m_series.any():
        out[m_series] = _series(alpha, beta, z[m_series])
    if m_mid.any():
        out[m_mid] = _contour(alpha, beta, z[m_mid])
    if m_asym.any():
        out[m_asym] = _asymptotic(alpha, beta, z[m_asym])
    return out


def mittag_leffler(alpha: float, beta: float, z: float, z_max: float = 1.0) -> float:
    """E_{alpha,beta}(z) for real z <= z_max, alpha in (0,1], beta > 0.

    Relative accuracy is ~1e-10 or better over z in [-1e6, z_max].  In the
    contour regime the value is recomputed with 1.5x the node count and the
    two results must agree; disagreement raises MLConvergenceError.
    """
    q = MLQuery(alpha, beta, z, z_max)
    zz = np.array([q.z])
    if alpha == 1.0 and beta == 1.0:
        return float(np.exp(zz)[0])
    if abs(q.z) <= SERIES_SEAM**alpha or q.z <= ASYMPTOTIC_CUT:
        return float(ml_array(alpha, beta, zz)[0])
    coarse = float(_contour(alpha, beta, zz, nodes=CONTOUR_NODES)[0])
    fine = float(_contour(alpha, beta, zz, nodes=(3 * CONTOUR_NODES) // 2)[0])
    scale = max(abs(coarse), abs(fine), 1e-300)
    if abs(coarse - fine) > 1e-9 * scale:
        raise MLConvergenceError(
            f"contour quadrature failed to converge at alpha={alpha}, "
            f"beta={beta}, z={z}: {coarse} vs {fine}"
        )
    return fine


def ml_kernel(alpha: float, lam: float, t: float) -> float:
    """Scalar kernel t^(alpha-1) E_{alpha,alpha}(lam t^alpha) for lam <= 0.

    Singular at t = 0 when alpha < 1; callers integrate it, never evaluate at 0.
    """
    if not t > 0.0:
        raise ValueError(f"kernel requires t > 0, got {t}")
    if lam > 0.0:
        raise ValueError(f"kernel requires an eigenvalue <= 0, got {lam}")
    return float(t ** (alpha - 1.0) * mittag_leffler(alpha, alpha, lam * t**alpha))


def ml_kernel_array(alpha: float, lam: np.ndarray, t: float) -> np.ndarray:
    """Vectorized kernel over an array of eigenvalues at a single time t > 0."""
    if not t > 0.0:
        raise ValueError(f"kernel requires t > 0, got {t}")
    lam = np.asarray(lam, dtype=float)
    return t ** (alpha - 1.0) * ml_array(alpha, alpha, lam * t**alpha)


def seam_agreement(alpha: float, beta: float) -> tuple[float, float]:
    """Max mutual relative disagreement of adjacent regimes at the two seams.

    Returns (series_vs_contour, contour_vs_asymptotic).  Used by tests to
    validate the regime boundaries.
    """
    r = SERIES_SEAM**alpha
    z1 = -np.linspace(0.7 * r, min(r, 0.999 * abs(ASYMPTOTIC_CUT)), 7)
    a1 = _series(alpha, beta, z1)
    b1 = _contour(alpha, beta, z1)
    d1 = float(np.max(np.abs(a1 - b1) / np.maximum(np.abs(a1), 1e-300)))
    z2 = np.linspace(ASYMPTOTIC_CUT * 1.3, ASYMPTOTIC_CUT, 7)
    a2 = _contour(alpha, beta, z2)
    b2 = _asymptotic(alpha, beta, z2)
    d2 = float(np.max(np.abs(a2 - b2) / np.maximum(np.abs(a2), 1e-300)))
    return d1, d2
