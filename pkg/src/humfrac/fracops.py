"""Fractional solution operators in spectral coordinates.

Per eigenmode with eigenvalue lam, the forward propagator acts by
t^(alpha-1) E_{alpha,alpha}(lam t^alpha), the adjoint propagator by
E_{alpha,1}(lam (T-t)^alpha), and the minimum-norm control synthesized from an
adjoint datum phi0 is

    u(t) = sum_n a_n b_n (T-t)^(alpha-1) E_{alpha,alpha}(lam_n (T-t)^alpha),

where b is the actuator coefficient vector.  The controllability Gram matrix
couples these:  G_{mn} = b_m b_n int_0^T s^(2a-2) E_a(lam_m s^a) E_a(lam_n s^a) ds
(writing E_a for E_{alpha,alpha}), which is integrable exactly when alpha > 1/2.

Quadrature convention: all weakly singular time integrals are computed after
the substitution sigma = s^alpha, under which every Mittag-Leffler factor is
analytic and the weight becomes sigma^(1 - 1/alpha), handled by Gauss-Jacobi
rules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma
from scipy.special import roots_jacobi

from .mlf import ml_array, ml_kernel_array, mittag_leffler
from .spectral import ModeIndex, SpectralField, eigenvalues_array

__all__ = [
    "FracParams",
    "ControlSignal",
    "GramMatrix",
    "gauss_jacobi_left",
    "propagate_free",
    "adjoint_state",
    "hum_control_value",
    "control_mesh",
    "sample_control",
    "controlled_state",
    "ControlQuadrature",
    "gram_matrix",
    "riesz_check_identity",
]

STRICT_ALPHA_MIN = 2.0 / 3.0


@dataclass(frozen=True)
class FracParams:
    """Fractional order and horizon.

    The solver is defined for alpha in (1/2, 1] (integrability of the control
    energy); strict mode narrows this to (2/3, 1], the range for which the
    semilinear well-posedness analysis holds.  Outside strict range a warning
    is emitted unless strict=True, in which case validation fails.
    """

    alpha: float
    T: float
    strict: bool = False

    def __post_init__(self) -> None:
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValueError(f"T must be positive and finite, got {self.T}")
        if not (0.5 < self.alpha <= 1.0):
            raise ValueError(
                f"alpha must lie in (1/2, 1] (control energy integrable), got {self.alpha}"
            )
        if self.alpha <= STRICT_ALPHA_MIN:
            if self.strict:
                raise ValueError(
                    f"strict mode requires alpha in (2/3, 1], got {self.alpha}"
                )
            warnings.warn(
                f"alpha={self.alpha} is outside (2/3, 1]; semilinear estimates "
                "are not guaranteed",
                stacklevel=2,
            )

    @property
    def h1_satisfied(self) -> bool:
        return self.alpha > STRICT_ALPHA_MIN


@dataclass(frozen=True)
class ControlSignal:
    """Scalar control samples on a strictly increasing mesh in [0, T).

    singularity_exponent documents the known (T-t)^(alpha-1) endpoint
    behavior; quadratures may use it to extrapolate toward T.
    """

    times: np.ndarray
    values: np.ndarray
    T: float
    singularity_exponent: float

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1D arrays of equal length")
        if t.size < 2 or np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing with >= 2 nodes")
        if t[0] < 0.0 or t[-1] >= self.T:
            raise ValueError(f"times must lie in [0, T); got range [{t[0]}, {t[-1]}]")
        if not np.all(np.isfinite(v)):
            raise ValueError("control values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class GramMatrix:
    """Controllability Gram matrix with its spectrum diagnostics."""

    entries: np.ndarray
    min_eigenvalue: float
    zero_modes: list[ModeIndex]
    order: int


def gauss_jacobi_left(n: int, exponent: float, upper: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for int_0^upper sigma^exponent f(sigma) dsigma, exponent > -1."""
    if exponent <= -1.0:
        raise ValueError(f"weight exponent must exceed -1, got {exponent}")
    x, w = roots_jacobi(n, 0.0, exponent)
    half = 0.5 * upper
    return half * (x + 1.0), w * half ** (exponent + 1.0)


def _sigma_quadrature(p: FracParams, n: int, upper_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for int_0^upper_s s^(2a-2) f(s^a) ds in the sigma variable.

    Returns sigma nodes on [0, upper_s^alpha] and weights including the 1/alpha
    Jacobian, so the integral is sum w_q f(sigma_q).
    """
    a = p.alpha
    nodes, w = gauss_jacobi_left(n, 1.0 - 1.0 / a, upper_s**a)
    return nodes, w / a


def propagate_free(y0: SpectralField, p: FracParams, t: float) -> SpectralField:
    """Free evolution of the weighted-initial-datum problem at time t > 0.

    Mode n is scaled by t^(alpha-1) E_{alpha,alpha}(lam_n t^alpha); the state
    is singular at t = 0 for alpha < 1, so t must be positive.
    """
    if not 0.0 < t <= p.T:
        raise ValueError(f"t must lie in (0, T], got {t}")
    lam = eigenvalues_array(y0.order)
    lam_u, inv = np.unique(lam, return_inverse=True)
    scale = ml_kernel_array(p.alpha, lam_u, t)[inv]
    return SpectralField(y0.order, y0.coeffs * scale)


def adjoint_state(phi0: SpectralField, p: FracParams, t: float) -> SpectralField:
    """Backward (adjoint) state at time t in [0, T]: mode n scaled by
    E_{alpha,1}(lam_n (T-t)^alpha); the identity at t = T."""
    if not 0.0 <= t <= p.T:
        raise ValueError(f"t must lie in [0, T], got {t}")
    if t == p.T:
        return phi0
    lam = eigenvalues_array(phi0.order)
    lam_u, inv = np.unique(lam, return_inverse=True)
    scale = ml_array(p.alpha, 1.0, lam_u * (p.T - t) ** p.alpha)[inv]
    return SpectralField(phi0.order, phi0.coeffs * scale)


def _grouped_control_coeffs(
    phi0: SpectralField, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(unique eigenvalues, sum of a_n b_n per eigenvalue) for control synthesis."""
    lam = eigenvalues_array(phi0.order)
    lam_u, inv = np.unique(lam, return_inverse=True)
    coeff = np.zeros_like(lam_u)
    np.add.at(coeff, inv, phi0.coeffs * np.asarray(b, dtype=float))
    return lam_u, coeff


def hum_control_value(
    phi0: SpectralField, b: np.ndarray, p: FracParams, t: float
) -> float:
    """Minimum-norm control at a single time t < T."""
    if not t < p.T:
        raise ValueError(f"control is defined for t < T, got t={t}")
    s = p.T - t
    lam_u, coeff = _grouped_control_coeffs(phi0, b)
    kern = s ** (p.alpha - 1.0) * ml_array(p.alpha, p.alpha, lam_u * s**p.alpha)
    return float(coeff @ kern)


def control_mesh(p: FracParams, n: int, grading: float = 4.0) -> np.ndarray:
    """n+1 nodes on [0, T), clustered at T: t_j = T (1 - ((n+1-j)/(n+1))^r).

    The (T - t)^(alpha-1) control singularity sits at T; grading keeps the
    interpolation error of the sampled control uniform.
    """
    if n < 4:
        raise ValueError(f"control mesh needs at least 4 intervals, got {n}")
    if grading < 1.0:
        raise ValueError(f"grading exponent must be >= 1, got {grading}")
    j = np.arange(n + 1)
    return p.T * (1.0 - ((n + 1.0 - j) / (n + 1.0)) ** grading)


def sample_control(
    phi0: SpectralField, b: np.ndarray, p: FracParams, mesh: np.ndarray
) -> ControlSignal:
    """Tabulate the minimum-norm control on a mesh contained in [0, T)."""
    mesh = np.asarray(mesh, dtype=float)
    if mesh.size and mesh.max() >= p.T:
        raise ValueError("control mesh must not touch T (control is singular there)")
    s = p.T - mesh
    lam_u, coeff = _grouped_control_coeffs(phi0, b)
    ek = ml_array(p.alpha, p.alpha, np.outer(lam_u, s**p.alpha).ravel())
    ek = ek.reshape(lam_u.size, s.size)
    values = s ** (p.alpha - 1.0) * (coeff @ ek)
    return ControlSignal(mesh, values, p.T, p.alpha - 1.0)


# ---------------------------------------------------------------------------
# Product integration of int_0^t (t-tau)^(a-1) E_a(lam (t-tau)^a) u(tau) dtau
# against a piecewise-cubic interpolant of the sampled control.
#
# Kernel moments are exact: with A_q(x) = x^(a+q) E_{a,a+1+q}(lam x^a) one has
# A_q' = A_{q-1} and A_0' = kernel, so int s^m K(s) ds follows by parts.
# ---------------------------------------------------------------------------


def _stencil_coefficients(times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cubic Lagrange coefficients per interval in the local variable
    zeta = tau - times[j].

    Returns (stencils, coeffs): stencils[j] holds 4 node indices, coeffs[j, l, p]
    the zeta^p coefficient of the l-th Lagrange basis polynomial.
    """
    m = times.size - 1
    if m < 3:
        raise ValueError("need at least 4 control samples for cubic interpolation")
    stencils = np.empty((m, 4), dtype=int)
    coeffs = np.empty((m, 4, 4))
    for j in range(m):
        lo = min(max(j - 1, 0), m - 3)
        idx = np.arange(lo, lo + 4)
        stencils[j] = idx
        zeta = times[idx] - times[j]
        # inverse Vandermonde: row l = coefficients of the basis poly for node l
        v = np.vander(zeta, 4, increasing=True)
        coeffs[j] = np.linalg.inv(v).T
    return stencils, coeffs


def _antiderivative_table(
    alpha: float, lam: float, s: np.ndarray, qmax: int = 4
) -> list[np.ndarray]:
    """[A_0(s), ..., A_{qmax-1}(s)] with A_q(0) = 0, elementwise over s >= 0."""
    out = []
    pos = s > 0.0
    sp = s[pos]
    z = lam * sp**alpha
    for q in range(qmax):
        a_q = np.zeros_like(s)
        a_q[pos] = sp ** (alpha + q) * ml_array(alpha, alpha + 1.0 + q, z)
        out.append(a_q)
    return out


class ControlQuadrature:
    """Cached product-integration weights mapping control samples to the
    per-eigenvalue convolution values at the evaluation times.

    The signal is written u(tau) = g(tau) (T-tau)^e with e its documented
    endpoint exponent; the smooth factor g is interpolated by piecewise
    cubics on the control mesh.  Each (eval time, mesh interval) piece is
    integrated in the variable (t-tau)^alpha, which absorbs the kernel
    singularity exactly and makes the Mittag-Leffler factor analytic; the
    (T-tau)^e factor is evaluated at the quadrature nodes.  Evaluation times
    above the mesh are only allowed at t = T, where the remaining sliver
    [t_last, T) is integrated against the extrapolated smooth factor.
    """

    NODES = 8
    NODES_STEEP = 20
    STEEP_RATIO = 1.15

    def __init__(
        self,
        p: FracParams,
        times: np.ndarray,
        t_eval: np.ndarray,
        lam_unique: np.ndarray,
        exponent: float,
        tail_quad: int = 32,
    ):
        self.p = p
        self.times = np.asarray(times, dtype=float)
        self.t_eval = np.asarray(t_eval, dtype=float)
        self.lam_unique = np.asarray(lam_unique, dtype=float)
        self.exponent = float(exponent)
        if self.exponent <= -p.alpha:
            raise ValueError(
                f"endpoint exponent {exponent} is not integrable against the kernel"
            )
        eps = 1e-12 * p.T
        beyond = self.t_eval > self.times[-1] + eps
        at_T = np.abs(self.t_eval - p.T) <= eps
        if np.any(beyond & ~at_T):
            raise ValueError(
                "control mesh does not cover [0, max(t_eval)); only t = T may "
                "exceed the last sample"
            )
        self.tail_rows = np.flatnonzero(at_T)
        self.weights = self._build()
        self.tail_phi = self._tail_factors(tail_quad) if self.tail_rows.size else None

    def _pieces(self) -> list[tuple[np.ndarray, ...]]:
        """Geometry of all (eval time, interval) integration pieces, batched
        by node count.  Returns batches of flat arrays
        (i_index, j_index, sh nodes, node weights including all smooth
        factors except the Mittag-Leffler one)."""
        p, times, t_eval = self.p, self.times, self.t_eval
        a, e, T = p.alpha, self.exponent, p.T
        m = times.size - 1
        ii, jj = np.meshgrid(
            np.arange(t_eval.size), np.arange(m), indexing="ij"
        )
        ti = t_eval[ii]
        active = times[jj] < ti - 1e-15 * T
        ii, jj, ti = ii[active], jj[active], ti[active]
        b_int = np.minimum(times[jj + 1], ti)
        # steepness of the (T-tau)^e factor across the piece
        if e != 0.0:
            ratio = (T - times[jj]) / np.maximum(T - b_int, 1e-300)
            steep = ratio > self.STEEP_RATIO
        else:
            steep = np.zeros(ii.shape, dtype=bool)
        batches = []
        for sel, n in ((~steep, self.NODES), (steep, self.NODES_STEEP)):
            if not np.any(sel):
                continue
            x, w = np.polynomial.legendre.leggauss(n)
            i_b, j_b, t_b, bi_b = ii[sel], jj[sel], ti[sel], b_int[sel]
            sha = (t_b - times[j_b]) ** a
            shb = np.where(bi_b >= t_b, 0.0, (t_b - bi_b) ** a)
            half = 0.5 * (sha - shb)
            sh = shb[:, None] + half[:, None] * (x[None, :] + 1.0)
            wq = half[:, None] * w[None, :] / a
            s = sh ** (1.0 / a)
            tau = t_b[:, None] - s
            if e != 0.0:
                wq = wq * (T - tau) ** e
            batches.append((i_b, j_b, sh, wq, tau))
        return batches

    def _build(self) -> np.ndarray:
        times = self.times
        n_t, n_nodes = self.t_eval.size, times.size
        stencils, lagr = _stencil_coefficients(times)
        w_all = np.zeros((self.lam_unique.size, n_t, n_nodes))
        for i_b, j_b, sh, wq, tau in self._pieces():
            zeta = tau - times[j_b][:, None]
            # Lagrange basis values at the quadrature nodes: (piece, q, l)
            zp = zeta[:, :, None] ** np.arange(4)[None, None, :]
            lvals = np.einsum("pqk,plk->pql", zp, lagr[j_b])
            q_l = wq[:, :, None] * lvals  # (piece, q, l)
            flat_sh = sh.ravel()
            cols = stencils[j_b]  # (piece, 4)
            rows = i_b
            for il, lam in enumerate(self.lam_unique):
                ek = ml_array(self.p.alpha, self.p.alpha, lam * flat_sh).reshape(
                    sh.shape
                )
                contrib = np.einsum("pq,pql->pl", ek, q_l)
                np.add.at(
                    w_all[il],
                    (rows[:, None], cols),
                    contrib,
                )
        return w_all

    def _tail_factors(self, nq: int) -> np.ndarray:
        """int_{t_last}^{T} (T-tau)^(a-1+e) E_a(lam (T-tau)^a) dtau per
        eigenvalue, against a frozen smooth factor."""
        p = self.p
        delta = p.T - self.times[-1]
        sig, w = gauss_jacobi_left(nq, self.exponent / p.alpha, delta**p.alpha)
        w = w / p.alpha
        ek = ml_array(
            p.alpha, p.alpha, np.outer(self.lam_unique, sig).ravel()
        ).reshape(self.lam_unique.size, sig.size)
        return ek @ w

    def smooth_factor(self, u: ControlSignal) -> np.ndarray:
        """Samples of g(tau) = u(tau) (T-tau)^(-e)."""
        if self.exponent == 0.0:
            return u.values
        return u.values * (self.p.T - u.times) ** (-self.exponent)

    def tail_gbar(self, u: ControlSignal) -> float:
        """Smooth factor extrapolated to tau = T, quadratically in
        sigma = (T-tau)^alpha (the natural analytic variable of the
        synthesized control)."""
        p = self.p
        tt = u.times[-3:]
        sig = (p.T - tt) ** p.alpha
        g = self.smooth_factor(u)[-3:]
        x0, x1, x2 = sig
        g01 = (x1 * g[0] - x0 * g[1]) / (x1 - x0)
        g12 = (x2 * g[1] - x1 * g[2]) / (x2 - x1)
        return float((x2 * g01 - x0 * g12) / (x2 - x0))

    def convolve(self, u: ControlSignal) -> np.ndarray:
        """Per-eigenvalue convolution values, shape (n_lam, n_t_eval)."""
        out = self.weights @ self.smooth_factor(u)
        if self.tail_rows.size:
            gbar = self.tail_gbar(u)
            for i in self.tail_rows:
                out[:, i] += gbar * self.tail_phi
        return out


_CQ_CACHE: dict[tuple, ControlQuadrature] = {}


def _quadrature_for(
    p: FracParams,
    times: np.ndarray,
    t_eval: np.ndarray,
    lam_unique: np.ndarray,
    exponent: float,
) -> ControlQuadrature:
    key = (
        p.alpha,
        p.T,
        exponent,
        times.tobytes(),
        np.asarray(t_eval, dtype=float).tobytes(),
        lam_unique.tobytes(),
    )
    if key not in _CQ_CACHE:
        # weight tensors are large; keep only a few configurations alive
        if len(_CQ_CACHE) >= 4:
            _CQ_CACHE.clear()
        _CQ_CACHE[key] = ControlQuadrature(p, times, t_eval, lam_unique, exponent)
    return _CQ_CACHE[key]


def controlled_state(
    u: ControlSignal, b: np.ndarray, p: FracParams, t_eval: np.ndarray, order: int
) -> np.ndarray:
    """State driven from rest by the control, per mode and evaluation time.

    Entry (n, i) is b_n int_0^{t_i} (t_i-tau)^(a-1) E_a(lam_n (t_i-tau)^a)
    u(tau) dtau, computed by product integration (piecewise-cubic in u) with
    exact kernel moments.  The control mesh must cover [0, max(t_eval)) up to
    the documented endpoint sliver at t = T.
    """
    b = np.asarray(b, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    lam = eigenvalues_array(order)
    if b.shape != lam.shape:
        raise ValueError(f"actuator vector has wrong length for order {order}")
    lam_u, inv = np.unique(lam, return_inverse=True)
    if not np.any(u.values):
        return np.zeros((lam.size, t_eval.size))
    cq = _quadrature_for(p, u.times, t_eval, lam_u, u.singularity_exponent)
    conv = cq.convolve(u)
    return b[:, None] * conv[inv, :]


def gram_matrix(
    b: np.ndarray, p: FracParams, order: int, quad_order: int = 64
) -> GramMatrix:
    """Assemble the controllability Gram matrix on the order-J basis.

    G_{mn} = b_m b_n int_0^T s^(2a-2) E_a(lam_m s^a) E_a(lam_n s^a) ds,
    evaluated with the sigma-substituted Gauss-Jacobi rule.  Requires
    alpha > 1/2 (enforced by FracParams) for the weight to be integrable.
    """
    b = np.asarray(b, dtype=float)
    lam = eigenvalues_array(order)
    if b.shape != lam.shape:
        raise ValueError(f"actuator vector has wrong length for order {order}")
    sig, w = _sigma_quadrature(p, quad_order, p.T)
    lam_u, inv = np.unique(lam, return_inverse=True)
    ek_u = ml_array(p.alpha, p.alpha, np.outer(lam_u, sig).ravel())
    ek = ek_u.reshape(lam_u.size, sig.size)[inv, :]
    be = b[:, None] * ek
    g = (be * w) @ be.T
    g = 0.5 * (g + g.T)
    min_eig = float(np.linalg.eigvalsh(g)[0])
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    tol = 1e-13 * max(scale, 1.0)
    n = order + 1
    zero_modes = [
        ModeIndex(i // n, i % n) for i in np.flatnonzero(np.abs(b) <= tol)
    ]
    return GramMatrix(g, min_eig, zero_modes, order)


def riesz_check_identity(
    alpha: float, lam: float, t: float, quad_order: int = 128
) -> tuple[float, float]:
    """Numerical check that the (1-alpha) fractional integral of the forward
    kernel equals the adjoint kernel:

        I^(1-a)[ s^(a-1) E_{a,a}(lam s^a) ](t)  ==  E_{a,1}(lam t^a).

    Returns (lhs, rhs); lhs by quadrature (sigma substitution plus a Jacobi
    weight for the (t-s)^(-alpha) endpoint), rhs by direct evaluation.  For
    alpha = 1 the integral operator is the identity and both sides equal
    exp(lam t).
    """
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if lam > 0.0:
        raise ValueError(f"eigenvalue must be <= 0, got {lam}")
    rhs = mittag_leffler(alpha, 1.0, lam * t**alpha)
    if alpha == 1.0:
        return rhs, rhs
    # I^(1-a) f(t) = 1/Gamma(1-a) int_0^t (t-s)^(-a) s^(a-1) E_{a,a}(lam s^a) ds
    # sigma = s^a:   = 1/(a Gamma(1-a)) int_0^{t^a} (t - sig^(1/a))^(-a) E(lam sig) dsig
    # Jacobi weight (t^a - sig)^(-a); the smooth remainder is the bracket ratio.
    x, w = roots_jacobi(quad_order, -alpha, 0.0)
    upper = t**alpha
    sig = 0.5 * upper * (x + 1.0)
    wj = w * (0.5 * upper) ** (1.0 - alpha)
    # (t - sig^(1/a)) / (upper - sig) written via expm1 for stability near the
    # singular endpoint: t - sig^(1/a) = -t*expm1(log(sig/upper)/a)
    v = np.clip(sig / upper, 1e-300, 1.0)
    num = -t * np.expm1(np.log(v) / alpha)
    ratio = (num / (upper - sig)) ** (-alpha)
    vals = ml_array(alpha, alpha, lam * sig) * ratio
    lhs = float((wj * vals).sum() / (alpha * _gamma(1.0 - alpha)))
    return lhs, rhs
