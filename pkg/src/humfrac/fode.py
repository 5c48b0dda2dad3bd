"""Predictor-corrector solver for the semilinear correction state.

The correction phi2 satisfies the weakly singular Volterra equation

    phi2(t) = int_0^t (t-tau)^(a-1) E_{a,a}(lam (t-tau)^a) F(tau) dtau

per mode, where F is the spectral coefficient vector of the reaction term
evaluated at the total state.  The scheme is Adams-Bashforth-Moulton with
product integration: rectangle weights predict, trapezoid weights correct,
and both integrate the Mittag-Leffler kernel exactly against the interpolant
(antiderivatives of the kernel are again Mittag-Leffler functions).

The reaction is evaluated pseudo-spectrally: coefficients to a dealiased
tensor grid, pointwise map, projection back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import beta as _beta
from scipy.special import gamma as _gamma

from .fracops import FracParams, _antiderivative_table
from .spectral import SpectralField, SpectralGrid, eigenvalues_array

__all__ = [
    "TimeMesh",
    "NonlinearSpec",
    "StateTrajectory",
    "BlowUpError",
    "apply_nonlinearity",
    "solve_phi2",
    "H0Report",
    "h0_diagnostic",
    "gronwall_time_condition",
]


class BlowUpError(RuntimeError):
    """The marching state became non-finite; carries the offending node."""

    def __init__(self, node: int, t: float):
        super().__init__(f"state blew up at node {node} (t={t:.6g})")
        self.node = node
        self.t = t


@dataclass(frozen=True)
class TimeMesh:
    """Graded mesh t_i = T (i/M)^r on [0, T], clustered at t = 0 for r > 1."""

    nodes: np.ndarray
    grading: float

    def __post_init__(self) -> None:
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("mesh needs at least two nodes")
        if t[0] != 0.0:
            raise ValueError("mesh must start at t = 0")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.grading < 1.0:
            raise ValueError(f"grading exponent must be >= 1, got {self.grading}")
        object.__setattr__(self, "nodes", t)

    @classmethod
    def graded(cls, T: float, steps: int, grading: float) -> "TimeMesh":
        if steps < 2:
            raise ValueError(f"need at least 2 steps, got {steps}")
        i = np.arange(steps + 1)
        return cls(T * (i / steps) ** grading, grading)

    @property
    def steps(self) -> int:
        return self.nodes.size - 1

    @property
    def T(self) -> float:
        return float(self.nodes[-1])


@dataclass(frozen=True)
class NonlinearSpec:
    """Reaction term: none, logistic C v (1 - v/Kcap), or a custom pointwise map.

    l_const and k_const are the user-supplied constants of the growth bound
    ||N y|| <= L ||y|| + K ||y||^2 checked by h0_diagnostic; they are
    diagnostic inputs, never used by the solver itself.
    """

    kind: str = "none"
    C: float = 0.0
    Kcap: float = 0.0
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    l_const: float = 0.0
    k_const: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "logistic", "custom"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "logistic" and not (self.C > 0.0 and self.Kcap > 0.0):
            raise ValueError("logistic reaction requires C > 0 and Kcap > 0")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom reaction requires a callable")
        if self.kind != "none" and self.l_const == 0.0 and self.k_const == 0.0:
            raise ValueError("growth-bound constants (L, K) must not both be zero")

    @classmethod
    def none(cls) -> "NonlinearSpec":
        return cls()

    @classmethod
    def logistic(cls, C: float, Kcap: float, l_const: float | None = None,
                 k_const: float | None = None) -> "NonlinearSpec":
        if not (C > 0.0 and Kcap > 0.0):
            raise ValueError("logistic reaction requires C > 0 and Kcap > 0")
        lc = C if l_const is None else l_const
        kc = C / Kcap if k_const is None else k_const
        return cls("logistic", C=C, Kcap=Kcap, l_const=lc, k_const=kc)


@dataclass(frozen=True)
class StateTrajectory:
    """Spectral coefficients along a mesh; column i belongs to node i."""

    mesh: TimeMesh
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[1] != self.mesh.nodes.size:
            raise ValueError("coefficient matrix must be (modes, len(mesh))")
        if not np.all(np.isfinite(c)):
            raise ValueError("trajectory coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def at_final(self) -> np.ndarray:
        return self.coeffs[:, -1].copy()


def apply_nonlinearity(values: np.ndarray, spec: NonlinearSpec) -> np.ndarray:
    """Pointwise reaction on grid values."""
    values = np.asarray(values, dtype=float)
    if spec.kind == "none":
        return np.zeros_like(values)
    if spec.kind == "logistic":
        return spec.C * values * (1.0 - values / spec.Kcap)
    assert spec.fn is not None
    return np.asarray(spec.fn(values), dtype=float)


_WEIGHT_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _march_weights(
    p: FracParams, mesh: TimeMesh, lam_unique: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(rect, trap_left, trap_right) weight tensors, each (n_lam, M+1, M).

    rect[l, i, j]   : int over [t_j, t_{j+1}] of the kernel at eval time t_i;
    trap_* [l, i, j]: the same integral against the two linear hat factors.
    Entries with t_j >= t_i are zero.
    """
    key = (p.alpha, mesh.nodes.tobytes(), lam_unique.tobytes())
    if key in _WEIGHT_CACHE:
        return _WEIGHT_CACHE[key]
    t = mesh.nodes
    n = t.size
    m = n - 1
    S = np.clip(t[:, None] - t[None, :], 0.0, None)
    h = np.diff(t)
    rect = np.zeros((lam_unique.size, n, m))
    w0 = np.zeros_like(rect)
    w1 = np.zeros_like(rect)
    for il, lam in enumerate(lam_unique):
        a0, a1 = _antiderivative_table(p.alpha, lam, S, qmax=2)
        sa, sb = S[:, :m], S[:, 1:]
        i0 = a0[:, :m] - a0[:, 1:]
        # int (tau - t_j) K(t_i - tau) dtau = (t_i - t_j) i0 - int s K(s) ds
        i1 = (sa * a0[:, :m] - sb * a0[:, 1:]) - (a1[:, :m] - a1[:, 1:])
        ramp = (sa * i0 - i1) / h[None, :]
        rect[il] = i0
        w0[il] = i0 - ramp
        w1[il] = ramp
    if len(_WEIGHT_CACHE) >= 2:
        _WEIGHT_CACHE.clear()
    _WEIGHT_CACHE[key] = (rect, w0, w1)
    return rect, w0, w1


def solve_phi2(
    phi0_traj: np.ndarray,
    phi1_traj: np.ndarray,
    spec: NonlinearSpec,
    p: FracParams,
    mesh: TimeMesh,
    order: int,
    grid_points: int,
) -> StateTrajectory:
    """March the semilinear correction along the mesh.

    phi0_traj and phi1_traj hold the source-state coefficients per node
    (modes x len(mesh)); their column 0 is never read, since the free state
    may be singular at t = 0 and the first interval uses its right endpoint.
    Aborts with BlowUpError if the state leaves the finite range.
    """
    if abs(mesh.T - p.T) > 1e-12 * p.T:
        raise ValueError("mesh horizon differs from problem horizon")
    nm = (order + 1) ** 2
    n = mesh.nodes.size
    if phi0_traj.shape != (nm, n) or phi1_traj.shape != (nm, n):
        raise ValueError("source trajectories must be (modes, len(mesh))")
    phi2 = np.zeros((nm, n))
    if spec.kind == "none":
        return StateTrajectory(mesh, phi2)
    grid = SpectralGrid(order, grid_points)
    lam = eigenvalues_array(order)
    lam_u, inv = np.unique(lam, return_inverse=True)
    rect, w0, w1 = _march_weights(p, mesh, lam_u)

    def reaction(col: int, phi2_col: np.ndarray) -> np.ndarray:
        total = phi0_traj[:, col] + phi1_traj[:, col] + phi2_col
        if not np.all(np.isfinite(total)):
            raise BlowUpError(col, mesh.nodes[col])
        vals = grid.values(SpectralField(order, total))
        with np.errstate(over="ignore", invalid="ignore"):
            out = grid.coefficients(apply_nonlinearity(vals, spec))
        if not np.all(np.isfinite(out)):
            raise BlowUpError(col, mesh.nodes[col])
        return out

    F = np.zeros((nm, n))
    for i in range(1, n):
        if i == 1:
            # no history yet: correct with the right-endpoint rectangle alone
            f1 = reaction(1, np.zeros(nm))
            phi2_i = rect[inv, 1, 0] * f1
            if not np.all(np.isfinite(phi2_i)):
                raise BlowUpError(1, mesh.nodes[1])
            phi2[:, 1] = phi2_i
            F[:, 1] = reaction(1, phi2_i)
            continue
        # predictor: rectangle on history, first interval uses its right sample
        wp = rect[inv, i, :i]
        pred = wp[:, 0] * F[:, 1] + np.einsum("nj,nj->n", wp[:, 1:i], F[:, 1:i])
        f_pred = reaction(i, pred)
        # corrector: trapezoid on intervals 1..i-1, right-rectangle on interval 0
        acc = rect[inv, i, 0] * F[:, 1]
        acc += np.einsum("nj,nj->n", w0[inv, i, 1:i], F[:, 1:i])
        acc += np.einsum("nj,nj->n", w1[inv, i, 1 : i - 1], F[:, 2:i])
        acc += w1[inv, i, i - 1] * f_pred
        if not np.all(np.isfinite(acc)):
            raise BlowUpError(i, mesh.nodes[i])
        phi2[:, i] = acc
        F[:, i] = reaction(i, acc)
    return StateTrajectory(mesh, phi2)


@dataclass(frozen=True)
class H0Report:
    """Worst violation of ||N y|| <= L ||y|| + K ||y||^2 along a trajectory.

    Positive margins flag that the user-supplied constants do not cover the
    run; negative margins mean the bound held with room to spare.  Both the
    L2 and the sup grid norms are reported, since the bound's norm is a
    modelling choice.
    """

    margin_l2: float
    node_l2: int
    margin_sup: float
    node_sup: int


def h0_diagnostic(
    coeffs: np.ndarray, spec: NonlinearSpec, grid: SpectralGrid
) -> H0Report:
    """Evaluate the growth-bound margins over trajectory columns."""
    order = grid.order
    best_l2 = (-math.inf, -1)
    best_sup = (-math.inf, -1)
    for i in range(coeffs.shape[1]):
        fld = SpectralField(order, coeffs[:, i])
        vals = grid.values(fld)
        nvals = apply_nonlinearity(vals, spec)
        y_l2, ny_l2 = grid.norm(vals), grid.norm(nvals)
        y_sup, ny_sup = float(np.max(np.abs(vals))), float(np.max(np.abs(nvals)))
        m_l2 = ny_l2 - (spec.l_const * y_l2 + spec.k_const * y_l2**2)
        m_sup = ny_sup - (spec.l_const * y_sup + spec.k_const * y_sup**2)
        if m_l2 > best_l2[0]:
            best_l2 = (m_l2, i)
        if m_sup > best_sup[0]:
            best_sup = (m_sup, i)
    return H0Report(best_l2[0], best_l2[1], best_sup[0], best_sup[1])


def gronwall_time_condition(
    m_const: float,
    spec: NonlinearSpec,
    p: FracParams,
    phi0_gnorm: float,
    y0_norm: float,
    b_norm: float,
) -> tuple[float, bool]:
    """Positivity condition guaranteeing the a-priori bound of the correction.

    Evaluates 1 - (3 M T^a K / Gamma(1+a)) exp(M L T^a / Gamma(1+a)) C, where
    C collects Beta-function moments of the free and controlled states; the
    bound is useful only when the value is positive.  K = 0 gives exactly 1.
    """
    a, T = p.alpha, p.T
    L, K = spec.l_const, spec.k_const
    if K == 0.0:
        return 1.0, True
    if 2.0 * a - 1.0 <= 0.0:
        raise ValueError("condition requires alpha > 1/2")
    ga = _gamma(a)
    c_lin = (m_const**2 * L * T ** (2 * a - 1) / ga**2) * (
        y0_norm * _beta(a, a) + (T / a) * b_norm * phi0_gnorm * _beta(a, a + 1.0)
    )
    c_quad = (3.0 * m_const**3 * K * T ** (3 * a - 2) / ga**3) * (
        y0_norm**2 * _beta(a, 2 * a - 1.0)
        + (T**2 / a**2) * b_norm**2 * phi0_gnorm**2 * _beta(a, 2 * a + 1.0)
    )
    c_total = c_lin + c_quad
    g1a = _gamma(1.0 + a)
    value = 1.0 - (3.0 * m_const * T**a * K / g1a) * math.exp(
        m_const * L * T**a / g1a
    ) * c_total
    return float(value), bool(value > 0.0)
