import math

import numpy as np
import pytest
from scipy.special import gamma

from humfrac.fode import (
    BlowUpError,
    NonlinearSpec,
    StateTrajectory,
    TimeMesh,
    apply_nonlinearity,
    gronwall_time_condition,
    h0_diagnostic,
    solve_phi2,
)
from humfrac.fracops import FracParams
from humfrac.spectral import PI, SpectralGrid

GRONWALL_REFERENCE = -0.3201663351368495459117  # M=1,L=1,K=0.01,T=2,a=0.75,unit norms


def manufactured_error(alpha: float, steps: int) -> float:
    """Error at the horizon for the single-mode manufactured problem.

    The correction solves phi2 = I^a[phi2 + g] with identity reaction and
    source g(t) = Gamma(2+a) t - t^(1+a), whose unique solution is t^(1+a)
    (power rule: I^a t = t^(1+a)/Gamma(2+a) * Gamma(2)).
    """
    p = FracParams(alpha, 1.0)
    mesh = TimeMesh.graded(1.0, steps, 2.0 / alpha)
    g = gamma(2.0 + alpha) * mesh.nodes - mesh.nodes ** (1.0 + alpha)
    spec = NonlinearSpec(kind="custom", fn=lambda v: v, l_const=1.0)
    traj = solve_phi2(g[None, :], np.zeros((1, mesh.nodes.size)), spec, p, mesh, 0, 4)
    return abs(traj.coeffs[0, -1] - 1.0)


class TestTimeMesh:
    def test_graded_law(self):
        mesh = TimeMesh.graded(2.0, 8, 2.5)
        np.testing.assert_allclose(mesh.nodes, 2.0 * (np.arange(9) / 8) ** 2.5)
        assert mesh.steps == 8
        assert mesh.T == 2.0

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeMesh(np.array([0.1, 0.5]), 1.0)
        with pytest.raises(ValueError):
            TimeMesh(np.array([0.0, 0.5, 0.5]), 1.0)
        with pytest.raises(ValueError):
            TimeMesh.graded(1.0, 8, 0.5)


class TestNonlinearSpec:
    def test_logistic_requires_positive_params(self):
        with pytest.raises(ValueError):
            NonlinearSpec.logistic(C=0.0, Kcap=1.0)
        with pytest.raises(ValueError):
            NonlinearSpec.logistic(C=1.0, Kcap=0.0)

    def test_growth_constants_required(self):
        with pytest.raises(ValueError):
            NonlinearSpec(kind="custom", fn=lambda v: v)

    def test_custom_requires_callable(self):
        with pytest.raises(ValueError):
            NonlinearSpec(kind="custom", l_const=1.0)

    def test_logistic_defaults(self):
        spec = NonlinearSpec.logistic(C=2.0, Kcap=50.0)
        assert spec.l_const == 2.0
        assert spec.k_const == pytest.approx(0.04)


class TestApplyNonlinearity:
    def test_none_returns_zero(self):
        v = np.array([1.0, -3.0])
        assert np.all(apply_nonlinearity(v, NonlinearSpec.none()) == 0.0)

    def test_fixed_points_of_reaction(self):
        spec = NonlinearSpec.logistic(C=1.0, Kcap=100.0)
        assert apply_nonlinearity(np.array([0.0]), spec)[0] == 0.0
        assert apply_nonlinearity(np.array([100.0]), spec)[0] == 0.0

    def test_midpoint_value(self):
        spec = NonlinearSpec.logistic(C=1.0, Kcap=100.0)
        assert apply_nonlinearity(np.array([50.0]), spec)[0] == pytest.approx(25.0)


class TestSolvePhi2:
    def test_zero_reaction_zero_trajectory(self):
        p = FracParams(0.75, 1.0)
        mesh = TimeMesh.graded(1.0, 16, 2.0)
        src = np.ones((4, 17))
        traj = solve_phi2(src, src, NonlinearSpec.none(), p, mesh, 1, 4)
        assert np.all(traj.coeffs == 0.0)
        assert np.all(traj.coeffs[:, 0] == 0.0)

    def test_classical_ode_oracle(self):
        # alpha=1, lam=0, constant source c, near-linear reaction:
        # coefficient ODE w' = c + w  =>  w(T) = c (e^T - 1)
        p = FracParams(1.0, 1.0)
        mesh = TimeMesh.graded(1.0, 512, 1.0)
        c = 0.7
        src = np.full((1, mesh.nodes.size), c)
        spec = NonlinearSpec.logistic(C=1.0, Kcap=1e12)
        traj = solve_phi2(src, np.zeros_like(src), spec, p, mesh, 0, 4)
        assert traj.coeffs[0, -1] == pytest.approx(c * (math.e - 1.0), abs=1e-4)

    @pytest.mark.parametrize("alpha", [0.75, 0.9, 1.0])
    def test_manufactured_order(self, alpha):
        errs = [manufactured_error(alpha, m) for m in (32, 64, 128, 256)]
        # refinement monotonicity
        assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
        orders = [math.log2(e1 / e2) for e1, e2 in zip(errs, errs[1:])]
        assert sum(orders) / len(orders) >= min(1.0 + alpha, 2.0) - 0.2

    def test_blowup_reports_node(self):
        p = FracParams(0.75, 1.0)
        mesh = TimeMesh.graded(1.0, 32, 2.0)
        src = np.full((1, mesh.nodes.size), 40.0)
        spec = NonlinearSpec(kind="custom", fn=lambda v: v**4, l_const=1.0)
        with pytest.raises(BlowUpError) as err:
            solve_phi2(src, np.zeros_like(src), spec, p, mesh, 0, 4)
        assert 0 < err.value.node <= 32

    def test_aliasing_precondition(self):
        p = FracParams(0.75, 1.0)
        mesh = TimeMesh.graded(1.0, 8, 2.0)
        src = np.zeros((4, 9))
        with pytest.raises(ValueError):
            solve_phi2(src, src, NonlinearSpec.logistic(1.0, 1.0), p, mesh, 1, 3)

    def test_trajectory_type_validates(self):
        mesh = TimeMesh.graded(1.0, 4, 1.0)
        with pytest.raises(ValueError):
            StateTrajectory(mesh, np.zeros((3, 7)))


class TestH0Diagnostic:
    def test_zero_state(self):
        grid = SpectralGrid(2, 6)
        coeffs = np.zeros((9, 3))
        rep = h0_diagnostic(coeffs, NonlinearSpec.logistic(1.0, 100.0), grid)
        assert rep.margin_l2 == pytest.approx(0.0, abs=1e-14)
        assert rep.margin_sup == pytest.approx(0.0, abs=1e-14)

    def test_linear_reaction_tight(self):
        # near-linear reaction with L = C, K = 0: equality up to roundoff
        grid = SpectralGrid(2, 6)
        rng = np.random.default_rng(11)
        coeffs = rng.standard_normal((9, 4))
        spec = NonlinearSpec("custom", fn=lambda v: 2.0 * v, l_const=2.0, k_const=0.0)
        rep = h0_diagnostic(coeffs, spec, grid)
        assert abs(rep.margin_l2) <= 1e-10
        assert abs(rep.margin_sup) <= 1e-10

    def test_logistic_margin_matches_direct_computation(self):
        grid = SpectralGrid(1, 4)
        coeffs = np.zeros((4, 1))
        coeffs[0, 0] = 5.0  # constant field value 5/pi
        spec = NonlinearSpec.logistic(C=1.0, Kcap=100.0)
        rep = h0_diagnostic(coeffs, spec, grid)
        v = 5.0 / PI
        area = PI  # L2 norm of a constant c over the square is c*pi
        ny = abs(v * (1 - v / 100.0)) * area
        bound = spec.l_const * v * area + spec.k_const * (v * area) ** 2
        assert rep.margin_l2 == pytest.approx(ny - bound, rel=1e-10)
        assert rep.node_l2 == 0


class TestGronwallCondition:
    def test_no_quadratic_part_is_exactly_one(self):
        p = FracParams(0.75, 2.0)
        spec = NonlinearSpec("custom", fn=lambda v: v, l_const=1.0, k_const=0.0)
        value, ok = gronwall_time_condition(1.0, spec, p, 1.0, 1.0, 1.0)
        assert value == 1.0
        assert ok

    def test_short_horizon_limit(self):
        p = FracParams(0.75, 1e-9)
        spec = NonlinearSpec.logistic(C=1.0, Kcap=100.0)
        value, ok = gronwall_time_condition(1.0, spec, p, 1.0, 1.0, 1.0)
        assert value == pytest.approx(1.0, abs=1e-6)
        assert ok

    def test_direct_evaluation(self):
        p = FracParams(0.75, 2.0)
        spec = NonlinearSpec.logistic(C=1.0, Kcap=100.0)  # L=1, K=0.01
        value, ok = gronwall_time_condition(1.0, spec, p, 1.0, 1.0, 1.0)
        assert value == pytest.approx(GRONWALL_REFERENCE, rel=1e-12)
        assert not ok
