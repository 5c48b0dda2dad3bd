import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from humfrac.spectral import (
    PI,
    Actuator,
    BoundarySegment,
    ModeIndex,
    Rect,
    SpectralField,
    SpectralGrid,
    actuator_coefficients,
    cos_overlap_1d,
    eigenvalue,
    eigenvalues_array,
    error_on_region,
    error_on_segment,
    eval_basis,
    eval_field,
    mass_matrix,
    project_function,
    trace_values,
    write_grid_dump,
)

OMEGA = Rect(0.0, PI, 0.0, PI)


def unit_field(order: int, j: int, k: int, value: float = 1.0) -> SpectralField:
    c = np.zeros((order + 1) ** 2)
    c[j * (order + 1) + k] = value
    return SpectralField(order, c)


class TestTypes:
    def test_field_validation(self):
        with pytest.raises(ValueError):
            SpectralField(2, np.zeros(8))
        with pytest.raises(ValueError):
            SpectralField(1, np.array([1.0, np.inf, 0.0, 0.0]))

    def test_rect_validation(self):
        with pytest.raises(ValueError):
            Rect(0.5, 0.5, 0.0, 1.0)
        with pytest.raises(ValueError):
            Rect(0.0, 1.0, -0.1, 1.0)
        with pytest.raises(ValueError):
            Rect(0.0, 4.0, 0.0, 1.0)

    def test_segment_validation(self):
        with pytest.raises(ValueError):
            BoundarySegment("top", 0.0, 1.0)
        with pytest.raises(ValueError):
            BoundarySegment("west", 1.0, 1.0)

    def test_actuator_validation(self):
        with pytest.raises(ValueError):
            Actuator("zonal")
        with pytest.raises(ValueError):
            Actuator.pointwise(-0.1, 0.5)
        assert Actuator.zonal(Rect(0, 1, 0, 1)).norm() == pytest.approx(1.0)
        assert Actuator.pointwise(0.0, 0.5).norm() == np.inf


class TestBasis:
    @pytest.mark.parametrize(
        "m,expect",
        [(ModeIndex(0, 0), 0.0), (ModeIndex(1, 1), -2.0), (ModeIndex(3, 4), -25.0)],
    )
    def test_eigenvalue(self, m, expect):
        assert eigenvalue(m) == expect

    def test_eigenvalues_array_order(self):
        lam = eigenvalues_array(2)
        assert lam[2 * 3 + 1] == -(4 + 1)  # mode (2,1), row-major

    def test_eval_basis_constant_mode(self):
        assert eval_basis(ModeIndex(0, 0), 1.1, 2.2) == pytest.approx(1.0 / PI)

    def test_eval_basis_edge(self):
        assert eval_basis(ModeIndex(1, 0), 0.0, 1.3) == pytest.approx(
            np.sqrt(2.0) / PI
        )

    def test_eval_basis_zero(self):
        assert eval_basis(ModeIndex(2, 2), PI / 4, PI / 4) == pytest.approx(0.0, abs=1e-15)

    def test_orthonormality_by_quadrature(self):
        grid = SpectralGrid(3, 8)
        for m in (ModeIndex(0, 0), ModeIndex(2, 1)):
            f = unit_field(3, m.j, m.k)
            vals = grid.values(f)
            assert grid.norm(vals) == pytest.approx(1.0, rel=1e-12)


class TestCosOverlap:
    def test_constant(self):
        assert cos_overlap_1d(0, 0, 0.0, PI) == pytest.approx(PI)

    def test_diagonal(self):
        assert cos_overlap_1d(1, 1, 0.0, PI) == pytest.approx(PI / 2)

    def test_orthogonal(self):
        assert cos_overlap_1d(1, 2, 0.0, PI) == pytest.approx(0.0, abs=1e-15)

    def test_partial_interval_vs_quadrature(self):
        got = cos_overlap_1d(1, 2, 0.0, PI / 2)
        ref, _ = quad(lambda x: np.cos(x) * np.cos(2 * x), 0.0, PI / 2)
        assert got == pytest.approx(ref, abs=1e-13)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            cos_overlap_1d(1, 1, 1.0, 0.5)


class TestMassMatrix:
    @pytest.mark.parametrize("order", [4, 16])
    def test_identity_on_full_square(self, order):
        m = mass_matrix(OMEGA, order)
        assert np.max(np.abs(m - np.eye((order + 1) ** 2))) <= 1e-12

    def test_half_square_constant_mode(self):
        m = mass_matrix(Rect(0.0, PI / 2, 0.0, PI), 3)
        assert m[0, 0] == pytest.approx(0.5, rel=1e-13)

    def test_small_region_entry_vs_quadrature(self):
        region = Rect(0.0, 0.3, 0.0, 0.5)
        m = mass_matrix(region, 2)
        idx = 1 * 3 + 0  # mode (1,0)
        ref, _ = dblquad(
            lambda y, x: eval_basis(ModeIndex(1, 0), x, y) ** 2,
            0.0, 0.3, 0.0, 0.5,
        )
        assert m[idx, idx] == pytest.approx(ref, rel=1e-10)

    def test_symmetry_exact(self):
        m = mass_matrix(Rect(0.1, 1.3, 0.4, 2.0), 6)
        assert np.array_equal(m, m.T)

    def test_spectrum_in_unit_interval(self):
        m = mass_matrix(Rect(0.1, 1.3, 0.4, 2.0), 6)
        ev = np.linalg.eigvalsh(m)
        assert ev[0] >= -1e-12
        assert ev[-1] <= 1.0 + 1e-12

    def test_additivity_over_disjoint_union(self):
        a = mass_matrix(Rect(0.0, 1.0, 0.0, 2.0), 5)
        b = mass_matrix(Rect(1.0, 2.5, 0.0, 2.0), 5)
        u = mass_matrix(Rect(0.0, 2.5, 0.0, 2.0), 5)
        assert np.max(np.abs(a + b - u)) <= 1e-12


class TestActuator:
    def test_zonal_full_square(self):
        b = actuator_coefficients(Actuator.zonal(OMEGA), 3)
        assert b[0] == pytest.approx(PI, rel=1e-14)
        assert np.max(np.abs(b[1:])) <= 1e-12

    def test_pointwise_formula(self):
        b = actuator_coefficients(Actuator.pointwise(0.0, 0.5), 1)
        expect = (1.0 / np.sqrt(PI)) * np.sqrt(2.0 / PI) * np.cos(0.5)
        assert b[1] == pytest.approx(expect, rel=1e-14)  # mode (0,1)

    def test_zonal_entry_vs_quadrature(self):
        b = actuator_coefficients(Actuator.zonal(Rect(0.5, 1.0, 0.7, 1.0)), 2)
        ref, _ = dblquad(
            lambda y, x: eval_basis(ModeIndex(1, 1), x, y),
            0.5, 1.0, 0.7, 1.0,
        )
        assert b[1 * 3 + 1] == pytest.approx(ref, rel=1e-11)


class TestProjection:
    def test_constant(self):
        proj = project_function(lambda x, y: np.ones_like(x), 4, 12)
        assert proj.field.coeffs[0] == pytest.approx(PI, rel=1e-13)
        assert np.max(np.abs(proj.field.coeffs[1:])) <= 1e-12
        assert proj.residual <= 1e-12

    def test_reproduces_basis_function(self):
        proj = project_function(lambda x, y: eval_basis(ModeIndex(1, 1), x, y), 3, 10)
        expect = np.zeros(16)
        expect[1 * 4 + 1] = 1.0
        np.testing.assert_allclose(proj.field.coeffs, expect, atol=1e-12)

    def test_sqrt_xy_constant_coefficient(self):
        # <sqrt(xy), xi_00> = (1/pi) (int_0^pi sqrt(x) dx)^2 = 4 pi^2 / 9;
        # the square-root edge singularity limits the midpoint rule to ~P^(-3/2)
        proj = project_function(lambda x, y: np.sqrt(x * y), 8, 64)
        assert proj.field.coeffs[0] == pytest.approx(4.386490844928604, rel=5e-4)
        assert proj.residual > 0.0  # non-band-limited data leaves a residual
        finer = project_function(lambda x, y: np.sqrt(x * y), 8, 128)
        ref = 4.386490844928604
        assert abs(finer.field.coeffs[0] - ref) < abs(proj.field.coeffs[0] - ref)

    def test_round_trip_band_limited(self):
        rng = np.random.default_rng(7)
        fld = SpectralField(5, rng.standard_normal(36))
        proj = project_function(
            lambda x, y, f=fld: _eval_xy(f, x, y), 5, 12
        )
        np.testing.assert_allclose(proj.field.coeffs, fld.coeffs, atol=1e-10)

    def test_aliasing_rejected(self):
        with pytest.raises(ValueError):
            project_function(lambda x, y: x, 5, 11)


def _eval_xy(fld, x, y):
    pts = np.column_stack([np.ravel(x), np.ravel(y)])
    return eval_field(fld, pts).reshape(np.shape(x))


class TestEvalAndTrace:
    def test_eval_field_single_modes(self):
        f = unit_field(2, 0, 0, 2.0)
        vals = eval_field(f, [(0.3, 0.4), (1.0, 2.0)])
        np.testing.assert_allclose(vals, 2.0 / PI)

    def test_eval_field_linearity(self):
        f1 = unit_field(2, 1, 0)
        f2 = unit_field(2, 0, 2)
        both = SpectralField(2, f1.coeffs + 3.0 * f2.coeffs)
        pts = [(0.2, 0.9), (2.5, 0.1)]
        np.testing.assert_allclose(
            eval_field(both, pts),
            eval_field(f1, pts) + 3.0 * eval_field(f2, pts),
            rtol=1e-14,
        )

    def test_trace_constant_field(self):
        f = unit_field(1, 0, 0, PI)  # constant value 1
        vals = trace_values(f, BoundarySegment("west", 0.0, 0.5), 9)
        np.testing.assert_allclose(vals, 1.0, rtol=1e-13)

    def test_trace_restriction_formula(self):
        f = unit_field(2, 0, 2)
        seg = BoundarySegment("west", 0.0, PI)
        from humfrac.spectral import gauss_legendre

        nodes, _ = gauss_legendre(12, 0.0, PI)
        got = trace_values(f, seg, 12)
        expect = (np.sqrt(2.0) / PI) * np.cos(2.0 * nodes)
        np.testing.assert_allclose(got, expect, atol=1e-14)

    def test_trace_two_mode_sum(self):
        f1, f2 = unit_field(2, 0, 1), unit_field(2, 2, 0)
        both = SpectralField(2, f1.coeffs + f2.coeffs)
        seg = BoundarySegment("north", 0.2, 2.0)
        np.testing.assert_allclose(
            trace_values(both, seg, 8),
            trace_values(f1, seg, 8) + trace_values(f2, seg, 8),
            rtol=1e-13,
        )

    def test_trace_needs_two_samples(self):
        with pytest.raises(ValueError):
            trace_values(unit_field(1, 0, 0), BoundarySegment("west", 0.0, 1.0), 1)


class TestErrors:
    def test_identical_fields(self):
        f = unit_field(3, 1, 2)
        assert error_on_region(f, f, Rect(0.0, 1.0, 0.0, 1.0)) == 0.0

    def test_constant_mode_full_square(self):
        a = unit_field(3, 0, 0)
        b = SpectralField.zero(3)
        assert error_on_region(a, b, OMEGA) == pytest.approx(1.0, rel=1e-13)

    def test_quarter_square_vs_quadrature(self):
        a = unit_field(2, 1, 1)
        b = SpectralField.zero(2)
        got = error_on_region(a, b, Rect(0.0, PI / 2, 0.0, PI / 2))
        ref, _ = dblquad(
            lambda y, x: eval_basis(ModeIndex(1, 1), x, y) ** 2,
            0.0, PI / 2, 0.0, PI / 2,
        )
        assert got == pytest.approx(np.sqrt(ref), rel=1e-11)

    def test_full_square_equals_coefficient_norm(self):
        rng = np.random.default_rng(3)
        a = SpectralField(4, rng.standard_normal(25))
        b = SpectralField(4, rng.standard_normal(25))
        assert error_on_region(a, b, OMEGA) == pytest.approx(
            np.linalg.norm(a.coeffs - b.coeffs), rel=1e-12
        )

    def test_h1_weighting(self):
        a = unit_field(3, 2, 2)  # |lambda| = 8
        b = SpectralField.zero(3)
        l2 = error_on_region(a, b, OMEGA, "L2")
        h1 = error_on_region(a, b, OMEGA, "H1")
        assert h1 == pytest.approx(3.0 * l2, rel=1e-12)

    def test_order_mismatch(self):
        with pytest.raises(ValueError):
            error_on_region(unit_field(2, 0, 0), unit_field(3, 0, 0), OMEGA)

    def test_segment_self_trace(self):
        f = unit_field(2, 0, 2)
        seg = BoundarySegment("west", 0.0, 1.0)
        err = error_on_segment(
            f, lambda y: (np.sqrt(2.0) / PI) * np.cos(2.0 * y), seg, 16
        )
        assert err <= 1e-14

    def test_segment_constant_target(self):
        f = SpectralField.zero(2)
        seg = BoundarySegment("west", 0.0, 0.5)
        err = error_on_segment(f, lambda y: 1.0, seg, 16)
        assert err == pytest.approx(np.sqrt(0.5), rel=1e-13)

    def test_segment_closed_form(self):
        f = unit_field(2, 0, 1)
        seg = BoundarySegment("west", 0.0, PI)
        err = error_on_segment(f, lambda y: 0.0, seg, 32)
        assert err == pytest.approx(0.5641895835477563, rel=1e-12)

    def test_segment_sample_floor(self):
        with pytest.raises(ValueError):
            error_on_segment(unit_field(1, 0, 0), lambda y: 0.0,
                             BoundarySegment("west", 0.0, 1.0), 4)


class TestGridDump:
    def test_format(self, tmp_path):
        f = unit_field(2, 1, 0)
        path = tmp_path / "field.txt"
        write_grid_dump(f, 5, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "# J=2 P=5"
        assert len(lines) == 1 + 25
        x, y, v = (float(t) for t in lines[1].split())
        assert (x, y) == (0.0, 0.0)
        assert v == pytest.approx(eval_basis(ModeIndex(1, 0), 0.0, 0.0), rel=1e-15)
        # row-major: second line advances y
        x2, y2, _ = (float(t) for t in lines[2].split())
        assert x2 == 0.0 and y2 > 0.0
