"""Neumann-Laplacian cosine eigenbasis on the square (0, pi)^2.

Fields are stored as coefficient vectors on the orthonormal basis
xi_{jk}(x, y) = c_j c_k cos(jx) cos(ky), with c_0 = 1/sqrt(pi) and
c_j = sqrt(2/pi) for j >= 1; the eigenvalue of xi_{jk} is -(j^2 + k^2).
Coefficients are indexed row-major: n = j*(J+1) + k.

Subregion mass matrices, actuator coefficient vectors, traces on boundary
segments and region norms all reduce to closed-form 1D cosine integrals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "PI",
    "ModeIndex",
    "SpectralField",
    "Rect",
    "BoundarySegment",
    "Actuator",
    "Projection",
    "eigenvalue",
    "eigenvalues_array",
    "eval_basis",
    "cos_overlap_1d",
    "mass_matrix_1d",
    "mass_matrix",
    "actuator_coefficients",
    "project_function",
    "eval_field",
    "trace_values",
    "error_on_region",
    "error_on_segment",
    "gauss_legendre",
    "SpectralGrid",
    "write_grid_dump",
]

PI = np.pi


class ModeIndex(NamedTuple):
    j: int
    k: int


def _norm_const(j: int | np.ndarray) -> np.ndarray:
    """1D normalization: 1/sqrt(pi) for j=0, sqrt(2/pi) for j>=1."""
    j = np.asarray(j)
    return np.where(j == 0, 1.0 / np.sqrt(PI), np.sqrt(2.0 / PI))


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of a function on the truncated eigenbasis of order J."""

    order: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")
        c = np.asarray(self.coeffs, dtype=float)
        n = (self.order + 1) ** 2
        if c.shape != (n,):
            raise ValueError(f"coeffs must have shape ({n},), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, order: int) -> "SpectralField":
        return cls(order, np.zeros((order + 1) ** 2))

    def flat_index(self, m: ModeIndex) -> int:
        return m.j * (self.order + 1) + m.k


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle inside the closed square [0, pi]^2."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self) -> None:
        ok = 0.0 <= self.x0 < self.x1 <= PI and 0.0 <= self.y0 < self.y1 <= PI
        if not ok:
            raise ValueError(f"invalid rectangle {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


_EDGES = ("west", "east", "south", "north")


@dataclass(frozen=True)
class BoundarySegment:
    """Segment of the outer boundary: one edge plus an interval [lo, hi]."""

    edge: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.edge not in _EDGES:
            raise ValueError(f"edge must be one of {_EDGES}, got {self.edge!r}")
        if not (0.0 <= self.lo < self.hi <= PI):
            raise ValueError(f"invalid segment bounds [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def points(self, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) arrays for 1D arc coordinates along the segment."""
        coords = np.asarray(coords, dtype=float)
        if self.edge == "west":
            return np.zeros_like(coords), coords
        if self.edge == "east":
            return np.full_like(coords, PI), coords
        if self.edge == "south":
            return coords, np.zeros_like(coords)
        return coords, np.full_like(coords, PI)


@dataclass(frozen=True)
class Actuator:
    """Control shape: characteristic function of a rectangle, or a point mass."""

    kind: str  # "zonal" | "pointwise"
    region: Rect | None = None
    b1: float | None = None
    b2: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "zonal":
            if self.region is None:
                raise ValueError("zonal actuator requires a region")
        elif self.kind == "pointwise":
            if self.b1 is None or self.b2 is None:
                raise ValueError("pointwise actuator requires (b1, b2)")
            if not (0.0 <= self.b1 <= PI and 0.0 <= self.b2 <= PI):
                raise ValueError(f"point ({self.b1}, {self.b2}) outside the domain")
        else:
            raise ValueError(f"unknown actuator kind {self.kind!r}")

    @classmethod
    def zonal(cls, region: Rect) -> "Actuator":
        return cls("zonal", region=region)

    @classmethod
    def pointwise(cls, b1: float, b2: float) -> "Actuator":
        return cls("pointwise", b1=b1, b2=b2)

    def norm(self) -> float:
        """L2 norm of the control shape; the point mass uses +inf."""
        if self.kind == "zonal":
            assert self.region is not None
            return float(np.sqrt(self.region.area))
        return float("inf")


def eigenvalue(m: ModeIndex) -> float:
    """-(j^2 + k^2) for the Neumann Laplacian mode (j, k)."""
    if m.j < 0 or m.k < 0:
        raise ValueError(f"invalid mode index {m}")
    return -float(m.j * m.j + m.k * m.k)


def eigenvalues_array(order: int) -> np.ndarray:
    """All (order+1)^2 eigenvalues in row-major mode order."""
    j = np.arange(order + 1)
    return -(j[:, None] ** 2 + j[None, :] ** 2).astype(float).ravel()


def eval_basis(m: ModeIndex, x: float | np.ndarray, y: float | np.ndarray):
    """xi_{jk}(x, y) = c_j c_k cos(jx) cos(ky)."""
    cj = float(_norm_const(m.j))
    ck = float(_norm_const(m.k))
    return cj * ck * np.cos(m.j * np.asarray(x)) * np.cos(m.k * np.asarray(y))


def cos_overlap_1d(j: int, j2: int, a: float, b: float) -> float:
    """Closed form of int_a^b cos(j x) cos(j2 x) dx, 0 <= a < b <= pi."""
    if not (0.0 <= a < b <= PI):
        raise ValueError(f"bounds must satisfy 0 <= a < b <= pi, got [{a}, {b}]")
    if j == 0 and j2 == 0:
        return b - a
    if j == j2:
        return 0.5 * (b - a) + (np.sin(2 * j * b) - np.sin(2 * j * a)) / (4.0 * j)
    d, s = j - j2, j + j2
    return 0.5 * ((np.sin(d * b) - np.sin(d * a)) / d + (np.sin(s * b) - np.sin(s * a)) / s)


def mass_matrix_1d(order: int, a: float, b: float) -> np.ndarray:
    """(order+1)-square matrix of c_j c_j2 * int_a^b cos(jx) cos(j2 x) dx."""
    n = order + 1
    m = np.empty((n, n))
    cs = _norm_const(np.arange(n))
    for j in range(n):
        for j2 in range(j, n):
            v = cos_overlap_1d(j, j2, a, b) * float(cs[j] * cs[j2])
            m[j, j2] = v
            m[j2, j] = v
    return m


def mass_matrix(region: Rect, order: int) -> np.ndarray:
    """Matrix of inner products int_region xi_m xi_n over the truncated basis.

    Separable: the 2D matrix is the Kronecker product of two 1D overlap
    matrices (row-major mode ordering).  Symmetric positive semidefinite;
    equals the identity when region is the full square.
    """
    mx = mass_matrix_1d(order, region.x0, region.x1)
    my = mass_matrix_1d(order, region.y0, region.y1)
    m = np.kron(mx, my)
    return 0.5 * (m + m.T)


def actuator_coefficients(act: Actuator, order: int) -> np.ndarray:
    """Coefficient vector of the adjoint control operator on the basis.

    Zonal: b_n = int_D xi_n (product of 1D sine differences).
    Pointwise: b_n = xi_n(b1, b2).
    """
    n = order + 1
    j = np.arange(n)
    cj = _norm_const(j)
    if act.kind == "zonal":
        assert act.region is not None
        r = act.region

        def seg(lo: float, hi: float) -> np.ndarray:
            out = np.empty(n)
            out[0] = hi - lo
            jj = j[1:]
            out[1:] = (np.sin(jj * hi) - np.sin(jj * lo)) / jj
            return out

        bx = cj * seg(r.x0, r.x1)
        by = cj * seg(r.y0, r.y1)
        return np.kron(bx, by)
    vx = cj * np.cos(j * act.b1)
    vy = cj * np.cos(j * act.b2)
    return np.kron(vx, vy)


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class Projection:
    """Result of projecting a pointwise function onto the truncated basis."""

    field: SpectralField
    residual: float  # grid L2 norm of f - (projection of f)


class SpectralGrid:
    """Tensor midpoint (discrete-cosine) grid with cached basis matrices.

    Supports coefficient -> grid values and grid values -> coefficients, the
    machinery behind projection and pseudo-spectral nonlinearities.  The
    midpoint nodes x_p = (p + 1/2) pi / P carry exact discrete orthogonality
    for cosine products up to frequency 2P - 1, so with P >= 2(order+1) both
    the band-limited round trip and the projection of a quadratic
    nonlinearity are exact to roundoff (true dealiasing).
    """

    def __init__(self, order: int, points: int):
        if points < 2 * (order + 1):
            raise ValueError(
                f"grid size {points} aliases order {order}; need >= {2 * (order + 1)}"
            )
        self.order = order
        self.points = points
        self.x = (np.arange(points) + 0.5) * PI / points
        self.w = np.full(points, PI / points)
        j = np.arange(order + 1)
        # B[p, j] = c_j cos(j x_p)
        self.basis = _norm_const(j)[None, :] * np.cos(np.outer(self.x, j))

    def values(self, fld: SpectralField) -> np.ndarray:
        """Grid values, shape (points, points), x along axis 0."""
        c = fld.coeffs.reshape(self.order + 1, self.order + 1)
        return self.basis @ c @ self.basis.T

    def coefficients(self, vals: np.ndarray) -> np.ndarray:
        """Quadrature inner products <vals, xi_n> as a flat coefficient vector."""
        wb = self.basis * self.w[:, None]
        return (wb.T @ vals @ wb).ravel()

    def norm(self, vals: np.ndarray) -> float:
        """Quadrature L2(Omega) norm of grid values."""
        q = (self.w[:, None] * self.w[None, :] * vals**2).sum()
        return float(np.sqrt(max(q, 0.0)))


def _eval_on_grid(f: Callable, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate f on a tensor grid, tolerating scalar-only callables."""
    xx, yy = np.meshgrid(x, y, indexing="ij")
    try:
        vals = np.asarray(f(xx, yy), dtype=float)
        if vals.shape == xx.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.vectorize(f, otypes=[float])(xx, yy)


def project_function(f: Callable, order: int, points: int) -> Projection:
    """L2 projection of a pointwise-evaluable f onto the order-J basis.

    Coefficients are tensor quadrature inner products on the points^2
    discrete-cosine grid; points must be at least 2*(order+1) to avoid
    aliasing.  The returned residual is the grid L2 norm of f minus its
    projection, making truncation visible for non-band-limited data.
    """
    grid = SpectralGrid(order, points)
    vals = _eval_on_grid(f, grid.x, grid.x)
    coeffs = grid.coefficients(vals)
    fld = SpectralField(order, coeffs)
    residual = grid.norm(vals - grid.values(fld))
    return Projection(fld, residual)


def eval_field(fld: SpectralField, points: Sequence[tuple[float, float]]) -> np.ndarray:
    """Field values at arbitrary points (sum of coefficients times basis)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    j = np.arange(fld.order + 1)
    cx = _norm_const(j)[None, :] * np.cos(np.outer(pts[:, 0], j))
    cy = _norm_const(j)[None, :] * np.cos(np.outer(pts[:, 1], j))
    c = fld.coeffs.reshape(fld.order + 1, fld.order + 1)
    return np.einsum("pj,jk,pk->p", cx, c, cy)


def trace_values(fld: SpectralField, seg: BoundarySegment, samples: int) -> np.ndarray:
    """Field restricted to a boundary segment at Gauss-Legendre nodes."""
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    coords, _ = gauss_legendre(samples, seg.lo, seg.hi)
    x, y = seg.points(coords)
    return eval_field(fld, np.column_stack([x, y]))


def error_on_region(
    a: SpectralField,
    b: SpectralField,
    region: Rect,
    norm: str = "L2",
) -> float:
    """Norm of (a - b) over a rectangle: sqrt(d^T M_region d).

    norm="H1" rescales each coefficient by sqrt(1 + |lambda_n|) before the
    quadratic form, an H1-type weighting on the eigenbasis.
    """
    if a.order != b.order:
        raise ValueError(f"field orders differ: {a.order} vs {b.order}")
    if norm not in ("L2", "H1"):
        raise ValueError(f"norm must be 'L2' or 'H1', got {norm!r}")
    d = a.coeffs - b.coeffs
    if norm == "H1":
        d = d * np.sqrt(1.0 + np.abs(eigenvalues_array(a.order)))
    m = mass_matrix(region, a.order)
    q = float(d @ m @ d)
    return float(np.sqrt(max(q, 0.0)))


def error_on_segment(
    fld: SpectralField,
    target: Callable,
    seg: BoundarySegment,
    samples: int,
) -> float:
    """Gauss-Legendre L2 norm over the segment of (trace - target).

    target takes the 1D arc coordinate along the segment.
    """
    if samples < 8:
        raise ValueError(f"need at least 8 samples, got {samples}")
    coords, w = gauss_legendre(samples, seg.lo, seg.hi)
    x, y = seg.points(coords)
    tr = eval_field(fld, np.column_stack([x, y]))
    tgt = np.asarray([float(target(c)) for c in coords])
    q = float((w * (tr - tgt) ** 2).sum())
    return float(np.sqrt(max(q, 0.0)))


def write_grid_dump(fld: SpectralField, points: int, path) -> None:
    """Plain-text dump: header '# J=<J> P=<P>', then P^2 rows 'x y value'.

    The grid is the uniform points x points tensor grid on [0, pi]^2 with
    endpoints included, x varying slowest (row-major).
    """
    if points < 2:
        raise ValueError("need at least a 2x2 grid")
    xs = np.linspace(0.0, PI, points)
    pts = [(x, y) for x in xs for y in xs]
    vals = eval_field(fld, pts)
    lines = [f"# J={fld.order} P={points}"]
    for (x, y), v in zip(pts, vals):
        lines.append(f"{x:.17g} {y:.17g} {v:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
