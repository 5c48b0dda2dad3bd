"""Built-in problem library: the logistic growth configurations.

Two worked example setups and twelve actuator/subregion sweep rows are
packaged as presets.  All of them steer the diffusive logistic model toward
a cosine steady-state profile on a boundary segment of the square, differing
in the actuator (zonal rectangle or point mass), its placement, and the
observed subregion.

Desired data conventions: each preset stores a two-dimensional extension of
the desired profile on the subregion, and the boundary target z_d.  For the
zonal example family and all sweep rows, z_d is the exact trace of the stored
extension, so the pair is self-consistent, and the amplitude of the zonal
family's target is set to the system's natural operating scale at the
horizon (a carrying capacity of 100 with unit growth over two time units
takes the square-root initial hump to fields of order ten; a target far
below that scale forces a draining control under which the quadratic
reaction genuinely blows up, and one far above forces a pumping control
that the explicit marching cannot follow).  The pointwise example
("example2") additionally ships in a published-data variant whose z_d has a
different amplitude than the extension trace; the run report's
trace_mismatch diagnostic quantifies that inconsistency, and
"example2_rescaled" is the reconciled version.

Solver settings per preset: the mass-Gram operator is exponentially
ill-conditioned, so each preset pins a singular-value cutoff (rcond) and an
under-relaxation factor for the fixed-point sweep; large subregions
(table1 rows 2 and 5) need a coarser cutoff to keep the loop stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fode import NonlinearSpec, TimeMesh
from .fracops import FracParams
from .hum import HUMProblem
from .spectral import Actuator, BoundarySegment, Rect

__all__ = ["NamedFunction", "ExperimentPreset", "builtin", "preset", "PRESET_LABELS"]


@dataclass(frozen=True)
class NamedFunction:
    """A catalogued pointwise rule with bound parameters."""

    name: str
    params: dict
    fn: Callable
    arity: int  # 1 for boundary profiles, 2 for fields on the square

    def __call__(self, *args):
        return self.fn(*args)


def builtin(name: str, **params) -> NamedFunction:
    """Look up a built-in function by name, binding its parameters.

    Catalog:
      steady_1d(mu, amp=1):  amp * (1 - mu cos(2 y))           (boundary profile)
      ext_2d(mu, delta, amp=1): amp (1 - mu cos 2x)(1 - delta cos 2y)
      sqrt_xy():             sqrt(x y)
      sqrt_xy_exp():         sqrt(x y) exp(x y)
      zero():                0 (any arity)
    """
    if name == "steady_1d":
        mu = float(params["mu"])
        amp = float(params.get("amp", 1.0))
        return NamedFunction(
            name, {"mu": mu, "amp": amp},
            lambda y: amp * (1.0 - mu * np.cos(2.0 * y)), 1,
        )
    if name == "ext_2d":
        mu = float(params["mu"])
        delta = float(params["delta"])
        amp = float(params.get("amp", 1.0))
        return NamedFunction(
            name, {"mu": mu, "delta": delta, "amp": amp},
            lambda x, y: amp
            * (1.0 - mu * np.cos(2.0 * x))
            * (1.0 - delta * np.cos(2.0 * y)),
            2,
        )
    if name == "sqrt_xy":
        return NamedFunction(name, {}, lambda x, y: np.sqrt(x * y), 2)
    if name == "sqrt_xy_exp":
        return NamedFunction(
            name, {}, lambda x, y: np.sqrt(x * y) * np.exp(x * y), 2
        )
    if name == "zero":
        return NamedFunction(name, {}, lambda *a: np.zeros_like(np.asarray(a[0], dtype=float)), 2)
    raise KeyError(f"unknown builtin function {name!r}")


@dataclass(frozen=True)
class ExperimentPreset:
    """A fully specified problem plus the externally reported segment error."""

    label: str
    problem: HUMProblem
    reported_error: float | None = None


# default discretization shared by every preset
_ORDER = 12
_STEPS = 256
_QUAD = 64
_GRID = 26
_CONTROL_STEPS = 512
_EPS = 1e-4
_MAX_ITERS = 50
_RCOND = 1e-7
_RELAX = 0.5
_ZONAL_AMP = 20.0


def _trace_of_ext(ext: NamedFunction, edge: str) -> Callable:
    if edge == "west":
        return lambda c: ext(0.0, c)
    if edge == "east":
        return lambda c: ext(math.pi, c)
    if edge == "south":
        return lambda c: ext(c, 0.0)
    return lambda c: ext(c, math.pi)


def _zonal_problem(
    act_rect: Rect,
    omega: Rect,
    gamma_hi: float = 0.5,
    alpha: float = 0.75,
    rcond: float = _RCOND,
) -> HUMProblem:
    p = FracParams(alpha=alpha, T=2.0)
    ext = builtin("ext_2d", mu=0.5, delta=0.5, amp=_ZONAL_AMP)
    gamma = BoundarySegment("west", 0.0, gamma_hi)
    return HUMProblem(
        p=p,
        order=_ORDER,
        omega=omega,
        gamma=gamma,
        act=Actuator.zonal(act_rect),
        y0=builtin("sqrt_xy"),
        y_d_ext=ext,
        z_d=_trace_of_ext(ext, "west"),
        spec=NonlinearSpec.logistic(C=1.0, Kcap=100.0),
        mesh=TimeMesh.graded(p.T, _STEPS, 2.0 / alpha),
        control_steps=_CONTROL_STEPS,
        quad_order=_QUAD,
        grid_points=_GRID,
        eps=_EPS,
        max_iters=_MAX_ITERS,
        rcond=rcond,
        relax=_RELAX,
    )


def _pointwise_problem(
    point: tuple[float, float],
    omega: Rect,
    z_d_amp: float,
    gamma_hi: float = 0.4,
    alpha: float = 0.8,
) -> HUMProblem:
    p = FracParams(alpha=alpha, T=2.0)
    ext = builtin("ext_2d", mu=0.5, delta=0.5, amp=2.0)
    gamma = BoundarySegment("west", 0.0, gamma_hi)
    if z_d_amp is None:
        z_d = _trace_of_ext(ext, "west")
    else:
        z_d = builtin("steady_1d", mu=0.5, amp=z_d_amp)
    return HUMProblem(
        p=p,
        order=_ORDER,
        omega=omega,
        gamma=gamma,
        act=Actuator.pointwise(*point),
        y0=builtin("sqrt_xy_exp"),
        y_d_ext=ext,
        z_d=z_d,
        spec=NonlinearSpec.logistic(C=1.0, Kcap=1.0),
        mesh=TimeMesh.graded(p.T, _STEPS, 2.0 / alpha),
        control_steps=_CONTROL_STEPS,
        quad_order=_QUAD,
        grid_points=_GRID,
        eps=_EPS,
        max_iters=_MAX_ITERS,
        rcond=1e-5,
        relax=_RELAX,
    )


def _catalog() -> dict[str, ExperimentPreset]:
    out: dict[str, ExperimentPreset] = {}
    ex1 = _zonal_problem(Rect(0.5, 1.0, 0.7, 1.0), Rect(0.0, 0.3, 0.0, 0.5))
    out["example1"] = ExperimentPreset("example1", ex1, 8.0e-3)

    # large subregions (rows 2 and 5) need a coarser cutoff to stay stable
    t1_rows = [
        (Rect(0.5, 1.0, 0.7, 1.0), Rect(0.0, 0.5, 0.0, 0.7), 0.1179, _RCOND),
        (Rect(0.5, 1.0, 0.7, 1.0), Rect(0.0, 1.0, 0.0, 1.0), 0.6392, 1e-5),
        (Rect(0.3, 0.5, 0.7, 1.0), Rect(0.0, 0.3, 0.0, 0.5), 0.0554, _RCOND),
        (Rect(0.3, 0.5, 0.7, 1.0), Rect(0.0, 0.1, 0.0, 0.7), 0.0069, _RCOND),
        (Rect(0.0, 0.3, 0.0, 0.1), Rect(0.0, 0.5, 0.0, 0.5), 0.0953, 1e-5),
        (Rect(0.0, 0.3, 0.0, 0.1), Rect(0.0, 0.5, 0.0, 0.7), 0.1081, _RCOND),
    ]
    for i, (act, omega, err, rc) in enumerate(t1_rows, start=1):
        label = f"table1_row{i}"
        out[label] = ExperimentPreset(label, _zonal_problem(act, omega, rcond=rc), err)

    ex2_published = _pointwise_problem((0.0, 0.5), Rect(0.0, 0.3, 0.0, 0.4), 100.0)
    out["example2"] = ExperimentPreset("example2", ex2_published, 6.95e-5)
    ex2_rescaled = _pointwise_problem((0.0, 0.5), Rect(0.0, 0.3, 0.0, 0.4), None)
    out["example2_rescaled"] = ExperimentPreset("example2_rescaled", ex2_rescaled, None)

    t2_rows = [
        ((0.0, 1.0), Rect(0.0, 0.3, 0.0, 0.4), 0.3884),
        ((0.0, 0.3), Rect(0.0, 0.3, 0.0, 0.4), 0.1022),
        ((0.0, 0.5), Rect(0.0, 0.5, 0.0, 1.0), 0.3969),
        ((0.0, 0.1), Rect(0.0, 0.5, 0.0, 1.0), 0.0639),
        ((0.0, 0.5), Rect(0.0, 1.0, 0.0, 0.5), 0.0363),
        ((0.0, 0.3), Rect(0.0, 1.0, 0.0, 0.5), 0.0552),
    ]
    for i, (pt, omega, err) in enumerate(t2_rows, start=1):
        label = f"table2_row{i}"
        out[label] = ExperimentPreset(label, _pointwise_problem(pt, omega, None), err)
    return out


_PRESETS = None


def preset(label: str) -> ExperimentPreset:
    """Fetch a preset by label; see PRESET_LABELS for the catalog."""
    global _PRESETS
    if _PRESETS is None:
        _PRESETS = _catalog()
    if label not in _PRESETS:
        raise KeyError(
            f"unknown preset {label!r}; available: {', '.join(sorted(_PRESETS))}"
        )
    return _PRESETS[label]


PRESET_LABELS = (
    ["example1"]
    + [f"table1_row{i}" for i in range(1, 7)]
    + ["example2", "example2_rescaled"]
    + [f"table2_row{i}" for i in range(1, 7)]
)
