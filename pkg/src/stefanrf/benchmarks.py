"""The five shipped benchmark problems, error metrics, and test grids.

Each benchmark carries its closed-form exact solution (fields and moving
boundary, with analytic derivatives), default network sizes and sampling
ranges, and iteration budgets.  The two Frank problems are posed in
reduced radial coordinates (r, t); their exact solutions need the
exponential integral (2D) and the complementary error function (3D).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .features import DerivSpec
from .nets import AnalyticField, ParamKind
from .problems import (
    BCSpec,
    ConditionFn,
    DomainSpec,
    ExactSolution,
    Side,
    StefanProblem,
    explicit_condition,
    velocity_flux,
)
from .special import erfc, exp_integral_e1

VALUE = DerivSpec.value
TIME = DerivSpec.time
AXIS = DerivSpec.space_axis
MIXED = DerivSpec.mixed


class BenchmarkId(str, enum.Enum):
    ONE_PHASE_1D = "one_phase_1d"
    TWO_PHASE_1D = "two_phase_1d"
    ONE_PHASE_2D = "one_phase_2d"
    FRANK_2D = "frank_2d"
    FRANK_3D = "frank_3d"


@dataclass(frozen=True)
class BenchmarkDefaults:
    """Published layer sizes and sampling ranges, plus iteration budgets."""

    neurons: int
    boundary_neurons: int
    u_weight_ranges: tuple[tuple[float, float], ...]  # per phase
    u_bias_range: tuple[float, float]
    r_weight_range: tuple[float, float]
    r_bias_range: tuple[float, float]
    stage1_max_iters: int = 40
    stage2_max_iters: int = 15


_PI = math.pi
DEFAULTS: dict[BenchmarkId, BenchmarkDefaults] = {
    BenchmarkId.ONE_PHASE_1D: BenchmarkDefaults(
        neurons=500, boundary_neurons=500,
        u_weight_ranges=((-2.0, 2.0),), u_bias_range=(-2.0, 2.0),
        r_weight_range=(-2.0, 2.0), r_bias_range=(-2.0, 2.0),
    ),
    BenchmarkId.TWO_PHASE_1D: BenchmarkDefaults(
        neurons=700, boundary_neurons=700,
        u_weight_ranges=((-2.0, 2.0), (-3.0, 3.0)), u_bias_range=(-_PI, _PI),
        r_weight_range=(-1.0, 1.0), r_bias_range=(-_PI, _PI),
    ),
    BenchmarkId.ONE_PHASE_2D: BenchmarkDefaults(
        neurons=1000, boundary_neurons=1000,
        u_weight_ranges=((-2.0, 2.0),), u_bias_range=(-_PI, _PI),
        r_weight_range=(-2.0, 2.0), r_bias_range=(-_PI, _PI),
    ),
    BenchmarkId.FRANK_2D: BenchmarkDefaults(
        neurons=1500, boundary_neurons=1500,
        u_weight_ranges=((-2.0 * _PI, 2.0 * _PI),), u_bias_range=(-_PI, _PI),
        r_weight_range=(-1.0, 1.0), r_bias_range=(-2.0, 2.0),
    ),
    BenchmarkId.FRANK_3D: BenchmarkDefaults(
        neurons=3000, boundary_neurons=3000,
        u_weight_ranges=((-2.0 * _PI, 2.0 * _PI),), u_bias_range=(-_PI, _PI),
        r_weight_range=(-1.0, 1.0), r_bias_range=(-2.0, 2.0),
        stage1_max_iters=30, stage2_max_iters=10,
    ),
}


def benchmark_defaults(benchmark) -> BenchmarkDefaults:
    return DEFAULTS[BenchmarkId(benchmark)]


# --- Frank-sphere constants --------------------------------------------------

@dataclass(frozen=True)
class FrankConstants:
    """Similarity-solution constants for the expanding disk/sphere."""

    s0: float
    far_field: float
    amplitude: Optional[float]
    time_window: tuple[float, float]

    def interface_radius(self, t):
        return self.s0 * np.sqrt(t)


def frank_2d_constants() -> FrankConstants:
    s0 = 0.5
    g0 = exp_integral_e1(s0**2 / 4.0)
    gp0 = -2.0 * math.exp(-(s0**2) / 4.0) / s0
    far = s0 * g0 / (2.0 * gp0)
    return FrankConstants(s0=s0, far_field=far, amplitude=None, time_window=(0.25, 0.875))


def frank_3d_constants() -> FrankConstants:
    s0 = 0.5
    amp = 0.5 * s0**3 * math.exp(s0**2 / 4.0)
    far = -amp * ((1.0 / s0) * math.exp(-(s0**2) / 4.0) - (math.sqrt(math.pi) / 2.0) * erfc(s0 / 2.0))
    return FrankConstants(s0=s0, far_field=far, amplitude=amp, time_window=(0.25, 1.25))


# --- benchmark constructions -------------------------------------------------

def _one_phase_1d() -> StefanProblem:
    r0 = 2.0 - math.sqrt(3.0)

    def poly(p):
        x = p[:, 0]
        return -x**2 / 2.0 + 2.0 * x - 0.5

    u_exact = AnalyticField(1, {
        VALUE(1): lambda p: poly(p) - p[:, 1],
        TIME(1): lambda p: -np.ones(len(p)),
        AXIS(1, 0): lambda p: 2.0 - p[:, 0],
        AXIS(1, 0, 2): lambda p: -np.ones(len(p)),
        AXIS(1, 0, 3): lambda p: np.zeros(len(p)),
    })
    r_exact = AnalyticField(0, {
        VALUE(0): lambda p: 2.0 - np.sqrt(3.0 - 2.0 * p[:, 0]),
        TIME(0): lambda p: 1.0 / np.sqrt(3.0 - 2.0 * p[:, 0]),
    })

    return StefanProblem(
        name="one_phase_1d",
        ambient_dim=1,
        num_phases=1,
        diffusivities=(1.0,),
        domain=DomainSpec(((0.0, 1.25),)),
        time_interval=(0.0, 1.0),
        coords="cartesian",
        phase_sides=(Side.INSIDE,),
        initial_values=(poly,),
        boundary_conditions=(
            BCSpec(phase=0, facet=(0, "lo"), operator="neumann", axis=0,
                   rhs=lambda p: np.full(len(p), 2.0)),
        ),
        boundary_param=ParamKind.TIME,
        initial_interface=r0,
        # gradient condition on the interface: du/dx(R, t) = sqrt(3 - 2t)
        stefan=explicit_condition(
            dRdt_coeff=0.0,
            flux_coeffs=(1.0,),
            rhs=ConditionFn(
                value=lambda p: np.sqrt(3.0 - 2.0 * p[:, -1]),
                dpos=lambda p: np.zeros(len(p)),
                d2pos=lambda p: np.zeros(len(p)),
            ),
        ),
        exact=ExactSolution(fields=(u_exact,), boundary=r_exact),
    )


def _two_phase_1d() -> StefanProblem:
    def e1(p):  # exp term of phase 1
        return np.exp((2.0 * p[:, 1] - 2.0 * p[:, 0] + 1.0) / 4.0)

    def e2(p):
        return np.exp((2.0 * p[:, 1] - 2.0 * p[:, 0] + 1.0) / 2.0)

    u1 = AnalyticField(1, {
        VALUE(1): lambda p: 2.0 * e1(p) - 2.0,
        TIME(1): lambda p: e1(p),
        AXIS(1, 0): lambda p: -e1(p),
        AXIS(1, 0, 2): lambda p: e1(p) / 2.0,
        AXIS(1, 0, 3): lambda p: -e1(p) / 4.0,
    })
    u2 = AnalyticField(1, {
        VALUE(1): lambda p: e2(p) - 1.0,
        TIME(1): lambda p: e2(p),
        AXIS(1, 0): lambda p: -e2(p),
        AXIS(1, 0, 2): lambda p: e2(p),
        AXIS(1, 0, 3): lambda p: -e2(p),
    })
    r_exact = AnalyticField(0, {
        VALUE(0): lambda p: p[:, 0] + 0.5,
        TIME(0): lambda p: np.ones(len(p)),
    })

    return StefanProblem(
        name="two_phase_1d",
        ambient_dim=1,
        num_phases=2,
        diffusivities=(2.0, 1.0),
        domain=DomainSpec(((0.0, 2.0),)),
        time_interval=(0.0, 1.0),
        coords="cartesian",
        phase_sides=(Side.INSIDE, Side.OUTSIDE),
        initial_values=(
            lambda p: 2.0 * np.exp((1.0 - 2.0 * p[:, 0]) / 4.0) - 2.0,
            lambda p: np.exp((1.0 - 2.0 * p[:, 0]) / 2.0) - 1.0,
        ),
        boundary_conditions=(
            BCSpec(phase=0, facet=(0, "lo"), rhs=lambda p: 2.0 * np.exp((2.0 * p[:, 1] + 1.0) / 4.0) - 2.0),
            BCSpec(phase=1, facet=(0, "hi"), rhs=lambda p: np.exp((2.0 * p[:, 1] - 3.0) / 2.0) - 1.0),
        ),
        boundary_param=ParamKind.TIME,
        initial_interface=0.5,
        # dR/dt = -2 du1/dx + du2/dx  =>  dR/dt + 2 du1/dx - du2/dx = 0
        stefan=velocity_flux(flux_coeffs=(2.0, -1.0)),
        exact=ExactSolution(fields=(u1, u2), boundary=r_exact),
    )


def _one_phase_2d() -> StefanProblem:
    def ee(p):
        return np.exp(1.25 * p[:, 2] - p[:, 0] + 0.5 * p[:, 1] + 0.5)

    u = AnalyticField(2, {
        VALUE(2): lambda p: ee(p) - 1.0,
        TIME(2): lambda p: 1.25 * ee(p),
        AXIS(2, 0): lambda p: -ee(p),
        AXIS(2, 1): lambda p: 0.5 * ee(p),
        AXIS(2, 0, 2): lambda p: ee(p),
        AXIS(2, 1, 2): lambda p: 0.25 * ee(p),
        MIXED(2, {0: 1, 1: 1}): lambda p: -0.5 * ee(p),
        AXIS(2, 0, 3): lambda p: -ee(p),
        MIXED(2, {0: 2, 1: 1}): lambda p: 0.5 * ee(p),
    })
    r_exact = AnalyticField(1, {
        VALUE(1): lambda p: 1.25 * p[:, 1] + 0.5 * p[:, 0] + 0.5,
        AXIS(1, 0): lambda p: np.full(len(p), 0.5),
        TIME(1): lambda p: np.full(len(p), 1.25),
    })

    return StefanProblem(
        name="one_phase_2d",
        ambient_dim=2,
        num_phases=1,
        diffusivities=(1.0,),
        domain=DomainSpec(((0.0, 2.5), (0.0, 1.0))),
        time_interval=(0.0, 1.0),
        coords="cartesian",
        phase_sides=(Side.INSIDE,),
        initial_values=(lambda p: np.exp(-p[:, 0] + 0.5 * p[:, 1] + 0.5) - 1.0,),
        boundary_conditions=(
            BCSpec(phase=0, facet=(0, "lo"), rhs=lambda p: np.exp(1.25 * p[:, 2] + 0.5 * p[:, 1] + 0.5) - 1.0),
            BCSpec(phase=0, facet=(1, "lo"), rhs=lambda p: np.exp(1.25 * p[:, 2] - p[:, 0] + 0.5) - 1.0),
            BCSpec(phase=0, facet=(1, "hi"), rhs=lambda p: np.exp(1.25 * p[:, 2] - p[:, 0] + 1.0) - 1.0),
        ),
        boundary_param=ParamKind.GRAPH,
        graph_axis=1,
        initial_interface=lambda params: 0.5 * params[:, 0] + 0.5,
        # du/dx - du/dy dR/dy + dR/dt = 0 on the interface
        stefan=explicit_condition(dRdt_coeff=1.0, flux_coeffs=(1.0,)),
        exact=ExactSolution(fields=(u,), boundary=r_exact),
    )


def _frank_2d() -> StefanProblem:
    const = frank_2d_constants()
    s0 = const.s0
    g0 = exp_integral_e1(s0**2 / 4.0)
    u_inf = const.far_field
    c = u_inf / g0

    def s_of(p):
        return p[:, 0] / np.sqrt(p[:, 1])

    def u_val(p):
        return u_inf - c * exp_integral_e1(s_of(p) ** 2 / 4.0)

    def core(p):  # exp(-s^2/4)
        return np.exp(-(s_of(p) ** 2) / 4.0)

    u = AnalyticField(1, {
        VALUE(1): u_val,
        AXIS(1, 0): lambda p: 2.0 * c * core(p) / p[:, 0],
        AXIS(1, 0, 2): lambda p: -2.0 * c * core(p) * (0.5 / p[:, 1] + 1.0 / p[:, 0] ** 2),
        TIME(1): lambda p: -c * core(p) / p[:, 1],
    })
    r_exact = AnalyticField(1, {
        VALUE(1): lambda p: s0 * np.sqrt(p[:, 1]),
        AXIS(1, 0): lambda p: np.zeros(len(p)),
        TIME(1): lambda p: s0 / (2.0 * np.sqrt(p[:, 1])),
    })

    t0, t1 = const.time_window
    return StefanProblem(
        name="frank_2d",
        ambient_dim=2,
        num_phases=1,
        diffusivities=(1.0,),
        domain=DomainSpec(((-1.0, 1.0), (-1.0, 1.0))),
        time_interval=(t0, t1),
        coords="radial",
        phase_sides=(Side.OUTSIDE,),
        initial_values=(u_val,),
        boundary_conditions=(BCSpec(phase=0, facet="all", rhs=u_val),),
        boundary_param=ParamKind.ANGULAR,
        initial_interface=s0 * math.sqrt(t0),
        # grad(u).n + dR/dt = 0 with the outward radial normal
        stefan=velocity_flux(flux_coeffs=(1.0,)),
        exact=ExactSolution(fields=(u,), boundary=r_exact),
    )


def _frank_3d() -> StefanProblem:
    const = frank_3d_constants()
    s0 = const.s0
    amp = const.amplitude
    t_inf = const.far_field

    def s_of(p):
        return p[:, 0] / np.sqrt(p[:, 1])

    def core(p):
        return np.exp(-(s_of(p) ** 2) / 4.0)

    def u_val(p):
        s = s_of(p)
        return amp * ((1.0 / s) * np.exp(-(s**2) / 4.0) - (math.sqrt(math.pi) / 2.0) * erfc(s / 2.0)) + t_inf

    u = AnalyticField(1, {
        VALUE(1): u_val,
        AXIS(1, 0): lambda p: -amp * core(p) / (s_of(p) ** 2 * np.sqrt(p[:, 1])),
        AXIS(1, 0, 2): lambda p: amp * core(p) * (0.5 / s_of(p) + 2.0 / s_of(p) ** 3) / p[:, 1],
        TIME(1): lambda p: amp * core(p) / (2.0 * s_of(p) * p[:, 1]),
    })
    r_exact = AnalyticField(0, {
        VALUE(0): lambda p: s0 * np.sqrt(p[:, 0]),
        TIME(0): lambda p: s0 / (2.0 * np.sqrt(p[:, 0])),
    })

    t0, t1 = const.time_window
    return StefanProblem(
        name="frank_3d",
        ambient_dim=3,
        num_phases=1,
        diffusivities=(1.0,),
        domain=DomainSpec(((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))),
        time_interval=(t0, t1),
        coords="radial",
        phase_sides=(Side.OUTSIDE,),
        initial_values=(u_val,),
        boundary_conditions=(BCSpec(phase=0, facet="all", rhs=u_val),),
        boundary_param=ParamKind.TIME,
        initial_interface=s0 * math.sqrt(t0),
        stefan=velocity_flux(flux_coeffs=(1.0,)),
        exact=ExactSolution(fields=(u,), boundary=r_exact),
    )


_BUILDERS = {
    BenchmarkId.ONE_PHASE_1D: _one_phase_1d,
    BenchmarkId.TWO_PHASE_1D: _two_phase_1d,
    BenchmarkId.ONE_PHASE_2D: _one_phase_2d,
    BenchmarkId.FRANK_2D: _frank_2d,
    BenchmarkId.FRANK_3D: _frank_3d,
}


def make_benchmark(benchmark) -> StefanProblem:
    try:
        bid = BenchmarkId(benchmark)
    except ValueError:
        known = ", ".join(b.value for b in BenchmarkId)
        raise ConfigurationError(f"unknown benchmark {benchmark!r}; known: {known}") from None
    return _BUILDERS[bid]()


# --- error metrics -----------------------------------------------------------

def relative_l2(pred_values, exact_values) -> float:
    pred = np.asarray(pred_values, dtype=float)
    exact = np.asarray(exact_values, dtype=float)
    denom = float(exact @ exact)
    if denom == 0.0:
        raise ConfigurationError("relative L2 error undefined: exact values are identically zero")
    return math.sqrt(float((exact - pred) @ (exact - pred)) / denom)


def linf(pred_values, exact_values) -> float:
    return float(np.max(np.abs(np.asarray(exact_values) - np.asarray(pred_values))))


def _values_at(obj, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if hasattr(obj, "eval"):
        return eval_batched(obj, pts, VALUE(pts.shape[1] - 1))
    return np.asarray(obj(pts), dtype=float)


def relative_l2_error(pred, exact, test_points) -> float:
    return relative_l2(_values_at(pred, test_points), _values_at(exact, test_points))


def linf_error(pred, exact, test_points) -> float:
    return linf(_values_at(pred, test_points), _values_at(exact, test_points))


def eval_batched(evaluator, points, spec, batch: int = 8192) -> np.ndarray:
    """Evaluate in chunks so big test grids never build huge feature matrices."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] <= batch:
        return evaluator.eval(pts, spec)
    return np.concatenate([evaluator.eval(pts[i:i + batch], spec) for i in range(0, pts.shape[0], batch)])


# --- deterministic test grids -------------------------------------------------

@dataclass(frozen=True, eq=False)
class TestGrid:
    field_points: tuple[np.ndarray, ...]  # per phase
    field_exact: tuple[np.ndarray, ...]
    boundary_params: np.ndarray
    boundary_exact: np.ndarray


def build_test_grid(problem: StefanProblem, n_space: int = 201, n_time: int = 201) -> TestGrid:
    """Space-time evaluation grids following the exact phase regions."""
    if problem.exact is None:
        raise ConfigurationError(f"problem {problem.name!r} has no exact solution to grade against")
    t0, t1 = problem.time_interval
    pdim_s = problem.param_dim - 1
    r_b = problem.exact.boundary

    field_pts = []
    if problem.coords == "radial":
        r_max = math.sqrt(sum(max(abs(b[0]), abs(b[1])) ** 2 for b in problem.domain.bounds))
        ts = np.linspace(t0, t1, 101)
        pts = []
        for t in ts:
            params = np.array([[0.0, t]]) if pdim_s == 1 else np.array([[t]])
            r_t = float(r_b.eval(params, VALUE(pdim_s))[0])
            rr = np.linspace(r_t, r_max, n_space)
            pts.append(np.column_stack([rr, np.full(n_space, t)]))
        field_pts.append(np.concatenate(pts))
    elif problem.boundary_param is ParamKind.GRAPH:
        ts = np.linspace(t0, t1, 101)
        lo_y, hi_y = problem.domain.bounds[problem.graph_axis]
        ys = np.linspace(lo_y, hi_y, 101)
        x_lo = problem.domain.bounds[0][0]
        pts = []
        for t in ts:
            params = np.column_stack([ys, np.full_like(ys, t)])
            r_vals = r_b.eval(params, VALUE(pdim_s))
            for y, r in zip(ys, r_vals):
                xs = np.linspace(x_lo, r, 101)
                pts.append(np.column_stack([xs, np.full(101, y), np.full(101, t)]))
        field_pts.append(np.concatenate(pts))
    else:
        ts = np.linspace(t0, t1, n_time)
        params = ts[:, None]
        r_vals = r_b.eval(params, VALUE(0))
        x_lo, x_hi = problem.domain.bounds[0]
        for q in range(problem.num_phases):
            pts = []
            for t, r in zip(ts, r_vals):
                if problem.phase_sides[q] is Side.INSIDE:
                    xs = np.linspace(x_lo, r, n_space)
                else:
                    xs = np.linspace(r, x_hi, n_space)
                pts.append(np.column_stack([xs, np.full(n_space, t)]))
            field_pts.append(np.concatenate(pts))
    while len(field_pts) < problem.num_phases:
        field_pts.append(field_pts[0])

    field_exact = tuple(
        eval_batched(problem.exact.fields[q], field_pts[q], VALUE(problem.field_dim))
        for q in range(problem.num_phases)
    )

    if pdim_s == 0:
        b_params = np.linspace(t0, t1, 1001)[:, None]
    else:
        ts = np.linspace(t0, t1, 101)
        if problem.boundary_param is ParamKind.GRAPH:
            lo_y, hi_y = problem.domain.bounds[problem.graph_axis]
            other = np.linspace(lo_y, hi_y, 101)
        else:
            other = np.linspace(0.0, 2.0 * np.pi, 101)
        gy, gt = np.meshgrid(other, ts, indexing="ij")
        b_params = np.column_stack([gy.ravel(), gt.ravel()])
    b_exact = r_b.eval(b_params, VALUE(pdim_s))

    return TestGrid(
        field_points=tuple(field_pts[: problem.num_phases]),
        field_exact=field_exact,
        boundary_params=b_params,
        boundary_exact=b_exact,
    )


def evaluate_errors(problem: StefanProblem, grid: TestGrid, field_evaluators, boundary_evaluator) -> dict:
    """Relative L2 and Linf errors of a candidate solution on a test grid."""
    preds, exacts = [], []
    for q in range(problem.num_phases):
        preds.append(eval_batched(field_evaluators[q], grid.field_points[q], VALUE(problem.field_dim)))
        exacts.append(grid.field_exact[q])
    pred_u = np.concatenate(preds)
    exact_u = np.concatenate(exacts)
    pred_r = eval_batched(boundary_evaluator, grid.boundary_params, VALUE(problem.param_dim - 1))
    return {
        "e_u_rel_l2": relative_l2(pred_u, exact_u),
        "e_R_rel_l2": relative_l2(pred_r, grid.boundary_exact),
        "e_u_linf": linf(pred_u, exact_u),
    }
