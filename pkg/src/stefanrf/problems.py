"""Stefan problem instances: geometry, phases, conditions, exact solutions.

Conventions used throughout the solver:

* Field inputs are ``(x_1..x_s, t)`` with time last.  Problems posed with
  radial symmetry ("radial" coords) reduce the field input to ``(r, t)``
  and replace the Laplacian by ``u_rr + nu/r * u_r`` with
  ``nu = ambient_dim - 1``.
* Interface parameters follow the boundary net's ParamKind: ``(t,)``,
  ``(y, t)`` for graphs ``x = R(y, t)``, or ``(theta, t)`` for radial
  interfaces.  The interface always moves along field axis 0 (x or r), so
  "position derivatives" of interface quantities are pure axis-0
  derivatives.
* Condition callbacks accept the full (n, field_dim + 1) space-time array.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, ConfigurationError
from .nets import AnalyticField, ParamKind


class Side(str, enum.Enum):
    """Which side of the interface a phase occupies along the motion axis."""

    INSIDE = "inside"  # x (or r) <= R
    OUTSIDE = "outside"  # x (or r) >= R


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned bounding box of the ambient domain."""

    bounds: tuple[tuple[float, float], ...]

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def sample(self, rng, n: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + (hi - lo) * rng.random((n, self.dim))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((pts >= lo) & (pts <= hi), axis=1)


@dataclass(frozen=True, eq=False)
class BCSpec:
    """One fixed-boundary condition on a facet of the ambient box.

    ``facet`` is ``(axis, "lo"|"hi")`` or ``"all"`` for the whole box
    boundary (used by the radially-reduced problems, where every facet
    point collapses to a radius).  ``operator`` is "dirichlet" or
    "neumann"; for Neumann, ``axis`` names the field coordinate that is
    differentiated.
    """

    phase: int
    facet: object  # (axis, side) or "all"
    operator: str = "dirichlet"
    axis: int = 0
    rhs: Callable[[np.ndarray], np.ndarray] = None

    def __post_init__(self):
        if self.operator not in ("dirichlet", "neumann"):
            raise ConfigurationError(f"unknown boundary operator {self.operator!r}")


def _central_diff(fn, axis, step):
    def d(points):
        p = np.asarray(points, dtype=float)
        hi = p.copy()
        lo = p.copy()
        hi[:, axis] += step
        lo[:, axis] -= step
        return (np.asarray(fn(hi)) - np.asarray(fn(lo))) / (2.0 * step)

    return d


def _central_diff2(fn, axis, step):
    def d2(points):
        p = np.asarray(points, dtype=float)
        hi = p.copy()
        lo = p.copy()
        hi[:, axis] += step
        lo[:, axis] -= step
        return (np.asarray(fn(hi)) - 2.0 * np.asarray(fn(p)) + np.asarray(fn(lo))) / step**2

    return d2


@dataclass(frozen=True, eq=False)
class ConditionFn:
    """Interface source term with derivatives along the motion axis.

    When analytic ``dpos``/``d2pos`` are missing they are filled by central
    differences (step 1e-6) and ``uses_fd`` is set, which run reports
    surface so users know a fallback is active.
    """

    value: Callable[[np.ndarray], np.ndarray]
    dpos: Optional[Callable] = None
    d2pos: Optional[Callable] = None
    fd_step: float = 1e-6

    @property
    def uses_fd(self) -> bool:
        return self.dpos is None or self.d2pos is None

    def value_at(self, points) -> np.ndarray:
        return np.asarray(self.value(np.asarray(points, dtype=float)), dtype=float)

    def dpos_at(self, points) -> np.ndarray:
        fn = self.dpos if self.dpos is not None else _central_diff(self.value, 0, self.fd_step)
        return np.asarray(fn(np.asarray(points, dtype=float)), dtype=float)

    def d2pos_at(self, points) -> np.ndarray:
        fn = self.d2pos if self.d2pos is not None else _central_diff2(self.value, 0, self.fd_step)
        return np.asarray(fn(np.asarray(points, dtype=float)), dtype=float)


def constant_fn(c: float) -> ConditionFn:
    return ConditionFn(
        value=lambda p: np.full(len(p), float(c)),
        dpos=lambda p: np.zeros(len(p)),
        d2pos=lambda p: np.zeros(len(p)),
    )


@dataclass(frozen=True, eq=False)
class StefanSpec:
    """Structured interface flux condition.

    The residual at an interface point is

        dRdt_coeff * dR/dt + sum_q flux_coeffs[q] * D_n u_q - rhs

    where ``D_n`` is the derivative along the interface normal in the
    problem's parameterization: d/dx in 1D, ``u_x - u_y dR/dy`` for graph
    interfaces (unnormalized normal), d/dr for radial ones.  This one form
    covers the flux-jump condition (dRdt_coeff = 0, coefficients
    ``(k_1, -k_2)``), velocity-flux conditions, and the explicit per-problem
    variants of the shipped benchmarks, while staying analytically
    differentiable in every network parameter.
    """

    kind: str
    dRdt_coeff: float
    flux_coeffs: tuple[float, ...]
    rhs: Optional[ConditionFn] = None


def flux_jump(diffusivities: Sequence[float], rhs: Optional[ConditionFn] = None) -> StefanSpec:
    coeffs = tuple(((-1.0) ** q) * k for q, k in enumerate(diffusivities))
    return StefanSpec(kind="flux_jump", dRdt_coeff=0.0, flux_coeffs=coeffs, rhs=rhs)


def velocity_flux(flux_coeffs: Sequence[float], rhs: Optional[ConditionFn] = None, dRdt_coeff: float = 1.0) -> StefanSpec:
    return StefanSpec(kind="velocity_flux", dRdt_coeff=float(dRdt_coeff), flux_coeffs=tuple(flux_coeffs), rhs=rhs)


def explicit_condition(dRdt_coeff: float, flux_coeffs: Sequence[float], rhs: Optional[ConditionFn] = None) -> StefanSpec:
    return StefanSpec(kind="explicit", dRdt_coeff=float(dRdt_coeff), flux_coeffs=tuple(flux_coeffs), rhs=rhs)


@dataclass(frozen=True, eq=False)
class ExactSolution:
    """Closed-form reference pair: per-phase fields and the boundary."""

    fields: tuple[AnalyticField, ...]
    boundary: AnalyticField  # over interface parameters


@dataclass(frozen=True, eq=False)
class StefanProblem:
    name: str
    ambient_dim: int
    num_phases: int
    diffusivities: tuple[float, ...]
    domain: DomainSpec
    time_interval: tuple[float, float]
    coords: str  # "cartesian" | "radial"
    phase_sides: tuple[Side, ...]
    initial_values: tuple[Callable, ...]
    boundary_conditions: tuple[BCSpec, ...]
    boundary_param: ParamKind
    initial_interface: object  # scalar or callable(params) -> (n,)
    stefan: StefanSpec
    interface_temperature: float = 0.0
    exact: Optional[ExactSolution] = None
    graph_axis: int = 1  # ambient axis acting as the graph parameter y

    @property
    def field_dim(self) -> int:
        return 1 if self.coords == "radial" else self.ambient_dim

    @property
    def radial_nu(self) -> int:
        return self.ambient_dim - 1 if self.coords == "radial" else 0

    @property
    def param_dim(self) -> int:
        return 1 if self.boundary_param is ParamKind.TIME else 2

    # -- geometry helpers ---------------------------------------------------

    def reduce_points(self, ambient: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Map ambient spatial points plus times to field-space inputs."""
        t = np.asarray(t, dtype=float)
        if self.coords == "radial":
            r = np.linalg.norm(ambient, axis=1)
            return np.column_stack([r, t])
        return np.column_stack([ambient, t])

    def membership_params(self, ambient: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Interface parameters used to test phase membership of a point."""
        t = np.asarray(t, dtype=float)
        if self.boundary_param is ParamKind.TIME:
            return t[:, None]
        if self.boundary_param is ParamKind.GRAPH:
            return np.column_stack([ambient[:, self.graph_axis], t])
        theta = np.mod(np.arctan2(ambient[:, 1], ambient[:, 0]), 2.0 * np.pi)
        return np.column_stack([theta, t])

    def motion_coord(self, ambient: np.ndarray) -> np.ndarray:
        """Coordinate compared against R: x (1D/graph) or the radius."""
        if self.coords == "radial":
            return np.linalg.norm(ambient, axis=1)
        return ambient[:, 0]

    def phase_contains(self, phase: int, coord: np.ndarray, r_hat: np.ndarray) -> np.ndarray:
        if self.phase_sides[phase] is Side.INSIDE:
            return coord <= r_hat
        return coord >= r_hat

    def interface_points(self, params: np.ndarray, r_values: np.ndarray) -> np.ndarray:
        """Field-space points on the interface for given parameters."""
        params = np.asarray(params, dtype=float)
        t = params[:, -1]
        if self.boundary_param is ParamKind.GRAPH:
            return np.column_stack([r_values, params[:, 0], t])
        return np.column_stack([r_values, t])

    def initial_radius(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if callable(self.initial_interface):
            return np.asarray(self.initial_interface(params), dtype=float)
        return np.full(params.shape[0], float(self.initial_interface))


def validate(problem: StefanProblem) -> list[str]:
    """Check structural invariants; returns one message per violation."""
    out = []
    t0, t1 = problem.time_interval
    if not t0 < t1:
        out.append(f"time_interval: start {t0} must be < end {t1}")
    if len(problem.diffusivities) != problem.num_phases:
        out.append("diffusivities: need one positive value per phase")
    if any(k <= 0 for k in problem.diffusivities):
        out.append("diffusivities: all must be > 0")
    if len(problem.phase_sides) != problem.num_phases:
        out.append("phase_sides: need one side per phase")
    if len(problem.initial_values) != problem.num_phases:
        out.append("initial_conditions: need one callback per phase")
    if problem.domain.dim != problem.ambient_dim:
        out.append("domain: bounds dimension must match ambient_dim")

    # initial interface strictly inside the domain along the motion axis
    if problem.param_dim == 1:
        params0 = np.array([[t0]])
    else:
        grid = np.linspace(0.0, 1.0, 17)
        if problem.boundary_param is ParamKind.GRAPH:
            lo, hi = problem.domain.bounds[problem.graph_axis]
            grid = lo + (hi - lo) * grid
        else:
            grid = 2.0 * np.pi * grid
        params0 = np.column_stack([grid, np.full_like(grid, t0)])
    r0 = problem.initial_radius(params0)
    lo = problem.domain.bounds[0][0] if problem.coords != "radial" else 0.0
    hi = problem.domain.bounds[0][1] if problem.coords != "radial" else min(b[1] for b in problem.domain.bounds)
    if not np.all((r0 > lo) & (r0 < hi)):
        out.append("initial_interface: must lie strictly inside the domain")

    if problem.exact is not None:
        out.extend(_check_exact_isotherm(problem))
    return out


def _check_exact_isotherm(problem: StefanProblem, n_times: int = 100, tol: float = 1e-12) -> list[str]:
    from .features import DerivSpec

    t0, t1 = problem.time_interval
    ts = np.linspace(t0, t1, n_times)
    if problem.param_dim == 1:
        params = ts[:, None]
    else:
        other = np.linspace(0.0, 1.0, n_times)
        if problem.boundary_param is ParamKind.GRAPH:
            lo, hi = problem.domain.bounds[problem.graph_axis]
            other = lo + (hi - lo) * other
        else:
            other = 2.0 * np.pi * other
        params = np.column_stack([other, ts])
    r = problem.exact.boundary.eval(params, DerivSpec.value(problem.param_dim - 1))
    pts = problem.interface_points(params, r)
    out = []
    for q, fld in enumerate(problem.exact.fields):
        u = fld.eval(pts, DerivSpec.value(problem.field_dim))
        worst = np.max(np.abs(u - problem.interface_temperature))
        if worst > tol:
            out.append(f"ExactSolution: phase {q + 1} violates the interface isotherm by {worst:.3e}")
    return out
