"""Residual stack and block Jacobian for the base (stage-1) solve.

The trainable vector is ``eta = (alpha_1[, alpha_2], gamma)``.  Rows are
grouped in a fixed order -- PDE, initial, fixed boundary, interface
isotherm, initial interface, Stefan -- and each block's rows are scaled by
``sqrt(beta / N)`` so that ``||T||^2`` reproduces the weighted mean-square
loss while the Gauss-Newton machinery stays unweighted.

Residual evaluation works on any object with ``eval(points, spec)``
(networks or closed-form solutions); Jacobians additionally require
feature-based networks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapabilityError, ConfigurationError
from .features import DerivSpec, FeatureBlock
from .nets import BoundaryNet, FieldNet, ParamKind
from .problems import BCSpec, StefanProblem

VALUE = DerivSpec.value
TIME = DerivSpec.time
AXIS = DerivSpec.space_axis


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for the six loss families (per phase where applicable)."""

    pde: tuple[float, ...]
    initial: tuple[float, ...]
    boundary: tuple[float, ...]
    interface: tuple[float, ...]
    initial_interface: float = 1.0
    stefan: float = 1.0

    def __post_init__(self):
        flat = [*self.pde, *self.initial, *self.boundary, *self.interface, self.initial_interface, self.stefan]
        if any(w < 0 for w in flat):
            raise ConfigurationError("loss weights must be non-negative")
        if not any(w > 0 for w in flat):
            raise ConfigurationError("at least one loss weight must be positive")

    @classmethod
    def ones(cls, num_phases: int) -> "LossWeights":
        one = (1.0,) * num_phases
        return cls(pde=one, initial=one, boundary=one, interface=one)


@dataclass(frozen=True, eq=False)
class ResidualStack:
    values: np.ndarray
    blocks: dict[str, slice]

    @property
    def loss(self) -> float:
        return float(self.values @ self.values)

    def block(self, name: str) -> np.ndarray:
        return self.values[self.blocks[name]]


@dataclass(frozen=True, eq=False)
class JacobianStack:
    matrix: np.ndarray
    blocks: dict[str, slice]
    col_slices: dict[str, slice]
    structural_zeros: tuple[tuple[str, str], ...]

    def block(self, row_name: str, col_name: str) -> np.ndarray:
        return self.matrix[self.blocks[row_name], self.col_slices[col_name]]


@dataclass(frozen=True)
class ParamLayout:
    """Column layout of the concatenated trainable vector."""

    field_sizes: tuple[int, ...]
    boundary_size: int

    @classmethod
    def for_nets(cls, fields, boundary) -> "ParamLayout":
        return cls(tuple(f.layer.num_features for f in fields), boundary.layer.num_features)

    @property
    def total(self) -> int:
        return sum(self.field_sizes) + self.boundary_size

    def alpha_slice(self, q: int) -> slice:
        start = sum(self.field_sizes[:q])
        return slice(start, start + self.field_sizes[q])

    @property
    def gamma_slice(self) -> slice:
        start = sum(self.field_sizes)
        return slice(start, start + self.boundary_size)

    def col_slices(self) -> dict[str, slice]:
        out = {f"alpha_{q + 1}": self.alpha_slice(q) for q in range(len(self.field_sizes))}
        out["gamma"] = self.gamma_slice
        return out

    def pack(self, fields, boundary) -> np.ndarray:
        return np.concatenate([*(f.coeffs for f in fields), boundary.coeffs])

    def unpack(self, eta, fields, boundary):
        new_fields = tuple(f.with_coeffs(eta[self.alpha_slice(q)]) for q, f in enumerate(fields))
        return new_fields, boundary.with_coeffs(eta[self.gamma_slice])


class BlockEval:
    """Evaluator bound to one point family, caching features for networks."""

    def __init__(self, evaluator, points):
        self.points = np.asarray(points, dtype=float)
        self._ev = evaluator
        if isinstance(evaluator, (FieldNet, BoundaryNet)):
            self._block = FeatureBlock(evaluator.layer, self.points)
            self._coeffs = evaluator.coeffs
        else:
            self._block = None

    def value(self, spec: DerivSpec) -> np.ndarray:
        if self._block is not None:
            return self._block.deriv(spec) @ self._coeffs
        return self._ev.eval(self.points, spec)

    def features(self, spec: DerivSpec) -> np.ndarray:
        if self._block is None:
            raise CapabilityError("Jacobian assembly requires feature-based networks, not closed-form evaluators")
        return self._block.deriv(spec)


def _laplacian(ev: BlockEval, problem: StefanProblem, features: bool = False):
    fdim = problem.field_dim
    get = ev.features if features else ev.value
    if problem.coords == "radial":
        r = ev.points[:, 0]
        u_rr = get(AXIS(fdim, 0, 2))
        u_r = get(AXIS(fdim, 0, 1))
        scale = problem.radial_nu / r
        return u_rr + (scale[:, None] * u_r if features else scale * u_r)
    out = get(AXIS(fdim, 0, 2))
    for axis in range(1, fdim):
        out = out + get(AXIS(fdim, axis, 2))
    return out


# --- point-wise residual operations ---------------------------------------

def pde_residual(field, problem: StefanProblem, q: int, points) -> np.ndarray:
    """Heat-equation residual ``u_t - k_q lap(u)`` at interior points."""
    ev = BlockEval(field, points)
    return ev.value(TIME(problem.field_dim)) - problem.diffusivities[q] * _laplacian(ev, problem)


def initial_residual(field, problem: StefanProblem, q: int, points) -> np.ndarray:
    ev = BlockEval(field, points)
    return ev.value(VALUE(problem.field_dim)) - np.asarray(problem.initial_values[q](ev.points), dtype=float)


def boundary_residual(field, problem: StefanProblem, bc: BCSpec, points) -> np.ndarray:
    ev = BlockEval(field, points)
    if bc.operator == "dirichlet":
        lhs = ev.value(VALUE(problem.field_dim))
    else:
        lhs = ev.value(AXIS(problem.field_dim, bc.axis))
    return lhs - np.asarray(bc.rhs(ev.points), dtype=float)


def interface_isotherm_residual(field, boundary, problem: StefanProblem, params) -> np.ndarray:
    """Phase value on the moving boundary minus the interface temperature."""
    b = BlockEval(boundary, params)
    r = b.value(VALUE(problem.param_dim - 1))
    x = problem.interface_points(b.points, r)
    ev = BlockEval(field, x)
    return ev.value(VALUE(problem.field_dim)) - problem.interface_temperature


def initial_interface_residual(boundary, problem: StefanProblem, params) -> np.ndarray:
    b = BlockEval(boundary, params)
    return b.value(VALUE(problem.param_dim - 1)) - problem.initial_radius(b.points)


def _stefan_normal_derivative(ev: BlockEval, problem, r_y=None, features=False):
    fdim = problem.field_dim
    get = ev.features if features else ev.value
    d_pos = get(AXIS(fdim, 0))
    if problem.boundary_param is ParamKind.GRAPH:
        d_y = get(AXIS(fdim, problem.graph_axis))
        factor = r_y[:, None] if features else r_y
        return d_pos - d_y * factor
    return d_pos


def stefan_residual(fields, boundary, problem: StefanProblem, params) -> np.ndarray:
    """Flux condition residual on the moving boundary (see StefanSpec)."""
    spec = problem.stefan
    if spec.kind == "flux_jump" and problem.boundary_param is ParamKind.GRAPH:
        raise CapabilityError("flux-jump conditions on graph interfaces are not supported")
    pdim_s = problem.param_dim - 1
    b = BlockEval(boundary, params)
    r = b.value(VALUE(pdim_s))
    x = problem.interface_points(b.points, r)
    r_y = b.value(AXIS(pdim_s, 0)) if problem.boundary_param is ParamKind.GRAPH else None

    res = np.zeros(x.shape[0])
    if spec.dRdt_coeff:
        res = res + spec.dRdt_coeff * b.value(TIME(pdim_s))
    for q, c in enumerate(spec.flux_coeffs):
        if c == 0.0:
            continue
        ev = BlockEval(fields[q], x)
        res = res + c * _stefan_normal_derivative(ev, problem, r_y)
    if spec.rhs is not None:
        res = res - spec.rhs.value_at(x)
    return res


# --- stacked assembly -------------------------------------------------------

def _block_plan(problem: StefanProblem, colloc, weights: LossWeights):
    """Row blocks in canonical order with their sqrt(beta/N) scales."""
    plan = []
    for q in range(problem.num_phases):
        n = colloc.interior_points[q].shape[0]
        plan.append((f"pde_q{q + 1}", weights.pde[q], n))
    for q in range(problem.num_phases):
        n = colloc.initial_points[q].shape[0]
        plan.append((f"init_q{q + 1}", weights.initial[q], n))
    bc_phase_totals = {}
    for idx, bc in enumerate(problem.boundary_conditions):
        bc_phase_totals[bc.phase] = bc_phase_totals.get(bc.phase, 0) + colloc.boundary_points[idx].shape[0]
    for q in range(problem.num_phases):
        if weights.boundary[q] > 0 and problem.boundary_conditions and bc_phase_totals.get(q, 0) == 0:
            raise ConfigurationError(f"boundary family for phase {q + 1} is empty but its weight is positive")
    for idx, bc in enumerate(problem.boundary_conditions):
        n_phase = bc_phase_totals[bc.phase]
        plan.append((f"bc{idx}_q{bc.phase + 1}", weights.boundary[bc.phase], n_phase))
    for q in range(problem.num_phases):
        plan.append((f"iface_q{q + 1}", weights.interface[q], colloc.interface_params.shape[0]))
    plan.append(("iface0", weights.initial_interface, colloc.initial_interface_params.shape[0]))
    plan.append(("stefan", weights.stefan, colloc.stefan_params.shape[0]))
    for name, beta, n in plan:
        if beta > 0 and n == 0:
            raise ConfigurationError(f"collocation family {name!r} is empty but its weight is positive")
    return [(name, np.sqrt(beta / n) if n else 0.0) for name, beta, n in plan]


def _assemble_impl(problem, fields, boundary, colloc, weights, want_jacobian):
    if len(fields) != problem.num_phases:
        raise ConfigurationError(f"expected {problem.num_phases} field evaluators, got {len(fields)}")
    scales = dict(_block_plan(problem, colloc, weights))
    fdim = problem.field_dim
    pdim_s = problem.param_dim - 1
    layout = ParamLayout.for_nets(fields, boundary) if want_jacobian else None

    res_parts: list[tuple[str, np.ndarray]] = []
    jac_parts: dict[str, dict[str, np.ndarray]] = {}
    zero_cols: list[tuple[str, str]] = []

    def emit(name, res, jac_cols=None):
        res_parts.append((name, scales[name] * res))
        if want_jacobian:
            jac_parts[name] = {col: scales[name] * mat for col, mat in (jac_cols or {}).items()}
            for col in layout.col_slices():
                if col not in (jac_cols or {}):
                    zero_cols.append((name, col))

    # PDE rows
    for q in range(problem.num_phases):
        pts = colloc.interior_points[q]
        ev = BlockEval(fields[q], pts)
        res = ev.value(TIME(fdim)) - problem.diffusivities[q] * _laplacian(ev, problem)
        cols = None
        if want_jacobian:
            feats = ev.features(TIME(fdim)) - problem.diffusivities[q] * _laplacian(ev, problem, features=True)
            cols = {f"alpha_{q + 1}": feats}
        emit(f"pde_q{q + 1}", res, cols)

    # initial rows
    for q in range(problem.num_phases):
        pts = colloc.initial_points[q]
        ev = BlockEval(fields[q], pts)
        res = ev.value(VALUE(fdim)) - np.asarray(problem.initial_values[q](ev.points), dtype=float)
        cols = {f"alpha_{q + 1}": ev.features(VALUE(fdim))} if want_jacobian else None
        emit(f"init_q{q + 1}", res, cols)

    # fixed-boundary rows
    for idx, bc in enumerate(problem.boundary_conditions):
        pts = colloc.boundary_points[idx]
        ev = BlockEval(fields[bc.phase], pts)
        spec = VALUE(fdim) if bc.operator == "dirichlet" else AXIS(fdim, bc.axis)
        res = ev.value(spec) - np.asarray(bc.rhs(ev.points), dtype=float)
        cols = {f"alpha_{bc.phase + 1}": ev.features(spec)} if want_jacobian else None
        emit(f"bc{idx}_q{bc.phase + 1}", res, cols)

    # interface isotherm rows
    b_if = BlockEval(boundary, colloc.interface_params)
    r_if = b_if.value(VALUE(pdim_s))
    x_if = problem.interface_points(b_if.points, r_if)
    psi_if = b_if.features(VALUE(pdim_s)) if want_jacobian else None
    for q in range(problem.num_phases):
        ev = BlockEval(fields[q], x_if)
        res = ev.value(VALUE(fdim)) - problem.interface_temperature
        cols = None
        if want_jacobian:
            u_pos = ev.value(AXIS(fdim, 0))
            cols = {f"alpha_{q + 1}": ev.features(VALUE(fdim)), "gamma": u_pos[:, None] * psi_if}
        emit(f"iface_q{q + 1}", res, cols)

    # initial interface rows
    b_fb = BlockEval(boundary, colloc.initial_interface_params)
    res = b_fb.value(VALUE(pdim_s)) - problem.initial_radius(b_fb.points)
    cols = {"gamma": b_fb.features(VALUE(pdim_s))} if want_jacobian else None
    emit("iface0", res, cols)

    # Stefan rows
    spec = problem.stefan
    if spec.kind == "flux_jump" and problem.boundary_param is ParamKind.GRAPH:
        raise CapabilityError("flux-jump conditions on graph interfaces are not supported")
    b_sc = BlockEval(boundary, colloc.stefan_params)
    r_sc = b_sc.value(VALUE(pdim_s))
    x_sc = problem.interface_points(b_sc.points, r_sc)
    graph = problem.boundary_param is ParamKind.GRAPH
    r_y = b_sc.value(AXIS(pdim_s, 0)) if graph else None
    n_sc = x_sc.shape[0]

    res = np.zeros(n_sc)
    if spec.dRdt_coeff:
        res = res + spec.dRdt_coeff * b_sc.value(TIME(pdim_s))
    cols = {} if want_jacobian else None
    if want_jacobian:
        psi = b_sc.features(VALUE(pdim_s))
        gamma_block = np.zeros((n_sc, layout.boundary_size))
        if spec.dRdt_coeff:
            gamma_block += spec.dRdt_coeff * b_sc.features(TIME(pdim_s))
    for q, c in enumerate(spec.flux_coeffs):
        ev = BlockEval(fields[q], x_sc)
        res = res + c * _stefan_normal_derivative(ev, problem, r_y)
        if want_jacobian:
            cols[f"alpha_{q + 1}"] = c * _stefan_normal_derivative(ev, problem, r_y, features=True)
            u_pos2 = ev.value(AXIS(fdim, 0, 2))
            if graph:
                u_xy = ev.value(DerivSpec.mixed(fdim, {0: 1, problem.graph_axis: 1}))
                u_y = ev.value(AXIS(fdim, problem.graph_axis))
                psi_y = b_sc.features(AXIS(pdim_s, 0))
                gamma_block += c * ((u_pos2 - u_xy * r_y)[:, None] * psi - u_y[:, None] * psi_y)
            else:
                gamma_block += c * u_pos2[:, None] * psi
    if spec.rhs is not None:
        res = res - spec.rhs.value_at(x_sc)
        if want_jacobian:
            gamma_block -= spec.rhs.dpos_at(x_sc)[:, None] * psi
    if want_jacobian:
        cols["gamma"] = gamma_block
    emit("stefan", res, cols)

    # stitch blocks together
    offsets = {}
    start = 0
    for name, vec in res_parts:
        offsets[name] = slice(start, start + vec.shape[0])
        start += vec.shape[0]
    values = np.concatenate([vec for _, vec in res_parts])
    stack = ResidualStack(values=values, blocks=offsets)
    if not want_jacobian:
        return stack, None

    matrix = np.zeros((values.shape[0], layout.total))
    col_slices = layout.col_slices()
    for name, colmap in jac_parts.items():
        rows = offsets[name]
        for col, mat in colmap.items():
            matrix[rows, col_slices[col]] = mat
    jac = JacobianStack(
        matrix=matrix,
        blocks=offsets,
        col_slices=col_slices,
        structural_zeros=tuple(zero_cols),
    )
    return stack, jac


def assemble(problem, fields, boundary, colloc, weights: LossWeights):
    """Stacked residual vector and its squared norm (the scalar loss)."""
    stack, _ = _assemble_impl(problem, fields, boundary, colloc, weights, want_jacobian=False)
    return stack, stack.loss


def assemble_jacobian(problem, fields, boundary, colloc, weights: LossWeights) -> JacobianStack:
    """Analytic Jacobian of the stacked residual w.r.t. (alpha_1[, alpha_2], gamma)."""
    _, jac = _assemble_impl(problem, fields, boundary, colloc, weights, want_jacobian=True)
    return jac


def assemble_both(problem, fields, boundary, colloc, weights: LossWeights):
    return _assemble_impl(problem, fields, boundary, colloc, weights, want_jacobian=True)


def dump_system(stack: ResidualStack, jac: JacobianStack, prefix) -> None:
    """Write T and J as .npy files plus a JSON header with shapes/offsets."""
    prefix = Path(prefix)
    np.save(str(prefix) + "_T.npy", stack.values)
    np.save(str(prefix) + "_J.npy", jac.matrix)
    header = {
        "n_rows": int(stack.values.shape[0]),
        "n_cols": int(jac.matrix.shape[1]),
        "row_blocks": {k: [v.start, v.stop] for k, v in stack.blocks.items()},
        "col_blocks": {k: [v.start, v.stop] for k, v in jac.col_slices.items()},
    }
    Path(str(prefix) + "_header.json").write_text(json.dumps(header, indent=2))
