"""Stage 2: scaled perturbation correction around a frozen base solution.

The refined solution is ``u = u_base + eps * u_corr`` per phase and
``R = R_base + eps * R_corr``, with ``eps`` set to the magnitude of the
stage-1 loss.  Linear conditions (PDE, initial, fixed boundary, initial
interface) carry the ansatz exactly; conditions living *on* the moving
boundary are Taylor-expanded about the base interface position through
second order in ``eps``.  Every residual row is divided by ``eps``, which
keeps the correction coefficients and the Jacobian O(1) however small the
base residual is.

Interface expansions use only derivatives along the interface's motion
axis (field axis 0) plus, for graph interfaces ``x = R(y, t)``, the slope
coupling terms; third derivatives of the base fields enter the Stefan
rows analytically, never by finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .assembly import (
    BlockEval,
    JacobianStack,
    LossWeights,
    ParamLayout,
    ResidualStack,
    _block_plan,
    _laplacian,
)
from .collocation import CollocationCounts, resample_interface, sample_initial
from .errors import CapabilityError, ConfigurationError
from .features import DerivSpec
from .gauss_newton import GNConfig, GNReport, minimize
from .nets import BoundaryNet, FieldNet, ParamKind, net_from_payload, net_payload
from .problems import StefanProblem
from .solve import Stage1Result, build_nets, seed_mix

VALUE = DerivSpec.value
TIME = DerivSpec.time
AXIS = DerivSpec.space_axis
MIXED = DerivSpec.mixed

DEFAULT_EPSILON_FLOOR = 1e-30


def compute_epsilon(stage1_loss: float, floor: float = DEFAULT_EPSILON_FLOOR) -> float:
    """Perturbation scale: the base loss magnitude, floored away from zero."""
    if floor <= 0:
        raise ConfigurationError(f"epsilon floor must be positive, got {floor}")
    return max(abs(float(stage1_loss)), float(floor))


@dataclass(frozen=True, eq=False)
class PerturbationState:
    """Frozen base networks plus the trainable correction networks."""

    epsilon: float
    base_fields: tuple[FieldNet, ...]
    base_boundary: BoundaryNet
    correction_fields: tuple[FieldNet, ...]
    correction_boundary: BoundaryNet

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        base_seeds = {f.layer.seed for f in self.base_fields} | {self.base_boundary.layer.seed}
        corr_seeds = {f.layer.seed for f in self.correction_fields} | {self.correction_boundary.layer.seed}
        if base_seeds & corr_seeds:
            raise ConfigurationError("correction layers must use seeds distinct from the base layers")

    def with_xi(self, xi: np.ndarray, layout: ParamLayout) -> "PerturbationState":
        fields, boundary = layout.unpack(xi, self.correction_fields, self.correction_boundary)
        return replace(self, correction_fields=fields, correction_boundary=boundary)

    def xi(self, layout: ParamLayout) -> np.ndarray:
        return layout.pack(self.correction_fields, self.correction_boundary)


class ComposedField:
    """Evaluator for ``base + eps * correction``; supports every shared derivative."""

    def __init__(self, base, correction, epsilon: float):
        self.base = base
        self.correction = correction
        self.epsilon = float(epsilon)

    def eval(self, points, spec: DerivSpec) -> np.ndarray:
        return self.base.eval(points, spec) + self.epsilon * self.correction.eval(points, spec)


class ComposedBoundary(ComposedField):
    @property
    def param_kind(self) -> ParamKind:
        return self.base.param_kind


def compose(state: PerturbationState):
    """Refined evaluators ``u_base + eps u_corr`` and ``R_base + eps R_corr``."""
    fields = tuple(
        ComposedField(b, c, state.epsilon) for b, c in zip(state.base_fields, state.correction_fields)
    )
    boundary = ComposedBoundary(state.base_boundary, state.correction_boundary, state.epsilon)
    return fields, boundary


def make_correction_state(
    problem: StefanProblem,
    stage1: Stage1Result,
    size_factor: int = 2,
    epsilon_floor: float = DEFAULT_EPSILON_FLOOR,
    seed: Optional[int] = None,
) -> PerturbationState:
    """Fresh, larger correction networks around the frozen stage-1 result.

    Layer sizes are ``size_factor`` times the base sizes (default doubled)
    and reuse the base sampling ranges; seeds are decorrelated from the
    base seeds.
    """
    seed = stage1.seed if seed is None else seed
    m2 = size_factor * stage1.m
    h2 = size_factor * stage1.h
    u_ranges = tuple(f.layer.weight_range for f in stage1.fields)
    corr_fields, corr_boundary = build_nets(
        problem, m2, h2, seed,
        u_weight_ranges=u_ranges,
        u_bias_range=stage1.fields[0].layer.bias_range,
        r_weight_range=stage1.boundary.layer.weight_range,
        r_bias_range=stage1.boundary.layer.bias_range,
        seed_tag=7919,  # decorrelates from stage-1 layer seeds
    )
    return PerturbationState(
        epsilon=compute_epsilon(stage1.loss, epsilon_floor),
        base_fields=stage1.fields,
        base_boundary=stage1.boundary,
        correction_fields=corr_fields,
        correction_boundary=corr_boundary,
    )


# --- scaled residual and Jacobian assembly ----------------------------------

def _assemble_pc_impl(problem, state, colloc, weights, want_jacobian, include_quadratic=True):
    eps = state.epsilon
    fdim = problem.field_dim
    pdim_s = problem.param_dim - 1
    scales = {name: s / eps for name, s in _block_plan(problem, colloc, weights)}
    layout = ParamLayout.for_nets(state.correction_fields, state.correction_boundary)
    col_names = layout.col_slices()

    res_parts: list[tuple[str, np.ndarray]] = []
    jac_parts: dict[str, dict[str, np.ndarray]] = {}
    zero_cols: list[tuple[str, str]] = []

    def emit(name, raw_res, raw_cols=None):
        res_parts.append((name, scales[name] * raw_res))
        if want_jacobian:
            jac_parts[name] = {col: scales[name] * mat for col, mat in (raw_cols or {}).items()}
            for col in col_names:
                if col not in (raw_cols or {}):
                    zero_cols.append((name, col))

    # PDE rows: the heat operator is linear, so the ansatz expands exactly
    # and the quadratic tier is identically zero.
    for q in range(problem.num_phases):
        pts = colloc.interior_points[q]
        k = problem.diffusivities[q]
        base = BlockEval(state.base_fields[q], pts)
        corr = BlockEval(state.correction_fields[q], pts)
        raw = (base.value(TIME(fdim)) - k * _laplacian(base, problem)) + eps * (
            corr.value(TIME(fdim)) - k * _laplacian(corr, problem)
        )
        cols = None
        if want_jacobian:
            cols = {f"alpha_{q + 1}": eps * (corr.features(TIME(fdim)) - k * _laplacian(corr, problem, features=True))}
        emit(f"pde_q{q + 1}", raw, cols)

    for q in range(problem.num_phases):
        pts = colloc.initial_points[q]
        base = BlockEval(state.base_fields[q], pts)
        corr = BlockEval(state.correction_fields[q], pts)
        g = np.asarray(problem.initial_values[q](base.points), dtype=float)
        raw = base.value(VALUE(fdim)) - g + eps * corr.value(VALUE(fdim))
        cols = {f"alpha_{q + 1}": eps * corr.features(VALUE(fdim))} if want_jacobian else None
        emit(f"init_q{q + 1}", raw, cols)

    for idx, bc in enumerate(problem.boundary_conditions):
        pts = colloc.boundary_points[idx]
        base = BlockEval(state.base_fields[bc.phase], pts)
        corr = BlockEval(state.correction_fields[bc.phase], pts)
        spec = VALUE(fdim) if bc.operator == "dirichlet" else AXIS(fdim, bc.axis)
        h = np.asarray(bc.rhs(base.points), dtype=float)
        raw = base.value(spec) - h + eps * corr.value(spec)
        cols = {f"alpha_{bc.phase + 1}": eps * corr.features(spec)} if want_jacobian else None
        emit(f"bc{idx}_q{bc.phase + 1}", raw, cols)

    # interface isotherm rows, expanded about the base interface position
    quad = 1.0 if include_quadratic else 0.0
    params_if = colloc.interface_params
    bb = BlockEval(state.base_boundary, params_if)
    cb = BlockEval(state.correction_boundary, params_if)
    r_base = bb.value(VALUE(pdim_s))
    x_if = problem.interface_points(bb.points, r_base)
    p_corr = cb.value(VALUE(pdim_s))
    psi_if = cb.features(VALUE(pdim_s)) if want_jacobian else None
    for q in range(problem.num_phases):
        base = BlockEval(state.base_fields[q], x_if)
        corr = BlockEval(state.correction_fields[q], x_if)
        u0 = base.value(VALUE(fdim)) - problem.interface_temperature
        u0_p = base.value(AXIS(fdim, 0))
        u0_pp = base.value(AXIS(fdim, 0, 2))
        v = corr.value(VALUE(fdim))
        v_p = corr.value(AXIS(fdim, 0))
        raw = (
            u0
            + eps * (p_corr * u0_p + v)
            + quad * eps**2 * (0.5 * p_corr**2 * u0_pp + p_corr * v_p)
        )
        cols = None
        if want_jacobian:
            phi = corr.features(VALUE(fdim))
            phi_p = corr.features(AXIS(fdim, 0))
            d_lam = eps * phi + quad * eps**2 * p_corr[:, None] * phi_p
            d_th = (
                eps * u0_p[:, None] * psi_if
                + quad * eps**2 * (v_p + p_corr * u0_pp)[:, None] * psi_if
            )
            cols = {f"alpha_{q + 1}": d_lam, "gamma": d_th}
        emit(f"iface_q{q + 1}", raw, cols)

    # initial interface rows (linear in the ansatz)
    params_fb = colloc.initial_interface_params
    bb0 = BlockEval(state.base_boundary, params_fb)
    cb0 = BlockEval(state.correction_boundary, params_fb)
    raw = bb0.value(VALUE(pdim_s)) - problem.initial_radius(bb0.points) + eps * cb0.value(VALUE(pdim_s))
    cols = {"gamma": eps * cb0.features(VALUE(pdim_s))} if want_jacobian else None
    emit("iface0", raw, cols)

    # Stefan rows
    raw, cols = _stefan_pc(problem, state, colloc, want_jacobian, quad)
    emit("stefan", raw, cols)

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
    for name, colmap in jac_parts.items():
        for col, mat in colmap.items():
            matrix[offsets[name], col_names[col]] = mat
    jac = JacobianStack(matrix=matrix, blocks=offsets, col_slices=col_names, structural_zeros=tuple(zero_cols))
    return stack, jac


def _stefan_pc(problem, state, colloc, want_jacobian, quad):
    """Three-tier expansion of the flux condition about the base interface."""
    spec = problem.stefan
    if spec.kind == "flux_jump" and problem.boundary_param is ParamKind.GRAPH:
        raise CapabilityError("flux-jump conditions on graph interfaces are not supported")
    eps = state.epsilon
    fdim = problem.field_dim
    pdim_s = problem.param_dim - 1
    graph = problem.boundary_param is ParamKind.GRAPH

    params = colloc.stefan_params
    bb = BlockEval(state.base_boundary, params)
    cb = BlockEval(state.correction_boundary, params)
    r_base = bb.value(VALUE(pdim_s))
    x = problem.interface_points(bb.points, r_base)
    n_pts = x.shape[0]

    p_c = cb.value(VALUE(pdim_s))
    p_t = cb.value(TIME(pdim_s))
    r_t = bb.value(TIME(pdim_s))

    if spec.rhs is not None:
        h0 = spec.rhs.value_at(x)
        h_x = spec.rhs.dpos_at(x)
        h_xx = spec.rhs.d2pos_at(x)
    else:
        h0 = h_x = h_xx = np.zeros(n_pts)

    tier0 = spec.dRdt_coeff * r_t - h0
    tier1 = spec.dRdt_coeff * p_t - p_c * h_x
    tier2 = -0.5 * p_c**2 * h_xx

    lam_cols = {}
    if want_jacobian:
        psi = cb.features(VALUE(pdim_s))
        psi_t = cb.features(TIME(pdim_s))
        th1 = spec.dRdt_coeff * psi_t - h_x[:, None] * psi
        th2 = -(p_c * h_xx)[:, None] * psi

    if graph:
        r_y = bb.value(AXIS(pdim_s, 0))
        p_y = cb.value(AXIS(pdim_s, 0))
        if want_jacobian:
            psi_y = cb.features(AXIS(pdim_s, 0))
    for q, c in enumerate(spec.flux_coeffs):
        base = BlockEval(state.base_fields[q], x)
        corr = BlockEval(state.correction_fields[q], x)
        u_x = base.value(AXIS(fdim, 0))
        u_xx = base.value(AXIS(fdim, 0, 2))
        u_xxx = base.value(AXIS(fdim, 0, 3))
        v_x = corr.value(AXIS(fdim, 0))
        v_xx = corr.value(AXIS(fdim, 0, 2))
        if not graph:
            tier0 = tier0 + c * u_x
            tier1 = tier1 + c * (v_x + p_c * u_xx)
            tier2 = tier2 + c * (p_c * v_xx + 0.5 * p_c**2 * u_xxx)
            if want_jacobian:
                phi_x = corr.features(AXIS(fdim, 0))
                phi_xx = corr.features(AXIS(fdim, 0, 2))
                lam_cols[f"alpha_{q + 1}"] = eps * c * phi_x + quad * eps**2 * c * p_c[:, None] * phi_xx
                th1 = th1 + c * (u_xx[:, None] * psi)
                th2 = th2 + c * (v_xx + p_c * u_xxx)[:, None] * psi
        else:
            g_ax = problem.graph_axis
            u_y = base.value(AXIS(fdim, g_ax))
            u_xy = base.value(MIXED(fdim, {0: 1, g_ax: 1}))
            u_xxy = base.value(MIXED(fdim, {0: 2, g_ax: 1}))
            v_y = corr.value(AXIS(fdim, g_ax))
            v_xy = corr.value(MIXED(fdim, {0: 1, g_ax: 1}))
            tier0 = tier0 + c * (u_x - u_y * r_y)
            tier1 = tier1 + c * ((v_x + p_c * u_xx) - (v_y + p_c * u_xy) * r_y - u_y * p_y)
            tier2 = tier2 + c * (
                (p_c * v_xx + 0.5 * p_c**2 * u_xxx)
                - (p_c * v_xy + 0.5 * p_c**2 * u_xxy) * r_y
                - (v_y + p_c * u_xy) * p_y
            )
            if want_jacobian:
                phi_x = corr.features(AXIS(fdim, 0))
                phi_y = corr.features(AXIS(fdim, g_ax))
                phi_xx = corr.features(AXIS(fdim, 0, 2))
                phi_xy = corr.features(MIXED(fdim, {0: 1, g_ax: 1}))
                d1 = phi_x - phi_y * r_y[:, None]
                d2 = p_c[:, None] * (phi_xx - phi_xy * r_y[:, None]) - phi_y * p_y[:, None]
                lam_cols[f"alpha_{q + 1}"] = eps * c * d1 + quad * eps**2 * c * d2
                th1 = th1 + c * ((u_xx - u_xy * r_y)[:, None] * psi - u_y[:, None] * psi_y)
                th2 = th2 + c * (
                    (v_xx + p_c * u_xxx - (v_xy + p_c * u_xxy) * r_y - u_xy * p_y)[:, None] * psi
                    - (v_y + p_c * u_xy)[:, None] * psi_y
                )

    raw = tier0 + eps * tier1 + quad * eps**2 * tier2
    if not want_jacobian:
        return raw, None
    cols = dict(lam_cols)
    cols["gamma"] = eps * th1 + quad * eps**2 * th2
    return raw, cols


def assemble_perturbation(problem, state: PerturbationState, colloc, weights: LossWeights):
    """Scaled correction residual stack and its squared norm."""
    stack, _ = _assemble_pc_impl(problem, state, colloc, weights, want_jacobian=False)
    return stack, stack.loss


def assemble_perturbation_jacobian(
    problem, state: PerturbationState, colloc, weights: LossWeights, include_quadratic: bool = True
) -> JacobianStack:
    """Jacobian of the scaled correction residual w.r.t. (lambda_1[, lambda_2], theta)."""
    _, jac = _assemble_pc_impl(
        problem, state, colloc, weights, want_jacobian=True, include_quadratic=include_quadratic
    )
    return jac


def nl_hessian_builder(problem, state: PerturbationState, colloc, weights: LossWeights):
    """Residual-contracted second-derivative matrix for the convexity check.

    Only the quadratic interface tiers contribute: the returned callable
    maps the current scaled residual vector to
    ``H = sum_i T_i * hess_xi(T_i)``, which is linear in the residual.
    """
    eps = state.epsilon
    fdim = problem.field_dim
    pdim_s = problem.param_dim - 1
    graph = problem.boundary_param is ParamKind.GRAPH
    layout = ParamLayout.for_nets(state.correction_fields, state.correction_boundary)
    scales = dict(_block_plan(problem, colloc, weights))
    th_sl = layout.gamma_slice

    def build(t_values: np.ndarray) -> np.ndarray:
        t_values = np.asarray(t_values, dtype=float)
        h = np.zeros((layout.total, layout.total))

        # isotherm rows
        params = colloc.interface_params
        bb = BlockEval(state.base_boundary, params)
        cb = BlockEval(state.correction_boundary, params)
        x = problem.interface_points(bb.points, bb.value(VALUE(pdim_s)))
        psi = cb.features(VALUE(pdim_s))
        for q in range(problem.num_phases):
            sl = _find_block(colloc, problem, f"iface_q{q + 1}")
            w = t_values[sl] * scales[f"iface_q{q + 1}"] * eps
            base = BlockEval(state.base_fields[q], x)
            corr = BlockEval(state.correction_fields[q], x)
            u0_pp = base.value(AXIS(fdim, 0, 2))
            phi_p = corr.features(AXIS(fdim, 0))
            h[th_sl, th_sl] += psi.T @ (psi * (w * u0_pp)[:, None])
            cross = psi.T @ (phi_p * w[:, None])
            a_sl = layout.alpha_slice(q)
            h[th_sl, a_sl] += cross
            h[a_sl, th_sl] += cross.T

        # Stefan rows
        spec = problem.stefan
        params = colloc.stefan_params
        bb = BlockEval(state.base_boundary, params)
        cb = BlockEval(state.correction_boundary, params)
        x = problem.interface_points(bb.points, bb.value(VALUE(pdim_s)))
        psi = cb.features(VALUE(pdim_s))
        sl = _find_block(colloc, problem, "stefan")
        w = t_values[sl] * scales["stefan"] * eps
        h_xx = spec.rhs.d2pos_at(x) if spec.rhs is not None else np.zeros(x.shape[0])
        diag_theta = -h_xx.copy()
        if graph:
            r_y = bb.value(AXIS(pdim_s, 0))
            psi_y = cb.features(AXIS(pdim_s, 0))
        for q, c in enumerate(spec.flux_coeffs):
            base = BlockEval(state.base_fields[q], x)
            corr = BlockEval(state.correction_fields[q], x)
            a_sl = layout.alpha_slice(q)
            if not graph:
                diag_theta = diag_theta + c * base.value(AXIS(fdim, 0, 3))
                cross = psi.T @ (corr.features(AXIS(fdim, 0, 2)) * (w * c)[:, None])
            else:
                g_ax = problem.graph_axis
                u_xxx = base.value(AXIS(fdim, 0, 3))
                u_xxy = base.value(MIXED(fdim, {0: 2, g_ax: 1}))
                u_xy = base.value(MIXED(fdim, {0: 1, g_ax: 1}))
                diag_theta = diag_theta + c * (u_xxx - u_xxy * r_y)
                mixed = psi.T @ (psi_y * (w * c * u_xy)[:, None])
                h[th_sl, th_sl] -= mixed + mixed.T
                phi_slope = corr.features(MIXED(fdim, {0: 1, g_ax: 1})) * r_y[:, None]
                cross = psi.T @ ((corr.features(AXIS(fdim, 0, 2)) - phi_slope) * (w * c)[:, None])
                cross -= psi_y.T @ (corr.features(AXIS(fdim, g_ax)) * (w * c)[:, None])
            h[th_sl, a_sl] += cross
            h[a_sl, th_sl] += cross.T
        h[th_sl, th_sl] += psi.T @ (psi * (w * diag_theta)[:, None])
        return h

    return build


def _find_block(colloc, problem, name):
    """Row slice of a named block in the canonical assembly order."""
    start = 0
    for q in range(problem.num_phases):
        n = colloc.interior_points[q].shape[0]
        if name == f"pde_q{q + 1}":
            return slice(start, start + n)
        start += n
    for q in range(problem.num_phases):
        n = colloc.initial_points[q].shape[0]
        if name == f"init_q{q + 1}":
            return slice(start, start + n)
        start += n
    for idx, bc in enumerate(problem.boundary_conditions):
        n = colloc.boundary_points[idx].shape[0]
        if name == f"bc{idx}_q{bc.phase + 1}":
            return slice(start, start + n)
        start += n
    for q in range(problem.num_phases):
        n = colloc.interface_params.shape[0]
        if name == f"iface_q{q + 1}":
            return slice(start, start + n)
        start += n
    n = colloc.initial_interface_params.shape[0]
    if name == "iface0":
        return slice(start, start + n)
    start += n
    if name == "stefan":
        return slice(start, start + colloc.stefan_params.shape[0])
    raise KeyError(name)


class CorrectionAssembler:
    """Least-squares view of the correction problem for the Gauss-Newton loop."""

    def __init__(self, problem, state, colloc, weights, interior_refresh="full"):
        self.problem = problem
        self.state = state
        self.layout = ParamLayout.for_nets(state.correction_fields, state.correction_boundary)
        self.colloc = colloc
        self.weights = weights
        self.interior_refresh = interior_refresh

    def state_at(self, xi):
        return self.state.with_xi(xi, self.layout)

    def residual_jacobian(self, xi):
        state = self.state_at(xi)
        stack, jac = _assemble_pc_impl(self.problem, state, self.colloc, self.weights, want_jacobian=True)
        return stack.values, jac.matrix

    def on_step(self, xi, iteration):
        state = self.state_at(xi)
        _, boundary = compose(state)
        self.colloc = resample_interface(self.colloc, boundary, iteration, interior=self.interior_refresh)


def run_correction(
    problem: StefanProblem,
    stage1: Stage1Result,
    counts: Optional[CollocationCounts] = None,
    config: Optional[GNConfig] = None,
    weights: Optional[LossWeights] = None,
    size_factor: int = 2,
    epsilon_floor: float = DEFAULT_EPSILON_FLOOR,
    reuse_stage1_points: bool = False,
    interior_refresh: str = "full",
):
    """Solve the correction subproblem around a frozen stage-1 result.

    Fresh collocation sets are drawn at doubled counts against the base
    boundary (``reuse_stage1_points`` switches to the final stage-1 sets);
    during the loop, interface families follow the composed boundary.
    Returns ``(PerturbationState, GNReport)``; when the base loss is below
    the epsilon floor the correction is skipped with a report note.
    """
    state = make_correction_state(problem, stage1, size_factor=size_factor, epsilon_floor=epsilon_floor)
    weights = weights or stage1.weights

    if abs(stage1.loss) < epsilon_floor:
        report = GNReport(loss_history=[0.0], iterations_used=0)
        report.notes.append("correction skipped: stage-1 loss below the epsilon floor")
        return state, report

    if reuse_stage1_points:
        colloc = stage1.colloc
    else:
        counts = counts or stage1.colloc.counts.doubled()
        colloc = sample_initial(
            problem, counts, seed=seed_mix(stage1.seed, 1021), boundary=stage1.boundary
        )

    assembler = CorrectionAssembler(problem, state, colloc, weights, interior_refresh)
    config = config or GNConfig(max_iterations=15)
    if config.initial_params is None:
        config = replace_config_params(config, np.zeros(assembler.layout.total))
    xi, report = minimize(assembler, config)
    if problem.stefan.rhs is not None and problem.stefan.rhs.uses_fd:
        report.notes.append("stefan rhs derivatives fell back to finite differences")
    return assembler.state_at(xi), report


def replace_config_params(config: GNConfig, params: np.ndarray) -> GNConfig:
    return replace(config, initial_params=params)


# --- composed-solution checkpoints -------------------------------------------

def composed_payload(state: PerturbationState) -> dict:
    return {
        "kind": "composed",
        "epsilon": state.epsilon,
        "base_fields": [net_payload(f) for f in state.base_fields],
        "base_boundary": net_payload(state.base_boundary),
        "correction_fields": [net_payload(f) for f in state.correction_fields],
        "correction_boundary": net_payload(state.correction_boundary),
    }


def save_composed(path, state: PerturbationState) -> None:
    Path(path).write_text(json.dumps(composed_payload(state), indent=2))


def load_composed(path) -> PerturbationState:
    d = json.loads(Path(path).read_text())
    if d.get("kind") != "composed":
        raise ConfigurationError(f"not a composed checkpoint: {path}")
    return PerturbationState(
        epsilon=float(d["epsilon"]),
        base_fields=tuple(net_from_payload(p) for p in d["base_fields"]),
        base_boundary=net_from_payload(d["base_boundary"]),
        correction_fields=tuple(net_from_payload(p) for p in d["correction_fields"]),
        correction_boundary=net_from_payload(d["correction_boundary"]),
    )
