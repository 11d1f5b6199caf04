"""Stage-1 driver: wire networks, collocation, assembly and the optimizer."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .assembly import LossWeights, ParamLayout, assemble_both
from .collocation import CollocationCounts, CollocationSet, resample_interface, sample_initial
from .gauss_newton import GNConfig, GNReport, minimize
from .nets import BoundaryNet, FieldNet
from .problems import StefanProblem
from .features import sample_layer


def seed_mix(seed: int, tag: int) -> int:
    """Derive a decorrelated sub-seed; deterministic across runs/platforms."""
    h = (int(seed) & (2**64 - 1)) ^ ((tag & (2**64 - 1)) * 0x9E3779B97F4A7C15 % 2**64)
    return (h * 0xBF58476D1CE4E5B9) % 2**63


def build_nets(
    problem: StefanProblem,
    m: int,
    h: int,
    seed: int,
    u_weight_ranges=None,
    u_bias_range=(-1.0, 1.0),
    r_weight_range=(-1.0, 1.0),
    r_bias_range=(-1.0, 1.0),
    seed_tag: int = 0,
):
    """Zero-coefficient field and boundary networks with fresh random layers."""
    if u_weight_ranges is None:
        u_weight_ranges = ((-1.0, 1.0),) * problem.num_phases
    fields = []
    for q in range(problem.num_phases):
        layer = sample_layer(
            m, problem.field_dim + 1, u_weight_ranges[q], u_bias_range,
            seed=seed_mix(seed, 1 + q + seed_tag),
        )
        fields.append(FieldNet(layer, np.zeros(m)))
    b_layer = sample_layer(h, problem.param_dim, r_weight_range, r_bias_range, seed=seed_mix(seed, 17 + seed_tag))
    boundary = BoundaryNet(b_layer, np.zeros(h), problem.boundary_param)
    return tuple(fields), boundary


def fit_boundary_to_initial(problem: StefanProblem, boundary: BoundaryNet, n_grid: int = 400) -> BoundaryNet:
    """Least-squares fit of the boundary net to the initial interface.

    Starting the interface estimate at R_0 (extended constant in time)
    instead of the zero function keeps early Gauss-Newton steps inside a
    geometrically meaningful region; the coefficients remain free.
    """
    t0, t1 = problem.time_interval
    ts = np.linspace(t0, t1, n_grid)
    if problem.param_dim == 1:
        params = ts[:, None]
    else:
        if problem.boundary_param.value == "graph":
            lo, hi = problem.domain.bounds[problem.graph_axis]
            other = np.linspace(lo, hi, 24)
        else:
            other = np.linspace(0.0, 2.0 * np.pi, 24)
        gg, tt = np.meshgrid(other, ts[:: max(1, n_grid // 48)], indexing="ij")
        params = np.column_stack([gg.ravel(), tt.ravel()])
    target = problem.initial_radius(params)
    from .features import DerivSpec, FeatureBlock

    feats = FeatureBlock(boundary.layer, params).deriv(DerivSpec.value(problem.param_dim - 1))
    coeffs, *_ = np.linalg.lstsq(feats, target, rcond=1e-10)
    return boundary.with_coeffs(coeffs)


class Stage1Assembler:
    """Least-squares view of the base problem for the Gauss-Newton loop."""

    def __init__(self, problem, fields, boundary, colloc, weights, interior_refresh="full"):
        self.problem = problem
        self.fields0 = fields
        self.boundary0 = boundary
        self.layout = ParamLayout.for_nets(fields, boundary)
        self.colloc = colloc
        self.weights = weights
        self.interior_refresh = interior_refresh

    def nets_at(self, eta):
        return self.layout.unpack(eta, self.fields0, self.boundary0)

    def residual_jacobian(self, eta):
        fields, boundary = self.nets_at(eta)
        stack, jac = assemble_both(self.problem, fields, boundary, self.colloc, self.weights)
        return stack.values, jac.matrix

    def on_step(self, eta, iteration):
        _, boundary = self.nets_at(eta)
        self.colloc = resample_interface(self.colloc, boundary, iteration, interior=self.interior_refresh)


@dataclass(frozen=True, eq=False)
class Stage1Result:
    problem: StefanProblem
    fields: tuple[FieldNet, ...]
    boundary: BoundaryNet
    report: GNReport
    colloc: CollocationSet
    weights: LossWeights
    loss: float
    m: int
    h: int
    seed: int


def solve_stage1(
    problem: StefanProblem,
    m: int,
    h: int,
    seed: int = 0,
    counts: Optional[CollocationCounts] = None,
    weights: Optional[LossWeights] = None,
    gn: Optional[GNConfig] = None,
    u_weight_ranges=None,
    u_bias_range=(-1.0, 1.0),
    r_weight_range=(-1.0, 1.0),
    r_bias_range=(-1.0, 1.0),
    interior_refresh: str = "full",
) -> Stage1Result:
    """Fit the base networks by regularized Gauss-Newton from a zero start."""
    counts = counts or CollocationCounts.from_sizes(m, h)
    weights = weights or LossWeights.ones(problem.num_phases)
    fields, boundary = build_nets(
        problem, m, h, seed,
        u_weight_ranges=u_weight_ranges, u_bias_range=u_bias_range,
        r_weight_range=r_weight_range, r_bias_range=r_bias_range,
    )
    boundary = fit_boundary_to_initial(problem, boundary)
    colloc = sample_initial(problem, counts, seed=seed_mix(seed, 101))
    assembler = Stage1Assembler(problem, fields, boundary, colloc, weights, interior_refresh)

    gn = gn or GNConfig()
    if gn.initial_params is None:
        eta0 = np.zeros(assembler.layout.total)
        eta0[assembler.layout.gamma_slice] = boundary.coeffs
        gn = replace(gn, initial_params=eta0)
    eta, report = minimize(assembler, gn)
    fields_fit, boundary_fit = assembler.nets_at(eta)
    return Stage1Result(
        problem=problem,
        fields=fields_fit,
        boundary=boundary_fit,
        report=report,
        colloc=assembler.colloc,
        weights=weights,
        loss=report.final_loss,
        m=m,
        h=h,
        seed=int(seed),
    )
