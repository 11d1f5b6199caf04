"""Collocation point families and their per-iteration refresh.

Six families are drawn: interior (per phase), initial (per phase), fixed
boundary (per condition), interface isotherm, initial interface, and
Stefan condition.  Interior points are rejection-sampled in the ambient
box against the current interface estimate; interface families live in
parameter space.  All draws come from counter-based Philox substreams
keyed on ``(seed, family, iteration)``, so any family is reproducible in
isolation and refreshed families change deterministically per iteration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, SamplingError
from .features import DerivSpec
from .nets import ParamKind
from .problems import StefanProblem

_MAX_BATCHES = 200

# substream tags
_T_INTERIOR = 11
_T_INITIAL = 12
_T_BOUNDARY = 13
_T_INTERFACE = 14
_T_INITIAL_IFACE = 15
_T_STEFAN = 16
_T_REDRAW = 17


def _mix(*parts: int) -> int:
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h ^= (int(p) & (2**64 - 1)) * 0xBF58476D1CE4E5B9 % 2**64
        h = (h * 0x94D049BB133111EB) % 2**64
    return h


def _rng(seed: int, tag: int, iteration: int = 0, extra: int = 0) -> np.random.Generator:
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(_mix(tag, iteration, extra))])
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class CollocationCounts:
    interior: int
    initial: int
    boundary: int
    interface: int
    initial_interface: int
    stefan: int

    def __post_init__(self):
        for name in ("interior", "initial", "boundary", "interface", "initial_interface", "stefan"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"collocation count {name} must be positive")

    @classmethod
    def from_sizes(cls, m: int, h: int) -> "CollocationCounts":
        """Default policy: overdetermined blocks, rows >= 2x columns."""
        return cls(
            interior=4 * m,
            initial=m,
            boundary=m,
            interface=2 * h,
            initial_interface=max(16, h // 8),
            stefan=2 * h,
        )

    def doubled(self) -> "CollocationCounts":
        return CollocationCounts(
            2 * self.interior, 2 * self.initial, 2 * self.boundary,
            2 * self.interface, 2 * self.initial_interface, 2 * self.stefan,
        )


@dataclass(frozen=True, eq=False)
class CollocationSet:
    problem: StefanProblem
    counts: CollocationCounts
    seed: int
    interior_points: tuple[np.ndarray, ...]  # per phase, (n, field_dim+1)
    interior_params: tuple[np.ndarray, ...]  # per phase, membership parameters
    initial_points: tuple[np.ndarray, ...]  # per phase, t = t_start
    boundary_points: tuple[np.ndarray, ...]  # per BCSpec
    interface_params: np.ndarray
    interface_normals: np.ndarray
    initial_interface_params: np.ndarray
    stefan_params: np.ndarray
    stefan_normals: np.ndarray


class _InterfaceEstimate:
    """Uniform view of 'the current interface': a callable R0 or a net."""

    def __init__(self, problem: StefanProblem, boundary=None):
        self.problem = problem
        self.boundary = boundary

    def radius(self, params: np.ndarray) -> np.ndarray:
        if self.boundary is None:
            return self.problem.initial_radius(params)
        return self.boundary.eval(params, DerivSpec.value(self.problem.param_dim - 1))

    def d_param(self, params: np.ndarray) -> np.ndarray:
        if self.boundary is None:
            step = 1e-6
            hi = params.copy()
            lo = params.copy()
            hi[:, 0] += step
            lo[:, 0] -= step
            return (self.problem.initial_radius(hi) - self.problem.initial_radius(lo)) / (2 * step)
        return self.boundary.eval(params, DerivSpec.space_axis(self.problem.param_dim - 1, 0))


def _times(rng, problem, n):
    t0, t1 = problem.time_interval
    return t1 - (t1 - t0) * rng.random(n)  # uniform on (t0, t1]


def _interface_param_draw(rng, problem, n, at_t0=False):
    t0, _ = problem.time_interval
    t = np.full(n, t0) if at_t0 else _times(rng, problem, n)
    kind = problem.boundary_param
    if kind is ParamKind.TIME:
        return t[:, None]
    if kind is ParamKind.GRAPH:
        lo, hi = problem.domain.bounds[problem.graph_axis]
        return np.column_stack([lo + (hi - lo) * rng.random(n), t])
    return np.column_stack([2.0 * np.pi * rng.random(n), t])


def _normals(problem, estimate, params):
    kind = problem.boundary_param
    if kind is ParamKind.GRAPH:
        ry = estimate.d_param(params)
        scale = np.sqrt(1.0 + ry**2)
        return np.column_stack([1.0 / scale, -ry / scale])
    if kind is ParamKind.ANGULAR:
        theta = params[:, 0]
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if problem.coords == "radial":
        return np.ones((params.shape[0], 1))
    sign = 1.0 if problem.phase_sides[0].value == "inside" else -1.0
    return np.full((params.shape[0], 1), sign)


def _rejection_sample(problem, estimate, phase, n, rng, at_t0=False, facet=None):
    """Draw n points of one phase, optionally restricted to a box facet."""
    got_pts, got_params = [], []
    have = 0
    for _ in range(_MAX_BATCHES):
        batch = max(2 * (n - have), 256)
        ambient = problem.domain.sample(rng, batch)
        if facet is not None and facet != "all":
            axis, side = facet
            lo, hi = problem.domain.bounds[axis]
            ambient[:, axis] = lo if side == "lo" else hi
        elif facet == "all":
            d = problem.ambient_dim
            lo = np.array([b[0] for b in problem.domain.bounds])
            hi = np.array([b[1] for b in problem.domain.bounds])
            widths = hi - lo
            areas = np.array([np.prod(np.delete(widths, ax)) for ax in range(d)])
            p = np.repeat(areas, 2)
            p = p / p.sum()
            face = rng.choice(2 * d, size=batch, p=p)
            ax = face // 2
            ambient[np.arange(batch), ax] = np.where(face % 2 == 0, lo[ax], hi[ax])
        t0 = problem.time_interval[0]
        t = np.full(batch, t0) if at_t0 else _times(rng, problem, batch)
        params = problem.membership_params(ambient, t)
        coord = problem.motion_coord(ambient)
        ok = problem.phase_contains(phase, coord, estimate.radius(params))
        if np.any(ok):
            got_pts.append(problem.reduce_points(ambient[ok], t[ok]))
            got_params.append(params[ok])
            have += int(np.count_nonzero(ok))
        if have >= n:
            pts = np.concatenate(got_pts)[:n]
            pars = np.concatenate(got_params)[:n]
            return pts, pars
    raise SamplingError(
        f"could not place {n} points for phase {phase + 1} of {problem.name!r} "
        f"within {_MAX_BATCHES} batches (degenerate geometry?)"
    )


def _split_boundary_counts(problem, total):
    per_phase = {}
    for idx, bc in enumerate(problem.boundary_conditions):
        per_phase.setdefault(bc.phase, []).append(idx)
    out = {}
    for phase, idxs in per_phase.items():
        base, rem = divmod(total, len(idxs))
        for j, idx in enumerate(idxs):
            out[idx] = base + (1 if j < rem else 0)
    return out


def sample_initial(problem: StefanProblem, counts: CollocationCounts, seed: int, boundary=None) -> CollocationSet:
    """Draw all six families.

    Phases are divided by the initial interface, or by ``boundary`` when a
    later stage samples against an already-fitted interface estimate.
    """
    estimate = _InterfaceEstimate(problem, boundary)

    interior_pts, interior_par = [], []
    for q in range(problem.num_phases):
        pts, par = _rejection_sample(problem, estimate, q, counts.interior, _rng(seed, _T_INTERIOR, extra=q))
        interior_pts.append(pts)
        interior_par.append(par)

    initial_pts = []
    for q in range(problem.num_phases):
        pts, _ = _rejection_sample(problem, estimate, q, counts.initial, _rng(seed, _T_INITIAL, extra=q), at_t0=True)
        initial_pts.append(pts)

    bc_counts = _split_boundary_counts(problem, counts.boundary)
    boundary_pts = []
    for idx, bc in enumerate(problem.boundary_conditions):
        pts, _ = _rejection_sample(
            problem, estimate, bc.phase, bc_counts[idx], _rng(seed, _T_BOUNDARY, extra=idx), facet=bc.facet
        )
        boundary_pts.append(pts)

    iface_params = _interface_param_draw(_rng(seed, _T_INTERFACE), problem, counts.interface)
    stefan_params = _interface_param_draw(_rng(seed, _T_STEFAN), problem, counts.stefan)
    fb_params = _interface_param_draw(_rng(seed, _T_INITIAL_IFACE), problem, counts.initial_interface, at_t0=True)

    return CollocationSet(
        problem=problem,
        counts=counts,
        seed=int(seed),
        interior_points=tuple(interior_pts),
        interior_params=tuple(interior_par),
        initial_points=tuple(initial_pts),
        boundary_points=tuple(boundary_pts),
        interface_params=iface_params,
        interface_normals=_normals(problem, estimate, iface_params),
        initial_interface_params=fb_params,
        stefan_params=stefan_params,
        stefan_normals=_normals(problem, estimate, stefan_params),
    )


def resample_interface(cset: CollocationSet, boundary, iteration: int, interior: str = "violators") -> CollocationSet:
    """Refresh interface-dependent families against a new boundary estimate.

    Interface and Stefan parameters are redrawn outright (fresh substream
    per iteration); interior points are treated per ``interior``:
    "violators" redraws only the points whose phase membership the new
    boundary breaks, "full" redraws every interior point.  Other families
    are untouched.
    """
    problem = cset.problem
    seed = cset.seed
    estimate = _InterfaceEstimate(problem, boundary)
    if interior not in ("violators", "full"):
        raise ConfigurationError(f"interior must be 'violators' or 'full', got {interior!r}")

    iface_params = _interface_param_draw(_rng(seed, _T_INTERFACE, iteration), problem, cset.counts.interface)
    stefan_params = _interface_param_draw(_rng(seed, _T_STEFAN, iteration), problem, cset.counts.stefan)

    new_interior_pts, new_interior_par = [], []
    for q in range(problem.num_phases):
        pts = cset.interior_points[q]
        par = cset.interior_params[q]
        if interior == "full":
            rng = _rng(seed, _T_REDRAW, iteration, extra=q)
            fresh_pts, fresh_par = _rejection_sample(problem, estimate, q, pts.shape[0], rng)
            new_interior_pts.append(fresh_pts)
            new_interior_par.append(fresh_par)
            continue
        r_hat = estimate.radius(par)
        ok = problem.phase_contains(q, pts[:, 0], r_hat)
        n_bad = int(np.count_nonzero(~ok))
        if n_bad == 0:
            new_interior_pts.append(pts)
            new_interior_par.append(par)
            continue
        rng = _rng(seed, _T_REDRAW, iteration, extra=q)
        fresh_pts, fresh_par = _rejection_sample(problem, estimate, q, n_bad, rng)
        pts = pts.copy()
        par = par.copy()
        pts[~ok] = fresh_pts
        par[~ok] = fresh_par
        new_interior_pts.append(pts)
        new_interior_par.append(par)

    return replace(
        cset,
        interior_points=tuple(new_interior_pts),
        interior_params=tuple(new_interior_par),
        interface_params=iface_params,
        interface_normals=_normals(problem, estimate, iface_params),
        stefan_params=stefan_params,
        stefan_normals=_normals(problem, estimate, stefan_params),
    )


def export_csv(cset: CollocationSet, path) -> None:
    """Dump every family for offline visualization."""
    problem = cset.problem
    fdim = problem.field_dim
    coord_cols = [f"c{i}" for i in range(fdim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "phase", *coord_cols, "t", "n0", "n1"])

        def rows(family, phase, pts, normals=None):
            for i in range(pts.shape[0]):
                n0 = normals[i, 0] if normals is not None else ""
                n1 = normals[i, 1] if normals is not None and normals.shape[1] > 1 else ""
                writer.writerow([family, phase, *pts[i, :fdim], pts[i, -1], n0, n1])

        for q in range(problem.num_phases):
            rows("interior", q + 1, cset.interior_points[q])
            rows("initial", q + 1, cset.initial_points[q])
        for idx, bc in enumerate(problem.boundary_conditions):
            rows(f"boundary{idx}", bc.phase + 1, cset.boundary_points[idx])

        def iface_rows(family, params, normals):
            for i in range(params.shape[0]):
                coords = [params[i, 0] if params.shape[1] > 1 else ""] + [""] * (fdim - 1)
                n1 = normals[i, 1] if normals.shape[1] > 1 else ""
                writer.writerow([family, "", *coords[:fdim], params[i, -1], normals[i, 0], n1])

        iface_rows("interface", cset.interface_params, cset.interface_normals)
        iface_rows("stefan", cset.stefan_params, cset.stefan_normals)
        fb_norm = np.zeros((cset.initial_interface_params.shape[0], 1))
        iface_rows("initial_interface", cset.initial_interface_params, fb_norm)
