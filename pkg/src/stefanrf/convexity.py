"""Runtime convexity diagnostic for the correction stage.

Near a small-residual solution the least-squares Hessian splits into the
Gauss-Newton part ``J^T J`` (positive semi-definite) and a residual-
contracted second-derivative part coming from the quadratic interface
tiers.  By Weyl's eigenvalue inequality the subproblem is locally convex
whenever the smallest Gauss-Newton eigenvalue dominates the spectral norm
of the indefinite part; this module measures both sides and reports the
verdict.  Purely advisory: it never changes the optimization path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass(frozen=True)
class ConvexityReport:
    lambda_min_gn: float  # smallest eigenvalue of J^T J
    nl_norm_bound: float  # spectral norm of the residual-contracted Hessian
    epsilon: float
    condition_holds: bool

    @property
    def weyl_lower_bound(self) -> float:
        """Guaranteed lower bound on the smallest full-Hessian eigenvalue."""
        return self.lambda_min_gn - self.nl_norm_bound

    def as_dict(self) -> dict:
        return {
            "lambda_min_gn": self.lambda_min_gn,
            "nl_norm_bound": self.nl_norm_bound,
            "epsilon": self.epsilon,
            "condition_holds": self.condition_holds,
            "weyl_lower_bound": self.weyl_lower_bound,
        }


def symmetric_spectral_norm(matrix: np.ndarray, max_iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Largest absolute eigenvalue of a symmetric matrix by power iteration."""
    h = np.asarray(matrix, dtype=float)
    if h.size == 0 or not np.any(h):
        return 0.0
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    v = rng.standard_normal(h.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iters):
        w = h @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_new = w / norm
        lam_new = float(v_new @ (h @ v_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
        v = v_new
    return abs(lam)


def diagnose(jacobian: np.ndarray, residual: np.ndarray, second_derivative_provider, epsilon: float) -> ConvexityReport:
    """Evaluate the local-convexity condition at the current correction state.

    ``second_derivative_provider`` maps the scaled residual vector to the
    symmetric matrix ``sum_i T_i hess(T_i)`` over the quadratic tiers (see
    ``correction.nl_hessian_builder``); a precomputed matrix is accepted
    too.  The smallest ``J^T J`` eigenvalue is computed as the square of
    the smallest singular value of J, which is the numerically stable form
    of the same symmetric eigenproblem.
    """
    jac = np.asarray(jacobian, dtype=float)
    res = np.asarray(residual, dtype=float)
    try:
        singulars = np.linalg.svd(jac, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed during the convexity diagnostic: {exc}") from exc
    lambda_min = float(singulars[-1] ** 2) if jac.shape[0] >= jac.shape[1] else 0.0

    h_nl = second_derivative_provider(res) if callable(second_derivative_provider) else second_derivative_provider
    nl_norm = symmetric_spectral_norm(np.asarray(h_nl, dtype=float))
    return ConvexityReport(
        lambda_min_gn=lambda_min,
        nl_norm_bound=nl_norm,
        epsilon=float(epsilon),
        condition_holds=bool(lambda_min > nl_norm),
    )
