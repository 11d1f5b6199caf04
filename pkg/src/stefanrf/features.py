"""Random sine-feature layers with analytic space-time derivatives.

A feature layer is the frozen half of a shallow random-feature network:
weights and biases are drawn once from uniform ranges and never trained.
Every feature is ``sin(w . p + b)`` over an input ``p = (x_1..x_s, t)``
whose last coordinate is always time (a layer parameterized by time alone
has ``input_dim == 1``).  Because the k-th derivative of sine cycles
through (sin, cos, -sin, -cos), mixed derivatives up to third order in
space and first order in time are available in closed form; residual and
Jacobian assembly depends on that.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigurationError, ShapeError

MAX_SPACE_ORDER = 3
MAX_TIME_ORDER = 1


class Activation(str, enum.Enum):
    SINE = "sine"


@dataclass(frozen=True)
class DerivSpec:
    """A mixed space-time derivative request.

    ``space`` is a multi-index over the spatial coordinates (one entry per
    coordinate, excluding time); ``time_order`` differentiates the trailing
    time coordinate.  Total order is capped at 3 in space and 1 in time.
    """

    time_order: int = 0
    space: tuple[int, ...] = ()

    def __post_init__(self):
        if not all(isinstance(p, int) and p >= 0 for p in self.space):
            raise CapabilityError(f"space multi-index must be non-negative integers, got {self.space}")
        if self.time_order not in (0, 1):
            raise CapabilityError(f"time_order must be 0 or 1, got {self.time_order}")
        if sum(self.space) > MAX_SPACE_ORDER:
            raise CapabilityError(f"spatial order {sum(self.space)} exceeds supported maximum {MAX_SPACE_ORDER}")

    @property
    def total_order(self) -> int:
        return self.time_order + sum(self.space)

    @classmethod
    def value(cls, space_dim: int) -> "DerivSpec":
        return cls(0, (0,) * space_dim)

    @classmethod
    def time(cls, space_dim: int) -> "DerivSpec":
        return cls(1, (0,) * space_dim)

    @classmethod
    def space_axis(cls, space_dim: int, axis: int, order: int = 1) -> "DerivSpec":
        m = [0] * space_dim
        m[axis] = order
        return cls(0, tuple(m))

    @classmethod
    def mixed(cls, space_dim: int, orders: dict[int, int], time_order: int = 0) -> "DerivSpec":
        m = [0] * space_dim
        for axis, order in orders.items():
            m[axis] = order
        return cls(time_order, tuple(m))


@dataclass(frozen=True, eq=False)
class FeatureLayer:
    """Fixed random hidden layer: ``tau_j(p) = act(w_j . p + b_j)``."""

    num_features: int
    input_dim: int
    weights: np.ndarray  # (num_features, input_dim)
    biases: np.ndarray  # (num_features,)
    activation: Activation
    seed: int
    weight_range: tuple[float, float]
    bias_range: tuple[float, float]

    def __post_init__(self):
        self.weights.setflags(write=False)
        self.biases.setflags(write=False)


def _check_interval(name, lo, hi):
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigurationError(f"{name} must be finite, got ({lo}, {hi})")
    if lo > hi:
        raise ConfigurationError(f"{name} has min > max: ({lo}, {hi})")


def sample_layer(
    num_features: int,
    input_dim: int,
    weight_range: tuple[float, float] = (-1.0, 1.0),
    bias_range: tuple[float, float] = (-1.0, 1.0),
    seed: int = 0,
    activation: Activation = Activation.SINE,
) -> FeatureLayer:
    """Draw a feature layer with i.i.d. uniform weights and biases.

    The stream is a counter-based Philox generator keyed by ``seed`` and
    filled row-major, so feature ``j`` receives the same draws regardless
    of ``num_features``: layers are reproducible bit-for-bit and prefix
    stable.
    """
    if num_features < 1:
        raise ConfigurationError(f"num_features must be >= 1, got {num_features}")
    if input_dim < 1:
        raise ConfigurationError(f"input_dim must be >= 1, got {input_dim}")
    w_lo, w_hi = float(weight_range[0]), float(weight_range[1])
    b_lo, b_hi = float(bias_range[0]), float(bias_range[1])
    _check_interval("weight_range", w_lo, w_hi)
    _check_interval("bias_range", b_lo, b_hi)

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed & (2**64 - 1))))
    u = rng.random((num_features, input_dim + 1))
    weights = w_lo + (w_hi - w_lo) * u[:, :input_dim]
    biases = b_lo + (b_hi - b_lo) * u[:, input_dim]
    return FeatureLayer(
        num_features=num_features,
        input_dim=input_dim,
        weights=weights,
        biases=biases,
        activation=Activation(activation),
        seed=int(seed),
        weight_range=(w_lo, w_hi),
        bias_range=(b_lo, b_hi),
    )


def _as_points(points, input_dim) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != input_dim:
        raise ShapeError(f"points must have shape (n, {input_dim}), got {np.shape(points)}")
    return pts


class FeatureBlock:
    """Feature evaluations for one fixed point set.

    Caches the pre-activations and the sine/cosine tables so that the many
    derivative requests issued during residual/Jacobian assembly reuse one
    matmul and at most two trig evaluations.
    """

    def __init__(self, layer: FeatureLayer, points):
        self.layer = layer
        self.points = _as_points(points, layer.input_dim)
        self._z = self.points @ layer.weights.T + layer.biases
        self._trig: dict[int, np.ndarray] = {}

    def _sine_table(self, k: int) -> np.ndarray:
        k &= 3
        if k not in self._trig:
            base = np.sin(self._z) if k in (0, 2) else np.cos(self._z)
            self._trig[k] = -base if k in (2, 3) else base
        return self._trig[k]

    def deriv(self, spec: DerivSpec) -> np.ndarray:
        """Matrix of ``d^spec tau_j`` values, shape (n_points, num_features)."""
        layer = self.layer
        if len(spec.space) != layer.input_dim - 1:
            raise ShapeError(
                f"derivative multi-index has {len(spec.space)} entries, layer has {layer.input_dim - 1} spatial coordinates"
            )
        if layer.activation is not Activation.SINE:
            raise CapabilityError(f"unsupported activation {layer.activation}")
        table = self._sine_table(spec.total_order)
        coef = np.ones(layer.num_features)
        for axis, order in enumerate(spec.space):
            if order:
                coef = coef * layer.weights[:, axis] ** order
        if spec.time_order:
            coef = coef * layer.weights[:, -1] ** spec.time_order
        return table * coef


def eval_features(layer: FeatureLayer, points, spec: DerivSpec) -> np.ndarray:
    """Evaluate a derivative of every feature at every point.

    Entry ``(i, j)`` is the requested derivative of feature ``j`` at point
    ``i``; each differentiation multiplies by the matching weight component
    and advances the sine cycle.
    """
    return FeatureBlock(layer, points).deriv(spec)
