"""Field and boundary representations: random features times trainable coefficients.

Residual assembly is written against a tiny evaluator protocol -- anything
with ``eval(points, spec) -> vector`` -- so that trained networks and
closed-form exact solutions are interchangeable.  That is what lets the
test suite push exact solutions through the full residual stack.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .errors import CapabilityError, ConfigurationError, ShapeError
from .features import Activation, DerivSpec, FeatureBlock, FeatureLayer, sample_layer


@runtime_checkable
class FieldEvaluator(Protocol):
    def eval(self, points, spec: DerivSpec) -> np.ndarray: ...


class ParamKind(str, enum.Enum):
    """How a moving boundary is parameterized.

    TIME:    R(t), scalar interface position (1D problems, radial 3D).
    GRAPH:   x = R(y, t), interface as a graph over one ambient axis.
    ANGULAR: r = R(theta, t), radial interface with angular parameter.
    """

    TIME = "time"
    GRAPH = "graph"
    ANGULAR = "angular"


_PARAM_DIMS = {ParamKind.TIME: 1, ParamKind.GRAPH: 2, ParamKind.ANGULAR: 2}


@dataclass(frozen=True, eq=False)
class FieldNet:
    """Phase-field network ``u(p) = tau(p) @ coeffs`` over (x_1..x_s, t)."""

    layer: FeatureLayer
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.layer.num_features,):
            raise ShapeError(f"coeffs must have shape ({self.layer.num_features},), got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)
        self.coeffs.setflags(write=False)

    def eval(self, points, spec: DerivSpec) -> np.ndarray:
        return FeatureBlock(self.layer, points).deriv(spec) @ self.coeffs

    def with_coeffs(self, coeffs) -> "FieldNet":
        return FieldNet(self.layer, np.array(coeffs, dtype=float))


@dataclass(frozen=True, eq=False)
class BoundaryNet:
    """Moving-boundary network ``R(p) = tau(p) @ coeffs`` over its parameters."""

    layer: FeatureLayer
    coeffs: np.ndarray
    param_kind: ParamKind

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.layer.num_features,):
            raise ShapeError(f"coeffs must have shape ({self.layer.num_features},), got {coeffs.shape}")
        expected = _PARAM_DIMS[ParamKind(self.param_kind)]
        if self.layer.input_dim != expected:
            raise ConfigurationError(
                f"param_kind {self.param_kind} needs input_dim {expected}, layer has {self.layer.input_dim}"
            )
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "param_kind", ParamKind(self.param_kind))
        self.coeffs.setflags(write=False)

    def eval(self, params, spec: DerivSpec) -> np.ndarray:
        return FeatureBlock(self.layer, params).deriv(spec) @ self.coeffs

    def with_coeffs(self, coeffs) -> "BoundaryNet":
        return BoundaryNet(self.layer, np.array(coeffs, dtype=float), self.param_kind)


def eval_field(net: FieldNet, points, spec: DerivSpec) -> np.ndarray:
    return net.eval(points, spec)


def eval_boundary(net: BoundaryNet, params, spec: DerivSpec) -> np.ndarray:
    return net.eval(params, spec)


class AnalyticField:
    """Evaluator backed by closed-form derivative callbacks.

    ``derivs`` maps a DerivSpec to a callable taking the full (n, dim)
    space-time array and returning (n,) values.  Used for exact solutions
    of the shipped benchmarks and for hand-built fields in tests; also
    serves as the boundary-evaluator analogue over interface parameters.
    """

    def __init__(self, space_dim: int, derivs: dict[DerivSpec, Callable]):
        self.space_dim = int(space_dim)
        self._derivs = dict(derivs)

    def eval(self, points, spec: DerivSpec) -> np.ndarray:
        fn = self._derivs.get(spec)
        if fn is None:
            raise CapabilityError(f"analytic evaluator has no callback for derivative {spec}")
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        out = np.asarray(fn(pts), dtype=float)
        return np.broadcast_to(out, (pts.shape[0],)).astype(float) if out.ndim == 0 else out


# --- JSON checkpoints ------------------------------------------------------
#
# A layer is stored by its construction arguments, not its weight matrices:
# sample_layer is deterministic, so reconstruction is bit-identical and the
# files stay small.

def _layer_payload(layer: FeatureLayer) -> dict:
    return {
        "num_features": layer.num_features,
        "input_dim": layer.input_dim,
        "weight_range": list(layer.weight_range),
        "bias_range": list(layer.bias_range),
        "seed": layer.seed,
        "activation": layer.activation.value,
    }


def _layer_from_payload(d: dict) -> FeatureLayer:
    return sample_layer(
        num_features=int(d["num_features"]),
        input_dim=int(d["input_dim"]),
        weight_range=tuple(d["weight_range"]),
        bias_range=tuple(d["bias_range"]),
        seed=int(d["seed"]),
        activation=Activation(d["activation"]),
    )


def net_payload(net) -> dict:
    if isinstance(net, FieldNet):
        return {"kind": "field", "layer": _layer_payload(net.layer), "coeffs": net.coeffs.tolist()}
    if isinstance(net, BoundaryNet):
        return {
            "kind": "boundary",
            "param_kind": net.param_kind.value,
            "layer": _layer_payload(net.layer),
            "coeffs": net.coeffs.tolist(),
        }
    raise ConfigurationError(f"cannot serialize {type(net).__name__}")


def net_from_payload(d: dict):
    layer = _layer_from_payload(d["layer"])
    coeffs = np.asarray(d["coeffs"], dtype=float)
    if d["kind"] == "field":
        return FieldNet(layer, coeffs)
    if d["kind"] == "boundary":
        return BoundaryNet(layer, coeffs, ParamKind(d["param_kind"]))
    raise ConfigurationError(f"unknown checkpoint kind {d.get('kind')!r}")


def save_checkpoint(path, net) -> None:
    Path(path).write_text(json.dumps(net_payload(net), indent=2))


def load_checkpoint(path):
    return net_from_payload(json.loads(Path(path).read_text()))
