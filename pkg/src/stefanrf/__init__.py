"""Mesh-free two-stage random-feature solver for Stefan moving-boundary problems.

Stage 1 fits random sine-feature networks for the phase fields and the
moving interface by regularized Gauss-Newton on the stacked condition
residuals.  Stage 2 freezes that base solution and solves a scaled,
Taylor-expanded correction problem for fresh networks, composing
``u + eps * u_correction`` (and likewise for the boundary) to recover
several extra orders of accuracy.
"""

from .assembly import (
    JacobianStack,
    LossWeights,
    ParamLayout,
    ResidualStack,
    assemble,
    assemble_jacobian,
    boundary_residual,
    dump_system,
    initial_interface_residual,
    initial_residual,
    interface_isotherm_residual,
    pde_residual,
    stefan_residual,
)
from .benchmarks import (
    BenchmarkId,
    FrankConstants,
    TestGrid,
    benchmark_defaults,
    build_test_grid,
    evaluate_errors,
    frank_2d_constants,
    frank_3d_constants,
    linf,
    linf_error,
    make_benchmark,
    relative_l2,
    relative_l2_error,
)
from .collocation import CollocationCounts, CollocationSet, export_csv, resample_interface, sample_initial
from .convexity import ConvexityReport, diagnose
from .correction import (
    ComposedBoundary,
    ComposedField,
    PerturbationState,
    assemble_perturbation,
    assemble_perturbation_jacobian,
    compose,
    compute_epsilon,
    make_correction_state,
    run_correction,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    DivergenceError,
    DomainError,
    NumericalError,
    SamplingError,
    ShapeError,
    SolverError,
)
from .features import Activation, DerivSpec, FeatureLayer, eval_features, sample_layer
from .gauss_newton import GNConfig, GNReport, Termination, minimize, truncated_pinv_step, write_history_csv
from .nets import (
    AnalyticField,
    BoundaryNet,
    FieldNet,
    ParamKind,
    eval_boundary,
    eval_field,
    load_checkpoint,
    save_checkpoint,
)
from .problems import (
    BCSpec,
    ConditionFn,
    DomainSpec,
    ExactSolution,
    Side,
    StefanProblem,
    StefanSpec,
    constant_fn,
    explicit_condition,
    flux_jump,
    validate,
    velocity_flux,
)
from .solve import Stage1Result, solve_stage1
from .special import erf, erfc, exp_integral_e1

__version__ = "0.1.0"
