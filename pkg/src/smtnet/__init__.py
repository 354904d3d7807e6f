"""smtnet: verify feed-forward ONNX networks with SMT solvers.

Pipeline: ONNX bytes -> graph IR (exact rational weights) -> scalar
constraints -> SMT-LIB 2 text [+ simulator input constraints + negated
property] -> external solver -> verdict, with every counterexample
confirmed by an exact-rational evaluator and an exhaustive brute-force
oracle for small pixel grids.
"""

__version__ = "0.1.0"

from .errors import VerifierError  # noqa: E402,F401
from .rational import float32_to_rational, float64_to_rational, smt_literal  # noqa: E402,F401
from .ingest import OnnxSubsetModel, load_graph, parse_onnx, to_nier  # noqa: E402,F401
from .nier import (  # noqa: E402,F401
    NierGraph,
    NierNode,
    RationalTensor,
    TensorShape,
    format_debug_dump,
    infer_shapes,
    topo_order,
)
from .rewrite import DEFAULT_RULES, rewrite  # noqa: E402,F401
from .lowering import ConstraintSystem, ScalarVar, emit_smtlib, lower_graph  # noqa: E402,F401
from .properties import (  # noqa: E402,F401
    BinaryDomain,
    DangerZone,
    IntervalDomain,
    PropertyKind,
    PropertySpec,
    SimulatorSpec,
    VerificationTask,
    compose_task,
    emit_input_constraints,
    emit_property_negation,
    load_task_spec,
)
from .oracle import ExactActivationTrace, brute_force_verify, eval_exact  # noqa: E402,F401
from .solver import (  # noqa: E402,F401
    SolverConfig,
    confirm_counterexample,
    parse_model,
    reconstruct_input,
    run_solver,
    verify_task,
)
from .verdict import CounterExample, Verdict, VerdictStatus  # noqa: E402,F401
