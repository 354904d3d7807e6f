"""Exception types raised across the translation and verification pipeline."""


class VerifierError(Exception):
    """Base class for every error this package raises deliberately."""


# --- ONNX ingestion ---------------------------------------------------------

class MalformedProtobuf(VerifierError):
    """Input bytes do not decode as an ONNX model."""


class UnsupportedOperator(VerifierError):
    def __init__(self, op_type: str, node_name: str = ""):
        self.op_type = op_type
        self.node_name = node_name
        where = f" (node {node_name!r})" if node_name else ""
        super().__init__(f"unsupported operator {op_type!r}{where}")


class UnsupportedDtype(VerifierError):
    """Initializer element type outside {float32, float64}."""


class NonFiniteWeight(VerifierError):
    """NaN or infinity in a weight tensor; never clamped silently."""


class UnsupportedAttribute(VerifierError):
    """Operator attribute outside the supported subset (e.g. Conv group != 1)."""


# --- graph ------------------------------------------------------------------

class ShapeMismatch(VerifierError):
    """Tensor shapes incompatible with an operator's signature."""


class CycleDetected(VerifierError):
    """The node graph is not a DAG."""


class UnsupportedGraph(VerifierError):
    """Graph-level restriction violated (e.g. more than one input tensor)."""


# --- lowering ---------------------------------------------------------------

class LogicMismatch(VerifierError):
    """A nonlinear term would be emitted under a linear logic."""


class InternalNamingCollision(VerifierError):
    """Two scalar variables mapped to the same name; must be impossible."""


class EmptyWindow(VerifierError):
    """A pooling window contains no un-padded input positions."""


# --- property specs ---------------------------------------------------------

class MissingVariable(VerifierError):
    """A property or simulator constraint references an undeclared variable."""


class UnsupportedNorm(VerifierError):
    """Reconstruction tolerance requested with a norm we cannot encode."""


class SpecFormatError(VerifierError):
    """Task file does not conform to the documented schema."""


# --- solver harness ---------------------------------------------------------

class SolverNotFound(VerifierError):
    """Configured solver executable does not exist or is not runnable."""


class SolverTimeout(VerifierError):
    """Solver process exceeded its wall-clock budget and was killed."""


class NonzeroExit(VerifierError):
    def __init__(self, returncode: int, stderr: str):
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(f"solver exited with status {returncode}: {stderr.strip()[:500]}")


class UnparseableModel(VerifierError):
    """Solver model response outside the supported define-fun fragment."""


class IncompleteModel(VerifierError):
    """Model omits an input variable needed for reconstruction."""


class DomainViolation(VerifierError):
    """Model value outside the declared pixel domain; signals an encoding bug."""


class SoundnessError(VerifierError):
    """A sat witness failed exact re-evaluation; the encoding is unsound."""


# --- oracle -----------------------------------------------------------------

class GridTooLarge(VerifierError):
    """Brute-force enumeration would exceed the configured render cap."""


class UnsupportedDomain(VerifierError):
    """Operation requires a binary pixel domain."""
