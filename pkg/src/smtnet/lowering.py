"""Lower a shape-inferred graph to scalar constraints and emit SMT-LIB 2 text.

Every tensor element becomes one Real variable; every defined scalar gets
exactly one equality assertion.  Weight values appear twice, deliberately:
once as a variable definition (``(assert (= |w_...| (/ a b)))``, which
keeps the emitted file self-describing) and inlined as literal
coefficients inside arithmetic, which keeps piecewise-linear networks
inside linear logics.

Variable naming scheme (versioned with the package):
  inputs        actual_input_<n>_<c>_<h>_<w>    (shape left-padded to rank 4)
  outputs       actual_output_<n>_<c>_<h>_<w>
  intermediates n<nodeIndex>_<flatIndex>        (nodeIndex = topological position)
  weights       w_<tensorName>_<flatIndex>      (tensorName sanitized to [A-Za-z0-9_.])
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from . import __version__ as _version
from .errors import (
    EmptyWindow,
    InternalNamingCollision,
    LogicMismatch,
    ShapeMismatch,
    UnsupportedGraph,
)
from .nier import NierGraph, NierNode, RationalTensor, TensorShape, infer_shapes, topo_order
from .rational import smt_literal

SUPPORTED_LOGICS = ("QF_NRA", "QF_LRA", "QF_LIRA")
LINEAR_LOGICS = ("QF_LRA", "QF_LIRA")
DEFAULT_LOGIC = "QF_NRA"

# Term nodes: ('v', name) | ('q', Fraction) | (op, (args...)) for op in
# {'+','-','*','ite','=','>=','<=','<','>','or','and'}.
Term = tuple

VAR_NAME_RE = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*$")

ROLE_INPUT = "input"
ROLE_OUTPUT = "output"
ROLE_INTERMEDIATE = "intermediate"
ROLE_WEIGHT = "weight"

SEC_WEIGHTS = "weights"
SEC_NETWORK = "network"
SEC_OUTPUTS = "outputs"
SEC_INPUT_DOMAIN = "input-domain"
SEC_PROPERTY = "property"

_AUTO_SECTIONS = (SEC_WEIGHTS, SEC_NETWORK, SEC_OUTPUTS)
_ANNOTATION_SECTIONS = (SEC_INPUT_DOMAIN, SEC_PROPERTY)


def tvar(name: str) -> Term:
    return ("v", name)


def tq(value) -> Term:
    return ("q", Fraction(value))


def tsum(terms: Sequence[Term]) -> Term:
    """Flat sum; nested sums are spliced and literals folded into one
    trailing constant."""
    flat: list[Term] = []
    for t in terms:
        if t[0] == "+":
            flat.extend(t[1])
        else:
            flat.append(t)
    symbolic = [t for t in flat if t[0] != "q"]
    const = sum((t[1] for t in flat if t[0] == "q"), Fraction(0))
    parts = list(symbolic)
    if const != 0 or not parts:
        parts.append(tq(const))
    if len(parts) == 1:
        return parts[0]
    return ("+", tuple(parts))


def tmul(coeff: Fraction, term: Term) -> Term:
    """coefficient * term with the trivial cases folded."""
    if term[0] == "q":
        return tq(coeff * term[1])
    if coeff == 0:
        return tq(0)
    if coeff == 1:
        return term
    return ("*", (tq(coeff), term))


def tprod(a: Term, b: Term) -> Term:
    if a[0] == "q":
        return tmul(a[1], b)
    if b[0] == "q":
        return tmul(b[1], a)
    return ("*", (a, b))


def tsub(a: Term, b: Term) -> Term:
    return ("-", (a, b))


def tite(cond: Term, then: Term, alt: Term) -> Term:
    return ("ite", (cond, then, alt))


def tcmp(op: str, a: Term, b: Term) -> Term:
    if op not in ("=", ">=", "<=", "<", ">"):
        raise ValueError(f"bad comparison {op!r}")
    return (op, (a, b))


def tor(terms: Sequence[Term]) -> Term:
    terms = tuple(terms)
    if not terms:
        raise ValueError("empty disjunction")
    if len(terms) == 1:
        return terms[0]
    return ("or", terms)


def tand(terms: Sequence[Term]) -> Term:
    terms = tuple(terms)
    if not terms:
        raise ValueError("empty conjunction")
    if len(terms) == 1:
        return terms[0]
    return ("and", terms)


def tmax(terms: Sequence[Term]) -> Term:
    """Left-folded chain of binary maxima via ite."""
    terms = list(terms)
    if not terms:
        raise EmptyWindow("max over zero elements")
    acc = terms[0]
    for t in terms[1:]:
        acc = tite(tcmp(">=", acc, t), acc, t)
    return acc


@dataclass(frozen=True)
class ScalarVar:
    name: str
    role: str


@dataclass(frozen=True)
class Assertion:
    term: Term
    section: str
    comment: str | None = None


@dataclass
class ConstraintSystem:
    """Flat, solver-agnostic list of declarations and assertions."""

    logic_tag: str = DEFAULT_LOGIC
    declarations: list[ScalarVar] = field(default_factory=list)
    assertions: list[Assertion] = field(default_factory=list)
    header: list[str] = field(default_factory=list)
    _names: set[str] = field(default_factory=set, repr=False)

    def declare(self, name: str, role: str) -> Term:
        if name in self._names:
            raise InternalNamingCollision(f"variable {name!r} declared twice")
        if not VAR_NAME_RE.match(name):
            raise InternalNamingCollision(f"variable {name!r} is not a simple symbol")
        self._names.add(name)
        self.declarations.append(ScalarVar(name, role))
        return tvar(name)

    def has_var(self, name: str) -> bool:
        return name in self._names

    def add_assert(self, term: Term, section: str, comment: str | None = None) -> None:
        for name in _term_vars(term):
            if name not in self._names:
                raise InternalNamingCollision(f"assertion references undeclared {name!r}")
        self.assertions.append(Assertion(term, section, comment))


def _term_vars(term: Term):
    kind, payload = term
    if kind == "v":
        yield payload
    elif kind != "q":
        for child in payload:
            yield from _term_vars(child)


def _contains_var(term: Term) -> bool:
    kind, payload = term
    if kind == "v":
        return True
    if kind == "q":
        return False
    return any(_contains_var(c) for c in payload)


def _check_linear(term: Term) -> None:
    kind, payload = term
    if kind in ("v", "q"):
        return
    if kind == "*":
        if sum(1 for c in payload if _contains_var(c)) > 1:
            raise LogicMismatch(
                "product of two non-constant terms cannot be emitted under a linear logic"
            )
    for child in payload:
        _check_linear(child)


def sanitize_tensor_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.]", "_", name)


def input_var_name(shape: TensorShape, flat: int) -> str:
    a, b, c, d = shape.padded4(flat)
    return f"actual_input_{a}_{b}_{c}_{d}"


def output_var_name(shape: TensorShape, flat: int) -> str:
    a, b, c, d = shape.padded4(flat)
    return f"actual_output_{a}_{b}_{c}_{d}"


# --- per-op scalar lowering ---------------------------------------------------

# Element access for a tensor that is either symbolic (list of terms) or a
# constant RationalTensor; both are addressed by flat index.
_Scalars = Union[list, RationalTensor]


def _elem(scalars: _Scalars, flat: int) -> Term:
    if isinstance(scalars, RationalTensor):
        return tq(scalars.data[flat])
    return scalars[flat]


def _bcast_elem(scalars: _Scalars, shape: TensorShape, out_idx: tuple[int, ...]) -> Term:
    """Element of a broadcast operand at an output multi-index."""
    idx = out_idx[len(out_idx) - shape.rank :]
    idx = tuple(0 if shape.dims[i] == 1 else idx[i] for i in range(shape.rank))
    return _elem(scalars, shape.flat_index(idx))


def lower_relu(x: Term) -> Term:
    """ReLU as a conditional term: (ite (>= x 0) x 0)."""
    return tite(tcmp(">=", x, tq(0)), x, tq(0))


def _lower_affine_matmul(
    a: _Scalars, a_shape: TensorShape, b: _Scalars, b_shape: TensorShape,
    trans_b: bool, alpha: Fraction,
) -> list[Term]:
    """Row-major output terms of alpha * (A @ B), B optionally transposed."""
    m, k = a_shape.dims
    if trans_b:
        n = b_shape.dims[0]
        b_at = lambda kk, jj: (jj, kk)  # noqa: E731
    else:
        n = b_shape.dims[1]
        b_at = lambda kk, jj: (kk, jj)  # noqa: E731
    out: list[Term] = []
    for i in range(m):
        for j in range(n):
            parts = []
            for kk in range(k):
                fa = _elem(a, a_shape.flat_index((i, kk)))
                fb = _elem(b, b_shape.flat_index(b_at(kk, j)))
                prod = tprod(fa, fb)
                if prod == ("q", Fraction(0)):
                    continue
                if alpha != 1:
                    prod = tmul(alpha, prod) if prod[0] != "q" else tq(alpha * prod[1])
                parts.append(prod)
            out.append(tsum(parts))
    return out


def lower_conv2d(
    node: NierNode,
    x: _Scalars, x_shape: TensorShape,
    kernel: RationalTensor,
    bias: RationalTensor | None,
    out_shape: TensorShape,
) -> list[Term]:
    """Output terms of a 2-D convolution; padded taps are omitted (they
    contribute zero)."""
    _, cin, h, w = x_shape.dims
    cout, _, kh, kw = kernel.shape.dims
    sh, sw = node.attrs["strides"]
    pt, pl, _, _ = node.attrs["pads"]
    _, _, oh, ow = out_shape.dims
    out: list[Term] = []
    for co in range(cout):
        for oy in range(oh):
            for ox in range(ow):
                parts = []
                for ci in range(cin):
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * sh - pt + ky
                            ix = ox * sw - pl + kx
                            if not (0 <= iy < h and 0 <= ix < w):
                                continue
                            coeff = kernel.at(co, ci, ky, kx)
                            if coeff == 0:
                                continue
                            xin = _elem(x, x_shape.flat_index((0, ci, iy, ix)))
                            parts.append(tmul(coeff, xin))
                if bias is not None:
                    parts.append(tq(bias.data[co]))
                out.append(tsum(parts))
    return out


def lower_maxpool(
    node: NierNode, x: _Scalars, x_shape: TensorShape, out_shape: TensorShape
) -> list[Term]:
    """Window maxima, row-major scan; padded positions are excluded from the
    max rather than treated as zero."""
    _, c, h, w = x_shape.dims
    kh, kw = node.attrs["kernel"]
    sh, sw = node.attrs["strides"]
    pt, pl, _, _ = node.attrs["pads"]
    _, _, oh, ow = out_shape.dims
    out: list[Term] = []
    for ci in range(c):
        for oy in range(oh):
            for ox in range(ow):
                window = []
                for ky in range(kh):
                    for kx in range(kw):
                        iy = oy * sh - pt + ky
                        ix = ox * sw - pl + kx
                        if 0 <= iy < h and 0 <= ix < w:
                            window.append(_elem(x, x_shape.flat_index((0, ci, iy, ix))))
                if not window:
                    raise EmptyWindow(
                        f"node {node.name!r}: pooling window at ({oy},{ox}) covers no input"
                    )
                out.append(tmax(window))
    return out


def _lower_node(node: NierNode, scalars, shapes) -> list[Term]:
    kind = node.op_kind
    in_shapes = [shapes[n] for n in node.inputs]
    ins = [scalars[n] for n in node.inputs]
    out_shape = shapes[node.output]

    if kind in ("Identity", "Flatten"):
        return [_elem(ins[0], i) for i in range(in_shapes[0].count)]
    if kind == "Relu":
        return [lower_relu(_elem(ins[0], i)) for i in range(in_shapes[0].count)]
    if kind == "Add":
        out = []
        for flat in range(out_shape.count):
            idx = out_shape.multi_index(flat)
            out.append(tsum([
                _bcast_elem(ins[0], in_shapes[0], idx),
                _bcast_elem(ins[1], in_shapes[1], idx),
            ]))
        return out
    if kind == "MatMul":
        return _lower_affine_matmul(
            ins[0], in_shapes[0], ins[1], in_shapes[1], False, Fraction(1)
        )
    if kind == "Gemm":
        alpha = Fraction(node.attrs.get("alpha", 1))
        beta = Fraction(node.attrs.get("beta", 1))
        trans_b = bool(node.attrs.get("transB", 0))
        out = _lower_affine_matmul(ins[0], in_shapes[0], ins[1], in_shapes[1], trans_b, alpha)
        if len(ins) == 3:
            for flat in range(out_shape.count):
                idx = out_shape.multi_index(flat)
                c_term = _bcast_elem(ins[2], in_shapes[2], idx)
                if beta != 1:
                    c_term = tmul(beta, c_term)
                out[flat] = tsum([out[flat], c_term])
        return out
    if kind == "Conv2D":
        kernel = ins[1]
        if not isinstance(kernel, RationalTensor):
            raise UnsupportedGraph(f"node {node.name!r}: convolution kernel must be constant")
        bias = None
        if len(ins) == 3:
            if not isinstance(ins[2], RationalTensor):
                raise UnsupportedGraph(f"node {node.name!r}: convolution bias must be constant")
            bias = RationalTensor(TensorShape((in_shapes[2].count,)), ins[2].data)
        return lower_conv2d(node, ins[0], in_shapes[0], kernel, bias, out_shape)
    if kind == "MaxPool2D":
        return lower_maxpool(node, ins[0], in_shapes[0], out_shape)
    raise UnsupportedGraph(f"cannot lower op {kind}")


def lower_graph(graph: NierGraph, logic: str = DEFAULT_LOGIC) -> ConstraintSystem:
    """Lower a graph to a scalar constraint system.

    Requires batch 1 and exactly one graph input and output tensor (the
    IO naming scheme has no tensor-name component).
    """
    if logic not in SUPPORTED_LOGICS:
        raise LogicMismatch(f"unsupported logic {logic!r}; pick one of {SUPPORTED_LOGICS}")
    if len(graph.inputs) != 1:
        raise UnsupportedGraph(f"expected exactly one graph input, got {len(graph.inputs)}")
    if len(graph.outputs) != 1:
        raise UnsupportedGraph(f"expected exactly one graph output, got {len(graph.outputs)}")
    graph = infer_shapes(graph)  # idempotent
    order = topo_order(graph)
    shapes = graph.shapes

    input_name, in_shape = graph.inputs[0]
    output_name, out_shape = graph.outputs[0]

    cs = ConstraintSystem(logic_tag=logic)
    cs.header = [
        f"translated by smtnet {_version}",
        f"graph: {graph.name or '(unnamed)'}",
        f"input {input_name} shape {in_shape}; output {output_name} shape {out_shape}",
    ]

    scalars: dict[str, _Scalars] = {}
    scalars[input_name] = [
        cs.declare(input_var_name(in_shape, flat), ROLE_INPUT)
        for flat in range(in_shape.count)
    ]

    # weights: initializers in declaration order, then Constant node outputs
    weight_entries: list[tuple[str, RationalTensor]] = list(graph.tensors.items())
    for node in order:
        if node.op_kind == "Constant":
            weight_entries.append((node.output, node.attrs["value"]))  # type: ignore[arg-type]
    for tname, tensor in weight_entries:
        san = sanitize_tensor_name(tname)
        for flat, value in enumerate(tensor.data):
            var = cs.declare(f"w_{san}_{flat}", ROLE_WEIGHT)
            cs.add_assert(tcmp("=", var, tq(value)), SEC_WEIGHTS)
        scalars[tname] = tensor  # constants are inlined in arithmetic

    for index, node in enumerate(order):
        if node.op_kind == "Constant":
            continue
        if node.output == input_name:
            raise UnsupportedGraph(f"node {node.name!r} shadows the graph input")
        is_output = node.output == output_name
        rhs_terms = _lower_node(node, scalars, shapes)
        count = shapes[node.output].count
        if len(rhs_terms) != count:
            raise ShapeMismatch(
                f"node {node.name!r}: lowered {len(rhs_terms)} scalars for {count} elements"
            )
        vars_out = []
        for flat in range(count):
            if is_output:
                name = output_var_name(out_shape, flat)
                role, section = ROLE_OUTPUT, SEC_OUTPUTS
            else:
                name = f"n{index}_{flat}"
                role, section = ROLE_INTERMEDIATE, SEC_NETWORK
            var = cs.declare(name, role)
            cs.add_assert(tcmp("=", var, rhs_terms[flat]), section)
            vars_out.append(var)
        scalars[node.output] = vars_out

    if output_name not in scalars or isinstance(scalars[output_name], RationalTensor):
        raise UnsupportedGraph("graph output must be produced by a non-constant node")
    return cs


# --- text emission ------------------------------------------------------------


def format_term(term: Term, fig5_compat: bool = False, quote_vars: bool = True) -> str:
    kind, payload = term
    if kind == "v":
        return f"|{payload}|" if quote_vars else payload
    if kind == "q":
        return smt_literal(payload, fig5_compat)
    args = " ".join(format_term(c, fig5_compat, quote_vars) for c in payload)
    return f"({kind} {args})"


def _defined_var(assertion: Assertion) -> str:
    term = assertion.term
    if term[0] == "=" and term[1][0][0] == "v":
        return term[1][0][1]
    raise InternalNamingCollision("definition assertion is not an equality on a variable")


def emit_smtlib(cs: ConstraintSystem, logic: str | None = None, fig5_compat: bool = False) -> str:
    """Render deterministic SMT-LIB 2.6 text, without (check-sat).

    Layout follows the two-banner convention: the network translation under
    "Automatically generated part", simulator/property constraints (when
    present in the system) under "Handmade annotations".
    """
    logic = logic or cs.logic_tag
    if logic not in SUPPORTED_LOGICS:
        raise LogicMismatch(f"unsupported logic {logic!r}; pick one of {SUPPORTED_LOGICS}")
    if logic in LINEAR_LOGICS:
        for assertion in cs.assertions:
            _check_linear(assertion.term)

    by_section: dict[str, list[Assertion]] = {}
    for assertion in cs.assertions:
        by_section.setdefault(assertion.section, []).append(assertion)
    unknown = set(by_section) - set(_AUTO_SECTIONS) - set(_ANNOTATION_SECTIONS)
    if unknown:
        raise LogicMismatch(f"assertions in unknown sections {sorted(unknown)}")

    lines: list[str] = []
    for note in cs.header:
        lines.append(f";; {note}")
    lines.append(f"(set-logic {logic})")
    lines.append(";;;; Automatically generated part")

    lines.append(";; Inputs declaration")
    for var in cs.declarations:
        if var.role == ROLE_INPUT:
            lines.append(f"(declare-fun |{var.name}| () Real)")

    def _pairs(section: str) -> None:
        for assertion in by_section.get(section, []):
            name = _defined_var(assertion)
            lines.append(f"(declare-fun |{name}| () Real)")
            lines.append(f"(assert {format_term(assertion.term, fig5_compat, True)})")

    lines.append(";; Weights declaration")
    _pairs(SEC_WEIGHTS)
    lines.append(";; Encoded network")
    _pairs(SEC_NETWORK)
    lines.append(";; Outputs declaration")
    _pairs(SEC_OUTPUTS)

    if any(section in by_section for section in _ANNOTATION_SECTIONS):
        lines.append("")
        lines.append(";;;; Handmade annotations")
        if SEC_INPUT_DOMAIN in by_section:
            lines.append(";; Simulator description")
            lines.append(";; Input space constraints")
            for assertion in by_section[SEC_INPUT_DOMAIN]:
                if assertion.comment:
                    lines.append(f";; {assertion.comment}")
                lines.append(f"(assert {format_term(assertion.term, fig5_compat, False)})")
        if SEC_PROPERTY in by_section:
            lines.append(";; Property to check")
            for assertion in by_section[SEC_PROPERTY]:
                if assertion.comment:
                    lines.append(f";; {assertion.comment}")
                lines.append(f"(assert {format_term(assertion.term, fig5_compat, False)})")

    return "\n".join(lines) + "\n"
