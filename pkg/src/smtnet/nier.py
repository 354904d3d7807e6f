"""The network intermediate representation: a typed tensor-operation DAG.

Sits between the ONNX parse and the SMT-LIB lowering.  Graphs are
immutable; passes return new graphs.  Tensor data is exact rationals
throughout, so every downstream consumer (rewriter, lowerer, oracle)
computes with the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Mapping

from .errors import CycleDetected, ShapeMismatch, UnsupportedAttribute

OP_KINDS = (
    "Gemm",
    "MatMul",
    "Add",
    "Relu",
    "Conv2D",
    "MaxPool2D",
    "Flatten",
    "Constant",
    "Identity",
)

DEBUG_DUMP_VERSION = 1


@dataclass(frozen=True)
class TensorShape:
    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.dims:
            raise ShapeMismatch("empty shape")
        if any(d < 1 for d in self.dims):
            raise ShapeMismatch(f"non-positive dimension in {self.dims}")

    @property
    def count(self) -> int:
        return math.prod(self.dims)

    @property
    def rank(self) -> int:
        return len(self.dims)

    def flat_index(self, index: tuple[int, ...]) -> int:
        if len(index) != len(self.dims):
            raise ShapeMismatch(f"index {index} has wrong rank for {self.dims}")
        flat = 0
        for i, d in zip(index, self.dims):
            if not 0 <= i < d:
                raise ShapeMismatch(f"index {index} out of bounds for {self.dims}")
            flat = flat * d + i
        return flat

    def multi_index(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.count:
            raise ShapeMismatch(f"flat index {flat} out of bounds for {self.dims}")
        out = []
        for d in reversed(self.dims):
            out.append(flat % d)
            flat //= d
        return tuple(reversed(out))

    def padded4(self, flat: int) -> tuple[int, int, int, int]:
        """Multi-index of ``flat`` after left-padding the shape to rank 4.

        Rank-4 NCHW tensors map directly; lower ranks gain leading
        singleton axes, so a (1, 81) tensor's element k maps to
        (0, 0, 0, k).  Used for the actual_input_/actual_output_ naming.
        """
        if self.rank > 4:
            raise ShapeMismatch(f"rank {self.rank} > 4 not supported for IO naming")
        idx = self.multi_index(flat)
        return (0,) * (4 - len(idx)) + idx  # type: ignore[return-value]

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.dims)


@dataclass(frozen=True)
class RationalTensor:
    shape: TensorShape
    data: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.data) != self.shape.count:
            raise ShapeMismatch(
                f"tensor data length {len(self.data)} != element count {self.shape.count}"
            )

    @classmethod
    def from_flat(cls, dims: tuple[int, ...], values) -> "RationalTensor":
        return cls(TensorShape(tuple(dims)), tuple(Fraction(v) for v in values))

    def at(self, *index: int) -> Fraction:
        return self.data[self.shape.flat_index(tuple(index))]


@dataclass(frozen=True)
class NierNode:
    op_kind: str
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    attrs: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.op_kind not in OP_KINDS:
            raise UnsupportedAttribute(f"unknown op kind {self.op_kind!r}")
        if len(self.outputs) != 1:
            raise UnsupportedAttribute(f"node {self.name!r} must have exactly one output")

    @property
    def output(self) -> str:
        return self.outputs[0]


@dataclass(frozen=True)
class NierGraph:
    name: str
    nodes: tuple[NierNode, ...]
    tensors: Mapping[str, RationalTensor]  # initializers / constants
    inputs: tuple[tuple[str, TensorShape], ...]
    outputs: tuple[tuple[str, TensorShape], ...]
    shapes: Mapping[str, TensorShape] = field(default_factory=dict)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.outputs)

    def producer_map(self) -> dict[str, int]:
        """tensor name -> index of the node producing it (SSA check)."""
        producers: dict[str, int] = {}
        taken = set(self.input_names) | set(self.tensors)
        for i, node in enumerate(self.nodes):
            for out in node.outputs:
                if out in producers or out in taken:
                    raise ShapeMismatch(f"tensor {out!r} produced more than once")
                producers[out] = i
        return producers

    def constant_value(self, name: str) -> RationalTensor | None:
        """Resolve a name to a constant tensor (initializer or Constant node)."""
        if name in self.tensors:
            return self.tensors[name]
        for node in self.nodes:
            if node.output == name and node.op_kind == "Constant":
                return node.attrs["value"]  # type: ignore[return-value]
        return None


def topo_order(graph: NierGraph) -> tuple[NierNode, ...]:
    """Kahn's algorithm; ready nodes are taken in original-index order."""
    producers = graph.producer_map()
    known = set(graph.input_names) | set(graph.tensors)
    indegree = []
    consumers: dict[int, list[int]] = {i: [] for i in range(len(graph.nodes))}
    for i, node in enumerate(graph.nodes):
        deps = 0
        for name in node.inputs:
            if name in producers:
                deps += 1
                consumers[producers[name]].append(i)
            elif name not in known:
                raise ShapeMismatch(f"node {node.name!r} consumes unknown tensor {name!r}")
        indegree.append(deps)

    import heapq

    ready = [i for i, d in enumerate(indegree) if d == 0]
    heapq.heapify(ready)
    order: list[int] = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in consumers[i]:
            indegree[j] -= 1
            if indegree[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(graph.nodes):
        stuck = [graph.nodes[i].name for i, d in enumerate(indegree) if d > 0]
        raise CycleDetected(f"cycle through nodes {stuck}")
    return tuple(graph.nodes[i] for i in order)


# --- shape inference --------------------------------------------------------


def broadcast_shapes(a: TensorShape, b: TensorShape, context: str) -> TensorShape:
    """Numpy-style multidirectional broadcasting."""
    ra, rb = list(a.dims), list(b.dims)
    if len(ra) < len(rb):
        ra = [1] * (len(rb) - len(ra)) + ra
    else:
        rb = [1] * (len(ra) - len(rb)) + rb
    out = []
    for da, db in zip(ra, rb):
        if da == db or db == 1:
            out.append(da)
        elif da == 1:
            out.append(db)
        else:
            raise ShapeMismatch(f"{context}: cannot broadcast {a} with {b}")
    return TensorShape(tuple(out))


def _pool_output_hw(
    h: int, w: int, kernel: tuple[int, int], strides: tuple[int, int],
    pads: tuple[int, int, int, int], context: str,
) -> tuple[int, int]:
    kh, kw = kernel
    sh, sw = strides
    pt, pl, pb, pr = pads
    oh = (h + pt + pb - kh) // sh + 1
    ow = (w + pl + pr - kw) // sw + 1
    if h + pt + pb < kh or w + pl + pr < kw or oh < 1 or ow < 1:
        raise ShapeMismatch(f"{context}: kernel {kernel} does not fit input {h}x{w} with pads {pads}")
    return oh, ow


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeMismatch(msg)


def node_output_shape(node: NierNode, in_shapes: list[TensorShape]) -> TensorShape:
    kind = node.op_kind
    ctx = f"node {node.name!r} ({kind})"
    if kind == "Constant":
        value: RationalTensor = node.attrs["value"]  # type: ignore[assignment]
        return value.shape
    if kind in ("Relu", "Identity"):
        _require(len(in_shapes) == 1, f"{ctx}: expects one input")
        return in_shapes[0]
    if kind == "Flatten":
        _require(len(in_shapes) == 1, f"{ctx}: expects one input")
        axis = int(node.attrs.get("axis", 1))
        dims = in_shapes[0].dims
        _require(0 <= axis <= len(dims), f"{ctx}: axis {axis} out of range for {dims}")
        return TensorShape((math.prod(dims[:axis]), math.prod(dims[axis:])))
    if kind == "Add":
        _require(len(in_shapes) == 2, f"{ctx}: expects two inputs")
        return broadcast_shapes(in_shapes[0], in_shapes[1], ctx)
    if kind == "MatMul":
        _require(len(in_shapes) == 2, f"{ctx}: expects two inputs")
        a, b = in_shapes
        _require(a.rank == 2 and b.rank == 2, f"{ctx}: only 2-D operands supported")
        _require(a.dims[1] == b.dims[0], f"{ctx}: inner dims {a} x {b} disagree")
        return TensorShape((a.dims[0], b.dims[1]))
    if kind == "Gemm":
        _require(len(in_shapes) in (2, 3), f"{ctx}: expects two or three inputs")
        a, b = in_shapes[0], in_shapes[1]
        _require(a.rank == 2 and b.rank == 2, f"{ctx}: only 2-D operands supported")
        trans_b = int(node.attrs.get("transB", 0))
        bk, bn = (b.dims[1], b.dims[0]) if trans_b else (b.dims[0], b.dims[1])
        _require(a.dims[1] == bk, f"{ctx}: inner dims {a} x {b} (transB={trans_b}) disagree")
        out = TensorShape((a.dims[0], bn))
        if len(in_shapes) == 3:
            broadcast_shapes(out, in_shapes[2], ctx)  # C must broadcast to output
        return out
    if kind == "Conv2D":
        _require(len(in_shapes) in (2, 3), f"{ctx}: expects two or three inputs")
        x, k = in_shapes[0], in_shapes[1]
        _require(x.rank == 4 and k.rank == 4, f"{ctx}: NCHW input and OIHW kernel required")
        _require(x.dims[0] == 1, f"{ctx}: batch dimension must be 1")
        _require(x.dims[1] == k.dims[1], f"{ctx}: channel mismatch {x} vs kernel {k}")
        if len(in_shapes) == 3:
            _require(
                in_shapes[2].dims in ((k.dims[0],), (1, k.dims[0])),
                f"{ctx}: bias shape {in_shapes[2]} does not match {k.dims[0]} channels",
            )
        oh, ow = _pool_output_hw(
            x.dims[2], x.dims[3], node.attrs["kernel"], node.attrs["strides"],
            node.attrs["pads"], ctx,
        )
        return TensorShape((1, k.dims[0], oh, ow))
    if kind == "MaxPool2D":
        _require(len(in_shapes) == 1, f"{ctx}: expects one input")
        x = in_shapes[0]
        _require(x.rank == 4 and x.dims[0] == 1, f"{ctx}: NCHW input with batch 1 required")
        oh, ow = _pool_output_hw(
            x.dims[2], x.dims[3], node.attrs["kernel"], node.attrs["strides"],
            node.attrs["pads"], ctx,
        )
        return TensorShape((1, x.dims[1], oh, ow))
    raise UnsupportedAttribute(f"no shape rule for {kind}")


def infer_shapes(graph: NierGraph) -> NierGraph:
    """Annotate every edge with a concrete shape. Idempotent."""
    shapes: dict[str, TensorShape] = {}
    for name, shape in graph.inputs:
        shapes[name] = shape
    for name, tensor in graph.tensors.items():
        shapes[name] = tensor.shape
    for node in topo_order(graph):
        in_shapes = []
        for name in node.inputs:
            if name not in shapes:
                raise ShapeMismatch(f"node {node.name!r}: input {name!r} has no shape")
            in_shapes.append(shapes[name])
        shapes[node.output] = node_output_shape(node, in_shapes)
    for name, declared in graph.outputs:
        if name not in shapes:
            raise ShapeMismatch(f"graph output {name!r} is never produced")
        if declared.dims != shapes[name].dims:
            raise ShapeMismatch(
                f"graph output {name!r}: declared {declared}, inferred {shapes[name]}"
            )
    return replace(graph, shapes=shapes)


def format_debug_dump(graph: NierGraph) -> str:
    """One node per line; stable golden-file format (versioned)."""
    lines = [f"# nier-dump v{DEBUG_DUMP_VERSION}", f"graph {graph.name}"]
    for name, shape in graph.inputs:
        lines.append(f"input {name} shape={shape}")
    for name in sorted(graph.tensors):
        lines.append(f"tensor {name} shape={graph.tensors[name].shape}")
    for node in graph.nodes:
        shape = graph.shapes.get(node.output)
        shape_str = str(shape) if shape is not None else "?"
        ins = ",".join(node.inputs)
        outs = ",".join(node.outputs)
        lines.append(f"node {node.name} op={node.op_kind} in=[{ins}] out=[{outs}] shape={shape_str}")
    for name, shape in graph.outputs:
        lines.append(f"output {name} shape={shape}")
    return "\n".join(lines) + "\n"
