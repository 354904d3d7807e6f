"""ONNX bytes -> validated model -> graph IR, with exact weight conversion.

Supported operators: Gemm, MatMul, Add, Relu, Conv (2-D), MaxPool (2-D),
Flatten, Constant, Identity.  Initializers must be 32- or 64-bit floats;
both convert exactly to rationals.  Opsets 9 through 13 are accepted;
attribute defaults follow the ONNX operator reference.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

from . import onnx_pb
from .errors import (
    MalformedProtobuf,
    NonFiniteWeight,
    ShapeMismatch,
    UnsupportedAttribute,
    UnsupportedDtype,
    UnsupportedOperator,
)
from .nier import NierGraph, NierNode, RationalTensor, TensorShape
from .onnx_pb import AttributeMsg, NodeMsg, TensorMsg
from .rational import float_to_rational

SUPPORTED_OPS = {
    "Gemm",
    "MatMul",
    "Add",
    "Relu",
    "Conv",
    "MaxPool",
    "Flatten",
    "Constant",
    "Identity",
}

SUPPORTED_OPSETS = range(9, 14)
SUPPORTED_DTYPES = (onnx_pb.DTYPE_FLOAT, onnx_pb.DTYPE_DOUBLE)


@dataclass(frozen=True)
class OnnxSubsetModel:
    """The parsed model restricted to the supported operator subset."""

    name: str
    graph_nodes: tuple[NodeMsg, ...]
    initializers: tuple[TensorMsg, ...]
    input_specs: tuple[tuple[str, tuple[int, ...]], ...]
    output_specs: tuple[tuple[str, tuple[int, ...]], ...]
    opset_version: int


def _tensor_element_count(tensor: TensorMsg) -> int:
    count = 1
    for d in tensor.dims:
        if d < 0:
            raise MalformedProtobuf(f"initializer {tensor.name!r} has negative dim {d}")
        count *= d
    return count


def _validate_initializer(tensor: TensorMsg) -> None:
    if tensor.data_type not in SUPPORTED_DTYPES:
        raise UnsupportedDtype(
            f"initializer {tensor.name!r} has dtype {tensor.data_type}; "
            "only 32- and 64-bit floats are supported"
        )
    count = _tensor_element_count(tensor)
    width = 4 if tensor.data_type == onnx_pb.DTYPE_FLOAT else 8
    if tensor.raw_data is not None:
        if len(tensor.raw_data) != count * width:
            raise ShapeMismatch(
                f"initializer {tensor.name!r}: {len(tensor.raw_data)} raw bytes "
                f"for {count} elements of width {width}"
            )
    else:
        payload = tensor.float_data if tensor.data_type == onnx_pb.DTYPE_FLOAT else tensor.double_data
        if len(payload) != count:
            raise ShapeMismatch(
                f"initializer {tensor.name!r}: {len(payload)} values for {count} elements"
            )


def parse_onnx(data: bytes) -> OnnxSubsetModel:
    """Decode and validate ONNX bytes against the supported subset."""
    model = onnx_pb.load_model(data)
    graph = model.graph

    default_opset = 0
    for domain, version in model.opset_imports:
        if domain in ("", "ai.onnx"):
            default_opset = version
    if default_opset and default_opset not in SUPPORTED_OPSETS:
        raise UnsupportedAttribute(
            f"opset {default_opset} outside supported range "
            f"{SUPPORTED_OPSETS.start}..{SUPPORTED_OPSETS.stop - 1}"
        )

    for node in graph.nodes:
        if node.op_type not in SUPPORTED_OPS:
            raise UnsupportedOperator(node.op_type, node.name)

    for tensor in graph.initializers:
        _validate_initializer(tensor)

    initializer_names = {t.name for t in graph.initializers}
    known = {vi.name for vi in graph.inputs} | initializer_names
    for node in graph.nodes:
        for name in node.inputs:
            if name and name not in known:
                raise MalformedProtobuf(
                    f"node {node.name!r} input {name!r} is not a graph input, "
                    "an initializer, or a prior node output"
                )
        known.update(node.outputs)
    for vi in graph.outputs:
        if vi.name not in known:
            raise MalformedProtobuf(f"graph output {vi.name!r} is never produced")

    def spec(vi) -> tuple[str, tuple[int, ...]]:
        dims = tuple(d if d is not None else -1 for d in vi.dims)
        return vi.name, dims

    return OnnxSubsetModel(
        name=graph.name,
        graph_nodes=tuple(graph.nodes),
        initializers=tuple(graph.initializers),
        input_specs=tuple(spec(vi) for vi in graph.inputs if vi.name not in initializer_names),
        output_specs=tuple(spec(vi) for vi in graph.outputs),
        opset_version=default_opset or 13,
    )


def tensor_to_rational(tensor: TensorMsg) -> RationalTensor:
    """Exact dyadic conversion of a float initializer."""
    count = _tensor_element_count(tensor)
    if tensor.data_type == onnx_pb.DTYPE_FLOAT:
        if tensor.raw_data is not None:
            values = struct.unpack(f"<{count}f", tensor.raw_data)
        else:
            values = tensor.float_data
    else:
        if tensor.raw_data is not None:
            values = struct.unpack(f"<{count}d", tensor.raw_data)
        else:
            values = tensor.double_data
    try:
        data = tuple(float_to_rational(v) for v in values)
    except NonFiniteWeight as exc:
        raise NonFiniteWeight(f"initializer {tensor.name!r}: {exc}") from exc
    dims = tuple(tensor.dims) if tensor.dims else (1,)
    return RationalTensor(TensorShape(dims), data)


# --- attribute resolution ----------------------------------------------------


def _attr_map(node: NodeMsg) -> dict[str, AttributeMsg]:
    return {a.name: a for a in node.attributes}


def _int_attr(attrs, name: str, default: int) -> int:
    if name not in attrs:
        return default
    return int(attrs[name].i)


def _ints_attr(attrs, name: str, default: tuple[int, ...]) -> tuple[int, ...]:
    if name not in attrs:
        return default
    return tuple(int(v) for v in attrs[name].ints)


def _float_attr(attrs, name: str, default: float) -> Fraction:
    if name not in attrs:
        return Fraction(default)
    return float_to_rational(attrs[name].f)


def _conv_like_attrs(node: NodeMsg, kernel_default: tuple[int, int] | None, ctx: str):
    attrs = _attr_map(node)
    if _ints_attr(attrs, "dilations", (1, 1)) != (1, 1):
        raise UnsupportedAttribute(f"{ctx}: dilations != 1 not supported")
    auto_pad = attrs["auto_pad"].s.decode() if "auto_pad" in attrs else "NOTSET"
    if auto_pad not in ("", "NOTSET"):
        raise UnsupportedAttribute(f"{ctx}: auto_pad {auto_pad!r} not supported")
    kernel = _ints_attr(attrs, "kernel_shape", kernel_default or ())
    if len(kernel) != 2:
        raise UnsupportedAttribute(f"{ctx}: only 2-D kernels supported, got {kernel}")
    strides = _ints_attr(attrs, "strides", (1, 1))
    if len(strides) != 2 or any(s < 1 for s in strides):
        raise UnsupportedAttribute(f"{ctx}: bad strides {strides}")
    pads = _ints_attr(attrs, "pads", (0, 0, 0, 0))
    if len(pads) != 4 or any(p < 0 for p in pads):
        raise UnsupportedAttribute(f"{ctx}: bad pads {pads}")
    return kernel, strides, pads


def _convert_node(node: NodeMsg, index: int, tensors: dict[str, RationalTensor]) -> NierNode:
    name = node.name or f"{node.op_type.lower()}_{index}"
    ctx = f"node {name!r} ({node.op_type})"
    inputs = tuple(n for n in node.inputs if n)
    attrs = _attr_map(node)

    if node.op_type in ("Relu", "Identity", "Add", "MatMul"):
        kind = {"Relu": "Relu", "Identity": "Identity", "Add": "Add", "MatMul": "MatMul"}[node.op_type]
        return NierNode(kind, name, inputs, tuple(node.outputs), {})

    if node.op_type == "Flatten":
        axis = _int_attr(attrs, "axis", 1)
        if axis < 0:
            raise UnsupportedAttribute(f"{ctx}: negative flatten axis not supported")
        return NierNode("Flatten", name, inputs, tuple(node.outputs), {"axis": axis})

    if node.op_type == "Gemm":
        if _int_attr(attrs, "transA", 0) != 0:
            raise UnsupportedAttribute(f"{ctx}: transA=1 not supported")
        return NierNode(
            "Gemm",
            name,
            inputs,
            tuple(node.outputs),
            {
                "alpha": _float_attr(attrs, "alpha", 1.0),
                "beta": _float_attr(attrs, "beta", 1.0),
                "transB": _int_attr(attrs, "transB", 0),
            },
        )

    if node.op_type == "Conv":
        if _int_attr(attrs, "group", 1) != 1:
            raise UnsupportedAttribute(f"{ctx}: group != 1 not supported")
        # kernel_shape defaults to the spatial dims of the weight tensor
        kernel_default = None
        if len(inputs) >= 2 and inputs[1] in tensors:
            wdims = tensors[inputs[1]].shape.dims
            if len(wdims) == 4:
                kernel_default = (wdims[2], wdims[3])
        kernel, strides, pads = _conv_like_attrs(node, kernel_default, ctx)
        return NierNode(
            "Conv2D",
            name,
            inputs,
            tuple(node.outputs),
            {"kernel": kernel, "strides": strides, "pads": pads},
        )

    if node.op_type == "MaxPool":
        if "kernel_shape" not in attrs:
            raise UnsupportedAttribute(f"{ctx}: kernel_shape is required")
        if _int_attr(attrs, "ceil_mode", 0) != 0:
            raise UnsupportedAttribute(f"{ctx}: ceil_mode not supported")
        kernel, strides, pads = _conv_like_attrs(node, None, ctx)
        return NierNode(
            "MaxPool2D",
            name,
            inputs,
            tuple(node.outputs),
            {"kernel": kernel, "strides": strides, "pads": pads},
        )

    if node.op_type == "Constant":
        if "value" not in attrs or attrs["value"].t is None:
            raise UnsupportedAttribute(f"{ctx}: only tensor-valued Constant supported")
        value = attrs["value"].t
        _validate_initializer(value)
        return NierNode(
            "Constant", name, (), tuple(node.outputs), {"value": tensor_to_rational(value)}
        )

    raise UnsupportedOperator(node.op_type, name)


def to_nier(model: OnnxSubsetModel) -> NierGraph:
    """Convert a validated subset model to the graph IR.

    All initializers become rational tensors; attribute defaults are
    resolved; the node list is the (already valid) ONNX order, which
    topo_order normalizes downstream.
    """
    tensors: dict[str, RationalTensor] = {}
    for raw in model.initializers:
        tensors[raw.name] = tensor_to_rational(raw)

    nodes = tuple(
        _convert_node(raw, i, tensors) for i, raw in enumerate(model.graph_nodes)
    )

    def to_shape(name: str, dims: tuple[int, ...]) -> TensorShape:
        if any(d < 1 for d in dims):
            raise ShapeMismatch(
                f"tensor {name!r} has non-concrete shape {dims}; dynamic dims unsupported"
            )
        return TensorShape(dims)

    inputs = tuple((n, to_shape(n, d)) for n, d in model.input_specs)
    outputs = tuple((n, to_shape(n, d)) for n, d in model.output_specs)
    graph = NierGraph(
        name=model.name,
        nodes=nodes,
        tensors=tensors,
        inputs=inputs,
        outputs=outputs,
    )
    graph.producer_map()  # validates single assignment
    return graph


def load_graph(data: bytes) -> NierGraph:
    """parse_onnx + to_nier + shape inference in one step."""
    from .nier import infer_shapes

    return infer_shapes(to_nier(parse_onnx(data)))
