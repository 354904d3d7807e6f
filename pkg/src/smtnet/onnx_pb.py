"""Minimal protobuf wire-format reader and writer for the ONNX subset we consume.

The full ONNX schema is large; this pipeline only touches the messages and
fields below (numbers are the official field tags from onnx.proto3).  The
reader skips unknown fields, so models produced by mainstream exporters
load fine; the writer emits only this subset and exists for fixtures and
for the training frontend's output format.

    ModelProto      ir_version=1, producer_name=2, graph=7, opset_import=8
    OperatorSetIdProto   domain=1, version=2
    GraphProto      node=1, name=2, initializer=5, input=11, output=12
    NodeProto       input=1, output=2, name=3, op_type=4, attribute=5, domain=7
    AttributeProto  name=1, f=2, i=3, s=4, t=5, floats=7, ints=8, type=20
    TensorProto     dims=1, data_type=2, float_data=4, int64_data=7, name=8,
                    raw_data=9, double_data=10
    ValueInfoProto  name=1, type=2
    TypeProto       tensor_type=1
    TypeProto.Tensor     elem_type=1, shape=2
    TensorShapeProto     dim=1
    TensorShapeProto.Dimension   dim_value=1, dim_param=2

Anything outside this subset that matters semantically (unsupported
operators, dtypes) is rejected later by the ingest layer; here we only
reject bytes that do not decode as protobuf at all.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import MalformedProtobuf

WIRE_VARINT = 0
WIRE_FIXED64 = 1
WIRE_LEN = 2
WIRE_FIXED32 = 5

# TensorProto.DataType values we care about
DTYPE_FLOAT = 1
DTYPE_INT64 = 7
DTYPE_DOUBLE = 11

ATTR_FLOAT = 1
ATTR_INT = 2
ATTR_STRING = 3
ATTR_TENSOR = 4
ATTR_FLOATS = 6
ATTR_INTS = 7


@dataclass
class TensorMsg:
    name: str = ""
    dims: list[int] = field(default_factory=list)
    data_type: int = 0
    raw_data: bytes | None = None
    float_data: list[float] = field(default_factory=list)
    double_data: list[float] = field(default_factory=list)
    int64_data: list[int] = field(default_factory=list)


@dataclass
class AttributeMsg:
    name: str = ""
    type: int = 0
    f: float = 0.0
    i: int = 0
    s: bytes = b""
    t: TensorMsg | None = None
    floats: list[float] = field(default_factory=list)
    ints: list[int] = field(default_factory=list)


@dataclass
class NodeMsg:
    op_type: str = ""
    name: str = ""
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    attributes: list[AttributeMsg] = field(default_factory=list)


@dataclass
class ValueInfoMsg:
    name: str = ""
    elem_type: int = 0
    # dim_param entries (symbolic dims) come through as None
    dims: list[int | None] = field(default_factory=list)


@dataclass
class GraphMsg:
    name: str = ""
    nodes: list[NodeMsg] = field(default_factory=list)
    initializers: list[TensorMsg] = field(default_factory=list)
    inputs: list[ValueInfoMsg] = field(default_factory=list)
    outputs: list[ValueInfoMsg] = field(default_factory=list)


@dataclass
class ModelMsg:
    ir_version: int = 0
    producer_name: str = ""
    opset_imports: list[tuple[str, int]] = field(default_factory=list)
    graph: GraphMsg | None = None


# --- decoding ---------------------------------------------------------------


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise MalformedProtobuf("truncated varint")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift >= 64:
            raise MalformedProtobuf("varint longer than 64 bits")


def _to_signed64(value: int) -> int:
    return value - (1 << 64) if value & (1 << 63) else value


def _read_len_delimited(data: bytes, pos: int) -> tuple[bytes, int]:
    length, pos = _read_varint(data, pos)
    end = pos + length
    if end > len(data):
        raise MalformedProtobuf("length-delimited field overruns buffer")
    return data[pos:end], end


def _skip_field(data: bytes, pos: int, wire_type: int) -> int:
    if wire_type == WIRE_VARINT:
        _, pos = _read_varint(data, pos)
    elif wire_type == WIRE_FIXED64:
        pos += 8
    elif wire_type == WIRE_FIXED32:
        pos += 4
    elif wire_type == WIRE_LEN:
        _, pos = _read_len_delimited(data, pos)
    else:
        raise MalformedProtobuf(f"unsupported wire type {wire_type}")
    if pos > len(data):
        raise MalformedProtobuf("field overruns buffer")
    return pos


def _fields(data: bytes):
    """Yield (field_number, wire_type, payload_or_pos) walking a message.

    For WIRE_LEN fields the payload bytes are yielded; for varints the
    decoded integer; fixed32/fixed64 yield the raw little-endian bytes.
    """
    pos = 0
    while pos < len(data):
        tag, pos = _read_varint(data, pos)
        number, wire_type = tag >> 3, tag & 0x7
        if number == 0:
            raise MalformedProtobuf("field number 0")
        if wire_type == WIRE_VARINT:
            value, pos = _read_varint(data, pos)
        elif wire_type == WIRE_LEN:
            value, pos = _read_len_delimited(data, pos)
        elif wire_type == WIRE_FIXED32:
            if pos + 4 > len(data):
                raise MalformedProtobuf("truncated fixed32")
            value, pos = data[pos : pos + 4], pos + 4
        elif wire_type == WIRE_FIXED64:
            if pos + 8 > len(data):
                raise MalformedProtobuf("truncated fixed64")
            value, pos = data[pos : pos + 8], pos + 8
        else:
            raise MalformedProtobuf(f"unsupported wire type {wire_type}")
        yield number, wire_type, value


def _expect_len(wire_type: int, what: str) -> None:
    if wire_type != WIRE_LEN:
        raise MalformedProtobuf(f"{what}: expected length-delimited field")


def _as_str(value: bytes) -> str:
    try:
        return value.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedProtobuf(f"invalid UTF-8 in string field: {exc}") from exc


def _parse_packed_or_single(value, wire_type, fmt: str, width: int) -> list[float]:
    # floats/doubles may arrive packed (proto3 default) or one per field
    if wire_type == WIRE_LEN:
        if len(value) % width:
            raise MalformedProtobuf("packed scalar payload not a multiple of element size")
        return list(struct.unpack(f"<{len(value) // width}{fmt}", value))
    return list(struct.unpack(f"<{fmt}", value))


def _parse_tensor(data: bytes) -> TensorMsg:
    msg = TensorMsg()
    for num, wt, val in _fields(data):
        if num == 1:
            if wt == WIRE_LEN:  # packed dims
                pos = 0
                while pos < len(val):
                    d, pos = _read_varint(val, pos)
                    msg.dims.append(_to_signed64(d))
            else:
                msg.dims.append(_to_signed64(val))
        elif num == 2 and wt == WIRE_VARINT:
            msg.data_type = val
        elif num == 4:
            msg.float_data.extend(_parse_packed_or_single(val, wt, "f", 4))
        elif num == 7:
            if wt == WIRE_LEN:
                pos = 0
                while pos < len(val):
                    v, pos = _read_varint(val, pos)
                    msg.int64_data.append(_to_signed64(v))
            else:
                msg.int64_data.append(_to_signed64(val))
        elif num == 8:
            _expect_len(wt, "TensorProto.name")
            msg.name = _as_str(val)
        elif num == 9:
            _expect_len(wt, "TensorProto.raw_data")
            msg.raw_data = bytes(val)
        elif num == 10:
            msg.double_data.extend(_parse_packed_or_single(val, wt, "d", 8))
    return msg


def _parse_attribute(data: bytes) -> AttributeMsg:
    msg = AttributeMsg()
    for num, wt, val in _fields(data):
        if num == 1:
            _expect_len(wt, "AttributeProto.name")
            msg.name = _as_str(val)
        elif num == 2 and wt == WIRE_FIXED32:
            (msg.f,) = struct.unpack("<f", val)
        elif num == 3 and wt == WIRE_VARINT:
            msg.i = _to_signed64(val)
        elif num == 4:
            _expect_len(wt, "AttributeProto.s")
            msg.s = bytes(val)
        elif num == 5:
            _expect_len(wt, "AttributeProto.t")
            msg.t = _parse_tensor(val)
        elif num == 7:
            msg.floats.extend(_parse_packed_or_single(val, wt, "f", 4))
        elif num == 8:
            if wt == WIRE_LEN:
                pos = 0
                while pos < len(val):
                    v, pos = _read_varint(val, pos)
                    msg.ints.append(_to_signed64(v))
            else:
                msg.ints.append(_to_signed64(val))
        elif num == 20 and wt == WIRE_VARINT:
            msg.type = val
    return msg


def _parse_node(data: bytes) -> NodeMsg:
    msg = NodeMsg()
    for num, wt, val in _fields(data):
        if num == 1:
            _expect_len(wt, "NodeProto.input")
            msg.inputs.append(_as_str(val))
        elif num == 2:
            _expect_len(wt, "NodeProto.output")
            msg.outputs.append(_as_str(val))
        elif num == 3:
            _expect_len(wt, "NodeProto.name")
            msg.name = _as_str(val)
        elif num == 4:
            _expect_len(wt, "NodeProto.op_type")
            msg.op_type = _as_str(val)
        elif num == 5:
            _expect_len(wt, "NodeProto.attribute")
            msg.attributes.append(_parse_attribute(val))
    return msg


def _parse_value_info(data: bytes) -> ValueInfoMsg:
    msg = ValueInfoMsg()
    for num, wt, val in _fields(data):
        if num == 1:
            _expect_len(wt, "ValueInfoProto.name")
            msg.name = _as_str(val)
        elif num == 2:
            _expect_len(wt, "ValueInfoProto.type")
            for tnum, twt, tval in _fields(val):
                if tnum == 1 and twt == WIRE_LEN:  # tensor_type
                    for fnum, fwt, fval in _fields(tval):
                        if fnum == 1 and fwt == WIRE_VARINT:
                            msg.elem_type = fval
                        elif fnum == 2 and fwt == WIRE_LEN:  # shape
                            for dnum, dwt, dval in _fields(fval):
                                if dnum == 1 and dwt == WIRE_LEN:  # dim
                                    dim: int | None = None
                                    for inum, iwt, ival in _fields(dval):
                                        if inum == 1 and iwt == WIRE_VARINT:
                                            dim = _to_signed64(ival)
                                    msg.dims.append(dim)
    return msg


def _parse_graph(data: bytes) -> GraphMsg:
    msg = GraphMsg()
    for num, wt, val in _fields(data):
        if num == 1:
            _expect_len(wt, "GraphProto.node")
            msg.nodes.append(_parse_node(val))
        elif num == 2:
            _expect_len(wt, "GraphProto.name")
            msg.name = _as_str(val)
        elif num == 5:
            _expect_len(wt, "GraphProto.initializer")
            msg.initializers.append(_parse_tensor(val))
        elif num == 11:
            _expect_len(wt, "GraphProto.input")
            msg.inputs.append(_parse_value_info(val))
        elif num == 12:
            _expect_len(wt, "GraphProto.output")
            msg.outputs.append(_parse_value_info(val))
    return msg


def load_model(data: bytes) -> ModelMsg:
    """Decode ONNX model bytes. Raises MalformedProtobuf on undecodable input
    or when no graph is present (an empty byte string decodes to an empty
    message, which is not a model)."""
    msg = ModelMsg()
    for num, wt, val in _fields(bytes(data)):
        if num == 1 and wt == WIRE_VARINT:
            msg.ir_version = _to_signed64(val)
        elif num == 2 and wt == WIRE_LEN:
            msg.producer_name = _as_str(val)
        elif num == 7:
            _expect_len(wt, "ModelProto.graph")
            msg.graph = _parse_graph(val)
        elif num == 8:
            _expect_len(wt, "ModelProto.opset_import")
            domain, version = "", 0
            for onum, owt, oval in _fields(val):
                if onum == 1 and owt == WIRE_LEN:
                    domain = _as_str(oval)
                elif onum == 2 and owt == WIRE_VARINT:
                    version = _to_signed64(oval)
            msg.opset_imports.append((domain, version))
    if msg.graph is None:
        raise MalformedProtobuf("model has no graph")
    return msg


# --- encoding ---------------------------------------------------------------


def _varint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _tag(number: int, wire_type: int) -> bytes:
    return _varint((number << 3) | wire_type)


def _len_field(number: int, payload: bytes) -> bytes:
    return _tag(number, WIRE_LEN) + _varint(len(payload)) + payload


def _str_field(number: int, text: str) -> bytes:
    return _len_field(number, text.encode("utf-8"))


def _varint_field(number: int, value: int) -> bytes:
    return _tag(number, WIRE_VARINT) + _varint(value)


def _dump_tensor(msg: TensorMsg) -> bytes:
    out = bytearray()
    if msg.dims:
        out += _len_field(1, b"".join(_varint(d) for d in msg.dims))
    out += _varint_field(2, msg.data_type)
    if msg.float_data:
        out += _len_field(4, struct.pack(f"<{len(msg.float_data)}f", *msg.float_data))
    if msg.int64_data:
        out += _len_field(7, b"".join(_varint(v) for v in msg.int64_data))
    if msg.name:
        out += _str_field(8, msg.name)
    if msg.raw_data is not None:
        out += _len_field(9, msg.raw_data)
    if msg.double_data:
        out += _len_field(10, struct.pack(f"<{len(msg.double_data)}d", *msg.double_data))
    return bytes(out)


def _dump_attribute(msg: AttributeMsg) -> bytes:
    out = bytearray()
    out += _str_field(1, msg.name)
    if msg.type == ATTR_FLOAT:
        out += _tag(2, WIRE_FIXED32) + struct.pack("<f", msg.f)
    elif msg.type == ATTR_INT:
        out += _varint_field(3, msg.i)
    elif msg.type == ATTR_STRING:
        out += _len_field(4, msg.s)
    elif msg.type == ATTR_TENSOR and msg.t is not None:
        out += _len_field(5, _dump_tensor(msg.t))
    elif msg.type == ATTR_FLOATS:
        out += _len_field(7, struct.pack(f"<{len(msg.floats)}f", *msg.floats))
    elif msg.type == ATTR_INTS:
        out += _len_field(8, b"".join(_varint(v) for v in msg.ints))
    out += _varint_field(20, msg.type)
    return bytes(out)


def _dump_node(msg: NodeMsg) -> bytes:
    out = bytearray()
    for name in msg.inputs:
        out += _str_field(1, name)
    for name in msg.outputs:
        out += _str_field(2, name)
    if msg.name:
        out += _str_field(3, msg.name)
    out += _str_field(4, msg.op_type)
    for attr in msg.attributes:
        out += _len_field(5, _dump_attribute(attr))
    return bytes(out)


def _dump_value_info(msg: ValueInfoMsg) -> bytes:
    dims = b"".join(
        _len_field(1, _varint_field(1, d) if d is not None else b"") for d in msg.dims
    )
    tensor_type = _varint_field(1, msg.elem_type) + _len_field(2, dims)
    type_proto = _len_field(1, tensor_type)
    return _str_field(1, msg.name) + _len_field(2, type_proto)


def _dump_graph(msg: GraphMsg) -> bytes:
    out = bytearray()
    for node in msg.nodes:
        out += _len_field(1, _dump_node(node))
    if msg.name:
        out += _str_field(2, msg.name)
    for tensor in msg.initializers:
        out += _len_field(5, _dump_tensor(tensor))
    for vi in msg.inputs:
        out += _len_field(11, _dump_value_info(vi))
    for vi in msg.outputs:
        out += _len_field(12, _dump_value_info(vi))
    return bytes(out)


def dump_model(msg: ModelMsg) -> bytes:
    if msg.graph is None:
        raise ValueError("cannot serialize a model without a graph")
    out = bytearray()
    out += _varint_field(1, msg.ir_version or 7)
    if msg.producer_name:
        out += _str_field(2, msg.producer_name)
    out += _len_field(7, _dump_graph(msg.graph))
    for domain, version in msg.opset_imports or [("", 13)]:
        payload = (_str_field(1, domain) if domain else b"") + _varint_field(2, version)
        out += _len_field(8, payload)
    return bytes(out)
