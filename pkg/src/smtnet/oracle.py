"""Exact-rational reference evaluation and exhaustive property checking.

This is the ground truth the rest of the pipeline is measured against:
no floats, no rounding, anywhere.  The brute-force verifier enumerates
every parameter configuration the simulator can produce (all obstacle
subsets) in lexicographic row-major order, so Falsified witnesses are
deterministic.

For plain feed-forward stacks (Flatten/Gemm/MatMul/Add/Relu chains) the
enumeration runs as batched integer matrix arithmetic over a common
denominator; that path is exact too (dyadic scaling, no division) and is
only taken when a conservative magnitude bound fits in int64.  Everything
else falls back to per-image evaluation with Fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyWindow, GridTooLarge, ShapeMismatch, UnsupportedDomain
from .nier import (
    NierGraph,
    NierNode,
    RationalTensor,
    TensorShape,
    broadcast_shapes,
    infer_shapes,
    node_output_shape,
    topo_order,
)
from .properties import BinaryDomain, PropertySpec, SimulatorSpec, violates
from .verdict import CounterExample, Verdict

DEFAULT_MAX_RENDERS = 1 << 20
_INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class ExactActivationTrace:
    """Every tensor value touched by one forward pass, exactly."""

    tensors: Mapping[str, RationalTensor]
    outputs: tuple[RationalTensor, ...]


def _bcast_value(t: RationalTensor, out_idx: tuple[int, ...]) -> Fraction:
    idx = out_idx[len(out_idx) - t.shape.rank :]
    idx = tuple(0 if t.shape.dims[i] == 1 else idx[i] for i in range(t.shape.rank))
    return t.data[t.shape.flat_index(idx)]


def eval_node(node: NierNode, inputs: list[RationalTensor]) -> RationalTensor:
    """Exact forward semantics of a single operator."""
    kind = node.op_kind
    out_shape = node_output_shape(node, [t.shape for t in inputs])

    if kind == "Constant":
        return node.attrs["value"]  # type: ignore[return-value]
    if kind == "Identity":
        return inputs[0]
    if kind == "Flatten":
        return RationalTensor(out_shape, inputs[0].data)
    if kind == "Relu":
        return RationalTensor(
            out_shape,
            tuple(v if v >= 0 else Fraction(0) for v in inputs[0].data),
        )
    if kind == "Add":
        a, b = inputs
        data = tuple(
            _bcast_value(a, out_shape.multi_index(f)) + _bcast_value(b, out_shape.multi_index(f))
            for f in range(out_shape.count)
        )
        return RationalTensor(out_shape, data)
    if kind in ("MatMul", "Gemm"):
        a, b = inputs[0], inputs[1]
        alpha = Fraction(node.attrs.get("alpha", 1)) if kind == "Gemm" else Fraction(1)
        beta = Fraction(node.attrs.get("beta", 1)) if kind == "Gemm" else Fraction(1)
        trans_b = bool(node.attrs.get("transB", 0)) if kind == "Gemm" else False
        m, k = a.shape.dims
        n = out_shape.dims[1]
        data = []
        for i in range(m):
            for j in range(n):
                acc = Fraction(0)
                for kk in range(k):
                    bj = b.at(j, kk) if trans_b else b.at(kk, j)
                    acc += a.at(i, kk) * bj
                acc *= alpha
                if kind == "Gemm" and len(inputs) == 3:
                    acc += beta * _bcast_value(inputs[2], (i, j))
                data.append(acc)
        return RationalTensor(out_shape, tuple(data))
    if kind == "Conv2D":
        x, kern = inputs[0], inputs[1]
        bias = inputs[2] if len(inputs) == 3 else None
        _, cin, h, w = x.shape.dims
        cout, _, kh, kw = kern.shape.dims
        sh, sw = node.attrs["strides"]
        pt, pl, _, _ = node.attrs["pads"]
        _, _, oh, ow = out_shape.dims
        data = []
        for co in range(cout):
            base = bias.data[co] if bias is not None else Fraction(0)
            for oy in range(oh):
                for ox in range(ow):
                    acc = base
                    for ci in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                iy, ix = oy * sh - pt + ky, ox * sw - pl + kx
                                if 0 <= iy < h and 0 <= ix < w:
                                    acc += kern.at(co, ci, ky, kx) * x.at(0, ci, iy, ix)
                    data.append(acc)
        return RationalTensor(out_shape, tuple(data))
    if kind == "MaxPool2D":
        x = inputs[0]
        _, c, h, w = x.shape.dims
        kh, kw = node.attrs["kernel"]
        sh, sw = node.attrs["strides"]
        pt, pl, _, _ = node.attrs["pads"]
        _, _, oh, ow = out_shape.dims
        data = []
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    best: Fraction | None = None
                    for ky in range(kh):
                        for kx in range(kw):
                            iy, ix = oy * sh - pt + ky, ox * sw - pl + kx
                            if 0 <= iy < h and 0 <= ix < w:
                                v = x.at(0, ci, iy, ix)
                                if best is None or v > best:
                                    best = v
                    if best is None:
                        raise EmptyWindow(
                            f"node {node.name!r}: window at ({oy},{ox}) covers no input"
                        )
                    data.append(best)
        return RationalTensor(out_shape, tuple(data))
    raise ShapeMismatch(f"no exact kernel for op {kind}")


def eval_exact(graph: NierGraph, input_tensor: RationalTensor) -> ExactActivationTrace:
    """Run the whole graph on one input with arbitrary-precision rationals."""
    if len(graph.inputs) != 1:
        raise ShapeMismatch("eval_exact expects a single-input graph")
    input_name, in_shape = graph.inputs[0]
    if input_tensor.shape.dims != in_shape.dims:
        raise ShapeMismatch(
            f"input shape {input_tensor.shape} does not match declared {in_shape}"
        )
    values: dict[str, RationalTensor] = {input_name: input_tensor}
    values.update(graph.tensors)
    for node in topo_order(graph):
        values[node.output] = eval_node(node, [values[n] for n in node.inputs])
    outputs = tuple(values[name] for name, _ in graph.outputs)
    return ExactActivationTrace(tensors=values, outputs=outputs)


def image_to_tensor(image: Sequence[Sequence[Fraction]], shape: TensorShape) -> RationalTensor:
    flat = tuple(Fraction(v) for row in image for v in row)
    return RationalTensor(shape, flat)


def params_from_index(k: int, h: int, w: int) -> frozenset[tuple[int, int]]:
    """Obstacle set for enumeration index ``k`` (pixel 0 is the MSB, so
    counting k upward walks pixel vectors in lexicographic order)."""
    n = h * w
    return frozenset(
        (i // w, i % w) for i in range(n) if (k >> (n - 1 - i)) & 1
    )


# --- vectorized enumeration ----------------------------------------------------


def _plan_vectorized(graph: NierGraph, sim: SimulatorSpec):
    """Build a batched integer evaluation plan, or None if unsupported/unsafe.

    Supported: a chain where each node has exactly one non-constant input
    and the op is Flatten/Identity/Relu/Gemm/MatMul/Add.  The plan tracks a
    conservative per-element magnitude bound; if any step could exceed
    int64, the plan is rejected.
    """
    if not isinstance(sim.domain, BinaryDomain):
        return None
    graph = infer_shapes(graph)
    input_name = graph.inputs[0][0]
    steps = []  # (op, payload)
    current = input_name

    lo, hi = sim.domain.lo, sim.domain.hi
    in_den = math.lcm(lo.denominator, hi.denominator)
    lo_i = lo.numerator * (in_den // lo.denominator)
    hi_i = hi.numerator * (in_den // hi.denominator)

    n = sim.pixel_count
    den = in_den
    bounds = [max(abs(lo_i), abs(hi_i))] * n

    for node in topo_order(graph):
        if node.op_kind == "Constant":
            continue
        non_const = [i for i in node.inputs if graph.constant_value(i) is None]
        if non_const != [current]:
            return None
        if node.op_kind in ("Flatten", "Identity"):
            steps.append(("id", None))
        elif node.op_kind == "Relu":
            steps.append(("relu", None))
        elif node.op_kind in ("MatMul", "Gemm"):
            if node.op_kind == "Gemm":
                alpha = Fraction(node.attrs.get("alpha", 1))
                beta = Fraction(node.attrs.get("beta", 1))
                trans_b = bool(node.attrs.get("transB", 0))
            else:
                alpha, beta, trans_b = Fraction(1), Fraction(1), False
            if node.inputs[0] != current or graph.constant_value(node.inputs[1]) is None:
                return None  # weights on the left not supported by the fast path
            w = graph.constant_value(node.inputs[1])
            rows = w.shape.dims[0]
            cols = w.shape.dims[1]
            if trans_b:
                mat = [[alpha * w.at(j, i) for j in range(rows)] for i in range(cols)]
            else:
                mat = [[alpha * w.at(i, j) for j in range(cols)] for i in range(rows)]
            k_dim, n_dim = len(mat), len(mat[0])
            wden = math.lcm(*(f.denominator for row in mat for f in row))
            wints = [[f.numerator * (wden // f.denominator) for f in row] for row in mat]
            bias_ints = None
            bden = 1
            if node.op_kind == "Gemm" and len(node.inputs) == 3:
                c = graph.constant_value(node.inputs[2])
                if c is None:
                    return None
                cvals = [beta * v for v in c.data]
                if len(cvals) != n_dim:
                    return None
                bden = math.lcm(*(f.denominator for f in cvals))
                bias_ints = [f.numerator * (bden // f.denominator) for f in cvals]
            if len(bounds) != k_dim:
                return None
            new_den = den * wden
            new_bounds = [
                sum(abs(wints[kk][j]) * bounds[kk] for kk in range(k_dim))
                for j in range(n_dim)
            ]
            if bias_ints is not None:
                align = math.lcm(new_den, bden)
                f_acc, f_bias = align // new_den, align // bden
                new_bounds = [
                    b * f_acc + abs(bias_ints[j]) * f_bias for j, b in enumerate(new_bounds)
                ]
                steps.append(("affine", (wints, f_acc, [v * f_bias for v in bias_ints])))
                new_den = align
            else:
                steps.append(("affine", (wints, 1, None)))
            den, bounds = new_den, new_bounds
        elif node.op_kind == "Add":
            other = node.inputs[1] if node.inputs[0] == current else node.inputs[0]
            c = graph.constant_value(other)
            if c is None:
                return None
            out_shape = broadcast_shapes(graph.shapes[current], c.shape, "add")
            if out_shape.count != len(bounds) or c.shape.count not in (1, len(bounds)):
                return None
            cden = math.lcm(*(v.denominator for v in c.data))
            cints = [v.numerator * (cden // v.denominator) for v in c.data]
            if len(cints) == 1:
                cints = cints * len(bounds)
            align = math.lcm(den, cden)
            f_x, f_c = align // den, align // cden
            bounds = [b * f_x + abs(cints[j]) * f_c for j, b in enumerate(bounds)]
            steps.append(("add", (f_x, [v * f_c for v in cints])))
            den = align
        else:
            return None
        current = node.output
    if current != graph.outputs[0][0]:
        return None
    if any(b >= _INT64_SAFE for b in bounds):
        return None
    return steps, lo_i, hi_i


def _run_vectorized_chunk(steps, batch: np.ndarray) -> np.ndarray:
    x = batch
    for op, payload in steps:
        if op == "id":
            continue
        if op == "relu":
            x = np.maximum(x, 0)
        elif op == "affine":
            wints, f_acc, bias = payload
            w = np.array(wints, dtype=np.int64)
            x = (x @ w) * f_acc
            if bias is not None:
                x = x + np.array(bias, dtype=np.int64)
        elif op == "add":
            f_x, cints = payload
            x = x * f_x + np.array(cints, dtype=np.int64)
    return x


def brute_force_verify(
    graph: NierGraph,
    sim: SimulatorSpec,
    prop: PropertySpec,
    max_renders: int = DEFAULT_MAX_RENDERS,
) -> Verdict:
    """Enumerate all obstacle sets; exact per-image property check.

    Returns Proven, or Falsified with the lexicographically first violating
    parameter set (row-major pixels, clear before obstacle).
    """
    if not isinstance(sim.domain, BinaryDomain):
        raise UnsupportedDomain("brute-force verification needs a binary pixel domain")
    n = sim.pixel_count
    total = 1 << n
    if total > max_renders:
        raise GridTooLarge(
            f"{sim.grid_h}x{sim.grid_w} grid means {total} renders, cap is {max_renders}"
        )
    graph = infer_shapes(graph)
    in_shape = graph.inputs[0][1]
    if in_shape.dims != (1, 1, sim.grid_h, sim.grid_w):
        raise ShapeMismatch(
            f"model input {in_shape} does not match grid {sim.grid_h}x{sim.grid_w}"
        )

    from .properties import PropertyKind

    plan = None
    if (
        prop.kind in (PropertyKind.DANGER_ZONE_ALERT, PropertyKind.NO_FALSE_ALERT)
        and prop.output_mode == "two-logit"
    ):
        plan = _plan_vectorized(graph, sim)

    if plan is not None:
        steps, lo_i, hi_i = plan
        zone_mask = np.zeros(n, dtype=bool)
        for r, c in prop.danger_zone.cells():
            zone_mask[r * sim.grid_w + c] = True
        shifts = np.array([n - 1 - i for i in range(n)], dtype=np.int64)
        chunk = 1 << 16
        for start in range(0, total, chunk):
            ks = np.arange(start, min(start + chunk, total), dtype=np.int64)
            bits = (ks[:, None] >> shifts[None, :]) & 1
            batch = lo_i + (hi_i - lo_i) * bits
            out = _run_vectorized_chunk(steps, batch.astype(np.int64))
            occupied = (bits[:, zone_mask] == 1).any(axis=1)
            fires = out[:, prop.alert_index] > out[:, prop.no_alert_index]
            if prop.kind == PropertyKind.DANGER_ZONE_ALERT:
                bad = occupied & ~fires
            else:
                bad = ~occupied & fires
            hits = np.nonzero(bad)[0]
            if hits.size:
                k = int(ks[hits[0]])
                params = params_from_index(k, sim.grid_h, sim.grid_w)
                image = sim.render(params)
                return Verdict.falsified(
                    CounterExample(image=image, params=params),
                    confirmed=True,
                    evaluations=k + 1,
                )
        return Verdict.proven(evaluations=total)

    # per-image exact path
    for k in range(total):
        params = params_from_index(k, sim.grid_h, sim.grid_w)
        image = sim.render(params)
        trace = eval_exact(graph, image_to_tensor(image, in_shape))
        outputs = list(trace.outputs[0].data)
        if violates(prop, sim, image, outputs):
            return Verdict.falsified(
                CounterExample(image=image, params=params),
                confirmed=True,
                evaluations=k + 1,
            )
    return Verdict.proven(evaluations=total)
