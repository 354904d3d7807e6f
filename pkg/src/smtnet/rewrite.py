"""Semantics-preserving graph rewrites.

Three source rules (constant folding, Identity elimination,
Flatten-of-Flatten fusion) plus the Gemm normalization that reduces
alpha=beta=1 Gemm nodes to MatMul + Add.  Every rule leaves exact-oracle
outputs unchanged on every input; rules that do not apply are skipped.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

from .nier import NierGraph, NierNode, RationalTensor, TensorShape, infer_shapes, topo_order

RULE_FOLD_CONSTANTS = "fold-constants"
RULE_ELIMINATE_IDENTITY = "eliminate-identity"
RULE_FUSE_FLATTEN = "fuse-flatten"
RULE_NORMALIZE_GEMM = "normalize-gemm"

DEFAULT_RULES = (
    RULE_FOLD_CONSTANTS,
    RULE_ELIMINATE_IDENTITY,
    RULE_FUSE_FLATTEN,
    RULE_NORMALIZE_GEMM,
)


def _rename_inputs(nodes, mapping: dict[str, str]):
    out = []
    for node in nodes:
        if any(name in mapping for name in node.inputs):
            new_inputs = tuple(mapping.get(name, name) for name in node.inputs)
            node = replace(node, inputs=new_inputs)
        out.append(node)
    return out


def _fold_constants(graph: NierGraph) -> NierGraph | None:
    from .oracle import eval_node  # local import; oracle depends on properties

    changed = False
    nodes = list(graph.nodes)
    for i, node in enumerate(nodes):
        if node.op_kind == "Constant":
            continue
        values = [graph.constant_value(name) for name in node.inputs]
        if any(v is None for v in values):
            continue
        folded = eval_node(node, values)  # exact; no rounding introduced
        nodes[i] = NierNode(
            op_kind="Constant",
            name=node.name,
            inputs=(),
            outputs=node.outputs,
            attrs={"value": folded},
        )
        graph = replace(graph, nodes=tuple(nodes), shapes={})
        changed = True
    return graph if changed else None


def _eliminate_identity(graph: NierGraph) -> NierGraph | None:
    output_names = set(graph.output_names)
    mapping: dict[str, str] = {}
    kept = []
    for node in graph.nodes:
        if node.op_kind == "Identity" and node.output not in output_names:
            mapping[node.output] = mapping.get(node.inputs[0], node.inputs[0])
            continue
        kept.append(node)
    if not mapping:
        return None
    return replace(graph, nodes=tuple(_rename_inputs(kept, mapping)), shapes={})


def _fuse_flatten(graph: NierGraph) -> NierGraph | None:
    producers = {node.output: node for node in graph.nodes}
    consumers: dict[str, int] = {}
    for node in graph.nodes:
        for name in node.inputs:
            consumers[name] = consumers.get(name, 0) + 1

    graph_shaped = infer_shapes(graph)
    changed = False
    nodes = list(graph.nodes)
    for i, node in enumerate(nodes):
        if node.op_kind != "Flatten":
            continue
        inner = producers.get(node.inputs[0])
        if inner is None or inner.op_kind != "Flatten":
            continue
        # compose the two reshapes: the outer axis over the inner's 2-D
        # output picks axis 0, rank, or keeps the inner split
        outer_axis = int(node.attrs.get("axis", 1))
        inner_axis = int(inner.attrs.get("axis", 1))
        source_rank = graph_shaped.shapes[inner.inputs[0]].rank
        if outer_axis <= 0:
            fused_axis = 0
        elif outer_axis == 1:
            fused_axis = inner_axis
        else:  # outer_axis >= 2 on a 2-D tensor: everything to the left
            fused_axis = source_rank
        nodes[i] = replace(node, inputs=(inner.inputs[0],), attrs={"axis": fused_axis})
        changed = True
    if not changed:
        return None
    # drop inner flattens that lost their only consumer
    used = set()
    for node in nodes:
        used.update(node.inputs)
    used.update(graph.output_names)
    nodes = [n for n in nodes if n.op_kind != "Flatten" or n.output in used]
    return replace(graph, nodes=tuple(nodes), shapes={})


def _transpose_2d(t: RationalTensor) -> RationalTensor:
    rows, cols = t.shape.dims
    data = tuple(t.at(r, c) for c in range(cols) for r in range(rows))
    return RationalTensor(TensorShape((cols, rows)), data)


def _normalize_gemm(graph: NierGraph) -> NierGraph | None:
    """Gemm(alpha=1, beta=1) with a constant B becomes MatMul (+ Add)."""
    changed = False
    nodes = list(graph.nodes)
    tensors = dict(graph.tensors)
    out: list[NierNode] = []
    for node in nodes:
        if node.op_kind != "Gemm":
            out.append(node)
            continue
        alpha = Fraction(node.attrs.get("alpha", 1))
        beta = Fraction(node.attrs.get("beta", 1))
        if alpha != 1 or beta != 1:
            out.append(node)
            continue
        b_const = graph.constant_value(node.inputs[1])
        trans_b = bool(node.attrs.get("transB", 0))
        b_name = node.inputs[1]
        if trans_b:
            if b_const is None:
                out.append(node)  # cannot transpose a runtime tensor
                continue
            b_name = f"{node.inputs[1]}__t"
            while b_name in tensors or b_name in {n.output for n in nodes}:
                b_name += "_"
            tensors[b_name] = _transpose_2d(b_const)
        changed = True
        if len(node.inputs) == 3:
            mm_out = f"{node.output}__mm"
            while mm_out in tensors or mm_out in {n.output for n in nodes}:
                mm_out += "_"
            out.append(NierNode("MatMul", f"{node.name}__mm", (node.inputs[0], b_name), (mm_out,)))
            out.append(NierNode("Add", f"{node.name}__add", (mm_out, node.inputs[2]), node.outputs))
        else:
            out.append(NierNode("MatMul", f"{node.name}__mm", (node.inputs[0], b_name), node.outputs))
    if not changed:
        return None
    return replace(graph, nodes=tuple(out), tensors=tensors, shapes={})


_RULE_FUNCS = {
    RULE_FOLD_CONSTANTS: _fold_constants,
    RULE_ELIMINATE_IDENTITY: _eliminate_identity,
    RULE_FUSE_FLATTEN: _fuse_flatten,
    RULE_NORMALIZE_GEMM: _normalize_gemm,
}


def rewrite(graph: NierGraph, rules: tuple[str, ...] = DEFAULT_RULES) -> NierGraph:
    """Apply the rule set to a fixpoint; unknown rule names are an error."""
    for rule in rules:
        if rule not in _RULE_FUNCS:
            raise ValueError(f"unknown rewrite rule {rule!r}")
    had_shapes = bool(graph.shapes)
    budget = 4 * (len(graph.nodes) + 2)
    changed = True
    while changed and budget > 0:
        changed = False
        for rule in rules:
            result = _RULE_FUNCS[rule](graph)
            if result is not None:
                topo_order(result)  # defensive: rules must keep the DAG valid
                graph = result
                changed = True
        budget -= 1
    if had_shapes:
        graph = infer_shapes(graph)
    return graph
