"""Simulator and property declarations, their SMT encodings, and task files.

A task couples a network with a declarative simulator description (pixel
grid + pixel domain + parameter-to-pixel map) and a property.  The
property is emitted *negated*, so ``sat`` means a counterexample and
``unsat`` proves the property over everything the simulator can generate.

The exact-semantics twin of each encoding lives in :func:`violates`; the
oracle and the counterexample confirmation both go through it, so the
solver path and the enumeration path share one definition of truth.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .errors import MissingVariable, ShapeMismatch, SpecFormatError, UnsupportedNorm
from .lowering import (
    SEC_INPUT_DOMAIN,
    SEC_PROPERTY,
    ConstraintSystem,
    Term,
    input_var_name,
    lower_graph,
    output_var_name,
    tand,
    tcmp,
    tite,
    tor,
    tq,
    tsub,
    tsum,
    tmul,
    tvar,
    emit_smtlib,
)
from .nier import NierGraph, TensorShape

TASK_SCHEMA_VERSION = 1


class PropertyKind(str, Enum):
    DANGER_ZONE_ALERT = "danger-zone-alert"
    NO_FALSE_ALERT = "no-false-alert"
    IDENTITY_RECONSTRUCTION = "identity-reconstruction"
    TOLERANCE_RECONSTRUCTION = "tolerance-reconstruction"
    IO_CONTRACT = "io-contract"


@dataclass(frozen=True)
class BinaryDomain:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SpecFormatError(f"binary domain needs lo < hi, got {self.lo}, {self.hi}")


@dataclass(frozen=True)
class IntervalDomain:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SpecFormatError(f"interval domain needs lo < hi, got {self.lo}, {self.hi}")


PixelDomain = BinaryDomain | IntervalDomain


@dataclass(frozen=True)
class SimulatorSpec:
    """The toy generator: parameters are obstacle coordinates; pixel (h, w)
    renders hi iff (h, w) is in the parameter set, else lo."""

    grid_h: int
    grid_w: int
    domain: PixelDomain

    def __post_init__(self):
        if self.grid_h < 1 or self.grid_w < 1:
            raise SpecFormatError("grid dimensions must be >= 1")

    @property
    def pixel_count(self) -> int:
        return self.grid_h * self.grid_w

    def render(self, params: Iterable[tuple[int, int]]) -> tuple[tuple[Fraction, ...], ...]:
        """g(s): obstacle coordinate set -> exact pixel grid."""
        coords = set(params)
        for r, c in coords:
            if not (0 <= r < self.grid_h and 0 <= c < self.grid_w):
                raise SpecFormatError(f"obstacle ({r},{c}) outside {self.grid_h}x{self.grid_w} grid")
        return tuple(
            tuple(
                self.domain.hi if (r, c) in coords else self.domain.lo
                for c in range(self.grid_w)
            )
            for r in range(self.grid_h)
        )


@dataclass(frozen=True)
class DangerZone:
    """Inclusive rectangular pixel region."""

    row_lo: int
    row_hi: int
    col_lo: int
    col_hi: int

    def cells(self) -> Iterable[tuple[int, int]]:
        for r in range(self.row_lo, self.row_hi + 1):
            for c in range(self.col_lo, self.col_hi + 1):
                yield (r, c)

    def validate(self, sim: SimulatorSpec) -> None:
        ok = (
            0 <= self.row_lo <= self.row_hi < sim.grid_h
            and 0 <= self.col_lo <= self.col_hi < sim.grid_w
        )
        if not ok:
            raise SpecFormatError(
                f"danger zone {self} not inside {sim.grid_h}x{sim.grid_w} grid"
            )


def bottom_half_zone(sim: SimulatorSpec) -> DangerZone:
    """The last ceil(h/2) rows, full width."""
    return DangerZone(sim.grid_h // 2, sim.grid_h - 1, 0, sim.grid_w - 1)


# io-contract constraints: sum of coeff * var {<=,<,>=,>,=} rhs over
# input/output scalars addressed by flat index.
@dataclass(frozen=True)
class LinTerm:
    coeff: Fraction
    var: tuple[str, int]  # ("in" | "out", flat index)


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[LinTerm, ...]
    op: str
    rhs: Fraction

    def __post_init__(self):
        if self.op not in ("<=", "<", ">=", ">", "="):
            raise SpecFormatError(f"bad comparison {self.op!r}")


_NEGATED_OP = {"<=": ">", "<": ">=", ">=": "<", ">": "<="}


@dataclass(frozen=True)
class PropertySpec:
    kind: PropertyKind
    danger_zone: DangerZone | None = None
    epsilon: Fraction | None = None
    norm: str | None = None  # "linf" | "l1"
    pre: tuple[LinearConstraint, ...] = ()
    post: tuple[LinearConstraint, ...] = ()
    # directive semantics: two-logit compares alert vs no-alert logits with
    # strict > meaning "change direction" (ties are "no change"); threshold
    # compares a single output against a confidence value.
    output_mode: str = "two-logit"  # or "threshold"
    alert_index: int = 1
    no_alert_index: int = 0
    threshold: Fraction | None = None

    def __post_init__(self):
        if self.output_mode not in ("two-logit", "threshold"):
            raise SpecFormatError(f"bad output mode {self.output_mode!r}")
        if self.kind in (PropertyKind.DANGER_ZONE_ALERT, PropertyKind.NO_FALSE_ALERT):
            if self.danger_zone is None:
                raise SpecFormatError(f"{self.kind.value} requires a danger zone")
            if self.output_mode == "two-logit" and self.alert_index == self.no_alert_index:
                raise SpecFormatError("alert and no-alert output indices must differ")
            if self.output_mode == "threshold" and self.threshold is None:
                raise SpecFormatError("threshold output mode requires a threshold")
        if self.kind == PropertyKind.TOLERANCE_RECONSTRUCTION:
            if self.epsilon is None or self.epsilon < 0:
                raise SpecFormatError("tolerance reconstruction requires epsilon >= 0")
            if self.norm not in ("linf", "l1"):
                raise UnsupportedNorm(f"unsupported norm {self.norm!r} (use linf or l1)")
        if self.kind == PropertyKind.IO_CONTRACT and not self.post:
            raise SpecFormatError("io-contract requires at least one postcondition")


@dataclass(frozen=True)
class VerificationTask:
    graph: NierGraph
    simulator: SimulatorSpec
    prop: PropertySpec
    logic: str = "QF_NRA"
    name: str = "task"

    def validate_shapes(self) -> None:
        if len(self.graph.inputs) != 1 or len(self.graph.outputs) != 1:
            raise ShapeMismatch("task model must have one input and one output tensor")
        in_shape = self.graph.inputs[0][1]
        expected = (1, 1, self.simulator.grid_h, self.simulator.grid_w)
        if in_shape.dims != expected:
            raise ShapeMismatch(
                f"pixel simulator requires input shape {expected}, model has {in_shape.dims}"
            )
        out_count = self.graph.outputs[0][1].count
        _validate_outputs(self.prop, out_count)


def _validate_outputs(prop: PropertySpec, out_count: int) -> None:
    if prop.kind in (PropertyKind.DANGER_ZONE_ALERT, PropertyKind.NO_FALSE_ALERT):
        if prop.output_mode == "two-logit":
            if max(prop.alert_index, prop.no_alert_index) >= out_count:
                raise MissingVariable(
                    f"output indices {prop.alert_index}/{prop.no_alert_index} "
                    f"out of range for {out_count} outputs"
                )
        elif out_count < 1:
            raise MissingVariable("threshold mode requires at least one output")


# --- SMT emission -------------------------------------------------------------


def _pixel_var(cs: ConstraintSystem, r: int, c: int) -> Term:
    name = f"actual_input_0_0_{r}_{c}"
    if not cs.has_var(name):
        raise MissingVariable(f"no input variable {name!r}; is the model 1x1xHxW?")
    return tvar(name)


def _out_var(cs: ConstraintSystem, out_shape: TensorShape, flat: int) -> Term:
    name = output_var_name(out_shape, flat)
    if not cs.has_var(name):
        raise MissingVariable(f"no output variable {name!r}")
    return tvar(name)


def emit_input_constraints(sim: SimulatorSpec, cs: ConstraintSystem) -> None:
    """Constrain every grid pixel to the simulator's pixel domain."""
    first = True
    for r in range(sim.grid_h):
        for c in range(sim.grid_w):
            v = _pixel_var(cs, r, c)
            comment = None
            if first:
                lo, hi = sim.domain.lo, sim.domain.hi
                kind = "binary" if isinstance(sim.domain, BinaryDomain) else "interval"
                comment = f"{kind} pixels in [{lo}, {hi}] on a {sim.grid_h}x{sim.grid_w} grid"
                first = False
            if isinstance(sim.domain, BinaryDomain):
                term = tor([
                    tcmp("=", v, tq(sim.domain.lo)),
                    tcmp("=", v, tq(sim.domain.hi)),
                ])
                cs.add_assert(term, SEC_INPUT_DOMAIN, comment)
            else:
                cs.add_assert(tcmp(">=", v, tq(sim.domain.lo)), SEC_INPUT_DOMAIN, comment)
                cs.add_assert(tcmp("<=", v, tq(sim.domain.hi)), SEC_INPUT_DOMAIN)


def _lin_term(cs: ConstraintSystem, sim: SimulatorSpec, out_shape: TensorShape,
              constraint: LinearConstraint) -> tuple[Term, Term]:
    parts = []
    for t in constraint.terms:
        side, flat = t.var
        if side == "in":
            if not 0 <= flat < sim.pixel_count:
                raise MissingVariable(f"in{flat} out of range for {sim.pixel_count} pixels")
            var = _pixel_var(cs, flat // sim.grid_w, flat % sim.grid_w)
        else:
            if not 0 <= flat < out_shape.count:
                raise MissingVariable(f"out{flat} out of range for {out_shape.count} outputs")
            var = _out_var(cs, out_shape, flat)
        parts.append(tmul(t.coeff, var))
    return tsum(parts), tq(constraint.rhs)


def _constraint_term(cs, sim, out_shape, constraint: LinearConstraint, negate: bool) -> Term:
    lhs, rhs = _lin_term(cs, sim, out_shape, constraint)
    if not negate:
        return tcmp(constraint.op, lhs, rhs)
    if constraint.op == "=":
        return tor([tcmp("<", lhs, rhs), tcmp(">", lhs, rhs)])
    return tcmp(_NEGATED_OP[constraint.op], lhs, rhs)


def _alert_fires_term(prop: PropertySpec, cs, out_shape, negated: bool) -> Term:
    """The directive comparison, or its negation.

    Two-logit: fires iff alert > no-alert (strict; ties mean "no change").
    Threshold: fires iff output >= threshold.
    """
    if prop.output_mode == "two-logit":
        alert = _out_var(cs, out_shape, prop.alert_index)
        noalert = _out_var(cs, out_shape, prop.no_alert_index)
        if negated:
            return tcmp("<=", alert, noalert)
        return tcmp("<", noalert, alert)
    out = _out_var(cs, out_shape, 0)
    threshold = tq(prop.threshold)
    return tcmp("<", out, threshold) if negated else tcmp(">=", out, threshold)


def emit_property_negation(
    prop: PropertySpec, sim: SimulatorSpec, cs: ConstraintSystem, out_shape: TensorShape
) -> None:
    """Append the negated property; a sat answer is then a counterexample."""
    _validate_outputs(prop, out_shape.count)
    hi, lo = sim.domain.hi, sim.domain.lo

    if prop.kind == PropertyKind.DANGER_ZONE_ALERT:
        zone = prop.danger_zone
        zone.validate(sim)
        occupied = tor([
            tcmp("=", _pixel_var(cs, r, c), tq(hi)) for r, c in zone.cells()
        ])
        cs.add_assert(occupied, SEC_PROPERTY, "at least one danger-zone pixel is an obstacle")
        cs.add_assert(
            _alert_fires_term(prop, cs, out_shape, negated=True),
            SEC_PROPERTY,
            "negation: the alert does not fire",
        )
        return

    if prop.kind == PropertyKind.NO_FALSE_ALERT:
        zone = prop.danger_zone
        zone.validate(sim)
        first = True
        for r, c in zone.cells():
            comment = "every danger-zone pixel is clear" if first else None
            first = False
            cs.add_assert(tcmp("=", _pixel_var(cs, r, c), tq(lo)), SEC_PROPERTY, comment)
        cs.add_assert(
            _alert_fires_term(prop, cs, out_shape, negated=False),
            SEC_PROPERTY,
            "negation: the alert fires anyway",
        )
        return

    if prop.kind == PropertyKind.IDENTITY_RECONSTRUCTION:
        _require_reconstruction_shape(sim, out_shape)
        clauses = []
        for flat in range(sim.pixel_count):
            pixel = _pixel_var(cs, flat // sim.grid_w, flat % sim.grid_w)
            out = _out_var(cs, out_shape, flat)
            clauses.append(tcmp("<", out, pixel))
            clauses.append(tcmp(">", out, pixel))
        cs.add_assert(
            tor(clauses), SEC_PROPERTY, "negation: some parameter is not reconstructed exactly"
        )
        return

    if prop.kind == PropertyKind.TOLERANCE_RECONSTRUCTION:
        _require_reconstruction_shape(sim, out_shape)
        eps = tq(prop.epsilon)
        diffs = []
        for flat in range(sim.pixel_count):
            pixel = _pixel_var(cs, flat // sim.grid_w, flat % sim.grid_w)
            out = _out_var(cs, out_shape, flat)
            diffs.append((out, pixel))
        if prop.norm == "linf":
            clauses = []
            for out, pixel in diffs:
                clauses.append(tcmp(">", tsub(out, pixel), eps))
                clauses.append(tcmp(">", tsub(pixel, out), eps))
            cs.add_assert(
                tor(clauses),
                SEC_PROPERTY,
                f"negation: some reconstruction error exceeds {prop.epsilon}",
            )
        else:  # l1
            abs_terms = [
                tite(tcmp(">=", tsub(out, pixel), tq(0)), tsub(out, pixel), tsub(pixel, out))
                for out, pixel in diffs
            ]
            cs.add_assert(
                tcmp(">", tsum(abs_terms), eps),
                SEC_PROPERTY,
                f"negation: total reconstruction error exceeds {prop.epsilon}",
            )
        return

    if prop.kind == PropertyKind.IO_CONTRACT:
        first = True
        for constraint in prop.pre:
            comment = "preconditions" if first else None
            first = False
            cs.add_assert(
                _constraint_term(cs, sim, out_shape, constraint, negate=False),
                SEC_PROPERTY,
                comment,
            )
        negated = [
            _constraint_term(cs, sim, out_shape, c, negate=True) for c in prop.post
        ]
        cs.add_assert(tor(negated), SEC_PROPERTY, "negation: some postcondition fails")
        return

    raise SpecFormatError(f"unsupported property kind {prop.kind}")


def compose_task(task: VerificationTask, fig5_compat: bool = False) -> str:
    """Network formula, input constraints, negated property, (check-sat)."""
    task.validate_shapes()
    cs = lower_graph(task.graph, task.logic)
    emit_input_constraints(task.simulator, cs)
    emit_property_negation(task.prop, task.simulator, cs, task.graph.outputs[0][1])
    text = emit_smtlib(cs, task.logic, fig5_compat)
    return text + "(check-sat)\n(get-model)\n"


def _require_reconstruction_shape(sim: SimulatorSpec, out_shape: TensorShape) -> None:
    if out_shape.count != sim.pixel_count:
        raise ShapeMismatch(
            f"reconstruction property needs {sim.pixel_count} outputs, model has {out_shape.count}"
        )


# --- exact semantics (shared by oracle and counterexample confirmation) -------


def alert_fires(prop: PropertySpec, outputs: Sequence[Fraction]) -> bool:
    if prop.output_mode == "two-logit":
        return outputs[prop.alert_index] > outputs[prop.no_alert_index]
    return outputs[0] >= prop.threshold


def zone_occupied(
    image: Sequence[Sequence[Fraction]], zone: DangerZone, domain: PixelDomain
) -> bool:
    return any(image[r][c] == domain.hi for r, c in zone.cells())


def _eval_linear(
    constraint: LinearConstraint,
    image_flat: Sequence[Fraction],
    outputs: Sequence[Fraction],
) -> bool:
    total = Fraction(0)
    for t in constraint.terms:
        side, flat = t.var
        total += t.coeff * (image_flat[flat] if side == "in" else outputs[flat])
    if constraint.op == "<=":
        return total <= constraint.rhs
    if constraint.op == "<":
        return total < constraint.rhs
    if constraint.op == ">=":
        return total >= constraint.rhs
    if constraint.op == ">":
        return total > constraint.rhs
    return total == constraint.rhs


def violates(
    prop: PropertySpec,
    sim: SimulatorSpec,
    image: Sequence[Sequence[Fraction]],
    outputs: Sequence[Fraction],
) -> bool:
    """Exact-rational check that (image, outputs) breaks the property."""
    image_flat = [image[r][c] for r in range(sim.grid_h) for c in range(sim.grid_w)]
    if prop.kind == PropertyKind.DANGER_ZONE_ALERT:
        return zone_occupied(image, prop.danger_zone, sim.domain) and not alert_fires(prop, outputs)
    if prop.kind == PropertyKind.NO_FALSE_ALERT:
        return not zone_occupied(image, prop.danger_zone, sim.domain) and alert_fires(prop, outputs)
    if prop.kind == PropertyKind.IDENTITY_RECONSTRUCTION:
        return any(outputs[i] != image_flat[i] for i in range(len(image_flat)))
    if prop.kind == PropertyKind.TOLERANCE_RECONSTRUCTION:
        errors = [abs(outputs[i] - image_flat[i]) for i in range(len(image_flat))]
        total = max(errors) if prop.norm == "linf" else sum(errors, Fraction(0))
        return total > prop.epsilon
    if prop.kind == PropertyKind.IO_CONTRACT:
        if not all(_eval_linear(c, image_flat, outputs) for c in prop.pre):
            return False
        return not all(_eval_linear(c, image_flat, outputs) for c in prop.post)
    raise SpecFormatError(f"unsupported property kind {prop.kind}")


# --- task file schema (v1) ----------------------------------------------------

_VAR_TOKEN = re.compile(r"(in|out)(\d+)$")


def _parse_rational_field(value, where: str) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise SpecFormatError(
            f"{where}: write rationals as integers or strings like \"1/2\" (floats are inexact)"
        )
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecFormatError(f"{where}: bad rational {value!r}") from exc
    raise SpecFormatError(f"{where}: bad rational {value!r}")


def parse_linear_constraint(text: str) -> LinearConstraint:
    """Parse ``"2*in0 - out3 <= 1/2"``-style comparisons.

    Grammar: ``lincomb OP lincomb`` with OP in <=, <, >=, >, ==, =;
    lincomb is a +/- separated list of ``c``, ``var``, ``c*var`` where var
    is ``in<k>`` or ``out<k>``.  Everything is normalized to terms-vs-rhs.
    """
    m = re.search(r"(<=|>=|==|=|<|>)", text)
    if not m:
        raise SpecFormatError(f"no comparison operator in {text!r}")
    op = "=" if m.group(1) == "==" else m.group(1)
    lhs_text, rhs_text = text[: m.start()], text[m.end() :]

    def parse_side(side_text: str, sign: int, terms: list[LinTerm], const: list[Fraction]):
        tokens = re.findall(r"[+-]|[^+\-\s]+", side_text)
        pending = sign
        expect_term = True
        for token in tokens:
            if token in "+-":
                if expect_term and token == "-":
                    pending = -pending
                    continue
                if expect_term:
                    continue
                pending = sign if token == "+" else -sign
                expect_term = True
                continue
            if not expect_term:
                raise SpecFormatError(f"unexpected token {token!r} in {text!r}")
            coeff = Fraction(1)
            var_text = token
            if "*" in token:
                coeff_text, var_text = token.split("*", 1)
                coeff = _parse_rational_field(coeff_text.strip(), text)
            mv = _VAR_TOKEN.match(var_text.strip())
            if mv:
                terms.append(LinTerm(pending * coeff, (mv.group(1), int(mv.group(2)))))
            else:
                const[0] += pending * _parse_rational_field(var_text.strip(), text)
            pending = sign
            expect_term = False
        if expect_term and tokens:
            raise SpecFormatError(f"dangling operator in {text!r}")

    terms: list[LinTerm] = []
    const = [Fraction(0)]
    parse_side(lhs_text, 1, terms, const)
    rhs_terms: list[LinTerm] = []
    rhs_const = [Fraction(0)]
    parse_side(rhs_text, 1, rhs_terms, rhs_const)
    # move rhs variables left, lhs constants right
    for t in rhs_terms:
        terms.append(LinTerm(-t.coeff, t.var))
    rhs = rhs_const[0] - const[0]
    if not terms:
        raise SpecFormatError(f"no variables in constraint {text!r}")
    return LinearConstraint(tuple(terms), op, rhs)


def load_task_spec(source: str | Path) -> dict:
    """Load and validate a task file; returns simulator/property/logic parts.

    ``source`` may be a path or YAML text.  Schema is versioned; see the
    format documentation in the repository.
    """
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith((".yaml", ".yml"))):
        text = Path(source).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecFormatError(f"task file is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecFormatError("task file must be a mapping")
    version = doc.get("schema_version")
    if version != TASK_SCHEMA_VERSION:
        raise SpecFormatError(
            f"schema_version must be {TASK_SCHEMA_VERSION}, got {version!r}"
        )

    sim_doc = doc.get("simulator")
    if not isinstance(sim_doc, dict):
        raise SpecFormatError("missing 'simulator' section")
    grid = sim_doc.get("grid")
    if not isinstance(grid, dict) or "height" not in grid or "width" not in grid:
        raise SpecFormatError("simulator.grid needs height and width")
    domain_doc = sim_doc.get("pixel_domain", {"kind": "binary", "lo": 0, "hi": 1})
    kind = domain_doc.get("kind", "binary")
    lo = _parse_rational_field(domain_doc.get("lo", 0), "pixel_domain.lo")
    hi = _parse_rational_field(domain_doc.get("hi", 1), "pixel_domain.hi")
    if kind == "binary":
        domain: PixelDomain = BinaryDomain(lo, hi)
    elif kind == "interval":
        domain = IntervalDomain(lo, hi)
    else:
        raise SpecFormatError(f"unknown pixel domain kind {kind!r}")
    sim = SimulatorSpec(int(grid["height"]), int(grid["width"]), domain)

    prop_doc = doc.get("property")
    if not isinstance(prop_doc, dict) or "kind" not in prop_doc:
        raise SpecFormatError("missing 'property' section with a kind")
    try:
        prop_kind = PropertyKind(prop_doc["kind"])
    except ValueError as exc:
        raise SpecFormatError(f"unknown property kind {prop_doc['kind']!r}") from exc

    zone = None
    zone_doc = prop_doc.get("danger_zone")
    if zone_doc == "bottom-half":
        zone = bottom_half_zone(sim)
    elif isinstance(zone_doc, dict):
        rows = zone_doc.get("rows")
        cols = zone_doc.get("cols", [0, sim.grid_w - 1])
        if not (isinstance(rows, list) and len(rows) == 2):
            raise SpecFormatError("danger_zone.rows must be [first, last]")
        if not (isinstance(cols, list) and len(cols) == 2):
            raise SpecFormatError("danger_zone.cols must be [first, last]")
        zone = DangerZone(int(rows[0]), int(rows[1]), int(cols[0]), int(cols[1]))
    elif zone_doc is not None:
        raise SpecFormatError("danger_zone must be 'bottom-half' or {rows, cols}")
    if zone is not None:
        zone.validate(sim)

    outputs_doc = doc.get("outputs", {})
    mode = outputs_doc.get("mode", "two-logit")
    threshold = None
    if "threshold" in outputs_doc:
        threshold = _parse_rational_field(outputs_doc["threshold"], "outputs.threshold")

    epsilon = None
    if "epsilon" in prop_doc:
        epsilon = _parse_rational_field(prop_doc["epsilon"], "property.epsilon")

    pre = tuple(parse_linear_constraint(s) for s in prop_doc.get("pre", []))
    post = tuple(parse_linear_constraint(s) for s in prop_doc.get("post", []))

    prop = PropertySpec(
        kind=prop_kind,
        danger_zone=zone,
        epsilon=epsilon,
        norm=prop_doc.get("norm"),
        pre=pre,
        post=post,
        output_mode=mode,
        alert_index=int(outputs_doc.get("alert_index", 1)),
        no_alert_index=int(outputs_doc.get("no_alert_index", 0)),
        threshold=threshold,
    )

    logic = doc.get("logic", "QF_NRA")
    name = doc.get("name", "task")
    return {"simulator": sim, "property": prop, "logic": logic, "name": name}
