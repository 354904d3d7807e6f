"""Command-line entry point.

Exit codes (CI contract): 0 = property proven, 1 = falsified with a
confirmed counterexample, 2 = unknown or timeout, 3 = any error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import VerifierError
from .ingest import load_graph
from .lowering import DEFAULT_LOGIC, SUPPORTED_LOGICS
from .oracle import DEFAULT_MAX_RENDERS, brute_force_verify
from .properties import (
    BinaryDomain,
    PropertySpec,
    SimulatorSpec,
    VerificationTask,
    compose_task,
    load_task_spec,
)
from .solver import (
    DEFAULT_TIMEOUT,
    autodetect_solver,
    make_config,
    verify_task,
)
from .verdict import Verdict, VerdictStatus

EXIT_PROVEN = 0
EXIT_FALSIFIED = 1
EXIT_INCONCLUSIVE = 2
EXIT_ERROR = 3


@dataclass
class RunReport:
    """Outcome of one verify/oracle command."""

    verdict: Verdict
    solver: str | None
    wall_time: float
    artifacts: list[Path]
    rendering: str | None

    def lines(self) -> list[str]:
        out = [f"verdict: {self.verdict.status.value}"]
        if self.solver:
            out.append(f"solver: {self.solver}")
        out.append(f"wall-time: {self.wall_time:.3f}s")
        if self.verdict.evaluations is not None:
            out.append(f"evaluations: {self.verdict.evaluations}")
        if self.verdict.diagnostic:
            out.append(f"note: {self.verdict.diagnostic}")
        for path in self.artifacts:
            out.append(f"artifact: {path}")
        if self.rendering:
            out.append("counterexample:")
            out.append(self.rendering)
        return out


def render_grid(
    image: Sequence[Sequence[Fraction]],
    prop: PropertySpec,
    sim: SimulatorSpec,
) -> str:
    """ASCII picture: '#' obstacle, '.' clear, danger zone dashed ('-')."""
    zone = set(prop.danger_zone.cells()) if prop.danger_zone else set()
    hi = sim.domain.hi if isinstance(sim.domain, BinaryDomain) else None
    rows = []
    for r, row in enumerate(image):
        cells = []
        for c, value in enumerate(row):
            occupied = value == hi if hi is not None else value != 0
            if occupied:
                cells.append("#")
            else:
                cells.append("-" if (r, c) in zone else ".")
        rows.append("".join(cells))
    return "\n".join(rows)


def _verdict_exit(verdict: Verdict) -> int:
    if verdict.status == VerdictStatus.PROVEN:
        return EXIT_PROVEN
    if verdict.status == VerdictStatus.FALSIFIED:
        return EXIT_FALSIFIED
    if verdict.status in (VerdictStatus.UNKNOWN, VerdictStatus.TIMEOUT):
        return EXIT_INCONCLUSIVE
    return EXIT_ERROR


def _load_task(model_path: str, spec_path: str) -> VerificationTask:
    graph = load_graph(Path(model_path).read_bytes())
    parts = load_task_spec(Path(spec_path))
    task = VerificationTask(
        graph=graph,
        simulator=parts["simulator"],
        prop=parts["property"],
        logic=parts["logic"],
        name=parts["name"],
    )
    task.validate_shapes()
    return task


def cmd_translate(args: argparse.Namespace) -> int:
    graph = load_graph(Path(args.model).read_bytes())
    from .lowering import emit_smtlib, lower_graph

    cs = lower_graph(graph, args.logic)
    text = emit_smtlib(cs, args.logic, fig5_compat=args.fig5_compat)
    out = Path(args.out) if args.out else Path(args.model).with_suffix(".smt2")
    out.write_text(text, encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_PROVEN


def _solver_configs(args: argparse.Namespace):
    timeout = args.timeout
    if args.solver:
        return [make_config(s, timeout) for s in args.solver]
    cfg = autodetect_solver(timeout)
    if cfg is None:
        raise VerifierError(
            "no SMT solver found on PATH (tried z3, cvc5, cvc4, yices-smt2, "
            "mathsat, z3wasm); pass --solver NAME|PATH"
        )
    return [cfg]


def cmd_verify(args: argparse.Namespace) -> int:
    task = _load_task(args.model, args.spec)
    configs = _solver_configs(args)
    if not args.portfolio:
        configs = configs[:1]
    result = verify_task(
        task, configs, workdir=args.out, fig5_compat=args.fig5_compat
    )
    rendering = None
    if result.verdict.counterexample is not None:
        rendering = render_grid(result.verdict.counterexample.image, task.prop, task.simulator)
    report = RunReport(
        verdict=result.verdict,
        solver=result.solver,
        wall_time=result.wall_time,
        artifacts=[result.smt_file] if result.smt_file else [],
        rendering=rendering,
    )
    for line in report.lines():
        print(line)
    return _verdict_exit(result.verdict)


def cmd_oracle(args: argparse.Namespace) -> int:
    task = _load_task(args.model, args.spec)
    start = time.monotonic()
    verdict = brute_force_verify(
        task.graph, task.simulator, task.prop, max_renders=args.max_enum
    )
    wall = time.monotonic() - start
    rendering = None
    if verdict.counterexample is not None:
        rendering = render_grid(verdict.counterexample.image, task.prop, task.simulator)
    report = RunReport(
        verdict=verdict, solver=None, wall_time=wall, artifacts=[], rendering=rendering
    )
    for line in report.lines():
        print(line)
    return _verdict_exit(verdict)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smtnet",
        description="Translate feed-forward ONNX networks to SMT-LIB and verify "
        "simulator-derived safety properties.",
    )
    parser.add_argument("--version", action="version", version=f"smtnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_translate = sub.add_parser("translate", help="ONNX -> SMT-LIB file")
    p_translate.add_argument("model", help="path to the .onnx file")
    p_translate.add_argument("--out", help="output .smt2 path (default: model stem)")
    p_translate.add_argument("--logic", default=DEFAULT_LOGIC, choices=SUPPORTED_LOGICS)
    p_translate.add_argument(
        "--fig5-compat",
        action="store_true",
        help="print negative rationals as (/ -a b) instead of (- (/ a b))",
    )
    p_translate.set_defaults(func=cmd_translate)

    p_verify = sub.add_parser("verify", help="prove or falsify a property with a solver")
    p_verify.add_argument("model", help="path to the .onnx file")
    p_verify.add_argument("spec", help="task file (simulator + property, YAML schema v1)")
    p_verify.add_argument(
        "--solver",
        action="append",
        help="solver name, path, or name=path; repeatable (with --portfolio)",
    )
    p_verify.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p_verify.add_argument(
        "--portfolio",
        action="store_true",
        help="run all configured solvers concurrently; first definitive answer wins",
    )
    p_verify.add_argument("--out", help="directory to keep the composed .smt2 file")
    p_verify.add_argument("--fig5-compat", action="store_true")
    p_verify.set_defaults(func=cmd_verify)

    p_oracle = sub.add_parser(
        "oracle", help="exhaustive exact-rational check over all simulator inputs"
    )
    p_oracle.add_argument("model", help="path to the .onnx file")
    p_oracle.add_argument("spec", help="task file (simulator + property, YAML schema v1)")
    p_oracle.add_argument(
        "--max-enum",
        type=int,
        default=DEFAULT_MAX_RENDERS,
        help=f"render cap (default {DEFAULT_MAX_RENDERS})",
    )
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VerifierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
