"""Run external SMT solvers, parse verdicts and models, confirm witnesses.

Solvers are plain subprocesses fed an .smt2 file; anything that prints
``sat``/``unsat``/``unknown`` and answers ``(get-model)`` with
``define-fun`` forms works.  Every sat witness is re-evaluated with exact
rational arithmetic before it is reported: a witness that fails that check
raises SoundnessError instead of being returned, so a Falsified verdict is
always a real counterexample.
"""

from __future__ import annotations

import re
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    DomainViolation,
    IncompleteModel,
    NonzeroExit,
    SolverNotFound,
    SolverTimeout,
    SoundnessError,
    UnparseableModel,
)
from .nier import NierGraph, RationalTensor
from .oracle import eval_exact, image_to_tensor
from .properties import (
    BinaryDomain,
    IntervalDomain,
    PropertySpec,
    SimulatorSpec,
    VerificationTask,
    compose_task,
    violates,
)
from .verdict import CounterExample, Verdict, VerdictStatus

DEFAULT_TIMEOUT = 60.0


@dataclass(frozen=True)
class SolverConfig:
    """How to invoke one solver. ``{file}`` in args is replaced by the
    .smt2 path."""

    name: str
    executable: str
    args: tuple[str, ...] = ("{file}",)
    timeout: float = DEFAULT_TIMEOUT
    model_request: bool = True

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("solver timeout must be positive")

    def command(self, file: str) -> list[str]:
        return [self.executable] + [a.replace("{file}", file) for a in self.args]


# Argument templates for mainstream SMT-LIB 2.6 solvers; the executable is
# resolved on PATH unless an explicit path is configured.
BUILTIN_SOLVERS: dict[str, tuple[str, tuple[str, ...]]] = {
    "z3": ("z3", ("-smt2", "{file}")),
    "z3wasm": ("z3wasm", ("{file}",)),
    "cvc5": ("cvc5", ("--produce-models", "{file}")),
    "cvc4": ("cvc4", ("--lang", "smt2", "--produce-models", "{file}")),
    "yices": ("yices-smt2", ("{file}",)),
    "mathsat": ("mathsat", ("-model_generation=true", "{file}")),
}

SOLVER_PROBE_ORDER = ("z3", "cvc5", "cvc4", "yices", "mathsat", "z3wasm")


def make_config(spec: str, timeout: float = DEFAULT_TIMEOUT) -> SolverConfig:
    """Build a config from a builtin name, ``name=executable``, or a path."""
    if "=" in spec:
        name, executable = spec.split("=", 1)
        if name in BUILTIN_SOLVERS:
            return SolverConfig(name, executable, BUILTIN_SOLVERS[name][1], timeout)
        return SolverConfig(name, executable, ("{file}",), timeout)
    if spec in BUILTIN_SOLVERS:
        executable, args = BUILTIN_SOLVERS[spec]
        return SolverConfig(spec, executable, args, timeout)
    return SolverConfig(Path(spec).stem, spec, ("{file}",), timeout)


def autodetect_solver(timeout: float = DEFAULT_TIMEOUT) -> SolverConfig | None:
    for name in SOLVER_PROBE_ORDER:
        executable = BUILTIN_SOLVERS[name][0]
        if shutil.which(executable):
            return make_config(name, timeout)
    return None


@dataclass
class SolverRun:
    """Raw outcome of one solver process."""

    solver: str
    status: str  # "sat" | "unsat" | "unknown"
    model_text: str
    stdout: str
    stderr: str
    wall_time: float


def run_solver(file: str | Path, cfg: SolverConfig) -> SolverRun:
    """Launch the solver on ``file``; kill it at the timeout.

    Raises SolverNotFound / SolverTimeout / NonzeroExit; output without a
    recognizable status line maps to NonzeroExit as well when the process
    failed, else UnparseableModel.
    """
    start = time.monotonic()
    try:
        proc = subprocess.run(
            cfg.command(str(file)),
            capture_output=True,
            text=True,
            timeout=cfg.timeout,
        )
    except FileNotFoundError as exc:
        raise SolverNotFound(f"solver executable {cfg.executable!r} not found") from exc
    except PermissionError as exc:
        raise SolverNotFound(f"solver executable {cfg.executable!r} not runnable") from exc
    except subprocess.TimeoutExpired as exc:
        raise SolverTimeout(f"{cfg.name} exceeded {cfg.timeout}s") from exc
    wall = time.monotonic() - start

    status = None
    model_lines: list[str] = []
    for line in proc.stdout.splitlines():
        stripped = line.strip()
        if status is None and stripped in ("sat", "unsat", "unknown"):
            status = stripped
            continue
        if status is not None:
            model_lines.append(line)
    if status is None:
        raise NonzeroExit(proc.returncode, proc.stderr or proc.stdout)
    return SolverRun(
        solver=cfg.name,
        status=status,
        model_text="\n".join(model_lines),
        stdout=proc.stdout,
        stderr=proc.stderr,
        wall_time=wall,
    )


def run_portfolio(file: str | Path, configs: Sequence[SolverConfig]) -> SolverRun:
    """Run several solvers concurrently; first definitive answer wins.

    Losers are terminated.  ``unknown`` answers only win if nobody is
    definitive; errors only surface if nobody answers at all.
    """
    if len(configs) == 1:
        return run_solver(file, configs[0])

    lock = threading.Lock()
    procs: dict[str, subprocess.Popen] = {}
    results: list[SolverRun] = []
    errors: list[Exception] = []
    winner = threading.Event()

    def work(cfg: SolverConfig) -> None:
        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                cfg.command(str(file)),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except FileNotFoundError:
            with lock:
                errors.append(SolverNotFound(f"solver executable {cfg.executable!r} not found"))
            return
        with lock:
            procs[cfg.name] = proc
        try:
            stdout, stderr = proc.communicate(timeout=cfg.timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            with lock:
                errors.append(SolverTimeout(f"{cfg.name} exceeded {cfg.timeout}s"))
            return
        wall = time.monotonic() - start
        status = None
        model_lines: list[str] = []
        for line in stdout.splitlines():
            stripped = line.strip()
            if status is None and stripped in ("sat", "unsat", "unknown"):
                status = stripped
                continue
            if status is not None:
                model_lines.append(line)
        if status is None:
            with lock:
                errors.append(NonzeroExit(proc.returncode, stderr or stdout))
            return
        run = SolverRun(cfg.name, status, "\n".join(model_lines), stdout, stderr, wall)
        with lock:
            results.append(run)
            if status in ("sat", "unsat") and not winner.is_set():
                winner.set()
                for name, other in procs.items():
                    if name != cfg.name and other.poll() is None:
                        other.kill()

    threads = [threading.Thread(target=work, args=(cfg,), daemon=True) for cfg in configs]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    definitive = [r for r in results if r.status in ("sat", "unsat")]
    if definitive:
        return min(definitive, key=lambda r: r.wall_time)
    if results:
        return min(results, key=lambda r: r.wall_time)
    if errors:
        raise errors[0]
    raise SolverNotFound("no solver produced any outcome")


# --- model parsing -------------------------------------------------------------

_TOKEN_RE = re.compile(r"""\(|\)|\|[^|]*\||"(?:[^"]|"")*"|;[^\n]*|[^\s()|;]+""")


def _tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.findall(text) if not t.startswith(";")]


def _read_sexp(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise UnparseableModel("unexpected end of model text")
    token = tokens[pos]
    if token == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read_sexp(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise UnparseableModel("unbalanced parenthesis in model")
        return items, pos + 1
    if token == ")":
        raise UnparseableModel("unbalanced ')' in model")
    return token, pos + 1


_DECIMAL_RE = re.compile(r"-?\d+\.\d*$")
_NUMERAL_RE = re.compile(r"-?\d+$")


def _value_to_rational(value) -> Fraction:
    if isinstance(value, str):
        if _NUMERAL_RE.match(value):
            return Fraction(int(value))
        if _DECIMAL_RE.match(value):
            # finite decimal expansion converts exactly
            return Fraction(value if not value.endswith(".") else value + "0")
        raise UnparseableModel(f"unsupported literal {value!r}")
    if isinstance(value, list) and value:
        head = value[0]
        if head == "-" and len(value) == 2:
            return -_value_to_rational(value[1])
        if head == "/" and len(value) == 3:
            return _value_to_rational(value[1]) / _value_to_rational(value[2])
        if head == "+" and len(value) == 2:
            return _value_to_rational(value[1])
    raise UnparseableModel(f"unsupported value term {value!r}")


def parse_model(text: str) -> dict[str, Fraction]:
    """Extract ``define-fun`` constant assignments from a model response.

    Supports the fragment every mainstream solver emits for QF_(N)RA
    problems: integer, decimal, ``(/ a b)``, ``(- v)`` and combinations.
    Anything with function arguments is rejected.
    """
    tokens = _tokenize(text)
    forms = []
    pos = 0
    while pos < len(tokens):
        form, pos = _read_sexp(tokens, pos)
        forms.append(form)

    assignment: dict[str, Fraction] = {}

    def visit(form) -> None:
        if not isinstance(form, list) or not form:
            return
        if form[0] == "define-fun":
            if len(form) != 5:
                raise UnparseableModel(f"malformed define-fun {form!r}")
            _, name, params, sort, value = form
            if params != []:
                raise UnparseableModel(f"uninterpreted function {name!r} in model")
            if sort not in ("Real", "Int"):
                raise UnparseableModel(f"unsupported sort {sort!r} in model")
            clean = name[1:-1] if isinstance(name, str) and name.startswith("|") else name
            assignment[clean] = _value_to_rational(value)
            return
        if form[0] == "error":
            return
        for item in form:
            visit(item)

    for form in forms:
        visit(form)
    return assignment


# --- counterexample reconstruction ---------------------------------------------


def reconstruct_input(
    assignment: Mapping[str, Fraction], sim: SimulatorSpec
) -> tuple[tuple[tuple[Fraction, ...], ...], frozenset[tuple[int, int]] | None]:
    """Assignment -> pixel grid, plus the obstacle set for binary domains.

    Raises IncompleteModel when an input variable is missing and
    DomainViolation when a value escapes the declared pixel domain (which
    would mean the emitted constraints are wrong, not the solver).
    """
    image = []
    for r in range(sim.grid_h):
        row = []
        for c in range(sim.grid_w):
            name = f"actual_input_0_0_{r}_{c}"
            if name not in assignment:
                raise IncompleteModel(f"model omits {name!r}")
            value = assignment[name]
            if isinstance(sim.domain, BinaryDomain):
                if value not in (sim.domain.lo, sim.domain.hi):
                    raise DomainViolation(
                        f"{name} = {value} outside binary domain "
                        f"{{{sim.domain.lo}, {sim.domain.hi}}}"
                    )
            elif isinstance(sim.domain, IntervalDomain):
                if not sim.domain.lo <= value <= sim.domain.hi:
                    raise DomainViolation(
                        f"{name} = {value} outside [{sim.domain.lo}, {sim.domain.hi}]"
                    )
            row.append(value)
        image.append(tuple(row))
    grid = tuple(image)
    params = None
    if isinstance(sim.domain, BinaryDomain):
        params = frozenset(
            (r, c)
            for r in range(sim.grid_h)
            for c in range(sim.grid_w)
            if grid[r][c] == sim.domain.hi
        )
    return grid, params


def confirm_counterexample(
    graph: NierGraph,
    image: Sequence[Sequence[Fraction]],
    prop: PropertySpec,
    sim: SimulatorSpec,
) -> bool:
    """True iff exact evaluation of the graph on ``image`` violates the
    property."""
    graph_inputs = graph.inputs
    if len(graph_inputs) != 1:
        raise SoundnessError("confirmation requires a single-input graph")
    tensor = image_to_tensor(image, graph_inputs[0][1])
    trace = eval_exact(graph, tensor)
    outputs = list(trace.outputs[0].data)
    return violates(prop, sim, image, outputs)


# --- end-to-end verification ----------------------------------------------------


@dataclass
class VerificationResult:
    verdict: Verdict
    solver: str | None
    wall_time: float
    smt_file: Path | None = None
    solver_runs: list[SolverRun] = field(default_factory=list)


def verify_task(
    task: VerificationTask,
    configs: Sequence[SolverConfig],
    workdir: str | Path | None = None,
    fig5_compat: bool = False,
) -> VerificationResult:
    """Compose, solve, and (for sat) reconstruct + confirm the witness."""
    import tempfile

    text = compose_task(task, fig5_compat=fig5_compat)
    start = time.monotonic()
    if workdir is not None:
        smt_path = Path(workdir) / f"{task.name}.smt2"
        smt_path.parent.mkdir(parents=True, exist_ok=True)
        smt_path.write_text(text, encoding="utf-8")
        keep = True
    else:
        tmp = tempfile.NamedTemporaryFile(
            mode="w", suffix=".smt2", prefix="smtnet_", delete=False, encoding="utf-8"
        )
        tmp.write(text)
        tmp.close()
        smt_path = Path(tmp.name)
        keep = False

    try:
        try:
            run = run_portfolio(smt_path, configs)
        except SolverTimeout as exc:
            verdict = Verdict(VerdictStatus.TIMEOUT, diagnostic=str(exc))
            return VerificationResult(verdict, None, time.monotonic() - start,
                                      smt_path if keep else None)
        except (SolverNotFound, NonzeroExit) as exc:
            verdict = Verdict(VerdictStatus.SOLVER_ERROR, diagnostic=str(exc))
            return VerificationResult(verdict, None, time.monotonic() - start,
                                      smt_path if keep else None)

        wall = time.monotonic() - start
        if run.status == "unsat":
            verdict = Verdict(VerdictStatus.PROVEN)
        elif run.status == "unknown":
            verdict = Verdict(VerdictStatus.UNKNOWN, diagnostic=f"{run.solver} answered unknown")
        else:
            assignment = parse_model(run.model_text)
            image, params = reconstruct_input(assignment, task.simulator)
            confirmed = confirm_counterexample(task.graph, image, task.prop, task.simulator)
            if not confirmed:
                raise SoundnessError(
                    f"solver {run.solver} produced a sat witness that exact evaluation "
                    "does not confirm; the encoding or the solver is buggy"
                )
            verdict = Verdict.falsified(
                CounterExample(image=image, params=params, assignment=assignment),
                confirmed=True,
            )
        return VerificationResult(verdict, run.solver, wall,
                                  smt_path if keep else None, [run])
    finally:
        if not keep:
            smt_path.unlink(missing_ok=True)
