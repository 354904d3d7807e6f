"""Verification outcomes shared by the solver harness and the oracle."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping


class VerdictStatus(str, Enum):
    PROVEN = "proven"
    FALSIFIED = "falsified"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"
    SOLVER_ERROR = "solver-error"


@dataclass(frozen=True)
class CounterExample:
    """A concrete input witnessing a property violation.

    ``image`` is the grid of exact pixel values (row major).  ``params``
    is the obstacle coordinate set for binary pixel domains, else None.
    ``assignment`` is the raw solver model when the witness came from a
    solver rather than from enumeration.
    """

    image: tuple[tuple[Fraction, ...], ...]
    params: frozenset[tuple[int, int]] | None = None
    assignment: Mapping[str, Fraction] | None = None


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    counterexample: CounterExample | None = None
    confirmed: bool | None = None
    diagnostic: str | None = None
    evaluations: int | None = None

    @property
    def is_definitive(self) -> bool:
        return self.status in (VerdictStatus.PROVEN, VerdictStatus.FALSIFIED)

    @staticmethod
    def proven(evaluations: int | None = None) -> "Verdict":
        return Verdict(VerdictStatus.PROVEN, evaluations=evaluations)

    @staticmethod
    def falsified(
        counterexample: CounterExample,
        confirmed: bool,
        evaluations: int | None = None,
    ) -> "Verdict":
        return Verdict(
            VerdictStatus.FALSIFIED,
            counterexample=counterexample,
            confirmed=confirmed,
            evaluations=evaluations,
        )
