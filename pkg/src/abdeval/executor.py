"""Hypothesis execution over sample spaces.

Evaluation is pure: the same (program, input) always yields the same outcome,
so prediction sets are reproducible bit-for-bit, including under the parallel
path (results are assembled by input index regardless of worker count).
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from . import dsl
from .spaces import SampleSpace
from .values import (
    ObservationSet,
    StructuralError,
    Value,
    canonicalize,
    parse_value,
)

DEFINED = "defined"
UNDEFINED = "undefined"
RUNTIME_ERROR = "runtime-error"
TIMEOUT = "timeout"
RESOURCE_EXCEEDED = "resource-exceeded"

STATUSES = (DEFINED, UNDEFINED, RUNTIME_ERROR, TIMEOUT, RESOURCE_EXCEEDED)

# Statuses folded into "no defined prediction" for coverage and diversity.
NON_DEFINED = (UNDEFINED, RUNTIME_ERROR, TIMEOUT, RESOURCE_EXCEEDED)

_STATUS_CODE = {
    DEFINED: "d",
    UNDEFINED: "u",
    RUNTIME_ERROR: "e",
    TIMEOUT: "t",
    RESOURCE_EXCEEDED: "r",
}
_CODE_STATUS = {code: status for status, code in _STATUS_CODE.items()}


class LookupConflictError(ValueError):
    """Observations memorize two different outputs for one input."""


class TransportError(RuntimeError):
    """An external worker became unreachable (distinct from call statuses)."""


@dataclass(frozen=True)
class ExecLimits:
    """Per-call budgets; the step budget is what makes verdicts reproducible."""

    time_limit: float = 1.0
    max_steps: int = 200_000

    def __post_init__(self):
        if self.time_limit <= 0 or self.max_steps <= 0:
            raise ValueError("budgets must be positive")


DEFAULT_LIMITS = ExecLimits()


@dataclass(frozen=True)
class Outcome:
    """Result of applying a hypothesis to one input."""

    status: str
    text: Optional[str] = None      # canonical text, present iff defined
    detail: Optional[str] = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == DEFINED) != (self.text is not None):
            raise ValueError("defined outcomes carry exactly one value")

    @property
    def is_defined(self) -> bool:
        return self.status == DEFINED


@dataclass(frozen=True)
class Origin:
    proposer_id: str
    iteration: int


@dataclass(frozen=True)
class Hypothesis:
    """A candidate explanation: a one-sentence summary plus a program."""

    id: str
    summary: str
    source: str
    language: str = "dsl"           # dsl | an external worker kind, e.g. python
    origin: Optional[Origin] = None

    def __post_init__(self):
        if not self.summary:
            raise ValueError("summary must be nonempty")


@dataclass(frozen=True)
class PredictionSet:
    """Per-input outcomes of one hypothesis, aligned with the space order."""

    hypothesis_id: str
    space_id: str
    outcomes: Tuple[Outcome, ...]
    defined_count: int = field(default=-1)

    def __post_init__(self):
        count = sum(1 for o in self.outcomes if o.is_defined)
        if self.defined_count == -1:
            object.__setattr__(self, "defined_count", count)
        elif self.defined_count != count:
            raise ValueError("defined_count does not match outcomes")

    @property
    def size(self) -> int:
        return len(self.outcomes)

    def defined_pairs(self) -> FrozenSet[Tuple[int, str]]:
        """The set of (input index, canonical output) pairs where defined."""
        return frozenset(
            (i, o.text) for i, o in enumerate(self.outcomes) if o.is_defined
        )

    def to_lines(self) -> List[str]:
        return [
            _STATUS_CODE[o.status] + (" " + o.text if o.is_defined else "")
            for o in self.outcomes
        ]

    def to_bytes(self) -> bytes:
        header = f"predictions/1 {self.hypothesis_id} {self.space_id} {self.size}"
        return ("\n".join([header] + self.to_lines()) + "\n").encode("utf-8")


def prediction_set_from_lines(
    hypothesis_id: str, space_id: str, lines: Sequence[str]
) -> PredictionSet:
    outcomes = []
    for line in lines:
        code, _, text = line.partition(" ")
        status = _CODE_STATUS[code]
        outcomes.append(Outcome(status, text if status == DEFINED else None))
    return PredictionSet(hypothesis_id, space_id, tuple(outcomes))


def eval_program(
    program: dsl.Program, value: Value, limits: ExecLimits = DEFAULT_LIMITS
) -> Outcome:
    """Apply a program to one input, mapping every failure mode to a status."""
    try:
        result = dsl.run_program(
            program, value, max_steps=limits.max_steps, time_limit=limits.time_limit
        )
    except dsl.UndefinedResult:
        return Outcome(UNDEFINED)
    except dsl.DslRuntimeError as exc:
        return Outcome(RUNTIME_ERROR, detail=str(exc))
    except dsl.StepBudgetExceeded:
        return Outcome(RESOURCE_EXCEEDED, detail="step budget exhausted")
    except dsl.TimeBudgetExceeded:
        return Outcome(TIMEOUT, detail="time budget exhausted")
    except RecursionError:
        return Outcome(RESOURCE_EXCEEDED, detail="recursion depth exhausted")
    except MemoryError:
        return Outcome(RESOURCE_EXCEEDED, detail="memory exhausted")
    try:
        text = canonicalize(result)
    except StructuralError:
        return Outcome(RUNTIME_ERROR, detail="result is not a value")
    return Outcome(DEFINED, text=text)


# Per-process caches: programs compile once, canonical inputs decode once.
_program_cache: Dict[str, dsl.Program] = {}
_input_cache: Dict[str, Value] = {}


def _cached_program(source: str) -> dsl.Program:
    program = _program_cache.get(source)
    if program is None:
        program = dsl.parse_program(source)
        _program_cache[source] = program
    return program


def _cached_input(text: str) -> Value:
    try:
        return _input_cache[text]
    except KeyError:
        value = parse_value(text)
        _input_cache[text] = value
        return value


def _eval_chunk(task) -> List[str]:
    source, canonical_inputs, max_steps, time_limit = task
    program = _cached_program(source)
    limits = ExecLimits(time_limit=time_limit, max_steps=max_steps)
    lines = []
    for text in canonical_inputs:
        outcome = eval_program(program, _cached_input(text), limits)
        lines.append(
            _STATUS_CODE[outcome.status]
            + (" " + outcome.text if outcome.is_defined else "")
        )
    return lines


def compute_prediction_set(
    hypothesis: Hypothesis,
    space: SampleSpace,
    limits: ExecLimits = DEFAULT_LIMITS,
    workers: int = 1,
) -> PredictionSet:
    """Evaluate one hypothesis over every input of the space, in order."""
    return compute_prediction_sets([hypothesis], space, limits, workers)[0]


def compute_prediction_sets(
    hypotheses: Sequence[Hypothesis],
    space: SampleSpace,
    limits: ExecLimits = DEFAULT_LIMITS,
    workers: int = 1,
    chunk_size: int = 512,
) -> List[PredictionSet]:
    """Evaluate many hypotheses over one space.

    Work is split into (hypothesis, input-chunk) tasks; outcomes are
    reassembled in (hypothesis, input) order, so results are byte-identical
    for any worker count.
    """
    for hypothesis in hypotheses:
        if hypothesis.language != "dsl":
            raise ValueError(
                f"{hypothesis.id}: only internal programs are evaluated here; "
                "use a worker client for external hypotheses"
            )
    tasks = []
    bounds = []
    for hypothesis in hypotheses:
        _cached_program(hypothesis.source)       # fail fast on parse errors
        start = len(tasks)
        for lo in range(0, space.size, chunk_size):
            chunk = space.canonical[lo : lo + chunk_size]
            tasks.append((hypothesis.source, chunk, limits.max_steps, limits.time_limit))
        bounds.append((start, len(tasks)))

    if workers <= 1 or len(tasks) <= 1:
        chunk_lines = [_eval_chunk(task) for task in tasks]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            chunk_lines = pool.map(_eval_chunk, tasks, chunksize=1)

    results = []
    space_id = space.space_id
    for hypothesis, (lo, hi) in zip(hypotheses, bounds):
        lines: List[str] = []
        for part in chunk_lines[lo:hi]:
            lines.extend(part)
        results.append(prediction_set_from_lines(hypothesis.id, space_id, lines))
    return results


def evaluate_on_observations(
    hypothesis_source: str,
    obs: ObservationSet,
    limits: ExecLimits = DEFAULT_LIMITS,
) -> List[Outcome]:
    """Apply a program to each observation input, in observation order."""
    program = _cached_program(hypothesis_source)
    return [eval_program(program, pair.input, limits) for pair in obs]


def make_lookup_hypothesis(
    obs: ObservationSet, hypothesis_id: str = "lookup"
) -> Hypothesis:
    """The trivial memorizing hypothesis: seen inputs map to their outputs,
    everything else is undefined. Consistent by construction."""
    if not len(obs):
        raise ValueError("cannot memorize an empty observation set")
    by_input: Dict[str, str] = {}
    for pair in obs:
        key = canonicalize(pair.input)
        out = canonicalize(pair.output)
        if key in by_input and by_input[key] != out:
            raise LookupConflictError(
                f"input {key} maps to both {by_input[key]} and {out}"
            )
        by_input[key] = out
    source = "undefined"
    for key, out in reversed(list(by_input.items())):
        source = f"if x=={key} then {out} else {source}"
    return Hypothesis(
        id=hypothesis_id,
        summary="Memorize the given pairs and decline all other inputs.",
        source=source,
    )
