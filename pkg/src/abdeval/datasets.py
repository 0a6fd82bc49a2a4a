"""Problem-file ingestion: a native schema plus adapters for the public
grid-task layouts.

Native schema (canonical-text values)::

    {"format": "problems/1",
     "problems": [{"id": "p1",
                   "train": [["[1,2]", "[2,1]"], ...],
                   "test":  [["[3]", "[3]"], ...]}]}

Grid-task adapter: a single task file ``{"train": [{"input": [[...]],
"output": [[...]]}, ...], "test": [...]}``, a combined mapping of task id to
task, or a directory of task files (ingested in sorted name order).

Observations are pooled across splits per problem; exact duplicate pairs are
dropped with a warning, per-pair split provenance is retained.
"""

from __future__ import annotations

import json
import logging
import os
from typing import Dict, List, Sequence, Tuple

from .spaces import CorpusError
from .values import (
    Grid,
    Observation,
    ObservationSet,
    StructuralError,
    dedup_pairs,
    parse_value,
)

PROBLEMS_FORMAT = "problems/1"

log = logging.getLogger(__name__)


def _grid_from_json(rows, where: str) -> Grid:
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise CorpusError(f"{where}: grid must be a list of rows")
    try:
        return Grid(tuple(tuple(r) for r in rows))
    except StructuralError as exc:
        raise CorpusError(f"{where}: {exc}")


def _pairs_from_task(task: dict, where: str) -> Tuple[List[Observation], List[str]]:
    pairs: List[Observation] = []
    provenance: List[str] = []
    for split in ("train", "test"):
        for i, entry in enumerate(task.get(split, ())):
            spot = f"{where}:{split}[{i}]"
            if not isinstance(entry, dict) or "input" not in entry:
                raise CorpusError(f"{spot}: expected an input/output record")
            grid_in = _grid_from_json(entry["input"], spot + ".input")
            if "output" not in entry:
                raise CorpusError(f"{spot}: missing output")
            grid_out = _grid_from_json(entry["output"], spot + ".output")
            pairs.append(Observation(grid_in, grid_out))
            provenance.append(split)
    return pairs, provenance


def _problem_from_pairs(
    problem_id: str, pairs: Sequence[Observation], provenance: Sequence[str]
) -> ObservationSet:
    deduped, dropped = dedup_pairs(pairs)
    if dropped:
        log.warning("%s: dropped %d duplicate observation(s)", problem_id, dropped)
        keys = {obs.key() for obs in deduped}
        kept_prov = []
        seen = set()
        for obs, prov in zip(pairs, provenance):
            key = obs.key()
            if key in keys and key not in seen:
                seen.add(key)
                kept_prov.append(prov)
        provenance = kept_prov
    return ObservationSet(
        problem_id=problem_id,
        pairs=deduped,
        provenance="pooled",
        pair_provenance=tuple(provenance),
    )


def _native_problems(body: dict, where: str) -> List[ObservationSet]:
    problems = []
    for entry in body.get("problems", ()):
        pid = entry.get("id")
        if not pid:
            raise CorpusError(f"{where}: problem without an id")
        pairs: List[Observation] = []
        provenance: List[str] = []
        for split in ("train", "test"):
            for i, record in enumerate(entry.get(split, ())):
                spot = f"{where}:{pid}:{split}[{i}]"
                try:
                    inp, out = record
                except (TypeError, ValueError):
                    raise CorpusError(f"{spot}: expected [input, output]")
                try:
                    pairs.append(Observation(parse_value(inp), parse_value(out)))
                except ValueError as exc:
                    raise CorpusError(f"{spot}: {exc}")
                provenance.append(split)
        problems.append(_problem_from_pairs(pid, pairs, provenance))
    return problems


def _load_json(path) -> dict:
    try:
        with open(path, "rb") as handle:
            return json.loads(handle.read().decode("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"{path}: {exc}")


def load_problem_file(path) -> List[ObservationSet]:
    """Load one file or directory of problems, pooling splits per problem."""
    if os.path.isdir(path):
        problems = []
        for name in sorted(os.listdir(path)):
            if name.endswith(".json"):
                problems.extend(load_problem_file(os.path.join(path, name)))
        if not problems:
            raise CorpusError(f"{path}: no problem files found")
        return problems
    body = _load_json(path)
    if not isinstance(body, dict):
        raise CorpusError(f"{path}: expected a JSON object")
    if body.get("format") == PROBLEMS_FORMAT:
        return _native_problems(body, str(path))
    if "train" in body or "test" in body:
        stem = os.path.splitext(os.path.basename(path))[0]
        pairs, provenance = _pairs_from_task(body, str(path))
        return [_problem_from_pairs(stem, pairs, provenance)]
    problems = []
    for task_id in body:
        task = body[task_id]
        if not isinstance(task, dict):
            raise CorpusError(f"{path}:{task_id}: expected a task object")
        pairs, provenance = _pairs_from_task(task, f"{path}:{task_id}")
        problems.append(_problem_from_pairs(task_id, pairs, provenance))
    if not problems:
        raise CorpusError(f"{path}: no problems found")
    return problems


def collect_corpus_grids(paths: Sequence[str]) -> List[Tuple[str, List[Grid]]]:
    """Input grids per source file, for corpus-space construction.

    Expands directories in sorted name order; within a file, grids appear in
    train-then-test order. Only *input* grids enter the corpus.
    """
    sources: List[Tuple[str, List[Grid]]] = []
    for path in paths:
        if os.path.isdir(path):
            inner = [
                os.path.join(path, name)
                for name in sorted(os.listdir(path))
                if name.endswith(".json")
            ]
            if not inner:
                raise CorpusError(f"{path}: no corpus files found")
            sources.extend(collect_corpus_grids(inner))
            continue
        body = _load_json(path)
        grids: List[Grid] = []
        if "train" in body or "test" in body:
            tasks: Dict[str, dict] = {os.path.basename(path): body}
        else:
            tasks = body
        for task_id in tasks:
            task = tasks[task_id]
            if not isinstance(task, dict):
                raise CorpusError(f"{path}:{task_id}: expected a task object")
            for split in ("train", "test"):
                for i, entry in enumerate(task.get(split, ())):
                    spot = f"{path}:{task_id}:{split}[{i}].input"
                    if not isinstance(entry, dict) or "input" not in entry:
                        raise CorpusError(f"{spot}: expected an input record")
                    grids.append(_grid_from_json(entry["input"], spot))
        sources.append((os.path.basename(path), grids))
    return sources
