"""Three-stage preference pairs for downstream preference-based training.

Candidates from a problem's attempts are compared pairwise; the first
discriminating stage wins: parsable beats unparsable, then consistent beats
inconsistent, then the higher combined score wins. Pairs that tie at every
applicable stage yield no preference. The stage ladder is strict: a pair
never carries a lower-priority stage when a higher one discriminates.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .executor import PredictionSet
from .protocol import LoopResult
from .simulation import combined_score
from .spaces import DeterministicRng, sample_prefix

STAGE_PARSING = "parsing"
STAGE_CONSISTENCY = "consistency"
STAGE_SCORE = "score"
STAGES = (STAGE_PARSING, STAGE_CONSISTENCY, STAGE_SCORE)

PAIRS_FORMAT = "pairs/1"
COUNTS_FORMAT = "pair-counts/1"


@dataclass(frozen=True)
class Candidate:
    """One attempt reduced to what the preference ladder needs."""

    id: str
    parsable: bool
    consistent: bool = False
    summary: str = ""
    source: str = ""
    prediction: Optional[PredictionSet] = None

    def __post_init__(self):
        if self.consistent and not self.parsable:
            raise ValueError("a consistent candidate must be parsable")
        if self.consistent and self.prediction is None:
            raise ValueError("consistent candidates need a prediction set")


@dataclass(frozen=True)
class PreferenceProblem:
    problem_id: str
    candidates: Tuple[Candidate, ...]

    def consistent_pool(self) -> Tuple[Candidate, ...]:
        return tuple(c for c in self.candidates if c.consistent)


def problem_from_loop_result(result: LoopResult) -> PreferenceProblem:
    """Reduce a generation run to preference candidates, one per attempt."""
    transcript = result.transcript
    candidates = []
    for attempt in transcript.attempts:
        cid = f"{transcript.problem_id}/a{attempt.index}"
        candidates.append(
            Candidate(
                id=cid,
                parsable=attempt.parsable,
                consistent=attempt.consistent,
                summary=attempt.summary or "",
                source=attempt.source or "",
                prediction=result.predictions.get(attempt.index),
            )
        )
    return PreferenceProblem(
        problem_id=transcript.problem_id, candidates=tuple(candidates)
    )


@dataclass(frozen=True)
class PreferencePair:
    problem_id: str
    context_ids: Tuple[str, ...]
    stage: str
    preferred: Candidate
    rejected: Candidate
    preferred_score: Optional[Fraction] = None
    rejected_score: Optional[Fraction] = None

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.stage == STAGE_PARSING:
            if not (self.preferred.parsable and not self.rejected.parsable):
                raise ValueError("parsing stage: preferred parsable, rejected not")
        elif self.stage == STAGE_CONSISTENCY:
            if not (self.preferred.parsable and self.rejected.parsable):
                raise ValueError("consistency stage: both sides parsable")
            if not (self.preferred.consistent and not self.rejected.consistent):
                raise ValueError("consistency stage: preferred consistent only")
        else:
            if not (self.preferred.consistent and self.rejected.consistent):
                raise ValueError("score stage: both sides consistent")
            if self.preferred_score is None or self.rejected_score is None:
                raise ValueError("score stage carries both scores")
            if not self.preferred_score > self.rejected_score:
                raise ValueError("score stage: preferred score strictly higher")


def compare_pair(
    a: Candidate,
    b: Candidate,
    context: Sequence[PredictionSet],
    problem_id: str,
    context_ids: Tuple[str, ...] = (),
) -> Optional[PreferencePair]:
    """First discriminating stage wins; None when the pair ties everywhere."""
    if a.parsable != b.parsable:
        preferred, rejected = (a, b) if a.parsable else (b, a)
        return PreferencePair(
            problem_id, context_ids, STAGE_PARSING, preferred, rejected
        )
    if not a.parsable:
        return None
    if a.consistent != b.consistent:
        preferred, rejected = (a, b) if a.consistent else (b, a)
        return PreferencePair(
            problem_id, context_ids, STAGE_CONSISTENCY, preferred, rejected
        )
    if not a.consistent:
        return None
    score_a = combined_score(a.prediction, context)
    score_b = combined_score(b.prediction, context)
    if score_a == score_b:
        return None
    preferred, rejected = (a, b) if score_a > score_b else (b, a)
    hi, lo = (score_a, score_b) if score_a > score_b else (score_b, score_a)
    return PreferencePair(
        problem_id, context_ids, STAGE_SCORE, preferred, rejected,
        preferred_score=hi, rejected_score=lo,
    )


@dataclass(frozen=True)
class StageCounts:
    parsing: int
    consistency: int
    score: int
    no_preference: int

    @property
    def total(self) -> int:
        return self.parsing + self.consistency + self.score


def build_preference_dataset(
    problems: Sequence[PreferenceProblem],
    context_sizes: Tuple[int, ...] = (0, 1, 2),
    contexts_per_size: int = 1,
    seed: int = 0,
) -> Tuple[List[PreferencePair], StageCounts]:
    """Enumerate every discriminated pair per problem and sampled context.

    Contexts are drawn from the consistent pool; pair enumeration runs over
    all remaining candidates in attempt order, so output order (problem,
    context, pair) is deterministic under the seed.
    """
    pairs: List[PreferencePair] = []
    tallies: Counter = Counter()
    no_preference = 0
    for problem in problems:
        pool = problem.consistent_pool()
        for c_size in context_sizes:
            if c_size > len(pool):
                continue
            for draw in range(contexts_per_size):
                rng = DeterministicRng(
                    _context_seed(seed, problem.problem_id, c_size, draw)
                )
                picks = sorted(sample_prefix(len(pool), c_size, rng))
                ctx = [pool[i] for i in picks]
                ctx_ids = tuple(c.id for c in ctx)
                ctx_preds = [c.prediction for c in ctx]
                eligible = [
                    c for c in problem.candidates if c.id not in set(ctx_ids)
                ]
                for i in range(len(eligible)):
                    for j in range(i + 1, len(eligible)):
                        pair = compare_pair(
                            eligible[i],
                            eligible[j],
                            ctx_preds,
                            problem.problem_id,
                            ctx_ids,
                        )
                        if pair is None:
                            no_preference += 1
                        else:
                            tallies[pair.stage] += 1
                            pairs.append(pair)
    counts = StageCounts(
        parsing=tallies[STAGE_PARSING],
        consistency=tallies[STAGE_CONSISTENCY],
        score=tallies[STAGE_SCORE],
        no_preference=no_preference,
    )
    return pairs, counts


def _context_seed(seed: int, problem_id: str, c_size: int, draw: int) -> int:
    import hashlib

    text = f"{seed}|prefctx|{problem_id}|{c_size}|{draw}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def sample_balanced(
    pairs: Sequence[PreferencePair], total: int, seed: int
) -> List[PreferencePair]:
    """Seeded subset with an exact 1:1:1 stage ratio, in stream order.

    ``total`` must be divisible by 3 and each stage must hold at least
    total/3 pairs.
    """
    if total % 3 != 0:
        raise ValueError("total must be divisible by 3")
    per_stage = total // 3
    rng = DeterministicRng(seed)
    keep: set = set()
    for stage in STAGES:
        indexed = [i for i, p in enumerate(pairs) if p.stage == stage]
        if len(indexed) < per_stage:
            raise ValueError(
                f"stage {stage} holds {len(indexed)} pairs, need {per_stage}"
            )
        for pick in sample_prefix(len(indexed), per_stage, rng):
            keep.add(indexed[pick])
    return [pair for i, pair in enumerate(pairs) if i in keep]


# ---------------------------------------------------------------------------
# Pair files: header line + one JSON record per pair; separate counts file
# ---------------------------------------------------------------------------


def _candidate_payload(candidate: Candidate) -> Dict:
    return {
        "id": candidate.id,
        "summary": candidate.summary,
        "source": candidate.source,
    }


def write_pairs(pairs: Iterable[PreferencePair], path) -> None:
    lines = [json.dumps({"format": PAIRS_FORMAT}, separators=(",", ":"))]
    for pair in pairs:
        record = {
            "problem": pair.problem_id,
            "context": list(pair.context_ids),
            "stage": pair.stage,
            "preferred": _candidate_payload(pair.preferred),
            "rejected": _candidate_payload(pair.rejected),
        }
        if pair.stage == STAGE_SCORE:
            record["scores"] = {
                "preferred": str(pair.preferred_score),
                "rejected": str(pair.rejected_score),
            }
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    with open(path, "wb") as handle:
        handle.write(("\n".join(lines) + "\n").encode("utf-8"))


def write_counts(counts: StageCounts, path) -> None:
    body = {
        "format": COUNTS_FORMAT,
        "parsing": counts.parsing,
        "consistency": counts.consistency,
        "score": counts.score,
        "no_preference": counts.no_preference,
        "total": counts.total,
    }
    with open(path, "wb") as handle:
        handle.write(
            (json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n").encode()
        )
