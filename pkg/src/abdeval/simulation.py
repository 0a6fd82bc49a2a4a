"""Validation studies over pools of consistent hypotheses.

Study 1 measures defeasibility: how often consistent hypotheses survive
hidden held-out pairs, and how diverse the survivors stay. Study 2 measures
how well the combined score (coverage plus marginal diversity gains) predicts
survival: for score-discriminated candidate pairs it reports the odds ratio
of passing the hidden pairs.

Both studies are deterministic given (inputs, seed); hidden draws and context
draws derive per-cell seeds from the master seed by hashing.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .executor import (
    DEFAULT_LIMITS,
    ExecLimits,
    Hypothesis,
    PredictionSet,
    evaluate_on_observations,
)
from .metrics import beta_diversity, gamma_diversity, generalizability
from .spaces import DeterministicRng, sample_prefix
from .values import ObservationSet, canonicalize


def marginal_gain(
    pred: PredictionSet,
    context: Sequence[PredictionSet],
    metric: str,
) -> Fraction:
    """Change in a diversity metric from adding one hypothesis to a context.

    The empty context is scored 0 for both metrics, so a first fully-defined
    hypothesis gains its own coverage in gamma and nothing in beta.
    """
    extended = [*context, pred]
    if metric == "gamma":
        before = gamma_diversity(context) if context else Fraction(0)
        return gamma_diversity(extended) - before
    if metric == "beta":
        return beta_diversity(extended) - beta_diversity(context)
    raise ValueError(f"unknown metric {metric!r}")


def combined_score(
    pred: PredictionSet, context: Sequence[PredictionSet]
) -> Fraction:
    """Mean of coverage and the two marginal diversity gains."""
    return (
        generalizability(pred)
        + marginal_gain(pred, context, "gamma")
        + marginal_gain(pred, context, "beta")
    ) / 3


@dataclass(frozen=True)
class StudyConfig:
    m_values: Tuple[int, ...] = (1, 2, 3, 4)
    repetitions: int = 5
    context_sizes: Tuple[int, ...] = (0, 1, 2)
    contexts_per_size: int = 1
    seed: int = 0
    limits: ExecLimits = DEFAULT_LIMITS

    def __post_init__(self):
        if not self.m_values:
            raise ValueError("m_values must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass(frozen=True)
class ProblemRun:
    """One problem's pool, sampled observations, and consistent hypotheses."""

    problem_id: str
    dataset: str
    pool: ObservationSet                       # all known pairs
    sample_indices: Tuple[int, ...]            # which pairs were shown
    candidates: Tuple[Tuple[Hypothesis, PredictionSet], ...]

    @property
    def n(self) -> int:
        return len(self.sample_indices)

    @property
    def heldout_indices(self) -> Tuple[int, ...]:
        shown = set(self.sample_indices)
        return tuple(i for i in range(len(self.pool)) if i not in shown)


def _derive_seed(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _pass_matrix(run: ProblemRun, limits: ExecLimits) -> List[List[bool]]:
    """pass_matrix[c][i]: candidate c reproduces pool pair i exactly."""
    matrix = []
    for hypothesis, _ in run.candidates:
        outcomes = evaluate_on_observations(hypothesis.source, run.pool, limits)
        row = [
            outcome.is_defined and outcome.text == canonicalize(pair.output)
            for outcome, pair in zip(outcomes, run.pool)
        ]
        matrix.append(row)
    return matrix


@dataclass(frozen=True)
class Study1Cell:
    dataset: str
    n: int
    m: int
    problems: int
    skipped: int
    pass_rate: Optional[Fraction]
    survivor_gamma: Optional[Fraction]


def run_study1(runs: Sequence[ProblemRun], config: StudyConfig) -> List[Study1Cell]:
    """Hidden-pair pass rates and survivor diversity, macro-averaged.

    Per problem and repetition, m hidden pairs are drawn from the unshown
    pool; a hypothesis passes if it reproduces all of them. Problems without
    enough held-out pairs (or with no consistent hypotheses) are skipped and
    counted.
    """
    cells: Dict[Tuple[str, int, int], Dict] = {}
    for run in runs:
        if not run.candidates:
            for m in config.m_values:
                cell = cells.setdefault(
                    (run.dataset, run.n, m),
                    {"rates": [], "gammas": [], "skipped": 0},
                )
                cell["skipped"] += 1
            continue
        matrix = _pass_matrix(run, config.limits)
        held = run.heldout_indices
        for m in config.m_values:
            cell = cells.setdefault(
                (run.dataset, run.n, m), {"rates": [], "gammas": [], "skipped": 0}
            )
            if len(held) < m:
                cell["skipped"] += 1
                continue
            rep_rates = []
            rep_gammas = []
            for rep in range(config.repetitions):
                rng = DeterministicRng(
                    _derive_seed(config.seed, "s1", run.problem_id, m, rep)
                )
                picks = sample_prefix(len(held), m, rng)
                hidden = [held[p] for p in picks]
                survivors = [
                    c
                    for c in range(len(run.candidates))
                    if all(matrix[c][i] for i in hidden)
                ]
                rep_rates.append(Fraction(len(survivors), len(run.candidates)))
                if survivors:
                    rep_gammas.append(
                        gamma_diversity([run.candidates[c][1] for c in survivors])
                    )
            cell["rates"].append(sum(rep_rates) / len(rep_rates))
            if rep_gammas:
                cell["gammas"].append(sum(rep_gammas) / len(rep_gammas))

    rows = []
    for (dataset, n, m), cell in sorted(cells.items()):
        rates = cell["rates"]
        gammas = cell["gammas"]
        rows.append(
            Study1Cell(
                dataset=dataset,
                n=n,
                m=m,
                problems=len(rates),
                skipped=cell["skipped"],
                pass_rate=(sum(rates) / len(rates)) if rates else None,
                survivor_gamma=(sum(gammas) / len(gammas)) if gammas else None,
            )
        )
    return rows


@dataclass(frozen=True)
class PairJudgment:
    """One score-discriminated candidate pair tested on hidden pairs."""

    problem_id: str
    m: int
    context_ids: Tuple[str, ...]
    chosen_id: str
    rejected_id: str
    chosen_score: Fraction
    rejected_score: Fraction
    chosen_pass: bool
    rejected_pass: bool

    def __post_init__(self):
        if not self.chosen_score > self.rejected_score:
            raise ValueError("chosen score must be strictly higher")


@dataclass(frozen=True)
class Study2Cell:
    m: int
    judgments: int
    chosen_passes: int
    rejected_passes: int
    odds_ratio: Optional[Fraction]      # None for undefined or no data
    note: Optional[str] = None          # "undefined" | "no-data"


def run_study2(
    runs: Sequence[ProblemRun], config: StudyConfig
) -> Tuple[List[Study2Cell], List[PairJudgment]]:
    """Score-predictiveness: odds ratio of passing hidden pairs, per m.

    Contexts with a member that already passes the hidden pairs are
    discarded; candidate pairs with equal scores are skipped (the labeling
    requires a strict inequality). Counts pool over problems, contexts, and
    pairs.
    """
    judgments: List[PairJudgment] = []
    for run in runs:
        if len(run.candidates) < 2:
            continue
        matrix = _pass_matrix(run, config.limits)
        held = run.heldout_indices
        ids = [h.id for h, _ in run.candidates]
        preds = [p for _, p in run.candidates]
        for m in config.m_values:
            if len(held) < m:
                continue
            for rep in range(config.repetitions):
                rng = DeterministicRng(
                    _derive_seed(config.seed, "s2", run.problem_id, m, rep)
                )
                picks = sample_prefix(len(held), m, rng)
                hidden = [held[p] for p in picks]
                passes = [
                    all(matrix[c][i] for i in hidden)
                    for c in range(len(run.candidates))
                ]
                for c_size in config.context_sizes:
                    if c_size > len(run.candidates):
                        continue
                    for draw in range(config.contexts_per_size):
                        ctx_rng = DeterministicRng(
                            _derive_seed(
                                config.seed, "ctx", run.problem_id, m, rep,
                                c_size, draw,
                            )
                        )
                        ctx = sorted(
                            sample_prefix(len(run.candidates), c_size, ctx_rng)
                        )
                        if any(passes[c] for c in ctx):
                            continue        # a context member already passes
                        context_preds = [preds[c] for c in ctx]
                        eligible = [
                            c for c in range(len(run.candidates)) if c not in ctx
                        ]
                        scores = {
                            c: combined_score(preds[c], context_preds)
                            for c in eligible
                        }
                        for a_i in range(len(eligible)):
                            for b_i in range(a_i + 1, len(eligible)):
                                a, b = eligible[a_i], eligible[b_i]
                                if scores[a] == scores[b]:
                                    continue
                                chosen, rejected = (
                                    (a, b) if scores[a] > scores[b] else (b, a)
                                )
                                judgments.append(
                                    PairJudgment(
                                        problem_id=run.problem_id,
                                        m=m,
                                        context_ids=tuple(ids[c] for c in ctx),
                                        chosen_id=ids[chosen],
                                        rejected_id=ids[rejected],
                                        chosen_score=scores[chosen],
                                        rejected_score=scores[rejected],
                                        chosen_pass=passes[chosen],
                                        rejected_pass=passes[rejected],
                                    )
                                )

    cells = []
    for m in config.m_values:
        batch = [j for j in judgments if j.m == m]
        if not batch:
            cells.append(
                Study2Cell(m=m, judgments=0, chosen_passes=0, rejected_passes=0,
                           odds_ratio=None, note="no-data")
            )
            continue
        chosen = sum(1 for j in batch if j.chosen_pass)
        rejected = sum(1 for j in batch if j.rejected_pass)
        if rejected == 0:
            ratio, note = None, "undefined"
        else:
            ratio, note = Fraction(chosen, rejected), None
        cells.append(
            Study2Cell(
                m=m,
                judgments=len(batch),
                chosen_passes=chosen,
                rejected_passes=rejected,
                odds_ratio=ratio,
                note=note,
            )
        )
    return cells, judgments
