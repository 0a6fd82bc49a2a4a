"""Deterministic report emission: text tables and line records.

Metric values are rendered twice, as the exact fraction and as a fixed
six-place decimal; identical results always produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .metrics import beta_diversity, gamma_diversity, generalizability
from .protocol import LoopResult

SCORECARD_FORMAT = "scorecard/1"


def fraction_text(value: Fraction) -> str:
    return str(Fraction(value))


def decimal_text(value: Fraction, places: int = 6) -> str:
    value = Fraction(value)
    quant = Decimal(value.numerator) / Decimal(value.denominator)
    return str(quant.quantize(Decimal(1).scaleb(-places)))


def render_cell(value: Optional[Fraction]) -> str:
    if value is None:
        return "--"
    return f"{fraction_text(value)} ({decimal_text(value)})"


def comment_header(meta: Dict) -> str:
    """One `# key=value ...` line recording the config behind a text report."""
    body = " ".join(f"{key}={meta[key]}" for key in sorted(meta))
    return f"# {body}\n"


def render_table(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Fixed-width text table with a header rule; deterministic bytes."""
    widths = [len(col) for col in columns]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def fmt(cells):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip()
    lines = [fmt(columns), fmt(["-" * w for w in widths])]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProblemScore:
    """Per-problem panel row; diversity fields are None without consistent
    hypotheses."""

    problem_id: str
    attempts: int
    parsable_rate: Optional[Fraction]
    consistent_rate: Optional[Fraction]
    coverage: Optional[Fraction]
    gamma: Optional[Fraction]
    beta: Optional[Fraction]


def score_problem(result: LoopResult) -> ProblemScore:
    transcript = result.transcript
    attempts = len(transcript.attempts)
    if attempts == 0:
        return ProblemScore(transcript.problem_id, 0, None, None, None, None, None)
    parsable = sum(1 for a in transcript.attempts if a.parsable)
    consistent = transcript.consistent_indices
    preds = [result.predictions[i] for i in consistent]
    coverage = None
    gamma = None
    beta = None
    if preds:
        coverage = sum(generalizability(p) for p in preds) / len(preds)
        gamma = gamma_diversity(preds)
        beta = beta_diversity(preds)
    return ProblemScore(
        problem_id=transcript.problem_id,
        attempts=attempts,
        parsable_rate=Fraction(parsable, attempts),
        consistent_rate=Fraction(len(consistent), attempts),
        coverage=coverage,
        gamma=gamma,
        beta=beta,
    )


_PANEL_FIELDS = ("parsable_rate", "consistent_rate", "coverage", "gamma", "beta")


def macro_average(scores: Sequence[ProblemScore]) -> Dict[str, Optional[Fraction]]:
    """Unweighted mean of each panel field over the problems defining it."""
    means: Dict[str, Optional[Fraction]] = {}
    for field_name in _PANEL_FIELDS:
        present = [
            getattr(s, field_name) for s in scores
            if getattr(s, field_name) is not None
        ]
        means[field_name] = (sum(present) / len(present)) if present else None
    return means


def scorecard_table(scores: Sequence[ProblemScore]) -> str:
    columns = ["problem", "attempts", "parsable", "consistent",
               "coverage", "gamma", "beta"]
    rows = []
    for score in sorted(scores, key=lambda s: s.problem_id):
        rows.append([
            score.problem_id,
            str(score.attempts),
            render_cell(score.parsable_rate),
            render_cell(score.consistent_rate),
            render_cell(score.coverage),
            render_cell(score.gamma),
            render_cell(score.beta),
        ])
    means = macro_average(scores)
    rows.append([
        "macro-mean",
        str(sum(s.attempts for s in scores)),
        render_cell(means["parsable_rate"]),
        render_cell(means["consistent_rate"]),
        render_cell(means["coverage"]),
        render_cell(means["gamma"]),
        render_cell(means["beta"]),
    ])
    return render_table(columns, rows)


def scorecard_records(scores: Sequence[ProblemScore], meta: Optional[Dict] = None) -> str:
    """Line-record rendition of the scorecard (one JSON object per problem)."""
    header: Dict = {"format": SCORECARD_FORMAT}
    if meta:
        header["meta"] = meta
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]

    def field_json(value: Optional[Fraction]):
        if value is None:
            return None
        return {"fraction": fraction_text(value), "decimal": decimal_text(value)}

    for score in sorted(scores, key=lambda s: s.problem_id):
        lines.append(json.dumps({
            "problem": score.problem_id,
            "attempts": score.attempts,
            "parsable_rate": field_json(score.parsable_rate),
            "consistent_rate": field_json(score.consistent_rate),
            "coverage": field_json(score.coverage),
            "gamma": field_json(score.gamma),
            "beta": field_json(score.beta),
        }, sort_keys=True, separators=(",", ":")))
    means = macro_average(scores)
    lines.append(json.dumps({
        "problem": None,
        "macro_mean": {name: field_json(value) for name, value in means.items()},
    }, sort_keys=True, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def study1_table(cells) -> str:
    columns = ["dataset", "n", "m", "problems", "skipped", "pass_rate",
               "survivor_gamma"]
    rows = [
        [c.dataset, str(c.n), str(c.m), str(c.problems), str(c.skipped),
         render_cell(c.pass_rate), render_cell(c.survivor_gamma)]
        for c in cells
    ]
    return render_table(columns, rows)


def study2_table(cells) -> str:
    columns = ["m", "judgments", "chosen_passes", "rejected_passes",
               "odds_ratio"]
    rows = []
    for c in cells:
        ratio = c.note if c.odds_ratio is None else render_cell(c.odds_ratio)
        rows.append([str(c.m), str(c.judgments), str(c.chosen_passes),
                     str(c.rejected_passes), ratio or "--"])
    return render_table(columns, rows)


def write_text(text: str, path) -> None:
    with open(path, "wb") as handle:
        handle.write(text.encode("utf-8"))
