"""Consistency, coverage, and diversity metrics over prediction sets.

All metric values are exact rationals (:class:`fractions.Fraction`); decimal
rendering happens only at the reporting edge. Diversity is computed over
*defined* prediction pairs: an input where a hypothesis is undefined (or
errored, or timed out) contributes no pair for that hypothesis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .executor import Outcome, PredictionSet
from .values import ObservationSet, canonicalize

GOOD = "good"
BAD_FORMAT = "bad-format"
BAD_INCONSISTENT = "bad-inconsistent"
BAD_NON_NOVEL = "bad-non-novel"

NOVELTY_THRESHOLD = Fraction(4, 5)


class MetricError(ValueError):
    """A metric is undefined for the given arguments (e.g. empty space)."""


class AlignmentError(ValueError):
    """Prediction sets under comparison come from different spaces."""


@dataclass(frozen=True)
class Verdict:
    """Classification of one attempt for the stopping rule."""

    kind: str
    violations: Tuple[int, ...] = ()        # observation indices, inconsistent
    coverage: Optional[Fraction] = None     # duplicate coverage, non-novel
    detail: Optional[str] = None            # parser/loader diagnostic, format

    def __post_init__(self):
        if self.kind not in (GOOD, BAD_FORMAT, BAD_INCONSISTENT, BAD_NON_NOVEL):
            raise ValueError(f"unknown verdict kind {self.kind!r}")
        if self.kind == BAD_INCONSISTENT and not self.violations:
            raise ValueError("inconsistent verdict must list violations")
        if self.kind == BAD_NON_NOVEL:
            if self.coverage is None or self.coverage < NOVELTY_THRESHOLD:
                raise ValueError("non-novel verdict requires coverage >= threshold")

    @property
    def is_bad(self) -> bool:
        return self.kind != GOOD


def check_consistency(
    outcomes: Sequence[Outcome], obs: ObservationSet
) -> Tuple[int, ...]:
    """Indices of observations the hypothesis fails to reproduce.

    A hypothesis is consistent iff this is empty: every observation input
    must yield a defined outcome equal to the recorded output. Undefined,
    errored, or timed-out outcomes on an observation input count as
    violations.
    """
    if len(outcomes) != len(obs):
        raise AlignmentError("one outcome per observation required")
    violations = []
    for index, (outcome, pair) in enumerate(zip(outcomes, obs)):
        if not outcome.is_defined or outcome.text != canonicalize(pair.output):
            violations.append(index)
    return tuple(violations)


def generalizability(pred: PredictionSet) -> Fraction:
    """Coverage: fraction of the space where the hypothesis is defined."""
    if pred.size == 0:
        raise MetricError("coverage undefined over an empty space")
    return Fraction(pred.defined_count, pred.size)


def _common_space(preds: Sequence[PredictionSet]) -> Tuple[str, int]:
    if not preds:
        raise MetricError("need at least one prediction set")
    space_id = preds[0].space_id
    size = preds[0].size
    for pred in preds[1:]:
        if pred.space_id != space_id or pred.size != size:
            raise AlignmentError("prediction sets span different spaces")
    return space_id, size


def gamma_diversity(preds: Sequence[PredictionSet]) -> Fraction:
    """Average number of distinct defined predictions per input.

    Equals |union of defined (input, output) pairs| / |space|; 1 means all
    hypotheses agree everywhere, m means they disagree on every input.
    """
    _, size = _common_space(preds)
    if size == 0:
        raise MetricError("diversity undefined over an empty space")
    union: set = set()
    for pred in preds:
        union |= pred.defined_pairs()
    return Fraction(len(union), size)


def jaccard_dissim(a: PredictionSet, b: PredictionSet) -> Fraction:
    """1 - |intersection| / |union| over defined pairs; 0 when both empty."""
    _common_space([a, b])
    pa = a.defined_pairs()
    pb = b.defined_pairs()
    union = len(pa | pb)
    if union == 0:
        return Fraction(0)
    return 1 - Fraction(len(pa & pb), union)


def beta_diversity(preds: Sequence[PredictionSet]) -> Fraction:
    """Mean pairwise Jaccard dissimilarity; 0 for fewer than two sets."""
    if len(preds) < 2:
        return Fraction(0)
    _common_space(preds)
    total = Fraction(0)
    pairs = 0
    for a, b in combinations(preds, 2):
        total += jaccard_dissim(a, b)
        pairs += 1
    return total / pairs


def novelty_coverage(
    pred: PredictionSet, priors: Sequence[PredictionSet]
) -> Fraction:
    """Fraction of inputs where some prior makes the same defined prediction."""
    if pred.size == 0:
        raise MetricError("coverage undefined over an empty space")
    if not priors:
        return Fraction(0)
    _common_space([pred, *priors])
    prior_pairs: set = set()
    for prior in priors:
        prior_pairs |= prior.defined_pairs()
    duplicated = len(pred.defined_pairs() & prior_pairs)
    return Fraction(duplicated, pred.size)


def classify_hypothesis(
    parse_ok: bool,
    violations: Sequence[int] = (),
    coverage: Optional[Fraction] = None,
    threshold: Fraction = NOVELTY_THRESHOLD,
    detail: Optional[str] = None,
) -> Verdict:
    """Apply the verdict ladder: format, then consistency, then novelty.

    An attempt is good only if it parses, violates no observation, and its
    duplicate coverage against prior accepted hypotheses is strictly below
    the threshold (coverage exactly at the threshold is non-novel).
    """
    if not parse_ok:
        return Verdict(BAD_FORMAT, detail=detail)
    if violations:
        return Verdict(BAD_INCONSISTENT, violations=tuple(violations))
    if coverage is not None and coverage >= threshold:
        return Verdict(BAD_NON_NOVEL, coverage=coverage)
    return Verdict(GOOD)


@dataclass(frozen=True)
class DiversityReport:
    """Gamma, beta, and the pairwise dissimilarity matrix for one set."""

    m: int
    gamma: Fraction
    beta: Fraction
    pairwise: Tuple[Tuple[Fraction, ...], ...]


def diversity_report(preds: Sequence[PredictionSet]) -> DiversityReport:
    gamma = gamma_diversity(preds)
    m = len(preds)
    matrix = tuple(
        tuple(
            Fraction(0) if i == j else jaccard_dissim(preds[i], preds[j])
            for j in range(m)
        )
        for i in range(m)
    )
    if m < 2:
        beta = Fraction(0)
    else:
        beta = sum(matrix[i][j] for i in range(m) for j in range(i + 1, m)) / comb(m, 2)
    return DiversityReport(m=m, gamma=gamma, beta=beta, pairwise=matrix)


# ---------------------------------------------------------------------------
# Feasible-region bounds linking gamma and beta
# ---------------------------------------------------------------------------


def gamma_beta_bounds(k: int, gamma: Fraction) -> Tuple[Fraction, Fraction]:
    """Smallest and largest beta achievable by k fully-defined hypotheses
    with the given gamma: 2(g-1)/(k+g-2) <= beta <= 2k(g-1)/(2kg-g-k).

    Both bounds are tight: equality holds at gamma = 1 (identical sets) and
    gamma = k (pairwise disjoint everywhere).
    """
    if k < 2:
        raise MetricError("bounds require at least two hypotheses")
    gamma = Fraction(gamma)
    if gamma < 1 or gamma > k:
        raise MetricError(f"gamma {gamma} outside [1, {k}]")
    if gamma == 1:
        return (Fraction(0), Fraction(0))
    lower = Fraction(2) * (gamma - 1) / (k + gamma - 2)
    upper = Fraction(2 * k) * (gamma - 1) / (2 * k * gamma - gamma - k)
    return (lower, upper)


@dataclass(frozen=True)
class BoundsCertificate:
    """Checked bookkeeping tying a set's gamma and beta together.

    Only applicable when every hypothesis is defined on the whole space
    (the envelope proofs assume equal-size prediction sets).
    """

    applicable: bool
    reason: Optional[str] = None
    k: int = 0
    n: int = 0
    gamma: Fraction = Fraction(0)
    beta: Fraction = Fraction(0)
    lower: Fraction = Fraction(0)
    upper: Fraction = Fraction(0)
    reuse: Fraction = Fraction(0)                      # k / gamma
    union_size: int = 0
    multiplicity_sum: int = 0                          # sum of c_x, must be k*n
    multiplicity_sq_sum: int = 0
    pairwise_intersections: Tuple[int, ...] = ()       # t_ij in pair order
    intersection_total: int = 0                        # I = sum of C(c_x, 2)
    avg_intersection: Fraction = Fraction(0)
    identity_ok: bool = False
    bounds_ok: bool = False


def bounds_certificate(preds: Sequence[PredictionSet]) -> BoundsCertificate:
    """Compute union multiplicities and verify the double-counting identity,
    the pairwise-intersection identity, and the beta envelope."""
    _, n = _common_space(preds)
    k = len(preds)
    if k < 2:
        return BoundsCertificate(applicable=False, reason="need at least two sets")
    if any(pred.defined_count != n for pred in preds):
        return BoundsCertificate(
            applicable=False, reason="equal-size premise fails: partial domains"
        )
    if n == 0:
        return BoundsCertificate(applicable=False, reason="empty space")

    pair_sets: List[FrozenSet[Tuple[int, str]]] = [p.defined_pairs() for p in preds]
    multiplicity: Dict[Tuple[int, str], int] = {}
    for pairs in pair_sets:
        for pair in pairs:
            multiplicity[pair] = multiplicity.get(pair, 0) + 1

    union_size = len(multiplicity)
    mult_sum = sum(multiplicity.values())
    mult_sq_sum = sum(c * c for c in multiplicity.values())
    intersections = tuple(
        len(pair_sets[i] & pair_sets[j]) for i, j in combinations(range(k), 2)
    )
    intersection_total = sum(comb(c, 2) for c in multiplicity.values())

    gamma = Fraction(union_size, n)
    beta = beta_diversity(preds)
    lower, upper = gamma_beta_bounds(k, gamma)

    identity_ok = (
        mult_sum == k * n and intersection_total == sum(intersections)
    )
    bounds_ok = lower <= beta <= upper

    return BoundsCertificate(
        applicable=True,
        k=k,
        n=n,
        gamma=gamma,
        beta=beta,
        lower=lower,
        upper=upper,
        reuse=Fraction(k) / gamma,
        union_size=union_size,
        multiplicity_sum=mult_sum,
        multiplicity_sq_sum=mult_sq_sum,
        pairwise_intersections=intersections,
        intersection_total=intersection_total,
        avg_intersection=Fraction(sum(intersections), comb(k, 2)),
        identity_ok=identity_ok,
        bounds_ok=bounds_ok,
    )
