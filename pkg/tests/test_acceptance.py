"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Run with `python3 -m pytest tests/test_acceptance.py -v -s` to see the
per-criterion lines. The grid-corpus cardinality sub-check runs only when the
official corpora are available (ABDEVAL_MINIARC_DIR / ABDEVAL_ARC2025_DIR);
everything else is self-contained.
"""

import itertools
import os
import random
import time
from fractions import Fraction

from abdeval.curriculum import (
    CurriculumParams,
    LossRecord,
    as_fraction,
    compute_weights,
    initial_state,
    replay_schedule,
    update_ewma,
)
from abdeval.datasets import collect_corpus_grids
from abdeval.executor import (
    DEFINED,
    Hypothesis,
    Outcome,
    PredictionSet,
    UNDEFINED,
    compute_prediction_set,
    compute_prediction_sets,
)
from abdeval.metrics import (
    BAD_NON_NOVEL,
    GOOD,
    beta_diversity,
    bounds_certificate,
    classify_hypothesis,
    gamma_beta_bounds,
    gamma_diversity,
    generalizability,
    jaccard_dissim,
    novelty_coverage,
)
from abdeval.preferences import (
    Candidate,
    PreferenceProblem,
    STAGE_CONSISTENCY,
    STAGE_PARSING,
    STAGE_SCORE,
    build_preference_dataset,
)
from abdeval.protocol import (
    STOP_EXHAUSTED,
    STOP_THREE_BAD,
    ScriptedProposer,
    run_generation_loop,
)
from abdeval.simulation import ProblemRun, StudyConfig, run_study1, run_study2
from abdeval.spaces import (
    SampleSpace,
    SpaceRecipe,
    build_acre_space,
    build_corpus_space,
    build_list_function_space,
    space_to_bytes,
)
from abdeval.values import Grid, Observation, ObservationSet

from helpers import oracle_beta, oracle_gamma
from test_metrics import pred_from_texts
from test_simulation import _study1_problems, _study2_problem, candidate


def ok(line: str) -> None:
    print(f"PASS  {line}")


def small_space(*values):
    return SampleSpace(
        recipe=SpaceRecipe(family="list-functions", cap=0, seed=0),
        inputs=tuple(values),
    )


# ---------------------------------------------------------------------------
# Criterion 1: worked-example fidelity
# ---------------------------------------------------------------------------


def test_worked_example_fidelity():
    f1 = pred_from_texts("f1", ["1", "2", "3"])
    f2 = pred_from_texts("f2", ["1", "2", "2"])
    elapsed = []
    for _ in range(5):
        start = time.perf_counter()
        g1 = generalizability(f1)
        g2 = generalizability(f2)
        gamma = gamma_diversity([f1, f2])
        beta = beta_diversity([f1, f2])
        elapsed.append(time.perf_counter() - start)
    assert g1 == Fraction(1)
    assert g2 == Fraction(1)
    assert gamma == Fraction(4, 3)
    assert beta == Fraction(1, 2)
    assert min(elapsed) < 0.001
    ok(
        "worked-example fidelity: G=1, gamma=4/3, beta=1/2 exact "
        f"({min(elapsed) * 1e6:.0f}us)"
    )


# ---------------------------------------------------------------------------
# Criterion 2: sample-space cardinalities and rebuild determinism
# ---------------------------------------------------------------------------


def test_sample_space_cardinalities():
    start = time.perf_counter()
    lists = build_list_function_space(seed=42, cap_per_length=1000)
    assert lists.size == 14_101
    assert space_to_bytes(lists) == space_to_bytes(
        build_list_function_space(seed=42, cap_per_length=1000)
    )
    acre = build_acre_space(seed=7, cap_per_count=1000)
    assert acre.size == 7_049
    assert space_to_bytes(acre) == space_to_bytes(
        build_acre_space(seed=7, cap_per_count=1000)
    )
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    ok(
        "sample-space cardinalities: 14101 and 7049 exact, rebuilds "
        f"byte-identical ({elapsed:.1f}s)"
    )

    # corpus dedup mechanics on a synthetic corpus
    g1 = Grid(((1, 2), (3, 4)))
    g2 = Grid(((9,),))
    space = build_corpus_space([("s", [g1, g2, g1, g1, g2])])
    assert space.size == 2
    ok("grid-corpus dedup: repeated grids collapse to unique inputs")

    checked = False
    for env, expected in (
        ("ABDEVAL_MINIARC_DIR", 767),
        ("ABDEVAL_ARC2025_DIR", 4_826),
    ):
        root = os.environ.get(env)
        if not root:
            continue
        corpus = build_corpus_space(collect_corpus_grids([root]))
        assert corpus.size == expected
        ok(f"official corpus via {env}: {expected} unique grids")
        checked = True
    if not checked:
        print(
            "NOTE  official corpora not supplied; 767/4826 checks idle "
            "(set ABDEVAL_MINIARC_DIR / ABDEVAL_ARC2025_DIR to enable)"
        )


# ---------------------------------------------------------------------------
# Criterion 3: bounds and identities over random fully-defined instances
# ---------------------------------------------------------------------------


def test_bounds_property_suite():
    start = time.perf_counter()
    rng = random.Random(20240820)
    checked = 0
    while checked < 10_000:
        k = rng.randint(2, 6)
        n = rng.randint(1, 8)
        alphabet = rng.randint(1, 4)
        preds = [
            pred_from_texts(
                f"h{i}", [str(rng.randrange(alphabet)) for _ in range(n)]
            )
            for i in range(k)
        ]
        cert = bounds_certificate(preds)
        assert cert.applicable
        assert cert.multiplicity_sum == k * n
        assert cert.intersection_total == sum(cert.pairwise_intersections)
        assert cert.lower <= cert.beta <= cert.upper
        checked += 1

    # equality at the extremes
    for k in range(2, 7):
        n = 5
        identical = [pred_from_texts(f"i{i}", ["7"] * n) for i in range(k)]
        cert_low = bounds_certificate(identical)
        assert cert_low.gamma == 1
        assert cert_low.beta == cert_low.lower == cert_low.upper == 0
        disjoint = [
            pred_from_texts(f"d{i}", [str(100 * i + j) for j in range(n)])
            for i in range(k)
        ]
        cert_high = bounds_certificate(disjoint)
        assert cert_high.gamma == k
        assert cert_high.beta == cert_high.lower == cert_high.upper == 1
        low, high = gamma_beta_bounds(k, Fraction(1))
        assert low == high == 0
        low, high = gamma_beta_bounds(k, Fraction(k))
        assert low == high == 1
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    ok(
        f"feasible-region suite: identities and envelopes exact on {checked} "
        f"random instances, equality at both extremes ({elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# Criterion 4: metric ranges, degenerate cases, oracle equivalence
# ---------------------------------------------------------------------------


def test_metric_range_and_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random(20240821)

    assert beta_diversity([]) == 0
    assert beta_diversity([pred_from_texts("solo", ["1", "2"])]) == 0

    checked = 0
    for k in range(1, 5):
        for n in range(1, 6):
            for _ in range(500):
                preds = []
                pair_lists = []
                fully_defined = rng.random() < 0.5
                for i in range(k):
                    texts = [
                        str(rng.randrange(3))
                        if fully_defined or rng.random() < 0.8
                        else None
                        for _ in range(n)
                    ]
                    preds.append(pred_from_texts(f"h{i}", texts))
                    pair_lists.append(
                        [(idx, t) for idx, t in enumerate(texts) if t is not None]
                    )
                gamma = gamma_diversity(preds)
                beta = beta_diversity(preds)
                assert gamma == oracle_gamma(pair_lists, n)
                assert beta == oracle_beta(pair_lists)
                assert Fraction(0) <= beta <= Fraction(1)
                if fully_defined:
                    assert Fraction(1) <= gamma <= Fraction(k)
                if k < 2:
                    assert beta == 0
                checked += 1
    elapsed = time.perf_counter() - start
    assert elapsed < 60
    ok(
        f"metric ranges and brute-force oracle equivalence on {checked} "
        f"instances with k<=4, |S|<=5 ({elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# Criterion 5: stopping rule and novelty boundary
# ---------------------------------------------------------------------------


OBS = ObservationSet("p", (Observation((1, 2), (2, 1)), Observation((3,), (3,))))
LOOP_SPACE = small_space((1, 2), (3,), (1, 2, 3), ())

GOOD_REPLIES = [
    '("Reverse the list", "reverse(x)")',
    '("Swap two-element lists", "if length(x) == 2 then [x[1],x[0]] else x")',
    '("Reverse unless empty", "if length(x) == 0 then undefined else reverse(x)")',
]
BAD_REPLIES = [
    "free-form prose, not a tuple",
    '("Identity", "x")',
    '```("Reverse", "reverse(x)")```',
]


def test_stopping_rule_conformance():
    rng = random.Random(20240822)
    stopped_at_three = 0
    for _ in range(100):
        plan = []
        goods = iter(GOOD_REPLIES)
        for _ in range(rng.randint(1, 10)):
            if rng.random() < 0.5:
                reply = next(goods, None)
                plan.append(reply if reply else rng.choice(BAD_REPLIES))
            else:
                plan.append(rng.choice(BAD_REPLIES))
        result = run_generation_loop(
            "p", OBS, ScriptedProposer(plan), LOOP_SPACE
        )
        transcript = result.transcript
        bad_seen = 0
        stop_index = None
        for position, attempt in enumerate(transcript.attempts):
            if attempt.verdict.is_bad:
                bad_seen += 1
                if bad_seen == 3:
                    stop_index = position
        assert transcript.bad_count <= 3
        if transcript.stop_reason == STOP_THREE_BAD:
            assert transcript.bad_count == 3
            assert stop_index == len(transcript.attempts) - 1
            stopped_at_three += 1
        else:
            assert transcript.stop_reason == STOP_EXHAUSTED
            assert transcript.bad_count < 3
    assert stopped_at_three > 0
    ok(
        "stopping rule: 100 randomized sequences halt at exactly the third "
        f"bad verdict ({stopped_at_three} early stops)"
    )


def test_novelty_boundary_on_ten_input_space():
    space = small_space(*range(10))
    prior_hyp = Hypothesis(id="prior", summary="identity", source="x")
    prior = compute_prediction_set(prior_hyp, space)

    def agree_on(count):
        # agrees with the prior on exactly `count` of the 10 inputs
        return compute_prediction_set(
            Hypothesis(
                id=f"agree{count}",
                summary="partial copy",
                source=f"if x < {count} then x else x + 100",
            ),
            space,
        )

    at_threshold = novelty_coverage(agree_on(8), [prior])
    below = novelty_coverage(agree_on(7), [prior])
    assert at_threshold == Fraction(8, 10)
    assert below == Fraction(7, 10)
    assert classify_hypothesis(True, coverage=at_threshold).kind == BAD_NON_NOVEL
    assert classify_hypothesis(True, coverage=below).kind == GOOD
    ok("novelty boundary: coverage 0.80 is bad, 0.79-and-below is good (exact)")


# ---------------------------------------------------------------------------
# Criterion 6: simulation procedures against hand counts
# ---------------------------------------------------------------------------


def test_simulation_procedures():
    cells = run_study1(_study1_problems(), StudyConfig(m_values=(1,), repetitions=3,
                                                       seed=5))
    assert cells[0].pass_rate == Fraction(7, 12)
    assert cells[0].survivor_gamma == Fraction(7, 6)

    runs = [
        _study2_problem(i, chosen_passes=i < 6, rejected_passes=i < 3)
        for i in range(10)
    ]
    config = StudyConfig(m_values=(1,), repetitions=1, context_sizes=(0,), seed=0)
    s2cells, judgments = run_study2(runs, config)
    assert s2cells[0].odds_ratio == Fraction(2)
    assert s2cells[0].chosen_passes == 6
    assert s2cells[0].rejected_passes == 3
    oracle = Fraction(sum(j.chosen_pass for j in judgments)) / Fraction(
        sum(j.rejected_pass for j in judgments)
    )
    assert s2cells[0].odds_ratio == oracle

    # pass monotonicity over every generated case
    rng = random.Random(20240823)
    for _ in range(50):
        size = rng.randint(2, 5)
        passes = [rng.random() < 0.5 for _ in range(size)]
        for m in range(1, size + 1):
            for subset in itertools.combinations(range(size), m):
                if all(passes[i] for i in subset):
                    for smaller in itertools.combinations(subset, m - 1):
                        assert all(passes[i] for i in smaller)
    ok(
        "simulation procedures: pass rates 7/12, survivor gamma 7/6, odds "
        "ratio 2 exact against hand counts; pass monotone in m"
    )


# ---------------------------------------------------------------------------
# Criterion 7: preference stages
# ---------------------------------------------------------------------------


def test_preference_stage_suite():
    def full(hid, texts):
        return Candidate(
            id=hid, parsable=True, consistent=True, summary=hid, source=hid,
            prediction=pred_from_texts(hid, texts),
        )

    problem = PreferenceProblem(
        "p",
        (
            full("A", ["1", "2", "3"]),
            full("B", ["1", "2", None]),
            Candidate(id="C", parsable=True, consistent=False, source="c"),
            Candidate(id="D", parsable=False),
        ),
    )
    pairs, counts = build_preference_dataset([problem], context_sizes=(0,))
    assert counts.parsing == 3
    assert counts.consistency == 2
    assert counts.score <= 1
    for pair in pairs:
        if pair.stage == STAGE_PARSING:
            assert pair.preferred.parsable and not pair.rejected.parsable
        elif pair.stage == STAGE_CONSISTENCY:
            assert pair.preferred.consistent and not pair.rejected.consistent
        else:
            assert pair.preferred_score > pair.rejected_score

    rng = random.Random(20240824)
    emitted = 0
    for trial in range(1000):
        candidates = []
        for i in range(rng.randint(2, 6)):
            parsable = rng.random() < 0.7
            consistent = parsable and rng.random() < 0.5
            if consistent:
                texts = [
                    str(rng.randrange(3)) if rng.random() < 0.8 else None
                    for _ in range(3)
                ]
                candidates.append(full(f"c{i}", texts))
            else:
                candidates.append(Candidate(id=f"c{i}", parsable=parsable))
        pairs, _ = build_preference_dataset(
            [PreferenceProblem(f"p{trial}", tuple(candidates))],
            context_sizes=(0,),
            seed=trial,
        )
        for pair in pairs:
            a, b = pair.preferred, pair.rejected
            if a.parsable != b.parsable:
                assert pair.stage == STAGE_PARSING
            elif a.consistent != b.consistent:
                assert pair.stage == STAGE_CONSISTENCY
            else:
                assert pair.stage == STAGE_SCORE
                assert pair.preferred_score > pair.rejected_score
            emitted += 1
    ok(
        "preference stages: 3/2/<=1 split with correct orientation; priority "
        f"never violated across 1000 randomized problems ({emitted} pairs)"
    )


# ---------------------------------------------------------------------------
# Criterion 8: curriculum recurrence
# ---------------------------------------------------------------------------


def test_curriculum_recurrence():
    start = time.perf_counter()
    params = CurriculumParams()
    state = initial_state()
    state = update_ewma(
        state, {"parsing": "1.0", "consistency": "1.0", "score": "1.0"}, params
    )
    uniform = compute_weights(state, params)
    assert set(uniform.values()) == {Fraction(1)}

    state = update_ewma(
        state, {"parsing": "0.5", "consistency": "1.0", "score": "1.0"}, params
    )
    parsing = state.state_of("parsing")
    assert parsing.ewma == Fraction(19, 20)             # 1.0 -> 0.95 exactly
    assert parsing.momentum == Fraction(3, 100)         # capped at 0.03
    weights = compute_weights(state, params)
    assert weights["parsing"] == Fraction(13, 11)
    assert weights["consistency"] == weights["score"] == Fraction(10, 11)

    records = []
    for boundary, parse_loss in ((1280, "1.0"), (2560, "0.5"), (3840, "0.5")):
        records.append(LossRecord(boundary, "parsing", as_fraction(parse_loss)))
        records.append(LossRecord(boundary, "consistency", as_fraction("1.0")))
        records.append(LossRecord(boundary, "score", as_fraction("1.0")))
    trajectory = replay_schedule(records, params)
    again = replay_schedule(records, params)
    assert trajectory == again
    for _, step_weights in trajectory:
        for value in step_weights.values():
            assert Fraction(4, 5) <= value <= Fraction(6, 5)
    assert trajectory[0][1]["parsing"] == Fraction(1)
    assert trajectory[1][1]["parsing"] == Fraction(13, 11)
    elapsed = time.perf_counter() - start
    assert elapsed < 1
    ok(
        "curriculum recurrence: EWMA 1.0->0.95, momentum capped at 0.03, "
        f"weights within [0.8, 1.2], double replay identical ({elapsed:.3f}s)"
    )


# ---------------------------------------------------------------------------
# Criterion 9: throughput and determinism under parallelism
# ---------------------------------------------------------------------------


THROUGHPUT_BUDGET_SECONDS = 120


def _hypothesis_family(count=100):
    templates = [
        "sum(x) + {k}",
        "if contains(x, {k}) then [{k}] else [0]",
        "map(fn(v) -> v * {k}, x)",
        "if length(x) > {k} then sort(x) else reverse(x)",
        "fold(+, {k}, x)",
        "filter(fn(v) -> v % {km} == 0, x)",
        "if length(x) == 0 then undefined else x[{k} % length(x)]",
        "reverse(sort(map(fn(v) -> v + {k}, x)))",
        "length(x) * {k}",
        "append(x, {k})",
    ]
    family = []
    for i in range(count):
        template = templates[i % len(templates)]
        k = i // len(templates)
        source = template.format(k=k, km=max(2, k))
        family.append(Hypothesis(id=f"t{i}", summary=f"variant {i}", source=source))
    return family


def test_throughput_smoke():
    space = build_list_function_space(seed=42, cap_per_length=1000)
    hypotheses = _hypothesis_family(100)
    workers = max(2, os.cpu_count() or 2)

    start = time.perf_counter()
    parallel = compute_prediction_sets(space=space, hypotheses=hypotheses,
                                       workers=workers)
    parallel_elapsed = time.perf_counter() - start
    assert parallel_elapsed < THROUGHPUT_BUDGET_SECONDS

    start = time.perf_counter()
    serial = compute_prediction_sets(space=space, hypotheses=hypotheses, workers=1)
    serial_elapsed = time.perf_counter() - start

    assert len(parallel) == len(serial) == 100
    for a, b in zip(serial, parallel):
        assert a.to_bytes() == b.to_bytes()
    ok(
        f"throughput: 100 hypotheses x {space.size} inputs in "
        f"{parallel_elapsed:.1f}s ({workers} workers) / {serial_elapsed:.1f}s "
        f"(1 worker), byte-identical results"
    )
