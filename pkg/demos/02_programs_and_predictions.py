"""Hypothesis programs and prediction sets.

Hypotheses are pure programs over the value universe. Evaluating one over a
sample space yields a prediction set: one outcome per input, reproducible
bit-for-bit, with undefined/errored/over-budget inputs recorded as statuses
rather than crashes.
"""

from abdeval import (
    ExecLimits,
    Hypothesis,
    Observation,
    ObservationSet,
    compute_prediction_set,
    compute_prediction_sets,
    eval_program,
    make_lookup_hypothesis,
    parse_program,
)
from abdeval.spaces import SampleSpace, SpaceRecipe

space = SampleSpace(
    recipe=SpaceRecipe(family="list-functions", cap=0, seed=0),
    inputs=((6, 1), (1, 2), (9,), ()),
)

# --- single evaluations ------------------------------------------------------

program = parse_program("if contains(x,6) then [6] else [0]")
print("membership program:")
for value in space.inputs:
    print(f"  f({value!r:>8}) -> {eval_program(program, value)}")

partial = parse_program("x / x")                # undefined at zero
print("\npartial program at 0 ->", eval_program(partial, 0).status)
print("partial program at 7 ->", eval_program(partial, 7))

looping = parse_program("(fn(f) -> f(f))(fn(f) -> f(f))")
outcome = eval_program(looping, 0, ExecLimits(time_limit=2.0, max_steps=50_000))
print("self-application under a step budget ->", outcome.status)

# --- prediction sets ---------------------------------------------------------

hypotheses = [
    Hypothesis(id="rev", summary="Reverse the list", source="reverse(x)"),
    Hypothesis(id="head", summary="First element or decline",
               source="if length(x) == 0 then undefined else [x[0]]"),
]
serial = compute_prediction_sets(hypotheses, space, workers=1)
parallel = compute_prediction_sets(hypotheses, space, workers=2)
for pred in serial:
    print(f"\n{pred.hypothesis_id}: defined on {pred.defined_count}/{pred.size}")
    for line in pred.to_lines():
        print(f"  {line}")
assert [p.to_bytes() for p in serial] == [p.to_bytes() for p in parallel]
print("\nserial and parallel evaluation produce identical bytes")

# --- the memorizing baseline -------------------------------------------------

obs = ObservationSet("demo", (Observation((6, 1), (6,)), Observation((1, 2), (0,))))
lookup = make_lookup_hypothesis(obs)
pred = compute_prediction_set(lookup, space)
print(f"\nlookup hypothesis source: {lookup.source}")
print(f"lookup coverage: {pred.defined_count}/{pred.size} "
      "(memorized inputs only)")
