"""Preference pairs and the momentum curriculum.

Attempts from a generation run become training preference pairs through a
strict three-stage ladder (parsable > unparsable, consistent > inconsistent,
then higher combined score). A scheduler then adapts the sampling mix of the
three pair types to whichever objective is improving fastest.
"""

from abdeval import Observation, ObservationSet
from abdeval.curriculum import (
    CurriculumParams,
    CurriculumScheduler,
    LossRecord,
    as_fraction,
    replay_schedule,
)
from abdeval.preferences import (
    build_preference_dataset,
    problem_from_loop_result,
    sample_balanced,
)
from abdeval.protocol import ScriptedProposer, run_generation_loop
from abdeval.spaces import SampleSpace, SpaceRecipe

obs = ObservationSet(
    "rev", (Observation((1, 2), (2, 1)), Observation((3,), (3,)))
)
space = SampleSpace(
    recipe=SpaceRecipe(family="list-functions", cap=0, seed=0),
    inputs=((1, 2), (3,), (1, 2, 3), ()),
)
replies = [
    '("Reverse the list", "reverse(x)")',
    "not a tuple at all",
    '("Identity", "x")',
    '("Reverse, declining empties", '
    '"if length(x) == 0 then undefined else reverse(x)")',
]
result = run_generation_loop("rev", obs, ScriptedProposer(replies), space)

problem = problem_from_loop_result(result)
pairs, counts = build_preference_dataset([problem], context_sizes=(0,), seed=0)
print(f"stage counts: parsing={counts.parsing} consistency={counts.consistency} "
      f"score={counts.score} (no preference: {counts.no_preference})")
for pair in pairs:
    print(f"  [{pair.stage:<11}] prefer {pair.preferred.id} over {pair.rejected.id}")

balanced = sample_balanced(pairs, 3, seed=1)
print(f"balanced 1:1:1 sample: {[p.stage for p in balanced]}")

# --- the scheduler -----------------------------------------------------------

params = CurriculumParams()     # alpha=0.1, floor=0.1, cap=0.03, band [0.8,1.2]
scheduler = CurriculumScheduler(params)
print("\nscheduler reacting to probe losses:")
for probe in (
    {"parsing": "1.0", "consistency": "1.0", "score": "1.0"},
    {"parsing": "0.5", "consistency": "1.0", "score": "1.0"},   # parsing improves
    {"parsing": "0.5", "consistency": "1.0", "score": "0.7"},   # then score does
):
    weights = scheduler.observe(probe)
    rendered = {name: f"{float(w):.4f}" for name, w in weights.items()}
    print(f"  losses {probe} -> weights {rendered}")

# a loss log replays to a deterministic weight trajectory
records = []
for step, score_loss in ((1280, "3.0"), (2560, "2.5"), (3840, "2.1")):
    records.append(LossRecord(step, "parsing", as_fraction("1.0")))
    records.append(LossRecord(step, "consistency", as_fraction("1.0")))
    records.append(LossRecord(step, "score", as_fraction(score_loss)))
trajectory = replay_schedule(records, params)
assert trajectory == replay_schedule(records, params)
print("\nreplayed trajectory:")
for step, weights in trajectory:
    print(f"  step {step}: " + ", ".join(
        f"{name}={weights[name]}" for name in sorted(weights)
    ))
