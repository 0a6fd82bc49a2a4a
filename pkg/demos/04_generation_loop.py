"""The generation loop and its three-strike stopping rule.

A proposer is prompted for hypotheses one at a time; each reply is parsed,
checked against the observations, and checked for novelty against prior
accepted hypotheses. The run stops once three bad attempts (unparsable,
inconsistent, or >= 80% duplicate predictions) accumulate.
"""

from abdeval import Observation, ObservationSet
from abdeval.protocol import (
    ScriptedProposer,
    render_init_prompt,
    replay_verdicts,
    run_generation_loop,
)
from abdeval.reports import score_problem, scorecard_table
from abdeval.spaces import SampleSpace, SpaceRecipe

obs = ObservationSet(
    "rev", (Observation((1, 2), (2, 1)), Observation((3,), (3,)))
)
space = SampleSpace(
    recipe=SpaceRecipe(family="list-functions", cap=0, seed=0),
    inputs=((1, 2), (3,), (1, 2, 3), ()),
)

print("--- first prompt (truncated) ---")
print("\n".join(render_init_prompt(obs).splitlines()[:6]))
print("...\n")

replies = [
    '("Reverse the list", "reverse(x)")',                       # good
    '("Reverse the list again", "reverse(x)")',                 # duplicate
    "The rule is obviously reversal.",                          # unparsable
    '("Identity", "x")',                                        # inconsistent
    '("Swap pairs", "if length(x) == 2 then [x[1],x[0]] else x")',  # never reached
]
result = run_generation_loop("rev", obs, ScriptedProposer(replies), space)
transcript = result.transcript

for attempt in transcript.attempts:
    label = attempt.summary or attempt.raw_reply[:30]
    print(f"attempt {attempt.index}: {attempt.verdict.kind:<17} {label}")
print(f"stop reason: {transcript.stop_reason} "
      f"(bad count {transcript.bad_count})")
print(f"consistent attempts for metrics: {transcript.consistent_indices}")
print(f"accepted (novel) attempts:       {transcript.good_indices}")

# verdicts are a pure function of the raw replies
assert replay_verdicts(transcript, space) == [
    a.verdict for a in transcript.attempts
]
print("\nreplaying the raw replies reproduces identical verdicts")

print("\n--- per-problem scorecard ---")
print(scorecard_table([score_problem(result)]))
