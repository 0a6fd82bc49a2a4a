"""Scoring a hypothesis set: consistency, coverage, and diversity.

The three criteria are label-free: a hypothesis must reproduce the given
observations exactly (consistency), should be defined on as much of the
sample space as possible (coverage), and a *set* of hypotheses should spread
over distinct prediction patterns (gamma and beta diversity). All values are
exact rationals.
"""

from fractions import Fraction

from abdeval import (
    Hypothesis,
    Observation,
    ObservationSet,
    beta_diversity,
    bounds_certificate,
    check_consistency,
    compute_prediction_set,
    evaluate_on_observations,
    gamma_beta_bounds,
    gamma_diversity,
    generalizability,
    jaccard_dissim,
)
from abdeval.spaces import SampleSpace, SpaceRecipe

# the three-input space with two hypotheses that disagree on one input
space = SampleSpace(
    recipe=SpaceRecipe(family="list-functions", cap=0, seed=0),
    inputs=(0, 1, 2),
)
succ = Hypothesis(id="succ", summary="Successor", source="x + 1")
clip = Hypothesis(id="clip", summary="Successor clipped at 2",
                  source="if x == 2 then 2 else x + 1")

obs = ObservationSet("demo", (Observation(0, 1), Observation(1, 2)))
for hyp in (succ, clip):
    violations = check_consistency(evaluate_on_observations(hyp.source, obs), obs)
    print(f"{hyp.id}: consistent={not violations}")

p1 = compute_prediction_set(succ, space)
p2 = compute_prediction_set(clip, space)
print(f"\ncoverage:        G(succ) = {generalizability(p1)}, "
      f"G(clip) = {generalizability(p2)}")
print(f"gamma diversity: {gamma_diversity([p1, p2])}   "
      "(4 distinct prediction pairs over 3 inputs)")
print(f"jaccard:         {jaccard_dissim(p1, p2)}")
print(f"beta diversity:  {beta_diversity([p1, p2])}")
assert gamma_diversity([p1, p2]) == Fraction(4, 3)
assert beta_diversity([p1, p2]) == Fraction(1, 2)

# --- the feasible region tying gamma to beta ---------------------------------

lower, upper = gamma_beta_bounds(2, Fraction(4, 3))
print(f"\nfor k=2 hypotheses at gamma=4/3, beta must lie in [{lower}, {upper}]")

cert = bounds_certificate([p1, p2])
print("certificate:",
      f"union={cert.union_size}, reuse={cert.reuse},",
      f"identity_ok={cert.identity_ok}, bounds_ok={cert.bounds_ok}")
assert cert.lower <= cert.beta <= cert.upper
