"""Values and sample spaces.

Every dataset's inputs and outputs live in one tagged value universe with a
canonical text form; sample spaces are seeded, stratified, deduplicated
collections of probe inputs that rebuild byte-identically.
"""

from abdeval import (
    Entity,
    Grid,
    Observation,
    ObservationSet,
    build_acre_space,
    build_list_function_space,
    canonicalize,
    equal_values,
    parse_value,
    sample_observations,
)
from abdeval.spaces import space_to_bytes

# --- canonical text ---------------------------------------------------------

print("canonical forms:")
for value in (42, True, (1, 10, 100), Grid(((8, 0), (0, 8))),
              (Entity("red", "cube", "metal"),)):
    text = canonicalize(value)
    assert parse_value(text) == value          # round trip
    print(f"  {text}")

# equality is canonical-text equality: labels never equal integers,
# grids never equal nested lists
assert not equal_values(True, 1)
assert not equal_values(Grid(((1, 2),)), ((1, 2),))

# --- stratified spaces -------------------------------------------------------

lists = build_list_function_space(seed=42, cap_per_length=1000)
print(f"\nlist-functions space: {lists.size} inputs "
      f"(1 empty + 100 singletons + 14 strata x 1000)")

acre = build_acre_space(seed=7, cap_per_count=1000)
print(f"entity-list space:    {acre.size} inputs "
      f"(1 empty + 48 singletons + 7 strata x 1000)")

rebuilt = build_list_function_space(seed=42, cap_per_length=1000)
assert space_to_bytes(rebuilt) == space_to_bytes(lists)
print("rebuild with the same seed is byte-identical")

# --- observation sampling ----------------------------------------------------

pool = ObservationSet(
    "checker", tuple(Observation(i, i % 2 == 0) for i in range(8))
)
shown = sample_observations(pool, n=3, seed=5, require_both_labels=True)
print("\nsampled observations (both labels forced):")
for pair in shown:
    print(f"  ({canonicalize(pair.input)}, {canonicalize(pair.output)})")
