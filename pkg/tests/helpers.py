"""Shared test utilities: seeded value generation and brute-force metric
oracles kept independent of the library code paths they check."""

from __future__ import annotations

import random
from fractions import Fraction

from abdeval.values import COLORS, MATERIALS, SHAPES, Entity, Grid


def random_value(rng: random.Random, depth: int = 0):
    """Seeded random value covering every variant; nesting shrinks with depth."""
    choices = ["int", "onoff", "null", "entity", "grid"]
    if depth < 2:
        choices += ["list", "list", "entity_list"]
    kind = rng.choice(choices)
    if kind == "int":
        return rng.randint(-999, 999)
    if kind == "onoff":
        return rng.random() < 0.5
    if kind == "null":
        return None
    if kind == "entity":
        return random_entity(rng)
    if kind == "grid":
        height = rng.randint(0, 3)
        width = rng.randint(1, 3)
        return Grid(tuple(
            tuple(rng.randint(0, 9) for _ in range(width)) for _ in range(height)
        ))
    if kind == "entity_list":
        return tuple(random_entity(rng) for _ in range(rng.randint(0, 3)))
    return tuple(random_value(rng, depth + 1) for _ in range(rng.randint(0, 3)))


def random_entity(rng: random.Random) -> Entity:
    return Entity(rng.choice(COLORS), rng.choice(SHAPES), rng.choice(MATERIALS))


# ---------------------------------------------------------------------------
# Brute-force diversity oracles: direct set enumeration over explicit
# (input index, output) pair lists, nothing shared with the metrics module.
# ---------------------------------------------------------------------------


def oracle_gamma(pair_lists, space_size: int) -> Fraction:
    union = set()
    for pairs in pair_lists:
        for pair in pairs:
            union.add(pair)
    return Fraction(len(union), space_size)


def oracle_jaccard(pairs_a, pairs_b) -> Fraction:
    sa, sb = set(pairs_a), set(pairs_b)
    union = sa | sb
    if not union:
        return Fraction(0)
    return 1 - Fraction(len(sa & sb), len(union))


def oracle_beta(pair_lists) -> Fraction:
    m = len(pair_lists)
    if m < 2:
        return Fraction(0)
    total = Fraction(0)
    count = 0
    for i in range(m):
        for j in range(i + 1, m):
            total += oracle_jaccard(pair_lists[i], pair_lists[j])
            count += 1
    return total / count
