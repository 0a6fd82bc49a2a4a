"""Sample-space construction: seeded, stratified, deduplicated input sets.

Every builder is a pure function of its recipe, so two builds with the same
(recipe, seed) produce byte-identical spaces on any platform. Randomness is
drawn exclusively from ``random.Random.getrandbits`` (MT19937), the one
primitive CPython documents as stable, through :class:`DeterministicRng`.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .values import (
    COLORS,
    MATERIALS,
    SHAPES,
    Entity,
    Grid,
    ObservationSet,
    Value,
    canonicalize,
    parse_value,
)

LIST_ELEMENT_DOMAIN = 100       # list elements are 0..99
LIST_MAX_LENGTH = 15
ENTITY_TYPES = len(COLORS) * len(SHAPES) * len(MATERIALS)   # 48
ENTITY_MAX_COUNT = 8

SPACE_FORMAT = "space/1"


class SampleBoundError(ValueError):
    """Requested more samples than the pool holds."""


class InfeasibleSampleError(ValueError):
    """A labeled-sample constraint cannot be met by any draw."""


class CorpusError(ValueError):
    """A corpus file could not be ingested."""


class DeterministicRng:
    """Seeded MT19937 wrapper that only ever calls getrandbits.

    ``randbelow`` uses rejection sampling over the minimal bit width, which is
    uniform and stable across platforms and Python versions.
    """

    def __init__(self, seed: int):
        self._mt = random.Random(seed)

    def randbelow(self, bound: int) -> int:
        if bound <= 0:
            raise ValueError("bound must be positive")
        bits = bound.bit_length()
        while True:
            candidate = self._mt.getrandbits(bits)
            if candidate < bound:
                return candidate


def sample_prefix(total: int, count: int, rng: DeterministicRng) -> List[int]:
    """First ``count`` entries of a lazy Fisher-Yates shuffle of range(total).

    Uniform sampling without replacement using O(count) memory, so strata of
    astronomical size can be sampled without materializing them.
    """
    if count > total:
        raise SampleBoundError(f"cannot draw {count} from {total}")
    swapped: Dict[int, int] = {}
    picked = []
    for i in range(count):
        j = i + rng.randbelow(total - i)
        value_i = swapped.get(i, i)
        value_j = swapped.get(j, j)
        swapped[i] = value_j
        swapped[j] = value_i
        picked.append(value_j)
    return picked


@dataclass(frozen=True)
class SpaceRecipe:
    """Build descriptor for a sample space."""

    family: str                      # list-functions | acre | grid-corpus
    cap: Optional[int] = None        # per-stratum cap; grid-corpus carries none
    seed: Optional[int] = None
    corpus: Tuple[str, ...] = ()

    def header(self) -> dict:
        entry = {"format": SPACE_FORMAT, "family": self.family}
        if self.cap is not None:
            entry["cap"] = self.cap
        if self.seed is not None:
            entry["seed"] = self.seed
        if self.corpus:
            entry["corpus"] = list(self.corpus)
        return entry


@dataclass(frozen=True)
class SampleSpace:
    """Ordered, deduplicated collection of probe inputs."""

    recipe: SpaceRecipe
    inputs: Tuple[Value, ...]
    canonical: Tuple[str, ...] = field(repr=False, default=())

    def __post_init__(self):
        if not self.canonical:
            object.__setattr__(
                self, "canonical", tuple(canonicalize(v) for v in self.inputs)
            )
        if len(set(self.canonical)) != len(self.canonical):
            raise ValueError("sample space contains duplicate inputs")

    @property
    def size(self) -> int:
        return len(self.inputs)

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def space_id(self) -> str:
        digest = hashlib.sha256()
        digest.update(json.dumps(self.recipe.header(), sort_keys=True).encode())
        for text in self.canonical:
            digest.update(text.encode())
            digest.update(b"\n")
        return digest.hexdigest()[:16]

    def index_of(self) -> Dict[str, int]:
        return {text: i for i, text in enumerate(self.canonical)}


def _decode_list(index: int, length: int) -> Tuple[int, ...]:
    """Index -> length-k list over 0..99, most significant digit first."""
    digits = []
    for _ in range(length):
        index, digit = divmod(index, LIST_ELEMENT_DOMAIN)
        digits.append(digit)
    return tuple(reversed(digits))


def _decode_entity(index: int) -> Entity:
    color, rest = divmod(index, len(SHAPES) * len(MATERIALS))
    shape, material = divmod(rest, len(MATERIALS))
    return Entity(COLORS[color], SHAPES[shape], MATERIALS[material])


def _decode_entity_list(index: int, count: int) -> Tuple[Entity, ...]:
    digits = []
    for _ in range(count):
        index, digit = divmod(index, ENTITY_TYPES)
        digits.append(digit)
    return tuple(_decode_entity(d) for d in reversed(digits))


def _dedup(inputs: Iterable[Value]) -> Tuple[Value, ...]:
    seen = set()
    kept = []
    for value in inputs:
        text = canonicalize(value)
        if text not in seen:
            seen.add(text)
            kept.append(value)
    return tuple(kept)


def _stratified(
    recipe: SpaceRecipe,
    stratum_range: Sequence[int],
    stratum_size: Callable[[int], int],
    decode: Callable[[int, int], Value],
    singletons: Sequence[Value],
    cap: int,
) -> SampleSpace:
    rng = DeterministicRng(recipe.seed if recipe.seed is not None else 0)
    inputs: List[Value] = [()]
    inputs.extend(singletons)
    for k in stratum_range:
        total = stratum_size(k)
        take = min(cap, total)
        for index in sample_prefix(total, take, rng):
            inputs.append(decode(index, k))
    deduped = _dedup(inputs)
    if len(deduped) != len(inputs):
        raise ValueError("cross-stratum collision in stratified build")
    return SampleSpace(recipe=recipe, inputs=deduped)


def build_list_function_space(seed: int, cap_per_length: int = 1000) -> SampleSpace:
    """Stratified-by-length space of integer lists.

    The empty list, all 100 singletons, and for each length 2..15 exactly
    min(cap, 100**k) lists drawn uniformly without replacement. With the
    default cap of 1000 the size is 14,101.
    """
    if cap_per_length < 0:
        raise ValueError("cap must be nonnegative")
    recipe = SpaceRecipe(family="list-functions", cap=cap_per_length, seed=seed)
    return _stratified(
        recipe,
        stratum_range=range(2, LIST_MAX_LENGTH + 1),
        stratum_size=lambda k: LIST_ELEMENT_DOMAIN**k,
        decode=_decode_list,
        singletons=[(v,) for v in range(LIST_ELEMENT_DOMAIN)],
        cap=cap_per_length,
    )


def build_acre_space(seed: int, cap_per_count: int = 1000) -> SampleSpace:
    """Stratified-by-count space of ordered entity lists (repetition allowed).

    The empty list, all 48 singleton entities, and seven sampled strata of
    longer lists; with the default cap of 1000 the size is 7,049.
    """
    if cap_per_count < 0:
        raise ValueError("cap must be nonnegative")
    recipe = SpaceRecipe(family="acre", cap=cap_per_count, seed=seed)
    return _stratified(
        recipe,
        stratum_range=range(2, ENTITY_MAX_COUNT + 1),
        stratum_size=lambda c: ENTITY_TYPES**c,
        decode=_decode_entity_list,
        singletons=[(_decode_entity(i),) for i in range(ENTITY_TYPES)],
        cap=cap_per_count,
    )


def build_corpus_space(
    grids_by_source: Sequence[Tuple[str, Sequence[Grid]]],
) -> SampleSpace:
    """Deduplicated union of input grids, in first-seen order across sources.

    ``grids_by_source`` pairs a source label (usually a file name) with the
    grids it contributes; labels are recorded in the recipe for provenance.
    """
    labels = tuple(label for label, _ in grids_by_source)
    recipe = SpaceRecipe(family="grid-corpus", corpus=labels)
    inputs: List[Value] = []
    for _, grids in grids_by_source:
        inputs.extend(grids)
    return SampleSpace(recipe=recipe, inputs=_dedup(inputs))


def expected_list_space_size(cap: int) -> int:
    return 1 + LIST_ELEMENT_DOMAIN + sum(
        min(cap, LIST_ELEMENT_DOMAIN**k) for k in range(2, LIST_MAX_LENGTH + 1)
    )


def expected_acre_space_size(cap: int) -> int:
    return 1 + ENTITY_TYPES + sum(
        min(cap, ENTITY_TYPES**c) for c in range(2, ENTITY_MAX_COUNT + 1)
    )


# ---------------------------------------------------------------------------
# Observation sampling
# ---------------------------------------------------------------------------

_BOTH_LABEL_ATTEMPTS = 100_000


def sample_observations(
    problem: ObservationSet,
    n: int,
    seed: int,
    require_both_labels: bool = False,
) -> ObservationSet:
    """Draw n distinct pairs from the pooled observations, reproducibly.

    With ``require_both_labels`` (on/off outputs), the draw is repeated along
    the same seeded stream until both labels appear; a single-labeled pool is
    rejected up front as infeasible.
    """
    pool = problem.pairs
    if n < 1 or n > len(pool):
        raise SampleBoundError(f"n={n} outside 1..{len(pool)}")
    if require_both_labels:
        if n < 2:
            raise InfeasibleSampleError("both-labels constraint needs n >= 2")
        labels = {canonicalize(obs.output) for obs in pool}
        if not {"on", "off"} <= labels:
            raise InfeasibleSampleError("pool does not contain both labels")
    rng = DeterministicRng(seed)
    for _ in range(_BOTH_LABEL_ATTEMPTS):
        indices = sorted(sample_prefix(len(pool), n, rng))
        chosen = tuple(pool[i] for i in indices)
        if not require_both_labels:
            break
        outputs = {canonicalize(obs.output) for obs in chosen}
        if {"on", "off"} <= outputs:
            break
    else:
        raise InfeasibleSampleError("could not satisfy both-labels constraint")
    return ObservationSet(
        problem_id=problem.problem_id,
        pairs=chosen,
        provenance=problem.provenance,
    )


# ---------------------------------------------------------------------------
# Space files: one header line, then one canonical input per line
# ---------------------------------------------------------------------------


def space_to_bytes(space: SampleSpace) -> bytes:
    header = dict(space.recipe.header())
    header["size"] = space.size
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(space.canonical)
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_space(space: SampleSpace, path) -> None:
    with open(path, "wb") as handle:
        handle.write(space_to_bytes(space))


def read_space(path) -> SampleSpace:
    with open(path, "rb") as handle:
        text = handle.read().decode("utf-8")
    lines = text.splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty space file")
    header = json.loads(lines[0])
    if header.get("format") != SPACE_FORMAT:
        raise CorpusError(f"{path}: unsupported format {header.get('format')!r}")
    recipe = SpaceRecipe(
        family=header["family"],
        cap=header.get("cap"),
        seed=header.get("seed"),
        corpus=tuple(header.get("corpus", ())),
    )
    inputs = tuple(parse_value(line) for line in lines[1:])
    space = SampleSpace(recipe=recipe, inputs=inputs)
    if space.size != header["size"]:
        raise CorpusError(f"{path}: size mismatch")
    return space
