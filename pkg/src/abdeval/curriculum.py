"""Momentum-based curriculum scheduler over preference types.

The scheduler tracks an exponentially weighted moving average of each
preference type's probe loss, converts recent improvement (clipped to a cap)
into a sampling weight, normalizes the weights to mean 1, and clips them to a
band. All arithmetic is exact rational so replayed schedules reproduce
bit-identical trajectories; decimal inputs are taken at face value
(``0.1`` means one tenth).

The scheduler consumes probe losses and emits weights; it does not compute
losses and performs no training steps itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

PREFERENCE_TYPES = ("parsing", "consistency", "score")

LOSSLOG_FORMAT = "losslog/1"
WEIGHTS_FORMAT = "weights/1"

Rational = Union[int, float, str, Fraction, Decimal]


class StalenessError(ValueError):
    """An update is missing a probe loss for some preference type."""


class OrderingError(ValueError):
    """A loss log is not ordered by step."""


def as_fraction(value: Rational) -> Fraction:
    """Exact rational from a decimal- or fraction-shaped input.

    Floats are taken at decimal face value (0.1 means one tenth); strings may
    be decimals ("0.95") or fractions ("19/20").
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(Decimal(str(value)))
    try:
        return Fraction(str(value))
    except (ValueError, InvalidOperation, ZeroDivisionError):
        raise ValueError(f"not a rational value: {value!r}")


@dataclass(frozen=True)
class CurriculumParams:
    alpha: Fraction = Fraction(1, 10)           # EWMA smoothing
    epsilon: Fraction = Fraction(1, 10)         # weight floor
    momentum_cap: Fraction = Fraction(3, 100)
    weight_min: Fraction = Fraction(4, 5)
    weight_max: Fraction = Fraction(6, 5)
    update_interval: int = 1280                 # examples between updates

    def __post_init__(self):
        for name in ("alpha", "epsilon", "momentum_cap", "weight_min", "weight_max"):
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.momentum_cap <= 0:
            raise ValueError("momentum cap must be positive")
        if not 0 < self.weight_min <= self.weight_max:
            raise ValueError("need 0 < weight_min <= weight_max")
        if self.update_interval < 1:
            raise ValueError("update interval must be >= 1")


@dataclass(frozen=True)
class TypeState:
    ewma: Optional[Fraction] = None     # unset until the first probe
    momentum: Fraction = Fraction(0)
    weight: Fraction = Fraction(1)


@dataclass(frozen=True)
class CurriculumState:
    types: Tuple[Tuple[str, TypeState], ...]
    updates: int = 0

    def state_of(self, name: str) -> TypeState:
        for key, value in self.types:
            if key == name:
                return value
        raise KeyError(name)

    def weights(self) -> Dict[str, Fraction]:
        return {name: state.weight for name, state in self.types}


def initial_state(type_names: Sequence[str] = PREFERENCE_TYPES) -> CurriculumState:
    return CurriculumState(types=tuple((name, TypeState()) for name in type_names))


def update_ewma(
    state: CurriculumState,
    losses: Mapping[str, Rational],
    params: CurriculumParams,
) -> CurriculumState:
    """Fold one probe into the moving averages and momenta.

    The first probe of a type initializes its average to the observed loss
    (momentum 0); afterwards the average moves by alpha toward the new loss
    and the momentum is the clipped decrease. A worsening loss clips to 0.
    """
    names = [name for name, _ in state.types]
    missing = [name for name in names if name not in losses]
    if missing:
        raise StalenessError(f"missing probe losses for: {', '.join(missing)}")
    unknown = [name for name in losses if name not in names]
    if unknown:
        raise StalenessError(f"unknown preference types: {', '.join(unknown)}")
    updated = []
    for name, entry in state.types:
        loss = as_fraction(losses[name])
        if loss < 0:
            raise ValueError(f"negative probe loss for {name}")
        if entry.ewma is None:
            updated.append((name, replace(entry, ewma=loss, momentum=Fraction(0))))
            continue
        new_ewma = (1 - params.alpha) * entry.ewma + params.alpha * loss
        improvement = entry.ewma - new_ewma
        momentum = min(max(improvement, Fraction(0)), params.momentum_cap)
        updated.append((name, replace(entry, ewma=new_ewma, momentum=momentum)))
    return CurriculumState(types=tuple(updated), updates=state.updates + 1)


def compute_weights(
    state: CurriculumState, params: CurriculumParams
) -> Dict[str, Fraction]:
    """Momenta -> sampling weights: floor, normalize to mean 1, then clip."""
    if state.updates < 1:
        raise StalenessError("no probe has been folded in yet")
    raw = {name: params.epsilon + entry.momentum for name, entry in state.types}
    total = sum(raw.values())
    count = len(raw)
    weights = {}
    for name, value in raw.items():
        normalized = value * count / total
        weights[name] = min(max(normalized, params.weight_min), params.weight_max)
    return weights


def apply_weights(
    state: CurriculumState, params: CurriculumParams
) -> CurriculumState:
    weights = compute_weights(state, params)
    return CurriculumState(
        types=tuple(
            (name, replace(entry, weight=weights[name]))
            for name, entry in state.types
        ),
        updates=state.updates,
    )


class CurriculumScheduler:
    """Single-writer convenience wrapper: feed probes, read current weights."""

    def __init__(self, params: CurriculumParams = CurriculumParams()):
        self.params = params
        self.state = initial_state()

    def observe(self, losses: Mapping[str, Rational]) -> Dict[str, Fraction]:
        self.state = apply_weights(update_ewma(self.state, losses, self.params),
                                   self.params)
        return self.state.weights()

    def current_weights(self) -> Dict[str, Fraction]:
        return self.state.weights()


# ---------------------------------------------------------------------------
# Schedule replay from a loss log
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossRecord:
    step: int
    type: str
    loss: Fraction


def replay_schedule(
    records: Sequence[LossRecord], params: CurriculumParams
) -> List[Tuple[int, Dict[str, Fraction]]]:
    """Fold a loss log into the (step, weights) trajectory.

    Updates fire at every update-interval boundary whose window contains
    probes; each non-empty window must probe all preference types (the
    latest probe per type within the window is used). Pure function of
    (records, params): replaying twice yields identical trajectories.
    """
    trajectory: List[Tuple[int, Dict[str, Fraction]]] = []
    state = initial_state()
    interval = params.update_interval
    window: Dict[str, Fraction] = {}
    boundary: Optional[int] = None
    last_step: Optional[int] = None

    def flush(at_step: int) -> None:
        nonlocal state, window
        if not window:
            return
        state = update_ewma(state, window, params)
        weights = compute_weights(state, params)
        state = apply_weights(state, params)
        trajectory.append((at_step, weights))
        window = {}

    for record in records:
        if record.type not in PREFERENCE_TYPES:
            raise StalenessError(f"unknown preference type {record.type!r}")
        if last_step is not None and record.step < last_step:
            raise OrderingError(
                f"step {record.step} after step {last_step}: log must be ordered"
            )
        last_step = record.step
        record_boundary = ((record.step + interval - 1) // interval) * interval
        record_boundary = max(record_boundary, interval)
        if boundary is None:
            boundary = record_boundary
        elif record_boundary > boundary:
            flush(boundary)
            boundary = record_boundary
        window[record.type] = record.loss
    if boundary is not None:
        flush(boundary)
    return trajectory


def read_loss_log(path) -> List[LossRecord]:
    """Read `step type loss` lines (after the header line)."""
    with open(path, "rb") as handle:
        lines = handle.read().decode("utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty loss log")
    header = json.loads(lines[0])
    if header.get("format") != LOSSLOG_FORMAT:
        raise ValueError(f"{path}: unsupported format {header.get('format')!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected `step type loss`")
        records.append(
            LossRecord(step=int(parts[0]), type=parts[1], loss=as_fraction(parts[2]))
        )
    return records


def write_loss_log(records: Iterable[LossRecord], path) -> None:
    lines = [json.dumps({"format": LOSSLOG_FORMAT}, separators=(",", ":"))]
    for record in records:
        lines.append(f"{record.step} {record.type} {record.loss}")
    with open(path, "wb") as handle:
        handle.write(("\n".join(lines) + "\n").encode("utf-8"))


def write_trajectory(
    trajectory: Sequence[Tuple[int, Dict[str, Fraction]]],
    params: CurriculumParams,
    path,
) -> None:
    header = {
        "format": WEIGHTS_FORMAT,
        "alpha": str(params.alpha),
        "epsilon": str(params.epsilon),
        "momentum_cap": str(params.momentum_cap),
        "weight_min": str(params.weight_min),
        "weight_max": str(params.weight_max),
        "update_interval": params.update_interval,
    }
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    for step, weights in trajectory:
        record = {
            "step": step,
            "weights": {name: str(weights[name]) for name in sorted(weights)},
            "decimals": {
                name: _decimal_text(weights[name]) for name in sorted(weights)
            },
        }
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    with open(path, "wb") as handle:
        handle.write(("\n".join(lines) + "\n").encode("utf-8"))


def _decimal_text(value: Fraction, places: int = 6) -> str:
    quant = Decimal(value.numerator) / Decimal(value.denominator)
    return str(quant.quantize(Decimal(1).scaleb(-places)))
