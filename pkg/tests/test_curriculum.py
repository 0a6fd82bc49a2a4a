from fractions import Fraction

import pytest

from abdeval.curriculum import (
    CurriculumParams,
    CurriculumScheduler,
    LossRecord,
    OrderingError,
    PREFERENCE_TYPES,
    StalenessError,
    apply_weights,
    as_fraction,
    compute_weights,
    initial_state,
    read_loss_log,
    replay_schedule,
    update_ewma,
    write_loss_log,
    write_trajectory,
)

PARAMS = CurriculumParams()     # published settings


def losses(parsing, consistency, score):
    return {"parsing": parsing, "consistency": consistency, "score": score}


def test_decimal_inputs_are_exact():
    assert as_fraction("0.1") == Fraction(1, 10)
    assert as_fraction(0.1) == Fraction(1, 10)
    assert as_fraction(Fraction(3, 7)) == Fraction(3, 7)
    assert PARAMS.alpha == Fraction(1, 10)
    assert PARAMS.momentum_cap == Fraction(3, 100)
    assert PARAMS.weight_min == Fraction(4, 5)
    assert PARAMS.weight_max == Fraction(6, 5)


def test_published_recurrence_step():
    state = initial_state()
    state = update_ewma(state, losses("1.0", "1.0", "1.0"), PARAMS)
    assert state.state_of("parsing").ewma == Fraction(1)
    assert state.state_of("parsing").momentum == Fraction(0)

    state = update_ewma(state, losses("0.5", "1.0", "1.0"), PARAMS)
    parsing = state.state_of("parsing")
    assert parsing.ewma == Fraction(19, 20)             # 0.95 exactly
    assert parsing.momentum == Fraction(3, 100)         # clipped at the cap
    assert state.state_of("consistency").momentum == Fraction(0)


def test_no_improvement_and_worsening_clip_to_zero():
    state = update_ewma(initial_state(), losses("1.0", "1.0", "1.0"), PARAMS)
    same = update_ewma(state, losses("1.0", "1.0", "1.0"), PARAMS)
    assert same.state_of("parsing").momentum == Fraction(0)
    worse = update_ewma(state, losses("2.0", "1.0", "1.0"), PARAMS)
    assert worse.state_of("parsing").momentum == Fraction(0)


def test_uniform_weights_under_zero_momentum():
    state = update_ewma(initial_state(), losses("1.0", "1.0", "1.0"), PARAMS)
    weights = compute_weights(state, PARAMS)
    assert set(weights.values()) == {Fraction(1)}


def test_weights_for_single_capped_momentum():
    state = initial_state()
    state = update_ewma(state, losses("1.0", "1.0", "1.0"), PARAMS)
    state = update_ewma(state, losses("0.5", "1.0", "1.0"), PARAMS)
    weights = compute_weights(state, PARAMS)
    assert weights["parsing"] == Fraction(13, 11)       # ~1.1818
    assert weights["consistency"] == Fraction(10, 11)   # ~0.9090
    assert weights["score"] == Fraction(10, 11)
    for value in weights.values():
        assert PARAMS.weight_min <= value <= PARAMS.weight_max


def test_dominant_type_is_capped():
    params = CurriculumParams(epsilon="0.01")
    state = initial_state()
    state = update_ewma(state, losses("1.0", "1.0", "1.0"), params)
    state = update_ewma(state, losses("0.5", "1.0", "1.0"), params)
    weights = compute_weights(state, params)
    assert weights["parsing"] == params.weight_max      # clipped from 2.0


def test_weights_require_an_update_first():
    with pytest.raises(StalenessError):
        compute_weights(initial_state(), PARAMS)


def test_missing_or_unknown_type_rejected():
    with pytest.raises(StalenessError):
        update_ewma(initial_state(), {"parsing": "1.0"}, PARAMS)
    bad = dict(losses("1", "1", "1"), extra="1")
    with pytest.raises(StalenessError):
        update_ewma(initial_state(), bad, PARAMS)


def test_ewma_stays_within_loss_history():
    import random

    rng = random.Random(17)
    state = initial_state()
    history = {name: [] for name in PREFERENCE_TYPES}
    for _ in range(50):
        probe = {}
        for name in PREFERENCE_TYPES:
            value = Fraction(rng.randint(0, 400), 100)
            probe[name] = value
            history[name].append(value)
        state = update_ewma(state, probe, PARAMS)
        for name in PREFERENCE_TYPES:
            entry = state.state_of(name)
            assert min(history[name]) <= entry.ewma <= max(history[name])
            assert Fraction(0) <= entry.momentum <= PARAMS.momentum_cap


def test_shifting_all_losses_leaves_weights_unchanged():
    base = [
        losses("3.0", "2.0", "4.0"),
        losses("2.5", "2.0", "3.5"),
        losses("2.1", "1.9", "3.0"),
    ]
    shifted = [
        {name: as_fraction(v) + 7 for name, v in probe.items()} for probe in base
    ]
    state_a, state_b = initial_state(), initial_state()
    for probe_a, probe_b in zip(base, shifted):
        state_a = update_ewma(state_a, probe_a, PARAMS)
        state_b = update_ewma(state_b, probe_b, PARAMS)
        assert compute_weights(state_a, PARAMS) == compute_weights(state_b, PARAMS)


def _log(records):
    return [LossRecord(step=s, type=t, loss=as_fraction(l)) for s, t, l in records]


def test_replay_constant_losses_is_uniform():
    records = []
    for boundary in (1280, 2560, 3840):
        for name in PREFERENCE_TYPES:
            records.append((boundary, name, "2.0"))
    trajectory = replay_schedule(_log(records), PARAMS)
    assert [step for step, _ in trajectory] == [1280, 2560, 3840]
    for _, weights in trajectory:
        assert set(weights.values()) == {Fraction(1)}


def test_replay_improving_score_rises_then_relaxes():
    records = []
    step = 0
    value = Fraction(5)
    for _ in range(6):                      # steady improvement
        step += 1280
        value -= Fraction(1, 2)
        records.append((step, "parsing", "1.0"))
        records.append((step, "consistency", "1.0"))
        records.append((step, "score", str(value)))
    for _ in range(80):                     # improvement flattens out
        step += 1280
        records.append((step, "parsing", "1.0"))
        records.append((step, "consistency", "1.0"))
        records.append((step, "score", str(value)))
    trajectory = replay_schedule(_log(records), PARAMS)
    score_weights = [weights["score"] for _, weights in trajectory]
    cap_weight = Fraction(13, 11)           # capped momentum against two floors
    assert score_weights[1] == cap_weight
    assert max(score_weights) == cap_weight
    assert score_weights[-1] < cap_weight
    assert abs(score_weights[-1] - 1) < Fraction(1, 100)
    tail = score_weights[-10:]
    assert all(a >= b for a, b in zip(tail, tail[1:]))  # relaxing, not rising
    for _, weights in trajectory:
        for value in weights.values():
            assert PARAMS.weight_min <= value <= PARAMS.weight_max


def test_replay_is_deterministic():
    records = _log(
        [(1280, "parsing", "1.5"), (1280, "consistency", "1.0"),
         (1280, "score", "3.0"),
         (2560, "parsing", "1.2"), (2560, "consistency", "0.9"),
         (2560, "score", "2.5")]
    )
    assert replay_schedule(records, PARAMS) == replay_schedule(records, PARAMS)


def test_replay_rejects_out_of_order_and_incomplete_windows():
    records = _log([(2560, "parsing", "1"), (1280, "parsing", "1")])
    with pytest.raises(OrderingError):
        replay_schedule(records, PARAMS)
    partial = _log([(1280, "parsing", "1"), (2560 + 1280, "parsing", "1")])
    with pytest.raises(StalenessError):
        replay_schedule(partial, PARAMS)


def test_mid_window_probes_update_at_next_boundary():
    records = _log(
        [(100, "parsing", "1"), (150, "consistency", "1"), (200, "score", "1"),
         (1290, "parsing", "1"), (1300, "consistency", "1"), (1310, "score", "1")]
    )
    trajectory = replay_schedule(records, PARAMS)
    assert [step for step, _ in trajectory] == [1280, 2560]


def test_scheduler_wrapper_tracks_state():
    scheduler = CurriculumScheduler(PARAMS)
    first = scheduler.observe(losses("1.0", "1.0", "1.0"))
    assert set(first.values()) == {Fraction(1)}
    second = scheduler.observe(losses("0.5", "1.0", "1.0"))
    assert second["parsing"] == Fraction(13, 11)
    assert scheduler.current_weights() == second


def test_apply_weights_sets_state_weights():
    state = update_ewma(initial_state(), losses("1", "1", "1"), PARAMS)
    state = apply_weights(state, PARAMS)
    assert state.weights() == {name: Fraction(1) for name in PREFERENCE_TYPES}


def test_loss_log_file_round_trip(tmp_path):
    records = _log(
        [(1280, "parsing", "0.5"), (1280, "consistency", "1.25"),
         (1280, "score", "2")]
    )
    path = tmp_path / "probe.log"
    write_loss_log(records, path)
    assert read_loss_log(path) == records
    trajectory = replay_schedule(records, PARAMS)
    out = tmp_path / "weights.jsonl"
    write_trajectory(trajectory, PARAMS, out)
    body = out.read_bytes()
    assert body.startswith(b'{"') and b"weights/1" in body
    write_trajectory(trajectory, PARAMS, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == body


def test_param_validation():
    with pytest.raises(ValueError):
        CurriculumParams(alpha="1.5")
    with pytest.raises(ValueError):
        CurriculumParams(epsilon="0")
    with pytest.raises(ValueError):
        CurriculumParams(weight_min="1.3")
