import math
from random import Random
from statistics import NormalDist

import pytest

from announcer.events import (
    EventKind,
    EventsConfig,
    ImportanceModel,
    ImportanceWeights,
    ThresholdState,
    calibrate_model,
    cutoff_value,
    detect_global,
    dynamic_threshold,
    fetch_events,
    importance,
)
from announcer.world import (
    ActionSample,
    AvatarState,
    Converse,
    DensityMap,
    Rect,
    WorldConfig,
    WorldState,
)

WEIGHTS = ImportanceWeights()


def sample(**channels):
    s = ActionSample(window=10.0)
    for name, value in channels.items():
        setattr(s, name, value)
    return s


# -- importance ------------------------------------------------------------------


def test_importance_zero_sample():
    assert importance(ActionSample(), WEIGHTS) == 0.0


def test_importance_single_channel():
    w = ImportanceWeights({"spoken_words": 2.0})
    assert importance(sample(spoken_words=3.0), w) == 6.0


def test_importance_is_linear():
    s1 = sample(move_distance=3.0, spoken_words=4.0, tx_volume=1.0)
    s2 = sample(move_distance=6.0, spoken_words=8.0, tx_volume=2.0)
    assert importance(s2, WEIGHTS) == pytest.approx(2.0 * importance(s1, WEIGHTS), rel=1e-12)


def test_weight_scaling_scales_score():
    s = sample(move_distance=3.0, voxel_count=2.0)
    assert importance(s, WEIGHTS.scaled(3.0)) == pytest.approx(
        3.0 * importance(s, WEIGHTS), rel=1e-12
    )


# -- dynamic threshold -------------------------------------------------------------


def test_threshold_matches_published_value():
    assert dynamic_threshold(10, 0.5) == pytest.approx(0.0670, abs=0.002)


def test_threshold_degree_one_root():
    assert dynamic_threshold(1, 0.5) == 0.5


def test_threshold_f_one_is_zero():
    for n in (1, 7, 500):
        assert dynamic_threshold(n, 1.0) == 0.0


def test_threshold_rejects_zero_users():
    with pytest.raises(ValueError):
        dynamic_threshold(0, 0.5)


def test_threshold_identity_grid():
    for n in (1, 2, 5, 10, 100, 1000):
        for f in [x / 10 for x in range(1, 11)]:
            i = dynamic_threshold(n, f)
            assert (1.0 - i) ** n == pytest.approx(f, rel=1e-12)


def test_threshold_monotone_decreasing_in_n():
    values = [dynamic_threshold(n, 0.5) for n in range(1, 200)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_threshold_monotone_decreasing_in_f():
    values = [dynamic_threshold(10, f / 100) for f in range(1, 101)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_threshold_monte_carlo_hit_rate():
    # Brute-force oracle: draw 10 standard-normal importances per cycle and
    # count cycles where any exceeds the (1-i)-quantile cutoff.
    i = dynamic_threshold(10, 0.5)
    cutoff = NormalDist().inv_cdf(1.0 - i)
    rng = Random(31337)
    cycles = 100_000
    hits = sum(
        1 for _ in range(cycles) if any(rng.gauss(0, 1) > cutoff for _ in range(10))
    )
    assert hits / cycles == pytest.approx(0.50, abs=0.02)


def test_cutoff_endpoints():
    model = ImportanceModel(mu=2.0, sigma=3.0)
    assert cutoff_value(model, 0.0) == -math.inf
    assert cutoff_value(model, 1.0) == math.inf
    mid = cutoff_value(model, 0.5)
    assert mid == pytest.approx(2.0, abs=1e-9)


def test_threshold_state_maintains_identity():
    state = ThresholdState(f=0.5, n=10)
    model = ImportanceModel(mu=1.0, sigma=2.0)
    state.update(model, n=25)
    assert state.i == dynamic_threshold(25, 0.5)
    assert (1.0 - state.i) ** 25 == pytest.approx(0.5, rel=1e-12)
    assert state.cutoff == pytest.approx(1.0 + 2.0 * NormalDist().inv_cdf(1.0 - state.i))


# -- calibration -----------------------------------------------------------------


def test_calibrate_constant_history_floors_sigma():
    model = calibrate_model([1.0] * 50)
    assert model.mu == 1.0
    assert model.sigma == 1e-6


def test_calibrate_recovers_normal_parameters():
    rng = Random(4)
    history = [rng.gauss(5.0, 2.0) for _ in range(10_000)]
    model = calibrate_model(history, window=10_000)
    assert model.mu == pytest.approx(5.0, abs=0.1)
    assert model.sigma == pytest.approx(2.0, abs=0.1)


def test_calibrate_empty_history_returns_prior():
    assert calibrate_model([]) == ImportanceModel(mu=0.0, sigma=1.0)


def test_calibrate_uses_sliding_window():
    history = [100.0] * 1000 + [1.0] * 600
    model = calibrate_model(history, window=600)
    assert model.mu == 1.0


# -- global detection ---------------------------------------------------------------


def grid(counts, cols, cell=10.0):
    return DensityMap(origin=(0.0, 0.0), cell_size=cell, cols=cols,
                      rows=len(counts) // cols, counts=tuple(counts))


def test_detect_global_at_threshold():
    density = grid([0, 4, 0, 0], cols=2)
    event = detect_global(density, coefficient=1.0, gathering_threshold=4)
    assert event is not None
    assert event.kind is EventKind.GLOBAL
    assert event.region[0] == density.centroid(1)
    assert event.score == 4.0


def test_detect_global_below_threshold_is_none():
    assert detect_global(grid([3, 3, 3, 3], cols=2), 1.0, 4) is None


def test_detect_global_prefers_denser_then_lower_index():
    # Oracle: enumerate cells and compare by (count, -index) by hand.
    density = grid([4, 6, 6, 4], cols=2)
    event = detect_global(density, 1.0, 4)
    assert event.region[0] == density.centroid(1)
    density = grid([5, 5, 0, 0], cols=2)
    event = detect_global(density, 1.0, 4)
    assert event.region[0] == density.centroid(0)


def test_detect_global_score_uses_coefficient():
    event = detect_global(grid([0, 0, 0, 5], cols=2), coefficient=2.5, gathering_threshold=4)
    assert event.score == 12.5


# -- election --------------------------------------------------------------------


def election_world(specs):
    """specs: list of (metrics dict, behavior or None) per avatar, on a spread grid."""
    cfg = WorldConfig(
        bounds=Rect(0, 0, 200, 200), pois=(), obstacles=(), avatar_count=max(1, len(specs))
    )
    avatars = []
    for i, (channels, behavior) in enumerate(specs):
        av = AvatarState(id=i, position=(15.0 * i + 5.0, 5.0, 0.0), facing=0.0)
        av.metrics = sample(**channels)
        if behavior is not None:
            av.behavior = behavior
        avatars.append(av)
    return WorldState(config=cfg, avatars=avatars, rngs=[])


def fixed_state(cutoff):
    state = ThresholdState(f=0.5, n=10)
    state.cutoff = cutoff
    return state


def test_fetch_none_when_quiet():
    world = election_world([({}, None), ({}, None)])
    assert fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0) is None


def test_fetch_single_avatar_above_cutoff():
    world = election_world([({}, None), ({"spoken_words": 40.0}, None)])
    event = fetch_events(world, fixed_state(5.0), WEIGHTS, 3.0)
    assert event is not None
    assert event.kind is EventKind.LOCAL_SINGLE
    assert event.subjects == (1,)
    assert event.timestamp == 3.0


def test_fetch_groups_conversing_pair_into_multi():
    world = election_world(
        [
            ({"spoken_words": 40.0}, Converse(partners=frozenset({1}), remaining=5.0)),
            ({"spoken_words": 38.0}, Converse(partners=frozenset({0}), remaining=5.0)),
            ({}, None),
        ]
    )
    # Put the pair within grouping range.
    world.avatars[1].position = (7.0, 5.0, 0.0)
    event = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0)
    assert event.kind is EventKind.LOCAL_MULTI
    assert event.subjects == (0, 1)
    assert event.score == pytest.approx(0.5 * (40.0 + 38.0))


def test_fetch_does_not_group_distant_conversers():
    world = election_world(
        [
            ({"spoken_words": 40.0}, Converse(partners=frozenset({1}), remaining=5.0)),
            ({"spoken_words": 38.0}, Converse(partners=frozenset({0}), remaining=5.0)),
        ]
    )
    event = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0)  # 15 m apart
    assert event.kind is EventKind.LOCAL_SINGLE
    assert event.subjects == (0,)


def test_fetch_election_ties_break_to_lowest_id():
    world = election_world([({"spoken_words": 40.0}, None), ({"spoken_words": 40.0}, None)])
    event = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0)
    assert event.subjects == (0,)


def test_fetch_is_deterministic():
    world = election_world([({"spoken_words": 40.0}, None), ({"tx_volume": 9.0}, None)])
    first = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0)
    second = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0)
    assert first == second


def test_weight_scale_covariance_preserves_election():
    world = election_world(
        [({"spoken_words": 40.0}, None), ({"tx_volume": 9.0}, None), ({"move_distance": 70.0}, None)]
    )
    base = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0)
    scaled = fetch_events(world, fixed_state(5.0 * 7.0), WEIGHTS.scaled(7.0), 0.0)
    assert base.subjects == scaled.subjects
    assert scaled.score == pytest.approx(7.0 * base.score, rel=1e-12)


def test_global_event_competes_with_locals():
    world = election_world([({}, None)] * 4)
    for av in world.avatars:
        av.position = (5.0, 5.0, 0.0)  # everyone in one cell
    event = fetch_events(world, fixed_state(5.0), WEIGHTS, 0.0, EventsConfig(), 1.0)
    assert event.kind is EventKind.GLOBAL
    assert event.score == 4.0


def test_hit_rate_converges_with_live_calibration():
    # Closed loop: scores drawn from a fixed distribution, model re-fit on a
    # sliding history each cycle, cutoff from the fitted model.
    rng = Random(99)
    n, f = 10, 0.5
    history: list[float] = []
    state = ThresholdState(f=f, n=n)
    hits = 0
    cycles = 10_000
    for _ in range(cycles):
        scores = [rng.gauss(3.0, 1.5) for _ in range(n)]
        if any(s > state.cutoff for s in scores):
            hits += 1
        history.extend(scores)
        state.update(calibrate_model(history), n=n)
        history = history[-600:]
    assert hits / cycles == pytest.approx(f, abs=0.05)
