from dataclasses import replace
from random import Random

import pytest

from announcer.adapt import (
    EmaScheduler,
    FeedbackEvent,
    FeedbackKind,
    MAUETable,
    PreferenceStore,
    QoEConfig,
    apply_feedback,
    interpolate,
    maue_estimate,
    steer_global_coefficient,
)
from announcer.events import EventKind

TABLE = MAUETable()
DEFAULTS = QoEConfig()


def config_at(transition: float, switches_per_minute: float) -> QoEConfig:
    # Fix f = 1 so the repetition factor is set purely by the fetch period.
    return replace(
        DEFAULTS, transition_duration=transition, f=1.0, fetch_period=60.0 / switches_per_minute
    )


# -- quality model ---------------------------------------------------------------


def test_default_table_is_valid():
    TABLE.validate()


def test_interpolate_hits_knots_and_midpoints():
    curve = ((0.0, 1.0), (2.0, 3.0))
    assert interpolate(curve, 0.0) == 1.0
    assert interpolate(curve, 2.0) == 3.0
    assert interpolate(curve, 1.0) == 2.0
    assert interpolate(curve, -5.0) == 1.0
    assert interpolate(curve, 9.0) == 3.0


def test_maue_maximized_at_default_operating_point():
    # Sweep the full knot grid; the defaults must sit at the argmax.
    transitions = [x for x, _ in TABLE.transition_curve]
    switch_rates = [x for x, _ in TABLE.repetition_curve]
    scored = {
        (t, r): maue_estimate(config_at(t, r), TABLE, 4.2)
        for t in transitions
        for r in switch_rates
    }
    best = max(scored, key=lambda key: scored[key])
    assert best == (2.0, 3.0)
    assert DEFAULTS.switches_per_minute() == pytest.approx(3.0)


def test_transition_two_beats_zero_and_five():
    at = {t: maue_estimate(config_at(t, 3.0), TABLE, 4.0) for t in (0.0, 2.0, 5.0)}
    assert at[2.0] >= at[0.0]
    assert at[2.0] >= at[5.0]


def test_transition_five_scores_below_hard_cut():
    assert maue_estimate(config_at(5.0, 3.0), TABLE, 4.0) < maue_estimate(
        config_at(0.0, 3.0), TABLE, 4.0
    )


def test_repetition_three_beats_five():
    assert maue_estimate(config_at(2.0, 3.0), TABLE, 4.0) >= maue_estimate(
        config_at(2.0, 5.0), TABLE, 4.0
    )


def test_maue_clamped_to_mos_range():
    low = MAUETable(
        transition_curve=((0.0, 1.0), (5.0, 1.0)),
        repetition_curve=((1.0, 1.0), (5.0, 1.0)),
    )
    assert maue_estimate(DEFAULTS, low, 1.0) == 1.0


# -- feedback ---------------------------------------------------------------------


def fb(kind, context=None):
    return FeedbackEvent(kind=kind, timestamp=0.0, context=context, session="s1")


def test_speed_up_from_defaults():
    cfg, _ = apply_feedback(DEFAULTS, PreferenceStore(), fb(FeedbackKind.SPEED_UP))
    assert cfg.transition_duration == pytest.approx(1.6)
    assert cfg.fetch_period == pytest.approx(9.0)


def test_slow_down_inverts_speed_up():
    cfg, _ = apply_feedback(DEFAULTS, PreferenceStore(), fb(FeedbackKind.SPEED_UP))
    cfg, _ = apply_feedback(cfg, PreferenceStore(), fb(FeedbackKind.SLOW_DOWN))
    assert cfg.transition_duration == pytest.approx(DEFAULTS.transition_duration)
    assert cfg.fetch_period == pytest.approx(DEFAULTS.fetch_period)


def test_repeated_speed_up_pins_at_lower_bounds():
    cfg, prefs = DEFAULTS, PreferenceStore()
    for _ in range(100):
        cfg, prefs = apply_feedback(cfg, prefs, fb(FeedbackKind.SPEED_UP))
    # fetch_period hits its bound exactly; the multiplicative transition step
    # converges onto its zero bound without ever crossing it.
    assert cfg.fetch_period == cfg.bounds.fetch_period[0]
    assert cfg.bounds.transition_duration[0] <= cfg.transition_duration < 1e-6


def test_comp_feedback_adjusts_preference():
    prefs = PreferenceStore()
    _, prefs = apply_feedback(DEFAULTS, prefs, fb(FeedbackKind.COMP_DOWN, "Eye, LS, Right on npc_1"))
    assert prefs.adjusted("Eye, LS, Right on npc_1", 4.0) == pytest.approx(3.75)
    _, prefs = apply_feedback(DEFAULTS, prefs, fb(FeedbackKind.COMP_UP, "Eye, LS, Right on npc_1"))
    assert prefs.adjusted("Eye, LS, Right on npc_1", 4.0) == pytest.approx(4.0)


def test_comp_feedback_requires_context():
    with pytest.raises(ValueError):
        apply_feedback(DEFAULTS, PreferenceStore(), fb(FeedbackKind.COMP_UP))


def test_feedback_monotonicity_and_bounds_property():
    # 10^4 random feedback sequences: config inside bounds, adjusted scores in
    # [1, 5], CompUp never lowers, SpeedUp never lengthens transitions.
    rng = Random(515)
    kinds = list(FeedbackKind)
    for _ in range(10_000):
        cfg, prefs = DEFAULTS, PreferenceStore()
        for _ in range(rng.randrange(1, 8)):
            kind = kinds[rng.randrange(4)]
            context = "Eye, MS, Front on npc_0" if kind in (
                FeedbackKind.COMP_UP, FeedbackKind.COMP_DOWN) else None
            before_transition = cfg.transition_duration
            before_score = prefs.adjusted("Eye, MS, Front on npc_0", 3.8)
            cfg, prefs = apply_feedback(cfg, prefs, fb(kind, context))
            b = cfg.bounds
            assert b.transition_duration[0] <= cfg.transition_duration <= b.transition_duration[1]
            assert b.fetch_period[0] <= cfg.fetch_period <= b.fetch_period[1]
            assert cfg.transition_duration <= cfg.shot_duration
            score = prefs.adjusted("Eye, MS, Front on npc_0", 3.8)
            assert 1.0 <= score <= 5.0
            if kind is FeedbackKind.COMP_UP:
                assert score >= before_score
            if kind is FeedbackKind.SPEED_UP:
                assert cfg.transition_duration <= before_transition


def test_preference_store_roundtrip(tmp_path):
    prefs = PreferenceStore()
    prefs.nudge("Eye, LS, Right on npc_1 [Left]", 0.5)
    prefs.nudge("Low, MS, Back on npc_2", -0.25)
    path = tmp_path / "prefs.json"
    prefs.save(path)
    assert PreferenceStore.load(path) == prefs


def test_preference_store_missing_file_is_empty():
    assert PreferenceStore.load("/nonexistent/prefs.json") == PreferenceStore()


# -- prompt scheduling ---------------------------------------------------------------


def test_event_end_triggers_composition_prompt():
    ema = EmaScheduler()
    ema.schedule_event_end(42.0, "Eye, LS, Right on npc_1")
    assert ema.due(41.0) == []
    prompts = ema.due(42.0)
    assert len(prompts) == 1
    assert prompts[0].kind == "composition"
    assert prompts[0].timestamp == 42.0


def test_pacing_prompts_every_ten_minutes():
    ema = EmaScheduler()
    assert ema.due(599.0) == []
    first = ema.due(600.0)
    assert [p.kind for p in first] == ["pacing"]
    assert ema.due(900.0) == []
    second = ema.due(1200.0)
    assert [p.kind for p in second] == ["pacing"]
    assert second[0].timestamp == 1200.0


def test_no_prompts_without_events_before_first_interval():
    assert EmaScheduler().due(599.9) == []


# -- global share steering -------------------------------------------------------------


def test_steer_all_local_raises_coefficient():
    out = steer_global_coefficient([EventKind.LOCAL_SINGLE] * 10, 1.0)
    assert out == pytest.approx(1.05)


def test_steer_balanced_window_is_fixed_point():
    window = [EventKind.GLOBAL, EventKind.LOCAL_SINGLE] * 5
    assert steer_global_coefficient(window, 1.0) == 1.0


def test_steer_requires_history():
    with pytest.raises(ValueError):
        steer_global_coefficient([], 1.0)


def test_steer_clamps_to_range():
    coeff = 9.9
    for _ in range(50):
        coeff = steer_global_coefficient([EventKind.LOCAL_SINGLE] * 5, coeff)
    assert coeff == 10.0


def test_steer_closed_loop_converges_to_balance():
    # Synthetic election: a global candidate (count ~ Poisson-ish) competes
    # with the best of 10 local scores; the coefficient must find the 50/50
    # operating point.
    rng = Random(8)
    coeff = 1.0
    window: list[EventKind] = []
    announced: list[EventKind] = []
    for _ in range(2000):
        local_best = max(rng.gauss(3.0, 1.5) for _ in range(10))
        count = rng.choice([4, 4, 4, 5, 5, 6])
        kind = EventKind.GLOBAL if coeff * count > local_best else EventKind.LOCAL_SINGLE
        announced.append(kind)
        window.append(kind)
        window = window[-20:]
        coeff = steer_global_coefficient(window, coeff)
    tail = announced[-500:]
    share = sum(1 for k in tail if k is EventKind.GLOBAL) / len(tail)
    assert share == pytest.approx(0.5, abs=0.1)


def test_preference_book_keys_sessions_independently(tmp_path):
    from announcer.adapt import PreferenceBook

    book = PreferenceBook()
    book.for_session("s0001").nudge("Eye, LS, Right on npc_1 [Left]", 0.25)
    book.for_session("s0002").nudge("Eye, LS, Right on npc_1 [Left]", -0.5)
    path = tmp_path / "prefs.json"
    book.save(path)
    reloaded = PreferenceBook.load(path)
    assert reloaded == book
    assert reloaded.for_session("s0001").adjusted("Eye, LS, Right on npc_1 [Left]", 4.0) == 4.25
    assert reloaded.for_session("s0002").adjusted("Eye, LS, Right on npc_1 [Left]", 4.0) == 3.5


def test_preference_book_save_load_is_idempotent(tmp_path):
    from announcer.adapt import PreferenceBook

    book = PreferenceBook()
    book.for_session("s0009").nudge("Low, MS, Back on npc_2", 0.75)
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    book.save(first)
    PreferenceBook.load(first).save(second)
    assert first.read_text() == second.read_text()
