"""Headless engine: scenario loading, the fetch/announce loop, sweeps.

One Engine instance owns all mutable state (world, threshold model, live
tuning, director) and advances it tick by tick.  Identical configuration and
seed reproduce the run byte for byte, which is what the experiment sweeps and
the replay checks rely on.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random

from . import adapt, psl, world as world_mod
from . import events as events_mod
from .adapt import EmaScheduler, FeedbackEvent, MAUETable, PreferenceBook, Prompt, QoEConfig
from .composition import CompositionTable, RuleSet, good_group
from .director import Director, DirectorSettings, PatrolTrace, ShotLogRecord
from .errors import ConfigurationError
from .events import (
    DEFAULT_CALIBRATION_WINDOW,
    Event,
    EventKind,
    EventsConfig,
    ImportanceModel,
    ImportanceWeights,
    ThresholdState,
    calibrate_model,
    cutoff_value,
    dynamic_threshold,
)
from .world import Box, PointOfInterest, Rect, WorldConfig, WorldState


@dataclass(frozen=True)
class EngineConfig:
    world: WorldConfig = WorldConfig()
    weights: ImportanceWeights = ImportanceWeights()
    events: EventsConfig = EventsConfig()
    qoe: QoEConfig = QoEConfig()
    maps: psl.SolveMaps = psl.SolveMaps()
    rules: RuleSet = RuleSet()
    table: CompositionTable = field(default_factory=CompositionTable.default)
    maue: MAUETable = MAUETable()
    trace: PatrolTrace | None = None  # None: rectangle inset from bounds
    director: DirectorSettings = DirectorSettings()
    calibration_window: int = DEFAULT_CALIBRATION_WINDOW
    steer_window: int = 20
    prefs_path: str | None = None

    def validate(self) -> None:
        self.world.validate()
        self.weights.validate()
        self.maps.validate()
        self.maue.validate()
        if self.qoe.transition_duration > self.qoe.shot_duration:
            raise ConfigurationError("transition_duration must not exceed shot_duration")

    def resolved_trace(self) -> PatrolTrace:
        if self.trace is not None:
            return self.trace
        return PatrolTrace.rectangle_for(self.world.bounds)


def _scenario_world(raw: dict) -> WorldConfig:
    defaults = WorldConfig()
    bounds = defaults.bounds
    if "bounds" in raw:
        b = raw["bounds"]
        bounds = Rect(float(b[0]), float(b[1]), float(b[2]), float(b[3]))
    pois = defaults.pois
    if "pois" in raw:
        pois = tuple(
            PointOfInterest(str(p["name"]), float(p["x"]), float(p["y"])) for p in raw["pois"]
        )
    obstacles = defaults.obstacles
    if "obstacles" in raw:
        obstacles = tuple(
            Box(float(o["x"]), float(o["y"]), float(o["w"]), float(o["d"]), float(o["h"]))
            for o in raw["obstacles"]
        )
    rates = defaults.rates
    if "rates" in raw:
        r = raw["rates"]
        rates = world_mod.ChannelRates(
            voxel_per_s=float(r.get("voxel_per_s", rates.voxel_per_s)),
            voxel_batch=tuple(r.get("voxel_batch", rates.voxel_batch)),
            tx_per_s=float(r.get("tx_per_s", rates.tx_per_s)),
            tx_amount=tuple(r.get("tx_amount", rates.tx_amount)),
        )
    return replace(
        defaults,
        bounds=bounds,
        pois=pois,
        obstacles=obstacles,
        rates=rates,
        seed=int(raw.get("seed", defaults.seed)),
        avatar_count=int(raw.get("avatar_count", defaults.avatar_count)),
        tick_rate=int(raw.get("tick_rate", defaults.tick_rate)),
    )


def load_scenario(path: str | Path) -> tuple[WorldConfig, float]:
    """Scenario JSON -> (world config, duration seconds)."""
    raw = json.loads(Path(path).read_text())
    return _scenario_world(raw), float(raw.get("duration_s", 60.0))


def load_engine_config(
    scenario_path: str | Path | None = None,
    config_path: str | Path | None = None,
    seed: int | None = None,
) -> tuple[EngineConfig, float]:
    duration = 60.0
    wcfg = WorldConfig()
    if scenario_path is not None:
        wcfg, duration = load_scenario(scenario_path)
    cfg = EngineConfig(world=wcfg)
    if config_path is not None:
        raw = json.loads(Path(config_path).read_text())
        cfg = _apply_config_overrides(cfg, raw)
    if seed is not None:
        cfg = replace(cfg, world=replace(cfg.world, seed=seed))
    cfg.validate()
    return cfg, duration


def _apply_config_overrides(cfg: EngineConfig, raw: dict) -> EngineConfig:
    if "events" in raw:
        e = raw["events"]
        if "weights" in e:
            cfg = replace(cfg, weights=ImportanceWeights({str(k): float(v) for k, v in e["weights"].items()}))
        ecfg = cfg.events
        cfg = replace(
            cfg,
            events=EventsConfig(
                gathering_threshold=int(e.get("gathering_threshold", ecfg.gathering_threshold)),
                cell_size=float(e.get("cell_size", ecfg.cell_size)),
                grouping_radius=float(e.get("grouping_radius", ecfg.grouping_radius)),
            ),
        )
        qoe_updates = {}
        for name in ("f", "fetch_period"):
            if name in e:
                qoe_updates[name] = float(e[name])
        if qoe_updates:
            cfg = replace(cfg, qoe=replace(cfg.qoe, **qoe_updates))
    if "psl" in raw:
        p = raw["psl"]
        maps = cfg.maps
        size_distance = dict(maps.size_distance)
        for k, v in p.get("size_distance", {}).items():
            size_distance[psl.Size(k)] = float(v)
        angle_height = dict(maps.angle_height)
        for k, v in p.get("angle_height", {}).items():
            angle_height[psl.Angle(k)] = float(v)
        cfg = replace(
            cfg,
            maps=psl.SolveMaps(
                size_distance=size_distance,
                angle_height=angle_height,
                fov=math.radians(float(p.get("fov_deg", math.degrees(maps.fov)))),
                aspect=float(p.get("aspect", maps.aspect)),
            ),
        )
    if "composition" in raw:
        c = raw["composition"]
        rules = RuleSet(lookroom_enabled=bool(c.get("lookroom", True)))
        table = cfg.table
        if c.get("table_path"):
            table = CompositionTable.from_json(c["table_path"], threshold=float(c.get("threshold", 3.5)))
        elif "threshold" in c:
            table = replace(table, threshold=float(c["threshold"]))
        cfg = replace(cfg, rules=rules, table=table)
    if "director" in raw:
        d = raw["director"]
        qoe_updates = {}
        for name in ("transition_duration", "shot_duration"):
            if name in d:
                qoe_updates[name] = float(d[name])
        if qoe_updates:
            cfg = replace(cfg, qoe=replace(cfg.qoe, **qoe_updates))
        if "trace" in d:
            t = d["trace"]
            cfg = replace(
                cfg,
                trace=PatrolTrace(
                    points=tuple((float(p[0]), float(p[1]), float(p[2])) for p in t["points"]),
                    speed=float(t.get("speed", 4.0)),
                ),
            )
        if "retry_budget" in d:
            cfg = replace(cfg, director=replace(cfg.director, retry_budget=int(d["retry_budget"])))
    if "adapt" in raw:
        a = raw["adapt"]
        if a.get("maue_table_path"):
            cfg = replace(cfg, maue=MAUETable.from_json(a["maue_table_path"]))
    return cfg


class Engine:
    """The full announcer pipeline advanced one simulation tick at a time."""

    def __init__(self, config: EngineConfig):
        config.validate()
        self.config = config
        self.world: WorldState = world_mod.spawn_world(config.world)
        self.qoe = config.qoe.clamped()
        self.model = ImportanceModel()
        self.threshold = ThresholdState(f=self.qoe.f, n=config.world.avatar_count)
        self.history: deque[float] = deque(maxlen=config.calibration_window)
        self.prefs = (
            PreferenceBook.load(config.prefs_path)
            if config.prefs_path is not None
            else PreferenceBook()
        )
        self.ema = EmaScheduler()
        self.director = Director(
            trace=config.resolved_trace(),
            maps=config.maps,
            table=config.table,
            rules=config.rules,
            rng=Random(f"{config.world.seed}:director"),
            obstacles=config.world.obstacles,
            settings=config.director,
        )
        self.tick_index = 0
        self.dt = 1.0 / config.world.tick_rate
        self._next_fetch_t = 0.0
        self._event_seq = 0
        self._feedback_queue: deque[FeedbackEvent] = deque()
        self._announced_kinds: deque[EventKind] = deque(maxlen=config.steer_window)
        self._last_spec_text: str | None = None
        self.announcements: list[Event] = []
        self.prompts: list[Prompt] = []
        self.wire_events: list[dict] = []  # drained by the serve loop

    @property
    def time(self) -> float:
        return self.tick_index * self.dt

    # -- fetch cycle -------------------------------------------------------

    def _fetch(self, t: float) -> Event | None:
        scores = events_mod.score_all(self.world, self.config.weights)
        elected = events_mod.fetch_events(
            self.world,
            self.threshold,
            self.config.weights,
            t,
            self.config.events,
            global_coefficient=self.qoe.global_coefficient,
        )
        # Recalibrate for the next cycle and restart the action windows.
        self.history.extend(scores[aid] for aid in sorted(scores))
        self.model = calibrate_model(self.history, window=self.config.calibration_window)
        self.threshold.update(self.model, n=len(self.world.avatars), f=self.qoe.f)
        world_mod.reset_windows(self.world)

        if elected is None:
            return None
        self._event_seq += 1
        elected = replace(elected, id=f"e{self._event_seq:04d}")
        accepted, end_t = self.director.on_event(elected, self.world, t, self.qoe)
        if accepted:
            self.announcements.append(elected)
            self._announced_kinds.append(elected.kind)
            self.qoe = replace(
                self.qoe,
                global_coefficient=adapt.steer_global_coefficient(
                    self._announced_kinds, self.qoe.global_coefficient
                ),
            ).clamped()
            self._last_spec_text = None
            self.wire_events.append(
                {
                    "type": "event",
                    "t": t,
                    "id": elected.id,
                    "kind": elected.kind.value,
                    "subjects": list(elected.subjects),
                    "score": elected.score,
                }
            )
            self.ema.schedule_event_end(end_t, self.director.plan_caption)
        return elected if accepted else None

    def _drain_feedback(self) -> None:
        changed = False
        while self._feedback_queue:
            fb = self._feedback_queue.popleft()
            store = self.prefs.for_session(fb.session)
            try:
                self.qoe, _ = adapt.apply_feedback(self.qoe, store, fb)
                changed = True
            except ValueError:
                continue
        if changed:
            self.wire_events.append({"type": "config", "t": self.time, **self.qoe.as_dict()})

    def submit_feedback(self, fb: FeedbackEvent) -> None:
        """Queue feedback from any producer; applied between ticks."""
        self._feedback_queue.append(fb)

    def save_preferences(self) -> None:
        if self.config.prefs_path is not None:
            self.prefs.save(self.config.prefs_path)

    def tick(self) -> ShotLogRecord:
        t = self.time
        self._drain_feedback()
        if t >= self._next_fetch_t - 1e-9:
            self._fetch(t)
            self._next_fetch_t = t + self.qoe.fetch_period
        world_mod.step(self.world, self.dt)
        record = self.director.tick(self.world, t + self.dt, self.dt)
        if record.spec is not None and record.spec != self._last_spec_text:
            self._last_spec_text = record.spec
            self.wire_events.append(
                {
                    "type": "shot",
                    "t": t + self.dt,
                    "event_id": record.event_id,
                    "spec": record.spec,
                }
            )
        for prompt in self.ema.due(t + self.dt):
            if prompt.kind == "composition" and prompt.context is None:
                continue  # first-person/global views have no composition to rate
            self.prompts.append(prompt)
            self.wire_events.append(
                {"type": "prompt", "t": t + self.dt, "kind": prompt.kind, "context": prompt.context}
            )
        self.tick_index += 1
        return record

    def run(self, duration: float) -> list[ShotLogRecord]:
        ticks = round(duration / self.dt)
        return [self.tick() for _ in range(ticks)]


def record_to_json(record: ShotLogRecord) -> str:
    payload: dict = {
        "t": record.t,
        "mode": record.mode,
        "phase": record.phase,
        "event_id": record.event_id,
        "spec": record.spec,
        "pos": list(record.pos),
        "focus": list(record.focus),
        "fov": record.fov,
    }
    if record.note is not None:
        payload["note"] = record.note
    if record.avatars is not None:
        payload["avatars"] = list(record.avatars)
    return json.dumps(payload, separators=(",", ":"))


def write_log(records: list[ShotLogRecord], path: str | Path) -> None:
    Path(path).write_text("".join(record_to_json(r) + "\n" for r in records))


def run_headless(
    scenario_path: str | Path | None,
    config_path: str | Path | None,
    duration: float | None,
    seed: int | None,
    out_path: str | Path,
) -> list[ShotLogRecord]:
    cfg, scenario_duration = load_engine_config(scenario_path, config_path, seed)
    engine = Engine(cfg)
    records = engine.run(duration if duration is not None else scenario_duration)
    write_log(records, out_path)
    return records


def verify_threshold(n: int, f: float, trials: int, seed: int = 12345) -> float:
    """Monte-Carlo fraction of fetch cycles with at least one score above the
    dynamic cutoff, drawing n standard-normal importances per cycle."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    i = dynamic_threshold(n, f)
    cutoff = cutoff_value(ImportanceModel(), i)
    rng = Random(seed)
    hits = 0
    for _ in range(trials):
        if any(rng.gauss(0.0, 1.0) > cutoff for _ in range(n)):
            hits += 1
    return hits / trials


def _phase_runs(records: list[ShotLogRecord]) -> list[tuple[str, float, float]]:
    """Contiguous (phase, start_t, duration) runs of a record stream."""
    runs: list[tuple[str, float, float]] = []
    if not records:
        return runs
    start = records[0].t
    phase = records[0].phase
    prev = records[0].t
    for rec in records[1:]:
        if rec.phase != phase:
            runs.append((phase, start, prev - start))
            phase, start = rec.phase, rec.t
        prev = rec.t
    runs.append((phase, start, prev - start))
    return runs


def summarize_run(records: list[ShotLogRecord], dt: float) -> dict:
    """Realized timing digest of one run (per-phase durations are inclusive
    of the tick spacing so a 100-record hold reads as 100 ticks)."""
    runs = _phase_runs(records)
    first_of_run: list[ShotLogRecord] = []
    index = 0
    for _, start, _ in runs:
        while records[index].t < start - 1e-12:
            index += 1
        first_of_run.append(records[index])
    holds = [d + dt for (p, _, d) in runs if p == "hold"]
    blends = [d + dt for p, _, d in runs if p == "blend"]
    # Single-hold announcements (first-person/global) span a whole event slot
    # of three shots; normalize them so the per-shot figure stays comparable.
    shot_holds = [
        (d + dt) if rec.mode == "third_person" else (d + dt) / 3.0
        for (p, _, d), rec in zip(runs, first_of_run)
        if p == "hold"
    ]
    announced = {r.event_id for r in records if r.event_id and r.phase == "hold"}
    return {
        "announcements": len(announced),
        "hold_durations": holds,
        "blend_durations": blends,
        "mean_hold": sum(holds) / len(holds) if holds else 0.0,
        "mean_shot_hold": sum(shot_holds) / len(shot_holds) if shot_holds else 0.0,
        "mean_blend": sum(blends) / len(blends) if blends else 0.0,
    }


SWEEP_PARAMS = ("transition", "frequency")
_SLOT_MARGIN = 0.5


def sweep_config_for(param: str, value: float, base: EngineConfig) -> EngineConfig:
    """Derive the per-value engine config of an experiment sweep.

    transition: pin the transition duration.  frequency: make every fetch
    elect (f = 1) with one fetch per 60/value seconds, shrinking shots so a
    full announcement fits inside its slot.
    """
    if param == "transition":
        qoe = replace(base.qoe, transition_duration=float(value))
        return replace(base, qoe=qoe.clamped())
    if param == "frequency":
        slot = 60.0 / float(value)
        transition = base.qoe.transition_duration
        fitted = (slot - 4.0 * transition - _SLOT_MARGIN) / 3.0
        if fitted <= 0:
            raise ConfigurationError(f"frequency {value} leaves no room for shots")
        qoe = replace(
            base.qoe,
            f=1.0,
            fetch_period=slot,
            shot_duration=min(base.qoe.shot_duration, fitted),
        )
        return replace(base, qoe=qoe.clamped())
    raise ConfigurationError(f"unknown sweep parameter {param!r}")


def sweep(
    param: str,
    values: list[float],
    out_dir: str | Path,
    scenario_path: str | Path | None = None,
    config_path: str | Path | None = None,
    duration: float = 60.0,
    seed: int | None = None,
) -> Path:
    """One headless run per value (shared seed); returns the summary CSV path."""
    base, scenario_duration = load_engine_config(scenario_path, config_path, seed)
    if scenario_path is not None:
        duration = scenario_duration
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        cfg = sweep_config_for(param, value, base)
        engine = Engine(cfg)
        records = engine.run(duration)
        write_log(records, out / f"{param}_{value:g}.jsonl")
        digest = summarize_run(records, engine.dt)
        comp_scores = [cfg.table.score(s) for s in good_group(cfg.table, cfg.rules)]
        mean_comp = sum(comp_scores) / len(comp_scores)
        ratio = (
            digest["mean_blend"] / digest["mean_shot_hold"]
            if digest["mean_shot_hold"] > 0
            else 0.0
        )
        rows.append(
            {
                "param": param,
                "value": value,
                "announcements": digest["announcements"],
                "mean_hold_s": round(digest["mean_hold"], 3),
                "mean_blend_s": round(digest["mean_blend"], 3),
                "transition_shot_ratio": round(ratio, 4),
                "maue_estimate": round(adapt.maue_estimate(cfg.qoe, cfg.maue, mean_comp), 4),
            }
        )
    summary = out / "summary.csv"
    with summary.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return summary
