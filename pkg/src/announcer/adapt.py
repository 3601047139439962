"""Live announcer tuning: the quality model and the feedback loop.

Defaults encode the study-stage optimum (2 s transitions, 5 s shots, a 0.5
hit ratio at a 10 s fetch period); session feedback then nudges pacing and
per-viewer composition preferences inside hard bounds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from .events import EventKind
from .geometry import clamp


@dataclass(frozen=True)
class QoEBounds:
    transition_duration: tuple[float, float] = (0.0, 5.0)
    shot_duration: tuple[float, float] = (1.0, 10.0)
    f: tuple[float, float] = (0.05, 1.0)
    fetch_period: tuple[float, float] = (2.0, 60.0)
    global_coefficient: tuple[float, float] = (0.1, 10.0)


@dataclass(frozen=True)
class QoEConfig:
    transition_duration: float = 2.0
    shot_duration: float = 5.0
    f: float = 0.5
    fetch_period: float = 10.0
    global_coefficient: float = 1.0
    bounds: QoEBounds = QoEBounds()

    def clamped(self) -> "QoEConfig":
        b = self.bounds
        shot = clamp(self.shot_duration, *b.shot_duration)
        return replace(
            self,
            shot_duration=shot,
            # A transition longer than the shot it leads into never makes sense.
            transition_duration=min(clamp(self.transition_duration, *b.transition_duration), shot),
            f=clamp(self.f, *b.f),
            fetch_period=clamp(self.fetch_period, *b.fetch_period),
            global_coefficient=clamp(self.global_coefficient, *b.global_coefficient),
        )

    def switches_per_minute(self) -> float:
        """Expected announcement rate: fetches per minute times the hit ratio."""
        return 60.0 / self.fetch_period * self.f

    def as_dict(self) -> dict[str, float]:
        return {
            "transition_duration": self.transition_duration,
            "shot_duration": self.shot_duration,
            "f": self.f,
            "fetch_period": self.fetch_period,
            "global_coefficient": self.global_coefficient,
        }


Curve = tuple[tuple[float, float], ...]


def _default_transition_curve() -> Curve:
    # Ordinal structure from the pacing study: peak at 2 s, and a 5 s crawl
    # rated below a hard cut. Absolute values are synthetic.
    return ((0.0, 3.0), (1.0, 3.6), (2.0, 4.2), (3.0, 3.9), (4.0, 3.3), (5.0, 2.6))


def _default_repetition_curve() -> Curve:
    # Peak at 3 view switches per minute.
    return ((1.0, 3.2), (2.0, 3.5), (3.0, 4.1), (4.0, 3.4), (5.0, 2.9))


@dataclass(frozen=True)
class MAUETable:
    transition_curve: Curve = field(default_factory=_default_transition_curve)
    repetition_curve: Curve = field(default_factory=_default_repetition_curve)

    def validate(self) -> None:
        for name, curve in (
            ("transition_curve", self.transition_curve),
            ("repetition_curve", self.repetition_curve),
        ):
            xs = [x for x, _ in curve]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError(f"{name} knots must strictly increase")
            if any(not 1.0 <= y <= 5.0 for _, y in curve):
                raise ValueError(f"{name} scores must lie in [1, 5]")

    @classmethod
    def from_json(cls, path: str | Path) -> "MAUETable":
        raw = json.loads(Path(path).read_text())
        table = cls(
            transition_curve=tuple((float(x), float(y)) for x, y in raw["transition_curve"]),
            repetition_curve=tuple((float(x), float(y)) for x, y in raw["repetition_curve"]),
        )
        table.validate()
        return table


def interpolate(curve: Curve, x: float) -> float:
    """Piecewise-linear lookup, clamped to the end knots."""
    if x <= curve[0][0]:
        return curve[0][1]
    if x >= curve[-1][0]:
        return curve[-1][1]
    for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
        if x0 <= x <= x1:
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    return curve[-1][1]


def maue_estimate(config: QoEConfig, table: MAUETable, mean_composition_mos: float) -> float:
    """Predicted opinion score for a config: equal-weight average of the
    transition factor, the repetition factor, and the mean composition score."""
    transition = interpolate(table.transition_curve, config.transition_duration)
    repetition = interpolate(table.repetition_curve, config.switches_per_minute())
    return clamp((transition + repetition + mean_composition_mos) / 3.0, 1.0, 5.0)


class FeedbackKind(Enum):
    COMP_UP = "comp_up"
    COMP_DOWN = "comp_down"
    SPEED_UP = "speed_up"
    SLOW_DOWN = "slow_down"


@dataclass(frozen=True)
class FeedbackEvent:
    kind: FeedbackKind
    timestamp: float
    context: str | None = None  # spec text for composition feedback
    session: str = ""

    def validate(self) -> None:
        if self.kind in (FeedbackKind.COMP_UP, FeedbackKind.COMP_DOWN) and not self.context:
            raise ValueError("composition feedback requires a spec context")


COMP_STEP = 0.25
SPEED_TRANSITION_FACTOR = 0.8
SPEED_FETCH_FACTOR = 0.9
# Deltas beyond +-4 cannot move a [1, 5] score any further.
_DELTA_LIMIT = 4.0


@dataclass
class PreferenceStore:
    """One session's composition score deltas, persisted across runs."""

    deltas: dict[str, float] = field(default_factory=dict)

    def adjusted(self, spec_text: str, base_score: float) -> float:
        return clamp(base_score + self.deltas.get(spec_text, 0.0), 1.0, 5.0)

    def nudge(self, spec_text: str, step: float) -> None:
        current = self.deltas.get(spec_text, 0.0)
        self.deltas[spec_text] = clamp(current + step, -_DELTA_LIMIT, _DELTA_LIMIT)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.deltas, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "PreferenceStore":
        p = Path(path)
        if not p.exists():
            return cls()
        return cls(deltas={str(k): float(v) for k, v in json.loads(p.read_text()).items()})


@dataclass
class PreferenceBook:
    """All sessions' preference stores, persisted as one JSON keyed by session id."""

    sessions: dict[str, PreferenceStore] = field(default_factory=dict)

    def for_session(self, session: str) -> PreferenceStore:
        return self.sessions.setdefault(session, PreferenceStore())

    def save(self, path: str | Path) -> None:
        payload = {sid: store.deltas for sid, store in sorted(self.sessions.items())}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "PreferenceBook":
        p = Path(path)
        if not p.exists():
            return cls()
        raw = json.loads(p.read_text())
        return cls(
            sessions={
                str(sid): PreferenceStore(
                    deltas={str(k): float(v) for k, v in deltas.items()}
                )
                for sid, deltas in raw.items()
            }
        )


def apply_feedback(
    config: QoEConfig, prefs: PreferenceStore, fb: FeedbackEvent
) -> tuple[QoEConfig, PreferenceStore]:
    """One feedback event -> adjusted (config, prefs); everything stays in bounds."""
    fb.validate()
    if fb.kind is FeedbackKind.COMP_UP:
        prefs.nudge(fb.context or "", COMP_STEP)
        return config, prefs
    if fb.kind is FeedbackKind.COMP_DOWN:
        prefs.nudge(fb.context or "", -COMP_STEP)
        return config, prefs
    if fb.kind is FeedbackKind.SPEED_UP:
        new = replace(
            config,
            transition_duration=config.transition_duration * SPEED_TRANSITION_FACTOR,
            fetch_period=config.fetch_period * SPEED_FETCH_FACTOR,
        )
    else:  # SLOW_DOWN
        new = replace(
            config,
            transition_duration=config.transition_duration / SPEED_TRANSITION_FACTOR,
            fetch_period=config.fetch_period / SPEED_FETCH_FACTOR,
        )
    return new.clamped(), prefs


@dataclass(frozen=True)
class Prompt:
    kind: str  # "composition" | "pacing"
    timestamp: float
    context: str | None = None


PACING_INTERVAL = 600.0


@dataclass
class EmaScheduler:
    """Micro-prompt scheduling: composition at event ends, pacing on a clock."""

    pacing_interval: float = PACING_INTERVAL
    next_pacing: float = PACING_INTERVAL
    _pending: list[Prompt] = field(default_factory=list)

    def schedule_event_end(self, t_end: float, context: str | None) -> None:
        self._pending.append(Prompt(kind="composition", timestamp=t_end, context=context))

    def due(self, now: float) -> list[Prompt]:
        """Prompts whose time has come; pacing prompts repeat every interval."""
        out = [p for p in self._pending if p.timestamp <= now]
        self._pending = [p for p in self._pending if p.timestamp > now]
        while now >= self.next_pacing:
            out.append(Prompt(kind="pacing", timestamp=self.next_pacing))
            self.next_pacing += self.pacing_interval
        out.sort(key=lambda p: (p.timestamp, p.kind))
        return out


STEER_RATE = 0.05


def steer_global_coefficient(
    kinds: Sequence[EventKind],
    coefficient: float,
    rate: float = STEER_RATE,
    lo: float = 0.1,
    hi: float = 10.0,
) -> float:
    """Multiplicative nudge keeping announced global/local airtime balanced."""
    if not kinds:
        raise ValueError("history window must be non-empty")
    share = sum(1 for k in kinds if k is EventKind.GLOBAL) / len(kinds)
    if share < 0.5:
        coefficient *= 1.0 + rate
    elif share > 0.5:
        coefficient *= 1.0 - rate
    return clamp(coefficient, lo, hi)
