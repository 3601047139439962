"""Photographic rule filters and the image-composition score table.

Shot templates are first filtered by hard rules (look room), then looked up
in a mean-opinion-score table that splits them into a good and a bad group;
the director samples shots from the good group only.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Callable, Iterable, Sequence

from .errors import PlanningError
from .psl import (
    Angle,
    LEFT_SIDE_PROFILES,
    Profile,
    RIGHT_SIDE_PROFILES,
    Screen,
    ShotSpec,
    Size,
    enumerate_specs,
)

GOOD_THRESHOLD = 3.5

_SpecKey = tuple[Angle, Size, Profile, Screen]

# Published anchor rows of the 153-entry study table: the top five, the
# good/bad boundary row, and the bottom three.
ANCHOR_SCORES: dict[_SpecKey, float] = {
    (Angle.EYE, Size.LS, Profile.RIGHT, Screen.LEFT): 5.0,
    (Angle.EYE, Size.MCU, Profile.THREE_QTR_RIGHT, Screen.LEFT): 4.83,
    (Angle.LOW, Size.LS, Profile.LEFT, Screen.RIGHT): 4.67,
    (Angle.EYE, Size.MS, Profile.LEFT, Screen.RIGHT): 4.67,
    (Angle.EYE, Size.LS, Profile.THREE_QTR_RIGHT, Screen.LEFT): 4.67,
    (Angle.HIGH, Size.ELS, Profile.THREE_QTR_BACK_LEFT, Screen.RIGHT): 3.5,
    (Angle.HIGH, Size.MS, Profile.BACK, Screen.RIGHT): 1.83,
    (Angle.HIGH, Size.MS, Profile.FRONT, Screen.RIGHT): 1.83,
    (Angle.HIGH, Size.MS, Profile.BACK, Screen.LEFT): 1.67,
}

_BACK_FAMILY = frozenset(
    {Profile.BACK, Profile.THREE_QTR_BACK_LEFT, Profile.THREE_QTR_BACK_RIGHT}
)


def heuristic_prior(spec: ShotSpec) -> float:
    """Synthetic score for rows the study never published.

    Base 3.8; the high-angle medium-shot combination is heavily penalized,
    back-family profiles and high angles mildly so, eye level mildly favored.
    """
    score = 3.8
    if spec.angle is Angle.HIGH and spec.size is Size.MS:
        score -= 1.5
    elif spec.angle is Angle.HIGH:
        score -= 0.2
    if spec.profile in _BACK_FAMILY:
        score -= 0.3
    if spec.angle is Angle.EYE:
        score += 0.2
    return max(1.0, min(5.0, score))


@dataclass(frozen=True)
class CompositionTable:
    """MOS per spec; anything absent from entries falls back to the prior."""

    entries: dict[_SpecKey, float] = field(default_factory=dict)
    threshold: float = GOOD_THRESHOLD

    @classmethod
    def default(cls) -> "CompositionTable":
        return cls(entries=dict(ANCHOR_SCORES))

    @classmethod
    def from_json(cls, path: str | Path, threshold: float = GOOD_THRESHOLD) -> "CompositionTable":
        """Load override rows: [{"angle","size","profile","screen","mos"}, ...]."""
        rows = json.loads(Path(path).read_text())
        entries: dict[_SpecKey, float] = {}
        for row in rows:
            key = (
                Angle(row["angle"]),
                Size(row["size"]),
                Profile(row["profile"]),
                Screen(row["screen"]),
            )
            mos = float(row["mos"])
            if not 1.0 <= mos <= 5.0:
                raise ValueError(f"mos {mos} outside [1, 5] for {row}")
            entries[key] = mos
        return cls(entries=entries, threshold=threshold)

    def score(self, spec: ShotSpec) -> float:
        key = (spec.angle, spec.size, spec.profile, spec.screen)
        found = self.entries.get(key)
        return found if found is not None else heuristic_prior(spec)

    def classify(self, spec: ShotSpec) -> bool:
        """True = good group. The boundary score itself counts as good."""
        return self.score(spec) >= self.threshold


def profile_laterality(profile: Profile) -> str | None:
    """Which side of the screen the subject faces under this profile.

    A right-side camera shows the subject facing screen-right (and mirrored);
    Front/Back profiles have no lateral facing.
    """
    if profile in RIGHT_SIDE_PROFILES:
        return "right"
    if profile in LEFT_SIDE_PROFILES:
        return "left"
    return None


# Subject facing its own screen edge leaves no room to look into.
DEFAULT_FORBIDDEN_PAIRS: frozenset[tuple[str, Screen]] = frozenset(
    {("right", Screen.RIGHT), ("left", Screen.LEFT)}
)


def lookroom_filter(spec: ShotSpec) -> bool:
    """Keep specs whose subject has empty frame space to look into."""
    laterality = profile_laterality(spec.profile)
    return laterality is None or (laterality, spec.screen) not in DEFAULT_FORBIDDEN_PAIRS


@dataclass(frozen=True)
class RuleSet:
    lookroom_enabled: bool = True
    forbidden_pairs: frozenset[tuple[str, Screen]] = DEFAULT_FORBIDDEN_PAIRS
    extra: tuple[tuple[str, Callable[[ShotSpec], bool]], ...] = ()

    @classmethod
    def default(cls) -> "RuleSet":
        return cls()

    @classmethod
    def disabled(cls) -> "RuleSet":
        return cls(lookroom_enabled=False)

    def keeps(self, spec: ShotSpec) -> bool:
        if self.lookroom_enabled:
            laterality = profile_laterality(spec.profile)
            if laterality is not None and (laterality, spec.screen) in self.forbidden_pairs:
                return False
        return all(pred(spec) for _, pred in self.extra)


log = logging.getLogger("announcer.composition")


def filter_all(specs: Iterable[ShotSpec], rules: RuleSet) -> list[ShotSpec]:
    """Order-preserving subset passing every enabled rule."""
    survivors = [s for s in specs if rules.keeps(s)]
    log.debug("rule filter kept %d specs", len(survivors))
    return survivors


def good_group(
    table: CompositionTable,
    rules: RuleSet,
    specs: Sequence[ShotSpec] | None = None,
) -> list[ShotSpec]:
    """Rule-compliant templates classified good, in enumeration order."""
    pool = filter_all(enumerate_specs() if specs is None else specs, rules)
    return [s for s in pool if table.classify(s)]


def sample_good(
    rng: Random,
    k: int,
    table: CompositionTable,
    rules: RuleSet,
    constraint: Callable[[ShotSpec], bool] | None = None,
) -> list[ShotSpec]:
    """Draw k distinct specs uniformly from the (optionally constrained) good group."""
    pool = good_group(table, rules)
    if constraint is not None:
        pool = [s for s in pool if constraint(s)]
    if len(pool) < k:
        raise PlanningError(
            f"good group has {len(pool)} specs after constraints, need {k}"
        )
    return rng.sample(pool, k)
