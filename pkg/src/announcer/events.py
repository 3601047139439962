"""Event election: importance scoring, dynamic thresholding, gathering detection.

Each fetch cycle scores every avatar's action window as a weighted sum,
compares scores against a cutoff derived from a running normal model of the
importance distribution, folds in crowd gatherings from the density grid, and
elects at most one event.  The cutoff percentile shrinks as the online count
grows, keeping the election rate stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist, fmean, stdev
from typing import Sequence

from .world import ActionSample, Converse, DensityMap, WorldState, region_density

_STD_NORMAL = NormalDist()


def _default_weights() -> dict[str, float]:
    # Creation and transaction channels dominate; movement barely registers.
    return {
        "move_distance": 0.1,
        "move_speed": 0.2,
        "spoken_words": 0.5,
        "voxel_count": 2.0,
        "tx_volume": 2.0,
    }


@dataclass(frozen=True)
class ImportanceWeights:
    values: dict[str, float] = field(default_factory=_default_weights)

    def validate(self) -> None:
        if any(w < 0 for w in self.values.values()):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in self.values.values()):
            raise ValueError("at least one weight must be positive")

    def scaled(self, c: float) -> "ImportanceWeights":
        return ImportanceWeights({k: v * c for k, v in self.values.items()})


def importance(sample: ActionSample, weights: ImportanceWeights) -> float:
    """Weighted sum over the sample's action channels; linear in each."""
    channels = sample.as_dict()
    return sum(w * channels[name] for name, w in weights.values.items() if name in channels)


def dynamic_threshold(n: int, f: float) -> float:
    """Cutoff percentile 1 - f**(1/n) for n online avatars at hit ratio f.

    Decreasing in n (for f < 1): more users need a tighter per-user percentile
    to keep the overall election rate steady.
    """
    if n < 1:
        raise ValueError("avatar count n must be >= 1")
    if not 0.0 <= f <= 1.0:
        raise ValueError("hit ratio f must lie in [0, 1]")
    return 1.0 - f ** (1.0 / n)


@dataclass(frozen=True)
class ImportanceModel:
    """Running normal estimate of the importance distribution."""

    mu: float = 0.0
    sigma: float = 1.0


SIGMA_FLOOR = 1e-6
DEFAULT_CALIBRATION_WINDOW = 600


def calibrate_model(
    history: Sequence[float],
    window: int = DEFAULT_CALIBRATION_WINDOW,
    prior: ImportanceModel = ImportanceModel(),
) -> ImportanceModel:
    """Sample mean/stddev over the trailing window; prior when underdetermined.

    The sigma floor keeps the cutoff finite on constant histories.
    """
    recent = list(history)[-window:]
    if len(recent) < 2:
        return prior
    return ImportanceModel(mu=fmean(recent), sigma=max(stdev(recent), SIGMA_FLOOR))


def cutoff_value(model: ImportanceModel, i: float) -> float:
    """Importance value at the (1 - i) quantile of the model.

    The i = 0 and i = 1 endpoints map to -inf/+inf so a hit ratio of 1 admits
    everything and a ratio of 0 admits nothing.
    """
    if i <= 0.0:
        return -math.inf
    if i >= 1.0:
        return math.inf
    return model.mu + model.sigma * _STD_NORMAL.inv_cdf(1.0 - i)


@dataclass
class ThresholdState:
    """Live cutoff state: ratio f, online count n, percentile i, cutoff value."""

    f: float
    n: int
    i: float = field(init=False)
    cutoff: float = field(init=False)

    def __post_init__(self) -> None:
        self.i = dynamic_threshold(self.n, self.f)
        self.cutoff = cutoff_value(ImportanceModel(), self.i)

    def update(self, model: ImportanceModel, n: int, f: float | None = None) -> None:
        if f is not None:
            self.f = f
        self.n = n
        self.i = dynamic_threshold(self.n, self.f)
        self.cutoff = cutoff_value(model, self.i)


class EventKind(Enum):
    LOCAL_SINGLE = "local_single"
    LOCAL_MULTI = "local_multi"
    GLOBAL = "global"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    subjects: tuple[int, ...]
    score: float
    timestamp: float
    region: tuple[tuple[float, float], float] | None = None  # (center, radius)
    id: str = ""

    def __post_init__(self) -> None:
        if self.kind is EventKind.LOCAL_SINGLE and len(self.subjects) != 1:
            raise ValueError("local single event needs exactly one subject")
        if self.kind is EventKind.LOCAL_MULTI and len(self.subjects) < 2:
            raise ValueError("local multi event needs at least two subjects")
        if self.kind is EventKind.GLOBAL and self.region is None:
            raise ValueError("global event needs a region")


@dataclass(frozen=True)
class EventsConfig:
    gathering_threshold: int = 4
    cell_size: float = 10.0
    grouping_radius: float = 3.0


def detect_global(
    density: DensityMap,
    coefficient: float,
    gathering_threshold: int,
    timestamp: float = 0.0,
) -> Event | None:
    """Gathering event at the densest cell's centroid, if any cell qualifies.

    Ties break toward the lowest cell index; the score is the adaptive
    coefficient times the head count.
    """
    if not density.counts:
        return None
    best_index = max(range(len(density.counts)), key=lambda idx: (density.counts[idx], -idx))
    best_count = density.counts[best_index]
    if best_count < gathering_threshold:
        return None
    center = density.centroid(best_index)
    radius = density.cell_size * math.sqrt(2.0) / 2.0
    return Event(
        kind=EventKind.GLOBAL,
        subjects=(),
        score=coefficient * best_count,
        timestamp=timestamp,
        region=(center, radius),
    )


def _group_candidates(
    world: WorldState,
    scores: dict[int, float],
    above: list[int],
    grouping_radius: float,
    timestamp: float,
) -> list[Event]:
    """Merge co-conversing above-cutoff avatars into one multi-subject event."""
    above_set = set(above)
    consumed: set[int] = set()
    out: list[Event] = []
    for aid in above:
        if aid in consumed:
            continue
        av = world.avatar(aid)
        members = [aid]
        if isinstance(av.behavior, Converse):
            for pid in sorted(av.behavior.partners):
                partner = world.avatar(pid)
                if (
                    pid in above_set
                    and pid not in consumed
                    and pid != aid
                    and isinstance(partner.behavior, Converse)
                    and math.dist(partner.xy, av.xy) <= grouping_radius
                ):
                    members.append(pid)
        consumed.update(members)
        members = sorted(members)
        if len(members) >= 2:
            out.append(
                Event(
                    kind=EventKind.LOCAL_MULTI,
                    subjects=tuple(members),
                    score=sum(scores[m] for m in members),
                    timestamp=timestamp,
                )
            )
        else:
            out.append(
                Event(
                    kind=EventKind.LOCAL_SINGLE,
                    subjects=(aid,),
                    score=scores[aid],
                    timestamp=timestamp,
                )
            )
    return out


def score_all(world: WorldState, weights: ImportanceWeights) -> dict[int, float]:
    return {av.id: importance(av.metrics, weights) for av in world.avatars}


def fetch_events(
    world: WorldState,
    threshold: ThresholdState,
    weights: ImportanceWeights,
    timestamp: float,
    config: EventsConfig = EventsConfig(),
    global_coefficient: float = 1.0,
) -> Event | None:
    """Elect at most one event for this fetch cycle.

    Candidates are the avatars whose window importance clears the cutoff
    (co-conversing ones merged) plus any crowd gathering; the highest score
    wins, local candidates shading global ones on exact ties, then lower
    subject ids.
    """
    scores = score_all(world, weights)
    above = [aid for aid in sorted(scores) if scores[aid] > threshold.cutoff]
    candidates = _group_candidates(world, scores, above, config.grouping_radius, timestamp)

    density = region_density(world, config.cell_size)
    gathering = detect_global(
        density, global_coefficient, config.gathering_threshold, timestamp
    )
    if gathering is not None:
        candidates.append(gathering)
    if not candidates:
        return None

    def rank(ev: Event) -> tuple[float, int, tuple[int, ...]]:
        # Higher score first; local beats global on ties; then lowest ids.
        kind_rank = 1 if ev.kind is EventKind.GLOBAL else 0
        return (-ev.score, kind_rank, ev.subjects)

    return min(candidates, key=rank)
