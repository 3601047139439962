"""Deterministic seeded agent simulation on a bounded 2D campus map.

Avatars loop through walk -> chase -> converse -> wait, accumulate per-window
action metrics (movement, speech, synthetic creation/transaction channels),
slide along axis-aligned obstacle boxes, and never leave the world bounds.
Every avatar owns an RNG stream derived from the master seed, so trajectories
are reproducible bit-for-bit and independent of processing order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from random import Random
from typing import Union

from .errors import ConfigurationError
from .geometry import Vec3, clamp, wrap_angle


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)


@dataclass(frozen=True)
class Box:
    """Axis-aligned obstacle: min corner (x, y), footprint w x d, height h."""

    x: float
    y: float
    w: float
    d: float
    h: float

    def contains_xy(self, px: float, py: float, margin: float = 0.0) -> bool:
        return (
            self.x - margin <= px <= self.x + self.w + margin
            and self.y - margin <= py <= self.y + self.d + margin
        )

    def contains_point(self, p: Vec3, margin: float = 0.0) -> bool:
        return self.contains_xy(p[0], p[1], margin) and p[2] <= self.h + margin


@dataclass(frozen=True)
class PointOfInterest:
    name: str
    x: float
    y: float


# Named campus landmarks used by the default scenario.
DEFAULT_POIS: tuple[PointOfInterest, ...] = (
    PointOfInterest("Start-up Zone", 20.0, 20.0),
    PointOfInterest("University Gate", 60.0, 8.0),
    PointOfInterest("Library A", 30.0, 58.0),
    PointOfInterest("Library B", 44.0, 64.0),
    PointOfInterest("College A", 92.0, 56.0),
    PointOfInterest("Student Center", 72.0, 40.0),
    PointOfInterest("Teaching Buildings", 102.0, 22.0),
    PointOfInterest("Bus Station", 12.0, 68.0),
)

DEFAULT_OBSTACLES: tuple[Box, ...] = (
    Box(34.0, 26.0, 12.0, 8.0, 9.0),
    Box(78.0, 14.0, 10.0, 12.0, 12.0),
    Box(54.0, 52.0, 8.0, 10.0, 7.0),
)


@dataclass
class ActionSample:
    """Per-window accumulators for one avatar's scored action channels."""

    move_distance: float = 0.0
    move_speed: float = 0.0
    spoken_words: float = 0.0
    voxel_count: float = 0.0
    tx_volume: float = 0.0
    window: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {
            "move_distance": self.move_distance,
            "move_speed": self.move_speed,
            "spoken_words": self.spoken_words,
            "voxel_count": self.voxel_count,
            "tx_volume": self.tx_volume,
        }


@dataclass(frozen=True)
class Walk:
    dest: tuple[float, float]


@dataclass(frozen=True)
class Chase:
    target: int
    elapsed: float = 0.0


@dataclass(frozen=True)
class Converse:
    partners: frozenset[int]
    remaining: float


@dataclass(frozen=True)
class Wait:
    remaining: float


BehaviorPhase = Union[Walk, Chase, Converse, Wait]


@dataclass
class AvatarState:
    id: int
    position: Vec3  # z = 0 on the ground
    facing: float  # yaw radians in [0, 2*pi)
    height: float = 1.7
    behavior: BehaviorPhase = field(default_factory=lambda: Wait(0.0))
    metrics: ActionSample = field(default_factory=ActionSample)

    @property
    def name(self) -> str:
        return f"npc_{self.id}"

    @property
    def xy(self) -> tuple[float, float]:
        return (self.position[0], self.position[1])


@dataclass(frozen=True)
class ChannelRates:
    """Synthetic creation/transaction event rates (per avatar, per second)."""

    voxel_per_s: float = 0.01
    voxel_batch: tuple[int, int] = (4, 24)
    tx_per_s: float = 0.005
    tx_amount: tuple[float, float] = (1.0, 8.0)


@dataclass(frozen=True)
class WorldConfig:
    bounds: Rect = Rect(0.0, 0.0, 120.0, 80.0)
    pois: tuple[PointOfInterest, ...] = DEFAULT_POIS
    obstacles: tuple[Box, ...] = DEFAULT_OBSTACLES
    avatar_count: int = 10
    tick_rate: int = 20
    seed: int = 42
    walk_speed: float = 1.4
    chase_speed: float = 3.0
    chase_radius: float = 40.0
    chase_timeout: float = 20.0
    catch_distance: float = 1.5
    converse_range: tuple[float, float] = (5.0, 20.0)
    converse_group_max: int = 4
    wait_max: float = 10.0
    words_per_second: float = 2.0
    rates: ChannelRates = ChannelRates()

    def validate(self) -> None:
        if self.avatar_count < 1:
            raise ConfigurationError("avatar_count must be >= 1")
        if self.tick_rate <= 0:
            raise ConfigurationError("tick_rate must be > 0")
        if self.bounds.width <= 0 or self.bounds.height <= 0:
            raise ConfigurationError("bounds must have positive extent")
        names = [p.name for p in self.pois]
        if len(names) != len(set(names)):
            raise ConfigurationError("pois must have unique names")
        for poi in self.pois:
            if not self.bounds.contains(poi.x, poi.y):
                raise ConfigurationError(f"poi {poi.name!r} lies outside bounds")
        for i, box in enumerate(self.obstacles):
            inside = self.bounds.contains(box.x, box.y) and self.bounds.contains(
                box.x + box.w, box.y + box.d
            )
            if not inside:
                raise ConfigurationError(f"obstacles[{i}] lies outside bounds")


@dataclass
class WorldState:
    config: WorldConfig
    avatars: list[AvatarState]
    time: float = 0.0
    # One RNG stream per avatar, derived from the master seed; excluded from
    # equality so two states compare by observable content.
    rngs: list[Random] = field(default_factory=list, compare=False, repr=False)

    def avatar(self, avatar_id: int) -> AvatarState:
        return self.avatars[avatar_id]


def _avatar_rng(seed: int, avatar_id: int) -> Random:
    return Random(f"{seed}:avatar:{avatar_id}")


def _blocked(config: WorldConfig, x: float, y: float) -> bool:
    if not config.bounds.contains(x, y):
        return True
    return any(box.contains_xy(x, y) for box in config.obstacles)


def _sample_destination(config: WorldConfig, rng: Random) -> tuple[float, float]:
    # Half the time head for a landmark (with jitter), otherwise anywhere open.
    for _ in range(100):
        if config.pois and rng.random() < 0.5:
            poi = rng.choice(config.pois)
            x = clamp(poi.x + rng.uniform(-5.0, 5.0), config.bounds.x0, config.bounds.x1)
            y = clamp(poi.y + rng.uniform(-5.0, 5.0), config.bounds.y0, config.bounds.y1)
        else:
            x = rng.uniform(config.bounds.x0, config.bounds.x1)
            y = rng.uniform(config.bounds.y0, config.bounds.y1)
        if not _blocked(config, x, y):
            return (x, y)
    return config.bounds.center


def spawn_world(config: WorldConfig) -> WorldState:
    """Place avatars at seed-derived open positions, all starting a walk."""
    config.validate()
    placer = Random(f"{config.seed}:spawn")
    avatars: list[AvatarState] = []
    rngs: list[Random] = []
    for i in range(config.avatar_count):
        x = y = 0.0
        for _ in range(1000):
            x = placer.uniform(config.bounds.x0, config.bounds.x1)
            y = placer.uniform(config.bounds.y0, config.bounds.y1)
            if not _blocked(config, x, y):
                break
        else:
            raise ConfigurationError("obstacles leave no open spawn space in bounds")
        rng = _avatar_rng(config.seed, i)
        avatars.append(
            AvatarState(
                id=i,
                position=(x, y, 0.0),
                facing=placer.uniform(0.0, 2.0 * math.pi),
                behavior=Walk(dest=_sample_destination(config, rng)),
            )
        )
        rngs.append(rng)
    return WorldState(config=config, avatars=avatars, rngs=rngs)


def _move_toward(
    world: WorldState, av: AvatarState, dest: tuple[float, float], speed: float, dt: float
) -> float:
    """Advance toward dest with slide-along-wall collision; returns distance moved."""
    cfg = world.config
    ox, oy = av.xy
    dx, dy = dest[0] - ox, dest[1] - oy
    d = math.hypot(dx, dy)
    if d < 1e-9:
        return 0.0
    step = min(speed * dt, d)
    nx, ny = ox + dx / d * step, oy + dy / d * step
    if _blocked(cfg, nx, ny):
        if not _blocked(cfg, nx, oy):
            nx, ny = nx, oy
        elif not _blocked(cfg, ox, ny):
            nx, ny = ox, ny
        else:
            return 0.0
    moved = math.hypot(nx - ox, ny - oy)
    if moved > 1e-9:
        av.facing = wrap_angle(math.atan2(ny - oy, nx - ox))
    av.position = (nx, ny, 0.0)
    return moved


def _pick_chase_target(world: WorldState, av: AvatarState, rng: Random) -> int | None:
    others = [o for o in world.avatars if o.id != av.id]
    if not others:
        return None
    nearby = [
        o
        for o in others
        if math.dist(o.xy, av.xy) <= world.config.chase_radius
    ]
    pool = nearby if nearby else [min(others, key=lambda o: (math.dist(o.xy, av.xy), o.id))]
    return pool[rng.randrange(len(pool))].id


def _conversation_group(world: WorldState, member: AvatarState) -> set[int]:
    assert isinstance(member.behavior, Converse)
    return set(member.behavior.partners) | {member.id}


def _begin_converse(world: WorldState, av: AvatarState, target: AvatarState, rng: Random) -> None:
    cfg = world.config
    if isinstance(target.behavior, Converse):
        group = _conversation_group(world, target)
        if len(group) >= cfg.converse_group_max:
            av.behavior = Wait(rng.uniform(0.0, cfg.wait_max))
            return
        remaining = target.behavior.remaining
        for mid in group:
            member = world.avatar(mid)
            assert isinstance(member.behavior, Converse)
            member.behavior = Converse(
                partners=member.behavior.partners | {av.id},
                remaining=member.behavior.remaining,
            )
        av.behavior = Converse(partners=frozenset(group), remaining=remaining)
    else:
        duration = rng.uniform(*cfg.converse_range)
        av.behavior = Converse(partners=frozenset({target.id}), remaining=duration)
        target.behavior = Converse(partners=frozenset({av.id}), remaining=duration)


def _face_partner(world: WorldState, av: AvatarState, partners: frozenset[int]) -> None:
    pid = min(partners)
    px, py = world.avatar(pid).xy
    dx, dy = px - av.xy[0], py - av.xy[1]
    if math.hypot(dx, dy) > 1e-9:
        av.facing = wrap_angle(math.atan2(dy, dx))


def _step_avatar(world: WorldState, av: AvatarState, rng: Random, dt: float) -> None:
    cfg = world.config
    phase = av.behavior
    moved = 0.0

    if isinstance(phase, Walk):
        moved = _move_toward(world, av, phase.dest, cfg.walk_speed, dt)
        if math.dist(av.xy, phase.dest) < 0.15:
            target = _pick_chase_target(world, av, rng)
            if target is None:
                av.behavior = Wait(rng.uniform(0.0, cfg.wait_max))
            else:
                av.behavior = Chase(target=target, elapsed=0.0)
        elif moved == 0.0:
            # Wedged against geometry (slide blocked on both axes): new goal.
            av.behavior = Walk(dest=_sample_destination(cfg, rng))
    elif isinstance(phase, Chase):
        target = world.avatar(phase.target)
        if math.dist(av.xy, target.xy) <= cfg.catch_distance:
            _begin_converse(world, av, target, rng)
        elif phase.elapsed >= cfg.chase_timeout:
            av.behavior = Wait(rng.uniform(0.0, cfg.wait_max))
        else:
            moved = _move_toward(world, av, target.xy, cfg.chase_speed, dt)
            av.behavior = Chase(target=phase.target, elapsed=phase.elapsed + dt)
    elif isinstance(phase, Converse):
        av.metrics.spoken_words += cfg.words_per_second * dt
        _face_partner(world, av, phase.partners)
        remaining = phase.remaining - dt
        if remaining <= 0.0:
            av.behavior = Wait(rng.uniform(0.0, cfg.wait_max))
        else:
            av.behavior = Converse(partners=phase.partners, remaining=remaining)
    elif isinstance(phase, Wait):
        remaining = phase.remaining - dt
        if remaining <= 0.0:
            av.behavior = Walk(dest=_sample_destination(cfg, rng))
        else:
            av.behavior = Wait(remaining=remaining)

    # Synthetic creation / transaction channels fire as seeded rare events.
    rates = cfg.rates
    if rng.random() < rates.voxel_per_s * dt:
        av.metrics.voxel_count += float(rng.randint(*rates.voxel_batch))
    if rng.random() < rates.tx_per_s * dt:
        av.metrics.tx_volume += rng.uniform(*rates.tx_amount)

    av.metrics.move_distance += moved
    av.metrics.window += dt
    av.metrics.move_speed = av.metrics.move_distance / av.metrics.window


def step(world: WorldState, dt: float) -> WorldState:
    """Advance the whole world by dt seconds (single-writer; mutates in place)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    for av in world.avatars:
        _step_avatar(world, av, world.rngs[av.id], dt)
    world.time += dt
    return world


def reset_windows(world: WorldState) -> None:
    """Zero every avatar's action accumulators (called at fetch boundaries)."""
    for av in world.avatars:
        av.metrics = ActionSample()


@dataclass(frozen=True)
class DensityMap:
    """Avatar head-count per grid cell, row-major from the bounds' min corner."""

    origin: tuple[float, float]
    cell_size: float
    cols: int
    rows: int
    counts: tuple[int, ...]

    def cell_index(self, x: float, y: float) -> int:
        col = min(self.cols - 1, max(0, int((x - self.origin[0]) / self.cell_size)))
        row = min(self.rows - 1, max(0, int((y - self.origin[1]) / self.cell_size)))
        return row * self.cols + col

    def centroid(self, index: int) -> tuple[float, float]:
        row, col = divmod(index, self.cols)
        return (
            self.origin[0] + (col + 0.5) * self.cell_size,
            self.origin[1] + (row + 0.5) * self.cell_size,
        )

    @property
    def total(self) -> int:
        return sum(self.counts)


def region_density(world: WorldState, cell_size: float) -> DensityMap:
    if cell_size <= 0.0:
        raise ValueError("cell_size must be > 0")
    bounds = world.config.bounds
    cols = max(1, math.ceil(bounds.width / cell_size))
    rows = max(1, math.ceil(bounds.height / cell_size))
    counts = [0] * (cols * rows)
    grid = DensityMap(
        origin=(bounds.x0, bounds.y0),
        cell_size=cell_size,
        cols=cols,
        rows=rows,
        counts=(),
    )
    for av in world.avatars:
        counts[grid.cell_index(av.position[0], av.position[1])] += 1
    return replace(grid, counts=tuple(counts))
