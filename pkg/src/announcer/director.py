"""Camera direction: patrol, event modes, shot sequencing, eased transitions.

The director idles as an aerial dolly on a closed patrol trace.  An elected
event switches it into first-person (one subject), third-person (several
subjects, composed through the shot language under the introduction and
180-degree rules), or an announce-from-the-trace hold for crowd gatherings.
All motion is continuous: eased blends connect every pair of poses, and paths
detour over obstacles instead of through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random
from typing import Callable, Union

from .adapt import QoEConfig
from .composition import CompositionTable, RuleSet, sample_good
from .errors import PathError, PlanningError
from .events import Event, EventKind
from .geometry import Vec3, add, dist, heading, lerp, scale, sub
from .psl import (
    CameraPose,
    ShotSpec,
    Size,
    SolveMaps,
    SubjectAnchor,
    format_spec,
    project,
    solve,
)
from .world import AvatarState, WorldState


@dataclass(frozen=True)
class BirdsEye:
    pass


@dataclass(frozen=True)
class FirstPerson:
    subject: int


@dataclass(frozen=True)
class ThirdPerson:
    subjects: tuple[int, ...]


DirectorMode = Union[BirdsEye, FirstPerson, ThirdPerson]

MODE_NAMES = {BirdsEye: "birdseye", FirstPerson: "first_person", ThirdPerson: "third_person"}


def mode_for(event: Event) -> DirectorMode:
    if event.kind is EventKind.LOCAL_SINGLE:
        return FirstPerson(subject=event.subjects[0])
    if event.kind is EventKind.LOCAL_MULTI:
        return ThirdPerson(subjects=event.subjects)
    return BirdsEye()


def ease(t: float) -> float:
    """Smoothstep 3t^2 - 2t^3, clamped; zero slope at both ends."""
    t = max(0.0, min(1.0, t))
    return t * t * (3.0 - 2.0 * t)


def line_of_action_side(camera: Vec3, a: Vec3, b: Vec3) -> int:
    """Which side of the a->b axis the camera stands on (+1/-1; 0 = on it)."""
    s = (b[0] - a[0]) * (camera[1] - a[1]) - (b[1] - a[1]) * (camera[0] - a[0])
    if s > 0.0:
        return 1
    if s < 0.0:
        return -1
    return 0


@dataclass(frozen=True)
class Path:
    """Parametric camera path; a straight segment or a lifted quadratic arc."""

    start: Vec3
    end: Vec3
    apex: Vec3 | None = None

    def __call__(self, u: float) -> Vec3:
        if self.apex is None:
            return lerp(self.start, self.end, u)
        # Quadratic Bezier through the apex at u = 0.5.
        control = sub(scale(self.apex, 2.0), scale(add(self.start, self.end), 0.5))
        w0 = (1.0 - u) * (1.0 - u)
        w1 = 2.0 * u * (1.0 - u)
        w2 = u * u
        return add(add(scale(self.start, w0), scale(control, w1)), scale(self.end, w2))

    @property
    def length(self) -> float:
        if self.apex is None:
            return dist(self.start, self.end)
        pts = [self(i / 32.0) for i in range(33)]
        return sum(dist(p, q) for p, q in zip(pts, pts[1:]))


PATH_MARGIN = 0.5
PATH_CLEARANCE = 2.0
_PATH_SAMPLES = 100


def _path_clear(path: Path, obstacles) -> bool:
    for i in range(_PATH_SAMPLES + 1):
        p = path(i / _PATH_SAMPLES)
        if any(box.contains_point(p, PATH_MARGIN) for box in obstacles):
            return False
    return True


def plan_path(frm: Vec3, to: Vec3, obstacles=()) -> Path:
    """Straight if it clears every inflated box, else an over-the-top arc.

    The arc lifts the midpoint above the tallest blocking obstacle and is
    re-verified by sampling; the apex climbs further if new boxes intrude.
    """
    for name, p in (("from", frm), ("to", to)):
        if any(box.contains_point(p, PATH_MARGIN) for box in obstacles):
            raise PathError(f"{name} endpoint lies inside an inflated obstacle")
    straight = Path(frm, to)
    if dist(frm, to) < 1e-12 or _path_clear(straight, obstacles):
        return straight

    blocked = [
        box
        for box in obstacles
        if not _path_clear(straight, [box])
    ]
    top = max(box.h for box in blocked) if blocked else 0.0
    mid = lerp(frm, to, 0.5)
    apex_z = max(top + PATH_CLEARANCE, mid[2])
    for _ in range(20):
        path = Path(frm, to, apex=(mid[0], mid[1], apex_z))
        if _path_clear(path, obstacles):
            return path
        apex_z += PATH_CLEARANCE
    raise PathError("no collision-free arc found within lift budget")


def blend(frm: CameraPose, to: CameraPose, t: float, path: Path | None = None) -> CameraPose:
    """Eased interpolation between poses; endpoints are returned bit-exact."""
    if t <= 0.0:
        return frm
    if t >= 1.0:
        return to
    s = ease(t)
    position = path(s) if path is not None else lerp(frm.position, to.position, s)
    return CameraPose(
        position=position,
        focus=lerp(frm.focus, to.focus, s),
        fov=frm.fov + (to.fov - frm.fov) * s,
    )


@dataclass(frozen=True)
class PatrolTrace:
    """Closed polyline the idle camera rides as a dolly (first point != last)."""

    points: tuple[Vec3, ...]
    speed: float = 4.0

    def validate(self, obstacles=()) -> None:
        if len(self.points) < 3:
            raise ValueError("patrol trace needs at least 3 points")
        if self.speed <= 0:
            raise ValueError("patrol speed must be > 0")
        for p in self.points:
            if any(box.h >= p[2] and box.contains_xy(p[0], p[1]) for box in obstacles):
                raise ValueError("patrol trace passes through an obstacle")

    @classmethod
    def rectangle_for(
        cls, bounds, altitude: float = 25.0, inset: float = 0.1, speed: float = 4.0
    ) -> "PatrolTrace":
        dx, dy = bounds.width * inset, bounds.height * inset
        return cls(
            points=(
                (bounds.x0 + dx, bounds.y0 + dy, altitude),
                (bounds.x1 - dx, bounds.y0 + dy, altitude),
                (bounds.x1 - dx, bounds.y1 - dy, altitude),
                (bounds.x0 + dx, bounds.y1 - dy, altitude),
            ),
            speed=speed,
        )

    @property
    def segments(self) -> list[tuple[Vec3, Vec3]]:
        pts = self.points
        return [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]

    @property
    def perimeter(self) -> float:
        return sum(dist(p, q) for p, q in self.segments)

    def point_at(self, arc: float) -> Vec3:
        arc = math.fmod(arc, self.perimeter)
        if arc < 0.0:
            arc += self.perimeter
        for p, q in self.segments:
            seg_len = dist(p, q)
            if arc <= seg_len or seg_len == 0.0:
                if seg_len == 0.0:
                    continue
                return lerp(p, q, arc / seg_len)
            arc -= seg_len
        return self.points[0]

    def focus_point(self) -> Vec3:
        """Ground point under the trace centroid; the patrol camera's look-at."""
        n = len(self.points)
        return (
            sum(p[0] for p in self.points) / n,
            sum(p[1] for p in self.points) / n,
            0.0,
        )


def patrol_pose(trace: PatrolTrace, time: float, fov: float = math.radians(50.0)) -> CameraPose:
    """Dolly pose after riding the trace for `time` seconds from its start."""
    return CameraPose(
        position=trace.point_at(trace.speed * time),
        focus=trace.focus_point(),
        fov=fov,
    )


def nearest_trace_param(trace: PatrolTrace, target: Vec3) -> tuple[Vec3, float]:
    """Closest polyline point to target and its arc-length parameter."""
    best_point = trace.points[0]
    best_arc = 0.0
    best_d = math.inf
    acc = 0.0
    for p, q in trace.segments:
        seg = sub(q, p)
        seg_len = dist(p, q)
        if seg_len < 1e-12:
            continue
        tt = max(0.0, min(1.0, (sub(target, p)[0] * seg[0] + sub(target, p)[1] * seg[1] + sub(target, p)[2] * seg[2]) / (seg_len * seg_len)))
        cand = lerp(p, q, tt)
        d = dist(cand, target)
        if d < best_d - 1e-12:
            best_d = d
            best_point = cand
            best_arc = acc + tt * seg_len
        acc += seg_len
    return best_point, best_arc


def nearest_trace_point(trace: PatrolTrace, target: Vec3) -> Vec3:
    return nearest_trace_param(trace, target)[0]


def subject_anchor(av: AvatarState) -> SubjectAnchor:
    """Solve anchor for an avatar: abdomen base, face midpoint, facing."""
    x, y, _ = av.position
    return SubjectAnchor(
        base_point=(x, y, 0.55 * av.height),
        face_point=(x, y, 0.92 * av.height),
        facing=heading(av.facing),
    )


def group_anchor(anchors: list[SubjectAnchor]) -> SubjectAnchor:
    """Shared look-at anchor for a multi-subject establishing shot."""
    n = float(len(anchors))
    base = (
        sum(a.base_point[0] for a in anchors) / n,
        sum(a.base_point[1] for a in anchors) / n,
        sum(a.base_point[2] for a in anchors) / n,
    )
    face = (
        sum(a.face_point[0] for a in anchors) / n,
        sum(a.face_point[1] for a in anchors) / n,
        sum(a.face_point[2] for a in anchors) / n,
    )
    fx = sum(a.facing[0] for a in anchors)
    fy = sum(a.facing[1] for a in anchors)
    flat = math.hypot(fx, fy)
    facing = anchors[0].facing if flat < 1e-9 else (fx / flat, fy / flat, 0.0)
    return SubjectAnchor(base_point=base, face_point=face, facing=facing)


INTRO_SIZES = frozenset({Size.LS, Size.ELS})


@dataclass(frozen=True)
class ShotPlan:
    event: Event
    shots: tuple[tuple[ShotSpec, CameraPose, float], ...]
    transitions: tuple[tuple[float, str], ...]


def _place_shot(
    sampler: Callable[[], ShotSpec],
    anchor: SubjectAnchor,
    maps: SolveMaps,
    accept: Callable[[ShotSpec, CameraPose], bool],
    retry_budget: int,
) -> tuple[ShotSpec, CameraPose]:
    spec = None
    for _ in range(retry_budget):
        spec = sampler()
        pose = solve(spec, anchor, maps)
        if accept(spec, pose):
            return spec, pose
    # Deterministic fallback: mirror the left/right family of the last draw.
    assert spec is not None
    mirrored = spec.mirrored()
    pose = solve(mirrored, anchor, maps)
    if accept(mirrored, pose):
        return mirrored, pose
    raise PlanningError("no rule-compliant pose within the retry budget")


def plan_shots(
    event: Event,
    anchors: dict[int, SubjectAnchor],
    table: CompositionTable,
    rules: RuleSet,
    maps: SolveMaps,
    rng: Random,
    qoe: QoEConfig,
    retry_budget: int = 16,
    viewport: tuple[int, int] = (1920, 1080),
    subject_names: dict[int, str] | None = None,
) -> ShotPlan:
    """Three-shot sequence for a local event.

    Shot 1 establishes: long-or-wider size, every subject's face inside the
    frustum.  With two or more subjects, all shots must sit on one side of the
    axis through the first two; offending draws are resampled, then mirrored.
    Subjects rotate across the three shots.
    """
    subjects = sorted(event.subjects)
    if not subjects or any(s not in anchors for s in subjects):
        raise PlanningError("event subjects are not resolvable")
    names = subject_names or {s: f"npc_{s}" for s in subjects}

    axis: tuple[Vec3, Vec3] | None = None
    if len(subjects) >= 2:
        a, b = anchors[subjects[0]].base_point, anchors[subjects[1]].base_point
        if dist(a, b) < 1e-9:
            raise PlanningError("line of action is degenerate (coincident subjects)")
        axis = (a, b)

    required_side = 0

    def side_of(pose: CameraPose) -> int:
        if axis is None:
            return 1
        return line_of_action_side(pose.position, axis[0], axis[1])

    def accept_intro(spec: ShotSpec, pose: CameraPose) -> bool:
        if axis is not None and side_of(pose) == 0:
            return False
        return all(
            project(pose, anchors[s].face_point, viewport)[1] for s in subjects
        )

    intro_anchor = (
        group_anchor([anchors[s] for s in subjects]) if len(subjects) >= 2 else anchors[subjects[0]]
    )
    spec1, pose1 = _place_shot(
        lambda: sample_good(rng, 1, table, rules, constraint=lambda s: s.size in INTRO_SIZES)[0]
        .with_subject(names[subjects[0]]),
        intro_anchor,
        maps,
        accept_intro,
        retry_budget,
    )
    required_side = side_of(pose1)

    def accept_follow(spec: ShotSpec, pose: CameraPose) -> bool:
        return axis is None or side_of(pose) == required_side

    shots: list[tuple[ShotSpec, CameraPose, float]] = [(spec1, pose1, qoe.shot_duration)]
    for index in (1, 2):
        sid = subjects[index % len(subjects)]
        spec, pose = _place_shot(
            lambda sid=sid: sample_good(rng, 1, table, rules)[0].with_subject(names[sid]),
            anchors[sid],
            maps,
            accept_follow,
            retry_budget,
        )
        shots.append((spec, pose, qoe.shot_duration))

    transitions = ((qoe.transition_duration, "ease_in_out"),) * 2
    return ShotPlan(event=event, shots=tuple(shots), transitions=transitions)


@dataclass(frozen=True)
class ShotLogRecord:
    t: float
    mode: str
    phase: str  # "patrol" | "blend" | "hold"
    pos: Vec3
    focus: Vec3
    fov: float
    event_id: str | None = None
    spec: str | None = None
    note: str | None = None
    avatars: tuple[dict, ...] | None = None


def _fixed(pose: CameraPose) -> Callable[[WorldState], CameraPose]:
    return lambda world: pose


@dataclass
class _Blend:
    duration: float
    target: Callable[[WorldState], CameraPose]
    live: bool = False  # recompute target every tick (moving first-person subject)
    on_finish: Callable[[], None] | None = None
    started: bool = False
    start_pose: CameraPose | None = None
    plan_target: CameraPose | None = None
    path: Path | None = None


@dataclass
class _Hold:
    duration: float
    pose: Callable[[WorldState], CameraPose]
    spec: str | None = None
    started: bool = False


@dataclass(frozen=True)
class DirectorSettings:
    retry_budget: int = 16
    event_hold_shots: int = 3  # first-person/global hold length in shot slots
    viewport: tuple[int, int] = (1920, 1080)
    fp_focus_distance: float = 10.0


class Director:
    """Single-owner camera state machine; drive it once per simulation tick."""

    def __init__(
        self,
        trace: PatrolTrace,
        maps: SolveMaps,
        table: CompositionTable,
        rules: RuleSet,
        rng: Random,
        obstacles=(),
        settings: DirectorSettings = DirectorSettings(),
    ):
        trace.validate(obstacles)
        self.trace = trace
        self.maps = maps
        self.table = table
        self.rules = rules
        self.rng = rng
        self.obstacles = tuple(obstacles)
        self.settings = settings
        self._patrol_arc = 0.0
        self._segments: list[_Blend | _Hold] = []
        self._seg_elapsed = 0.0
        self._mode_name = "birdseye"
        self._event_id: str | None = None
        self._pending_note: str | None = None
        # Spec text of the running plan's closing shot (None when the mode
        # has no composition to rate); consumed by the prompt scheduler.
        self.plan_caption: str | None = None
        self._last_pose = CameraPose(
            position=trace.point_at(0.0), focus=trace.focus_point(), fov=maps.fov
        )

    # -- event intake ------------------------------------------------------

    @property
    def busy(self) -> bool:
        return bool(self._segments)

    def on_event(self, event: Event, world: WorldState, t: float, qoe: QoEConfig) -> tuple[bool, float]:
        """Accept an elected event unless a plan is already running.

        Returns (accepted, announcement end time).  A planning failure leaves
        the director in patrol and notes the skip in the next log record.
        """
        if self.busy:
            return False, t
        mode = mode_for(event)
        try:
            if isinstance(mode, ThirdPerson):
                segments = self._third_person_segments(event, world, qoe)
            elif isinstance(mode, FirstPerson):
                segments = self._first_person_segments(event, mode.subject, qoe)
            else:
                segments = self._global_segments(event, qoe)
        except PlanningError as exc:
            self._pending_note = f"plan_skipped:{event.id}:{exc}"
            return False, t
        segments = [s for s in segments if s.duration > 1e-9]
        if not segments:
            return False, t
        self._segments = segments
        self._seg_elapsed = 0.0
        self._mode_name = MODE_NAMES[type(mode)]
        self._event_id = event.id
        self.plan_caption = next(
            (s.spec for s in reversed(segments) if isinstance(s, _Hold) and s.spec),
            None,
        )
        return True, t + sum(s.duration for s in segments)

    def _third_person_segments(self, event, world, qoe):
        anchors = {s: subject_anchor(world.avatar(s)) for s in event.subjects}
        names = {s: world.avatar(s).name for s in event.subjects}
        plan = plan_shots(
            event,
            anchors,
            self.table,
            self.rules,
            self.maps,
            self.rng,
            qoe,
            retry_budget=self.settings.retry_budget,
            viewport=self.settings.viewport,
            subject_names=names,
        )
        segments: list[_Blend | _Hold] = []
        for spec, pose, duration in plan.shots:
            segments.append(_Blend(duration=qoe.transition_duration, target=_fixed(pose)))
            segments.append(_Hold(duration=duration, pose=_fixed(pose), spec=format_spec(spec)))
        segments.append(self._return_blend(qoe))
        return segments

    def _first_person_segments(self, event, subject: int, qoe):
        def fp_pose(world: WorldState) -> CameraPose:
            av = world.avatar(subject)
            anchor = subject_anchor(av)
            return CameraPose(
                position=anchor.face_point,
                focus=add(anchor.face_point, scale(anchor.facing, self.settings.fp_focus_distance)),
                fov=self.maps.fov,
            )

        hold = qoe.shot_duration * self.settings.event_hold_shots
        return [
            _Blend(duration=qoe.transition_duration, target=fp_pose, live=True),
            _Hold(duration=hold, pose=fp_pose),
            self._return_blend(qoe),
        ]

    def _global_segments(self, event, qoe):
        assert event.region is not None
        center, _radius = event.region
        focus = (center[0], center[1], 0.0)

        state: dict[str, CameraPose] = {}

        def announce_pose(world: WorldState) -> CameraPose:
            if "pose" not in state:
                point, arc = nearest_trace_param(self.trace, self._last_pose.position)
                state["pose"] = CameraPose(position=point, focus=focus, fov=self.maps.fov)
                state["arc"] = arc  # type: ignore[assignment]
            return state["pose"]

        def settle() -> None:
            if "arc" in state:
                self._patrol_arc = state["arc"]  # type: ignore[assignment]

        hold = qoe.shot_duration * self.settings.event_hold_shots
        return [
            _Blend(duration=qoe.transition_duration, target=announce_pose, on_finish=settle),
            _Hold(duration=hold, pose=announce_pose),
            self._return_blend(qoe),
        ]

    def _return_blend(self, qoe: QoEConfig) -> _Blend:
        state: dict[str, float] = {}

        def target(world: WorldState) -> CameraPose:
            if "arc" not in state:
                point, arc = nearest_trace_param(self.trace, self._last_pose.position)
                state["arc"] = arc
                state["point"] = point  # type: ignore[assignment]
            return CameraPose(
                position=state["point"],  # type: ignore[arg-type]
                focus=self.trace.focus_point(),
                fov=self.maps.fov,
            )

        def settle() -> None:
            if "arc" in state:
                self._patrol_arc = state["arc"]

        return _Blend(duration=qoe.transition_duration, target=target, on_finish=settle)

    # -- per-tick drive ------------------------------------------------------

    def tick(self, world: WorldState, t: float, dt: float) -> ShotLogRecord:
        note, self._pending_note = self._pending_note, None
        if not self._segments:
            self._patrol_arc = math.fmod(
                self._patrol_arc + self.trace.speed * dt, self.trace.perimeter
            )
            pose = CameraPose(
                position=self.trace.point_at(self._patrol_arc),
                focus=self.trace.focus_point(),
                fov=self.maps.fov,
            )
            self._mode_name = "birdseye"
            self._event_id = None
            self._last_pose = pose
            return ShotLogRecord(
                t=t, mode="birdseye", phase="patrol",
                pos=pose.position, focus=pose.focus, fov=pose.fov, note=note,
            )

        seg = self._segments[0]
        avatars_field = None
        if isinstance(seg, _Blend):
            if not seg.started:
                seg.started = True
                seg.start_pose = self._last_pose
                seg.plan_target = seg.target(world)
                seg.path = self._safe_path(seg.start_pose.position, seg.plan_target.position)
            self._seg_elapsed += dt
            u = min(1.0, self._seg_elapsed / seg.duration)
            assert seg.start_pose is not None and seg.plan_target is not None and seg.path is not None
            pose = blend(seg.start_pose, seg.plan_target, u, seg.path)
            if seg.live and u > 0.0:
                # Track the moving target: converge onto its live pose by u = 1.
                live_target = seg.target(world)
                drift = sub(live_target.position, seg.plan_target.position)
                pose = CameraPose(
                    position=add(pose.position, scale(drift, ease(u))),
                    focus=lerp(pose.focus, live_target.focus, ease(u)),
                    fov=pose.fov,
                )
            phase = "blend"
            spec_text = None
        else:
            if not seg.started:
                seg.started = True
                avatars_field = self._avatar_snapshot(world)
            self._seg_elapsed += dt
            pose = seg.pose(world)
            phase = "hold"
            spec_text = seg.spec

        record = ShotLogRecord(
            t=t,
            mode=self._mode_name,
            phase=phase,
            pos=pose.position,
            focus=pose.focus,
            fov=pose.fov,
            event_id=self._event_id,
            spec=spec_text,
            note=note,
            avatars=avatars_field,
        )
        self._last_pose = pose

        if self._seg_elapsed >= seg.duration - 1e-9:
            finished = self._segments.pop(0)
            self._seg_elapsed = 0.0
            if isinstance(finished, _Blend) and finished.on_finish is not None:
                finished.on_finish()
        return record

    def _safe_path(self, frm: Vec3, to: Vec3) -> Path:
        # Mid-announcement moves must never wedge the state machine: fall back
        # to the straight segment when no clean arc exists.
        try:
            return plan_path(frm, to, self.obstacles)
        except PathError:
            return Path(frm, to)

    def _avatar_snapshot(self, world: WorldState) -> tuple[dict, ...]:
        # Embedded on hold-start records so storyboards can be rebuilt from
        # the log alone.
        return tuple(
            {
                "id": av.id,
                "x": av.position[0],
                "y": av.position[1],
                "yaw": av.facing,
                "height": av.height,
            }
            for av in world.avatars
        )
