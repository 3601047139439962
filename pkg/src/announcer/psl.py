"""Shot description language: parsing, formatting, and camera solving.

A shot specification reads

    <Angle>, <Size>, <Profile> on <Subject> [<Screen>]

e.g. ``Eye, LS, Right on npc_3 [Left]``.  Keywords are case-insensitive,
``3/4`` profile prefixes may be written with or without spaces, and the
trailing ``[<Screen>]`` defaults to Center when omitted.

``solve`` turns a spec plus a subject anchor into a camera pose: the camera
stands at a profile-dependent bearing from the subject's base point, at a
size-dependent distance and an angle-dependent height, and looks at a focus
point shifted sideways from the face so the face lands on the requested
vertical third line of the frame.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import GeometryError
from .geometry import UP, Vec3, add, cross, dot, norm, normalize, scale, sub


class Angle(Enum):
    LOW = "Low"
    EYE = "Eye"
    HIGH = "High"


class Size(Enum):
    ECU = "ECU"
    BCU = "BCU"
    CU = "CU"
    MCU = "MCU"
    MS = "MS"
    LS = "LS"
    ELS = "ELS"


class Profile(Enum):
    FRONT = "Front"
    THREE_QTR_RIGHT = "3/4 Right"
    RIGHT = "Right"
    THREE_QTR_BACK_RIGHT = "3/4 Back Right"
    BACK = "Back"
    THREE_QTR_BACK_LEFT = "3/4 Back Left"
    LEFT = "Left"
    THREE_QTR_LEFT = "3/4 Left"


class Screen(Enum):
    LEFT = "Left"
    CENTER = "Center"
    RIGHT = "Right"


# Horizontal bearing of the camera measured from the subject's facing
# direction; positive angles swing toward the subject's right-hand side.
PROFILE_BEARING: dict[Profile, float] = {
    Profile.FRONT: 0.0,
    Profile.THREE_QTR_RIGHT: math.radians(45.0),
    Profile.RIGHT: math.radians(90.0),
    Profile.THREE_QTR_BACK_RIGHT: math.radians(135.0),
    Profile.BACK: math.radians(180.0),
    Profile.THREE_QTR_BACK_LEFT: math.radians(-135.0),
    Profile.LEFT: math.radians(-90.0),
    Profile.THREE_QTR_LEFT: math.radians(-45.0),
}

# Profiles that put the camera on the subject's right side; on screen the
# subject then faces right (mirrored for the left-side family).
RIGHT_SIDE_PROFILES = frozenset(
    {Profile.RIGHT, Profile.THREE_QTR_RIGHT, Profile.THREE_QTR_BACK_RIGHT}
)
LEFT_SIDE_PROFILES = frozenset(
    {Profile.LEFT, Profile.THREE_QTR_LEFT, Profile.THREE_QTR_BACK_LEFT}
)

MIRRORED_PROFILE: dict[Profile, Profile] = {
    Profile.FRONT: Profile.FRONT,
    Profile.BACK: Profile.BACK,
    Profile.RIGHT: Profile.LEFT,
    Profile.LEFT: Profile.RIGHT,
    Profile.THREE_QTR_RIGHT: Profile.THREE_QTR_LEFT,
    Profile.THREE_QTR_LEFT: Profile.THREE_QTR_RIGHT,
    Profile.THREE_QTR_BACK_RIGHT: Profile.THREE_QTR_BACK_LEFT,
    Profile.THREE_QTR_BACK_LEFT: Profile.THREE_QTR_BACK_RIGHT,
}

MIRRORED_SCREEN: dict[Screen, Screen] = {
    Screen.LEFT: Screen.RIGHT,
    Screen.CENTER: Screen.CENTER,
    Screen.RIGHT: Screen.LEFT,
}


@dataclass(frozen=True)
class ShotSpec:
    angle: Angle
    size: Size
    profile: Profile
    screen: Screen = Screen.CENTER
    subject: str = ""

    def with_subject(self, subject: str) -> "ShotSpec":
        return replace(self, subject=subject)

    def mirrored(self) -> "ShotSpec":
        """Swap the left/right profile family (and screen side, keeping look room)."""
        return replace(
            self,
            profile=MIRRORED_PROFILE[self.profile],
            screen=MIRRORED_SCREEN[self.screen],
        )


@dataclass(frozen=True)
class SubjectAnchor:
    """Solve-time geometry of one subject: abdomen point, face point, facing."""

    base_point: Vec3
    face_point: Vec3
    facing: Vec3  # unit horizontal direction


def _default_size_distance() -> dict[Size, float]:
    # Meters from the base point for a 1.7 m subject at the default 50 deg fov.
    return {
        Size.ECU: 0.35,
        Size.BCU: 0.55,
        Size.CU: 0.8,
        Size.MCU: 1.5,
        Size.MS: 2.5,
        Size.LS: 4.5,
        Size.ELS: 10.0,
    }


def _default_angle_height() -> dict[Angle, float]:
    # Camera height relative to the face point.
    return {Angle.LOW: -0.6, Angle.EYE: 0.0, Angle.HIGH: 1.2}


@dataclass(frozen=True)
class SolveMaps:
    """Tunable tables mapping spec enums onto world-space distances."""

    size_distance: dict[Size, float] = field(default_factory=_default_size_distance)
    angle_height: dict[Angle, float] = field(default_factory=_default_angle_height)
    fov: float = math.radians(50.0)  # vertical, radians
    aspect: float = 16.0 / 9.0

    def validate(self) -> None:
        ordered = [self.size_distance[s] for s in Size]
        if any(b <= a for a, b in zip(ordered, ordered[1:])):
            raise ValueError("size_distance must be strictly increasing ECU..ELS")
        if not 0.0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")

    @property
    def tan_half_hfov(self) -> float:
        return math.tan(self.fov / 2.0) * self.aspect


@dataclass(frozen=True)
class CameraPose:
    position: Vec3
    focus: Vec3
    fov: float
    up: Vec3 = UP


class ParseError(ValueError):
    """Raised on malformed spec text; carries the offending position and the
    keyword set that would have been accepted there."""

    def __init__(self, message: str, position: int, expected: frozenset[str]):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.expected = expected


def _keyword_table(pairs: dict[str, Enum]) -> dict[str, Enum]:
    return {k.lower().replace(" ", "").replace("/", ""): v for k, v in pairs.items()}


_ANGLE_KEYWORDS = _keyword_table({a.value: a for a in Angle})
_SIZE_KEYWORDS = _keyword_table({s.value: s for s in Size})
_PROFILE_KEYWORDS = _keyword_table({p.value: p for p in Profile})
_SCREEN_KEYWORDS = _keyword_table({s.value: s for s in Screen})


def _normalize_keyword(text: str) -> str:
    return text.lower().replace(" ", "").replace("/", "")


def _field_start(text: str, start: int, end: int) -> int:
    i = start
    while i < end and text[i].isspace():
        i += 1
    return i


def _lookup(text: str, start: int, end: int, table: dict[str, Enum], what: str) -> Enum:
    token = text[start:end].strip()
    key = _normalize_keyword(token)
    if key not in table:
        raise ParseError(
            f"unknown {what} keyword {token!r}",
            _field_start(text, start, end),
            frozenset(e.value for e in table.values()),
        )
    return table[key]


_ON_SEPARATOR = None  # computed lazily below


def parse(text: str) -> ShotSpec:
    """Parse spec text into a ShotSpec.

    Raises ParseError (with position and expected-token set) on unknown
    keywords, a missing ``on``, or trailing garbage.
    """
    comma1 = text.find(",")
    if comma1 < 0:
        raise ParseError("expected ','", len(text), frozenset({","}))
    comma2 = text.find(",", comma1 + 1)
    if comma2 < 0:
        raise ParseError("expected ','", len(text), frozenset({","}))

    angle = _lookup(text, 0, comma1, _ANGLE_KEYWORDS, "angle")
    size = _lookup(text, comma1 + 1, comma2, _SIZE_KEYWORDS, "size")

    rest_start = comma2 + 1
    match = _on_pattern().search(text, rest_start)
    if match is None:
        raise ParseError("expected 'on' after profile", len(text), frozenset({"on"}))
    profile = _lookup(text, rest_start, match.start(), _PROFILE_KEYWORDS, "profile")

    tail = text[match.end():]
    tail_offset = match.end()
    bracket = tail.find("[")
    if bracket < 0:
        subject = tail.strip()
        screen = Screen.CENTER
        if not subject:
            raise ParseError(
                "expected subject reference", tail_offset, frozenset({"<subject>"})
            )
    else:
        subject = tail[:bracket].strip()
        if not subject:
            raise ParseError(
                "expected subject reference", tail_offset, frozenset({"<subject>"})
            )
        close = tail.find("]", bracket + 1)
        if close < 0:
            raise ParseError(
                "unterminated screen bracket", tail_offset + bracket, frozenset({"]"})
            )
        screen = _lookup(
            text,
            tail_offset + bracket + 1,
            tail_offset + close,
            _SCREEN_KEYWORDS,
            "screen",
        )
        trailing = tail[close + 1:].strip()
        if trailing:
            raise ParseError(
                f"unexpected trailing text {trailing!r}",
                tail_offset + close + 1,
                frozenset(),
            )
    return ShotSpec(angle=angle, size=size, profile=profile, screen=screen, subject=subject)


def _on_pattern():
    global _ON_SEPARATOR
    if _ON_SEPARATOR is None:
        import re

        _ON_SEPARATOR = re.compile(r"\bon\b", re.IGNORECASE)
    return _ON_SEPARATOR


def format_spec(spec: ShotSpec) -> str:
    """Canonical text form; ``parse(format_spec(s)) == s``.

    The default Center screen is left implicit.
    """
    base = f"{spec.angle.value}, {spec.size.value}, {spec.profile.value} on {spec.subject}"
    if spec.screen is Screen.CENTER:
        return base
    return f"{base} [{spec.screen.value}]"


def subject_right(facing: Vec3) -> Vec3:
    """Horizontal unit vector pointing to the subject's right-hand side."""
    return (facing[1], -facing[0], 0.0)


def profile_direction(facing: Vec3, profile: Profile) -> Vec3:
    theta = PROFILE_BEARING[profile]
    right = subject_right(facing)
    return add(scale(facing, math.cos(theta)), scale(right, math.sin(theta)))


def _thirds_shift(camera: Vec3, face: Vec3, maps: SolveMaps) -> float:
    """Lateral focus shift (meters) that lands the face on a vertical third line.

    Derived from the exact projection: with the face at distance dA and the
    horizontal fraction a = |horizontal(face-camera)| / dA, the shift s solves
    a^2 s^4 + (a^2 - k^2) dA^2 s^2 - k^2 a^2 dA^4 = 0 for k = tan(hfov/2)/3.
    Reduces to s = k*dA for a level camera.
    """
    d = sub(face, camera)
    d_a = norm(d)
    a = math.hypot(d[0], d[1]) / d_a
    if a < 1e-9:
        raise GeometryError("camera is directly above the face point")
    k = maps.tan_half_hfov / 3.0
    a2, k2 = a * a, k * k
    s2 = d_a * d_a * (-(a2 - k2) + math.sqrt((a2 - k2) ** 2 + 4.0 * a2 * a2 * k2)) / (2.0 * a2)
    return math.sqrt(s2)


def solve(spec: ShotSpec, anchor: SubjectAnchor, maps: SolveMaps) -> CameraPose:
    """Place the camera for a spec around a subject anchor.

    Position: base point + profile bearing x size distance, height set from
    the face point by the angle map.  Focus: the face point, shifted
    perpendicular to the view so the face projects onto the screen-side third
    line (or dead center for Screen=Center).
    """
    flat = math.hypot(anchor.facing[0], anchor.facing[1])
    if flat < 1e-12:
        raise GeometryError("subject facing vector has zero horizontal length")
    facing = (anchor.facing[0] / flat, anchor.facing[1] / flat, 0.0)

    direction = profile_direction(facing, spec.profile)
    distance = maps.size_distance[spec.size]
    position = (
        anchor.base_point[0] + direction[0] * distance,
        anchor.base_point[1] + direction[1] * distance,
        anchor.face_point[2] + maps.angle_height[spec.angle],
    )

    face = anchor.face_point
    if spec.screen is Screen.CENTER:
        focus = face
    else:
        shift = _thirds_shift(position, face, maps)
        view = sub(face, position)
        lateral = normalize((view[1], -view[0], 0.0))  # camera-right, horizontal
        sign = 1.0 if spec.screen is Screen.LEFT else -1.0
        focus = add(face, scale(lateral, sign * shift))
    return CameraPose(position=position, focus=focus, fov=maps.fov)


def camera_basis(pose: CameraPose) -> tuple[Vec3, Vec3, Vec3]:
    """Orthonormal (forward, right, up) triad of a pose."""
    forward = normalize(sub(pose.focus, pose.position))
    right_raw = cross(forward, pose.up)
    if norm(right_raw) < 1e-9:
        # Looking straight along the up axis; fall back to world +y as reference.
        right_raw = cross(forward, (0.0, 1.0, 0.0))
    right = normalize(right_raw)
    cam_up = cross(right, forward)
    return forward, right, cam_up


def project(
    pose: CameraPose, point: Vec3, viewport: tuple[int, int] = (1920, 1080)
) -> tuple[tuple[float, float], bool]:
    """Perspective-project a world point; the flag is False outside the frustum."""
    w, h = viewport
    forward, right, cam_up = camera_basis(pose)
    rel = sub(point, pose.position)
    z_cam = dot(rel, forward)
    if z_cam <= 1e-12:
        return (math.nan, math.nan), False
    x_cam = dot(rel, right)
    y_cam = dot(rel, cam_up)
    tan_v = math.tan(pose.fov / 2.0)
    tan_h = tan_v * (w / h)
    px = w / 2.0 * (1.0 + (x_cam / z_cam) / tan_h)
    py = h / 2.0 * (1.0 - (y_cam / z_cam) / tan_v)
    visible = abs(x_cam / z_cam) <= tan_h and abs(y_cam / z_cam) <= tan_v
    return (px, py), visible


# The director's repertoire drops the three tightest sizes; animated faces
# carry too little detail for them.
TEMPLATE_SIZES = (Size.MCU, Size.MS, Size.LS, Size.ELS)

_TEMPLATES: tuple[ShotSpec, ...] = tuple(
    ShotSpec(angle=a, size=s, profile=p, screen=sc)
    for a, s, p, sc in itertools.product(Angle, TEMPLATE_SIZES, Profile, Screen)
)


def enumerate_specs() -> list[ShotSpec]:
    """All 288 angle x size x profile x screen templates, deterministic order."""
    return list(_TEMPLATES)
