"""Storyboard export: one SVG frame per hold phase of a shot log.

Hold-start records embed the avatar layout, so frames can be rebuilt from the
log alone: avatar billboards are projected through the same camera math the
engine used, with the thirds grid and the spec caption overlaid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .psl import CameraPose, project

VIEW_W, VIEW_H = 1920, 1080
FACE_HEIGHT_FACTOR = 0.92


@dataclass(frozen=True)
class HoldFrame:
    index: int
    t: float
    pose: CameraPose
    spec: str | None
    event_id: str | None
    avatars: tuple[dict, ...]


def hold_frames(log_path: str | Path) -> list[HoldFrame]:
    """First record of every contiguous hold run in the log."""
    frames: list[HoldFrame] = []
    previous_phase = None
    with Path(log_path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec["phase"] == "hold" and previous_phase != "hold":
                frames.append(
                    HoldFrame(
                        index=len(frames),
                        t=float(rec["t"]),
                        pose=CameraPose(
                            position=tuple(rec["pos"]),
                            focus=tuple(rec["focus"]),
                            fov=float(rec["fov"]),
                        ),
                        spec=rec.get("spec"),
                        event_id=rec.get("event_id"),
                        avatars=tuple(rec.get("avatars") or ()),
                    )
                )
            previous_phase = rec["phase"]
    return frames


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _subject_of(spec: str | None) -> str | None:
    if not spec:
        return None
    # Canonical spec text: "... on <subject> [Screen]".
    after = spec.split(" on ", 1)
    if len(after) != 2:
        return None
    return after[1].split("[", 1)[0].strip()


def render_frame_svg(frame: HoldFrame) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW_W}" height="{VIEW_H}" '
        f'viewBox="0 0 {VIEW_W} {VIEW_H}">',
        f'<rect x="0" y="0" width="{VIEW_W}" height="{VIEW_H}" fill="#182028"/>',
    ]
    # Thirds grid.
    for x in (VIEW_W / 3.0, 2.0 * VIEW_W / 3.0):
        parts.append(
            f'<line x1="{_fmt(x)}" y1="0" x2="{_fmt(x)}" y2="{VIEW_H}" '
            'stroke="#4d5a66" stroke-width="2"/>'
        )
    for y in (VIEW_H / 3.0, 2.0 * VIEW_H / 3.0):
        parts.append(
            f'<line x1="0" y1="{_fmt(y)}" x2="{VIEW_W}" y2="{_fmt(y)}" '
            'stroke="#4d5a66" stroke-width="2"/>'
        )

    subject_name = _subject_of(frame.spec)
    # Far avatars first so near billboards paint over them.
    def depth(av: dict) -> float:
        return -math.dist(
            (av["x"], av["y"], 0.0),
            (frame.pose.position[0], frame.pose.position[1], 0.0),
        )

    for av in sorted(frame.avatars, key=depth):
        height = float(av.get("height", 1.7))
        face = (av["x"], av["y"], FACE_HEIGHT_FACTOR * height)
        feet = (av["x"], av["y"], 0.0)
        head = (av["x"], av["y"], height)
        (face_x, _), face_visible = project(frame.pose, face, (VIEW_W, VIEW_H))
        if not face_visible:
            continue
        (_, top_y), _ = project(frame.pose, head, (VIEW_W, VIEW_H))
        (_, bottom_y), _ = project(frame.pose, feet, (VIEW_W, VIEW_H))
        if math.isnan(top_y) or math.isnan(bottom_y):
            continue
        h_px = max(4.0, bottom_y - top_y)
        w_px = h_px * 0.35
        name = f"npc_{av['id']}"
        fill = "#e0b44a" if name == subject_name else "#7aa5c4"
        parts.append(
            f'<rect x="{_fmt(face_x - w_px / 2.0)}" y="{_fmt(top_y)}" '
            f'width="{_fmt(w_px)}" height="{_fmt(h_px)}" fill="{fill}" '
            f'data-avatar="{av["id"]}" data-face-x="{_fmt(face_x)}"/>'
        )
        parts.append(
            f'<text x="{_fmt(face_x)}" y="{_fmt(top_y - 8.0)}" fill="#cfd8df" '
            f'font-size="24" text-anchor="middle">{name}</text>'
        )

    caption = frame.spec or "(no spec)"
    parts.append(
        f'<text x="24" y="{VIEW_H - 24}" fill="#f0f0f0" font-size="32">'
        f"t={_fmt(frame.t)}s  {caption}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts)


def export_storyboard(log_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Write hold_###.svg files; an event-free log yields no files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for frame in hold_frames(log_path):
        path = out / f"hold_{frame.index:03d}.svg"
        path.write_text(render_frame_svg(frame))
        written.append(path)
    return written
