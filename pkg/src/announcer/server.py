"""Live streaming gateway: length-delimited JSON over TCP.

Frame layout: 4-byte big-endian payload length, then UTF-8 JSON.  Outbound
messages carry a per-connection `seq` that increases without gaps.  Inbound
messages are `feedback` and `set_config`; anything malformed gets an `error`
reply on that connection and, when the framing itself is broken, the
connection is closed (there is no way to resynchronize a corrupt stream).

The simulation advances in one task; per-connection reader/writer tasks talk
to it only through queues, and a slow client loses old snapshots rather than
stalling the loop.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace

from .adapt import FeedbackEvent, FeedbackKind
from .engine import Engine, EngineConfig

log = logging.getLogger("announcer.server")

MAX_FRAME = 1_000_000
OUTBOX_LIMIT = 256
SNAPSHOT_HZ = 10

_DROPPABLE = frozenset({"snapshot", "error"})

_FEEDBACK_KINDS = {
    "comp_up": FeedbackKind.COMP_UP,
    "comp_down": FeedbackKind.COMP_DOWN,
    "speed_up": FeedbackKind.SPEED_UP,
    "slow_down": FeedbackKind.SLOW_DOWN,
}

_SETTABLE = ("transition_duration", "shot_duration", "f", "fetch_period")


class FrameError(Exception):
    """The length-delimited framing itself is broken; the stream cannot recover."""


def encode_frame(message: dict) -> bytes:
    payload = json.dumps(message, separators=(",", ":")).encode()
    return len(payload).to_bytes(4, "big") + payload


async def read_frame(reader: asyncio.StreamReader) -> dict:
    """Read one frame; FrameError means the stream is unrecoverable, while a
    json.JSONDecodeError leaves the framing intact."""
    header = await reader.readexactly(4)
    length = int.from_bytes(header, "big")
    if length == 0 or length > MAX_FRAME:
        raise FrameError(f"frame length {length} outside (0, {MAX_FRAME}]")
    payload = await reader.readexactly(length)
    try:
        return json.loads(payload.decode())
    except UnicodeDecodeError as exc:
        raise json.JSONDecodeError("payload is not UTF-8", "", 0) from exc


@dataclass
class _Client:
    session: str
    writer: asyncio.StreamWriter
    outbox: deque = field(default_factory=deque)
    wakeup: asyncio.Event = field(default_factory=asyncio.Event)
    seq: int = 0
    closed: bool = False

    def push(self, message: dict) -> None:
        if len(self.outbox) >= OUTBOX_LIMIT:
            # Keep the loop real-time for slow clients: shed stale snapshots
            # first, never an event/shot/config message.
            for i, queued in enumerate(self.outbox):
                if queued.get("type") in _DROPPABLE:
                    del self.outbox[i]
                    break
            else:
                if message.get("type") in _DROPPABLE:
                    return
        self.outbox.append(message)
        self.wakeup.set()


class AnnouncerServer:
    """Runs one engine and broadcasts its state to every connected viewer."""

    def __init__(
        self,
        config: EngineConfig,
        speed: float = 1.0,
        duration: float | None = None,
        wait_for_clients: int = 0,
    ):
        self.engine = Engine(config)
        self.speed = speed
        self.duration = duration
        self.wait_for_clients = wait_for_clients
        self._clients: list[_Client] = []
        self._session_seq = 0
        self._server: asyncio.base_events.Server | None = None
        self._sim_task: asyncio.Task | None = None
        self._snapshot_every = max(1, round(config.world.tick_rate / SNAPSHOT_HZ))

    # -- lifecycle -----------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        self._server = await asyncio.start_server(self._handle_client, host, port)
        self._sim_task = asyncio.create_task(self._sim_loop())
        return self._server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._sim_task is not None:
            self._sim_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await self._sim_task
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for client in list(self._clients):
            client.closed = True
            client.wakeup.set()

    async def serve_forever(self) -> None:
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    # -- simulation loop -------------------------------------------------------

    async def _sim_loop(self) -> None:
        while self.wait_for_clients and len(self._clients) < self.wait_for_clients:
            await asyncio.sleep(0.01)
        tick_wall = self.engine.dt / self.speed if self.speed > 0 else 0.0
        while self.duration is None or self.engine.time < self.duration - 1e-9:
            record = self.engine.tick()
            for message in self.engine.wire_events:
                self._broadcast(message)
            self.engine.wire_events.clear()
            if self.engine.tick_index % self._snapshot_every == 0:
                self._broadcast(self._snapshot(record))
            if tick_wall > 0:
                await asyncio.sleep(tick_wall)
            else:
                await asyncio.sleep(0)

    def _snapshot(self, record) -> dict:
        return {
            "type": "snapshot",
            "t": record.t,
            "avatars": [
                {
                    "id": av.id,
                    "pos": [av.position[0], av.position[1], av.position[2]],
                    "yaw": av.facing,
                    "phase": type(av.behavior).__name__.lower(),
                }
                for av in self.engine.world.avatars
            ],
            "camera": {
                "pos": list(record.pos),
                "focus": list(record.focus),
                "fov": record.fov,
                "mode": record.mode,
                "phase": record.phase,
            },
        }

    def _world_hello(self, session: str) -> dict:
        w = self.engine.config.world
        return {
            "type": "hello",
            "session": session,
            "world": {
                "bounds": [w.bounds.x0, w.bounds.y0, w.bounds.x1, w.bounds.y1],
                "pois": [{"name": p.name, "x": p.x, "y": p.y} for p in w.pois],
                "obstacles": [
                    {"x": b.x, "y": b.y, "w": b.w, "d": b.d, "h": b.h} for b in w.obstacles
                ],
            },
        }

    def _broadcast(self, message: dict) -> None:
        for client in self._clients:
            client.push(message)

    # -- per-connection tasks ---------------------------------------------------

    async def _handle_client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self._session_seq += 1
        client = _Client(session=f"s{self._session_seq:04d}", writer=writer)
        client.push(self._world_hello(client.session))
        client.push({"type": "config", "t": self.engine.time, **self.engine.qoe.as_dict()})
        self._clients.append(client)
        writer_task = asyncio.create_task(self._write_loop(client))
        try:
            await self._read_loop(reader, client)
        finally:
            client.closed = True
            client.wakeup.set()
            with contextlib.suppress(Exception):
                await writer_task
            if client in self._clients:
                self._clients.remove(client)
            with contextlib.suppress(Exception):
                writer.close()
                await writer.wait_closed()

    async def _read_loop(self, reader: asyncio.StreamReader, client: _Client) -> None:
        while True:
            try:
                message = await read_frame(reader)
            except (asyncio.IncompleteReadError, ConnectionError):
                return
            except FrameError:
                # Length bomb or zero frame: reply once and drop the link.
                client.push({"type": "error", "error": "bad frame"})
                return
            except json.JSONDecodeError:
                client.push({"type": "error", "error": "payload is not valid JSON"})
                continue
            try:
                self._dispatch(message, client)
            except Exception as exc:  # malformed but well-framed: stay open
                client.push({"type": "error", "error": str(exc)[:200]})

    def _dispatch(self, message: dict, client: _Client) -> None:
        if not isinstance(message, dict):
            raise ValueError("message must be a JSON object")
        tag = message.get("type")
        if tag == "feedback":
            kind = _FEEDBACK_KINDS.get(str(message.get("kind", "")).lower())
            if kind is None:
                raise ValueError(f"unknown feedback kind {message.get('kind')!r}")
            self.engine.submit_feedback(
                FeedbackEvent(
                    kind=kind,
                    timestamp=self.engine.time,
                    context=message.get("context"),
                    session=client.session,
                )
            )
        elif tag == "set_config":
            updates = {
                name: float(message[name]) for name in _SETTABLE if name in message
            }
            if not updates:
                raise ValueError("set_config carries no known field")
            self.engine.qoe = replace(self.engine.qoe, **updates).clamped()
            self._broadcast({"type": "config", "t": self.engine.time, **self.engine.qoe.as_dict()})
        else:
            raise ValueError(f"unknown message type {tag!r}")

    async def _write_loop(self, client: _Client) -> None:
        while True:
            while not client.outbox:
                if client.closed:
                    return
                client.wakeup.clear()
                try:
                    await asyncio.wait_for(client.wakeup.wait(), timeout=0.5)
                except asyncio.TimeoutError:
                    continue
            message = client.outbox.popleft()
            # Broadcast messages are shared across clients; stamp a copy.
            stamped = {**message, "seq": client.seq}
            client.seq += 1
            try:
                client.writer.write(encode_frame(stamped))
                await client.writer.drain()
            except (ConnectionError, RuntimeError):
                client.closed = True
                return


async def serve(
    config: EngineConfig,
    host: str = "127.0.0.1",
    port: int = 7654,
    speed: float = 1.0,
    duration: float | None = None,
) -> None:
    server = AnnouncerServer(config, speed=speed, duration=duration)
    bound = await server.start(host, port)
    log.info("serving on %s:%d", host, bound)
    try:
        await server.serve_forever()
    finally:
        await server.stop()
        server.engine.save_preferences()
