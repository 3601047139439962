import asyncio
from dataclasses import replace
from random import Random

import pytest

from announcer.engine import Engine, EngineConfig
from announcer.server import AnnouncerServer, FrameError, encode_frame, read_frame


def config_with_seed(seed):
    return EngineConfig(world=replace(EngineConfig().world, seed=seed))


async def connect(port):
    return await asyncio.open_connection("127.0.0.1", port)


async def recv(reader, timeout=10.0):
    return await asyncio.wait_for(read_frame(reader), timeout)


async def recv_until(reader, predicate, limit=5000, timeout=10.0):
    for _ in range(limit):
        message = await recv(reader, timeout)
        if predicate(message):
            return message
    raise AssertionError("no matching message")


def run(coro):
    return asyncio.run(coro)


# -- framing ---------------------------------------------------------------------


def test_frame_roundtrip():
    async def scenario():
        reader = asyncio.StreamReader()
        reader.feed_data(encode_frame({"type": "x", "n": 3}))
        reader.feed_eof()
        return await read_frame(reader)

    assert run(scenario()) == {"type": "x", "n": 3}


def test_frame_rejects_length_bomb():
    async def scenario():
        reader = asyncio.StreamReader()
        reader.feed_data((2_000_000).to_bytes(4, "big") + b"xx")
        reader.feed_eof()
        with pytest.raises(FrameError):
            await read_frame(reader)

    run(scenario())


# -- broadcasting ------------------------------------------------------------------


def test_snapshots_stream_at_ten_hertz_with_gapless_seq():
    async def scenario():
        server = AnnouncerServer(config_with_seed(42), speed=50.0, duration=3.0)
        port = await server.start()
        reader, writer = await connect(port)
        try:
            messages = []
            while True:
                try:
                    messages.append(await asyncio.wait_for(read_frame(reader), 5.0))
                except (asyncio.TimeoutError, asyncio.IncompleteReadError):
                    break
                if len(messages) > 200:
                    break
            snapshots = [m for m in messages if m["type"] == "snapshot"]
            # 3 simulated seconds at 10 Hz.
            assert len(snapshots) >= 9
            seqs = [m["seq"] for m in messages]
            assert seqs == list(range(seqs[0], seqs[0] + len(seqs)))
            assert messages[0]["type"] == "hello"
            assert "world" in messages[0]
            assert messages[1]["type"] == "config"
            times = [s["t"] for s in snapshots]
            assert all(b > a for a, b in zip(times, times[1:]))
        finally:
            writer.close()
            await server.stop()

    run(scenario())


def test_feedback_speed_up_shrinks_transition_in_config_broadcast():
    async def scenario():
        server = AnnouncerServer(config_with_seed(42), speed=50.0, duration=30.0)
        port = await server.start()
        reader, writer = await connect(port)
        try:
            first_config = await recv_until(reader, lambda m: m["type"] == "config")
            writer.write(encode_frame({"type": "feedback", "kind": "speed_up"}))
            await writer.drain()
            updated = await recv_until(reader, lambda m: m["type"] == "config")
            assert updated["transition_duration"] == pytest.approx(
                first_config["transition_duration"] * 0.8
            )
        finally:
            writer.close()
            await server.stop()

    run(scenario())


def test_set_config_is_clamped_and_broadcast():
    async def scenario():
        server = AnnouncerServer(config_with_seed(42), speed=50.0, duration=30.0)
        port = await server.start()
        reader, writer = await connect(port)
        try:
            await recv_until(reader, lambda m: m["type"] == "config")
            writer.write(encode_frame({"type": "set_config", "transition_duration": 99.0}))
            await writer.drain()
            updated = await recv_until(reader, lambda m: m["type"] == "config")
            assert updated["transition_duration"] <= 5.0
        finally:
            writer.close()
            await server.stop()

    run(scenario())


def test_two_clients_receive_identical_sequences():
    async def scenario():
        server = AnnouncerServer(
            config_with_seed(42), speed=100.0, duration=2.0, wait_for_clients=2
        )
        port = await server.start()
        r1, w1 = await connect(port)
        r2, w2 = await connect(port)
        try:
            async def drain(reader):
                out = []
                while True:
                    try:
                        out.append(await asyncio.wait_for(read_frame(reader), 3.0))
                    except (asyncio.TimeoutError, asyncio.IncompleteReadError):
                        return out

            a, b = await asyncio.gather(drain(r1), drain(r2))
            assert len(a) > 5
            # The hello carries the per-connection session id; everything
            # after it (content and seq numbers) must match exactly.
            assert a[0]["type"] == b[0]["type"] == "hello"
            assert a[1:] == b[1:]
        finally:
            w1.close()
            w2.close()
            await server.stop()

    run(scenario())


def test_malformed_json_gets_error_reply_and_connection_survives():
    async def scenario():
        server = AnnouncerServer(config_with_seed(42), speed=100.0, duration=10.0)
        port = await server.start()
        reader, writer = await connect(port)
        try:
            payload = b"{broken"
            writer.write(len(payload).to_bytes(4, "big") + payload)
            writer.write(encode_frame({"type": "bogus_tag"}))
            writer.write(encode_frame({"type": "feedback", "kind": "slow_down"}))
            await writer.drain()
            errors = []
            config_after = None
            for _ in range(600):
                message = await recv(reader, 5.0)
                if message["type"] == "error":
                    errors.append(message)
                if message["type"] == "config" and message["transition_duration"] > 2.0:
                    config_after = message
                    break
            assert len(errors) >= 2  # bad JSON + unknown tag
            assert config_after is not None  # slow_down still processed
        finally:
            writer.close()
            await server.stop()

    run(scenario())


def test_protocol_fuzz_never_crashes_service():
    async def scenario():
        server = AnnouncerServer(config_with_seed(42), speed=200.0, duration=60.0)
        port = await server.start()
        rng = Random(1337)
        for _ in range(12):
            try:
                reader, writer = await connect(port)
                junk = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 400)))
                writer.write(junk)
                await writer.drain()
                writer.close()
            except ConnectionError:
                pass
        # Service must still answer a healthy client.
        reader, writer = await connect(port)
        try:
            snapshot = await recv_until(reader, lambda m: m["type"] == "snapshot")
            assert "avatars" in snapshot
        finally:
            writer.close()
            await server.stop()

    run(scenario())


def test_serve_snapshots_match_headless_poses():
    async def scenario():
        server = AnnouncerServer(config_with_seed(42), speed=200.0, duration=10.0)
        port = await server.start()
        reader, writer = await connect(port)
        snapshots = []
        try:
            while True:
                try:
                    message = await asyncio.wait_for(read_frame(reader), 5.0)
                except (asyncio.TimeoutError, asyncio.IncompleteReadError):
                    break
                if message["type"] == "snapshot":
                    snapshots.append(message)
        finally:
            writer.close()
            await server.stop()

        headless = Engine(config_with_seed(42))
        records = {round(r.t, 6): r for r in headless.run(10.0)}
        assert len(snapshots) >= 50
        for snap in snapshots:
            record = records[round(snap["t"], 6)]
            assert snap["camera"]["pos"] == list(record.pos)
            assert snap["camera"]["focus"] == list(record.focus)
            assert snap["camera"]["fov"] == record.fov

    run(scenario())
