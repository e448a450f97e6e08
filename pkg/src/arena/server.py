"""WebSocket session service.

One process hosts many independent sessions. Every message about a
session is handled under that session's lock, so all subscribers of a
session observe the same ordered stream of broadcast messages (frames,
dialog, goal status, score, highlights, termination). Malformed input
of any shape yields a typed error response, never a dropped connection
or a crash.

Envelope (JSON text frames, see docs/protocol.md):

    client -> server: {"protocol_version", "seq", "type", "session_id"?, "payload"?}
    server -> client: {"protocol_version", "seq", "ack"?, "session_id"?, "type", "payload"}

Client seq must be strictly increasing per connection; every client
message is acknowledged by at least one server message echoing it in
``ack``. Broadcast messages consume one per-session seq delivered
identically to every subscriber.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .affordance import InteractionAction
from .agent import agent_for
from .cdf import parse_cdf
from .errors import ArenaError, SessionTerminated, UnparsableInstruction
from .nav import NavAction
from .runtime import (SessionConfig, SessionState, abort, canonical_json,
                      episode_log_lines, start, user_event)
from .util import atomic_write_text

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 1 << 20

CLIENT_TYPES = ("start_mission", "subscribe", "action", "utterance",
                "examine_note", "request_highlight", "abort")


@dataclass
class _Slot:
    session_id: str
    session: SessionState
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    subscribers: list = field(default_factory=list)
    out_seq: int = 0
    cursor: int = 0  # session.records already broadcast
    log_written: bool = False


class ArenaServer:
    def __init__(self, session_limit: int = 32, agent_enabled: bool = True,
                 log_dir: str | Path | None = None,
                 mission_dir: str | Path | None = None,
                 config: SessionConfig | None = None):
        self.session_limit = session_limit
        self.agent_enabled = agent_enabled
        self.log_dir = Path(log_dir) if log_dir else None
        self.mission_dir = Path(mission_dir) if mission_dir else None
        self.config = config or SessionConfig()
        self.slots: dict[str, _Slot] = {}
        self._next_session = 0

    # -- plumbing -------------------------------------------------------------

    def _new_session_id(self) -> str:
        self._next_session += 1
        return f"s{self._next_session:04d}"

    async def _send(self, ws, doc: dict) -> None:
        try:
            await ws.send(canonical_json(doc))
        except Exception:
            pass  # subscriber gone; cleanup happens in the handler

    async def _reply(self, ws, conn, mtype: str, payload: dict, ack=None,
                     session_id=None) -> None:
        conn["out_seq"] += 1
        doc = {"protocol_version": PROTOCOL_VERSION, "seq": conn["out_seq"],
               "type": mtype, "payload": payload}
        if ack is not None:
            doc["ack"] = ack
        if session_id is not None:
            doc["session_id"] = session_id
        await self._send(ws, doc)

    async def _error(self, ws, conn, code: str, message: str, ack=None,
                     session_id=None) -> None:
        await self._reply(ws, conn, "error", {"code": code, "message": message},
                          ack=ack, session_id=session_id)

    async def _broadcast(self, slot: _Slot, mtype: str, payload: dict) -> None:
        slot.out_seq += 1
        doc = {"protocol_version": PROTOCOL_VERSION, "seq": slot.out_seq,
               "session_id": slot.session_id, "type": mtype, "payload": payload}
        for ws in list(slot.subscribers):
            await self._send(ws, doc)

    async def _flush_records(self, slot: _Slot) -> None:
        """Broadcast session records appended since the last flush."""
        records = slot.session.records
        while slot.cursor < len(records):
            rec = records[slot.cursor]
            slot.cursor += 1
            rtype = rec["type"]
            if rtype == "frame":
                frame = rec["frame"]
                await self._broadcast(slot, "frame", frame)
                await self._broadcast(slot, "goal_status", frame["goal_condition_status"])
                await self._broadcast(slot, "score", {"score": frame["score"]})
            elif rtype == "utterance":
                await self._broadcast(slot, "dialog",
                                      {"speaker": rec["speaker"], "text": rec["text"]})
            elif rtype == "highlight":
                await self._broadcast(slot, "highlight",
                                      {"instance_id": rec["instance_id"]})
        if slot.session.phase != "Running":
            await self._broadcast(slot, "terminated",
                                  {"phase": slot.session.phase,
                                   "m": slot.session.goal_m})
            self._persist_log(slot)

    def _persist_log(self, slot: _Slot) -> None:
        if self.log_dir is None or slot.log_written:
            return
        slot.log_written = True
        stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
        path = (self.log_dir / slot.session.cdf.cdf_id /
                f"{stamp}_{slot.session_id}.jsonl")
        atomic_write_text(path, "\n".join(episode_log_lines(slot.session)) + "\n")

    # -- message handling -------------------------------------------------------

    async def handle_connection(self, ws) -> None:
        conn = {"out_seq": 0, "last_client_seq": 0}
        try:
            async for raw in ws:
                await self._handle_raw(ws, conn, raw)
        except Exception:
            pass
        finally:
            for slot in self.slots.values():
                if ws in slot.subscribers:
                    slot.subscribers.remove(ws)

    async def _handle_raw(self, ws, conn, raw) -> None:
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                await self._error(ws, conn, "BadMessage", "binary frame is not UTF-8")
                return
        if len(raw) > MAX_MESSAGE_BYTES:
            await self._error(ws, conn, "BadMessage", "message too large")
            return
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            await self._error(ws, conn, "BadMessage", f"not JSON: {exc}")
            return
        if not isinstance(doc, dict):
            await self._error(ws, conn, "BadMessage", "envelope must be an object")
            return
        seq = doc.get("seq")
        if not isinstance(seq, int) or isinstance(seq, bool):
            await self._error(ws, conn, "BadMessage", "seq must be an integer")
            return
        if seq <= conn["last_client_seq"]:
            await self._error(ws, conn, "BadMessage",
                              f"seq {seq} is not strictly increasing", ack=seq)
            return
        conn["last_client_seq"] = seq
        mtype = doc.get("type")
        if mtype not in CLIENT_TYPES:
            await self._error(ws, conn, "BadMessage", f"unknown type {mtype!r}", ack=seq)
            return
        payload = doc.get("payload")
        if payload is None:
            payload = {}
        if not isinstance(payload, dict):
            await self._error(ws, conn, "BadMessage", "payload must be an object", ack=seq)
            return
        try:
            await self._dispatch(ws, conn, mtype, doc, payload, seq)
        except SessionTerminated as exc:
            await self._error(ws, conn, "SessionTerminated", str(exc), ack=seq,
                              session_id=doc.get("session_id"))
        except UnparsableInstruction as exc:
            await self._error(ws, conn, "UnparsableInstruction", str(exc), ack=seq,
                              session_id=doc.get("session_id"))
        except ArenaError as exc:
            await self._error(ws, conn, type(exc).__name__, str(exc), ack=seq,
                              session_id=doc.get("session_id"))
        except Exception as exc:  # noqa: BLE001 - protocol robustness
            await self._error(ws, conn, "BadMessage", f"{type(exc).__name__}: {exc}",
                              ack=seq, session_id=doc.get("session_id"))

    def _slot_for(self, doc: dict) -> _Slot | None:
        return self.slots.get(doc.get("session_id"))

    async def _dispatch(self, ws, conn, mtype, doc, payload, seq) -> None:
        if mtype == "start_mission":
            await self._start_mission(ws, conn, payload, seq)
            return
        slot = self._slot_for(doc)
        if slot is None:
            await self._error(ws, conn, "UnknownSession",
                              f"no session {doc.get('session_id')!r}", ack=seq)
            return
        async with slot.lock:
            if mtype == "subscribe":
                if ws not in slot.subscribers:
                    slot.subscribers.append(ws)
                frames = slot.session.frames
                await self._reply(ws, conn, "frame", frames[-1], ack=seq,
                                  session_id=slot.session_id)
                return
            if mtype == "action":
                from .runtime import step
                action_doc = payload.get("action")
                if not isinstance(action_doc, dict):
                    await self._error(ws, conn, "BadMessage", "payload.action missing",
                                      ack=seq, session_id=slot.session_id)
                    return
                action = self._parse_action(action_doc)
                await self._reply(ws, conn, "ack", {"accepted": True}, ack=seq,
                                  session_id=slot.session_id)
                step(slot.session, action)
                await self._flush_records(slot)
                return
            if mtype == "utterance":
                text = payload.get("text")
                if not isinstance(text, str):
                    await self._error(ws, conn, "BadMessage", "payload.text missing",
                                      ack=seq, session_id=slot.session_id)
                    return
                if slot.session.phase != "Running":
                    raise SessionTerminated(
                        f"session phase is {slot.session.phase}")
                await self._reply(ws, conn, "ack", {"accepted": True}, ack=seq,
                                  session_id=slot.session_id)
                if self.agent_enabled:
                    agent_for(slot.session).handle(text)
                else:
                    from .runtime import record_dialog
                    record_dialog(slot.session, "user", text)
                await self._flush_records(slot)
                return
            if mtype == "examine_note":
                _, out, _ = user_event(slot.session,
                                       {"kind": "examine_note",
                                        "instance_id": payload.get("instance_id", "")})
                await self._reply(ws, conn, "ack", {"accepted": True}, ack=seq,
                                  session_id=slot.session_id)
                if out is not None:
                    from .runtime import record_dialog
                    record_dialog(slot.session, "robot", out["text"])
                await self._flush_records(slot)
                return
            if mtype == "request_highlight":
                _, out, _ = user_event(slot.session,
                                       {"kind": "request_highlight",
                                        "instance_id": payload.get("instance_id", "")})
                await self._reply(ws, conn, "ack", {"accepted": True}, ack=seq,
                                  session_id=slot.session_id)
                await self._flush_records(slot)
                return
            if mtype == "abort":
                abort(slot.session)
                await self._reply(ws, conn, "ack", {"accepted": True}, ack=seq,
                                  session_id=slot.session_id)
                await self._flush_records(slot)
                return

    def _parse_action(self, doc: dict):
        if doc.get("type") == "nav":
            return NavAction.from_json(doc)
        if doc.get("type") == "interaction":
            return InteractionAction.from_json(doc)
        raise ArenaError(f"action type must be nav or interaction, got {doc.get('type')!r}")

    async def _start_mission(self, ws, conn, payload, seq) -> None:
        if len(self.slots) >= self.session_limit:
            await self._error(ws, conn, "SessionLimit",
                              f"server holds {self.session_limit} sessions", ack=seq)
            return
        if "cdf" in payload:
            cdf = parse_cdf(payload["cdf"])
        elif "cdf_id" in payload and self.mission_dir is not None:
            cdf_id = str(payload["cdf_id"])
            path = (self.mission_dir / f"{cdf_id}.json").resolve()
            if path.parent != self.mission_dir.resolve() or not path.exists():
                await self._error(ws, conn, "UnknownSession",
                                  f"no mission file {cdf_id!r}", ack=seq)
                return
            cdf = parse_cdf(path.read_text(encoding="utf-8"))
        else:
            await self._error(ws, conn, "BadMessage",
                              "payload needs cdf or cdf_id", ack=seq)
            return
        session = start(cdf, self.config)
        session_id = self._new_session_id()
        slot = _Slot(session_id=session_id, session=session)
        slot.subscribers.append(ws)
        self.slots[session_id] = slot
        async with slot.lock:
            await self._reply(ws, conn, "session_started",
                              {"session_id": session_id, "cdf_id": cdf.cdf_id,
                               "mission_description": cdf.mission_description,
                               "subgoal_descriptions": list(cdf.subgoal_descriptions)},
                              ack=seq)
            await self._flush_records(slot)


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

async def serve_async(server: ArenaServer, host: str, port: int):
    import websockets

    return await websockets.serve(server.handle_connection, host, port,
                                  max_size=MAX_MESSAGE_BYTES * 2)


def serve_forever(server: ArenaServer, host: str, port: int) -> None:
    async def main():
        ws_server = await serve_async(server, host, port)
        bound = ws_server.sockets[0].getsockname()
        print(f"arena server listening on ws://{bound[0]}:{bound[1]}", flush=True)
        await asyncio.Future()

    asyncio.run(main())


class ServerThread:
    """Run a server on a background thread; used by tests and tooling."""

    def __init__(self, server: ArenaServer | None = None, host: str = "127.0.0.1",
                 port: int = 0):
        self.server = server or ArenaServer()
        self.host = host
        self.port = port
        self._loop = None
        self._thread = None
        self._started = threading.Event()

    def __enter__(self):
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=10):
            raise RuntimeError("server thread did not start")
        return self

    def _run(self):
        self._loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self._loop)

        async def main():
            ws_server = await serve_async(self.server, self.host, self.port)
            self.port = ws_server.sockets[0].getsockname()[1]
            self._started.set()
            await asyncio.Future()

        try:
            self._loop.run_until_complete(main())
        except asyncio.CancelledError:
            pass
        except RuntimeError:
            pass

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    def __exit__(self, *exc):
        if self._loop is not None:
            self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=5)
        return False
