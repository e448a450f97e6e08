"""Session orchestration: step caps, scoring, frames and episode logs.

One session owns one mutable world. Every executed robot action costs a
step, decrements the score and yields exactly one metadata frame; the
session also emits one frame at start. Failed actions additionally
consume a failed-step token. The session terminates as Succeeded the
moment every subgoal holds, or as Failed when either cap is reached.

Episode logs are newline-delimited JSON: a header record embedding the
mission definition, then alternating action/frame records plus any
utterance/highlight events, all in canonical key order so identical
sessions produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .affordance import ActionResult, InteractionAction, RuleSet, default_rules, apply as apply_interaction
from .cdf import CDF, build_world, goal_status, parse_cdf
from .errors import ReplayDivergence, SessionTerminated, UnknownInstance, ValidationError
from .nav import NavAction, execute_nav, look_around
from .scene import Catalog, Location, ObjectInstance, ObjectState, WorldState, validate_world

LOG_VERSION = 1


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class SessionConfig:
    max_steps: int = 50
    max_failed: int = 10
    score0: int = 1000
    score_decrement: int = 1
    fov_deg: float = 90.0
    obs_range: int = 12
    validate_each_step: bool = False

    def to_json(self) -> dict:
        return {
            "max_steps": self.max_steps, "max_failed": self.max_failed,
            "score0": self.score0, "score_decrement": self.score_decrement,
            "fov_deg": self.fov_deg, "obs_range": self.obs_range,
        }


@dataclass
class MetadataFrame:
    tick: int
    agent: dict
    observation: list
    goal_condition_status: dict
    last_action_result: dict
    score: int
    phase: str
    steps_used: int
    failed_steps: int
    render: dict
    panorama: dict | None = None

    def to_json(self) -> dict:
        out = {
            "tick": self.tick,
            "agent": self.agent,
            "observation": self.observation,
            "goal_condition_status": self.goal_condition_status,
            "last_action_result": self.last_action_result,
            "score": self.score,
            "phase": self.phase,
            "steps_used": self.steps_used,
            "failed_steps": self.failed_steps,
            "render": self.render,
        }
        if self.panorama is not None:
            out["panorama"] = self.panorama
        return out


@dataclass
class SessionState:
    cdf: CDF
    config: SessionConfig
    world: WorldState
    rules: RuleSet
    steps_used: int = 0
    failed_steps: int = 0
    score: int = 0
    subgoal_status: list[bool] = field(default_factory=list)
    goal_m: int = 0
    phase: str = "Running"
    records: list[dict] = field(default_factory=list)
    seed: int = 0
    read_notes: set[str] = field(default_factory=set)

    @property
    def frames(self) -> list[dict]:
        return [r["frame"] for r in self.records if r["type"] == "frame"]


_BADGE_FLAGS = ("open", "broken", "dirty", "hot", "cold", "toggled_on", "cooked")


def _render_payload(session: SessionState) -> dict:
    world = session.world
    layout = world.layout
    walls = []
    for y in range(layout.height):
        for x in range(layout.width):
            if layout.occupancy[y, x]:
                walls.append([x, y])
    objects = []
    for iid in sorted(world.objects):
        inst = world.objects[iid]
        cell = world.resolved_cell(iid)
        badges = [f for f in _BADGE_FLAGS if getattr(inst.state, f)]
        if inst.state.filled_with:
            badges.append(f"filled:{inst.state.filled_with}")
        objects.append({
            "instance_id": iid,
            "class_id": inst.class_id,
            "cell": list(cell) if cell else None,
            "held": inst.location.kind == "held",
            "hidden": world.hidden_in_closed_container(iid) if cell else False,
            "color": world.effective_color(iid),
            "badges": badges,
        })
    notes = []
    for iid in sorted(world.objects):
        inst = world.objects[iid]
        if inst.class_id == "sticky_note":
            cell = world.resolved_cell(iid)
            notes.append({"instance_id": iid, "cell": list(cell) if cell else None,
                          "read": iid in session.read_notes})
    return {
        "size": [layout.width, layout.height],
        "rooms": [{"name": n, "rect": list(r)} for n, r in sorted(layout.rooms.items())],
        "walls": walls,
        "viewpoints": [{"name": v.name, "cell": list(v.cell)} for v in layout.viewpoints],
        "agent": {"cell": list(world.agent.cell), "heading": world.agent.heading,
                  "held": world.agent.held},
        "objects": objects,
        "sticky_notes": notes,
    }


def _frame(session: SessionState, result: ActionResult,
           panorama: dict | None = None) -> MetadataFrame:
    world = session.world
    subgoals, m = goal_status(world, session.cdf.goals)
    session.subgoal_status = subgoals
    session.goal_m = m
    return MetadataFrame(
        tick=world.tick,
        agent={"cell": list(world.agent.cell), "heading": world.agent.heading,
               "held": world.agent.held, "room": world.agent_room()},
        observation=_observe(session),
        goal_condition_status={"subgoals": subgoals, "m": m},
        last_action_result=result.to_json(),
        score=session.score,
        phase=session.phase,
        steps_used=session.steps_used,
        failed_steps=session.failed_steps,
        render=_render_payload(session),
        panorama=panorama,
    )


def _observe(session: SessionState) -> list:
    from .scene import symbolic_observation
    return symbolic_observation(session.world, session.world.agent.heading,
                                session.config.fov_deg, session.config.obs_range)


def _record_frame(session: SessionState, frame: MetadataFrame) -> None:
    session.records.append({"type": "frame", "frame": frame.to_json()})


def _place_sticky_notes(world: WorldState, cdf: CDF) -> None:
    from .affordance import _next_instance_id
    for i, slot in enumerate(world.layout.sticky_notes):
        text = cdf.hints[i] if i < len(cdf.hints) else slot["text"]
        iid = _next_instance_id(world, "sticky_note")
        world.objects[iid] = ObjectInstance(
            iid, "sticky_note", Location.at(slot["cell"]), ObjectState(), None, text)


def start(cdf: CDF, config: SessionConfig | None = None, catalog: Catalog | None = None,
          rules: RuleSet | None = None, layout=None, seed: int = 0) -> SessionState:
    """Build the initial world and emit frame zero."""
    config = config or SessionConfig()
    world = build_world(cdf, catalog=catalog, layout=layout)
    _place_sticky_notes(world, cdf)
    validate_world(world)
    session = SessionState(cdf=cdf, config=config, world=world,
                           rules=rules or default_rules(), score=config.score0,
                           seed=seed)
    subgoals, m = goal_status(world, cdf.goals)
    session.subgoal_status = subgoals
    session.goal_m = m
    if m == 1:
        session.phase = "Succeeded"
    frame = _frame(session, ActionResult(True, None, "session started"))
    _record_frame(session, frame)
    return session


def step(session: SessionState, action: NavAction | InteractionAction) -> tuple[SessionState, MetadataFrame]:
    """Execute one robot action; exactly one frame comes back."""
    if session.phase != "Running":
        raise SessionTerminated(f"session phase is {session.phase}")

    panorama = None
    if isinstance(action, NavAction):
        new_world, result, _steps = execute_nav(session.world, action, session.rules)
        if action.kind == "LookAround" and result.success:
            panorama = look_around(new_world, session.config.fov_deg,
                                   session.config.obs_range)
    elif isinstance(action, InteractionAction):
        new_world, result = apply_interaction(session.world, action, session.rules)
        target = session.world.objects.get(action.target)
        if (action.verb == "Examine" and result.success and target is not None
                and target.class_id == "sticky_note"):
            session.read_notes.add(action.target)
    else:
        raise ValidationError(f"not an action: {action!r}")

    session.world = new_world
    if session.config.validate_each_step:
        validate_world(session.world)
    session.steps_used += 1
    if not result.success:
        session.failed_steps += 1
    session.score = max(0, session.score - session.config.score_decrement)

    subgoals, m = goal_status(session.world, session.cdf.goals)
    session.subgoal_status = subgoals
    session.goal_m = m
    if m == 1:
        session.phase = "Succeeded"
    elif session.failed_steps >= session.config.max_failed:
        session.phase = "Failed"
    elif session.steps_used >= session.config.max_steps:
        session.phase = "Failed"

    session.records.append({"type": "action", "action": action.to_json(),
                            "result": result.to_json()})
    frame = _frame(session, result, panorama)
    _record_frame(session, frame)
    return session, frame


def abort(session: SessionState) -> SessionState:
    if session.phase == "Running":
        session.phase = "Aborted"
        session.records.append({"type": "abort"})
    return session


# ---------------------------------------------------------------------------
# user events
# ---------------------------------------------------------------------------

def user_event(session: SessionState, event: dict) -> tuple[SessionState, dict | None, MetadataFrame]:
    """Handle a user-side event.

    Utterances are transcript-only; examining a sticky note costs one
    robot action; highlight requests are free.
    """
    if session.phase != "Running":
        raise SessionTerminated(f"session phase is {session.phase}")
    kind = event.get("kind")
    if kind == "utterance":
        session.records.append({"type": "utterance", "speaker": event.get("speaker", "user"),
                                "text": event.get("text", "")})
        return session, None, _frame(session, ActionResult(True, None, "utterance recorded"))
    if kind == "examine_note":
        iid = event.get("instance_id", "")
        session, frame = step(session, InteractionAction("Examine", iid))
        out = None
        if frame.last_action_result["success"]:
            out = {"type": "dialog", "speaker": "robot",
                   "text": frame.last_action_result["message"]}
        return session, out, frame
    if kind == "request_highlight":
        iid = event.get("instance_id", "")
        if iid not in session.world.objects:
            raise UnknownInstance(f"no instance {iid!r}")
        session.records.append({"type": "highlight", "instance_id": iid})
        out = {"type": "highlight", "instance_id": iid}
        return session, out, _frame(session, ActionResult(True, None, "highlight"))
    raise ValidationError(f"unknown user event {kind!r}")


def record_dialog(session: SessionState, speaker: str, text: str) -> None:
    session.records.append({"type": "utterance", "speaker": speaker, "text": text})


# ---------------------------------------------------------------------------
# episode logs
# ---------------------------------------------------------------------------

def episode_log_lines(session: SessionState) -> list[str]:
    header = {
        "type": "header",
        "log_version": LOG_VERSION,
        "cdf_id": session.cdf.cdf_id,
        "task_type": session.cdf.task_type,
        "seed": session.seed,
        "config": session.config.to_json(),
        "cdf": session.cdf.to_json(),
    }
    lines = [canonical_json(header)]
    lines.extend(canonical_json(r) for r in session.records)
    tail = {
        "type": "final",
        "m": session.goal_m,
        "phase": session.phase,
        "steps_used": session.steps_used,
        "failed_steps": session.failed_steps,
        "score": session.score,
    }
    lines.append(canonical_json(tail))
    return lines


def write_episode_log(session: SessionState, path) -> None:
    from .util import atomic_write_text
    atomic_write_text(path, "\n".join(episode_log_lines(session)) + "\n")


def _action_from_json(doc: dict):
    if doc.get("type") == "nav":
        return NavAction.from_json(doc)
    return InteractionAction.from_json(doc)


def read_episode_log(lines) -> tuple[dict, list[dict], dict]:
    if isinstance(lines, str):
        lines = [ln for ln in lines.splitlines() if ln.strip()]
    try:
        records = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad episode log line: {exc}") from exc
    if not records or records[0].get("type") != "header":
        raise ValidationError("episode log must start with a header record")
    if records[-1].get("type") != "final":
        raise ValidationError("episode log must end with a final record")
    return records[0], records[1:-1], records[-1]


def replay_episode_log(lines, catalog: Catalog | None = None,
                       rules: RuleSet | None = None, layout=None) -> SessionState:
    """Re-run a log from its embedded mission; frames must match bit for bit."""
    header, body, final = read_episode_log(lines)
    cdf = parse_cdf(header["cdf"], catalog=catalog, layout=layout)
    cfg = header.get("config", {})
    config = SessionConfig(
        max_steps=cfg.get("max_steps", 50), max_failed=cfg.get("max_failed", 10),
        score0=cfg.get("score0", 1000), score_decrement=cfg.get("score_decrement", 1),
        fov_deg=cfg.get("fov_deg", 90.0), obs_range=cfg.get("obs_range", 12),
    )
    session = start(cdf, config, catalog=catalog, rules=rules, layout=layout,
                    seed=header.get("seed", 0))
    replayed = iter(session.records)
    produced = [next(replayed)]
    for rec in body:
        rtype = rec.get("type")
        if rtype == "frame":
            if not produced or produced[0]["type"] != "frame":
                raise ReplayDivergence("log contains a frame the replay did not produce")
            got = produced.pop(0)
            if canonical_json(got) != canonical_json(rec):
                raise ReplayDivergence(f"frame mismatch at tick {rec['frame'].get('tick')}")
        elif rtype == "action":
            if produced:
                raise ReplayDivergence("unconsumed replay records before action")
            action = _action_from_json(rec["action"])
            before = len(session.records)
            try:
                session, _ = step(session, action)
            except SessionTerminated as exc:
                raise ReplayDivergence(f"step after termination: {exc}") from exc
            new_records = session.records[before:]
            got_action = new_records[0]
            if canonical_json(got_action) != canonical_json(rec):
                raise ReplayDivergence(
                    f"action result mismatch at step {session.steps_used}")
            produced = list(new_records[1:])
        elif rtype == "utterance":
            session.records.append(dict(rec))
            if produced:
                raise ReplayDivergence("unconsumed replay records before utterance")
        elif rtype == "highlight":
            session.records.append(dict(rec))
        elif rtype == "abort":
            session = abort(session)
        else:
            raise ReplayDivergence(f"unknown record type {rtype!r}")
    if produced:
        raise ReplayDivergence("replay produced trailing records missing from the log")
    got_final = {"m": session.goal_m, "phase": session.phase,
                 "steps_used": session.steps_used,
                 "failed_steps": session.failed_steps, "score": session.score}
    for key, val in got_final.items():
        if final.get(key) != val:
            raise ReplayDivergence(
                f"final record disagrees on {key}: log {final.get(key)!r} vs replay {val!r}")
    return session
