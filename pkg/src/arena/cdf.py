"""Mission definition files: parse, validate, canonical serialization, goals.

A mission file is UTF-8 JSON with a versioned ``cdf_version`` field.
Canonical serialization sorts keys, indents with two spaces and ends
with a single LF, so equal missions serialize to identical bytes.

Goal conditions are predicates over world state. A target reference is
an instance id when one exists in the scene, otherwise a class id that
any instance of the class may satisfy (existential).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

from .data_files import default_catalog, default_layout
from .errors import ParseError, UnknownReference, ValidationError
from .scene import (AgentState, Catalog, Location, ObjectInstance, ObjectState,
                    SceneLayout, WorldState, validate_world)

CDF_VERSION = 1

TASK_TYPES = (
    "pickup&deliver", "heat&deliver", "freeze&deliver", "repair&deliver",
    "fill&deliver", "color&deliver", "clean&deliver", "pourContainer",
    "breakObject", "insertInDevice", "toggleDevice", "scanObject",
)

PREDICATES = ("state_is", "located", "holding", "filled", "colored", "scanned", "toggled")


def canonical_json_bytes(doc) -> bytes:
    return (json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


@dataclass(frozen=True)
class GoalCondition:
    predicate: str
    target: str
    flag: str | None = None        # state_is
    value: bool = True             # state_is / toggled
    receptacle: str | None = None  # located
    room: str | None = None        # located
    liquid: str | None = None      # filled (None = must be empty)
    color: str | None = None       # colored

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise ValidationError(f"unknown goal predicate {self.predicate!r}")
        if self.predicate == "state_is" and not self.flag:
            raise ValidationError("state_is goal needs a flag")
        if self.predicate == "located" and not (self.receptacle or self.room):
            raise ValidationError("located goal needs a receptacle or room")
        if self.predicate == "colored" and not self.color:
            raise ValidationError("colored goal needs a color")

    def to_json(self) -> dict:
        out = {"predicate": self.predicate, "target": self.target}
        if self.predicate == "state_is":
            out["flag"] = self.flag
            out["value"] = self.value
        elif self.predicate == "located":
            if self.receptacle:
                out["receptacle"] = self.receptacle
            else:
                out["room"] = self.room
        elif self.predicate == "filled":
            out["liquid"] = self.liquid
        elif self.predicate == "colored":
            out["color"] = self.color
        elif self.predicate == "toggled":
            out["value"] = self.value
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "GoalCondition":
        return cls(
            predicate=doc.get("predicate", ""),
            target=doc.get("target", ""),
            flag=doc.get("flag"),
            value=doc.get("value", True),
            receptacle=doc.get("receptacle"),
            room=doc.get("room"),
            liquid=doc.get("liquid"),
            color=doc.get("color"),
        )


@dataclass(frozen=True)
class MissionSpec:
    task_type: str
    target_class: str | None = None  # None lets the sampler choose
    receptacle: str | None = None
    color: str | None = None
    liquid: str | None = None
    device_class: str | None = None

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise ValidationError(f"unknown task type {self.task_type!r}")


@dataclass
class Placement:
    instance_id: str
    class_id: str
    location: Location
    state: ObjectState = dc_field(default_factory=ObjectState)
    color_override: str | None = None

    def to_json(self) -> dict:
        out = {"instance_id": self.instance_id, "class_id": self.class_id,
               "location": self.location.to_json()}
        state = self.state.to_json()
        if state:
            out["state"] = state
        if self.color_override:
            out["color_override"] = self.color_override
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "Placement":
        return cls(
            instance_id=doc["instance_id"], class_id=doc["class_id"],
            location=Location.from_json(doc["location"]),
            state=ObjectState.from_json(doc.get("state", {})),
            color_override=doc.get("color_override"),
        )


@dataclass
class CDF:
    cdf_id: str
    layout_id: str
    agent_cell: tuple[int, int]
    agent_heading: str
    placements: list[Placement]
    goals: list[GoalCondition]
    mission_description: str
    subgoal_descriptions: list[str]
    hints: list[str] = dc_field(default_factory=list)
    prompts: list[str] = dc_field(default_factory=list)
    room_power_off: list[str] = dc_field(default_factory=list)
    task_type: str | None = None

    def to_json(self) -> dict:
        return {
            "cdf_version": CDF_VERSION,
            "cdf_id": self.cdf_id,
            "task_type": self.task_type,
            "scene": {
                "layout_id": self.layout_id,
                "agent": {"cell": list(self.agent_cell), "heading": self.agent_heading},
                "objects": [p.to_json() for p in self.placements],
                "room_power_off": sorted(self.room_power_off),
            },
            "goals": [g.to_json() for g in self.goals],
            "text": {
                "mission_description": self.mission_description,
                "subgoal_descriptions": list(self.subgoal_descriptions),
                "hints": list(self.hints),
                "prompts": list(self.prompts),
            },
        }


def serialize_cdf(cdf: CDF) -> bytes:
    """Canonical bytes; parse(serialize(x)) reproduces x."""
    return canonical_json_bytes(cdf.to_json())


def parse_cdf(data: bytes | str | dict, catalog: Catalog | None = None,
              layout: SceneLayout | None = None) -> CDF:
    """Parse and fully validate a mission definition.

    The referenced layout must exist (shipped layouts by default) and
    the assembled initial world must satisfy every scene invariant.
    """
    if isinstance(data, (bytes, str)):
        if not str(data).strip():
            raise ParseError("empty mission definition")
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad mission JSON: {exc}") from exc
    else:
        doc = data
    if not isinstance(doc, dict):
        raise ValidationError("mission definition must be a JSON object")
    if doc.get("cdf_version") != CDF_VERSION:
        raise ValidationError(f"unsupported cdf_version {doc.get('cdf_version')!r}")

    try:
        scene = doc["scene"]
        agent = scene["agent"]
        cdf = CDF(
            cdf_id=doc["cdf_id"],
            layout_id=scene["layout_id"],
            agent_cell=tuple(agent["cell"]),
            agent_heading=agent["heading"],
            placements=[Placement.from_json(p) for p in scene.get("objects", [])],
            goals=[GoalCondition.from_json(g) for g in doc.get("goals", [])],
            mission_description=doc.get("text", {}).get("mission_description", ""),
            subgoal_descriptions=list(doc.get("text", {}).get("subgoal_descriptions", [])),
            hints=list(doc.get("text", {}).get("hints", [])),
            prompts=list(doc.get("text", {}).get("prompts", [])),
            room_power_off=list(scene.get("room_power_off", [])),
            task_type=doc.get("task_type"),
        )
    except KeyError as exc:
        raise ValidationError(f"mission definition missing field {exc}") from exc

    if cdf.task_type is not None and cdf.task_type not in TASK_TYPES:
        raise ValidationError(f"unknown task_type {cdf.task_type!r}")
    if len(cdf.subgoal_descriptions) != len(cdf.goals):
        raise ValidationError(
            f"{len(cdf.goals)} goals but {len(cdf.subgoal_descriptions)} subgoal descriptions")

    world = build_world(cdf, catalog=catalog, layout=layout)
    for i, goal in enumerate(cdf.goals):
        try:
            _resolve_targets(world, goal.target)
        except UnknownReference as exc:
            raise ValidationError(f"goal {i}: {exc}") from exc
        if goal.receptacle is not None:
            try:
                _resolve_targets(world, goal.receptacle)
            except UnknownReference as exc:
                raise ValidationError(f"goal {i}: {exc}") from exc
        if goal.room is not None and goal.room not in world.layout.rooms:
            raise ValidationError(f"goal {i}: unknown room {goal.room!r}")
    return cdf


def build_world(cdf: CDF, catalog: Catalog | None = None,
                layout: SceneLayout | None = None) -> WorldState:
    """Assemble and validate the initial world for a mission."""
    catalog = catalog or default_catalog()
    if layout is None:
        try:
            layout = default_layout(cdf.layout_id)
        except FileNotFoundError as exc:
            raise ValidationError(str(exc)) from exc
    elif layout.layout_id != cdf.layout_id:
        raise ValidationError(
            f"mission wants layout {cdf.layout_id!r} but {layout.layout_id!r} was supplied")

    objects: dict[str, ObjectInstance] = {}
    held: str | None = None
    for p in cdf.placements:
        if p.instance_id in objects:
            raise ValidationError(f"duplicate instance_id {p.instance_id!r}")
        if p.class_id not in catalog:
            raise ValidationError(f"{p.instance_id}: unknown class {p.class_id!r}")
        objects[p.instance_id] = ObjectInstance(
            p.instance_id, p.class_id, p.location.copy(), p.state.copy(), p.color_override)
        if p.location.kind == "held":
            held = p.instance_id

    room_power = {room: True for room in layout.rooms}
    for room in cdf.room_power_off:
        if room not in room_power:
            raise ValidationError(f"room_power_off references unknown room {room!r}")
        room_power[room] = False

    world = WorldState(
        layout=layout, catalog=catalog, objects=objects,
        agent=AgentState(cell=cdf.agent_cell, heading=cdf.agent_heading, held=held),
        room_power=room_power,
    )
    validate_world(world)
    return world


# ---------------------------------------------------------------------------
# goal evaluation
# ---------------------------------------------------------------------------

def _resolve_targets(world: WorldState, ref: str) -> list[str]:
    """Instance ids a reference denotes: the instance itself, or every
    instance of the class when ref is a class id."""
    if ref in world.objects:
        return [ref]
    if ref in world.catalog:
        found = sorted(i for i, o in world.objects.items() if o.class_id == ref)
        if found:
            return found
        raise UnknownReference(f"no instance of class {ref!r} in scene")
    raise UnknownReference(f"{ref!r} is neither an instance nor a class in this scene")


def _located_ok(world: WorldState, iid: str, goal: GoalCondition) -> bool:
    if goal.room is not None:
        return world.room_of(iid) == goal.room
    receptacles = set(_resolve_targets(world, goal.receptacle))
    cur = world.objects[iid]
    while cur.location.kind in ("inside", "on"):
        if cur.location.ref in receptacles:
            return True
        cur = world.objects[cur.location.ref]
    return False


def _goal_holds_for(world: WorldState, iid: str, goal: GoalCondition) -> bool:
    inst = world.objects[iid]
    if goal.predicate == "state_is":
        if not hasattr(inst.state, goal.flag):
            raise UnknownReference(f"unknown state flag {goal.flag!r}")
        return bool(getattr(inst.state, goal.flag)) == bool(goal.value)
    if goal.predicate == "located":
        return _located_ok(world, iid, goal)
    if goal.predicate == "holding":
        return world.agent.held == iid
    if goal.predicate == "filled":
        return inst.state.filled_with == goal.liquid
    if goal.predicate == "colored":
        return world.effective_color(iid) == goal.color
    if goal.predicate == "scanned":
        return inst.state.used
    if goal.predicate == "toggled":
        return inst.state.toggled_on == bool(goal.value)
    raise UnknownReference(f"unknown predicate {goal.predicate!r}")


def goal_status(world: WorldState, goals: list[GoalCondition]) -> tuple[list[bool], int]:
    """Per-subgoal truth plus mission success m (1 iff all hold)."""
    results = []
    for goal in goals:
        candidates = _resolve_targets(world, goal.target)
        results.append(any(_goal_holds_for(world, iid, goal) for iid in candidates))
    return results, int(all(results))
