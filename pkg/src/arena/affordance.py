"""Object interaction: affordance gating, preconditions and effects.

Eleven verbs act on object instances. A verb is admitted when the
licensing property (or tag) is present and every precondition holds;
device behaviors add causal gating on top (power, closed doors,
required inserted parts, room power) and cascade state changes onto
device contents when a Toggle (or, for the fridge, a Close) fires.

Checks run in a fixed order and the first failure wins: target
existence, licensing property, secondary existence/property, range,
hands, state preconditions, device preconditions. Gating and device
tables load from ``data/affordances.json`` and ``data/devices.json``
so new devices need no code changes.

``apply`` is a pure transition: it returns a fresh world, leaving the
input untouched; a failed action changes nothing but the tick.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from . import geometry
from .data_files import DATA_DIR
from .errors import ValidationError
from .scene import FLAG_LICENSES, Location, ObjectInstance, ObjectState, WorldState

VERBS = ("Examine", "Pickup", "Place", "Open", "Close", "Break",
         "Pour", "Toggle", "Fill", "Scan", "Clean")

_NEEDS_SECONDARY = ("Place", "Pour")


@dataclass(frozen=True)
class InteractionAction:
    verb: str
    target: str
    secondary: str | None = None

    def __post_init__(self):
        if self.verb not in VERBS:
            raise ValidationError(f"unknown verb {self.verb!r}")
        if self.verb in _NEEDS_SECONDARY and self.secondary is None:
            raise ValidationError(f"{self.verb} requires a secondary instance")

    def to_json(self) -> dict:
        out = {"type": "interaction", "verb": self.verb, "target": self.target}
        if self.secondary is not None:
            out["secondary"] = self.secondary
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "InteractionAction":
        return cls(doc["verb"], doc["target"], doc.get("secondary"))


@dataclass
class ActionResult:
    success: bool
    error_code: str | None = None
    message: str = ""
    state_delta: list[tuple] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "error_code": self.error_code,
            "message": self.message,
            "state_delta": [list(d) for d in self.state_delta],
        }


@dataclass(frozen=True)
class AffordanceRule:
    verb: str
    requires_property: str | None
    requires_tag: str | None
    secondary_property: str | None
    preconditions: tuple[str, ...]
    effects: tuple[str, ...]


@dataclass(frozen=True)
class DeviceBehavior:
    device_class: str
    trigger: str
    momentary: bool
    preconditions: tuple[dict, ...]
    effects: tuple[dict, ...]


class RuleSet:
    """Parsed affordance + device tables."""

    def __init__(self, rules: list[AffordanceRule], devices: list[DeviceBehavior],
                 interaction_range: int):
        self.rules = {r.verb: r for r in rules}
        self.devices = {d.device_class: d for d in devices}
        self.interaction_range = interaction_range

    def device_for(self, class_id: str) -> DeviceBehavior | None:
        return self.devices.get(class_id)


def load_rules(affordance_path: str | Path, device_path: str | Path) -> RuleSet:
    aff = json.loads(Path(affordance_path).read_text(encoding="utf-8"))
    dev = json.loads(Path(device_path).read_text(encoding="utf-8"))
    rules = []
    for entry in aff["rules"]:
        rules.append(AffordanceRule(
            verb=entry["verb"],
            requires_property=entry.get("requires_property"),
            requires_tag=entry.get("requires_tag"),
            secondary_property=entry.get("secondary_property"),
            preconditions=tuple(entry.get("preconditions", [])),
            effects=tuple(entry.get("effects", [])),
        ))
    devices = []
    for entry in dev["devices"]:
        devices.append(DeviceBehavior(
            device_class=entry["device_class"],
            trigger=entry["trigger"],
            momentary=bool(entry["momentary"]),
            preconditions=tuple(entry.get("preconditions", [])),
            effects=tuple(entry.get("effects", [])),
        ))
    return RuleSet(rules, devices, int(aff.get("interaction_range", 2)))


@lru_cache(maxsize=1)
def default_rules() -> RuleSet:
    return load_rules(DATA_DIR / "affordances.json", DATA_DIR / "devices.json")


# ---------------------------------------------------------------------------
# applicability
# ---------------------------------------------------------------------------

@dataclass
class Applicability:
    ok: bool
    error_code: str | None = None
    reason: str = ""


def _in_range(world: WorldState, rules: RuleSet, iid: str) -> bool:
    cell = world.resolved_cell(iid)
    if cell is None:
        return False
    if geometry.chebyshev(world.agent.cell, cell) > rules.interaction_range:
        return False
    return world.layout.line_of_sight(world.agent.cell, cell)


def _water_source_in_range(world: WorldState, rules: RuleSet) -> bool:
    for iid in sorted(world.objects):
        inst = world.objects[iid]
        if "water_source" in world.catalog[inst.class_id].tags and _in_range(world, rules, iid):
            return True
    return False


def _is_descendant(world: WorldState, candidate: str, root: str) -> bool:
    """True when candidate sits (transitively) in/on root."""
    iid = candidate
    while True:
        loc = world.objects[iid].location
        if loc.kind not in ("inside", "on"):
            return False
        if loc.ref == root:
            return True
        iid = loc.ref


def _check_state_precondition(world: WorldState, rules: RuleSet,
                              action: InteractionAction, name: str) -> tuple[str, str] | None:
    """Return (error_code, reason) for a failed check, None when satisfied."""
    target = world.objects[action.target]
    if name == "hand_empty":
        if world.agent.held is not None:
            return "HandsFull", "agent hand is not empty"
    elif name == "holding_target":
        if world.agent.held is None:
            return "HandsEmpty", "agent is not holding anything"
        if world.agent.held != action.target:
            return "PreconditionFailed", f"agent is not holding {action.target}"
    elif name == "target_in_range":
        if not _in_range(world, rules, action.target):
            return "OutOfRange", f"{action.target} is out of interaction range"
    elif name == "target_in_range_or_held":
        if world.agent.held != action.target and not _in_range(world, rules, action.target):
            return "OutOfRange", f"{action.target} is out of interaction range"
    elif name == "secondary_in_range":
        if not _in_range(world, rules, action.secondary):
            return "OutOfRange", f"{action.secondary} is out of interaction range"
    elif name == "target_not_held":
        if world.agent.held == action.target:
            return "PreconditionFailed", f"{action.target} is in the agent's hand"
    elif name == "target_accessible":
        if world.hidden_in_closed_container(action.target):
            return "PreconditionFailed", f"{action.target} is shut inside a closed container"
    elif name == "target_open":
        if not target.state.open:
            return "PreconditionFailed", f"{action.target} is already closed"
    elif name == "target_not_open":
        if target.state.open:
            return "PreconditionFailed", f"{action.target} is already open"
    elif name == "target_not_broken":
        if target.state.broken:
            return "PreconditionFailed", f"{action.target} is broken"
    elif name == "target_dirty":
        if not target.state.dirty:
            return "PreconditionFailed", f"{action.target} is not dirty"
    elif name == "target_filled":
        if target.state.filled_with is None:
            return "PreconditionFailed", f"{action.target} is empty"
    elif name == "target_not_filled":
        if target.state.filled_with is not None:
            return "PreconditionFailed", f"{action.target} already holds {target.state.filled_with}"
    elif name == "secondary_not_filled":
        sec = world.objects[action.secondary]
        if sec.state.filled_with is not None:
            return "PreconditionFailed", f"{action.secondary} already holds {sec.state.filled_with}"
    elif name == "secondary_not_self":
        if action.secondary == action.target:
            return "PreconditionFailed", "target and destination are the same object"
    elif name == "secondary_not_self_or_contents":
        if action.secondary == action.target or _is_descendant(world, action.secondary, action.target):
            return "PreconditionFailed", "cannot place an object into itself or its contents"
    elif name == "secondary_open_if_openable":
        sec = world.objects[action.secondary]
        sec_cls = world.catalog[sec.class_id]
        if sec_cls.container_mode == "inside" and sec_cls.has("openable") and not sec.state.open:
            return "PreconditionFailed", f"{action.secondary} is closed"
    elif name == "water_source_in_range":
        if not _water_source_in_range(world, rules):
            return "PreconditionFailed", "no water source within reach"
    else:
        raise ValidationError(f"unknown precondition {name!r} in affordance table")
    return None


def _check_device_precondition(world: WorldState, device: ObjectInstance,
                               pre: dict) -> str | None:
    """Return a human-readable reason when the device precondition fails."""
    kind = pre["kind"]
    if kind == "device_powered":
        if not device.state.powered:
            return f"{device.instance_id} is not powered"
    elif kind == "device_closed":
        if device.state.open:
            return f"{device.instance_id} must be closed"
    elif kind == "device_open":
        if not device.state.open:
            return f"{device.instance_id} must be open"
    elif kind == "room_power":
        room = world.room_of(device.instance_id)
        if not world.room_power.get(room, True):
            return f"power is out in {room} (reset the fuse box)"
    elif kind == "device_filled":
        if device.state.filled_with != pre["liquid"]:
            return f"{device.instance_id} needs {pre['liquid']}"
    elif kind == "contains_class":
        want = pre["class"]
        held = [i for i in world.inside_of(device.instance_id)
                if world.objects[i].class_id == want]
        if not held:
            return f"{device.instance_id} needs a {want} inside"
    elif kind == "room_device_loaded":
        room = world.room_of(device.instance_id)
        containers = _room_instances_of_class(world, room, pre["container_class"])
        for c in containers:
            for i in world.inside_of(c):
                if world.objects[i].class_id == pre["content_class"]:
                    return None
        return f"no {pre['content_class']} inserted in the {pre['container_class']}"
    elif kind == "room_receptacle_holds_any":
        room = world.room_of(device.instance_id)
        prop = pre["require_property"]
        for r in _room_instances_of_class(world, room, pre["receptacle_class"]):
            for i in world.contents_of(r):
                if world.catalog[world.objects[i].class_id].has(prop):
                    return None
        return f"nothing suitable is on the {pre['receptacle_class']}"
    elif kind == "mounted_with_cargo":
        loc = device.location
        if loc.kind not in ("on", "inside"):
            return f"{device.instance_id} is not mounted on a device"
        siblings = [i for i in world.contents_of(loc.ref) if i != device.instance_id]
        if not siblings:
            return f"nothing is placed on {loc.ref}"
    else:
        raise ValidationError(f"unknown device precondition {kind!r}")
    return None


def _room_instances_of_class(world: WorldState, room: str | None, class_id: str) -> list[str]:
    out = []
    for iid in sorted(world.objects):
        if world.objects[iid].class_id == class_id and world.room_of(iid) == room:
            out.append(iid)
    return out


def _device_preconditions_apply(rule_verbs_match: bool, device: DeviceBehavior,
                                target: ObjectInstance) -> bool:
    if not rule_verbs_match:
        return False
    if device.momentary:
        return True
    # stateful devices gate only the off->on transition
    return not target.state.toggled_on


def applicable(world: WorldState, action: InteractionAction,
               rules: RuleSet | None = None) -> Applicability:
    """Decide whether the action is admissible; reasons name the first failure."""
    rules = rules or default_rules()
    rule = rules.rules.get(action.verb)
    if rule is None:
        return Applicability(False, "Unsupported", f"no rule for verb {action.verb}")

    target = world.objects.get(action.target)
    if target is None:
        return Applicability(False, "UnknownInstance", f"no instance {action.target!r}")
    target_cls = world.catalog[target.class_id]
    if rule.requires_property and not target_cls.has(rule.requires_property):
        return Applicability(False, "AffordanceMissing",
                             f"{target.class_id} is not {rule.requires_property}")
    if rule.requires_tag and rule.requires_tag not in target_cls.tags:
        return Applicability(False, "AffordanceMissing",
                             f"{target.class_id} is not {rule.requires_tag}")

    if action.secondary is not None:
        sec = world.objects.get(action.secondary)
        if sec is None:
            return Applicability(False, "UnknownInstance", f"no instance {action.secondary!r}")
        if rule.secondary_property and not world.catalog[sec.class_id].has(rule.secondary_property):
            return Applicability(False, "AffordanceMissing",
                                 f"{sec.class_id} is not a {rule.secondary_property}")

    for name in rule.preconditions:
        failure = _check_state_precondition(world, rules, action, name)
        if failure is not None:
            return Applicability(False, failure[0], failure[1])

    device = rules.device_for(target.class_id)
    if device is not None and _device_preconditions_apply(
            device.trigger == action.verb, device, target):
        for pre in device.preconditions:
            reason = _check_device_precondition(world, target, pre)
            if reason is not None:
                return Applicability(False, "PreconditionFailed", reason)
    return Applicability(True)


# ---------------------------------------------------------------------------
# effects
# ---------------------------------------------------------------------------

_SETTABLE_FLAGS = set(FLAG_LICENSES) | {"filled_with", "used"}


def _set_flag(world: WorldState, delta: list, iid: str, flag: str, value) -> None:
    inst = world.objects[iid]
    if flag == "color_override":
        old = inst.color_override
        if old != value:
            inst.color_override = value
            delta.append((iid, "color_override", old, value))
        return
    if flag not in _SETTABLE_FLAGS:
        raise ValidationError(f"unknown state flag {flag!r} in effect")
    licensed = FLAG_LICENSES.get(flag)
    if flag == "filled_with":
        licensed = "fillable"
    if licensed and not world.catalog[inst.class_id].has(licensed) and flag != "used":
        return  # effects never touch unlicensed flags
    old = getattr(inst.state, flag)
    if old != value:
        setattr(inst.state, flag, value)
        delta.append((iid, flag, old, value))


def _transitive_contents(world: WorldState, iid: str) -> list[str]:
    out = []
    stack = list(reversed(world.contents_of(iid)))
    while stack:
        cur = stack.pop()
        out.append(cur)
        stack.extend(reversed(world.contents_of(cur)))
    return out


def _next_instance_id(world: WorldState, class_id: str) -> str:
    pat = re.compile(rf"^{re.escape(class_id)}_(\d+)$")
    best = 0
    for iid in world.objects:
        m = pat.match(iid)
        if m:
            best = max(best, int(m.group(1)))
    return f"{class_id}_{best + 1}"


def _apply_device_effects(world: WorldState, device_iid: str,
                          behavior: DeviceBehavior, delta: list) -> None:
    device = world.objects[device_iid]
    for eff in behavior.effects:
        scope = eff["scope"]
        if scope == "contents":
            targets = _transitive_contents(world, device_iid)
        elif scope == "self":
            targets = [device_iid]
        elif scope == "mount_siblings":
            loc = device.location
            targets = [i for i in world.contents_of(loc.ref) if i != device_iid]
        elif scope == "room_receptacle_contents":
            room = world.room_of(device_iid)
            targets = []
            for r in _room_instances_of_class(world, room, eff["receptacle_class"]):
                targets.extend(_transitive_contents(world, r))
        elif scope == "room_power":
            room = world.room_of(device_iid)
            if room is not None and world.room_power.get(room, True) != eff["value"]:
                old = world.room_power.get(room, True)
                world.room_power[room] = eff["value"]
                delta.append((f"room:{room}", "room_power", old, eff["value"]))
            continue
        elif scope == "spawn":
            new_id = _next_instance_id(world, eff["class"])
            loc = (Location.inside(device_iid) if eff.get("where", "inside") == "inside"
                   else Location.on(device_iid))
            world.objects[new_id] = ObjectInstance(new_id, eff["class"], loc, ObjectState())
            delta.append((new_id, "spawned", None, eff["class"]))
            continue
        else:
            raise ValidationError(f"unknown device effect scope {scope!r}")

        prop = eff.get("require_property")
        for iid in targets:
            if prop and not world.catalog[world.objects[iid].class_id].has(prop):
                continue
            for flag, value in eff["set"].items():
                _set_flag(world, delta, iid, flag, value)


def _run_effects(world: WorldState, action: InteractionAction, rule: AffordanceRule,
                 rules: RuleSet, delta: list) -> str:
    """Apply the rule's effects to world in place; returns an extra message."""
    message = ""
    target = world.objects[action.target]
    device = rules.device_for(target.class_id)
    for name in rule.effects:
        if name == "do_pickup":
            old = target.location.to_json()
            target.location = Location.held()
            world.agent.held = action.target
            delta.append((action.target, "location", old, target.location.to_json()))
        elif name == "do_place":
            dest = world.objects[action.secondary]
            mode = world.catalog[dest.class_id].container_mode
            old = target.location.to_json()
            target.location = (Location.inside(action.secondary) if mode == "inside"
                               else Location.on(action.secondary))
            world.agent.held = None
            delta.append((action.target, "location", old, target.location.to_json()))
        elif name == "set_open":
            _set_flag(world, delta, action.target, "open", True)
        elif name == "clear_open":
            _set_flag(world, delta, action.target, "open", False)
        elif name == "set_broken":
            _set_flag(world, delta, action.target, "broken", True)
        elif name == "do_pour":
            liquid = target.state.filled_with
            _set_flag(world, delta, action.secondary, "filled_with", liquid)
            _set_flag(world, delta, action.target, "filled_with", None)
        elif name == "do_toggle":
            if device is None or not device.momentary:
                _set_flag(world, delta, action.target, "toggled_on",
                          not target.state.toggled_on)
        elif name == "set_filled_water":
            _set_flag(world, delta, action.target, "filled_with", "water")
        elif name == "clear_dirty":
            _set_flag(world, delta, action.target, "dirty", False)
        elif name == "set_used":
            _set_flag(world, delta, action.target, "used", True)
            if action.verb == "Examine" and target.note_text is not None:
                message = target.note_text
        else:
            raise ValidationError(f"unknown effect {name!r} in affordance table")

    if device is not None and device.trigger == action.verb:
        fire = device.momentary or world.objects[action.target].state.toggled_on
        if fire:
            _apply_device_effects(world, action.target, device, delta)
    return message


def apply(world: WorldState, action: InteractionAction,
          rules: RuleSet | None = None) -> tuple[WorldState, ActionResult]:
    """Execute the action on a copy of the world; effects are atomic.

    A failed action returns the copy unchanged except for the tick.
    """
    rules = rules or default_rules()
    new_world = world.copy()
    new_world.tick += 1
    check = applicable(world, action, rules)
    if not check.ok:
        return new_world, ActionResult(False, check.error_code, check.reason)
    delta: list[tuple] = []
    message = _run_effects(new_world, action, rules.rules[action.verb], rules, delta)
    return new_world, ActionResult(True, None, message, delta)


def enumerate_applicable(world: WorldState, rules: RuleSet | None = None) -> list[InteractionAction]:
    """Every admissible interaction, ordered by (verb, target, secondary)."""
    rules = rules or default_rules()
    out = []
    targets = sorted(world.objects)
    for verb in sorted(VERBS):
        needs_secondary = verb in _NEEDS_SECONDARY
        for target in targets:
            if needs_secondary:
                for secondary in targets:
                    action = InteractionAction(verb, target, secondary)
                    if applicable(world, action, rules).ok:
                        out.append(action)
            else:
                action = InteractionAction(verb, target)
                if applicable(world, action, rules).ok:
                    out.append(action)
    return out
