"""Programmatic mission generation.

Missions are sampled by permuting layout, agent pose, object classes,
placements, initial states and goal parameters, then verified solvable
by actually planning them before they are emitted. The same (seed,
inputs) always yields the same mission list; every mission carries the
objects its goal needs within interaction range of a viewpoint, so the
sampler never emits an unreachable task.

The ``unique_tool`` flag restricts multi-tool state changes (heating,
freezing) to a single sampled tool per mission.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .cdf import CDF, GoalCondition, MissionSpec, Placement, TASK_TYPES, parse_cdf, serialize_cdf
from .data_files import default_catalog, default_layout, layout_ids
from .errors import GenerationExhausted, ArenaError
from .nav import reach_cells
from .qa import display_name
from .scene import Catalog, Location, ObjectState, SceneLayout

_TARGETS = {
    "pickup&deliver": ("bowl", "mug", "book", "toy_robot", "apple", "clipboard"),
    "heat&deliver": ("bowl", "mug", "plate", "sandwich", "frozen_pizza"),
    "freeze&deliver": ("bowl", "mug", "soda_can", "apple", "frozen_pizza"),
    "repair&deliver": ("bowl", "mug", "vase", "toy_robot", "toy_dinosaur"),
    "fill&deliver": ("bowl", "mug", "carafe", "water_bottle"),
    "color&deliver": ("bowl", "mug", "toy_robot", "book"),
    "clean&deliver": ("bowl", "mug", "plate", "fork", "vase"),
    "pourContainer": ("water_bottle", "carafe", "milk_carton"),
    "breakObject": ("vase", "toy_robot", "toy_dinosaur", "sample_vial", "mug"),
    "insertInDevice": ("control_panel", "printer_cartridge", "coffee_beans"),
    "toggleDevice": ("desk_lamp", "floor_lamp", "computer_terminal", "radio"),
    "scanObject": ("sample_vial", "crystal_sample", "floppy_disk", "computer_terminal"),
}

_DELIVER_RECEPTACLES = ("table", "desk", "round_table", "counter")

_INSERT_DEVICE = {"control_panel": "laser_cannon",
                  "printer_cartridge": "printer_3d",
                  "coffee_beans": "coffee_maker"}

_DECOR = ("painting", "potted_plant", "poster", "wall_clock")


@dataclass
class _Build:
    """One mission under construction."""
    layout: SceneLayout
    rng: random.Random
    placements: list[Placement] = field(default_factory=list)
    used_cells: set = field(default_factory=set)
    counters: dict = field(default_factory=dict)
    room_power_off: list[str] = field(default_factory=list)
    hints: list[str] = field(default_factory=list)

    def new_id(self, class_id: str) -> str:
        n = self.counters.get(class_id, 0) + 1
        self.counters[class_id] = n
        return f"{class_id}_{n}"

    def station_cell(self, room: str | None = None):
        """Free cell within interaction range + sight of some viewpoint."""
        vps = self.layout.viewpoints_in(room) if room else list(self.layout.viewpoints)
        vps = sorted(vps, key=lambda v: v.name)
        self.rng.shuffle(vps)
        for vp in vps:
            cells = [c for c in reach_cells(self.layout, vp.cell, 2)
                     if c not in self.used_cells and c != vp.cell
                     and self.layout.room_of_cell(c) == vp.room]
            if cells:
                cell = self.rng.choice(sorted(cells))
                self.used_cells.add(cell)
                return cell
        raise GenerationExhausted(f"no free station cell in room {room!r}")

    def place_at(self, class_id: str, room: str | None = None,
                 state: ObjectState | None = None) -> str:
        iid = self.new_id(class_id)
        cell = self.station_cell(room)
        self.placements.append(Placement(iid, class_id, Location.at(cell),
                                         state or ObjectState()))
        return iid

    def place_on(self, class_id: str, holder: str,
                 state: ObjectState | None = None) -> str:
        iid = self.new_id(class_id)
        self.placements.append(Placement(iid, class_id, Location.on(holder),
                                         state or ObjectState()))
        return iid

    def place_inside(self, class_id: str, holder: str,
                     state: ObjectState | None = None) -> str:
        iid = self.new_id(class_id)
        self.placements.append(Placement(iid, class_id, Location.inside(holder),
                                         state or ObjectState()))
        return iid

    def room_of(self, iid: str) -> str:
        for p in self.placements:
            if p.instance_id == iid and p.location.kind == "cell":
                return self.layout.room_of_cell(p.location.cell)
        raise ArenaError(f"{iid} has no direct cell placement")


def _pick_room(b: _Build) -> str:
    return b.rng.choice(sorted(b.layout.rooms))


def _deliver_receptacle(b: _Build) -> str:
    cls = b.rng.choice(_DELIVER_RECEPTACLES)
    return b.place_at(cls, _pick_room(b))


def _target_on_surface(b: _Build, target_class: str,
                       state: ObjectState | None = None) -> tuple[str, str]:
    surface = b.place_at(b.rng.choice(_DELIVER_RECEPTACLES), _pick_room(b))
    target = b.place_on(target_class, surface, state)
    return target, surface


def _heat_tools(b: _Build, unique_tool: bool) -> str:
    """Place microwave and/or the laser rig; returns a hint string."""
    tools = ["microwave", "laser"]
    if unique_tool:
        tools = [b.rng.choice(tools)]
    hints = []
    for tool in tools:
        room = _pick_room(b)
        if tool == "microwave":
            b.place_at("microwave", room, ObjectState(powered=True))
            hints.append(f"Hint: the microwave in the {room} is plugged in.")
        else:
            laser = b.place_at("laser_cannon", room)
            b.place_at("laser_shelf", room)
            b.place_at("red_monitor", room)
            b.place_inside("control_panel", laser)
            hints.append(f"Hint: the laser in the {room} is loaded; use the red monitor.")
    return " ".join(hints)


def _freeze_tools(b: _Build, unique_tool: bool) -> str:
    tools = ["fridge", "freeze_ray"]
    if unique_tool:
        tools = [b.rng.choice(tools)]
    hints = []
    for tool in tools:
        room = _pick_room(b)
        if tool == "fridge":
            b.place_at("fridge", room)
            hints.append(f"Hint: there is a fridge in the {room}.")
        else:
            b.place_at("freeze_ray", room)
            b.place_at("freeze_shelf", room)
            b.place_at("blue_monitor", room)
            hints.append(f"Hint: the freeze ray in the {room} fires at the blue shelf.")
    return " ".join(hints)


def _build_mission(spec: MissionSpec, layout: SceneLayout, catalog: Catalog,
                   rng: random.Random, unique_tool: bool) -> tuple[_Build, list[GoalCondition], list[str], str]:
    b = _Build(layout=layout, rng=rng)
    t = spec.task_type
    target_class = spec.target_class or rng.choice(_TARGETS[t])
    tname = display_name(target_class)

    goals: list[GoalCondition] = []
    subs: list[str] = []
    desc = ""

    if t == "pickup&deliver":
        target, _ = _target_on_surface(b, target_class)
        dest = _deliver_receptacle(b)
        room = b.room_of(dest)
        goals = [GoalCondition("located", target, receptacle=dest)]
        subs = [f"Place the {tname} on the {display_name_of(b, dest)} in the {room}"]
        desc = f"Pick up the {tname} and place it on the {display_name_of(b, dest)} in the {room}."
    elif t == "heat&deliver":
        target, _ = _target_on_surface(b, target_class)
        hint = _heat_tools(b, unique_tool)
        b.hints.append(hint)
        dest = _deliver_receptacle(b)
        room = b.room_of(dest)
        goals = [GoalCondition("state_is", target, flag="hot", value=True),
                 GoalCondition("located", target, receptacle=dest)]
        subs = [f"Make the {tname} hot",
                f"Place the {tname} on the {display_name_of(b, dest)} in the {room}"]
        desc = f"Heat the {tname} and deliver it to the {display_name_of(b, dest)} in the {room}."
    elif t == "freeze&deliver":
        target, _ = _target_on_surface(b, target_class)
        hint = _freeze_tools(b, unique_tool)
        b.hints.append(hint)
        dest = _deliver_receptacle(b)
        room = b.room_of(dest)
        goals = [GoalCondition("state_is", target, flag="cold", value=True),
                 GoalCondition("located", target, receptacle=dest)]
        subs = [f"Make the {tname} cold",
                f"Place the {tname} on the {display_name_of(b, dest)} in the {room}"]
        desc = f"Freeze the {tname} and deliver it to the {display_name_of(b, dest)} in the {room}."
    elif t == "repair&deliver":
        target, _ = _target_on_surface(b, target_class, ObjectState(broken=True))
        room = _pick_room(b)
        b.place_at("time_machine", room)
        b.hints.append(f"Hint: the time machine in the {room} repairs broken objects.")
        dest = _deliver_receptacle(b)
        droom = b.room_of(dest)
        goals = [GoalCondition("state_is", target, flag="broken", value=False),
                 GoalCondition("located", target, receptacle=dest)]
        subs = [f"Repair the {tname}",
                f"Place the {tname} on the {display_name_of(b, dest)} in the {droom}"]
        desc = f"Repair the broken {tname} and deliver it to the {display_name_of(b, dest)} in the {droom}."
    elif t == "fill&deliver":
        liquid = spec.liquid or rng.choice(("water", "coffee"))
        target, _ = _target_on_surface(b, target_class)
        if liquid == "water":
            room = _pick_room(b)
            b.place_at("sink", room)
            b.hints.append(f"Hint: there is a sink in the {room}.")
        else:
            room = _pick_room(b)
            maker = b.place_at("coffee_maker", room,
                               ObjectState(filled_with="water"))
            b.place_inside("coffee_beans", maker)
            b.hints.append(f"Hint: the coffee maker in the {room} has water and beans.")
        dest = _deliver_receptacle(b)
        droom = b.room_of(dest)
        goals = [GoalCondition("filled", target, liquid=liquid),
                 GoalCondition("located", target, receptacle=dest)]
        subs = [f"Fill the {tname} with {liquid}",
                f"Place the {tname} on the {display_name_of(b, dest)} in the {droom}"]
        desc = f"Fill the {tname} with {liquid} and deliver it to the {display_name_of(b, dest)} in the {droom}."
    elif t == "color&deliver":
        color = spec.color or rng.choice(("red", "green", "blue"))
        target, _ = _target_on_surface(b, target_class)
        room = _pick_room(b)
        changer = b.place_at("color_changer", room)
        for c in ("red", "green", "blue"):
            b.place_on(f"color_button_{c}", changer)
        b.hints.append(f"Hint: the color changer is in the {room}; push the {color} button.")
        dest = _deliver_receptacle(b)
        if rng.random() < 0.5:  # distractor receptacle of the same class
            cls = next(p.class_id for p in b.placements if p.instance_id == dest)
            b.place_at(cls, _pick_room(b))
        droom = b.room_of(dest)
        goals = [GoalCondition("colored", target, color=color),
                 GoalCondition("located", target, receptacle=dest)]
        subs = [f"Change the color of the {tname} to {color}",
                f"Place the {tname} on the {display_name_of(b, dest)} in the {droom}"]
        desc = (f"Use the color changer to make the {tname} {color}, "
                f"then deliver it to the {display_name_of(b, dest)} in the {droom}.")
    elif t == "clean&deliver":
        target, _ = _target_on_surface(b, target_class, ObjectState(dirty=True))
        room = _pick_room(b)
        b.place_at("sink", room)
        b.hints.append(f"Hint: wash things at the sink in the {room}.")
        dest = _deliver_receptacle(b)
        droom = b.room_of(dest)
        goals = [GoalCondition("state_is", target, flag="dirty", value=False),
                 GoalCondition("located", target, receptacle=dest)]
        subs = [f"Clean the {tname}",
                f"Place the {tname} on the {display_name_of(b, dest)} in the {droom}"]
        desc = f"Clean the dirty {tname} and deliver it to the {display_name_of(b, dest)} in the {droom}."
    elif t == "pourContainer":
        liquid = spec.liquid or rng.choice(("water", "milk"))
        src, _ = _target_on_surface(b, target_class, ObjectState(filled_with=liquid))
        dst_class = rng.choice(tuple(c for c in ("bowl", "mug", "carafe")
                                     if c != target_class))
        dst, _ = _target_on_surface(b, dst_class)
        goals = [GoalCondition("filled", dst, liquid=liquid),
                 GoalCondition("filled", src, liquid=None)]
        subs = [f"Fill the {display_name(dst_class)} with {liquid}",
                f"Empty the {tname}"]
        desc = f"Pour the {liquid} from the {tname} into the {display_name(dst_class)}."
    elif t == "breakObject":
        target, _ = _target_on_surface(b, target_class)
        goals = [GoalCondition("state_is", target, flag="broken", value=True)]
        subs = [f"Break the {tname}"]
        desc = f"Find the {tname} and break it."
    elif t == "insertInDevice":
        device_class = spec.device_class or _INSERT_DEVICE[target_class]
        room = _pick_room(b)
        device = b.place_at(device_class, room)
        target, _ = _target_on_surface(b, target_class)
        goals = [GoalCondition("located", target, receptacle=device)]
        subs = [f"Insert the {tname} into the {display_name(device_class)}"]
        desc = f"Insert the {tname} into the {display_name(device_class)} in the {room}."
        if device_class in ("printer_3d", "microwave"):
            # openable devices must be reachable open or closed; leave closed
            pass
    elif t == "toggleDevice":
        room = _pick_room(b)
        device = b.place_at(target_class, room)
        gated = target_class in ("desk_lamp", "floor_lamp")
        if gated and rng.random() < 0.5:
            b.room_power_off.append(room)
            b.place_at("fuse_box", room)
            b.hints.append(f"Hint: reset the fuse box to restore power in the {room}.")
        goals = [GoalCondition("toggled", device)]
        subs = [f"Turn on the {tname}"]
        desc = f"Turn on the {tname} in the {room}."
    elif t == "scanObject":
        if target_class == "computer_terminal":
            room = _pick_room(b)
            target = b.place_at(target_class, room)
        else:
            target, _ = _target_on_surface(b, target_class)
        goals = [GoalCondition("scanned", target)]
        subs = [f"Scan the {tname}"]
        desc = f"Scan the {tname} for anomalies."
    else:
        raise GenerationExhausted(f"unknown task type {t!r}")

    # sprinkle decor so scenes are not bare
    for cls in rng.sample(_DECOR, k=rng.randint(1, 2)):
        try:
            b.place_at(cls, _pick_room(b))
        except GenerationExhausted:
            break
    return b, goals, subs, desc


def display_name_of(b: _Build, iid: str) -> str:
    for p in b.placements:
        if p.instance_id == iid:
            return display_name(p.class_id)
    return iid


def sample_missions(spec_pool: list[MissionSpec], layouts: list[SceneLayout] | None,
                    catalog: Catalog | None, seed: int, n: int,
                    unique_tool: bool = False, validate: bool = True,
                    max_attempts: int = 25) -> list[CDF]:
    """Sample n solvable missions round-robin over the template pool."""
    from . import planner

    if n < 1:
        raise ValueError("n must be >= 1")
    if not spec_pool:
        raise ValueError("spec pool must not be empty")
    catalog = catalog or default_catalog()
    if layouts is None:
        layouts = [default_layout(lid) for lid in layout_ids()]
    missions = []
    for i in range(n):
        spec = spec_pool[i % len(spec_pool)]
        cdf = None
        for attempt in range(max_attempts):
            rng = random.Random(f"{seed}:{i}:{spec.task_type}:{attempt}")
            layout = rng.choice(sorted(layouts, key=lambda l: l.layout_id))
            try:
                b, goals, subs, desc = _build_mission(spec, layout, catalog, rng,
                                                      unique_tool)
                vp = rng.choice(sorted(layout.viewpoints, key=lambda v: v.name))
                candidate = CDF(
                    cdf_id=f"{_slug(spec.task_type)}_{seed}_{i:04d}",
                    layout_id=layout.layout_id,
                    agent_cell=vp.cell,
                    agent_heading=rng.choice(("N", "E", "S", "W")),
                    placements=b.placements,
                    goals=goals,
                    mission_description=desc,
                    subgoal_descriptions=subs,
                    hints=b.hints + [f"Hint: {desc}"],
                    prompts=[f"Mission: {desc}", "Read sticky notes for hints."],
                    room_power_off=b.room_power_off,
                    task_type=spec.task_type,
                )
                parse_cdf(serialize_cdf(candidate), catalog=catalog, layout=layout)
                if validate:
                    problem = planner.compile_problem(candidate, catalog=catalog,
                                                      layout=layout)
                    planner.solve(problem, max_expansions=60_000, mode="astar")
                cdf = candidate
                break
            except ArenaError:
                continue
        if cdf is None:
            raise GenerationExhausted(
                f"could not sample a solvable {spec.task_type} mission "
                f"(index {i}) in {max_attempts} attempts")
        missions.append(cdf)
    return missions


def _slug(task_type: str) -> str:
    return task_type.replace("&", "_").replace("/", "_")


def default_pool() -> list[MissionSpec]:
    return [MissionSpec(t) for t in TASK_TYPES]
