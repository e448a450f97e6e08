"""Static scene data (catalog, layouts) and the mutable world state.

The object catalog and layouts ship as human-editable JSON files under
``arena/data``. Layout geometry is drawn as ASCII rows ('#' blocked,
'.' floor, '+' floor acting as a doorway gap between two rooms) with
rooms declared as rectangles over the same grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geometry, gridops
from .errors import ParseError, UnknownInstance, ValidationError

PROPERTY_NAMES = frozenset({
    "pickupable", "openable", "breakable", "receptacle", "toggleable",
    "powerable", "dirtyable", "heatable", "eatable", "chillable",
    "fillable", "cookable", "decor", "infectable",
})

# object state flags that only make sense when the class carries the property
FLAG_LICENSES = {
    "open": "openable",
    "broken": "breakable",
    "dirty": "dirtyable",
    "hot": "heatable",
    "cold": "chillable",
    "toggled_on": "toggleable",
    "powered": "powerable",
    "cooked": "cookable",
    "infected": "infectable",
}

Cell = tuple[int, int]


def _as_cell(value) -> Cell:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        raise ValidationError(f"expected [x, y] cell, got {value!r}")
    return (value[0], value[1])


@dataclass(frozen=True)
class PropertySet:
    flags: frozenset[str]

    def __post_init__(self):
        unknown = self.flags - PROPERTY_NAMES
        if unknown:
            raise ValidationError(f"unknown object properties: {sorted(unknown)}")
        if "decor" in self.flags and len(self.flags) > 1:
            raise ValidationError("decor objects may not carry other properties")

    def __contains__(self, name: str) -> bool:
        return name in self.flags

    @classmethod
    def of(cls, *names: str) -> "PropertySet":
        return cls(frozenset(names))


@dataclass(frozen=True)
class ObjectClass:
    class_id: str
    semantic_group: str
    properties: PropertySet
    appearance: dict[str, str]
    spawn_size_px: int
    tags: frozenset[str] = frozenset()
    container_mode: str = "on"  # how contents attach when this is a receptacle

    def has(self, prop: str) -> bool:
        return prop in self.properties


class Catalog:
    def __init__(self, classes: list[ObjectClass]):
        self._by_id: dict[str, ObjectClass] = {}
        for cls in classes:
            if cls.class_id in self._by_id:
                raise ValidationError(f"duplicate class_id {cls.class_id!r}")
            self._by_id[cls.class_id] = cls

    def __contains__(self, class_id: str) -> bool:
        return class_id in self._by_id

    def __getitem__(self, class_id: str) -> ObjectClass:
        return self._by_id[class_id]

    def __iter__(self):
        return iter(self._by_id.values())

    def __len__(self) -> int:
        return len(self._by_id)

    def get(self, class_id: str) -> ObjectClass | None:
        return self._by_id.get(class_id)

    def ids(self) -> list[str]:
        return sorted(self._by_id)

    def with_property(self, prop: str) -> list[ObjectClass]:
        return [c for c in self._by_id.values() if c.has(prop)]


def load_catalog(path: str | Path) -> Catalog:
    """Load and validate an object catalog JSON file."""
    raw = Path(path).read_text(encoding="utf-8")
    if not raw.strip():
        raise ParseError(f"{path}: empty catalog file")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "classes" not in doc:
        raise ValidationError(f"{path}: catalog must be an object with a 'classes' list")
    classes = []
    for entry in doc["classes"]:
        try:
            props = PropertySet(frozenset(entry["properties"]))
            appearance = dict(entry.get("appearance", {}))
            cls = ObjectClass(
                class_id=entry["class_id"],
                semantic_group=entry["semantic_group"],
                properties=props,
                appearance=appearance,
                spawn_size_px=int(entry["spawn_size_px"]),
                tags=frozenset(entry.get("tags", [])),
                container_mode=entry.get("container_mode", "on"),
            )
        except KeyError as exc:
            raise ValidationError(f"{path}: class entry missing field {exc}") from exc
        if not cls.has("decor"):
            for slot in ("shape", "color", "material"):
                if not appearance.get(slot):
                    raise ValidationError(
                        f"{path}: class {cls.class_id!r} lacks appearance {slot!r}")
        if cls.container_mode not in ("on", "inside"):
            raise ValidationError(f"{path}: bad container_mode for {cls.class_id!r}")
        classes.append(cls)
    return Catalog(classes)


# ---------------------------------------------------------------------------
# layouts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Viewpoint:
    name: str
    cell: Cell
    room: str


@dataclass
class SceneLayout:
    layout_id: str
    width: int
    height: int
    rooms: dict[str, tuple[int, int, int, int]]  # name -> (x, y, w, h)
    doorways: list[tuple[Cell, Cell]]
    viewpoints: list[Viewpoint]
    occupancy: np.ndarray  # bool[h, w], True = blocked
    sticky_notes: list[dict]
    _room_of: dict[Cell, str] = field(default_factory=dict, repr=False)
    _fields: dict[Cell, np.ndarray] = field(default_factory=dict, repr=False)

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def blocked(self, cell: Cell) -> bool:
        return bool(self.occupancy[cell[1], cell[0]])

    def room_of_cell(self, cell: Cell) -> str | None:
        return self._room_of.get(cell)

    def viewpoint(self, name: str) -> Viewpoint | None:
        for vp in self.viewpoints:
            if vp.name == name:
                return vp
        return None

    def viewpoints_in(self, room: str) -> list[Viewpoint]:
        return [vp for vp in self.viewpoints if vp.room == room]

    def distance_field(self, source: Cell) -> np.ndarray:
        """Memoized BFS field from source over this layout's occupancy."""
        cached = self._fields.get(source)
        if cached is None:
            cached = gridops.distance_field(self.occupancy, source)
            self._fields[source] = cached
        return cached

    def line_of_sight(self, a: Cell, b: Cell) -> bool:
        return gridops.line_of_sight(self.occupancy, a, b)


def _rect_cells(rect: tuple[int, int, int, int]):
    x, y, w, h = rect
    for yy in range(y, y + h):
        for xx in range(x, x + w):
            yield (xx, yy)


def load_layout(path: str | Path) -> SceneLayout:
    raw = Path(path).read_text(encoding="utf-8")
    if not raw.strip():
        raise ParseError(f"{path}: empty layout file")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        layout = _build_layout(doc)
    except KeyError as exc:
        raise ValidationError(f"{path}: layout missing field {exc}") from exc
    return layout


def _build_layout(doc: dict) -> SceneLayout:
    rows = doc["rows"]
    height = len(rows)
    if height == 0 or len(set(len(r) for r in rows)) != 1:
        raise ValidationError("layout rows must be non-empty and rectangular")
    width = len(rows[0])
    occupancy = np.zeros((height, width), dtype=bool)
    gaps: set[Cell] = set()
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                occupancy[y, x] = True
            elif ch == "+":
                gaps.add((x, y))
            elif ch != ".":
                raise ValidationError(f"bad layout char {ch!r} at ({x},{y})")

    rooms: dict[str, tuple[int, int, int, int]] = {}
    room_of: dict[Cell, str] = {}
    for entry in doc["rooms"]:
        name = entry["name"]
        rect = tuple(entry["rect"])
        if name in rooms:
            raise ValidationError(f"duplicate room {name!r}")
        x, y, w, h = rect
        if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width or y + h > height:
            raise ValidationError(f"room {name!r} rect out of bounds")
        for cell in _rect_cells(rect):
            if cell in room_of:
                raise ValidationError(f"rooms {room_of[cell]!r} and {name!r} overlap at {cell}")
            room_of[cell] = name
        rooms[name] = rect

    doorways: list[tuple[Cell, Cell]] = []
    doorway_gaps: set[Cell] = set()
    for pair in doc.get("doorways", []):
        a, b = _as_cell(pair[0]), _as_cell(pair[1])
        ra, rb = room_of.get(a), room_of.get(b)
        if ra is None or rb is None or ra == rb:
            raise ValidationError(f"doorway {a}->{b} must join two distinct rooms")
        if occupancy[a[1], a[0]] or occupancy[b[1], b[0]]:
            raise ValidationError(f"doorway {a}->{b} touches a blocked cell")
        if geometry.manhattan(a, b) == 1:
            pass
        elif geometry.manhattan(a, b) == 2 and (a[0] == b[0] or a[1] == b[1]):
            mid = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            if occupancy[mid[1], mid[0]] or mid in room_of:
                raise ValidationError(f"doorway {a}->{b} has no open roomless gap between")
            doorway_gaps.add(mid)
        else:
            raise ValidationError(f"doorway {a}->{b} cells are not close enough")
        doorways.append((a, b))

    # every walkable roomless cell must serve as a doorway gap
    for y in range(height):
        for x in range(width):
            if not occupancy[y, x] and (x, y) not in room_of and (x, y) not in doorway_gaps:
                raise ValidationError(f"walkable cell ({x},{y}) is outside every room")
    # room-to-room adjacency only through declared doorways
    declared = {frozenset(d) for d in doorways}
    for y in range(height):
        for x in range(width):
            if occupancy[y, x]:
                continue
            for nx, ny in ((x + 1, y), (x, y + 1)):
                if nx >= width or ny >= height or occupancy[ny, nx]:
                    continue
                ra, rb = room_of.get((x, y)), room_of.get((nx, ny))
                if ra and rb and ra != rb and frozenset(((x, y), (nx, ny))) not in declared:
                    raise ValidationError(
                        f"rooms {ra!r}/{rb!r} touch at ({x},{y}) without a doorway")

    viewpoints = []
    names = set()
    for entry in doc["viewpoints"]:
        vp = Viewpoint(entry["name"], _as_cell(entry["cell"]), entry["room"])
        if vp.name in names:
            raise ValidationError(f"duplicate viewpoint {vp.name!r}")
        names.add(vp.name)
        if vp.room not in rooms:
            raise ValidationError(f"viewpoint {vp.name!r} names unknown room {vp.room!r}")
        if occupancy[vp.cell[1], vp.cell[0]]:
            raise ValidationError(f"viewpoint {vp.name!r} sits on a blocked cell")
        if room_of.get(vp.cell) != vp.room:
            raise ValidationError(f"viewpoint {vp.name!r} cell lies outside room {vp.room!r}")
        viewpoints.append(vp)
    if not viewpoints:
        raise ValidationError("layout needs at least one viewpoint")

    notes = []
    for entry in doc.get("sticky_notes", []):
        cell = _as_cell(entry["cell"])
        if occupancy[cell[1], cell[0]] or cell not in room_of:
            raise ValidationError(f"sticky note at {cell} must sit on an in-room floor cell")
        notes.append({"cell": cell, "text": entry.get("text", "")})

    layout = SceneLayout(
        layout_id=doc["layout_id"], width=width, height=height,
        rooms=rooms, doorways=doorways, viewpoints=viewpoints,
        occupancy=occupancy, sticky_notes=notes, _room_of=room_of,
    )

    # single connected component over walkable cells
    start = viewpoints[0].cell
    dist = layout.distance_field(start)
    free = ~occupancy
    if int((dist[free] < 0).sum()) > 0:
        raise ValidationError("walkable cells do not form a single connected component")
    return layout


# ---------------------------------------------------------------------------
# world state
# ---------------------------------------------------------------------------

LIQUIDS = ("water", "coffee", "milk")


@dataclass
class ObjectState:
    open: bool = False
    broken: bool = False
    dirty: bool = False
    hot: bool = False
    cold: bool = False
    filled_with: str | None = None
    toggled_on: bool = False
    powered: bool = False
    cooked: bool = False
    infected: bool = False
    used: bool = False  # scanned / examined

    def to_json(self) -> dict:
        out = {}
        for key, val in vars(self).items():
            if val:
                out[key] = val
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "ObjectState":
        state = cls()
        for key, val in doc.items():
            if not hasattr(state, key):
                raise ValidationError(f"unknown state flag {key!r}")
            setattr(state, key, val)
        return state

    def copy(self) -> "ObjectState":
        return replace(self)


@dataclass
class Location:
    kind: str  # cell | inside | on | held
    cell: Cell | None = None
    ref: str | None = None  # container / receptacle instance id

    @classmethod
    def at(cls, cell: Cell) -> "Location":
        return cls("cell", cell=cell)

    @classmethod
    def inside(cls, ref: str) -> "Location":
        return cls("inside", ref=ref)

    @classmethod
    def on(cls, ref: str) -> "Location":
        return cls("on", ref=ref)

    @classmethod
    def held(cls) -> "Location":
        return cls("held")

    def to_json(self) -> dict:
        if self.kind == "cell":
            return {"kind": "cell", "cell": list(self.cell)}
        if self.kind == "held":
            return {"kind": "held"}
        return {"kind": self.kind, "ref": self.ref}

    @classmethod
    def from_json(cls, doc: dict) -> "Location":
        kind = doc.get("kind")
        if kind == "cell":
            return cls.at(_as_cell(doc["cell"]))
        if kind == "held":
            return cls.held()
        if kind in ("inside", "on"):
            return cls(kind, ref=doc["ref"])
        raise ValidationError(f"unknown location kind {kind!r}")

    def copy(self) -> "Location":
        return replace(self)


@dataclass
class ObjectInstance:
    instance_id: str
    class_id: str
    location: Location
    state: ObjectState = field(default_factory=ObjectState)
    color_override: str | None = None
    note_text: str | None = None  # sticky-note hint payload

    def copy(self) -> "ObjectInstance":
        return ObjectInstance(self.instance_id, self.class_id,
                              self.location.copy(), self.state.copy(),
                              self.color_override, self.note_text)


@dataclass
class AgentState:
    cell: Cell
    heading: str
    held: str | None = None

    def copy(self) -> "AgentState":
        return replace(self)


@dataclass
class WorldState:
    layout: SceneLayout
    catalog: Catalog
    objects: dict[str, ObjectInstance]
    agent: AgentState
    room_power: dict[str, bool]
    tick: int = 0

    def copy(self) -> "WorldState":
        return WorldState(
            layout=self.layout, catalog=self.catalog,
            objects={k: v.copy() for k, v in self.objects.items()},
            agent=self.agent.copy(), room_power=dict(self.room_power),
            tick=self.tick,
        )

    def cls_of(self, instance_id: str) -> ObjectClass:
        inst = self.objects.get(instance_id)
        if inst is None:
            raise UnknownInstance(f"no instance {instance_id!r}")
        return self.catalog[inst.class_id]

    def resolved_cell(self, instance_id: str) -> Cell | None:
        """Grid cell the instance occupies, following on/inside links; None when held."""
        seen = set()
        iid = instance_id
        while True:
            inst = self.objects.get(iid)
            if inst is None:
                raise UnknownInstance(f"no instance {iid!r}")
            if iid in seen:
                raise ValidationError(f"containment cycle through {iid!r}")
            seen.add(iid)
            loc = inst.location
            if loc.kind == "cell":
                return loc.cell
            if loc.kind == "held":
                return None
            iid = loc.ref

    def room_of(self, instance_id: str) -> str | None:
        cell = self.resolved_cell(instance_id)
        return None if cell is None else self.layout.room_of_cell(cell)

    def agent_room(self) -> str | None:
        return self.layout.room_of_cell(self.agent.cell)

    def contents_of(self, instance_id: str) -> list[str]:
        """Direct contents (both 'inside' and 'on' links), sorted."""
        out = [iid for iid, inst in self.objects.items()
               if inst.location.kind in ("inside", "on") and inst.location.ref == instance_id]
        return sorted(out)

    def inside_of(self, instance_id: str) -> list[str]:
        out = [iid for iid, inst in self.objects.items()
               if inst.location.kind == "inside" and inst.location.ref == instance_id]
        return sorted(out)

    def on_top_of(self, instance_id: str) -> list[str]:
        out = [iid for iid, inst in self.objects.items()
               if inst.location.kind == "on" and inst.location.ref == instance_id]
        return sorted(out)

    def hidden_in_closed_container(self, instance_id: str) -> bool:
        """True when any enclosing 'inside' container is openable and shut."""
        inst = self.objects[instance_id]
        while inst.location.kind in ("inside", "on"):
            container = self.objects.get(inst.location.ref)
            if container is None:
                raise UnknownInstance(f"dangling containment ref {inst.location.ref!r}")
            if (inst.location.kind == "inside"
                    and self.catalog[container.class_id].has("openable")
                    and not container.state.open):
                return True
            inst = container
        return False

    def effective_color(self, instance_id: str) -> str:
        inst = self.objects[instance_id]
        if inst.color_override:
            return inst.color_override
        return self.catalog[inst.class_id].appearance.get("color", "")


def containment_closure(world: WorldState, instance_id: str) -> list[str]:
    """Transitively contained instance ids, depth-first, children sorted."""
    if instance_id not in world.objects:
        raise UnknownInstance(f"no instance {instance_id!r}")
    out: list[str] = []
    stack = list(reversed(world.contents_of(instance_id)))
    while stack:
        iid = stack.pop()
        out.append(iid)
        stack.extend(reversed(world.contents_of(iid)))
    return out


def validate_world(world: WorldState) -> None:
    """Check every world invariant; raises ValidationError on the first breach."""
    layout = world.layout
    if not layout.in_bounds(world.agent.cell) or layout.blocked(world.agent.cell):
        raise ValidationError(f"agent cell {world.agent.cell} is blocked or out of bounds")
    if world.agent.heading not in geometry.HEADINGS:
        raise ValidationError(f"bad agent heading {world.agent.heading!r}")

    held_seen = []
    for iid, inst in sorted(world.objects.items()):
        if iid != inst.instance_id:
            raise ValidationError(f"instance key {iid!r} != id {inst.instance_id!r}")
        cls = world.catalog.get(inst.class_id)
        if cls is None:
            raise ValidationError(f"{iid}: unknown class {inst.class_id!r}")
        for flag, prop in FLAG_LICENSES.items():
            if getattr(inst.state, flag) and not cls.has(prop):
                raise ValidationError(f"{iid}: state {flag!r} requires property {prop!r}")
        if inst.state.filled_with is not None:
            if not cls.has("fillable"):
                raise ValidationError(f"{iid}: filled_with requires fillable")
            if inst.state.filled_with not in LIQUIDS:
                raise ValidationError(f"{iid}: unknown liquid {inst.state.filled_with!r}")
        if inst.state.hot and inst.state.cold:
            raise ValidationError(f"{iid}: hot and cold are mutually exclusive")

        loc = inst.location
        if loc.kind == "cell":
            if not layout.in_bounds(loc.cell):
                raise ValidationError(f"{iid}: cell {loc.cell} out of bounds")
            if layout.blocked(loc.cell):
                raise ValidationError(f"{iid}: cell {loc.cell} is blocked")
            if layout.room_of_cell(loc.cell) is None:
                raise ValidationError(f"{iid}: cell {loc.cell} is outside every room")
        elif loc.kind in ("inside", "on"):
            holder = world.objects.get(loc.ref)
            if holder is None:
                raise ValidationError(f"{iid}: containment ref {loc.ref!r} does not exist")
            holder_cls = world.catalog[holder.class_id]
            if not holder_cls.has("receptacle"):
                raise ValidationError(f"{iid}: {loc.ref!r} is not a receptacle")
            if loc.kind == "inside" and holder_cls.container_mode != "inside":
                raise ValidationError(f"{iid}: {loc.ref!r} cannot contain objects inside")
            if loc.kind == "on" and holder_cls.container_mode != "on":
                raise ValidationError(f"{iid}: objects cannot sit on {loc.ref!r}")
        elif loc.kind == "held":
            if not cls.has("pickupable"):
                raise ValidationError(f"{iid}: held but not pickupable")
            held_seen.append(iid)
        else:
            raise ValidationError(f"{iid}: bad location kind {loc.kind!r}")
        # resolved_cell raises on containment cycles
        world.resolved_cell(iid)

    if world.agent.held is not None:
        if world.agent.held not in world.objects:
            raise ValidationError(f"agent holds unknown instance {world.agent.held!r}")
        if held_seen != [world.agent.held]:
            raise ValidationError("agent.held and held-by-agent locations disagree")
    elif held_seen:
        raise ValidationError(f"instances {held_seen} held but agent.held is empty")

    for room in world.room_power:
        if room not in layout.rooms:
            raise ValidationError(f"room_power references unknown room {room!r}")
    if world.tick < 0:
        raise ValidationError("tick must be non-negative")


# mapping property -> externally visible state flag
_VISIBLE_FLAGS = (
    ("openable", "open"),
    ("breakable", "broken"),
    ("dirtyable", "dirty"),
    ("heatable", "hot"),
    ("chillable", "cold"),
    ("toggleable", "toggled_on"),
    ("cookable", "cooked"),
    ("fillable", "filled_with"),
)


def symbolic_observation(world: WorldState, heading: str, fov_deg: float = 90.0,
                         max_range: int = 12) -> list[dict]:
    """Symbolic stand-in for a camera frame.

    Returns one entry per instance whose resolved cell is inside the view
    cone and range, not hidden in a closed container and not occluded by
    a blocked cell. Sorted by instance_id.
    """
    if heading not in geometry.HEADINGS:
        raise ValidationError(f"bad heading {heading!r}")
    agent_cell = world.agent.cell
    out = []
    for iid in sorted(world.objects):
        cell = world.resolved_cell(iid)
        if cell is None:
            continue
        if geometry.chebyshev(agent_cell, cell) > max_range:
            continue
        if not geometry.in_view_cone(heading, agent_cell, cell, fov_deg):
            continue
        if world.hidden_in_closed_container(iid):
            continue
        if not world.layout.line_of_sight(agent_cell, cell):
            continue
        inst = world.objects[iid]
        cls = world.catalog[inst.class_id]
        flags: dict = {"color": world.effective_color(iid)}
        for prop, flag in _VISIBLE_FLAGS:
            if cls.has(prop):
                flags[flag] = getattr(inst.state, flag)
        if inst.state.used:
            flags["used"] = True
        out.append({
            "instance_id": iid,
            "class_id": inst.class_id,
            "bearing": geometry.bearing_sector(heading, agent_cell, cell),
            "distance": geometry.chebyshev(agent_cell, cell),
            "visible_state_flags": flags,
        })
    return out
