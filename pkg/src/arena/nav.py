"""Navigation: goto targets, primitive moves, look-around, shortest paths.

Paths are optimal 4-connected routes over the layout occupancy grid,
computed from a goal-rooted BFS distance field followed by a greedy
descent that breaks ties in fixed N, E, S, W neighbor order, so the
chosen path is deterministic. Any goto variant costs one robot action
regardless of length; the traversed cell count is kept as telemetry.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import geometry, gridops
from .affordance import ActionResult, default_rules
from .errors import Unreachable, ValidationError
from .scene import Cell, SceneLayout, WorldState

_GOTO_KINDS = ("GotoViewpoint", "GotoRoom", "GotoObject")
_KINDS = _GOTO_KINDS + ("MoveForward", "MoveBackward", "Rotate", "LookAround")


@dataclass(frozen=True)
class NavAction:
    kind: str
    name: str | None = None          # viewpoint or room name
    instance_id: str | None = None   # GotoObject target
    cells: int = 1                   # MoveForward / MoveBackward distance
    degrees: int = 90                # Rotate argument, multiple of 90

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown nav action {self.kind!r}")
        if self.kind in ("GotoViewpoint", "GotoRoom") and not self.name:
            raise ValidationError(f"{self.kind} needs a name")
        if self.kind == "GotoObject" and not self.instance_id:
            raise ValidationError("GotoObject needs an instance_id")
        if self.kind in ("MoveForward", "MoveBackward") and self.cells < 1:
            raise ValidationError("move distance must be >= 1")
        if self.kind == "Rotate" and self.degrees % 90 != 0:
            raise ValidationError("rotation must be a multiple of 90 degrees")

    def to_json(self) -> dict:
        out = {"type": "nav", "kind": self.kind}
        if self.name is not None:
            out["name"] = self.name
        if self.instance_id is not None:
            out["instance_id"] = self.instance_id
        if self.kind in ("MoveForward", "MoveBackward"):
            out["cells"] = self.cells
        if self.kind == "Rotate":
            out["degrees"] = self.degrees
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "NavAction":
        return cls(doc["kind"], doc.get("name"), doc.get("instance_id"),
                   doc.get("cells", 1), doc.get("degrees", 90))


@dataclass
class Path:
    cells: list[Cell]
    cost: int


def shortest_path(layout: SceneLayout, start: Cell, goal: Cell) -> Path:
    """Optimal path between two unblocked cells; raises Unreachable."""
    for cell in (start, goal):
        if not layout.in_bounds(cell):
            raise Unreachable(f"cell {cell} out of bounds")
        if layout.blocked(cell):
            raise Unreachable(f"cell {cell} is blocked")
    field = layout.distance_field(goal)
    cells = gridops.descend_path(field, start)
    if cells is None:
        raise Unreachable(f"no path from {start} to {goal}")
    path = [(int(x), int(y)) for x, y in cells]
    return Path(path, len(path) - 1)


def path_cost(layout: SceneLayout, start: Cell, goal: Cell) -> int | None:
    """Cost of the optimal path, None when unreachable. Cheap: field only."""
    if not layout.in_bounds(start) or not layout.in_bounds(goal):
        return None
    if layout.blocked(start) or layout.blocked(goal):
        return None
    d = int(layout.distance_field(goal)[start[1], start[0]])
    return None if d < 0 else d


def reach_cells(layout: SceneLayout, target: Cell, max_range: int) -> list[Cell]:
    """Unblocked cells within Chebyshev range of target with line of sight."""
    out = []
    tx, ty = target
    for dy in range(-max_range, max_range + 1):
        for dx in range(-max_range, max_range + 1):
            cell = (tx + dx, ty + dy)
            if not layout.in_bounds(cell) or layout.blocked(cell):
                continue
            if layout.line_of_sight(cell, target):
                out.append(cell)
    return out


def _nearest_reach_cell(world: WorldState, target: Cell, max_range: int) -> tuple[Cell, int] | None:
    """Reachable interaction cell with minimal path cost; ties by (y, x)."""
    best = None
    for cell in reach_cells(world.layout, target, max_range):
        cost = path_cost(world.layout, world.agent.cell, cell)
        if cost is None:
            continue
        key = (cost, cell[1], cell[0])
        if best is None or key < best[0]:
            best = (key, cell, cost)
    if best is None:
        return None
    return best[1], best[2]


def _walk_to(world: WorldState, goal: Cell, face: Cell | None = None) -> int:
    """Move the agent along the optimal path; returns traversed cell count."""
    path = shortest_path(world.layout, world.agent.cell, goal)
    world.agent.cell = goal
    if len(path.cells) >= 2:
        world.agent.heading = geometry.heading_between(path.cells[-2], path.cells[-1],
                                                       world.agent.heading)
    if face is not None:
        world.agent.heading = geometry.heading_between(goal, face, world.agent.heading)
    return path.cost


def execute_nav(world: WorldState, action: NavAction,
                rules=None) -> tuple[WorldState, ActionResult, int]:
    """Run one navigation action; counts as a single robot action.

    Failures come back as ActionResults (a failed goto leaves the world
    unchanged except the tick; a collision truncates the move at the
    last free cell and reports OutOfRange).
    """
    rules = rules or default_rules()
    new_world = world.copy()
    new_world.tick += 1
    agent = new_world.agent

    if action.kind == "GotoViewpoint":
        vp = new_world.layout.viewpoint(action.name)
        if vp is None:
            return new_world, ActionResult(False, "UnknownViewpoint",
                                           f"no viewpoint {action.name!r}"), 0
        try:
            steps = _walk_to(new_world, vp.cell)
        except Unreachable as exc:
            return _fail_unreachable(world, new_world, exc)
        return new_world, ActionResult(True, None, f"at {vp.name}"), steps

    if action.kind == "GotoRoom":
        if action.name not in new_world.layout.rooms:
            return new_world, ActionResult(False, "UnknownRoom",
                                           f"no room {action.name!r}"), 0
        best = None
        for vp in sorted(new_world.layout.viewpoints_in(action.name), key=lambda v: v.name):
            cost = path_cost(new_world.layout, agent.cell, vp.cell)
            if cost is None:
                continue
            if best is None or cost < best[1]:
                best = (vp, cost)
        if best is None:
            return new_world, ActionResult(False, "Unreachable",
                                           f"no reachable viewpoint in {action.name!r}"), 0
        steps = _walk_to(new_world, best[0].cell)
        return new_world, ActionResult(True, None, f"at {best[0].name}"), steps

    if action.kind == "GotoObject":
        if action.instance_id not in new_world.objects:
            return new_world, ActionResult(False, "UnknownInstance",
                                           f"no instance {action.instance_id!r}"), 0
        target_cell = new_world.resolved_cell(action.instance_id)
        if target_cell is None:
            return new_world, ActionResult(False, "PreconditionFailed",
                                           f"{action.instance_id} is in the agent's hand"), 0
        found = _nearest_reach_cell(new_world, target_cell, rules.interaction_range)
        if found is None:
            return new_world, ActionResult(False, "Unreachable",
                                           f"cannot reach {action.instance_id}"), 0
        goal, _ = found
        steps = _walk_to(new_world, goal, face=target_cell)
        return new_world, ActionResult(True, None, f"near {action.instance_id}"), steps

    if action.kind in ("MoveForward", "MoveBackward"):
        hx, hy = geometry.HEADING_VECS[agent.heading]
        if action.kind == "MoveBackward":
            hx, hy = -hx, -hy
        moved = 0
        for _ in range(action.cells):
            nxt = (agent.cell[0] + hx, agent.cell[1] + hy)
            if not new_world.layout.in_bounds(nxt) or new_world.layout.blocked(nxt):
                return new_world, ActionResult(
                    False, "OutOfRange",
                    f"blocked after {moved} of {action.cells} cells"), moved
            agent.cell = nxt
            moved += 1
        return new_world, ActionResult(True, None, f"moved {moved} cells"), moved

    if action.kind == "Rotate":
        agent.heading = geometry.rotate_heading(agent.heading, action.degrees)
        return new_world, ActionResult(True, None, f"facing {agent.heading}"), 0

    # LookAround: no pose change; observations are gathered by the caller
    return new_world, ActionResult(True, None, "looked around"), 0


def _fail_unreachable(old_world: WorldState, ticked: WorldState, exc: Exception):
    fresh = old_world.copy()
    fresh.tick = ticked.tick
    return fresh, ActionResult(False, "Unreachable", str(exc)), 0


def look_around(world: WorldState, fov_deg: float = 90.0, max_range: int = 12) -> dict[str, list]:
    """Four observations at fixed headings N, E, S, W; agent pose untouched."""
    from .scene import symbolic_observation
    return {h: symbolic_observation(world, h, fov_deg, max_range)
            for h in geometry.HEADINGS}
