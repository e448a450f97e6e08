"""Mission planning: STRIPS compilation, forward search, PDDL export.

``compile_problem`` grounds a mission into propositional operators built
only from the affordance and device tables: navigation collapses to
one-action viewpoint hops, and object reach is resolved at grounding
time (an interaction is grounded at viewpoint v only when the object's
candidate position is within interaction range of v with line of
sight). Objects irrelevant to the goal are left out of the grounding;
their fluents are inert.

Search runs over fluent sets. BFS mode is exact in action count and is
the default; A* mode uses an unsatisfied-goal-count heuristic for
speed and may return slightly longer plans. Tie-breaking is by
operator name everywhere, so plans are deterministic.

The planner reads ground truth by design; agents on the session server
never see the compiled problem.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field

from . import geometry
from .affordance import InteractionAction, RuleSet, default_rules
from .cdf import CDF, GoalCondition, build_world
from .errors import CompileError, BudgetExceeded, Unsolvable, ReplayDivergence
from .nav import NavAction
from .scene import Catalog, WorldState

Fluent = tuple
START_VP = "start-pose"

_COMPLEMENT = {"open": "closed", "broken": "intact", "dirty": "clean",
               "toggled": "untoggled"}
_FLAG_OF_STATE = {"open": "open", "broken": "broken", "dirty": "dirty",
                  "hot": "hot", "cold": "cold", "cooked": "cooked",
                  "toggled_on": "toggled", "used": "scanned"}
_BASE_COLORS = ("red", "green", "blue")


@dataclass(frozen=True)
class GroundOp:
    name: str
    pre: frozenset
    add: frozenset
    dele: frozenset
    action: object | None = None  # runtime NavAction / InteractionAction

    def apply(self, state: frozenset) -> frozenset:
        return (state - self.dele) | self.add


@dataclass
class PlanningProblem:
    initial: frozenset
    goal: list[frozenset]  # conjunction of disjunct-sets
    operators: list[GroundOp]
    cdf: CDF | None = None
    relevant: frozenset = frozenset()

    def goal_satisfied(self, state: frozenset) -> bool:
        return all(state & disj for disj in self.goal)

    def unsatisfied_count(self, state: frozenset) -> int:
        return sum(1 for disj in self.goal if not (state & disj))


@dataclass
class Plan:
    steps: list  # NavAction | InteractionAction
    cost: int
    op_names: list[str] = field(default_factory=list)


class _Grounder:
    def __init__(self, goals: list[GoalCondition], world: WorldState, rules: RuleSet):
        self.goals = goals
        self.world = world
        self.rules = rules
        self.catalog: Catalog = world.catalog
        self.ops: list[GroundOp] = []
        self.vps: dict[str, tuple[int, int]] = {START_VP: world.agent.cell}
        for vp in world.layout.viewpoints:
            self.vps[vp.name] = vp.cell
        self.relevant = self._relevant_instances()
        self.movables = sorted(o for o in self.relevant
                               if self.catalog[world.objects[o].class_id].has("pickupable"))
        self.receptacles = self._placement_receptacles()
        self.liquids = self._possible_liquids()
        self.loc_fluents = {o: self._location_candidates(o) for o in self.movables}

    # -- relevance ---------------------------------------------------------

    def _instances_of_class(self, class_id: str) -> list[str]:
        return sorted(i for i, o in self.world.objects.items() if o.class_id == class_id)

    def _resolve_ref(self, ref: str) -> list[str]:
        if ref in self.world.objects:
            return [ref]
        return self._instances_of_class(ref)

    def _relevant_instances(self) -> set[str]:
        world = self.world
        rel: set[str] = set()
        needs: set[str] = set()
        for goal in self.goals:
            rel.update(self._resolve_ref(goal.target))
            if goal.receptacle:
                rel.update(self._resolve_ref(goal.receptacle))
            if goal.predicate == "state_is" and goal.value:
                needs.add(goal.flag)
            if goal.predicate == "state_is" and not goal.value:
                needs.add(f"not_{goal.flag}")
            if goal.predicate == "filled":
                needs.add("filled_coffee" if goal.liquid == "coffee" else "filled")
            if goal.predicate == "colored":
                needs.add("colored")
            if goal.predicate == "toggled":
                needs.add("toggled")

        def add_class(cls: str):
            rel.update(self._instances_of_class(cls))

        if "hot" in needs:
            for cls in ("microwave", "red_monitor", "laser_cannon", "laser_shelf",
                        "control_panel"):
                add_class(cls)
        if "cold" in needs:
            for cls in ("fridge", "blue_monitor", "freeze_shelf"):
                add_class(cls)
        if "not_broken" in needs:
            add_class("time_machine")
        if "not_dirty" in needs or "filled" in needs or "filled_coffee" in needs:
            add_class("sink")
        if "filled_coffee" in needs:
            for cls in ("coffee_maker", "coffee_beans"):
                add_class(cls)
        if "colored" in needs:
            add_class("color_changer")
            for goal in self.goals:
                if goal.predicate == "colored":
                    add_class(f"color_button_{goal.color}")
        if "toggled" in needs:
            # fuse boxes matter when a toggle target is power gated
            for goal in self.goals:
                if goal.predicate != "toggled":
                    continue
                for iid in self._resolve_ref(goal.target):
                    dev = self.rules.device_for(world.objects[iid].class_id)
                    if dev and any(p.get("kind") == "room_power" for p in dev.preconditions):
                        add_class("fuse_box")

        # containers currently holding a relevant object are needed to reach it
        grew = True
        while grew:
            grew = False
            for iid in sorted(rel):
                loc = world.objects[iid].location
                if loc.kind in ("inside", "on") and loc.ref not in rel:
                    rel.add(loc.ref)
                    grew = True
        return rel

    def _placement_receptacles(self) -> list[str]:
        out = []
        for iid in sorted(self.relevant):
            inst = self.world.objects[iid]
            cls = self.catalog[inst.class_id]
            if cls.has("receptacle") and not cls.has("pickupable"):
                out.append(iid)
        return out

    def _possible_liquids(self) -> list[str]:
        liqs = {"water", "coffee"}
        for iid in self.movables:
            liq = self.world.objects[iid].state.filled_with
            if liq:
                liqs.add(liq)
        return sorted(liqs)

    # -- geometry ----------------------------------------------------------

    def _static_cell(self, iid: str) -> tuple[int, int] | None:
        """Cell of an immobile instance (movable holders make it dynamic)."""
        world = self.world
        cur = iid
        while True:
            inst = world.objects[cur]
            if self.catalog[inst.class_id].has("pickupable"):
                return None
            loc = inst.location
            if loc.kind == "cell":
                return loc.cell
            if loc.kind == "held":
                return None
            cur = loc.ref

    def _location_candidates(self, o: str) -> dict[Fluent, tuple[int, int]]:
        """Position fluents for a movable object, each with its fixed cell."""
        world = self.world
        out: dict[Fluent, tuple[int, int]] = {}
        init = self._initial_location_fluent(o)
        if init is not None:
            fluent, cell = init
            if cell is not None:
                out[fluent] = cell
        for r in self.receptacles:
            cell = self._static_cell(r)
            if cell is None:
                continue
            mode = self.catalog[world.objects[r].class_id].container_mode
            fluent = ("in", o, r) if mode == "inside" else ("on", o, r)
            out[fluent] = cell
        return out

    def _initial_location_fluent(self, o: str):
        inst = self.world.objects[o]
        loc = inst.location
        if loc.kind == "cell":
            return ("on", o, f"floor_{loc.cell[0]}_{loc.cell[1]}"), loc.cell
        if loc.kind == "held":
            return None
        mode = self.catalog[self.world.objects[loc.ref].class_id].container_mode
        fluent = ("in", o, loc.ref) if mode == "inside" else ("on", o, loc.ref)
        cell = self.world.resolved_cell(o)
        holder_cell = self._static_cell(loc.ref)
        return fluent, (holder_cell if holder_cell is not None else cell)

    def _vps_near(self, cell: tuple[int, int]) -> list[str]:
        out = []
        rng = self.rules.interaction_range
        for name, vcell in sorted(self.vps.items()):
            if geometry.chebyshev(vcell, cell) <= rng and self.world.layout.line_of_sight(vcell, cell):
                out.append(name)
        return out

    # -- fluent helpers ------------------------------------------------------

    def _openable(self, iid: str) -> bool:
        return self.catalog[self.world.objects[iid].class_id].has("openable")

    def _prop(self, iid: str, prop: str) -> bool:
        return self.catalog[self.world.objects[iid].class_id].has(prop)

    def _open_pre(self, container: str) -> list[Fluent]:
        return [("flag", container, "open")] if self._openable(container) else []

    # -- operator emission ---------------------------------------------------

    def _emit(self, name: str, pre, add, dele, action) -> None:
        self.ops.append(GroundOp(name, frozenset(pre), frozenset(add),
                                 frozenset(dele), action))

    def ground(self) -> list[GroundOp]:
        self._ground_gotos()
        self._ground_pick_place()
        self._ground_open_close()
        self._ground_simple_verbs()
        self._ground_toggles()
        self.ops.sort(key=lambda op: op.name)
        return self.ops

    def _ground_gotos(self) -> None:
        from .nav import path_cost
        names = sorted(self.vps)
        for u in names:
            for v in names:
                if u == v or v == START_VP:
                    continue
                if path_cost(self.world.layout, self.vps[u], self.vps[v]) is None:
                    continue
                self._emit(f"goto {u} {v}",
                           [("at_vp", u)], [("at_vp", v)], [("at_vp", u)],
                           NavAction("GotoViewpoint", name=v))

    def _loc_sig(self, fluent: Fluent) -> str:
        return f"{fluent[0]}:{fluent[2]}"

    def _ground_pick_place(self) -> None:
        for o in self.movables:
            for fluent, cell in self.loc_fluents[o].items():
                sig = self._loc_sig(fluent)
                holder = fluent[2]
                open_pre = []
                if fluent[0] == "in" and holder in self.world.objects:
                    open_pre = self._open_pre(holder)
                for v in self._vps_near(cell):
                    self._emit(
                        f"pickup {o} {sig} {v}",
                        [("at_vp", v), ("hand_empty",), fluent] + open_pre,
                        [("holding", o)],
                        [("hand_empty",), fluent],
                        InteractionAction("Pickup", o))
            for r in self.receptacles:
                cell = self._static_cell(r)
                if cell is None:
                    continue
                mode = self.catalog[self.world.objects[r].class_id].container_mode
                fluent = ("in", o, r) if mode == "inside" else ("on", o, r)
                open_pre = self._open_pre(r) if mode == "inside" else []
                for v in self._vps_near(cell):
                    self._emit(
                        f"place {o} {r} {v}",
                        [("at_vp", v), ("holding", o)] + open_pre,
                        [fluent, ("hand_empty",)],
                        [("holding", o)],
                        InteractionAction("Place", o, r))

    def _ground_open_close(self) -> None:
        for c in sorted(self.relevant):
            if not self._openable(c):
                continue
            cell = self._static_cell(c)
            if cell is None:
                continue
            device = self.rules.device_for(self.world.objects[c].class_id)
            for v in self._vps_near(cell):
                self._emit(f"open {c} {v}",
                           [("at_vp", v), ("flag", c, "closed")],
                           [("flag", c, "open")], [("flag", c, "closed")],
                           InteractionAction("Open", c))
                self._emit(f"close {c} {v}",
                           [("at_vp", v), ("flag", c, "open")],
                           [("flag", c, "closed")], [("flag", c, "open")],
                           InteractionAction("Close", c))
                if device is not None and device.trigger == "Close":
                    self._ground_device_variants(c, device, v, verb="Close",
                                                 extra_pre=[("flag", c, "open")],
                                                 extra_add=[("flag", c, "closed")],
                                                 extra_del=[("flag", c, "open")])

    def _ground_simple_verbs(self) -> None:
        # Break, Scan, Fill, Clean, Pour; fixed objects ground at their cell
        for o in sorted(self.relevant):
            if o in self.movables:
                continue
            cell = self._static_cell(o)
            if cell is None:
                continue
            if self._prop(o, "breakable"):
                for v in self._vps_near(cell):
                    self._emit(f"break {o} fixed {v}",
                               [("at_vp", v), ("flag", o, "intact")],
                               [("flag", o, "broken")], [("flag", o, "intact")],
                               InteractionAction("Break", o))
            if self._prop(o, "infectable"):
                for v in self._vps_near(cell):
                    self._emit(f"scan {o} fixed {v}",
                               [("at_vp", v)],
                               [("flag", o, "scanned")], [],
                               InteractionAction("Scan", o))
        for o in self.movables:
            locs = self.loc_fluents[o]
            if self._prop(o, "breakable"):
                for fluent, cell in locs.items():
                    for v in self._vps_near(cell):
                        self._emit(f"break {o} {self._loc_sig(fluent)} {v}",
                                   [("at_vp", v), fluent, ("flag", o, "intact")],
                                   [("flag", o, "broken")], [("flag", o, "intact")],
                                   InteractionAction("Break", o))
            if self._prop(o, "infectable"):
                for fluent, cell in locs.items():
                    for v in self._vps_near(cell):
                        self._emit(f"scan {o} {self._loc_sig(fluent)} {v}",
                                   [("at_vp", v), fluent],
                                   [("flag", o, "scanned")], [],
                                   InteractionAction("Scan", o))
                for v in sorted(self.vps):
                    self._emit(f"scan {o} held {v}",
                               [("at_vp", v), ("holding", o)],
                               [("flag", o, "scanned")], [],
                               InteractionAction("Scan", o))
            sink_vps = self._sink_vps()
            if self._prop(o, "fillable"):
                for v in sink_vps:
                    self._emit(f"fill {o} {v}",
                               [("at_vp", v), ("holding", o), ("empty", o)],
                               [("filled", o, "water")], [("empty", o)],
                               InteractionAction("Fill", o))
            if self._prop(o, "dirtyable"):
                for v in sink_vps:
                    self._emit(f"clean {o} {v}",
                               [("at_vp", v), ("holding", o), ("flag", o, "dirty")],
                               [("flag", o, "clean")], [("flag", o, "dirty")],
                               InteractionAction("Clean", o))
            if self._prop(o, "fillable"):
                self._ground_pours(o)

    def _sink_vps(self) -> list[str]:
        out = set()
        for sink in self._instances_of_class("sink"):
            if sink not in self.relevant:
                continue
            cell = self._static_cell(sink)
            if cell is not None:
                out.update(self._vps_near(cell))
        return sorted(out)

    def _ground_pours(self, src: str) -> None:
        for dst in sorted(self.relevant):
            if dst == src or not self._prop(dst, "fillable"):
                continue
            if self._prop(dst, "pickupable"):
                spots = self.loc_fluents.get(dst, {})
                dst_entries = [(fl, cell, [fl]) for fl, cell in spots.items()]
            else:
                cell = self._static_cell(dst)
                if cell is None:
                    continue
                dst_entries = [(None, cell, [])]
            for liq in self.liquids:
                for _, cell, extra in dst_entries:
                    sig = self._loc_sig(extra[0]) if extra else "fixed"
                    for v in self._vps_near(cell):
                        self._emit(
                            f"pour {src} {dst} {liq} {sig} {v}",
                            [("at_vp", v), ("holding", src), ("filled", src, liq),
                             ("empty", dst)] + extra,
                            [("filled", dst, liq), ("empty", src)],
                            [("filled", src, liq), ("empty", dst)],
                            InteractionAction("Pour", src, dst))

    def _ground_toggles(self) -> None:
        for d in sorted(self.relevant):
            if not self._prop(d, "toggleable"):
                continue
            cell = self._static_cell(d)
            if cell is None:
                continue
            inst = self.world.objects[d]
            device = self.rules.device_for(inst.class_id)
            broken_pre = [("flag", d, "intact")] if self._prop(d, "breakable") else []
            for v in self._vps_near(cell):
                if device is None or not device.momentary:
                    gate = []
                    if device is not None:
                        for pre in device.preconditions:
                            if pre.get("kind") == "room_power":
                                room = self.world.room_of(d)
                                gate.append(("room_power", room))
                    self._emit(f"toggle-on {d} {v}",
                               [("at_vp", v), ("flag", d, "untoggled")] + gate + broken_pre,
                               [("flag", d, "toggled")], [("flag", d, "untoggled")],
                               InteractionAction("Toggle", d))
                    self._emit(f"toggle-off {d} {v}",
                               [("at_vp", v), ("flag", d, "toggled")] + broken_pre,
                               [("flag", d, "untoggled")], [("flag", d, "toggled")],
                               InteractionAction("Toggle", d))
                else:
                    self._ground_device_variants(d, device, v, verb="Toggle",
                                                 extra_pre=broken_pre,
                                                 extra_add=[], extra_del=[])

    def _device_static_pres(self, d: str, device) -> list[list[Fluent]]:
        """Each device precondition becomes alternative fluent lists
        (a list of options; grounding multiplies over them)."""
        world = self.world
        options: list[list[list[Fluent]]] = []
        for pre in device.preconditions:
            kind = pre["kind"]
            if kind == "device_powered":
                options.append([[("device_ready", d)]])
            elif kind == "device_closed":
                options.append([[("flag", d, "closed")]])
            elif kind == "device_open":
                options.append([[("flag", d, "open")]])
            elif kind == "room_power":
                options.append([[("room_power", world.room_of(d))]])
            elif kind == "device_filled":
                options.append([[("filled", d, pre["liquid"])]])
            elif kind == "contains_class":
                cands = [x for x in self._instances_of_class(pre["class"])
                         if x in self.relevant]
                if not cands:
                    return []
                options.append([[("in", x, d)] for x in cands])
            elif kind == "room_device_loaded":
                room = world.room_of(d)
                pairs = []
                for cont in self._instances_of_class(pre["container_class"]):
                    if world.room_of(cont) != room:
                        continue
                    for x in self._instances_of_class(pre["content_class"]):
                        if x in self.relevant:
                            pairs.append([("in", x, cont)])
                if not pairs:
                    return []
                options.append(pairs)
            elif kind in ("room_receptacle_holds_any", "mounted_with_cargo"):
                continue  # subsumed by the content precondition of the effect
            else:
                raise CompileError(f"cannot compile device precondition {kind!r}")
        combos: list[list[Fluent]] = [[]]
        for opt in options:
            combos = [base + extra for base in combos for extra in opt]
        return combos

    def _device_effect_entries(self, d: str, device) -> list[tuple]:
        """(content_pre_fluent|None, target_obj|None, adds, dels, self_adds, self_dels)"""
        world = self.world
        mode = self.catalog[world.objects[d].class_id].container_mode
        entries = []
        content_rows = [e for e in device.effects
                        if e["scope"] in ("contents", "room_receptacle_contents",
                                          "mount_siblings")]
        self_adds, self_dels = [], []
        for eff in device.effects:
            if eff["scope"] == "self":
                for flag, value in eff["set"].items():
                    if flag == "filled_with":
                        if value is None:
                            self_adds.append(("empty", d))
                            for liq in self.liquids:
                                self_dels.append(("filled", d, liq))
                        else:
                            self_adds.append(("filled", d, value))
                            self_dels.append(("empty", d))
            elif eff["scope"] == "room_power":
                self_adds.append(("room_power", world.room_of(d)))
            elif eff["scope"] == "spawn":
                continue  # object creation is runtime-only; no goal needs it

        if not content_rows:
            return [(None, None, [], [], self_adds, self_dels)]

        for o in self.movables:
            adds, dels, pre = [], [], None
            for eff in content_rows:
                prop = eff.get("require_property")
                if prop and not self._prop(o, prop):
                    continue
                if eff["scope"] == "contents":
                    pre_f = ("in", o, d) if mode == "inside" else ("on", o, d)
                elif eff["scope"] == "mount_siblings":
                    mount = world.objects[d].location
                    if mount.kind not in ("on", "inside"):
                        continue
                    pre_f = ("on", o, mount.ref)
                else:  # room_receptacle_contents
                    room = world.room_of(d)
                    pre_f = None
                    for r in self._instances_of_class(eff["receptacle_class"]):
                        if world.room_of(r) == room:
                            pre_f = ("on", o, r)
                            break
                    if pre_f is None:
                        continue
                if pre is not None and pre != pre_f:
                    continue
                pre = pre_f
                for flag, value in eff["set"].items():
                    if flag == "color_override":
                        for c in self._colors_of(o):
                            if c != value:
                                dels.append(("color", o, c))
                        adds.append(("color", o, value))
                    elif value:
                        adds.append(("flag", o, flag))
                        comp = _COMPLEMENT.get(flag)
                        if comp:
                            dels.append(("flag", o, comp))
                        if flag == "hot":
                            dels.append(("flag", o, "cold"))
                        if flag == "cold":
                            dels.append(("flag", o, "hot"))
                        if flag == "filled_with":
                            pass
                    else:
                        dels.append(("flag", o, flag))
                        comp = _COMPLEMENT.get(flag)
                        if comp:
                            adds.append(("flag", o, comp))
                    if flag == "filled_with" and value:
                        adds.append(("filled", o, value))
                        dels.append(("empty", o))
                        for liq in self.liquids:
                            if liq != value:
                                dels.append(("filled", o, liq))
                        adds = [a for a in adds if a != ("flag", o, "filled_with")]
            if pre is not None and (adds or dels):
                entries.append((pre, o, adds, dels, self_adds, self_dels))
        return entries

    def _colors_of(self, o: str) -> list[str]:
        base = self.world.effective_color(o)
        return sorted(set(_BASE_COLORS) | {base})

    def _ground_device_variants(self, d: str, device, v: str, verb: str,
                                extra_pre, extra_add, extra_del) -> None:
        combos = self._device_static_pres(d, device)
        if not combos:
            return
        entries = self._device_effect_entries(d, device)
        for pre_f, o, adds, dels, self_adds, self_dels in entries:
            content_pre = [pre_f] if pre_f is not None else []
            suffix = f" {o}" if o else ""
            for i, combo in enumerate(combos):
                combo_sig = f" c{i}" if len(combos) > 1 else ""
                self._emit(
                    f"device {d}{suffix} {v}{combo_sig}",
                    [("at_vp", v)] + content_pre + combo + extra_pre,
                    adds + self_adds + extra_add,
                    dels + self_dels + extra_del,
                    InteractionAction(verb, d))

    # -- initial state and goal ----------------------------------------------

    def initial_fluents(self) -> frozenset:
        world = self.world
        out: set[Fluent] = {("at_vp", START_VP)}
        if world.agent.held is None:
            out.add(("hand_empty",))
        else:
            out.add(("holding", world.agent.held))
        for o in sorted(self.relevant):
            inst = world.objects[o]
            if self._prop(o, "pickupable") and inst.location.kind != "held":
                init = self._initial_location_fluent(o)
                if init:
                    out.add(init[0])
            st = inst.state
            if self._prop(o, "openable"):
                out.add(("flag", o, "open" if st.open else "closed"))
            if self._prop(o, "breakable"):
                out.add(("flag", o, "broken" if st.broken else "intact"))
            if self._prop(o, "dirtyable"):
                out.add(("flag", o, "dirty" if st.dirty else "clean"))
            if self._prop(o, "toggleable"):
                device = self.rules.device_for(inst.class_id)
                if device is None or not device.momentary:
                    out.add(("flag", o, "toggled" if st.toggled_on else "untoggled"))
            if self._prop(o, "fillable"):
                if st.filled_with:
                    out.add(("filled", o, st.filled_with))
                else:
                    out.add(("empty", o))
            if st.hot:
                out.add(("flag", o, "hot"))
            if st.cold:
                out.add(("flag", o, "cold"))
            if st.cooked:
                out.add(("flag", o, "cooked"))
            if st.used:
                out.add(("flag", o, "scanned"))
            if self._prop(o, "powerable") and st.powered:
                out.add(("device_ready", o))
            if self._prop(o, "pickupable"):
                out.add(("color", o, world.effective_color(o)))
        for room, on in sorted(world.room_power.items()):
            if on:
                out.add(("room_power", room))
        return frozenset(out)

    def goal_disjuncts(self) -> list[frozenset]:
        out = []
        for goal in self.goals:
            targets = self._resolve_ref(goal.target)
            if not targets:
                # target absent from the scene: well-formed but never true
                out.append(frozenset([("unsat", goal.predicate, goal.target)]))
                continue
            disj: set[Fluent] = set()
            for o in targets:
                disj.update(self._goal_fluents_for(o, goal))
            if not disj:
                raise CompileError(
                    f"goal {goal.predicate} on {goal.target!r} compiles to no fluents")
            out.append(frozenset(disj))
        return out

    def _goal_fluents_for(self, o: str, goal: GoalCondition) -> list[Fluent]:
        if goal.predicate == "state_is":
            flag = _FLAG_OF_STATE.get(goal.flag)
            if flag is None:
                raise CompileError(f"state flag {goal.flag!r} is not plannable")
            if goal.value:
                return [("flag", o, flag)]
            comp = _COMPLEMENT.get(flag)
            if comp is None:
                raise CompileError(f"negated flag {goal.flag!r} is not plannable")
            return [("flag", o, comp)]
        if goal.predicate == "holding":
            return [("holding", o)]
        if goal.predicate == "filled":
            return [("filled", o, goal.liquid)] if goal.liquid else [("empty", o)]
        if goal.predicate == "colored":
            return [("color", o, goal.color)]
        if goal.predicate == "scanned":
            return [("flag", o, "scanned")]
        if goal.predicate == "toggled":
            return [("flag", o, "toggled" if goal.value else "untoggled")]
        if goal.predicate == "located":
            if goal.room is not None:
                opts = []
                for fluent, cell in self.loc_fluents.get(o, {}).items():
                    if self.world.layout.room_of_cell(cell) == goal.room:
                        opts.append(fluent)
                return opts
            opts = []
            for r in self._resolve_ref(goal.receptacle):
                if r not in self.world.objects:
                    continue
                mode = self.catalog[self.world.objects[r].class_id].container_mode
                opts.append(("in", o, r) if mode == "inside" else ("on", o, r))
            return opts
        raise CompileError(f"unknown goal predicate {goal.predicate!r}")


def compile_from_world(world: WorldState, goals: list[GoalCondition],
                       rules: RuleSet | None = None,
                       cdf: CDF | None = None) -> PlanningProblem:
    """Ground goals against an existing world snapshot."""
    rules = rules or default_rules()
    grounder = _Grounder(goals, world, rules)
    ops = grounder.ground()
    initial = grounder.initial_fluents()
    goal = grounder.goal_disjuncts()
    problem = PlanningProblem(initial=initial, goal=goal, operators=ops, cdf=cdf,
                              relevant=frozenset(grounder.relevant))
    _check_producers(problem)
    return problem


def compile_problem(cdf: CDF, catalog: Catalog | None = None,
                    rules: RuleSet | None = None, layout=None) -> PlanningProblem:
    """Ground a mission into a propositional planning problem."""
    world = build_world(cdf, catalog=catalog, layout=layout)
    return compile_from_world(world, cdf.goals, rules=rules, cdf=cdf)


def _check_producers(problem: PlanningProblem) -> None:
    producible = set(problem.initial)
    for op in problem.operators:
        producible |= op.add
    for disj in problem.goal:
        if not (disj & producible):
            if all(f[0] == "unsat" for f in disj):
                continue  # absent target: solve() reports Unsolvable
            sample = sorted(disj)[0]
            raise CompileError(f"no operator produces any of the goal fluents {sample}")


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

def solve(problem: PlanningProblem, max_expansions: int = 200_000,
          mode: str = "bfs", astar_weight: int = 2) -> Plan:
    """Forward search; BFS is exact in action count, A* is weighted goal-count."""
    if max_expansions < 1:
        raise ValueError("max_expansions must be >= 1")
    if mode not in ("bfs", "astar"):
        raise ValueError(f"unknown search mode {mode!r}")
    start = problem.initial
    if problem.goal_satisfied(start):
        return Plan([], 0, [])
    ops = problem.operators

    if mode == "bfs":
        frontier = deque([start])
        parents: dict[frozenset, tuple] = {start: None}
        expansions = 0
        while frontier:
            state = frontier.popleft()
            expansions += 1
            if expansions > max_expansions:
                raise BudgetExceeded(f"BFS exceeded {max_expansions} expansions")
            for op in ops:
                if not op.pre <= state:
                    continue
                nxt = op.apply(state)
                if nxt in parents:
                    continue
                parents[nxt] = (state, op)
                if problem.goal_satisfied(nxt):
                    return _extract(parents, nxt)
                frontier.append(nxt)
        raise Unsolvable("search space exhausted")

    # weighted A* on unsatisfied-goal count
    counter = itertools.count()
    g_best = {start: 0}
    parents = {start: None}
    h0 = problem.unsatisfied_count(start)
    heap = [(astar_weight * h0, h0, next(counter), start)]
    expansions = 0
    while heap:
        f, h, _, state = heapq.heappop(heap)
        g = g_best[state]
        if problem.goal_satisfied(state):
            return _extract(parents, state)
        expansions += 1
        if expansions > max_expansions:
            raise BudgetExceeded(f"A* exceeded {max_expansions} expansions")
        for op in ops:
            if not op.pre <= state:
                continue
            nxt = op.apply(state)
            ng = g + 1
            if ng >= g_best.get(nxt, 1 << 30):
                continue
            g_best[nxt] = ng
            parents[nxt] = (state, op)
            nh = problem.unsatisfied_count(nxt)
            heapq.heappush(heap, (ng + astar_weight * nh, nh, next(counter), nxt))
    raise Unsolvable("search space exhausted")


def _extract(parents: dict, state: frozenset) -> Plan:
    steps, names = [], []
    cur = state
    while parents[cur] is not None:
        prev, op = parents[cur]
        steps.append(op.action)
        names.append(op.name)
        cur = prev
    steps.reverse()
    names.reverse()
    return Plan(steps, len(steps), names)


# ---------------------------------------------------------------------------
# demonstration (plan + replay through the runtime)
# ---------------------------------------------------------------------------

def demonstrate(cdf: CDF, catalog: Catalog | None = None, rules: RuleSet | None = None,
                mode: str = "bfs", max_expansions: int = 200_000, layout=None,
                config=None):
    """Compile, solve and replay a mission; returns (plan, finished session).

    Raises ReplayDivergence when the runtime rejects a planned step, and
    asserts the final goal status is success.
    """
    from .runtime import SessionConfig, start, step

    problem = compile_problem(cdf, catalog=catalog, rules=rules, layout=layout)
    plan = solve(problem, max_expansions=max_expansions, mode=mode)
    session = start(cdf, config or SessionConfig(), catalog=catalog, rules=rules,
                    layout=layout)
    for i, action in enumerate(plan.steps):
        if session.phase != "Running":
            raise ReplayDivergence(
                f"session ended early at step {i} with phase {session.phase}")
        session, frame = step(session, action)
        if not frame.last_action_result["success"]:
            raise ReplayDivergence(
                f"step {i} ({plan.op_names[i]}) failed: "
                f"{frame.last_action_result['message']}")
    if session.goal_m != 1:
        raise ReplayDivergence("plan replay finished without meeting the goal")
    return plan, session
