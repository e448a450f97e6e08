"""Scripted instruction follower.

A deterministic stand-in for a learned policy: instructions matching a
small documented grammar are resolved against ground truth, turned into
goal conditions, planned and executed in the owning session. Ambiguous
class references (several instances of the named class) raise a
clarification question using the reference template; the next user
message may answer with an instance id, a color or a room name.

Grammar (articles optional, case-insensitive):

    pick up the X
    put | place | insert the X on | in | into the Y
    pick up the X and put it on | in the Y
    pour the X into the Y
    heat | freeze | chill | repair | fix | clean | wash | break | smash |
        scan the X
    fill the X with water | coffee | milk
    turn on | toggle | switch on the X
    color | paint the X COLOR  /  change the color of the X to COLOR
    go to the R           (room, viewpoint or object class)
    read the sticky note
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .affordance import InteractionAction
from .cdf import GoalCondition
from .errors import ArenaError, UnparsableInstruction
from .nav import NavAction
from .qa import display_name, load_vocabulary, answer_reference, _question
from .runtime import SessionState, record_dialog, step
from . import planner

_COLORS = ("red", "green", "blue", "white", "black", "yellow", "purple",
           "silver", "brown", "gray", "clear", "orange", "beige", "gold", "bronze")
_LIQUIDS = ("water", "coffee", "milk")


@dataclass
class AgentReply:
    dialog: list[str] = field(default_factory=list)
    actions: list = field(default_factory=list)
    question: str | None = None  # set when the agent needs clarification


@dataclass
class _Pending:
    class_id: str
    candidates: list[str]
    rebuild: object  # instance_id -> list[GoalCondition]


class ScriptedAgent:
    """One agent bound to one running session."""

    def __init__(self, session: SessionState):
        self.session = session
        self.vocab = load_vocabulary(session.world.catalog)
        self.pending: _Pending | None = None

    # -- vocabulary helpers -------------------------------------------------

    def _find_class(self, text: str) -> str | None:
        words = re.findall(r"[a-z0-9_']+", text.lower())
        max_len = max((len(k.split()) for k in self.vocab), default=1)
        for start in range(len(words)):
            for span in range(min(max_len, len(words) - start), 0, -1):
                surface = " ".join(words[start:start + span])
                if surface in self.vocab:
                    return self.vocab[surface]
        return None

    def _instances_of(self, class_id: str) -> list[str]:
        return sorted(i for i, o in self.session.world.objects.items()
                      if o.class_id == class_id)

    def _resolve(self, phrase: str) -> tuple[str | None, str | None, list[str]]:
        """(instance_id, class_id, candidates); instance None when ambiguous.

        Room names and color words in the phrase narrow the candidates
        before a clarification question is raised.
        """
        cls = self._find_class(phrase)
        if cls is None:
            return None, None, []
        cands = self._instances_of(cls)
        if len(cands) > 1:
            cands = self._narrow(phrase, cands)
        if len(cands) == 1:
            return cands[0], cls, cands
        return None, cls, cands

    def _narrow(self, phrase: str, candidates: list[str]) -> list[str]:
        world = self.session.world
        spaced = phrase.lower().replace("_", " ")
        for room in sorted(world.layout.rooms):
            if room.replace("_", " ") in spaced:
                narrowed = [i for i in candidates if world.room_of(i) == room]
                if narrowed:
                    return narrowed
        for color in _COLORS:
            if re.search(rf"\b{color}\b", spaced):
                narrowed = [i for i in candidates
                            if world.effective_color(i) == color]
                if narrowed:
                    return narrowed
        return candidates

    # -- disambiguation ------------------------------------------------------

    def _match_pending(self, text: str) -> str | None:
        lowered = text.lower()
        world = self.session.world
        for iid in self.pending.candidates:
            if iid.lower() in lowered:
                return iid
        for iid in self.pending.candidates:
            color = world.effective_color(iid)
            if color and re.search(rf"\b{re.escape(color)}\b", lowered):
                return iid
        for iid in self.pending.candidates:
            room = world.room_of(iid) or ""
            if room and room.replace("_", " ") in lowered.replace("_", " "):
                return iid
        return None

    # -- main entry ----------------------------------------------------------

    def handle(self, text: str) -> AgentReply:
        record_dialog(self.session, "user", text)
        reply = AgentReply()
        try:
            if self.pending is not None:
                iid = self._match_pending(text)
                if iid is None:
                    reply.dialog.append(
                        "Please name the instance id, its color or its room.")
                    self._say(reply)
                    return reply
                built = self.pending.rebuild(iid)
                self.pending = None
                if isinstance(built, NavAction):
                    _, frame = step(self.session, built)
                    reply.actions.append(built)
                    ok = frame.last_action_result["success"]
                    reply.dialog.append(
                        "Here." if ok else
                        f"I can't get there: {frame.last_action_result['message']}")
                else:
                    self._plan_and_run(built, reply)
                self._say(reply)
                return reply
            self._dispatch(text, reply)
        except UnparsableInstruction:
            raise
        except ArenaError as exc:
            reply.dialog.append(f"I can't do that: {exc}")
        self._say(reply)
        return reply

    def _say(self, reply: AgentReply) -> None:
        for line in reply.dialog:
            record_dialog(self.session, "robot", line)

    # -- command dispatch ------------------------------------------------------

    _STATE_BUILDERS = {
        "heat": lambda iid: [GoalCondition("state_is", iid, flag="hot", value=True)],
        "freeze": lambda iid: [GoalCondition("state_is", iid, flag="cold", value=True)],
        "chill": lambda iid: [GoalCondition("state_is", iid, flag="cold", value=True)],
        "repair": lambda iid: [GoalCondition("state_is", iid, flag="broken", value=False)],
        "fix": lambda iid: [GoalCondition("state_is", iid, flag="broken", value=False)],
        "clean": lambda iid: [GoalCondition("state_is", iid, flag="dirty", value=False)],
        "wash": lambda iid: [GoalCondition("state_is", iid, flag="dirty", value=False)],
        "break": lambda iid: [GoalCondition("state_is", iid, flag="broken", value=True)],
        "smash": lambda iid: [GoalCondition("state_is", iid, flag="broken", value=True)],
        "scan": lambda iid: [GoalCondition("scanned", iid)],
    }

    def _dispatch(self, text: str, reply: AgentReply) -> None:
        t = re.sub(r"[.!?]", "", text.strip().lower())
        t = re.sub(r"\s+", " ", t)

        m = re.match(r"^(heat|freeze|chill|repair|fix|clean|wash) (?:the )?(?:broken |dirty )?"
                     r"(.+?),? and (?:deliver|bring|take) it to (?:the )?(.+)$", t)
        if m:
            self._deliver_compound(m.group(2), m.group(3),
                                   self._STATE_BUILDERS[m.group(1)], reply)
            return
        m = re.match(r"^fill (?:the )?(.+?) with (\w+),? and (?:deliver|bring|take) it to "
                     r"(?:the )?(.+)$", t)
        if m:
            liquid = m.group(2)
            if liquid not in _LIQUIDS:
                raise UnparsableInstruction(f"unknown liquid {liquid!r}")
            self._deliver_compound(
                m.group(1), m.group(3),
                lambda iid: [GoalCondition("filled", iid, liquid=liquid)], reply)
            return
        m = re.match(r"^use the color changer to make (?:the )?(.+?) (\w+),? then "
                     r"(?:deliver|bring|take) it to (?:the )?(.+)$", t)
        if m and m.group(2) in _COLORS:
            color = m.group(2)
            self._deliver_compound(
                m.group(1), m.group(3),
                lambda iid: [GoalCondition("colored", iid, color=color)], reply)
            return
        m = re.match(r"^pour (?:the )?(\w+) from (?:the )?(.+?) (?:into|in) (?:the )?(.+)$", t)
        if m:
            self._goal_pour(m.group(2), m.group(3), reply)
            return
        m = re.match(r"^find (?:the )?(.+?) and (break|smash|scan|repair|clean) it$", t)
        if m:
            self._simple_goal(m.group(1), reply, self._STATE_BUILDERS[m.group(2)])
            return
        m = re.match(r"^pick up (?:the )?(.+?) and (?:put|place) (?:it|the \1) "
                     r"(?:on|in|into) (?:the )?(.+)$", t)
        if m:
            self._goal_put(m.group(1), m.group(2), reply)
            return
        m = re.match(r"^(?:put|place|insert) (?:the )?(.+?) (?:on|in|into) (?:the )?(.+)$", t)
        if m:
            self._goal_put(m.group(1), m.group(2), reply)
            return
        m = re.match(r"^pour (?:the )?(.+?) (?:into|in) (?:the )?(.+)$", t)
        if m:
            self._goal_pour(m.group(1), m.group(2), reply)
            return
        m = re.match(r"^pick up (?:the )?(.+)$", t)
        if m:
            self._simple_goal(m.group(1), reply,
                              lambda iid: [GoalCondition("holding", iid)])
            return
        m = re.match(r"^(heat|freeze|chill|repair|fix|clean|wash|break|smash|scan) "
                     r"(?:the )?(.+)$", t)
        if m:
            self._simple_goal(m.group(2), reply, self._STATE_BUILDERS[m.group(1)])
            return
        m = re.match(r"^fill (?:the )?(.+?) with (\w+)$", t)
        if m:
            liquid = m.group(2)
            if liquid not in _LIQUIDS:
                raise UnparsableInstruction(f"unknown liquid {liquid!r}")
            self._simple_goal(m.group(1), reply,
                              lambda iid: [GoalCondition("filled", iid, liquid=liquid)])
            return
        m = re.match(r"^(?:turn on|toggle|switch on) (?:the )?(.+)$", t)
        if m:
            self._simple_goal(m.group(1), reply,
                              lambda iid: [GoalCondition("toggled", iid)])
            return
        m = (re.match(r"^(?:color|paint) (?:the )?(.+?) (\w+)$", t)
             or re.match(r"^change the color of (?:the )?(.+?) to (\w+)$", t))
        if m and m.group(2) in _COLORS:
            color = m.group(2)
            self._simple_goal(m.group(1), reply,
                              lambda iid: [GoalCondition("colored", iid, color=color)])
            return
        m = re.match(r"^(?:read|examine) (?:the )?(?:sticky )?note.*$", t)
        if m:
            self._examine_note(reply)
            return
        m = re.match(r"^go to (?:the )?(.+)$", t)
        if m:
            self._goto(m.group(1), reply)
            return
        raise UnparsableInstruction(f"instruction does not match the grammar: {text!r}")

    # -- goal builders --------------------------------------------------------

    def _simple_goal(self, phrase: str, reply: AgentReply, builder) -> None:
        iid, cls, cands = self._resolve(phrase)
        if cls is None:
            raise UnparsableInstruction(f"no known object in {phrase!r}")
        if not cands:
            reply.dialog.append(f"I don't see any {display_name(cls)} here.")
            return
        if iid is None:
            self._ask_which(cls, cands, builder, reply)
            return
        self._plan_and_run(builder(iid), reply)

    def _goal_put(self, what: str, where: str, reply: AgentReply) -> None:
        dest_iid, dest_cls, dest_cands = self._resolve(where)
        what_iid, what_cls, what_cands = self._resolve(what)
        if what_cls is None or dest_cls is None:
            raise UnparsableInstruction(f"no known object in {what!r}/{where!r}")
        if not what_cands:
            reply.dialog.append(f"I don't see any {display_name(what_cls)} here.")
            return
        if not dest_cands:
            reply.dialog.append(f"I don't see any {display_name(dest_cls)} here.")
            return
        if what_iid is None:
            self._ask_which(what_cls, what_cands,
                            lambda iid: self._located_goals(iid, dest_iid, dest_cls),
                            reply)
            return
        if dest_iid is None:
            self._ask_which(dest_cls, dest_cands,
                            lambda dest: self._located_goals(what_iid, dest, dest_cls),
                            reply)
            return
        self._plan_and_run(self._located_goals(what_iid, dest_iid, dest_cls), reply)

    def _located_goals(self, what: str, dest: str | None, dest_cls: str) -> list[GoalCondition]:
        return [GoalCondition("located", what, receptacle=dest or dest_cls)]

    def _deliver_compound(self, target_phrase: str, dest_phrase: str,
                          state_goals, reply: AgentReply) -> None:
        tgt, tcls, tcands = self._resolve(target_phrase)
        dst, dcls, dcands = self._resolve(dest_phrase)
        if tcls is None or dcls is None:
            raise UnparsableInstruction(
                f"no known object in {target_phrase!r}/{dest_phrase!r}")
        if not tcands:
            reply.dialog.append(f"I don't see any {display_name(tcls)} here.")
            return
        if not dcands:
            reply.dialog.append(f"I don't see any {display_name(dcls)} here.")
            return
        if tgt is None:
            self._ask_which(
                tcls, tcands,
                lambda i: state_goals(i) + self._located_goals(i, dst, dcls), reply)
            return
        if dst is None:
            self._ask_which(
                dcls, dcands,
                lambda d: state_goals(tgt) + self._located_goals(tgt, d, dcls), reply)
            return
        self._plan_and_run(state_goals(tgt) + self._located_goals(tgt, dst, dcls), reply)

    def _goal_pour(self, src_phrase: str, dst_phrase: str, reply: AgentReply) -> None:
        src_iid, src_cls, src_c = self._resolve(src_phrase)
        dst_iid, dst_cls, dst_c = self._resolve(dst_phrase)
        if src_cls is None or dst_cls is None:
            raise UnparsableInstruction("pour needs two known containers")
        if not src_c or not dst_c:
            reply.dialog.append("I don't see those containers here.")
            return
        if src_iid is None:
            self._ask_which(src_cls, src_c,
                            lambda iid: self._pour_goals(iid, dst_iid or dst_cls), reply)
            return
        if dst_iid is None:
            self._ask_which(dst_cls, dst_c,
                            lambda dst: self._pour_goals(src_iid, dst), reply)
            return
        self._plan_and_run(self._pour_goals(src_iid, dst_iid), reply)

    def _pour_goals(self, src: str, dst: str) -> list[GoalCondition]:
        liquid = None
        inst = self.session.world.objects.get(src)
        if inst is not None:
            liquid = inst.state.filled_with
        return [GoalCondition("filled", dst, liquid=liquid),
                GoalCondition("filled", src, liquid=None)]

    def _ask_which(self, cls: str, candidates: list[str], rebuild, reply: AgentReply) -> None:
        self.pending = _Pending(cls, candidates, rebuild)
        question = _question("ref", cls).text
        options = "; ".join(
            answer_reference(self.session.world, iid).text for iid in candidates)
        reply.question = question
        reply.dialog.append(question)
        reply.dialog.append(f"Candidates: {options}")

    # -- execution --------------------------------------------------------------

    def _plan_and_run(self, goals: list[GoalCondition], reply: AgentReply) -> None:
        problem = planner.compile_from_world(self.session.world, goals,
                                             self.session.rules)
        plan = planner.solve(problem, max_expansions=60_000, mode="astar")
        if not plan.steps:
            reply.dialog.append("That is already done.")
            return
        for action in plan.steps:
            if self.session.phase != "Running":
                break
            _, frame = step(self.session, action)
            reply.actions.append(action)
            if not frame.last_action_result["success"]:
                reply.dialog.append(
                    f"Action failed: {frame.last_action_result['message']}")
                return
        reply.dialog.append(f"Done ({len(reply.actions)} actions).")
        if self.session.phase == "Succeeded":
            reply.dialog.append("Mission complete!")

    def _goto(self, phrase: str, reply: AgentReply) -> None:
        name = phrase.strip().replace(" ", "_")
        world = self.session.world
        if name in world.layout.rooms:
            action = NavAction("GotoRoom", name=name)
        elif world.layout.viewpoint(name) is not None:
            action = NavAction("GotoViewpoint", name=name)
        else:
            iid, cls, cands = self._resolve(phrase)
            if cls is None:
                raise UnparsableInstruction(f"no room, viewpoint or object in {phrase!r}")
            if not cands:
                reply.dialog.append(f"I don't see any {display_name(cls)} here.")
                return
            if iid is None:
                self._ask_which(cls, cands,
                                lambda i: NavAction("GotoObject", instance_id=i), reply)
                return
            action = NavAction("GotoObject", instance_id=iid)
        _, frame = step(self.session, action)
        reply.actions.append(action)
        ok = frame.last_action_result["success"]
        reply.dialog.append("Here." if ok else
                            f"I can't get there: {frame.last_action_result['message']}")

    def _examine_note(self, reply: AgentReply) -> None:
        world = self.session.world
        notes = [i for i, o in sorted(world.objects.items())
                 if o.class_id == "sticky_note"]
        if not notes:
            reply.dialog.append("There is no sticky note here.")
            return
        from .nav import path_cost
        best = None
        for iid in notes:
            cell = world.resolved_cell(iid)
            cost = path_cost(world.layout, world.agent.cell, cell)
            if cost is not None and (best is None or cost < best[1]):
                best = (iid, cost)
        if best is None:
            reply.dialog.append("I cannot reach a sticky note.")
            return
        iid = best[0]
        _, frame = step(self.session, NavAction("GotoObject", instance_id=iid))
        reply.actions.append(NavAction("GotoObject", instance_id=iid))
        _, frame = step(self.session, InteractionAction("Examine", iid))
        reply.actions.append(InteractionAction("Examine", iid))
        if frame.last_action_result["success"]:
            reply.dialog.append(f"The note says: {frame.last_action_result['message']}")
        else:
            reply.dialog.append(
                f"I could not read it: {frame.last_action_result['message']}")


def agent_for(session: SessionState) -> ScriptedAgent:
    """One persistent agent per session (disambiguation spans utterances)."""
    agent = getattr(session, "_scripted_agent", None)
    if agent is None:
        agent = ScriptedAgent(session)
        session._scripted_agent = agent
    return agent


def scripted_agent(session: SessionState, instruction: str) -> list:
    """Run one instruction; returns the executed actions."""
    reply = agent_for(session).handle(instruction)
    return reply.actions
