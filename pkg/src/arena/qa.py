"""Clarification questions and templated ground-truth answers.

Question generation recognizes object nouns by longest match against
the catalog vocabulary (class ids plus a synonyms file) and fills four
fixed templates. Answers are pure template instantiations computed
from world state; no free-form text is ever produced.

Two-token encodings ship with each question for compact model input:
a question-type token (loc/app/dir/ref) plus the object token, omitted
for direction questions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import geometry
from .data_files import default_catalog, synonyms_path
from .errors import UnknownClass, UnknownInstance
from .nav import path_cost
from .scene import AgentState, Catalog, WorldState

QTYPES = ("loc", "app", "dir", "ref")


def display_name(class_id: str) -> str:
    return class_id.replace("_", " ")


@dataclass(frozen=True)
class Question:
    qtype: str
    query_object: str | None
    text: str
    encoding: str


@dataclass(frozen=True)
class Answer:
    text: str
    slots: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# vocabulary and question generation
# ---------------------------------------------------------------------------

def load_vocabulary(catalog: Catalog | None = None,
                    synonyms_file: str | Path | None = None) -> dict[str, str]:
    """surface form -> class_id; class ids register themselves (with spaces)."""
    catalog = catalog or default_catalog()
    vocab: dict[str, str] = {}
    for cls in catalog:
        vocab[cls.class_id.lower()] = cls.class_id
        vocab[display_name(cls.class_id).lower()] = cls.class_id
    path = Path(synonyms_file) if synonyms_file else synonyms_path()
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            class_id, _, rest = line.partition(":")
            class_id = class_id.strip()
            if class_id not in catalog:
                raise UnknownClass(f"synonyms file names unknown class {class_id!r}")
            for syn in rest.split(","):
                syn = syn.strip().lower()
                if syn:
                    vocab[syn] = class_id
    return vocab


def extract_nouns(instruction: str, vocabulary: dict[str, str]) -> list[str]:
    """Recognized classes in order of first mention; longest match wins."""
    words = re.findall(r"[a-z0-9_']+", instruction.lower())
    max_len = max((len(k.split()) for k in vocabulary), default=1)
    found: list[str] = []
    i = 0
    while i < len(words):
        matched = None
        for span in range(min(max_len, len(words) - i), 0, -1):
            surface = " ".join(words[i:i + span])
            if surface in vocabulary:
                matched = (vocabulary[surface], span)
                break
        if matched:
            if matched[0] not in found:
                found.append(matched[0])
            i += matched[1]
        else:
            i += 1
    return found


_Q_TEXT = {
    "loc": "where is {o}?",
    "app": "what does {o} look like?",
    "dir": "which direction should I turn to?",
    "ref": "which {o} are you referring to?",
}


def _question(qtype: str, class_id: str | None) -> Question:
    if qtype == "dir":
        return Question("dir", None, _Q_TEXT["dir"], "dir")
    o = display_name(class_id)
    return Question(qtype, class_id, _Q_TEXT[qtype].format(o=o), f"{qtype} {class_id}")


def generate_questions(instruction: str, vocabulary: dict[str, str] | None = None) -> list[Question]:
    """loc/app/ref per recognized noun plus one dir question.

    Order: for each noun in mention order emit loc then app (the single
    dir question follows the first noun's app), then ref; with no nouns
    only the dir question remains.
    """
    vocabulary = vocabulary or load_vocabulary()
    nouns = extract_nouns(instruction, vocabulary)
    if not nouns:
        return [_question("dir", None)]
    out: list[Question] = []
    for i, noun in enumerate(nouns):
        out.append(_question("loc", noun))
        out.append(_question("app", noun))
        if i == 0:
            out.append(_question("dir", None))
        out.append(_question("ref", noun))
    return out


# ---------------------------------------------------------------------------
# answers
# ---------------------------------------------------------------------------

def _nearest_viewpoint(world: WorldState, cell, room: str | None) -> str:
    """Closest viewpoint by path cost, preferring the object's own room."""
    candidates = world.layout.viewpoints_in(room) if room else []
    if not candidates:
        candidates = list(world.layout.viewpoints)
    best = None
    for vp in sorted(candidates, key=lambda v: v.name):
        cost = path_cost(world.layout, cell, vp.cell)
        if cost is None:
            continue
        if best is None or cost < best[1]:
            best = (vp.name, cost)
    return best[0] if best else ""


def answer_location(world: WorldState, instance_id: str) -> Answer:
    """'The o is to your [direction] in/on the [container] next to the
    [landmark] in the [room]. It is closest to [viewpoint].'"""
    inst = world.objects.get(instance_id)
    if inst is None:
        raise UnknownInstance(f"no instance {instance_id!r}")
    o = display_name(inst.class_id)
    cell = world.resolved_cell(instance_id)
    if cell is None:  # held by the agent
        cell = world.agent.cell
    direction = geometry.bearing_sector(world.agent.heading, world.agent.cell, cell)
    room = world.layout.room_of_cell(cell) or ""
    slots = {"direction": direction, "room": room}

    clause = ""
    loc = inst.location
    if loc.kind in ("inside", "on"):
        container = world.objects[loc.ref]
        word = "in" if loc.kind == "inside" else "on"
        slots["container"] = display_name(container.class_id)
        clause = f" {word} the {slots['container']}"
        siblings = [i for i in world.contents_of(loc.ref) if i != instance_id]
        if siblings:
            landmark = display_name(world.objects[siblings[0]].class_id)
            slots["landmark"] = landmark
            clause += f" next to the {landmark}"

    viewpoint = _nearest_viewpoint(world, cell, room or None)
    slots["viewpoint"] = viewpoint
    text = (f"The {o} is to your {direction}{clause} in the {room}. "
            f"It is closest to {viewpoint}.")
    return Answer(text, slots)


def answer_appearance(catalog: Catalog, class_id: str,
                      color_override: str | None = None) -> Answer:
    """'The o is [shape] and of [color]. It is made of [material].'"""
    cls = catalog.get(class_id)
    if cls is None:
        raise UnknownClass(f"no class {class_id!r}")
    shape = cls.appearance.get("shape", "")
    color = color_override or cls.appearance.get("color", "")
    material = cls.appearance.get("material", "")
    o = display_name(class_id)
    text = f"The {o} is {shape} and of {color}. It is made of {material}."
    return Answer(text, {"shape": shape, "color": color, "material": material})


def answer_appearance_for(world: WorldState, instance_id: str) -> Answer:
    inst = world.objects.get(instance_id)
    if inst is None:
        raise UnknownInstance(f"no instance {instance_id!r}")
    return answer_appearance(world.catalog, inst.class_id, inst.color_override)


def answer_direction(before: AgentState, after: AgentState) -> Answer:
    """'You should turn [left/right/around].' or 'You don't need to move.'"""
    if before.cell == after.cell:
        return Answer("You don't need to move.", {"direction": "none"})
    sector = geometry.bearing_sector(before.heading, before.cell, after.cell)
    if sector == "front":
        return Answer("You don't need to move.", {"direction": "front"})
    word = {"left": "left", "right": "right", "behind": "around"}[sector]
    return Answer(f"You should turn {word}.", {"direction": word})


def answer_reference(world: WorldState, instance_id: str) -> Answer:
    """Disambiguation by instance id plus its location clause."""
    inst = world.objects.get(instance_id)
    if inst is None:
        raise UnknownInstance(f"no instance {instance_id!r}")
    cell = world.resolved_cell(instance_id)
    room = world.layout.room_of_cell(cell) if cell else ""
    loc = inst.location
    slots = {"instance_id": instance_id, "room": room or ""}
    if loc.kind in ("inside", "on"):
        word = "in" if loc.kind == "inside" else "on"
        container = display_name(world.objects[loc.ref].class_id)
        slots["container"] = container
        text = f"I mean {instance_id}, {word} the {container} in the {room}."
    elif loc.kind == "held":
        text = f"I mean {instance_id}, the one I am holding."
    else:
        text = f"I mean {instance_id}, on the floor in the {room}."
    return Answer(text, slots)


# regular expressions every produced answer must re-match
ANSWER_PATTERNS = {
    "loc": re.compile(
        r"^The [\w '.-]+ is to your (front|left|right|behind)"
        r"( (in|on) the [\w '-]+( next to the [\w '-]+)?)? in the [\w'-]*\. "
        r"It is closest to [\w'-]*\.$"),
    "app": re.compile(
        r"^The [\w '-]+ is [\w'-]+ and of [\w'-]+\. It is made of [\w'-]+\.$"),
    "dir": re.compile(
        r"^(You should turn (left|right|around)\.|You don't need to move\.)$"),
    "ref": re.compile(
        r"^I mean [\w'-]+,( (in|on) the [\w '-]+ in the [\w'-]+\.| the one I am holding\.|"
        r" on the floor in the [\w'-]+\.)$"),
}
