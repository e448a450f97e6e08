"""PDDL text for compiled problems: export and a matching reader.

Problems are exported as a typed STRIPS domain/problem pair using fully
ground actions (``:parameters ()``), which keeps the encoding faithful
to the propositional grounding. Goals with several candidate instances
emit an ``(or ...)`` clause and declare ``:disjunctive-preconditions``.

``parse_pddl`` reads the exported pair back into a PlanningProblem
(runtime action bindings are not recoverable from text); export is a
fixed point: export(parse(export(p))) == export(p).
"""

from __future__ import annotations

import re

from .errors import ParseError
from .planner import GroundOp, PlanningProblem

_DOMAIN_NAME = "arena-missions"

_PRED_ARITY = {
    "at_vp": 1, "holding": 1, "hand_empty": 0, "in": 2, "on": 2,
    "flag": 2, "filled": 2, "empty": 1, "color": 2, "room_power": 1,
    "device_ready": 1,
}


def _sym(token: str) -> str:
    """PDDL-safe lowercase symbol."""
    out = re.sub(r"[^A-Za-z0-9_\-]", "-", str(token)).lower()
    return out or "x"


def _fluent_sexpr(fluent: tuple) -> str:
    head = fluent[0]
    args = " ".join(_sym(a) for a in fluent[1:])
    return f"({_sym(head)} {args})" if args else f"({_sym(head)})"


def _fluent_from_sexpr(parts: list[str]) -> tuple:
    head = parts[0].replace("-", "_")
    if head not in _PRED_ARITY:
        raise ParseError(f"unknown predicate {parts[0]!r}")
    if len(parts) - 1 != _PRED_ARITY[head]:
        raise ParseError(f"predicate {head} expects {_PRED_ARITY[head]} args, got {parts[1:]}")
    return tuple([head] + parts[1:])


def export_pddl(problem: PlanningProblem) -> str:
    """Domain + problem text, stable formatting, deterministic ordering."""
    disjunctive = any(len(d) > 1 for d in problem.goal)
    reqs = ":strips :typing"
    if disjunctive:
        reqs += " :disjunctive-preconditions"

    constants: set[str] = set()
    fluents: set[tuple] = set(problem.initial)
    for op in problem.operators:
        fluents |= op.pre | op.add | op.dele
    for disj in problem.goal:
        fluents |= disj
    for f in fluents:
        for a in f[1:]:
            constants.add(_sym(a))

    lines = []
    lines.append(f"(define (domain {_DOMAIN_NAME})")
    lines.append(f"  (:requirements {reqs})")
    lines.append("  (:types entity - object)")
    preds = []
    for name, arity in sorted(_PRED_ARITY.items()):
        args = " ".join(f"?a{i} - entity" for i in range(arity))
        preds.append(f"({_sym(name)} {args})" if args else f"({_sym(name)})")
    lines.append("  (:predicates " + " ".join(preds) + ")")
    for op in problem.operators:
        lines.append(f"  (:action {_sym(op.name.replace(' ', '__'))}")
        lines.append("    :parameters ()")
        pre = " ".join(_fluent_sexpr(f) for f in sorted(op.pre))
        lines.append(f"    :precondition (and {pre})")
        effs = [_fluent_sexpr(f) for f in sorted(op.add)]
        effs += [f"(not {_fluent_sexpr(f)})" for f in sorted(op.dele)]
        lines.append(f"    :effect (and {' '.join(effs)})")
        lines.append("  )")
    lines.append(")")
    domain = "\n".join(lines)

    plines = []
    pid = _sym(problem.cdf.cdf_id) if problem.cdf else "mission"
    plines.append(f"(define (problem {pid})")
    plines.append(f"  (:domain {_DOMAIN_NAME})")
    objs = " ".join(sorted(constants))
    plines.append(f"  (:objects {objs} - entity)")
    init = " ".join(_fluent_sexpr(f) for f in sorted(problem.initial))
    plines.append(f"  (:init {init})")
    goal_parts = []
    for disj in problem.goal:
        opts = [_fluent_sexpr(f) for f in sorted(disj)]
        goal_parts.append(opts[0] if len(opts) == 1 else "(or " + " ".join(opts) + ")")
    plines.append(f"  (:goal (and {' '.join(goal_parts)}))")
    plines.append(")")
    return domain + "\n\n" + "\n".join(plines) + "\n"


# ---------------------------------------------------------------------------
# reader
# ---------------------------------------------------------------------------

def _tokenize(text: str) -> list[str]:
    return re.findall(r"\(|\)|[^\s()]+", text)


def _read_sexpr(tokens: list[str], pos: int):
    if tokens[pos] != "(":
        return tokens[pos], pos + 1
    out = []
    pos += 1
    while tokens[pos] != ")":
        node, pos = _read_sexpr(tokens, pos)
        out.append(node)
    return out, pos + 1


def _parse_fluent_node(node) -> tuple:
    if not isinstance(node, list):
        raise ParseError(f"expected a fluent, got {node!r}")
    return _fluent_from_sexpr(node)


def parse_pddl(text: str) -> PlanningProblem:
    """Read an exported domain+problem pair back into a problem."""
    tokens = _tokenize(text)
    forms = []
    pos = 0
    while pos < len(tokens):
        node, pos = _read_sexpr(tokens, pos)
        forms.append(node)
    if len(forms) != 2:
        raise ParseError(f"expected domain and problem, found {len(forms)} forms")

    domain, problem_form = forms
    if domain[0] != "define" or domain[1][0] != "domain":
        raise ParseError("first form is not a domain")
    ops = []
    for section in domain[2:]:
        if not isinstance(section, list) or section[0] != ":action":
            continue
        name = section[1].replace("__", " ")
        body = {}
        i = 2
        while i < len(section):
            key = section[i]
            body[key] = section[i + 1]
            i += 2
        pre_node = body.get(":precondition", ["and"])
        eff_node = body.get(":effect", ["and"])
        pre = [_parse_fluent_node(n) for n in pre_node[1:]] if pre_node[0] == "and" else [
            _parse_fluent_node(pre_node)]
        add, dele = [], []
        eff_items = eff_node[1:] if eff_node[0] == "and" else [eff_node]
        for item in eff_items:
            if isinstance(item, list) and item and item[0] == "not":
                dele.append(_parse_fluent_node(item[1]))
            else:
                add.append(_parse_fluent_node(item))
        ops.append(GroundOp(name, frozenset(pre), frozenset(add), frozenset(dele), None))
    ops.sort(key=lambda op: op.name)

    if problem_form[0] != "define" or problem_form[1][0] != "problem":
        raise ParseError("second form is not a problem")
    initial: set[tuple] = set()
    goal: list[frozenset] = []
    for section in problem_form[2:]:
        if not isinstance(section, list):
            continue
        if section[0] == ":init":
            for node in section[1:]:
                initial.add(_parse_fluent_node(node))
        elif section[0] == ":goal":
            node = section[1]
            if node[0] != "and":
                node = ["and", node]
            for sub in node[1:]:
                if isinstance(sub, list) and sub and sub[0] == "or":
                    goal.append(frozenset(_parse_fluent_node(n) for n in sub[1:]))
                else:
                    goal.append(frozenset([_parse_fluent_node(sub)]))
    return PlanningProblem(initial=frozenset(initial), goal=goal, operators=ops)
