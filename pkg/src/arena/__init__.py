"""Deterministic headless embodied-mission platform.

Multi-room grid worlds with affordance-gated object state machines,
causally constrained devices, a symbolic planner producing expert
demonstrations (with PDDL export), a template QA oracle, episode and
detection metrics, and a WebSocket session server for live agents and
web clients.
"""

__version__ = "0.1.0"

from .affordance import ActionResult, InteractionAction, applicable, apply, enumerate_applicable
from .cdf import CDF, GoalCondition, MissionSpec, goal_status, parse_cdf, serialize_cdf
from .errors import ArenaError
from .nav import NavAction, Path, execute_nav, look_around, shortest_path
from .planner import Plan, PlanningProblem, compile_problem, demonstrate, solve
from .runtime import MetadataFrame, SessionConfig, SessionState, start, step, user_event
from .scene import (ObjectClass, ObjectInstance, PropertySet, SceneLayout, WorldState,
                    containment_closure, load_catalog, load_layout, symbolic_observation)

__all__ = [
    "ActionResult", "ArenaError", "CDF", "GoalCondition", "InteractionAction",
    "MetadataFrame", "MissionSpec", "NavAction", "ObjectClass", "ObjectInstance",
    "Path", "Plan", "PlanningProblem", "PropertySet", "SceneLayout", "SessionConfig",
    "SessionState", "WorldState", "applicable", "apply", "compile_problem",
    "containment_closure", "demonstrate", "enumerate_applicable", "execute_nav",
    "goal_status", "load_catalog", "load_layout", "look_around", "parse_cdf",
    "serialize_cdf", "shortest_path", "solve", "start", "step",
    "symbolic_observation", "user_event",
]
