"""Planner: compilation soundness, optimality vs brute force, PDDL, demos."""

from collections import deque

import pytest

from arena import planner
from arena.cdf import GoalCondition, Placement
from arena.errors import CompileError, Unsolvable
from arena.pddl import export_pddl, parse_pddl
from arena.sampler import default_pool, sample_missions
from arena.scene import Location

from conftest import build_layout_unchecked, heat_cdf, freeze_cdf, pickup_cdf


def bfs_plan_cost(problem, limit=400_000):
    """Independent textbook BFS over the compiled operators."""
    start = problem.initial
    if problem.goal_satisfied(start):
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    expansions = 0
    while frontier:
        state, depth = frontier.popleft()
        expansions += 1
        assert expansions <= limit
        for op in problem.operators:
            if op.pre <= state:
                nxt = (state - op.dele) | op.add
                if nxt in seen:
                    continue
                seen.add(nxt)
                if problem.goal_satisfied(nxt):
                    return depth + 1
                frontier.append((nxt, depth + 1))
    return -1


def test_compile_pickup_goal_fluent():
    problem = planner.compile_problem(pickup_cdf())
    assert problem.goal == [frozenset({("on", "bowl_1", "table_2")})]


def test_compile_two_heating_chains():
    problem = planner.compile_problem(heat_cdf())
    adds_hot = [op.name for op in problem.operators
                if ("flag", "bowl_1", "hot") in op.add]
    assert any("microwave" in n for n in adds_hot)
    assert any("red_monitor" in n for n in adds_hot)


def test_compile_error_when_no_color_changer():
    cdf = pickup_cdf()
    cdf.goals = [GoalCondition("colored", "bowl_1", color="green")]
    cdf.subgoal_descriptions = ["Make the bowl green"]
    with pytest.raises(CompileError):
        planner.compile_problem(cdf)


def test_goal_already_true_gives_empty_plan():
    cdf = pickup_cdf()
    cdf.goals = [GoalCondition("located", "bowl_1", receptacle="table_1")]
    cdf.subgoal_descriptions = ["Keep the bowl where it is"]
    plan = planner.solve(planner.compile_problem(cdf), mode="bfs")
    assert plan.cost == 0 and plan.steps == []


def test_one_room_pickup_deliver_is_four_steps():
    """Goto, Pickup, Goto, Place when the agent starts away from both tables."""
    problem = planner.compile_problem(pickup_cdf(agent_cell=(9, 9)))
    plan = planner.solve(problem, mode="bfs")
    assert plan.cost == 4 == bfs_plan_cost(problem)
    verbs = [type(s).__name__ + ":" + getattr(s, "kind", getattr(s, "verb", ""))
             for s in plan.steps]
    assert verbs == ["NavAction:GotoViewpoint", "InteractionAction:Pickup",
                     "NavAction:GotoViewpoint", "InteractionAction:Place"]


def test_absent_goal_object_is_unsolvable():
    cdf = pickup_cdf()
    cdf.goals = [GoalCondition("located", "mug", receptacle="table_2")]
    cdf.subgoal_descriptions = ["Deliver a mug that does not exist"]
    problem = planner.compile_from_world(
        __import__("arena.cdf", fromlist=["build_world"]).build_world(pickup_cdf()),
        cdf.goals)
    with pytest.raises(Unsolvable):
        planner.solve(problem, mode="bfs", max_expansions=10_000)


def test_bfs_optimal_vs_oracle_on_fixtures():
    fixtures = [pickup_cdf(), pickup_cdf(agent_cell=(9, 9)), heat_cdf(),
                heat_cdf(with_laser=False), freeze_cdf(),
                freeze_cdf(with_fridge=False)]
    for cdf in fixtures:
        problem = planner.compile_problem(cdf)
        want = bfs_plan_cost(problem)
        got = planner.solve(problem, mode="bfs").cost
        assert got == want, cdf.cdf_id
        astar = planner.solve(problem, mode="astar").cost
        assert astar <= 1.5 * want


def test_freeze_with_fridge_disabled_uses_ray():
    plan = planner.solve(planner.compile_problem(freeze_cdf(with_fridge=False)),
                         mode="bfs")
    assert any("blue_monitor" in n for n in plan.op_names)
    assert not any("fridge" in n for n in plan.op_names)


def walled_laser_cdf():
    """studio_flat variant with the laser corner (15..17, 1..3) fenced off;
    the rig stays in the scene but no viewpoint can reach or see it."""
    rows = ["###################",
            "#........#....#...#",
            "#........+....#...#",
            "#........#....#...#",
            "#........#.....####",
            "###+##########+####",
            "#.................#",
            "#.................#",
            "#.......#.........#",
            "#.................#",
            "#.................#",
            "###################"]
    assert all(len(r) == 19 for r in rows)
    lay = build_layout_unchecked(
        "studio_walled", rows,
        {"reception": (1, 1, 8, 4), "quantum_lab": (10, 1, 8, 4),
         "breakroom": (1, 6, 17, 5)},
        [("reception_vp1", (2, 2), "reception"),
         ("quantum_vp1", (11, 2), "quantum_lab"),
         ("breakroom_vp1", (2, 7), "breakroom"),
         ("breakroom_vp2", (9, 9), "breakroom")],
    )
    cdf = heat_cdf(layout_id="studio_walled")
    return cdf, lay


def test_walled_laser_room_flips_tool_choice():
    open_cdf = heat_cdf()
    plan_open = planner.solve(planner.compile_problem(open_cdf), mode="bfs")
    assert any("red_monitor" in n for n in plan_open.op_names)

    cdf, lay = walled_laser_cdf()
    problem = planner.compile_problem(cdf, layout=lay)
    plan = planner.solve(problem, mode="bfs")
    assert any("microwave" in n for n in plan.op_names)
    assert not any("red_monitor" in n for n in plan.op_names)
    plan2, session = planner.demonstrate(cdf, layout=lay)
    assert session.goal_m == 1


# -- PDDL ---------------------------------------------------------------------

def test_pddl_export_contains_goal_and_requirements():
    text = export_pddl(planner.compile_problem(pickup_cdf()))
    assert "(:goal (and" in text
    assert "(:requirements :strips :typing)" in text
    assert "(:action" in text


def test_pddl_roundtrip_fixed_point():
    problem = planner.compile_problem(heat_cdf())
    text = export_pddl(problem)
    reparsed = parse_pddl(text)
    assert export_pddl(reparsed) == export_pddl(parse_pddl(export_pddl(reparsed)))
    assert reparsed.initial == {tuple(f) for f in reparsed.initial}


def test_pddl_reparse_solves_to_same_cost():
    for cdf in (pickup_cdf(), heat_cdf(), freeze_cdf()):
        problem = planner.compile_problem(cdf)
        want = planner.solve(problem, mode="bfs").cost
        reparsed = parse_pddl(export_pddl(problem))
        got = planner.solve(reparsed, mode="bfs").cost
        assert got == want


def test_pddl_disjunctive_goal_declared():
    cdf = pickup_cdf()
    cdf.placements.append(Placement("bowl_2", "bowl", Location.on("table_1")))
    cdf.goals = [GoalCondition("located", "bowl", receptacle="table_2")]
    cdf.subgoal_descriptions = ["Deliver any bowl"]
    text = export_pddl(planner.compile_problem(cdf))
    assert ":disjunctive-preconditions" in text and "(or " in text


# -- demonstrations ---------------------------------------------------------------

def test_demonstrations_for_all_twelve_task_types():
    missions = sample_missions(default_pool(), None, None, seed=2024, n=12)
    assert sorted({m.task_type for m in missions}) == sorted(
        {s.task_type for s in default_pool()})
    for cdf in missions:
        plan, session = planner.demonstrate(cdf, mode="bfs")
        assert session.goal_m == 1 and session.phase == "Succeeded"
        assert session.steps_used == plan.cost <= 12


def test_demonstrate_replay_counts_zero_divergence():
    missions = sample_missions(default_pool(), None, None, seed=77, n=12)
    for cdf in missions:
        planner.demonstrate(cdf, mode="astar")  # raises on any divergence
