"""Shared fixtures: worlds, mission definitions and layout builders."""

from __future__ import annotations

import numpy as np
import pytest

from arena.cdf import CDF, GoalCondition, Placement
from arena.data_files import default_catalog, default_layout
from arena.scene import (AgentState, Location, ObjectInstance, ObjectState,
                         SceneLayout, Viewpoint, WorldState)


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def studio():
    return default_layout("studio_flat")


@pytest.fixture(scope="session")
def lab():
    return default_layout("lab_small")


def build_layout_unchecked(layout_id: str, rows: list[str], rooms: dict,
                           viewpoints: list[tuple[str, tuple, str]],
                           doorways=(), sticky_notes=()) -> SceneLayout:
    """Assemble a layout without the loader's validity checks (tests need
    obstructed and disconnected geometries the loader rejects)."""
    height, width = len(rows), len(rows[0])
    occupancy = np.zeros((height, width), dtype=bool)
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                occupancy[y, x] = True
    room_of = {}
    for name, rect in rooms.items():
        x, y, w, h = rect
        for yy in range(y, y + h):
            for xx in range(x, x + w):
                room_of[(xx, yy)] = name
    return SceneLayout(
        layout_id=layout_id, width=width, height=height, rooms=dict(rooms),
        doorways=list(doorways),
        viewpoints=[Viewpoint(n, c, r) for n, c, r in viewpoints],
        occupancy=occupancy,
        sticky_notes=[{"cell": c, "text": t} for c, t in sticky_notes],
        _room_of=room_of,
    )


def make_world(catalog, layout, objects, agent_cell=(2, 7), heading="E",
               held=None, room_power=None) -> WorldState:
    power = {room: True for room in layout.rooms}
    if room_power:
        power.update(room_power)
    return WorldState(
        layout=layout, catalog=catalog,
        objects={o.instance_id: o for o in objects},
        agent=AgentState(cell=agent_cell, heading=heading, held=held),
        room_power=power,
    )


def obj(iid: str, cls: str, loc: Location, state: ObjectState | None = None,
        color_override=None, note_text=None) -> ObjectInstance:
    return ObjectInstance(iid, cls, loc, state or ObjectState(), color_override,
                          note_text)


# -- mission fixtures ---------------------------------------------------------

def pickup_cdf(agent_cell=(9, 9), heading="N") -> CDF:
    """Agent away from both stations: optimal plan is Goto, Pickup, Goto, Place."""
    return CDF(
        cdf_id="fx_pickup", layout_id="studio_flat",
        agent_cell=agent_cell, agent_heading=heading,
        placements=[
            Placement("table_1", "table", Location.at((4, 7))),
            Placement("table_2", "table", Location.at((12, 2))),
            Placement("bowl_1", "bowl", Location.on("table_1")),
        ],
        goals=[GoalCondition("located", "bowl_1", receptacle="table_2")],
        mission_description="Pick up the bowl and place it on the table in the quantum_lab.",
        subgoal_descriptions=["Place the bowl on the quantum lab table"],
        task_type="pickup&deliver",
    )


def heat_cdf(powered=True, with_laser=True, with_microwave=True,
             layout_id="studio_flat") -> CDF:
    placements = [
        Placement("table_1", "table", Location.at((4, 7))),
        Placement("table_2", "table", Location.at((12, 2))),
        Placement("bowl_1", "bowl", Location.on("table_1")),
    ]
    if with_microwave:
        placements.append(Placement("microwave_1", "microwave", Location.at((1, 9)),
                                    ObjectState(powered=powered)))
    if with_laser:
        placements += [
            Placement("laser_cannon_1", "laser_cannon", Location.at((16, 1))),
            Placement("laser_shelf_1", "laser_shelf", Location.at((15, 2))),
            Placement("red_monitor_1", "red_monitor", Location.at((17, 2))),
            Placement("control_panel_1", "control_panel", Location.inside("laser_cannon_1")),
        ]
    return CDF(
        cdf_id="fx_heat", layout_id=layout_id,
        agent_cell=(2, 7), agent_heading="E",
        placements=placements,
        goals=[GoalCondition("state_is", "bowl_1", flag="hot", value=True),
               GoalCondition("located", "bowl_1", receptacle="table_2")],
        mission_description="Heat the bowl and deliver it to the table in the quantum_lab.",
        subgoal_descriptions=["Make the bowl hot", "Deliver the bowl"],
        task_type="heat&deliver",
    )


def freeze_cdf(with_fridge=True, with_ray=True) -> CDF:
    placements = [
        Placement("table_1", "table", Location.at((4, 7))),
        Placement("table_2", "table", Location.at((12, 2))),
        Placement("soda_can_1", "soda_can", Location.on("table_1")),
    ]
    if with_fridge:
        placements.append(Placement("fridge_1", "fridge", Location.at((1, 9))))
    if with_ray:
        placements += [
            Placement("freeze_ray_1", "freeze_ray", Location.at((16, 1))),
            Placement("freeze_shelf_1", "freeze_shelf", Location.at((15, 2))),
            Placement("blue_monitor_1", "blue_monitor", Location.at((17, 2))),
        ]
    return CDF(
        cdf_id="fx_freeze", layout_id="studio_flat",
        agent_cell=(2, 7), agent_heading="E",
        placements=placements,
        goals=[GoalCondition("state_is", "soda_can_1", flag="cold", value=True),
               GoalCondition("located", "soda_can_1", receptacle="table_2")],
        mission_description="Freeze the soda can and deliver it to the table in the quantum_lab.",
        subgoal_descriptions=["Make the soda can cold", "Deliver the soda can"],
        task_type="freeze&deliver",
    )
