"""Catalog, layout, world-state invariants and symbolic observation."""

import json

import pytest

from arena.errors import ParseError, UnknownInstance, ValidationError
from arena.scene import (Location, ObjectState, PropertySet, containment_closure,
                         load_catalog, load_layout, symbolic_observation,
                         validate_world)

from conftest import make_world, obj
from test_gridops import los_oracle


def test_property_set_is_closed():
    PropertySet.of("pickupable", "breakable")
    with pytest.raises(ValidationError):
        PropertySet.of("flyable")


def test_decor_excludes_other_properties():
    PropertySet.of("decor")
    with pytest.raises(ValidationError):
        PropertySet.of("decor", "pickupable")


def test_load_catalog_accepts_shipped_bowl(catalog):
    bowl = catalog["bowl"]
    for prop in ("pickupable", "dirtyable", "heatable", "chillable", "fillable", "breakable"):
        assert bowl.has(prop)


def test_load_catalog_rejects_unknown_property(tmp_path):
    doc = {"classes": [{"class_id": "bird", "semantic_group": "x",
                        "properties": ["flyable"], "spawn_size_px": 10,
                        "appearance": {"shape": "s", "color": "c", "material": "m"}}]}
    path = tmp_path / "cat.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_catalog(path)


def test_load_catalog_rejects_duplicate_and_empty(tmp_path):
    entry = {"class_id": "b", "semantic_group": "x", "properties": ["pickupable"],
             "spawn_size_px": 10,
             "appearance": {"shape": "s", "color": "c", "material": "m"}}
    path = tmp_path / "cat.json"
    path.write_text(json.dumps({"classes": [entry, dict(entry)]}))
    with pytest.raises(ValidationError):
        load_catalog(path)
    empty = tmp_path / "empty.json"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_catalog(empty)


def test_catalog_requires_appearance_for_non_decor(tmp_path):
    doc = {"classes": [{"class_id": "b", "semantic_group": "x",
                        "properties": ["pickupable"], "spawn_size_px": 10,
                        "appearance": {"shape": "s", "color": "", "material": "m"}}]}
    path = tmp_path / "cat.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_catalog(path)


# -- layouts --------------------------------------------------------------------

def _layout_doc():
    return {
        "layout_id": "t",
        "rows": ["#######",
                 "#..#..#",
                 "#..+..#",
                 "#..#..#",
                 "#######"],
        "rooms": [{"name": "a", "rect": [1, 1, 2, 3]},
                  {"name": "b", "rect": [4, 1, 2, 3]}],
        "doorways": [[[2, 2], [4, 2]]],
        "viewpoints": [{"name": "a1", "cell": [1, 1], "room": "a"},
                       {"name": "b1", "cell": [5, 3], "room": "b"}],
        "sticky_notes": [{"cell": [1, 3], "text": "hi"}],
    }


def test_layout_loads(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps(_layout_doc()))
    lay = load_layout(path)
    assert lay.room_of_cell((1, 1)) == "a"
    assert lay.room_of_cell((3, 2)) is None  # doorway gap
    assert not lay.blocked((3, 2))


@pytest.mark.parametrize("mutate,err", [
    (lambda d: d["viewpoints"].__setitem__(0, {"name": "a1", "cell": [3, 1], "room": "a"}),
     "blocked|outside"),
    (lambda d: d["rooms"].__setitem__(1, {"name": "b", "rect": [2, 1, 2, 3]}), "overlap"),
    (lambda d: d["doorways"].clear(), "outside every room"),
    (lambda d: d["rows"].__setitem__(2, "#######"), "doorway|outside"),
])
def test_layout_validation_rejects(tmp_path, mutate, err):
    doc = _layout_doc()
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_layout(path)


def test_layout_connectivity_enforced(tmp_path):
    doc = _layout_doc()
    doc["rows"][2] = "#..#..#"  # close the gap; rooms disconnect
    doc["doorways"] = []
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError):
        load_layout(path)


def test_shipped_layouts_viewpoints_mutually_reachable(catalog):
    from arena.data_files import default_layout, layout_ids
    from arena.nav import path_cost
    for lid in layout_ids():
        lay = default_layout(lid)
        for a in lay.viewpoints:
            for b in lay.viewpoints:
                assert path_cost(lay, a.cell, b.cell) is not None


# -- world state ------------------------------------------------------------------

def test_validate_world_flag_licensing(catalog, studio):
    w = make_world(catalog, studio, [obj("book_1", "book", Location.at((4, 7)),
                                         ObjectState(hot=True))])
    with pytest.raises(ValidationError):
        validate_world(w)


def test_validate_world_hot_cold_exclusive(catalog, studio):
    w = make_world(catalog, studio, [obj("bowl_1", "bowl", Location.at((4, 7)),
                                         ObjectState(hot=True, cold=True))])
    with pytest.raises(ValidationError):
        validate_world(w)


def test_validate_world_held_consistency(catalog, studio):
    w = make_world(catalog, studio, [obj("bowl_1", "bowl", Location.held())])
    with pytest.raises(ValidationError):
        validate_world(w)  # agent.held is unset
    w.agent.held = "bowl_1"
    validate_world(w)


def test_validate_world_rejects_containment_cycle(catalog, studio):
    w = make_world(catalog, studio, [
        obj("fridge_1", "fridge", Location.at((4, 7))),
        obj("bowl_1", "bowl", Location.inside("fridge_1")),
    ])
    validate_world(w)
    w.objects["fridge_1"].location = Location.inside("bowl_1")
    with pytest.raises(ValidationError):
        validate_world(w)


def test_containment_closure(catalog, studio):
    w = make_world(catalog, studio, [
        obj("fridge_1", "fridge", Location.at((4, 7))),
        obj("bowl_1", "bowl", Location.inside("fridge_1")),
        obj("apple_1", "apple", Location.inside("bowl_1")),
    ])
    assert containment_closure(w, "fridge_1") == ["bowl_1", "apple_1"]
    assert containment_closure(w, "apple_1") == []
    with pytest.raises(UnknownInstance):
        containment_closure(w, "ghost")


# -- symbolic observation -----------------------------------------------------------

def test_observation_object_ahead(catalog, studio):
    w = make_world(catalog, studio, [obj("bowl_1", "bowl", Location.at((5, 7)))],
                   agent_cell=(2, 7), heading="E")
    out = symbolic_observation(w, "E")
    assert [o["instance_id"] for o in out] == ["bowl_1"]
    assert out[0]["distance"] == 3
    assert out[0]["bearing"] == "front"
    assert symbolic_observation(w, "W") == []


def test_observation_blocked_by_wall(catalog, studio):
    # pillar at (8,8) in studio_flat breakroom
    w = make_world(catalog, studio, [obj("bowl_1", "bowl", Location.at((10, 8)))],
                   agent_cell=(6, 8), heading="E")
    assert symbolic_observation(w, "E") == []
    assert los_oracle(studio.occupancy, (6, 8), (10, 8)) is False
    w2 = make_world(catalog, studio, [obj("bowl_1", "bowl", Location.at((10, 6)))],
                    agent_cell=(6, 8), heading="E")
    got = symbolic_observation(w2, "E")
    assert los_oracle(studio.occupancy, (6, 8), (10, 6)) is True
    assert [o["instance_id"] for o in got] == ["bowl_1"]


def test_observation_closed_container_hides_contents(catalog, studio):
    w = make_world(catalog, studio, [
        obj("fridge_1", "fridge", Location.at((5, 7))),
        obj("mug_1", "mug", Location.inside("fridge_1")),
    ], agent_cell=(2, 7), heading="E")
    ids = [o["instance_id"] for o in symbolic_observation(w, "E")]
    assert ids == ["fridge_1"]
    w.objects["fridge_1"].state.open = True
    ids = [o["instance_id"] for o in symbolic_observation(w, "E")]
    assert ids == ["fridge_1", "mug_1"]


def test_observation_matches_brute_force_raycast(catalog, studio):
    # every in-range cone cell with oracle LOS appears; nothing else does
    objs = []
    k = 0
    for y in range(6, 11):
        for x in range(1, 18):
            if not studio.blocked((x, y)):
                k += 1
                objs.append(obj(f"book_{k}", "book", Location.at((x, y))))
    w = make_world(catalog, studio, objs, agent_cell=(2, 7), heading="E")
    got = {o["instance_id"] for o in symbolic_observation(w, "E", 90.0, 12)}
    from arena import geometry
    want = set()
    for o in objs:
        cell = o.location.cell
        if geometry.chebyshev((2, 7), cell) > 12:
            continue
        if not geometry.in_view_cone("E", (2, 7), cell, 90.0):
            continue
        if not los_oracle(studio.occupancy, (2, 7), cell):
            continue
        want.add(o.instance_id)
    assert got == want and len(want) > 5


def test_observation_sorted_and_deterministic(catalog, studio):
    objs = [obj(f"bowl_{i}", "bowl", Location.at((3 + i, 7))) for i in (3, 1, 2)]
    w = make_world(catalog, studio, objs, agent_cell=(2, 7), heading="E")
    ids = [o["instance_id"] for o in symbolic_observation(w, "E")]
    assert ids == sorted(ids)
