"""Scenario model: validation, serialisation round trips, preset generators."""

import json

import numpy as np
import pytest

from homoplan.config import ScenarioParams
from homoplan.world import (
    PRESETS,
    AgentSpec,
    ConvexObstacle,
    Scenario,
    ScenarioError,
    build_planning_world,
    load_scenario,
    make_preset,
    save_scenario,
    validate_scenario,
    wall_slabs,
)


def tiny_scenario(**kwargs):
    defaults = dict(
        bounds_min=[0.0, 0.0],
        bounds_max=[4.0, 4.0],
        obstacles=[ConvexObstacle(np.array([[1.5, 1.5], [2.5, 1.5], [2.5, 2.5], [1.5, 2.5]]))],
        agents=[
            AgentSpec(index=1, start=[0.5, 0.5], target=[3.5, 3.5]),
            AgentSpec(index=2, start=[3.5, 0.5], target=[0.5, 3.5]),
        ],
        name="tiny",
    )
    defaults.update(kwargs)
    return Scenario(**defaults)


def test_obstacle_normalised_to_ccw_convex():
    cw = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    obs = ConvexObstacle(cw)
    assert obs.area == pytest.approx(1.0)
    assert obs.perimeter == pytest.approx(4.0)
    with pytest.raises(ScenarioError):
        ConvexObstacle(np.array([[0, 0], [2, 0], [1, 0.2], [0, 2]], dtype=float))


def test_save_load_round_trip():
    sc = tiny_scenario()
    text = save_scenario(sc)
    back = load_scenario(text)
    assert back.name == sc.name
    assert np.array_equal(back.bounds_min, sc.bounds_min)
    assert np.array_equal(back.bounds_max, sc.bounds_max)
    assert len(back.obstacles) == 1
    assert np.allclose(back.obstacles[0].vertices, sc.obstacles[0].vertices)
    assert [a.index for a in back.agents] == [1, 2]
    assert save_scenario(back) == text


def test_load_rejects_malformed_documents():
    good = json.loads(save_scenario(tiny_scenario()))
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario("{nope")
    with pytest.raises(ScenarioError, match="version"):
        load_scenario(json.dumps({**good, "homoplan_scenario": 99}))
    with pytest.raises(ScenarioError, match="unknown top-level"):
        load_scenario(json.dumps({**good, "extra": 1}))
    with pytest.raises(ScenarioError, match="missing keys"):
        bad = {**good, "agents": [{"index": 1}]}
        load_scenario(json.dumps(bad))
    with pytest.raises(ScenarioError, match="params"):
        load_scenario(json.dumps({**good, "params": {"planner": {"lambda_typo": 1}}}))


def test_agents_sorted_by_index_on_load():
    doc = json.loads(save_scenario(tiny_scenario()))
    doc["agents"] = doc["agents"][::-1]
    back = load_scenario(json.dumps(doc))
    assert [a.index for a in back.agents] == [1, 2]


def test_validation_catches_rule_breaches():
    with pytest.raises(ScenarioError, match="bounds"):
        validate_scenario(tiny_scenario(bounds_max=[0.0, 4.0]))
    with pytest.raises(ScenarioError, match="leaves the workspace"):
        validate_scenario(tiny_scenario(obstacles=[ConvexObstacle(np.array([[3, 3], [5, 3], [5, 5], [3, 5]], dtype=float))]))
    with pytest.raises(ScenarioError, match="duplicate index"):
        validate_scenario(tiny_scenario(agents=[
            AgentSpec(index=1, start=[0.5, 0.5], target=[3.5, 3.5]),
            AgentSpec(index=1, start=[3.5, 0.5], target=[0.5, 3.5]),
        ]))
    with pytest.raises(ScenarioError, match="clearance"):
        validate_scenario(tiny_scenario(agents=[AgentSpec(index=1, start=[1.4, 2.0], target=[3.5, 3.5])]))
    with pytest.raises(ScenarioError, match="starts"):
        validate_scenario(tiny_scenario(agents=[
            AgentSpec(index=1, start=[0.5, 0.5], target=[3.5, 3.5]),
            AgentSpec(index=2, start=[0.6, 0.5], target=[0.5, 3.5]),
        ]))


def test_wall_slabs_frame_the_rectangle():
    slabs = wall_slabs([0.0, 0.0], [6.0, 4.0])
    assert len(slabs) == 4
    for s in slabs:
        assert s.shape == (2 + 2, 2)
        # each slab sits outside the workspace
        inside_x = (s[:, 0] > 0) & (s[:, 0] < 6)
        inside_y = (s[:, 1] > 0) & (s[:, 1] < 4)
        assert not np.any(inside_x & inside_y)


def test_presets_have_contracted_shapes():
    sc = make_preset("dense6x6", 3)
    assert len(sc.obstacles) == 19
    assert len(sc.agents) == 8
    assert np.array_equal(sc.bounds_max, [6.0, 6.0])
    assert sc.params.replan.gamma == pytest.approx(0.9)

    sc = make_preset("scatter5x4", 0)
    assert len(sc.obstacles) == 7
    assert len(sc.agents) == 8
    assert np.array_equal(sc.bounds_max, [5.0, 4.5])

    sc = make_preset("corridor4", 0)
    assert len(sc.obstacles) == 5
    assert len(sc.agents) == 8
    assert sc.params.replan.gamma == pytest.approx(0.9)
    with pytest.raises(ScenarioError, match="unknown preset"):
        make_preset("nope", 0)
    assert set(PRESETS) == {"dense6x6", "scatter5x4", "corridor4"}


def test_presets_are_valid_and_deterministic():
    for name, seed in (("dense6x6", 1), ("scatter5x4", 2), ("corridor4", 3)):
        a = save_scenario(make_preset(name, seed))
        b = save_scenario(make_preset(name, seed))
        assert a == b
        validate_scenario(load_scenario(a))
    assert save_scenario(make_preset("dense6x6", 1)) != save_scenario(make_preset("dense6x6", 2))


def test_corridor4_admits_single_agent():
    sc = make_preset("corridor4", 0)
    # corridor mouths are 0.6 m wide: one 0.2 m agent fits, two abreast do not
    xs = sorted(v for o in sc.obstacles for v in o.vertices[:, 0])
    gaps = [b - a for a, b in zip(xs[1::2], xs[2::2]) if b - a > 1e-9]
    assert all(g == pytest.approx(0.6) for g in gaps)


def test_planning_world_shares_inflated_view():
    sc = tiny_scenario()
    world = build_planning_world(sc)
    r = max(a.radius for a in sc.agents)
    assert world.radius == pytest.approx(r)
    assert np.allclose(world.bounds_min, sc.bounds_min + r)
    assert np.allclose(world.bounds_max, sc.bounds_max - r)
    assert len(world.obstacles) == 1
    # inflated obstacle strictly contains the original
    from homoplan.geometry import points_in_polygon

    assert np.all(points_in_polygon(sc.obstacles[0].vertices, world.obstacles[0], eps=1e-9))
    assert world.graph.n_edges > 0


def test_params_reject_unknown_keys():
    with pytest.raises(Exception, match="unknown"):
        ScenarioParams.from_dict({"planner": {"lambda_p": 1.0, "bogus": 2}})
    with pytest.raises(Exception, match="unknown groups"):
        ScenarioParams.from_dict({"bogus": {}})
    p = ScenarioParams.from_dict({"planner": {"lambda_p": 7.0}})
    assert p.planner.lambda_p == 7.0
    assert p.planner.lambda_h == 500.0  # other fields keep defaults
    assert ScenarioParams.from_dict(p.to_dict()).to_dict() == p.to_dict()
