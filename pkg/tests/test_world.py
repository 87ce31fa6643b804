import math

import numpy as np
import pytest

from oracles import ray_march_beams
from scpmppi import world
from scpmppi.world import Cylinder, Environment, SensedObstacles


def _env(cylinders, bounds=(-10.0, 10.0, -10.0, 10.0)):
    return Environment(tuple(cylinders), bounds, (0.0, 0.0, 1.0), (5.0, 5.0, 1.0))


def test_scan_without_obstacles():
    scan = world.lidar_scan([0.0, 0.0, 1.0], _env([]), beams=90, max_range=8.0)
    assert np.all(scan.ranges == 8.0) and len(scan.angles) == 90
    assert np.all(scan.hit_index == -1)


def test_scan_straight_ahead():
    scan = world.lidar_scan([0.0, 0.0, 1.0], _env([Cylinder(3.0, 0.0, 0.75)]), beams=360)
    assert scan.angles[0] == 0.0
    assert scan.ranges[0] == pytest.approx(2.25, abs=1e-12)


def test_oblique_grazing_beam_matches_march():
    # beam at 30 degrees passing close to the edge of a cylinder
    ang = math.radians(30)
    d = 4.0
    normal = np.array([-math.sin(ang), math.cos(ang)])
    center = d * np.array([math.cos(ang), math.sin(ang)]) + 0.74 * normal
    env = _env([Cylinder(*center, 0.75)])
    scan = world.lidar_scan([0.0, 0.0, 1.0], env, beams=12)
    ref = ray_march_beams([0.0, 0.0], scan.angles, env.obstacle_array, 8.0)
    assert scan.ranges[1] < 8.0
    np.testing.assert_allclose(scan.ranges, ref, atol=1e-4)


def test_ranges_within_limits(rng):
    env = world.generate_forest(0.08, seed=4)
    for _ in range(20):
        p = rng.uniform([0, 0, 1], [20, 15, 1])
        scan = world.lidar_scan(p, env)
        assert np.all(scan.ranges > 0) and np.all(scan.ranges <= scan.max_range)


def test_integrate_scan_examples():
    env = _env([Cylinder(3.0, 0.0, 0.75), Cylinder(-9.0, 9.0, 0.5)])
    empty = world.integrate_scan(SensedObstacles(), world.lidar_scan([0, 0, 1], _env([])), env)
    assert len(empty) == 0
    first = world.integrate_scan(SensedObstacles(), world.lidar_scan([0, 0, 1], env), env)
    assert first.known == {Cylinder(3.0, 0.0, 0.75)}


def test_integrate_scan_monotone_fixed_point():
    env = world.generate_forest(0.05, seed=2)
    known = SensedObstacles()
    path = np.linspace(env.start_array, env.goal_array, 30)
    sizes = []
    for p in path:
        nxt = world.integrate_scan(known, world.lidar_scan(p, env), env)
        assert known.known <= nxt.known <= set(env.obstacles)
        known = nxt
        sizes.append(len(known))
    assert sizes == sorted(sizes)
    again = world.integrate_scan(known, world.lidar_scan(path[-1], env), env)
    assert again is known


def test_nearest_surface_distance():
    known = SensedObstacles((Cylinder(5.0, 0.0, 0.75),))
    assert world.nearest_surface_distance([0, 0, 1], known, 0.25) == pytest.approx(4.0)
    assert world.nearest_surface_distance([5, 0, 1], known, 0.25) == 0.01
    assert world.nearest_surface_distance([0, 0, 1], SensedObstacles(), 0.25) == 100.0


def test_nearest_distance_is_brute_force_min(rng):
    cyl = [Cylinder(*rng.uniform(-5, 5, 2), rng.uniform(0.3, 1.0)) for _ in range(3)]
    known = SensedObstacles(tuple(cyl))
    for _ in range(50):
        p = rng.uniform(-8, 8, 3)
        brute = min(math.hypot(p[0] - c.x, p[1] - c.y) - c.radius - 0.25 for c in cyl)
        assert world.nearest_surface_distance(p, known) == pytest.approx(min(max(brute, 0.01), 100.0))


def test_collision_examples():
    env = _env([Cylinder(3.0, 0.0, 0.75)])
    assert not world.collision([0.0, 0.0, 1.0], env)
    assert world.collision([3.0, 0.0, 1.0], env)
    assert world.collision([2.0, 0.0, 1.0], env)  # exactly on the inflated boundary
    assert world.collision([11.0, 0.0, 1.0], env)  # out of bounds


def test_forest_density_zero():
    assert world.generate_forest(0.0, seed=1).obstacles == ()


@pytest.mark.parametrize("tier", ["low", "mid", "high"])
def test_forest_tiers(tier):
    for seed in range(5):
        a = world.generate_forest(world.density_for(tier), seed=seed)
        b = world.generate_forest(world.density_for(tier), seed=seed)
        assert a == b
        assert world.free_space_connected(a)
        assert not world.collision(a.start, a) and not world.collision(a.goal, a)
        for c in a.obstacles:
            assert c.radius == 0.75 and a.in_bounds((c.x, c.y))
            for anchor in (a.start, a.goal):
                assert math.hypot(c.x - anchor[0], c.y - anchor[1]) - c.radius >= 1.5


def test_tier_densities_order():
    counts = {t: np.mean([len(world.generate_forest(world.density_for(t), seed=s).obstacles)
                          for s in range(10)]) for t in world.DENSITY_TIERS}
    assert counts["low"] < counts["mid"] < counts["high"]


def test_blocked_world_is_unsatisfiable():
    wall = tuple(Cylinder(10.0, y, 0.75) for y in np.arange(0.0, 15.5, 1.0))
    assert not world.free_space_connected(Environment(wall))
    with pytest.raises(world.Unsatisfiable):
        world.generate_forest(2.0, seed=0, max_attempts=3)


def test_environment_file_round_trip(tmp_path):
    env = world.generate_forest(0.05, seed=11)
    path = tmp_path / "forest.env"
    world.save_environment(env, path)
    back = world.load_environment(path)
    assert back == env
    for a, b in zip(env.obstacles, back.obstacles):
        assert (a.x, a.y, a.radius) == (b.x, b.y, b.radius)
    assert world.format_environment(back) == path.read_text()


def test_environment_file_errors():
    with pytest.raises(ValueError):
        world.parse_environment("bounds 0 1 0 1\nstart 0 0 0\n")
    with pytest.raises(ValueError):
        world.parse_environment("bounds 0 1 0 1\nstart 0 0 0\ngoal 1 1 1\ncylinders 2\n0.5 0.5 0.1\n")


def test_shipped_environment_loads(configs_dir):
    env = world.load_environment(configs_dir / "forest_mid_seed7.env")
    assert len(env.obstacles) == 16 and world.free_space_connected(env)
