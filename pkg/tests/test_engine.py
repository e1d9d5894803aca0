import math

import numpy as np
import pytest

from helpers import EASY_WORLD, REF_WORLD
from oracles import edge_clearance
from rlharness.errors import HarnessError, SensorError
from rlharness.simcore import load_world
from rlharness.simcore.engine import Simulation, SimulationMode
from rlharness.simcore.kinematics import inverse_kinematics


@pytest.fixture
def sim():
    return Simulation(load_world(EASY_WORLD))


def test_zero_wheels_keep_pose(sim):
    start = sim.robots["robotino"].pose
    for _ in range(10):
        sim.step()
    assert sim.robots["robotino"].pose == start
    assert sim.step_count == 10 and sim.sim_time == pytest.approx(0.32)


def test_single_step_forward(sim):
    spec = sim.world.robot("robotino")
    sim.set_wheel_velocities("robotino", inverse_kinematics((0.1, 0, 0), spec))
    sim.step()
    p = sim.robots["robotino"].pose
    assert p.x == pytest.approx(0.0032, abs=1e-12)
    assert abs(p.y) < 1e-12 and abs(p.theta) < 1e-12


def test_forward_k_steps_displacement(sim):
    spec = sim.world.robot("robotino")
    sim.set_wheel_velocities("robotino", inverse_kinematics((0.2, 0, 0), spec))
    for k in range(1, 11):
        sim.step()
        assert sim.robots["robotino"].pose.x == pytest.approx(k * 0.032 * 0.2, abs=1e-9)


def test_driving_into_wall_sets_touch_without_penetration(sim):
    spec = sim.world.robot("robotino")
    sim.enable_sensor("robotino", "touch", 32)
    sim.set_wheel_velocities("robotino", inverse_kinematics((0.5, 0, 0), spec))
    touched = []
    for _ in range(100):
        for topic, payload in sim.step():
            if topic == "robotino/touch":
                touched.append(payload["value"])
        p = sim.robots["robotino"].pose
        assert edge_clearance(sim.world, p.x, p.y, spec.body_radius) >= -1e-9
    assert touched[-1] is True
    assert sim.robots["robotino"].pose.x == pytest.approx(1.5 - spec.body_radius, abs=1e-9)


def test_reset_restores_spawn_and_keeps_enablement(sim):
    spec = sim.world.robot("robotino")
    sim.enable_sensor("robotino", "ir", 64)
    sim.set_wheel_velocities("robotino", inverse_kinematics((0.2, 0.1, 0.5), spec))
    for _ in range(5):
        sim.step()
    sim.reset()
    st = sim.robots["robotino"]
    assert st.pose == spec.spawn
    assert st.wheel_speeds == (0.0, 0.0, 0.0)
    assert sim.step_count == 0 and sim.sim_time == 0.0
    assert st.sensor_stamps == {}
    assert sim.enabled["robotino"] == {"ir": 2}
    assert sim.reset_count == 1


def test_sensor_period_publications(sim):
    assert sim.enable_sensor("robotino", "ir", 64) == 2
    assert sim.enable_sensor("robotino", "touch", 32) == 1
    seen = {"robotino/ir": [], "robotino/touch": []}
    for _ in range(6):
        for topic, payload in sim.step():
            seen[topic].append(payload["stamp"])
    assert seen["robotino/ir"] == pytest.approx([0.064, 0.128, 0.192])
    assert len(seen["robotino/touch"]) == 6


def test_staleness_stamps_track_last_publication(sim):
    sim.enable_sensor("robotino", "ir", 96)
    sim.step()
    sim.step()
    assert "ir" not in sim.robots["robotino"].sensor_stamps
    sim.step()
    assert sim.robots["robotino"].sensor_stamps["ir"] == pytest.approx(0.096)


@pytest.mark.parametrize("period", [48, 0, -32, 31.5, "64", True])
def test_bad_period(sim, period):
    with pytest.raises(SensorError) as err:
        sim.enable_sensor("robotino", "ir", period)
    assert err.value.code == "BAD_PERIOD"


def test_color_camera_unsupported(sim):
    with pytest.raises(SensorError) as err:
        sim.enable_sensor("robotino", "color", 32)
    assert err.value.code == "UNSUPPORTED"


def test_unknown_sensor_and_robot(sim):
    with pytest.raises(SensorError) as err:
        sim.enable_sensor("robotino", "lidar", 32)
    assert err.value.code == "NO_SUCH_SENSOR"
    with pytest.raises(SensorError) as err:
        sim.enable_sensor("ghost", "ir", 32)
    assert err.value.code == "NO_SUCH_ROBOT"


def test_disable_stops_publications(sim):
    sim.enable_sensor("robotino", "ir", 32)
    assert sim.step()
    sim.disable_sensor("robotino", "ir")
    assert sim.step() == []


def test_wheel_clamp_and_validation(sim):
    sim.set_wheel_velocity("robotino", 1, 100.0)
    assert sim.robots["robotino"].wheel_speeds == (0.0, 31.4, 0.0)
    sim.set_wheel_velocities("robotino", (-50, 5, 50))
    assert sim.robots["robotino"].wheel_speeds == (-31.4, 5.0, 31.4)
    with pytest.raises(SensorError) as err:
        sim.set_wheel_velocity("robotino", 3, 1.0)
    assert err.value.code == "BAD_INDEX"
    with pytest.raises(SensorError) as err:
        sim.set_wheel_velocities("robotino", (1, 2))
    assert err.value.code == "BAD_VALUES"
    with pytest.raises(SensorError):
        sim.set_wheel_velocities("robotino", (1, 2, float("nan")))


def test_mode_parse():
    assert SimulationMode.parse("FAST") is SimulationMode.FAST
    with pytest.raises(HarnessError) as err:
        SimulationMode.parse("TURBO")
    assert err.value.code == "BAD_MODE"


def _trace(seed):
    world = load_world(REF_WORLD)
    sim = Simulation(world)
    sim.enable_sensor("robotino", "ir", 32)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(300):
        if i % 10 == 0:
            sim.set_wheel_velocities("robotino", tuple(float(v) for v in rng.uniform(-31.4, 31.4, 3)))
        out.append(sim.step())
    return out, sim.dump()


def test_determinism_bit_identical():
    assert _trace(5) == _trace(5)


def test_non_penetration_adversarial():
    world = load_world(REF_WORLD)
    spec = world.robot("robotino")
    sim = Simulation(world)
    rng = np.random.default_rng(11)
    worst = math.inf
    for i in range(10_000):
        if i % 25 == 0:
            # mostly full-speed translation, the hardest case for tunnelling
            heading = rng.uniform(-math.pi, math.pi)
            wheels = inverse_kinematics((2.0 * math.cos(heading), 2.0 * math.sin(heading), rng.uniform(-3, 3)), spec)
            sim.set_wheel_velocities("robotino", wheels)
        sim.step()
        p = sim.robots["robotino"].pose
        worst = min(worst, edge_clearance(world, p.x, p.y, spec.body_radius))
    assert worst >= -1e-9
