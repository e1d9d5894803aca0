import pytest

from helpers import wait_for
from rlharness.errors import SensorError
from rlharness.simclient import Robotino
from rlharness.simclient.devices import DistanceSensor, Motor, TouchSensor, check_period
from rlharness.simclient.robotino import ACTION_TWISTS, MovementAction, parse_action
from rlharness.simcore.kinematics import inverse_kinematics


@pytest.fixture
def rig(spawn_sim, connect, easy_world):
    spawn_sim()
    bus = connect()
    bus.call("supervisor", "set_mode", {"mode": "FAST"})
    return bus, easy_world


def step(bus, n):
    bus.call("supervisor", "step", {"steps": n})


def test_read_before_any_publication_is_none(rig):
    bus, world = rig
    ir = DistanceSensor(bus, "robotino", world.basic_timestep_ms)
    assert ir.read() is None and ir.stamp() is None
    ir.enable(32)
    assert ir.read() is None
    step(bus, 1)
    assert wait_for(lambda: ir.read() is not None)
    assert len(ir.read()) == 9 and ir.stamp() == pytest.approx(0.032)


def test_period_multiple_of_timestep(rig):
    bus, world = rig
    ir = DistanceSensor(bus, "robotino", world.basic_timestep_ms)
    ir.enable(64)
    step(bus, 4)
    assert wait_for(lambda: ir._sub.received == 2)
    with pytest.raises(SensorError) as err:
        ir.enable(48)
    assert err.value.code == "BAD_PERIOD"


@pytest.mark.parametrize("period", [0, -32, 48, 32.0, True])
def test_check_period_rejects(period):
    with pytest.raises(SensorError):
        check_period(period, 32)


def test_touch_sensor_reads_bool(rig):
    bus, world = rig
    touch = TouchSensor(bus, "robotino", world.basic_timestep_ms)
    touch.enable(32)
    step(bus, 1)
    assert wait_for(lambda: touch.read() is not None)
    assert touch.read() is False


def test_motor_clamps(rig):
    bus, world = rig
    m = Motor(bus, "robotino", 2, 31.4)
    assert m.set_velocity(100) == 31.4
    assert m.set_velocity(-100) == -31.4
    assert bus.call("supervisor", "dump_state", {})["robots"]["robotino"]["wheel_speeds"] == [0.0, 0.0, -31.4]
    with pytest.raises(SensorError) as err:
        Motor(bus, "robotino", 5, 31.4).set_velocity(1)
    assert err.value.code == "BAD_INDEX"


def test_color_camera_unsupported(rig):
    bus, world = rig
    robot = Robotino(bus, world.robot("robotino"), world.basic_timestep_ms)
    with pytest.raises(SensorError) as err:
        robot.color_camera.enable(32)
    assert err.value.code == "UNSUPPORTED"


def test_action_wheel_speeds(easy_world):
    spec = easy_world.robot("robotino")
    robot = Robotino.__new__(Robotino)
    robot.spec = spec
    assert robot.wheel_speeds(MovementAction.STOP) == (0.0, 0.0, 0.0)
    assert robot.wheel_speeds(MovementAction.FORWARD) == pytest.approx(inverse_kinematics((0.2, 0, 0), spec), abs=1e-12)
    for action in MovementAction:
        assert max(abs(w) for w in robot.wheel_speeds(action)) <= spec.max_wheel_speed
    assert set(ACTION_TWISTS) == set(MovementAction)


def test_parse_action():
    assert parse_action("forward") is MovementAction.FORWARD
    assert parse_action(0) is MovementAction.STOP
    with pytest.raises(ValueError):
        parse_action("JUMP")


def test_forward_displacement_over_bus(rig):
    bus, world = rig
    robot = Robotino(bus, world.robot("robotino"), world.basic_timestep_ms)
    robot.apply_action(MovementAction.FORWARD)
    for k in (1, 5, 20):
        bus.call("supervisor", "reset", {})
        robot.apply_action(MovementAction.FORWARD)
        step(bus, k)
        x = bus.call("supervisor", "get_position", {})["x"]
        assert x == pytest.approx(k * 0.032 * 0.2, abs=1e-9)


def test_observe_after_reset_is_stale(rig):
    bus, world = rig
    robot = Robotino(bus, world.robot("robotino"), world.basic_timestep_ms)
    robot.enable_sensors(32)
    step(bus, 2)
    assert wait_for(lambda: robot.ir.read() is not None and robot.touch.read() is not None)
    reading = robot.observe()
    assert len(reading.ir) == 9 and reading.touch is False
    bus.call("supervisor", "reset", {})
    robot.discard_readings()
    with pytest.raises(SensorError) as err:
        robot.observe()
    assert err.value.code == "STALE_SENSORS"
    step(bus, 1)
    assert wait_for(lambda: robot.ir.read() is not None and robot.touch.read() is not None)
    assert robot.observe().stamps == {"ir": pytest.approx(0.032), "touch": pytest.approx(0.032)}
    robot.close()
