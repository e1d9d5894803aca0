from __future__ import annotations

import subprocess

import pytest

from helpers import EASY_WORLD, sim_command, wait_for
from rlharness.busline import Broker, BusClient
from rlharness.simcore import load_world


@pytest.fixture
def broker():
    b = Broker("127.0.0.1", 0)
    b.start()
    yield b
    b.close()


@pytest.fixture
def connect(broker):
    clients = []

    def _connect(**kwargs) -> BusClient:
        c = BusClient(broker.address_text, **kwargs)
        clients.append(c)
        return c

    yield _connect
    for c in clients:
        c.close()


@pytest.fixture
def easy_world():
    return load_world(EASY_WORLD)


@pytest.fixture
def spawn_sim(broker):
    """Start simulator processes against the test broker; killed on teardown."""
    procs = []

    def _spawn(world=EASY_WORLD, *extra: str, wait_name: str | None = "supervisor") -> subprocess.Popen:
        proc = subprocess.Popen(
            sim_command(broker.address_text, world, *extra),
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
        )
        procs.append(proc)
        if wait_name is not None:
            assert wait_for(lambda: wait_name in broker.registry_snapshot() or proc.poll() is not None, 20)
            assert proc.poll() is None, proc.stdout.read().decode()
        return proc

    yield _spawn
    for p in procs:
        if p.poll() is None:
            p.kill()
        p.wait()
        p.stdout.close()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_RESULTS, format_verdict

    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(format_verdict(number))
