import socket
from pathlib import Path

import pytest

from spaceval.extraction import builtin_config
from spaceval.hierarchy import default_hierarchy

DATA = Path(__file__).parent / "data"


class NetworkBlocked(RuntimeError):
    pass


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Fail any attempt to open a network connection."""

    def guard(*args, **kwargs):
        raise NetworkBlocked("network access attempted during tests")

    monkeypatch.setattr(socket.socket, "connect", guard)
    monkeypatch.setattr(socket.socket, "connect_ex", guard)
    monkeypatch.setattr(socket, "create_connection", guard)
    monkeypatch.setattr(socket, "getaddrinfo", guard)


@pytest.fixture(scope="session")
def hierarchy():
    return default_hierarchy()


@pytest.fixture(scope="session")
def pressure():
    return builtin_config("pressure")


@pytest.fixture(scope="session")
def temperature():
    return builtin_config("temperature")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


# acceptance verdicts, filled by test_acceptance and printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
