import random

import pytest

from primeflow.flow import FlowKey, PacketRecord

ACCEPTANCE_LINES: list[str] = []


def random_key(rng: random.Random) -> FlowKey:
    return FlowKey(
        rng.getrandbits(32), rng.getrandbits(32), rng.getrandbits(16), rng.getrandbits(16), rng.choice((6, 17))
    )


def zipf_trace(rng: random.Random, flows: int, packets: int, exponent: float = 1.1):
    keys = [random_key(rng) for _ in range(flows)]
    weights = [1.0 / (i + 1) ** exponent for i in range(flows)]
    picks = rng.choices(keys, weights=weights, k=packets)
    return [PacketRecord(k, ts) for ts, k in enumerate(picks)]


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
