import numpy as np
import pytest

from wireless_dsgd.topology import from_edges


@pytest.fixture
def path3():
    return from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def triangle():
    return from_edges(3, [(0, 1), (1, 2), (0, 2)])


def star(K):
    return from_edges(K, [(0, i) for i in range(1, K)])


def random_graph(rng, K, p):
    edges = [(i, j) for i in range(K) for j in range(i + 1, K) if rng.random() < p]
    positions = rng.uniform(-100, 100, size=(K, 2))
    return from_edges(K, edges, positions)


@pytest.fixture
def rng():
    return np.random.default_rng(20201)


# one verdict line per acceptance criterion, printed after the test session
ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def order(key):
        text = str(key)
        digits = "".join(ch for ch in text if ch.isdigit())
        return int(digits), text

    for number in sorted(ACCEPTANCE, key=order):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {str(number):>3}: {'PASS' if ok else 'FAIL'}  {detail}")
