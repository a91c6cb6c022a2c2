import numpy as np
import pytest

from qmeta.sim import PauliSum, PauliTerm


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pauli_sum(rng, n, n_terms, labels="IXYZ"):
    terms = []
    for _ in range(n_terms):
        ops = tuple((q, lab) for q in range(n) if (lab := labels[rng.integers(len(labels))]) != "I")
        terms.append(PauliTerm(float(rng.normal()), ops))
    return PauliSum(tuple(terms))


def central_difference(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
