"""Shared pytest wiring.

The acceptance module records one line per criterion; echo them after the
run so the pass/fail ledger is visible without digging through -v output.
"""

import numpy as np

from complab.transition import TransitionMatrix

ACCEPTANCE_LINES: list[str] = []


def assert_valid_transition(q: TransitionMatrix) -> None:
    """Shared structural checks: zero diagonal, row-stochastic, entries in [0,1]."""
    entries = q.entries
    assert entries.shape == (q.c, q.c)
    np.testing.assert_array_equal(np.diag(entries), np.zeros(q.c))
    np.testing.assert_allclose(entries.sum(axis=1), np.ones(q.c), atol=1e-9)
    assert entries.min() >= 0.0
    assert entries.max() <= 1.0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
