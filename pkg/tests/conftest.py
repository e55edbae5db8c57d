import math

import numpy as np
import pytest

from clifer.gwr import GwrNetwork


def brute_distance(net: GwrNetwork, nid, x, context):
    """Plain-Python evaluation of the weighted squared distance."""
    n = net.neuron(nid)
    alphas = net.params.alphas
    total = alphas[0] * sum((float(xi) - float(wi)) ** 2 for xi, wi in zip(x, n.weight))
    for k in range(net.params.context_depth):
        total += alphas[k + 1] * sum((float(a) - float(b)) ** 2 for a, b in zip(context[k], n.contexts[k]))
    return total


def brute_bmu(net: GwrNetwork, x, context):
    scored = sorted((brute_distance(net, nid, x, context), nid) for nid in net.ids)
    return scored[0][1], scored[1][1], scored[0][0]


def check_network_invariants(net: GwrNetwork):
    p = net.params
    for nid in net.ids:
        h = net.habituation(nid)
        assert 0.0 <= h <= 1.0
        assert all(c >= 0 for c in net.label_counts(nid).values())
        assert net.neuron(nid).contexts.shape == (p.context_depth, net.dim)
    live = set(net.ids)
    for (a, b), age in net.edges.items():
        assert a != b
        assert a < b
        assert a in live and b in live
        assert 0 <= age <= p.max_edge_age
    if p.prune_isolated and len(net) > 2:
        for nid in net.ids:
            assert net.neighbours(nid), f"neuron {nid} is isolated"
    for a, b in net.temporal_counts:
        assert a in live and b in live
    assert len(net) >= 2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def isclose(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)


# PASS/FAIL lines from the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
