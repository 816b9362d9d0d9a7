import numpy as np
import pytest

from mmgimpute.graph import UndirectedGraph

# edges 1-2, 1-3, 2-3, 2-4, 4-5 in 1-based labels
BOWTIE_EDGES = [(1, 2), (1, 3), (2, 3), (2, 4), (4, 5)]


@pytest.fixture
def bowtie():
    return UndirectedGraph.from_edges_1based(5, BOWTIE_EDGES)


@pytest.fixture
def chain3():
    return UndirectedGraph.chain(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record the outcome of the acceptance criterion named by the test's marker."""
    num, title = request.node.get_closest_marker("criterion").args
    results = request.config.stash.setdefault(_RESULTS, {})
    results[num] = [title, False, "did not complete"]

    def check(ok, detail=""):
        results[num][1:] = [bool(ok), detail]
        assert ok, f"criterion {num} ({title}): {detail}"

    return check


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        title, ok, detail = results[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num}: {title} [{detail}]")
