import numpy as np
import pytest

from fairtail import InteractionRecord, build_matrix, generate_synthetic

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    prev = ACCEPTANCE.get(crit, True)
    ACCEPTANCE[crit] = prev and report.passed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), ok in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")


def records_from(triples):
    return [InteractionRecord(u, i, c) for u, i, c in triples]


@pytest.fixture
def toy_matrix():
    # u1: i1=4, i2=2 ; u2: i1=4
    return build_matrix(records_from([("u1", "i1", 4), ("u1", "i2", 2), ("u2", "i1", 4)]))


@pytest.fixture(scope="session")
def zipf_matrix():
    """The acceptance fixture: 1000 users x 2000 items, 100 events each, s=1.1."""
    return build_matrix(generate_synthetic(1000, 2000, 100, 1.1, 42))


def random_matrix(rng, n_users, n_items, density=0.3, integer=False):
    triples = []
    for u in range(n_users):
        mask = rng.random(n_items) < density
        mask[rng.integers(n_items)] = True
        for i in np.flatnonzero(mask):
            if integer:
                triples.append((f"u{u}", f"i{i}", int(rng.integers(1, 6))))
            else:
                triples.append((u, i, float(rng.uniform(0.5, 5.0))))
    if integer:
        return build_matrix(records_from(triples))
    import scipy.sparse as sp
    from fairtail.dataset import InteractionMatrix

    rows, cols, vals = zip(*triples)
    csr = sp.csr_matrix((vals, (rows, cols)), shape=(n_users, n_items))
    return InteractionMatrix(csr, [f"u{u}" for u in range(n_users)], [f"i{i}" for i in range(n_items)])
