import pytest

from poisson_city.rand_dist import RngStream


@pytest.fixture
def stream():
    return RngStream(12345, 0, ("tests",))


BIG_SEED = 20240611
BIG_REPS = 10**5


@pytest.fixture(scope="session")
def big_batch():
    """One 10^5-replicate batch at N=20, eps=1e-4, shared by the slow checks."""
    from poisson_city.estimator import simulate_flows

    return _Batch(simulate_flows(BIG_SEED, BIG_REPS, 20, 1e-4))


class _Batch(list):
    def __repr__(self):
        return f"<{len(self)} flow estimates>"


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    """Call with (label, passed, detail); lines are printed in the terminal summary."""
    log = request.config.stash[_ACCEPTANCE]

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        log.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
