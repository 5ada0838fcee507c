import pytest
from hypothesis import settings

from gwperc.offspring import OffspringDistribution, binary, one_or_three

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def bin_dist():
    return binary()


@pytest.fixture
def mixed_dist():
    return one_or_three()


@pytest.fixture
def geo_dist():
    return OffspringDistribution.geometric(0.5)


@pytest.fixture(params=["binary", "geometric"])
def test_dist(request):
    return binary() if request.param == "binary" else OffspringDistribution.geometric(0.5)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
