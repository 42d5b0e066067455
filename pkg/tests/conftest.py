import pytest

from sojourn_mc.berman import estimate_berman

# Session-scoped constant tables shared by the acceptance gate and the
# structural tests. Sized for the acceptance tolerances; unit tests build
# their own small tables instead.


@pytest.fixture(scope="session")
def berman1():
    return estimate_berman(1.0, [0.0, 0.25, 0.5, 1.0, 2.0], S=50.0,
                           step=0.005, R=100_000, seed=0)


@pytest.fixture(scope="session")
def berman2():
    return estimate_berman(2.0, [0.0, 0.5, 1.0, 2.0], S=15.0, step=0.002,
                           R=200_000, seed=0)
