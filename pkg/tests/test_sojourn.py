import numpy as np
import pytest

from sojourn_mc.covariance import LevelScaling
from sojourn_mc.errors import RangeError
from sojourn_mc.gauss_sim import GridPath
from sojourn_mc.sojourn import scaled_sojourn, sojourn_time


def _path(values, step=0.5):
    return GridPath(step=step, values=np.asarray(values, dtype=float),
                    seed=0, model_id="test")


def test_left_endpoint_counting_exact():
    # grid points at t = 0, 0.5, 1.0, 1.5; values above 0 at t = 0.5, 1.5
    p = _path([-1.0, 2.0, -3.0, 4.0])
    res = sojourn_time(p, 0.0)
    assert res.points_above == 2
    assert res.time_above == 1.0
    assert res.window == (0.0, 2.0)


def test_window_selects_left_endpoints():
    p = _path([1.0, 1.0, 1.0, 1.0])
    # [0.5, 1.5) holds the left endpoints 0.5 and 1.0
    assert sojourn_time(p, 0.0, 0.5, 1.5).points_above == 2
    # window boundaries that fall between grid points truncate downward
    assert sojourn_time(p, 0.0, 0.4, 1.4).points_above == 2
    assert sojourn_time(p, 0.0, 0.0, 0.5).points_above == 1
    # degenerate sub-step window holds just its left endpoint when on-grid
    assert sojourn_time(p, 0.0, 1.0, 1.2).points_above == 1


def test_additivity_over_abutting_windows():
    rng = np.random.default_rng(1)
    p = _path(rng.standard_normal(100), step=0.25)
    full = sojourn_time(p, 0.3, 0.0, 25.0).points_above
    parts = sum(sojourn_time(p, 0.3, a, a + 5.0).points_above
                for a in np.arange(0.0, 25.0, 5.0))
    assert parts == full


def test_monotone_in_level_and_window():
    rng = np.random.default_rng(2)
    p = _path(rng.standard_normal(60))
    c1 = sojourn_time(p, 0.0, 0.0, 20.0).points_above
    c2 = sojourn_time(p, 0.5, 0.0, 20.0).points_above
    c3 = sojourn_time(p, 0.5, 0.0, 10.0).points_above
    assert c2 <= c1 and c3 <= c2


def test_window_validation():
    p = _path([0.0, 1.0, 2.0])
    with pytest.raises(RangeError):
        sojourn_time(p, 0.0, -0.1, 1.0)
    with pytest.raises(RangeError):
        sojourn_time(p, 0.0, 1.0, 1.0)
    with pytest.raises(RangeError):
        sojourn_time(p, 0.0, 0.0, 2.1)  # horizon is 3 * 0.5 = 1.5


def test_scaled_sojourn_scaling_and_empty_window():
    p = _path([5.0, 5.0, 5.0, 5.0])
    scaling = LevelScaling(u=1.0, v=3.0, psi=0.1, m=10.0)
    assert scaled_sojourn(p, scaling, 1.0, 1.0) == pytest.approx(3.0 * 1.0)
    assert scaled_sojourn(p, scaling, 1.0, None) == pytest.approx(3.0 * 2.0)
    assert scaled_sojourn(p, scaling, 1.0, 0.0) == 0.0
    assert scaled_sojourn(p, scaling, 1.0, -2.5) == 0.0
    with pytest.raises(RangeError):
        scaled_sojourn(p, scaling, 2.0, 1.0)  # scaling built for u=1
