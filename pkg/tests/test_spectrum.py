import math

import numpy as np
import pytest
from scipy.special import lambertw

from tdsrobust.spectrum import (
    imag_axis_clearance,
    is_exponentially_stable,
    newton_polish,
    rightmost_roots,
)
from tdsrobust.sysmodel import TdsSystem, char_matrix


def test_pure_delay_matches_lambert_w(pure_delay):
    # s exp(s) = -1 for x'(t) = -x(t - 1)
    expected = complex(lambertw(-1.0, 0))
    report = rightmost_roots(pure_delay)
    assert report.roots[0] == pytest.approx(complex(expected.real, abs(expected.imag)), abs=1e-9)
    assert report.roots[1] == pytest.approx(report.roots[0].conjugate(), abs=1e-9)
    assert report.rightmost_real_part == pytest.approx(expected.real, abs=1e-9)
    assert all(report.polished)


def test_delay_free_roots_are_eigenvalues():
    system = TdsSystem([[0.0, 1.0], [-2.0, -3.0]], np.zeros((2, 2)), 1.0)
    report = rightmost_roots(system)
    assert report.roots[0] == pytest.approx(-1.0, abs=1e-8)
    assert any(abs(root + 2.0) < 1e-8 for root in report.roots)


def test_roots_are_sorted(example_system):
    report = rightmost_roots(example_system, count=8)
    reals = [root.real for root in report.roots]
    assert reals == sorted(reals, reverse=True)
    for root in report.roots:
        assert np.linalg.svd(char_matrix(example_system, root), compute_uv=False)[-1] < 1e-7


def test_order_is_validated(pure_delay):
    with pytest.raises(ValueError):
        rightmost_roots(pure_delay, order=4)


def test_newton_polish_converges_from_nearby_guess(pure_delay):
    expected = complex(lambertw(-1.0, 0))
    root = newton_polish(pure_delay, expected + 0.05 - 0.05j)
    assert root == pytest.approx(expected, abs=1e-10)


def test_example_system_is_stable(example_system):
    stable, report = is_exponentially_stable(example_system)
    assert stable
    assert report.rightmost_real_part < 0
    assert report.as_dict()["discretization_order"] == 32


def test_critical_delay_is_not_stable():
    # x'(t) = -x(t - pi/2) has the root s = i
    system = TdsSystem([[0.0]], [[-1.0]], math.pi / 2)
    stable, report = is_exponentially_stable(system)
    assert not stable
    assert report.rightmost_real_part == pytest.approx(0.0, abs=1e-8)
    assert imag_axis_clearance(system) < 1e-4


def test_clearance_of_stable_system(pure_delay):
    assert imag_axis_clearance(pure_delay) > 1e-2


def test_unstable_scalar():
    stable, report = is_exponentially_stable(TdsSystem([[0.5]], [[0.0]], 1.0))
    assert not stable
    assert report.roots[0] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize(
    "system",
    [
        TdsSystem([[0.0]], [[-1.0]], 1.0),
        TdsSystem([[0.0, 1.0], [-1.0, -2.0]], [[0.0, 0.0], [-1.0, 1.0]], 1.0),
        TdsSystem([[-2.0]], [[1.5]], 0.5),
    ],
    ids=["pure_delay", "example", "scalar_mixed"],
)
def test_rightmost_real_part_is_order_independent(system):
    coarse = rightmost_roots(system, order=24)
    fine = rightmost_roots(system, order=48)
    assert abs(fine.rightmost_real_part - coarse.rightmost_real_part) < 1e-6
