from hypothesis import given, strategies as st
import numpy as np
import pytest

from tdsrobust.errors import (
    AsymmetricMatrixError,
    DimensionMismatchError,
    InvalidSectorOrderError,
    NonNegativeDefinitePiAaError,
    NotBlockDiagonalError,
    SingularCharMatrixError,
)
from tdsrobust.sysmodel import (
    PerturbationStructure,
    SectorKind,
    SectorRestriction,
    TdsSystem,
    TransformKind,
    flip_sign,
    q_pair,
    sector_preset,
    sector_value,
    shifted_system,
    transfer_g,
    transformation_one,
    transformation_two,
    w_matrix,
    weighted_structure,
)


def test_system_rejects_bad_shapes():
    with pytest.raises(DimensionMismatchError):
        TdsSystem([[1.0, 2.0]], [[0.0]], 1.0)
    with pytest.raises(DimensionMismatchError):
        TdsSystem([[1.0]], [[0.0]], 0.0)
    with pytest.raises(DimensionMismatchError):
        TdsSystem(np.eye(2), np.eye(3), 1.0)


def test_structure_dimensions(second_component):
    assert second_component.b.shape == (2, 1)
    assert (second_component.p1, second_component.p0, second_component.p) == (2, 2, 4)
    assert second_component.m == 1
    zeta = second_component.output(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    np.testing.assert_array_equal(zeta, [3.0, 4.0, 1.0, 2.0])


def test_structure_with_empty_delayed_output(delay_free_scalar):
    _, ps = delay_free_scalar
    assert ps.p1 == 0
    assert ps.p == 1


def test_sector_checks():
    with pytest.raises(NonNegativeDefinitePiAaError):
        SectorRestriction(np.eye(1), 0.0, np.eye(1))
    with pytest.raises(AsymmetricMatrixError):
        SectorRestriction([[1.0, 2.0], [0.0, 1.0]], 0.0, -np.eye(1))
    with pytest.raises(DimensionMismatchError):
        SectorRestriction(np.eye(2), np.zeros((3, 1)), -np.eye(1))


def test_scalar_pi_za_fills_block():
    sec = SectorRestriction(np.zeros((2, 2)), 0.5, -np.eye(2))
    np.testing.assert_array_equal(sec.pi_za, np.full((2, 2), 0.5))


def test_norm_bound_preset():
    sec = sector_preset(SectorKind.I_A, {"gamma": 0.3}, 4, 2)
    np.testing.assert_allclose(sec.pi_zz, 0.09 * np.eye(4))
    assert not np.any(sec.pi_za)
    np.testing.assert_array_equal(sec.pi_aa, -np.eye(2))


def test_preset_rows_need_square_structure():
    with pytest.raises(DimensionMismatchError):
        sector_preset(SectorKind.II_A, {"rho": 0.1}, 4, 2)


@given(
    k1=st.floats(-5.0, 5.0),
    width=st.floats(0.1, 5.0),
    fraction=st.floats(0.0, 1.0),
    zeta=st.floats(-10.0, 10.0),
)
def test_linear_gains_inside_sector_satisfy_form(k1, width, fraction, zeta):
    k2 = k1 + width
    gain = k1 + fraction * width
    sec = sector_preset(SectorKind.III_A, {"k1": k1, "k2": k2}, 1, 1)
    value = sector_value(sec, [zeta], [gain * zeta])
    assert value >= -1e-9 * (1.0 + zeta**2 * (abs(k1) + abs(k2)) ** 2)


@given(
    k1=st.floats(-5.0, -0.1),
    k2=st.floats(0.1, 5.0),
    fraction=st.floats(0.0, 1.0),
)
def test_disc_preset_contains_sector(k1, k2, fraction):
    sec = sector_preset(SectorKind.III_C, {"k1": k1, "k2": k2}, 1, 1)
    gain = k1 + fraction * (k2 - k1)
    expected = (1.0 - gain / k1) * (1.0 - gain / k2)
    assert sector_value(sec, [1.0], [gain]) == pytest.approx(expected, abs=1e-9)


def test_passivity_rows():
    sec = sector_preset(SectorKind.II_A, {"rho": 0.1}, 1, 1)
    # zeta * a >= rho a^2
    assert sector_value(sec, [2.0], [8.0]) == pytest.approx(2.0 * 8.0 - 0.1 * 64.0)
    hat = sector_preset(SectorKind.II_B, {"rho_hat": 0.1}, 1, 1)
    assert sector_value(hat, [2.0], [-8.0]) == pytest.approx(sector_value(sec, [2.0], [8.0]))


def test_flip_sign(unstructured):
    flipped = flip_sign(unstructured)
    np.testing.assert_array_equal(flipped.b, -unstructured.b)
    np.testing.assert_array_equal(flipped.c0, unstructured.c0)


def test_weighted_structure(unstructured):
    out_w = np.diag([1.0, 2.0, 3.0, 4.0])
    in_w = np.diag([2.0, 0.5])
    scaled = weighted_structure(unstructured, out_w, in_w)
    np.testing.assert_allclose(scaled.b, np.diag([0.5, 2.0]))
    np.testing.assert_allclose(scaled.c1, np.diag([1.0, 2.0]))
    np.testing.assert_allclose(scaled.c0, np.diag([3.0, 4.0]))

    coupled = np.eye(4)
    coupled[0, 3] = 1.0
    with pytest.raises(NotBlockDiagonalError):
        weighted_structure(unstructured, coupled, in_w)


def test_transformation_one_moves_midpoint_into_system(example_system):
    ps = PerturbationStructure(np.eye(2), np.zeros((0, 2)), np.eye(2))
    sec = sector_preset(SectorKind.III_A, {"k1": 0.0, "k2": 0.4}, 2, 2)
    trafo = transformation_one(example_system, ps, sec)
    assert trafo.kind == TransformKind.TRAFO_I
    np.testing.assert_allclose(trafo.system.a0, example_system.a0 - 0.2 * np.eye(2))
    np.testing.assert_allclose(trafo.system.a1, example_system.a1)
    assert not np.any(trafo.sector.pi_za)
    # III|a: Pi_zz + Pi_za Z = -k1 k2 + ((k1 + k2) / 2)^2
    np.testing.assert_allclose(trafo.sector.pi_zz, 0.04 * np.eye(2))


def test_transformation_one_is_idempotent(example_system):
    ps = PerturbationStructure(np.eye(2), np.zeros((0, 2)), np.eye(2))
    sec = sector_preset(SectorKind.III_A, {"k1": -0.1, "k2": 0.3}, 2, 2)
    once = transformation_one(example_system, ps, sec)
    twice = transformation_one(once.system, ps, once.sector)
    np.testing.assert_allclose(twice.system.a0, once.system.a0)
    np.testing.assert_allclose(twice.system.a1, once.system.a1)
    np.testing.assert_allclose(twice.sector.pi_zz, once.sector.pi_zz)


def test_transformation_two(example_system):
    ps = PerturbationStructure(np.eye(2), np.zeros((0, 2)), np.eye(2))
    trafo = transformation_two(example_system, ps, -0.5, 1.5)
    assert trafo.kind == TransformKind.TRAFO_II
    assert not np.any(trafo.sector.pi_zz)
    np.testing.assert_allclose(trafo.sector.pi_za, -np.eye(2))
    np.testing.assert_allclose(trafo.system.a0, example_system.a0 - 1.5 * np.eye(2))
    with pytest.raises(InvalidSectorOrderError):
        transformation_two(example_system, ps, 1.0, 1.0)


def test_transformation_two_needs_square_loop(example_system, unstructured):
    with pytest.raises(DimensionMismatchError):
        transformation_two(example_system, unstructured, 0.0, 1.0)


@given(omega=st.floats(-50.0, 50.0))
def test_transfer_conjugate_symmetry(omega):
    system = TdsSystem([[0.0, 1.0], [-1.0, -2.0]], [[0.0, 0.0], [-1.0, 1.0]], 1.0)
    ps = PerturbationStructure([0.0, 1.0], np.eye(2), np.eye(2))
    np.testing.assert_allclose(
        transfer_g(system, ps, -1j * omega), np.conj(transfer_g(system, ps, 1j * omega)), atol=1e-12
    )


@given(omega=st.floats(0.0, 30.0), k1=st.floats(-0.5, 0.5), width=st.floats(0.05, 1.0))
def test_loop_shift_preserves_w_up_to_congruence(omega, k1, width):
    system = TdsSystem([[0.0, 1.0], [-1.0, -2.0]], [[0.0, 0.0], [-1.0, 1.0]], 1.0)
    ps = PerturbationStructure(np.eye(2), np.zeros((0, 2)), np.eye(2))
    sec = sector_preset(SectorKind.III_A, {"k1": k1, "k2": k1 + width}, 2, 2)
    trafo = transformation_one(system, ps, sec)
    shift = (k1 + 0.5 * width) * np.eye(2)

    g = transfer_g(system, ps, 1j * omega)
    congruence = np.eye(2) + shift @ g
    # push-through: G_I = G (I + Z G)^-1
    np.testing.assert_allclose(
        transfer_g(trafo.system, ps, 1j * omega) @ congruence, g, atol=1e-9
    )
    w_orig = w_matrix(system, ps, sec, omega)
    w_trafo = w_matrix(trafo.system, ps, trafo.sector, omega)
    np.testing.assert_allclose(congruence.conj().T @ w_trafo @ congruence, w_orig, atol=1e-9)


def test_shifted_system_matches_transformation_two(example_system):
    ps = PerturbationStructure(np.eye(2), np.eye(2), np.zeros((0, 2)))
    shifted = shifted_system(example_system, ps, 0.7)
    np.testing.assert_allclose(shifted.a1, example_system.a1 - 0.7 * np.eye(2))
    np.testing.assert_allclose(shifted.a0, example_system.a0)


def test_singular_characteristic_matrix():
    # s = i is a root of x'(t) = -x(t - pi/2)
    system = TdsSystem([[0.0]], [[-1.0]], np.pi / 2)
    ps = PerturbationStructure([[1.0]], np.zeros((0, 1)), [[1.0]])
    with pytest.raises(SingularCharMatrixError):
        transfer_g(system, ps, 1j)


def test_q_pair_split(example_system, unstructured):
    sec = sector_preset(SectorKind.I_A, {"gamma": 0.5}, 4, 2)
    pair = q_pair(unstructured, sec)
    np.testing.assert_allclose(pair.q0, 0.25 * np.eye(2))
    np.testing.assert_allclose(pair.q1, 0.25 * np.eye(2))

    coupled = np.eye(4)
    coupled[0, 2] = coupled[2, 0] = 0.5
    with pytest.raises(NotBlockDiagonalError):
        q_pair(unstructured, SectorRestriction(coupled, 0.0, -np.eye(2)))
