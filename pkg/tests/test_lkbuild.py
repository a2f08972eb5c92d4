import json
import warnings

from hypothesis import given, strategies as st
import numpy as np
import pytest

from tdsrobust.errors import (
    AreNoStabilizingSolutionError,
    FunctionalMismatchError,
    IllConditionedQuadratureError,
    NodeMismatchError,
)
from tdsrobust.lkbuild import (
    ChebyshevSegment,
    Discretization,
    LkFunctional,
    build_functional,
    defining_equation_residual,
    evaluate_V,
    evaluate_v,
    load_functional,
    positivity_probe,
    problem_hash,
    random_segment,
    sample,
    save_functional,
    split_derivative,
    upper_bound_constant,
)
from tdsrobust.sysmodel import PerturbationStructure, SectorKind, TdsSystem, sector_preset


@pytest.fixture(scope="module")
def example_functional():
    system = TdsSystem([[0.0, 1.0], [-1.0, -2.0]], [[0.0, 0.0], [-1.0, 1.0]], 1.0)
    eye = np.eye(2)
    ps = PerturbationStructure(eye, eye, eye)
    sec = sector_preset(SectorKind.I_A, {"gamma": 0.1}, 4, 2)
    lk, report = build_functional(system, ps, sec, Discretization.chebyshev(1.0, 24))
    return lk, report


@pytest.fixture
def scalar_functional(delay_free_scalar):
    system, ps = delay_free_scalar
    sec = sector_preset(SectorKind.I_A, {"gamma": 0.6}, 1, 1)
    return build_functional(system, ps, sec, Discretization.chebyshev(1.0, 12))


def test_nodes_and_weights():
    disc = Discretization.chebyshev(2.0, 16)
    assert disc.nodes[0] == 0.0
    assert disc.nodes[-1] == pytest.approx(-2.0)
    assert np.all(np.diff(disc.nodes) < 0)
    assert disc.quad_weights[0] == 0.0
    assert disc.quad_weights.sum() == pytest.approx(2.0, rel=1e-12)
    assert disc.size == 17


@pytest.mark.parametrize("degree", [0, 1, 5, 14])
def test_quadrature_is_exact(degree):
    h = 1.5
    disc = Discretization.chebyshev(h, 16)
    exact = -((-h) ** (degree + 1)) / (degree + 1)
    assert disc.quad_weights @ disc.nodes**degree == pytest.approx(exact, abs=1e-12)


@pytest.mark.parametrize("degree", [1, 4, 12])
def test_differentiation_is_exact_on_polynomials(degree):
    disc = Discretization.chebyshev(1.0, 16)
    np.testing.assert_allclose(
        disc.diff_matrix @ disc.nodes**degree, degree * disc.nodes ** (degree - 1), atol=1e-9
    )


@pytest.mark.parametrize("order", range(2, 41))
def test_weights_are_positive_for_every_order(order):
    disc = Discretization.chebyshev(1.0, order)
    assert disc.quad_weights[0] == 0.0
    assert np.min(disc.quad_weights[1:]) > 1e-4 / order**2
    assert disc.quad_weights.sum() == pytest.approx(1.0, rel=1e-12)
    disc.check_weights()


def test_chebyshev_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Discretization.chebyshev(1.0, 24)


def test_discretization_order_is_validated():
    with pytest.raises(ValueError):
        Discretization.chebyshev(1.0, 1)


def test_tiny_weight_is_rejected():
    disc = Discretization.chebyshev(1.0, 8)
    weights = disc.quad_weights.copy()
    weights[3] = 0.0
    broken = Discretization(disc.h, disc.order, disc.nodes, disc.diff_matrix, weights)
    with pytest.raises(IllConditionedQuadratureError):
        broken.check_weights()


def test_chebyshev_segment_derivative():
    segment = ChebyshevSegment([[0.0], [1.0], [0.5]], 2.0)
    theta = np.linspace(-2.0, 0.0, 7)
    eps = 1e-6
    fd = (segment(theta + eps) - segment(theta - eps)) / (2.0 * eps)
    np.testing.assert_allclose(segment.derivative(theta), fd, atol=1e-7)


def test_random_segment_has_requested_norm():
    segment = random_segment(np.random.default_rng(3), 2, 1.0, radius=0.7)
    assert segment.sup_norm() == pytest.approx(0.7)


def test_delay_free_scalar_riccati(scalar_functional):
    # -2P + 0.36 + P^2 = 0 has the stabilizing root P = 0.2
    lk, report = scalar_functional
    assert lk.p_xx[0, 0] == pytest.approx(0.2, abs=1e-9)
    assert report.closed_loop_stable
    assert report.closed_loop_abscissa < 0
    assert report.residual <= 1e-10
    assert report.n_state == 13
    np.testing.assert_allclose(lk.p_xz_nodes, 0.0, atol=1e-8)
    np.testing.assert_allclose(lk.q1_diag, 0.0)


def test_zero_sector_gives_zero_functional(delay_free_scalar):
    system, ps = delay_free_scalar
    sec = sector_preset(SectorKind.I_A, {"gamma": 0.0}, 1, 1)
    lk, report = build_functional(system, ps, sec, Discretization.chebyshev(1.0, 8))
    np.testing.assert_allclose(lk.quadratic_form, 0.0, atol=1e-14)
    assert report.newton_iters == 0


def test_example_functional_solves_riccati(example_functional):
    lk, report = example_functional
    assert report.residual <= 1e-8
    assert report.closed_loop_stable
    assert report.n_state == 2 * 25
    assert np.all(np.linalg.eigvalsh(lk.p_xx) > 0)
    np.testing.assert_allclose(lk.p_zz_grid, np.swapaxes(np.swapaxes(lk.p_zz_grid, 0, 1), 2, 3), atol=1e-10)


def test_no_stabilizing_solution_above_bound(example_system, unstructured, example_sector):
    with pytest.raises(AreNoStabilizingSolutionError) as info:
        build_functional(example_system, unstructured, example_sector(0.12), Discretization.chebyshev(1.0, 16))
    assert info.value.report is not None


@given(seed=st.integers(0, 2**32 - 1))
def test_defining_equation_holds_for_smooth_segments(example_functional, seed):
    lk, _ = example_functional
    phi = random_segment(np.random.default_rng(seed), 2, 1.0, degree=lk.disc.order // 2)
    assert defining_equation_residual(lk, lk.system, lk.structure, lk.sector, phi) <= 1e-6


def test_split_term_derivative(example_functional):
    lk, _ = example_functional
    phi = random_segment(np.random.default_rng(5), 2, 1.0, degree=8)
    head, tail = phi(0.0), phi(-1.0)
    expected = head @ lk.q1_diag @ head - tail @ lk.q1_diag @ tail
    assert split_derivative(lk, phi) == pytest.approx(expected, abs=1e-10)


def test_v_is_first_block_row(example_functional):
    lk, _ = example_functional
    phi = sample(lk.disc, random_segment(np.random.default_rng(11), 2, 1.0))
    np.testing.assert_allclose(evaluate_v(lk, phi), (lk.quadratic_form @ phi.ravel())[:2], atol=1e-12)


def test_q1_only_functional(example_system, unstructured, example_sector):
    disc = Discretization.chebyshev(1.0, 10)
    size = disc.size
    lk = LkFunctional(
        p_xx=np.zeros((2, 2)),
        p_xz_nodes=np.zeros((size, 2, 2)),
        p_zz_grid=np.zeros((size, size, 2, 2)),
        q1_diag=np.eye(2),
        disc=disc,
        system=example_system,
        structure=unstructured,
        sector=example_sector(0.1),
    )
    constant = np.array([0.3, -0.4])
    assert evaluate_V(lk, lambda theta: constant) == pytest.approx(0.25)
    np.testing.assert_array_equal(evaluate_v(lk, lambda theta: constant), [0.0, 0.0])


def test_wrong_sample_shape(example_functional):
    lk, _ = example_functional
    with pytest.raises(NodeMismatchError):
        evaluate_V(lk, np.zeros((lk.disc.size - 1, 2)))


def test_upper_bound_constant(example_functional):
    lk, _ = example_functional
    k2 = upper_bound_constant(lk)
    rng = np.random.default_rng(8)
    for _ in range(20):
        phi = sample(lk.disc, random_segment(rng, 2, 1.0, degree=10))
        c_norm = np.max(np.linalg.norm(phi, axis=1))
        assert evaluate_V(lk, phi) <= k2 * c_norm**2


def test_positivity_probe_scalar(scalar_functional):
    lk, _ = scalar_functional
    cubic, razumikhin = positivity_probe(lk, samples=20, radius=1.0)
    assert razumikhin == pytest.approx(0.2, abs=1e-6)
    assert cubic >= 0.2 - 1e-6


def test_positivity_probe_example(example_functional):
    lk, _ = example_functional
    cubic, razumikhin = positivity_probe(lk, samples=30, radius=1.0, rng=np.random.default_rng(1))
    assert cubic > 0
    assert razumikhin > 0


@pytest.mark.slow
def test_kernels_converge_with_order(example_system, unstructured, example_sector):
    coarse, _ = build_functional(example_system, unstructured, example_sector(0.1), Discretization.chebyshev(1.0, 16))
    fine, _ = build_functional(example_system, unstructured, example_sector(0.1), Discretization.chebyshev(1.0, 32))
    # the kernels are only piecewise smooth, so convergence is algebraic
    np.testing.assert_allclose(coarse.p_xx, fine.p_xx, rtol=5e-2)


def test_problem_hash_tracks_contents(example_system, unstructured, example_sector):
    assert problem_hash(example_system, unstructured, example_sector(0.1)) == problem_hash(
        example_system, unstructured, example_sector(0.1)
    )
    assert problem_hash(example_system, unstructured, example_sector(0.1)) != problem_hash(
        example_system, unstructured, example_sector(0.11)
    )


def test_save_and_load(example_functional, tmp_path):
    lk, _ = example_functional
    path = tmp_path / "functional.json"
    save_functional(lk, path)
    loaded = load_functional(path)
    np.testing.assert_array_equal(loaded.p_xx, lk.p_xx)
    np.testing.assert_array_equal(loaded.p_zz_grid, lk.p_zz_grid)
    np.testing.assert_array_equal(loaded.disc.nodes, lk.disc.nodes)
    assert loaded.problem_hash == lk.problem_hash
    phi = random_segment(np.random.default_rng(2), 2, 1.0)
    assert evaluate_V(loaded, phi) == evaluate_V(lk, phi)


def test_load_rejects_tampering(example_functional, tmp_path):
    lk, _ = example_functional
    path = tmp_path / "functional.json"
    save_functional(lk, path)
    doc = json.loads(path.read_text())

    moved = dict(doc, nodes=[node + 1e-3 for node in doc["nodes"]])
    path.write_text(json.dumps(moved))
    with pytest.raises(NodeMismatchError):
        load_functional(path)

    rehashed = dict(doc, meta=dict(doc["meta"], hash="0" * 64))
    path.write_text(json.dumps(rehashed))
    with pytest.raises(FunctionalMismatchError):
        load_functional(path)

    path.write_text(json.dumps(dict(doc, format="something_else")))
    with pytest.raises(FunctionalMismatchError):
        load_functional(path)
