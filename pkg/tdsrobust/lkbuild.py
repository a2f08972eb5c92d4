"""Construction and evaluation of LK functionals of robust type.

The operator Riccati equation on M2 = L2 x R^n is discretized by Chebyshev
collocation on [-h, 0]. The state is the vector of node values
(phi(theta_0), ..., phi(theta_N)) with theta_0 = 0, so the R^n coordinate r of
M2 coincides with phi(theta_0). The L2 part is integrated with a
positive rule on the remaining nodes theta_1..theta_N (weight zero at
theta_0, exact to degree N - 2); with this choice each block of the discrete
Riccati solution maps to exactly one kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import hashlib
import json
import logging

import numpy as np
from numpy.polynomial import chebyshev
from scipy import linalg
from scipy.interpolate import BarycentricInterpolator

from .const import (
    ARE_ACCEPT_TOL,
    ARE_MAX_ITERS,
    ARE_TOL,
    FUNCTIONAL_FORMAT,
    MIN_QUAD_WEIGHT,
    SCHEMA_VERSION,
)
from .errors import (
    AreNoStabilizingSolutionError,
    FunctionalMismatchError,
    IllConditionedQuadratureError,
    NodeMismatchError,
)
from .sysmodel import (
    PerturbationStructure,
    SectorRestriction,
    TdsSystem,
    q_pair,
    spectral_norm,
    transformation_one,
)

_LOGGER = logging.getLogger(__name__)


def _cheb_diff(order):
    """Chebyshev-Gauss-Lobatto points x_j = cos(pi j / N) and the derivative matrix."""
    x = np.cos(np.pi * np.arange(order + 1) / order)
    c = np.ones(order + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(order + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(order + 1))
    d -= np.diag(d.sum(axis=1))
    return x, d


def _clenshaw_curtis(x):
    """Clenshaw-Curtis weights on [-1, 1] for all Chebyshev-Gauss-Lobatto points."""
    order = len(x) - 1
    even = np.arange(0, order + 1, 2)
    moments = np.zeros(order + 1)
    moments[even] = 2.0 / (1.0 - even.astype(float) ** 2)
    return linalg.solve(chebyshev.chebvander(x, order).T, moments)


def _interior_weights(x):
    """Weights on x_1..x_N with no weight at x_0 = 1, exact up to degree N - 2.

    The Clenshaw-Curtis weight of x_0 is moved onto the interior points through
    the polynomial extrapolant at x = 1 of the interior values. The interior
    points are the zeros of U_{N-1}; their Lagrange basis at 1 is
    (-1)^(j+1) (1 + x_j), bounded by 2 in magnitude.
    """
    order = len(x) - 1
    cc = _clenshaw_curtis(x)
    j = np.arange(1, order)
    weights = cc[1:].copy()
    weights[:-1] += cc[0] * (-1.0) ** (j + 1) * (1.0 + x[j])
    return weights


@dataclass(frozen=True, eq=False)
class Discretization:
    """Nodes on [-h, 0] (theta_0 = 0, theta_N = -h), derivative matrix and weights."""

    h: float
    order: int
    nodes: np.ndarray
    diff_matrix: np.ndarray
    quad_weights: np.ndarray

    @classmethod
    def chebyshev(cls, h, order):
        if order < 2:
            raise ValueError(f"discretization order must be >= 2, got {order}")
        x, d = _cheb_diff(order)
        weights = np.concatenate([[0.0], 0.5 * h * _interior_weights(x)])
        return cls(
            h=float(h),
            order=int(order),
            nodes=0.5 * h * (x - 1.0),
            diff_matrix=(2.0 / h) * d,
            quad_weights=weights,
        )

    @property
    def size(self) -> int:
        return self.order + 1

    def check_weights(self):
        smallest = float(np.min(self.quad_weights[1:]))
        if smallest < MIN_QUAD_WEIGHT * self.h:
            raise IllConditionedQuadratureError(
                f"quadrature weight {smallest:.3e} is below {MIN_QUAD_WEIGHT:.0e} * h"
            )


def discretize_generator(sys: TdsSystem, disc: Discretization) -> np.ndarray:
    """Collocated generator on stacked node values; row block 0 is the system equation."""
    n = sys.n
    generator = np.kron(disc.diff_matrix, np.eye(n))
    generator[:n, :] = 0.0
    generator[:n, :n] = sys.a0
    generator[:n, -n:] += sys.a1
    return generator


class ChebyshevSegment:
    """Smooth function on [-h, 0] given by a Chebyshev series in x = 1 + 2 theta / h."""

    def __init__(self, coeffs, h):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.h = float(h)

    def __call__(self, theta):
        x = 1.0 + 2.0 * np.asarray(theta, dtype=float) / self.h
        return np.moveaxis(chebyshev.chebval(x, self.coeffs), 0, -1)

    def derivative(self, theta):
        x = 1.0 + 2.0 * np.asarray(theta, dtype=float) / self.h
        dcoeffs = chebyshev.chebder(self.coeffs, axis=0) * (2.0 / self.h)
        return np.moveaxis(chebyshev.chebval(x, dcoeffs), 0, -1)

    def sup_norm(self, points=257) -> float:
        values = self(np.linspace(-self.h, 0.0, points))
        return float(np.max(np.linalg.norm(values, axis=-1)))


def random_segment(rng, n, h, degree=6, radius=1.0) -> ChebyshevSegment:
    """Random Chebyshev series with decaying coefficients, scaled to sup norm radius."""
    decay = 1.0 / (1.0 + np.arange(degree + 1)) ** 2
    coeffs = rng.standard_normal((degree + 1, n)) * decay[:, None]
    segment = ChebyshevSegment(coeffs, h)
    norm = segment.sup_norm()
    if norm == 0:
        return segment
    return ChebyshevSegment(coeffs * (radius / norm), h)


def sample(disc: Discretization, fn) -> np.ndarray:
    """Values of fn at the nodes, shape (N+1, n)."""
    return np.stack([np.atleast_1d(np.asarray(fn(theta), dtype=float)) for theta in disc.nodes])


@dataclass(frozen=True)
class AreSolveReport:
    residual: float
    newton_iters: int
    closed_loop_stable: bool
    n_state: int
    closed_loop_abscissa: float = float("nan")

    def as_dict(self):
        return {
            "residual": self.residual,
            "newton_iters": self.newton_iters,
            "closed_loop_stable": self.closed_loop_stable,
            "n_state": self.n_state,
            "closed_loop_abscissa": self.closed_loop_abscissa,
        }


@dataclass(frozen=True, eq=False)
class LkFunctional:
    """V = V0 + V1 with V0 from the kernels (P_xx, P_xz, P_zz) and V1 from Q1."""

    p_xx: np.ndarray
    p_xz_nodes: np.ndarray
    p_zz_grid: np.ndarray
    q1_diag: np.ndarray
    disc: Discretization
    system: TdsSystem
    structure: PerturbationStructure
    sector: SectorRestriction

    @property
    def n(self) -> int:
        return self.p_xx.shape[0]

    @cached_property
    def quadratic_form(self) -> np.ndarray:
        """The matrix P with V0(phi) = x^T P x for the stacked node values x."""
        n, size = self.n, self.disc.size
        w = self.disc.quad_weights
        blocks = np.einsum("j,k,jkab->jkab", w, w, self.p_zz_grid)
        blocks[0, 1:] = w[1:, None, None] * self.p_xz_nodes[1:]
        blocks[1:, 0] = np.swapaxes(blocks[0, 1:], 1, 2)
        blocks[0, 0] = self.p_xx
        return blocks.transpose(0, 2, 1, 3).reshape(size * n, size * n)

    @cached_property
    def problem_hash(self) -> str:
        return problem_hash(self.system, self.structure, self.sector)


def problem_hash(sys, ps, sec) -> str:
    """Stable digest of the (system, structure, sector) triple."""
    payload = {**sys.as_dict(), **ps.as_dict(), **sec.as_dict()}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _relative_residual(a, p, q, s_mat):
    lyap = a.T @ p + p @ a
    quad = p @ s_mat @ p
    scale = np.linalg.norm(lyap) + np.linalg.norm(q) + np.linalg.norm(quad)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(lyap + q + quad) / scale)


def solve_riccati(a, s_mat, q, tol=ARE_TOL, max_iters=ARE_MAX_ITERS):
    """Stabilizing solution of A^T P + P A + Q + P S P = 0 by Newton-Kleinman.

    Starts from P = 0, which needs A itself to be stable. Each step solves
    (A + S P_k)^T P + P (A + S P_k) = -Q + P_k S P_k.

    Returns:
        tuple: (P, residual, iterations, closed-loop spectral abscissa)
    """
    p = np.zeros_like(a)
    residual = _relative_residual(a, p, q, s_mat)
    iters = 0
    while residual > tol and iters < max_iters:
        closed = a + s_mat @ p
        p_next = linalg.solve_continuous_lyapunov(closed.T, -q + p @ s_mat @ p)
        p_next = 0.5 * (p_next + p_next.T)
        iters += 1
        if not np.all(np.isfinite(p_next)):
            _LOGGER.debug("Newton-Kleinman produced non-finite iterate at step %d", iters)
            break
        p = p_next
        residual = _relative_residual(a, p, q, s_mat)
        _LOGGER.debug("Newton-Kleinman step %d: residual %.3e", iters, residual)
    abscissa = float(np.max(linalg.eigvals(a + s_mat @ p).real))
    return p, residual, iters, abscissa


def _extrapolate_to_zero(nodes, values):
    return BarycentricInterpolator(nodes, values, axis=0)(0.0)


def build_functional(sys, ps, sec, disc, tol=ARE_TOL):
    """Construct the LK functional of robust type for (sys, ps, sec).

    Args:
        sys: nominal TdsSystem
        ps: PerturbationStructure
        sec: SectorRestriction
        disc: Discretization of [-h, 0]
        tol: relative residual at which Newton-Kleinman stops

    Returns:
        tuple: (LkFunctional, AreSolveReport)
    """
    disc.check_weights()
    trafo = transformation_one(sys, ps, sec)
    qp = q_pair(ps, trafo.sector)
    n, size = sys.n, disc.size

    a = discretize_generator(trafo.system, disc)
    inject = np.zeros((size * n, n))
    inject[:n] = np.eye(n)
    q = inject @ (qp.q0 + qp.q1) @ inject.T
    b_big = inject @ ps.b
    s_mat = b_big @ linalg.solve(-sec.pi_aa, b_big.T, assume_a="pos")

    p, residual, iters, abscissa = solve_riccati(a, s_mat, q, tol=tol)
    report = AreSolveReport(residual, iters, abscissa < 0, size * n, abscissa)
    if not (residual <= max(tol, ARE_ACCEPT_TOL) and abscissa < 0):
        raise AreNoStabilizingSolutionError(
            f"no stabilizing Riccati solution (residual {residual:.3e}, "
            f"closed-loop abscissa {abscissa:.3e} after {iters} Newton steps)",
            report,
        )
    if residual > tol:
        _LOGGER.warning("Riccati residual %.3e above %.0e but accepted", residual, tol)

    w = disc.quad_weights
    blocks = p.reshape(size, n, size, n).transpose(0, 2, 1, 3)
    p_zz = np.zeros((size, size, n, n))
    p_zz[1:, 1:] = blocks[1:, 1:] / np.outer(w[1:], w[1:])[:, :, None, None]
    p_xz = np.zeros((size, n, n))
    p_xz[1:] = blocks[0, 1:] / w[1:, None, None]

    # theta_0 carries no quadrature weight; its samples are filled in for export only
    interior = disc.nodes[1:]
    p_zz[0, 1:] = _extrapolate_to_zero(interior, p_zz[1:, 1:])
    p_zz[1:, 0] = np.swapaxes(p_zz[0, 1:], 1, 2)
    corner = _extrapolate_to_zero(interior, p_zz[0, 1:])
    p_zz[0, 0] = 0.5 * (corner + corner.T)
    p_xz[0] = _extrapolate_to_zero(interior, p_xz[1:])

    lk = LkFunctional(
        p_xx=0.5 * (blocks[0, 0] + blocks[0, 0].T),
        p_xz_nodes=p_xz,
        p_zz_grid=p_zz,
        q1_diag=qp.q1,
        disc=disc,
        system=sys,
        structure=ps,
        sector=sec,
    )
    _LOGGER.info(
        "Built LK functional: N=%d, residual %.3e, %d Newton steps", disc.order, residual, iters
    )
    return lk, report


def _nodal(lk, phi):
    if callable(phi):
        phi = sample(lk.disc, phi)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1 and lk.n == 1:
        phi = phi[:, None]
    if phi.shape != (lk.disc.size, lk.n):
        raise NodeMismatchError(
            f"expected samples of shape {(lk.disc.size, lk.n)}, got {phi.shape}"
        )
    return phi


def evaluate_V(lk, phi) -> float:
    """V(phi) by quadrature of the kernel form."""
    phi = _nodal(lk, phi)
    w = lk.disc.quad_weights
    phi0 = phi[0]
    value = phi0 @ lk.p_xx @ phi0
    value += 2.0 * np.einsum("a,k,kab,kb->", phi0, w, lk.p_xz_nodes, phi)
    value += np.einsum("j,k,ja,jkab,kb->", w, w, phi, lk.p_zz_grid, phi)
    value += np.einsum("k,ka,ab,kb->", w, phi, lk.q1_diag, phi)
    return float(value)


def evaluate_v(lk, phi) -> np.ndarray:
    """v(phi) = P_xx phi(0) + int P_xz(eta) phi(eta) d eta; V1 adds nothing."""
    phi = _nodal(lk, phi)
    w = lk.disc.quad_weights
    return lk.p_xx @ phi[0] + np.einsum("k,kab,kb->a", w, lk.p_xz_nodes, phi)


def nominal_derivative(lk, sys, phi, dphi) -> float:
    """D_f V(phi) for a segment whose derivative on [-h, 0) is dphi.

    The endpoint velocity is f(phi) = A0 phi(0) + A1 phi(-h).
    """
    phi = _nodal(lk, phi)
    velocity = np.array(_nodal(lk, dphi), dtype=float)
    velocity[0] = sys.f(phi[0], phi[-1])
    w = lk.disc.quad_weights
    d_v0 = 2.0 * phi.ravel() @ lk.quadratic_form @ velocity.ravel()
    d_v1 = 2.0 * np.einsum("k,ka,ab,kb->", w, phi, lk.q1_diag, velocity)
    return float(d_v0 + d_v1)


def split_derivative(lk, phi) -> float:
    """D V1 along the collocated generator, to compare with
    phi(0)^T Q1 phi(0) - phi(-h)^T Q1 phi(-h)."""
    phi = _nodal(lk, phi)
    w = lk.disc.quad_weights
    velocity = lk.disc.diff_matrix @ phi
    return float(2.0 * np.einsum("k,ka,ab,kb->", w[1:], phi[1:], lk.q1_diag, velocity[1:]))


def defining_equation_rhs(lk, ps, sec, phi) -> float:
    phi = _nodal(lk, phi)
    zeta = ps.output(phi[0], phi[-1])
    resid = ps.b.T @ evaluate_v(lk, phi) - sec.pi_za.T @ zeta
    return float(-zeta @ sec.pi_zz @ zeta - resid @ linalg.solve(-sec.pi_aa, resid, assume_a="pos"))


def defining_equation_residual(lk, sys, ps, sec, phi) -> float:
    """|D_f V(phi) - rhs(phi)| / (1 + |rhs(phi)|) with the spectral derivative of phi."""
    phi = _nodal(lk, phi)
    lhs = nominal_derivative(lk, sys, phi, lk.disc.diff_matrix @ phi)
    rhs = defining_equation_rhs(lk, ps, sec, phi)
    return abs(lhs - rhs) / (1.0 + abs(rhs))


def upper_bound_constant(lk) -> float:
    """k2 with V(phi) <= k2 ||phi||_C^2, from the M2 norm of the discrete operator."""
    n, size = lk.n, lk.disc.size
    metric = np.concatenate([[1.0], lk.disc.quad_weights[1:]])
    metric = np.repeat(metric, n)
    scaled = lk.quadratic_form / np.sqrt(np.outer(metric, metric))
    p0_norm = float(np.max(np.abs(linalg.eigvalsh(0.5 * (scaled + scaled.T))))) if size * n else 0.0
    return (lk.disc.h + 1.0) * p0_norm + lk.disc.h * spectral_norm(lk.q1_diag)


def _razumikhin_segment(rng, n, h, radius):
    """Random segment whose sup norm is attained at theta = 0."""
    anchor = rng.standard_normal(n)
    anchor *= radius / np.linalg.norm(anchor)
    wiggle = random_segment(rng, n, h, radius=radius)
    offset = wiggle(0.0)
    grid = np.linspace(-h, 0.0, 257)
    scale = 1.0
    for _ in range(40):
        values = anchor + scale * (wiggle(grid) - offset)
        if np.max(np.linalg.norm(values, axis=-1)) <= np.linalg.norm(anchor) * (1.0 + 1e-12):
            break
        scale *= 0.5
    else:
        scale = 0.0
    return lambda theta: anchor + scale * (wiggle(theta) - offset)


def positivity_probe(lk, samples, radius, rng=None):
    """Minimum cubic-bound and Razumikhin-set ratios over random segments.

    Returns:
        tuple: (min V ||phi||_C / ||phi(0)||^3, min V / ||phi(0)||^2 on ||phi||_C = ||phi(0)||)
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    n, h = lk.n, lk.disc.h
    cubic, razumikhin = np.inf, np.inf
    for _ in range(samples):
        segment = random_segment(rng, n, h, radius=radius * rng.uniform(0.05, 1.0))
        phi = sample(lk.disc, segment)
        head = np.linalg.norm(phi[0])
        value = evaluate_V(lk, phi)
        if value < 0:
            cubic = min(cubic, value)
        elif head > 1e-14:
            cubic = min(cubic, value * segment.sup_norm() / head**3)

        anchored = _razumikhin_segment(rng, n, h, radius * rng.uniform(0.05, 1.0))
        phi = sample(lk.disc, anchored)
        head = np.linalg.norm(phi[0])
        razumikhin = min(razumikhin, evaluate_V(lk, phi) / head**2)
    return float(cubic), float(razumikhin)


def functional_document(lk) -> dict:
    """Self-describing JSON form; matrices are nested row-major lists."""
    return {
        "format": FUNCTIONAL_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "n": lk.n,
        "N": lk.disc.order,
        "h": lk.disc.h,
        "nodes": lk.disc.nodes.tolist(),
        "quad_weights": lk.disc.quad_weights.tolist(),
        "p_xx": lk.p_xx.tolist(),
        "p_xz_nodes": lk.p_xz_nodes.tolist(),
        "p_zz_grid": lk.p_zz_grid.tolist(),
        "q1_diag": lk.q1_diag.tolist(),
        "meta": {
            "system": lk.system.as_dict(),
            "structure": lk.structure.as_dict(),
            "sector": lk.sector.as_dict(),
            "hash": lk.problem_hash,
        },
    }


def save_functional(lk, path):
    with open(path, "w") as f:
        json.dump(functional_document(lk), f)
    _LOGGER.debug("Saved functional to %s", path)


def load_functional(path) -> LkFunctional:
    with open(path, "r") as f:
        doc = json.load(f)
    if doc.get("format") != FUNCTIONAL_FORMAT:
        raise FunctionalMismatchError(f"{path} is not an LK functional document")

    meta = doc["meta"]
    system = TdsSystem(**meta["system"])
    structure = PerturbationStructure(**meta["structure"])
    sector = SectorRestriction(**meta["sector"])
    disc = Discretization.chebyshev(doc["h"], doc["N"])
    if not np.array_equal(disc.nodes, np.array(doc["nodes"])):
        raise NodeMismatchError(f"nodes stored in {path} do not match N={doc['N']}")
    lk = LkFunctional(
        p_xx=np.array(doc["p_xx"], dtype=float),
        p_xz_nodes=np.array(doc["p_xz_nodes"], dtype=float),
        p_zz_grid=np.array(doc["p_zz_grid"], dtype=float),
        q1_diag=np.array(doc["q1_diag"], dtype=float),
        disc=disc,
        system=system,
        structure=structure,
        sector=sector,
    )
    if lk.problem_hash != meta["hash"]:
        raise FunctionalMismatchError(f"meta hash in {path} does not match its contents")
    return lk
