"""System, perturbation structure and sector restriction types."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import logging

import numpy as np
from scipy import linalg

from .const import (
    ASYMMETRY_ERROR_TOL,
    BLOCK_DIAGONAL_TOL,
    SINGULAR_CHAR_TOL,
)
from .errors import (
    AsymmetricMatrixError,
    DimensionMismatchError,
    InvalidSectorOrderError,
    NonNegativeDefinitePiAaError,
    NotBlockDiagonalError,
    SingularCharMatrixError,
    SingularPiAaError,
)

_LOGGER = logging.getLogger(__name__)


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _as_matrix(value, name, rows=None, cols=None):
    """Coerce value to a 2-D float array; empty input becomes a (0, cols) block."""
    array = np.asarray(value, dtype=float)
    if array.size == 0:
        if cols is None:
            raise DimensionMismatchError(f"{name} is empty and its width is unknown")
        return np.zeros((0, cols))
    if array.ndim == 0:
        array = array.reshape(1, 1)
    elif array.ndim == 1:
        # a flat list is a column for b and a row for c0/c1
        array = array.reshape(-1, 1) if rows is not None and array.size == rows else array.reshape(1, -1)
    if array.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a matrix, got shape {array.shape}")
    if rows is not None and array.shape[0] != rows:
        raise DimensionMismatchError(f"{name} must have {rows} rows, got {array.shape[0]}")
    if cols is not None and array.shape[1] != cols:
        raise DimensionMismatchError(f"{name} must have {cols} columns, got {array.shape[1]}")
    return array


def _symmetrized(matrix, name):
    scale = max(np.linalg.norm(matrix), 1.0)
    asym = np.linalg.norm(matrix - matrix.T)
    if asym > ASYMMETRY_ERROR_TOL * scale:
        raise AsymmetricMatrixError(f"{name} is not symmetric (asymmetry {asym:.3e})")
    return 0.5 * (matrix + matrix.T)


def spectral_norm(matrix) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


@dataclass(frozen=True, eq=False)
class TdsSystem:
    """Nominal system x'(t) = A0 x(t) + A1 x(t-h)."""

    a0: np.ndarray
    a1: np.ndarray
    h: float

    def __post_init__(self):
        a0 = _as_matrix(self.a0, "a0")
        n = a0.shape[0]
        if a0.shape != (n, n) or n < 1:
            raise DimensionMismatchError(f"a0 must be square, got shape {a0.shape}")
        a1 = _as_matrix(self.a1, "a1", rows=n, cols=n)
        if not self.h > 0:
            raise DimensionMismatchError(f"delay h must be positive, got {self.h!r}")
        object.__setattr__(self, "a0", _frozen(a0))
        object.__setattr__(self, "a1", _frozen(a1))
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return self.a0.shape[0]

    @property
    def norm_sum(self) -> float:
        """||A0|| + ||A1||, the radius beyond which Delta(i w) cannot be singular."""
        return spectral_norm(self.a0) + spectral_norm(self.a1)

    def f(self, x_now, x_delayed):
        return self.a0 @ x_now + self.a1 @ x_delayed

    def as_dict(self):
        return {"a0": self.a0.tolist(), "a1": self.a1.tolist(), "h": self.h}


@dataclass(frozen=True, eq=False)
class PerturbationStructure:
    """The triple (B, C1, C0) of g(x_t) = -B a([C1 x(t-h); C0 x(t)])."""

    b: np.ndarray
    c1: np.ndarray
    c0: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        b = _as_matrix(b, "b")
        n = b.shape[0]
        c1 = _as_matrix(self.c1, "c1", cols=n)
        c0 = _as_matrix(self.c0, "c0", cols=n)
        if b.shape[1] < 1:
            raise DimensionMismatchError("b must have at least one column")
        if c1.shape[0] + c0.shape[0] < 1:
            raise DimensionMismatchError("c0 and c1 cannot both be empty")
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c1", _frozen(c1))
        object.__setattr__(self, "c0", _frozen(c0))

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p1(self) -> int:
        return self.c1.shape[0]

    @property
    def p0(self) -> int:
        return self.c0.shape[0]

    @property
    def p(self) -> int:
        return self.p0 + self.p1

    @property
    def c_stack(self) -> np.ndarray:
        return np.vstack([self.c1, self.c0])

    def output(self, x_now, x_delayed):
        """The stacked output [C1 phi(-h); C0 phi(0)]."""
        return np.concatenate([self.c1 @ x_delayed, self.c0 @ x_now])

    def check_system(self, sys: TdsSystem):
        if self.n != sys.n:
            raise DimensionMismatchError(
                f"structure has n={self.n} but the system has n={sys.n}"
            )

    def as_dict(self):
        return {"b": self.b.tolist(), "c1": self.c1.tolist(), "c0": self.c0.tolist()}


@dataclass(frozen=True, eq=False)
class SectorRestriction:
    """Quadratic form w(zeta, a) = [zeta; a]^T Pi [zeta; a] >= 0 with Pi_aa < 0."""

    pi_zz: np.ndarray
    pi_za: np.ndarray
    pi_aa: np.ndarray

    def __post_init__(self):
        pi_zz = _symmetrized(np.atleast_2d(np.asarray(self.pi_zz, dtype=float)), "pi_zz")
        pi_aa = _symmetrized(np.atleast_2d(np.asarray(self.pi_aa, dtype=float)), "pi_aa")
        p, m = pi_zz.shape[0], pi_aa.shape[0]
        pi_za = np.asarray(self.pi_za, dtype=float)
        if pi_za.ndim < 2 and pi_za.size == 1:
            pi_za = np.full((p, m), float(pi_za))
        if pi_za.shape != (p, m):
            raise DimensionMismatchError(f"pi_za must be {p}x{m}, got {pi_za.shape}")
        max_eig = float(np.linalg.eigvalsh(pi_aa)[-1])
        if not max_eig < 0:
            raise NonNegativeDefinitePiAaError(max_eig)
        object.__setattr__(self, "pi_zz", _frozen(pi_zz))
        object.__setattr__(self, "pi_za", _frozen(pi_za))
        object.__setattr__(self, "pi_aa", _frozen(pi_aa))

    @property
    def p(self) -> int:
        return self.pi_zz.shape[0]

    @property
    def m(self) -> int:
        return self.pi_aa.shape[0]

    def check_structure(self, ps: PerturbationStructure):
        if (self.p, self.m) != (ps.p, ps.m):
            raise DimensionMismatchError(
                f"sector is for (p, m)=({self.p}, {self.m}), structure has ({ps.p}, {ps.m})"
            )

    def as_dict(self):
        return {
            "pi_zz": self.pi_zz.tolist(),
            "pi_za": self.pi_za.tolist(),
            "pi_aa": self.pi_aa.tolist(),
        }


class SectorKind(str, Enum):
    """Rows of the sector preset table."""

    I_A = "I|a"
    I_B = "I|b"
    II_A = "II|a"
    II_B = "II|b"
    III_A = "III|a"
    III_B = "III|b"
    III_C = "III|c"


class TransformKind(str, Enum):
    TRAFO_I = "TrafoI"
    TRAFO_II = "TrafoII"


@dataclass(frozen=True, eq=False)
class TransformedSystem:
    system: TdsSystem
    sector: SectorRestriction
    kind: TransformKind


@dataclass(frozen=True, eq=False)
class QPair:
    q0: np.ndarray
    q1: np.ndarray


def _gain(value, m, name):
    gain = np.asarray(value, dtype=float)
    if gain.ndim == 0:
        return float(gain) * np.eye(m)
    gain = np.atleast_2d(gain)
    if gain.shape != (m, m):
        raise DimensionMismatchError(f"{name} must be a scalar or {m}x{m}, got {gain.shape}")
    return gain


def _sym(matrix):
    return 0.5 * (matrix + matrix.T)


def sector_preset(kind, params, p, m) -> SectorRestriction:
    """Build the (Pi_zz, Pi_za, Pi_aa) triple of one preset row.

    Args:
        kind: a SectorKind or its table label, e.g. "I|a"
        params: row parameters (gamma; gamma, L, W; rho; rho_hat; k1, k2 [, sign])
        p: output dimension
        m: nonlinearity dimension

    Returns:
        SectorRestriction: the preset, validated
    """
    kind = SectorKind(kind)
    if kind in (SectorKind.I_A, SectorKind.I_B):
        gamma = float(params["gamma"])
        if kind == SectorKind.I_A:
            return SectorRestriction(gamma**2 * np.eye(p), np.zeros((p, m)), -np.eye(m))
        out_w = np.atleast_2d(np.asarray(params["L"], dtype=float))
        in_w = np.atleast_2d(np.asarray(params["W"], dtype=float))
        if out_w.shape[1] != p or in_w.shape[1] != m:
            raise DimensionMismatchError(
                f"L must have {p} columns and W must have {m} columns, "
                f"got {out_w.shape} and {in_w.shape}"
            )
        return SectorRestriction(gamma**2 * out_w.T @ out_w, np.zeros((p, m)), -in_w.T @ in_w)

    if p != m:
        raise DimensionMismatchError(f"row {kind.value} needs p = m, got p={p}, m={m}")
    eye = np.eye(m)
    if kind == SectorKind.II_A:
        return SectorRestriction(np.zeros((m, m)), 0.5 * eye, -float(params["rho"]) * eye)
    if kind == SectorKind.II_B:
        return SectorRestriction(np.zeros((m, m)), -0.5 * eye, -float(params["rho_hat"]) * eye)

    k1 = _gain(params["k1"], m, "k1")
    k2 = _gain(params["k2"], m, "k2")
    if kind == SectorKind.III_A:
        return SectorRestriction(-_sym(k1.T @ k2), 0.5 * (k1.T + k2.T), -eye)
    k2_inv = np.linalg.inv(k2)
    if kind == SectorKind.III_B:
        return SectorRestriction(-_sym(k1), 0.5 * (eye + k1.T @ k2_inv), -_sym(k2_inv))

    # III|c: the upper sign gives a disc, the lower sign its complement
    k1_inv = np.linalg.inv(k1)
    cross = _sym(k1_inv.T @ k2_inv)
    sign = params.get("sign")
    if sign is None:
        sign = "upper" if np.linalg.eigvalsh(-cross)[0] > 0 else "lower"
    s = 1.0 if sign == "upper" else -1.0
    if not np.linalg.eigvalsh(-s * cross)[0] > 0:
        raise NonNegativeDefinitePiAaError(float(np.linalg.eigvalsh(s * cross)[-1]))
    return SectorRestriction(s * eye, -0.5 * s * (k1_inv + k2_inv), s * cross)


def sector_value(sec: SectorRestriction, zeta, a) -> float:
    """w(zeta, a) for one sample pair."""
    zeta = np.asarray(zeta, dtype=float)
    a = np.asarray(a, dtype=float)
    return float(zeta @ sec.pi_zz @ zeta + 2.0 * zeta @ sec.pi_za @ a + a @ sec.pi_aa @ a)


def flip_sign(ps: PerturbationStructure) -> PerturbationStructure:
    """Alternative form of row II|b: a_hat = -a with B_hat = -B."""
    return PerturbationStructure(-ps.b, ps.c1, ps.c0)


def weighted_structure(ps: PerturbationStructure, out_weight, in_weight) -> PerturbationStructure:
    """Fold the weights of row I|b into the structure so that row I|a applies.

    ||W a|| <= gamma ||L zeta|| becomes a plain norm bound for a_hat = W a acting
    through B W^-1 on zeta_hat = L zeta. L has to respect the (p1, p0) split.
    """
    out_weight = np.atleast_2d(np.asarray(out_weight, dtype=float))
    in_weight = np.atleast_2d(np.asarray(in_weight, dtype=float))
    p1 = ps.p1
    if out_weight.shape != (ps.p, ps.p) or in_weight.shape != (ps.m, ps.m):
        raise DimensionMismatchError("row I|b reduction needs square L (p x p) and W (m x m)")
    offdiag = max(
        spectral_norm(out_weight[:p1, p1:]), spectral_norm(out_weight[p1:, :p1])
    )
    if offdiag > BLOCK_DIAGONAL_TOL * max(spectral_norm(out_weight), 1.0):
        raise NotBlockDiagonalError(offdiag)
    b_hat = linalg.solve(in_weight.T, ps.b.T).T
    return PerturbationStructure(
        b_hat, out_weight[:p1, :p1] @ ps.c1, out_weight[p1:, p1:] @ ps.c0
    )


def _z_matrix(sec: SectorRestriction) -> np.ndarray:
    minus_aa = -sec.pi_aa
    if np.linalg.cond(minus_aa) > 1.0 / np.finfo(float).eps:
        raise SingularPiAaError("pi_aa is numerically singular")
    return linalg.solve(minus_aa, sec.pi_za.T, assume_a="pos")


def _shifted(sys: TdsSystem, ps: PerturbationStructure, gain) -> TdsSystem:
    """A0 - B K[0; C0], A1 - B K[C1; 0] for the m x p loop gain K."""
    gain = np.atleast_2d(gain)
    p1 = ps.p1
    return TdsSystem(
        sys.a0 - ps.b @ gain[:, p1:] @ ps.c0,
        sys.a1 - ps.b @ gain[:, :p1] @ ps.c1,
        sys.h,
    )


def transformation_one(sys, ps, sec) -> TransformedSystem:
    """Loop shift that removes Pi_za by moving Z = (-Pi_aa)^-1 Pi_za^T into the system."""
    ps.check_system(sys)
    sec.check_structure(ps)
    if not np.any(sec.pi_za):
        return TransformedSystem(sys, sec, TransformKind.TRAFO_I)
    z = _z_matrix(sec)
    sys_i = _shifted(sys, ps, z)
    sec_i = SectorRestriction(sec.pi_zz + sec.pi_za @ z, np.zeros_like(sec.pi_za), sec.pi_aa)
    _LOGGER.debug("Transformation I applied, ||Z|| = %.3e", spectral_norm(z))
    return TransformedSystem(sys_i, sec_i, TransformKind.TRAFO_I)


def transformation_two(sys, ps, k1, k2) -> TransformedSystem:
    """Loop shift by k2 for the sector [k1, k2]; Pi_zz becomes zero."""
    ps.check_system(sys)
    if not k2 > k1:
        raise InvalidSectorOrderError(k1, k2)
    if ps.p != ps.m:
        raise DimensionMismatchError(f"transformation II needs p = m, got p={ps.p}, m={ps.m}")
    m = ps.m
    sec = SectorRestriction(np.zeros((m, m)), -0.5 * (k2 - k1) * np.eye(m), -np.eye(m))
    return TransformedSystem(shifted_system(sys, ps, k2), sec, TransformKind.TRAFO_II)


def shifted_system(sys, ps, k) -> TdsSystem:
    """System with the scalar loop gain k*I closed around (B, C)."""
    return _shifted(sys, ps, float(k) * np.eye(ps.m, ps.p))


def char_matrix(sys: TdsSystem, s: complex) -> np.ndarray:
    """Delta(s) = sI - A0 - exp(-sh) A1."""
    return s * np.eye(sys.n) - sys.a0 - np.exp(-s * sys.h) * sys.a1


def char_matrices(sys: TdsSystem, s_values) -> np.ndarray:
    s_values = np.asarray(s_values, dtype=complex).reshape(-1)
    eye = np.eye(sys.n)
    return (
        s_values[:, None, None] * eye
        - sys.a0
        - np.exp(-s_values * sys.h)[:, None, None] * sys.a1
    )


def transfer_g_batch(sys, ps, s_values) -> np.ndarray:
    """G(s) on a batch of points, shape (K, p, m)."""
    s_values = np.asarray(s_values, dtype=complex).reshape(-1)
    deltas = char_matrices(sys, s_values)
    smallest = np.linalg.svd(deltas, compute_uv=False)[:, -1]
    delay = np.abs(np.exp(-s_values * sys.h))
    size = np.abs(s_values) + spectral_norm(sys.a0) + delay * spectral_norm(sys.a1)
    singular = smallest < SINGULAR_CHAR_TOL * size
    if np.any(singular):
        raise SingularCharMatrixError(complex(s_values[np.argmax(singular)]))
    rhs = np.broadcast_to(ps.b.astype(complex), (len(s_values), ps.n, ps.m))
    x = np.linalg.solve(deltas, rhs)
    delayed = np.exp(-s_values * sys.h)[:, None, None] * (ps.c1 @ x)
    return np.concatenate([delayed, ps.c0 @ x], axis=1)


def transfer_g(sys, ps, s) -> np.ndarray:
    """G(s) = [C1 exp(-sh); C0] Delta(s)^-1 B."""
    return transfer_g_batch(sys, ps, [s])[0]


def w_matrix_batch(sys, ps, sec, omegas) -> np.ndarray:
    g = transfer_g_batch(sys, ps, 1j * np.asarray(omegas, dtype=float).reshape(-1))
    gh = np.conj(np.swapaxes(g, 1, 2))
    form = gh @ sec.pi_zz @ g - gh @ sec.pi_za - sec.pi_za.T @ g + sec.pi_aa
    w = -form
    return 0.5 * (w + np.conj(np.swapaxes(w, 1, 2)))


def w_matrix(sys, ps, sec, omega) -> np.ndarray:
    """W(i omega) = -[G; -I]^H Pi [G; -I], Hermitian."""
    return w_matrix_batch(sys, ps, sec, [omega])[0]


def q_pair(ps: PerturbationStructure, sec_i: SectorRestriction) -> QPair:
    """Q0 = C0^T Pi_zz^00 C0 and Q1 = C1^T Pi_zz^11 C1 of the split functional."""
    if np.any(sec_i.pi_za):
        raise DimensionMismatchError("q_pair expects a sector with pi_za = 0 (after Transformation I)")
    p1 = ps.p1
    pi_zz = sec_i.pi_zz
    offdiag = spectral_norm(pi_zz[:p1, p1:])
    if offdiag > BLOCK_DIAGONAL_TOL * spectral_norm(pi_zz):
        raise NotBlockDiagonalError(offdiag)
    q1 = ps.c1.T @ pi_zz[:p1, :p1] @ ps.c1
    q0 = ps.c0.T @ pi_zz[p1:, p1:] @ ps.c0
    return QPair(_frozen(_sym(q0)), _frozen(_sym(q1)))
