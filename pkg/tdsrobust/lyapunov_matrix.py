"""Delay Lyapunov matrix and the complete-type norm bound."""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
from scipy import linalg

from . import spectrum
from .const import DEFAULT_SPECTRUM_ORDER
from .errors import DimensionMismatchError, UnstableNominalError
from .sysmodel import spectral_norm

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DelayLyapunovMatrix:
    """Psi on [0, h] through Y(tau) = Psi(tau), Z(tau) = Psi(tau - h)."""

    h: float
    n: int
    generator: np.ndarray
    initial: np.ndarray

    @property
    def at_zero(self) -> np.ndarray:
        psi = self.initial[: self.n**2].reshape(self.n, self.n, order="F")
        return 0.5 * (psi + psi.T)

    def __call__(self, tau) -> np.ndarray:
        """Psi(tau) for tau in [-h, h]; Psi(-tau) = Psi(tau)^T."""
        tau = float(tau)
        if abs(tau) > self.h * (1.0 + 1e-12):
            raise ValueError(f"tau must lie in [-h, h], got {tau}")
        state = linalg.expm(self.generator * abs(tau)) @ self.initial
        psi = state[: self.n**2].reshape(self.n, self.n, order="F")
        return psi if tau >= 0 else psi.T


def _vec_generator(sys):
    n = sys.n
    eye = np.eye(n)
    a0t, a1t = sys.a0.T, sys.a1.T
    return np.block([
        [np.kron(a0t, eye), np.kron(a1t, eye)],
        [-np.kron(eye, a1t), -np.kron(eye, a0t)],
    ])


def delay_lyapunov_matrix(sys, w_total) -> DelayLyapunovMatrix:
    """Solve Psi' = Psi A0 + Psi(. - h) A1 with symmetry and the algebraic
    condition Psi'(0) + Psi'(0)^T = -W as a boundary-value problem.

    Args:
        sys: exponentially stable TdsSystem
        w_total: symmetric n x n right-hand side W

    Returns:
        DelayLyapunovMatrix
    """
    n = sys.n
    w_total = np.atleast_2d(np.asarray(w_total, dtype=float))
    if w_total.shape != (n, n):
        raise DimensionMismatchError(f"W must be {n}x{n}, got {w_total.shape}")
    size = n * n
    eye_n, eye_sq = np.eye(n), np.eye(size)
    generator = _vec_generator(sys)
    flow = linalg.expm(generator * sys.h)
    e11, e12 = flow[:size, :size], flow[:size, size:]
    e21, e22 = flow[size:, :size], flow[size:, size:]

    # y(0) = z(h), then the algebraic condition with Psi(h) = e11 y0 + e12 z0
    coupling = np.kron(eye_n, sys.a1.T)
    lhs = np.block([
        [eye_sq - e21, -e22],
        [np.kron(sys.a0.T, eye_n) + np.kron(eye_n, sys.a0.T) + coupling @ e11,
         np.kron(sys.a1.T, eye_n) + coupling @ e12],
    ])
    rhs = np.concatenate([np.zeros(size), -w_total.reshape(-1, order="F")])
    initial = linalg.solve(lhs, rhs)
    _LOGGER.debug("Delay Lyapunov boundary system solved, cond %.3e", np.linalg.cond(lhs))
    return DelayLyapunovMatrix(sys.h, n, generator, initial)


def complete_type_gamma(sys, w0, w1, w2, order=DEFAULT_SPECTRUM_ORDER):
    """Norm bound of the complete-type functional built with W0, W1, W2.

    Returns:
        tuple: (gamma, Psi(0))
    """
    stable, report = spectrum.is_exponentially_stable(sys, order)
    if not stable:
        raise UnstableNominalError(
            f"nominal system is not exponentially stable (rightmost real part "
            f"{report.rightmost_real_part:.6g})"
        )
    w0, w1, w2 = (np.atleast_2d(np.asarray(w, dtype=float)) for w in (w0, w1, w2))
    psi0 = delay_lyapunov_matrix(sys, w0 + w1 + sys.h * w2).at_zero
    a1_norm = spectral_norm(sys.a1)
    ratios = [
        np.linalg.eigvalsh(w0)[0] / (2.0 + sys.h * a1_norm),
        np.linalg.eigvalsh(w1)[0] / (1.0 + sys.h * a1_norm),
        np.linalg.eigvalsh(w2)[0] / a1_norm if a1_norm > 0 else np.inf,
    ]
    gamma = float(min(ratios) / np.linalg.eigvalsh(psi0)[-1])
    _LOGGER.info("Complete-type gamma %.6g, lambda_max(Psi(0)) %.6g", gamma, np.linalg.eigvalsh(psi0)[-1])
    return gamma, psi0
