"""Characteristic roots of the nominal system."""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
from scipy import linalg

from .const import (
    DEFAULT_ROOT_COUNT,
    DEFAULT_SPECTRUM_ORDER,
    MIN_SPECTRUM_ORDER,
    NEWTON_POLISH_ACCEPT,
    NEWTON_POLISH_MAX_ITERS,
    NEWTON_POLISH_TOL,
    STABILITY_THRESHOLD,
)
from .errors import NewtonDivergenceError
from .lkbuild import Discretization, discretize_generator
from .sysmodel import char_matrices, char_matrix

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class RootReport:
    roots: tuple
    rightmost_real_part: float
    imag_axis_clearance: float
    discretization_order: int
    polished: tuple = ()

    def as_dict(self):
        return {
            "roots": [[root.real, root.imag] for root in self.roots],
            "rightmost_real_part": self.rightmost_real_part,
            "imag_axis_clearance": self.imag_axis_clearance,
            "discretization_order": self.discretization_order,
            "polished": list(self.polished),
        }


def newton_polish(sys, s0):
    """Newton iteration on det Delta(s) = 0 through the smallest singular triple.

    The update s <- s - sigma_min / (u^H Delta'(s) v) uses the left and right
    singular vectors u, v of the smallest singular value.
    """
    s = complex(s0)
    eye = np.eye(sys.n)
    residual = np.inf
    for _ in range(NEWTON_POLISH_MAX_ITERS):
        u_mat, svals, vh_mat = linalg.svd(char_matrix(sys, s))
        residual = svals[-1]
        if residual <= NEWTON_POLISH_TOL * max(1.0, svals[0]):
            return s
        u, v = u_mat[:, -1], np.conj(vh_mat[-1])
        slope = np.conj(u) @ (eye + sys.h * np.exp(-s * sys.h) * sys.a1) @ v
        if slope == 0:
            break
        s = s - residual / slope
    if residual <= NEWTON_POLISH_ACCEPT:
        return s
    raise NewtonDivergenceError(s, residual)


def rightmost_roots(sys, order=DEFAULT_SPECTRUM_ORDER, count=DEFAULT_ROOT_COUNT) -> RootReport:
    """Rightmost characteristic roots from a Chebyshev discretization of the generator."""
    if order < MIN_SPECTRUM_ORDER:
        raise ValueError(f"order must be >= {MIN_SPECTRUM_ORDER}, got {order}")
    disc = Discretization.chebyshev(sys.h, order)
    eigenvalues = linalg.eigvals(discretize_generator(sys, disc))
    eigenvalues = eigenvalues[np.argsort(-eigenvalues.real)][:count]

    roots, polished = [], []
    for guess in eigenvalues:
        try:
            root, ok = newton_polish(sys, guess), True
        except NewtonDivergenceError as err:
            _LOGGER.warning("%s; keeping the unpolished eigenvalue", err)
            root, ok = complex(guess), False
        if abs(root.imag) < 1e-12 * max(1.0, abs(root)):
            root = complex(root.real, 0.0)
        if any(abs(root - other) <= 1e-8 * (1.0 + abs(root)) for other in roots):
            continue
        roots.append(root)
        polished.append(ok)

    order_idx = sorted(range(len(roots)), key=lambda i: (-roots[i].real, -roots[i].imag))
    roots = tuple(roots[i] for i in order_idx)
    polished = tuple(polished[i] for i in order_idx)
    return RootReport(
        roots=roots,
        rightmost_real_part=float(roots[0].real),
        imag_axis_clearance=imag_axis_clearance(sys),
        discretization_order=order,
        polished=polished,
    )


def is_exponentially_stable(sys, order=DEFAULT_SPECTRUM_ORDER):
    """Returns (stable, RootReport); roots within 1e-8 of the axis are not stable."""
    report = rightmost_roots(sys, order)
    stable = report.rightmost_real_part < STABILITY_THRESHOLD
    _LOGGER.debug("Rightmost real part %.6g, stable=%s", report.rightmost_real_part, stable)
    return stable, report


def imag_axis_clearance(sys, cfg=None) -> float:
    """min over omega of sigma_min(Delta(i omega)), tail included."""
    from .freqbounds import SweepConfig, refine_extremum

    cfg = cfg or SweepConfig.default(sys)
    cutoff = max(cfg.omega_max, 2.0 * sys.norm_sum + 1.0)

    def curve(omegas):
        return np.linalg.svd(char_matrices(sys, 1j * omegas), compute_uv=False)[:, -1]

    omegas = cfg.grid(cutoff)
    low, _ = refine_extremum(curve, omegas, curve(omegas), cfg, maximize=False)
    # sigma_min(Delta(i nu)) >= nu - ||A0|| - ||A1|| beyond the cutoff
    return float(min(low, cutoff - sys.norm_sum))
