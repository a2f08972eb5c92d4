"""Frequency sweeps for sector bounds and the W(i omega) existence test."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import logging
import math

import numpy as np
from scipy import optimize

from . import spectrum
from .const import (
    CLEARANCE_TOL,
    DEFAULT_GRID_POINTS,
    DEFAULT_MAX_REFINE_ITERS,
    DEFAULT_REFINE_TOL,
    DEFAULT_SPECTRUM_ORDER,
    MAX_REFINE_TOL,
    MAX_REFINE_STARTS,
    MAX_TAIL_STRETCH,
    MIN_GRID_POINTS,
    OMEGA_MAX_FACTOR,
    STABILITY_THRESHOLD,
)
from .errors import (
    ConfigError,
    DegenerateBoundError,
    DimensionMismatchError,
    InvalidSectorOrderError,
    NotBlockDiagonalError,
    SingularCharMatrixError,
    TailBoundInvalidError,
)
from .sysmodel import (
    SectorKind,
    q_pair,
    sector_preset,
    shifted_system,
    spectral_norm,
    transfer_g_batch,
    transformation_one,
    w_matrix_batch,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepConfig:
    """Grid and refinement settings of a frequency sweep."""

    omega_max: float
    grid_points: int = DEFAULT_GRID_POINTS
    refine_tol: float = DEFAULT_REFINE_TOL
    max_refine_iters: int = DEFAULT_MAX_REFINE_ITERS

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ConfigError("sweep.omega_max", "must be > 0")
        if self.grid_points < MIN_GRID_POINTS:
            raise ConfigError("sweep.grid_points", f"must be >= {MIN_GRID_POINTS}")
        if not 0 < self.refine_tol <= MAX_REFINE_TOL:
            raise ConfigError("sweep.refine_tol", f"must be in (0, {MAX_REFINE_TOL}]")
        if self.max_refine_iters < 1:
            raise ConfigError("sweep.max_refine_iters", "must be >= 1")

    @classmethod
    def default(cls, sys, **overrides):
        """Defaults scaled to the system: features repeat every 2 pi / h."""
        if overrides.get("omega_max") is None:
            overrides["omega_max"] = OMEGA_MAX_FACTOR * (
                sys.norm_sum + 1.0 + 2.0 * math.pi / sys.h
            )
        return cls(**{key: value for key, value in overrides.items() if value is not None})

    def grid(self, upper=None) -> np.ndarray:
        base = np.linspace(0.0, self.omega_max, self.grid_points)
        if upper is None or upper <= self.omega_max:
            return base
        extra = np.linspace(self.omega_max, upper, max(self.grid_points // 4, MIN_GRID_POINTS))
        return np.concatenate([base, extra[1:]])


class CertificateKind(str, Enum):
    GAMMA_MAX = "GammaMax"
    RHO_MIN = "RhoMin"
    K1_MIN = "K1Min"
    W_DEFINITE = "WDefinite"


class Outcome(str, Enum):
    COMPUTED = "computed"
    CERTIFIED = "certified"
    DENIED = "denied"
    INCONCLUSIVE = "inconclusive"
    ASSUMPTIONS_FAILED = "assumptions_failed"


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class Certificate:
    """Result of one sweep.

    For WDefinite, margin is the refined minimum of lambda_min(W(i omega)).
    For the bound kinds, margin is the gap between the refined extremum and
    the analytic envelope at tail_cutoff; a non-negative gap means nothing
    beyond the cutoff can exceed the reported extremum.
    """

    kind: CertificateKind
    value: float
    critical_omega: float
    margin: float
    assumptions: tuple = ()
    tail_cutoff: float = math.inf
    outcome: Outcome = Outcome.COMPUTED
    flags: tuple = field(default_factory=tuple)

    @property
    def assumptions_passed(self) -> bool:
        return all(check.passed for check in self.assumptions)

    def as_dict(self):
        return {
            "kind": self.kind.value,
            "value": self.value,
            "critical_omega": self.critical_omega,
            "margin": self.margin,
            "assumptions": [check.as_dict() for check in self.assumptions],
            "tail_cutoff": self.tail_cutoff,
            "outcome": self.outcome.value,
            "flags": list(self.flags),
        }


def refine_extremum(func, omegas, values, cfg, maximize=True):
    """Refine the best local extrema of a sampled curve.

    Args:
        func: vectorized map from a frequency array to values
        omegas: the coarse grid
        values: func(omegas)
        cfg: SweepConfig with the refinement tolerance
        maximize: look for maxima (True) or minima (False)

    Returns:
        tuple: (extreme value, frequency where it is attained)
    """
    sign = 1.0 if maximize else -1.0
    signed = sign * np.asarray(values, dtype=float)
    left = np.concatenate([[-np.inf], signed[:-1]])
    right = np.concatenate([signed[1:], [-np.inf]])
    starts = np.flatnonzero((signed >= left) & (signed >= right))
    starts = starts[np.argsort(signed[starts])[::-1][:MAX_REFINE_STARTS]]

    best = int(np.argmax(signed))
    best_value, best_omega = float(signed[best]), float(omegas[best])
    last = len(omegas) - 1
    for i in starts:
        lo, hi = float(omegas[max(i - 1, 0)]), float(omegas[min(i + 1, last)])
        if not hi > lo:
            continue
        result = optimize.minimize_scalar(
            lambda w: -sign * float(func(np.array([w]))[0]),
            bounds=(lo, hi),
            method="bounded",
            options={
                "xatol": cfg.refine_tol * max(1.0, abs(float(omegas[i]))),
                "maxiter": cfg.max_refine_iters,
            },
        )
        if -result.fun > best_value:
            best_value, best_omega = float(-result.fun), float(result.x)
    _LOGGER.debug("Refined %d extrema, best %.12g at omega=%.6g", len(starts), sign * best_value, best_omega)
    return sign * best_value, best_omega


def gain_envelope(sys, ps, omega) -> float:
    """Upper bound on ||G(i nu)|| valid for all |nu| >= omega."""
    norm_sum = sys.norm_sum
    if not omega > norm_sum:
        raise TailBoundInvalidError(omega, norm_sum)
    return spectral_norm(ps.c_stack) * spectral_norm(ps.b) / (omega - norm_sum)


def tail_bound(sys, ps, sec, omega) -> float:
    """Lower bound on lambda_min(W(i nu)) for all |nu| >= omega."""
    g = gain_envelope(sys, ps, omega)
    lam = float(np.linalg.eigvalsh(-sec.pi_aa)[0])
    return lam - 2.0 * spectral_norm(sec.pi_za) * g - spectral_norm(sec.pi_zz) * g**2


def _norm_curve(sys, ps):
    def curve(omegas):
        g = transfer_g_batch(sys, ps, 1j * omegas)
        return np.linalg.svd(g, compute_uv=False)[:, 0]

    return curve


def _hermitian_part_curve(sys, ps, sign):
    """lambda_max(He(sign * G(i omega)))."""

    def curve(omegas):
        g = sign * transfer_g_batch(sys, ps, 1j * omegas)
        he = 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))
        return np.linalg.eigvalsh(he)[:, -1]

    return curve


def _sweep_max(sys, ps, curve, cfg):
    """Max of a curve bounded by ||G|| in the tail, stretching the grid if the
    envelope at omega_max does not fall below the peak.

    Returns (peak, omega_star, cutoff, envelope, flags).
    """
    cutoff = cfg.omega_max
    envelope = gain_envelope(sys, ps, cutoff)
    omegas = cfg.grid()
    peak, omega_star = refine_extremum(curve, omegas, curve(omegas), cfg)
    flags = ()
    if envelope > peak and peak > 0:
        needed = sys.norm_sum + spectral_norm(ps.c_stack) * spectral_norm(ps.b) / peak
        if needed <= MAX_TAIL_STRETCH * cfg.omega_max:
            cutoff = needed * (1.0 + cfg.refine_tol)
            omegas = cfg.grid(cutoff)
            peak, omega_star = refine_extremum(curve, omegas, curve(omegas), cfg)
            envelope = gain_envelope(sys, ps, cutoff)
        else:
            _LOGGER.warning("Tail envelope %.3g exceeds the swept peak %.3g", envelope, peak)
            flags = ("tail_envelope_exceeds_peak",)
    return peak, omega_star, cutoff, envelope, flags


def hinf_norm(sys, ps, cfg=None):
    """sup over omega of ||G(i omega)||_2 and its argmax.

    Returns:
        tuple: (norm, omega_star)
    """
    cfg = cfg or SweepConfig.default(sys)
    peak, omega_star, _, _, _ = _sweep_max(sys, ps, _norm_curve(sys, ps), cfg)
    return peak, omega_star


def _stability_check(name, sys, order):
    stable, report = spectrum.is_exponentially_stable(sys, order)
    return AssumptionCheck(name, stable, f"rightmost real part {report.rightmost_real_part:.6g}")


def _clearance_check(name, sys, cfg):
    clearance = spectrum.imag_axis_clearance(sys, cfg)
    passed = clearance > CLEARANCE_TOL * (1.0 + sys.norm_sum)
    return AssumptionCheck(name, passed, f"min sigma_min(Delta(i omega)) {clearance:.6g}")


def _outcome(assumptions):
    if all(check.passed for check in assumptions):
        return Outcome.COMPUTED
    return Outcome.ASSUMPTIONS_FAILED


def _axis_root_certificate(kind, omega, assumptions, cfg):
    return Certificate(
        kind, 0.0, omega, -math.inf, assumptions, cfg.omega_max,
        Outcome.ASSUMPTIONS_FAILED, ("imaginary_axis_root",),
    )


def gamma_max(sys, ps, cfg=None, order=DEFAULT_SPECTRUM_ORDER) -> Certificate:
    """Largest admissible linear norm bound, 1 / ||G||_inf."""
    cfg = cfg or SweepConfig.default(sys)
    stable, roots = spectrum.is_exponentially_stable(sys, order)
    assumptions = (
        AssumptionCheck(
            "nominal_exponentially_stable", stable, f"rightmost real part {roots.rightmost_real_part:.6g}"
        ),
    )
    if abs(roots.rightmost_real_part) <= -STABILITY_THRESHOLD:
        _LOGGER.warning("Nominal system has a root on the imaginary axis: %s", roots.roots[0])
        return _axis_root_certificate(CertificateKind.GAMMA_MAX, abs(roots.roots[0].imag), assumptions, cfg)
    try:
        peak, omega_star, cutoff, envelope, flags = _sweep_max(sys, ps, _norm_curve(sys, ps), cfg)
    except SingularCharMatrixError as err:
        _LOGGER.warning("Nominal system has a root on the imaginary axis: %s", err)
        return _axis_root_certificate(CertificateKind.GAMMA_MAX, abs(err.s.imag), assumptions, cfg)
    except TailBoundInvalidError as err:
        _LOGGER.error("gamma_max sweep rejected: %s", err)
        return Certificate(
            CertificateKind.GAMMA_MAX, math.nan, math.nan, math.nan, assumptions,
            cfg.omega_max, Outcome.ASSUMPTIONS_FAILED, ("tail_bound_invalid",),
        )
    value = 1.0 / peak if peak > 0 else math.inf
    _LOGGER.info("gamma_max = %.6g (||G||_inf = %.6g at omega = %.6g)", value, peak, omega_star)
    return Certificate(
        CertificateKind.GAMMA_MAX, value, omega_star, peak - envelope, assumptions,
        cutoff, _outcome(assumptions), flags,
    )


def rho_min(sys, ps, cfg=None, order=DEFAULT_SPECTRUM_ORDER) -> Certificate:
    """Shortage of input passivity: sup over omega of lambda_max(He(-G(i omega)))."""
    if ps.p != ps.m:
        raise DimensionMismatchError(f"rho_min needs p = m, got p={ps.p}, m={ps.m}")
    cfg = cfg or SweepConfig.default(sys)
    clearance = _clearance_check("nominal_no_imaginary_roots", sys, cfg)
    if not clearance.passed:
        return Certificate(
            CertificateKind.RHO_MIN, math.nan, math.nan, math.nan, (clearance,),
            cfg.omega_max, Outcome.ASSUMPTIONS_FAILED,
        )
    curve = _hermitian_part_curve(sys, ps, -1.0)
    peak, omega_star, cutoff, envelope, flags = _sweep_max(sys, ps, curve, cfg)
    if peak < 0:
        # He(-G) -> 0 as omega -> inf, so the sup is 0 and only approached in the limit
        value, omega_star = 0.0, cutoff
        flags = flags + ("attained_at_infinity",)
    else:
        value = peak

    rho_check = value * (1.0 + 10.0 * cfg.refine_tol) if value > 0 else 1.0
    sec = sector_preset(SectorKind.II_A, {"rho": rho_check}, ps.p, ps.m)
    trafo = transformation_one(sys, ps, sec)
    assumptions = (
        _stability_check("transformed_exponentially_stable", trafo.system, order),
        clearance,
    )
    _LOGGER.info("rho_min = %.6g at omega = %.6g", value, omega_star)
    return Certificate(
        CertificateKind.RHO_MIN, value, omega_star, peak - envelope, assumptions,
        cutoff, _outcome(assumptions), flags,
    )


def k1_min(sys, ps, k2, cfg=None, order=DEFAULT_SPECTRUM_ORDER) -> Certificate:
    """Smallest admissible lower sector bound for a fixed upper bound k2.

    Raises DegenerateBoundError (holding a -inf certificate) when every k1 < k2
    is admissible.
    """
    if ps.p != ps.m:
        raise DimensionMismatchError(f"k1_min needs p = m, got p={ps.p}, m={ps.m}")
    cfg = cfg or SweepConfig.default(sys)
    k2 = float(k2)
    sys_ii = shifted_system(sys, ps, k2)
    clearance = _clearance_check("shifted_no_imaginary_roots", sys_ii, cfg)
    if not clearance.passed:
        return Certificate(
            CertificateKind.K1_MIN, math.nan, math.nan, math.nan, (clearance,),
            cfg.omega_max, Outcome.ASSUMPTIONS_FAILED,
        )
    curve = _hermitian_part_curve(sys_ii, ps, 1.0)
    peak, omega_star, cutoff, envelope, flags = _sweep_max(sys_ii, ps, curve, cfg)
    if peak <= 0:
        cert = Certificate(
            CertificateKind.K1_MIN, -math.inf, omega_star, peak - envelope, (clearance,),
            cutoff, Outcome.COMPUTED, flags + ("degenerate_bound",),
        )
        raise DegenerateBoundError(cert)

    value = k2 - 1.0 / peak
    k1_check = value + 10.0 * cfg.refine_tol * max(1.0, abs(value))
    if k1_check >= k2:
        k1_check = 0.5 * (value + k2)
    sec = sector_preset(SectorKind.III_A, {"k1": k1_check, "k2": k2}, ps.p, ps.m)
    trafo = transformation_one(sys, ps, sec)
    assumptions = (
        _stability_check("midpoint_exponentially_stable", trafo.system, order),
        clearance,
    )
    _LOGGER.info("k1_min = %.6g for k2 = %.6g (omega = %.6g)", value, k2, omega_star)
    return Certificate(
        CertificateKind.K1_MIN, value, omega_star, peak - envelope, assumptions,
        cutoff, _outcome(assumptions), flags,
    )


def _lambda_min_curve(sys, ps, sec):
    def curve(omegas):
        return np.linalg.eigvalsh(w_matrix_batch(sys, ps, sec, omegas))[:, 0]

    return curve


def _required_cutoff(sys, ps, sec):
    """Frequency beyond which the tail bound stays above half of lambda_min(-Pi_aa)."""
    lam = float(np.linalg.eigvalsh(-sec.pi_aa)[0])
    a = spectral_norm(sec.pi_za)
    z = spectral_norm(sec.pi_zz)
    if z > 0:
        g_star = (-a + math.sqrt(a * a + 0.5 * z * lam)) / z
    elif a > 0:
        g_star = lam / (4.0 * a)
    else:
        return sys.norm_sum * (1.0 + 1e-9) + 1e-9
    gain = spectral_norm(ps.c_stack) * spectral_norm(ps.b)
    return sys.norm_sum + gain / g_star


def certify_w(sys, ps, sec, cfg=None, order=DEFAULT_SPECTRUM_ORDER) -> Certificate:
    """Existence test: W(i omega) > 0 for all omega.

    Positive margin, a valid tail bound and passing assumptions certify that an
    LK functional of robust type exists; a negative margin denies it; a margin
    inside the refine_tol band is inconclusive.
    """
    cfg = cfg or SweepConfig.default(sys)
    sec.check_structure(ps)
    trafo = transformation_one(sys, ps, sec)
    try:
        q_pair(ps, trafo.sector)
        split = AssumptionCheck("pi_zz_block_diagonal", True)
    except NotBlockDiagonalError as err:
        split = AssumptionCheck("pi_zz_block_diagonal", False, str(err))
    assumptions = (
        _stability_check("transformed_exponentially_stable", trafo.system, order),
        _clearance_check("nominal_no_imaginary_roots", sys, cfg),
        split,
    )

    cutoff = max(cfg.omega_max, _required_cutoff(sys, ps, sec))
    flags = ()
    if cutoff > MAX_TAIL_STRETCH * cfg.omega_max:
        flags = ("tail_bound_invalid",)
        cutoff = MAX_TAIL_STRETCH * cfg.omega_max
    try:
        curve = _lambda_min_curve(sys, ps, sec)
        omegas = cfg.grid(cutoff)
        margin, omega_star = refine_extremum(curve, omegas, curve(omegas), cfg, maximize=False)
        tail = tail_bound(sys, ps, sec, cutoff)
    except (SingularCharMatrixError, TailBoundInvalidError) as err:
        _LOGGER.warning("W sweep failed: %s", err)
        return Certificate(
            CertificateKind.W_DEFINITE, math.nan, math.nan, math.nan, assumptions,
            cutoff, Outcome.ASSUMPTIONS_FAILED, flags + ("sweep_failed",),
        )
    if not tail > 0:
        flags = flags + ("tail_bound_invalid",)

    band = cfg.refine_tol * max(1.0, spectral_norm(sec.pi_aa))
    if not all(check.passed for check in assumptions):
        outcome = Outcome.ASSUMPTIONS_FAILED
    elif abs(margin) <= band:
        outcome = Outcome.INCONCLUSIVE
    elif margin < 0:
        outcome = Outcome.DENIED
    elif "tail_bound_invalid" in flags:
        outcome = Outcome.INCONCLUSIVE
    else:
        outcome = Outcome.CERTIFIED
    _LOGGER.info("W margin %.6g at omega = %.6g: %s", margin, omega_star, outcome.value)
    return Certificate(
        CertificateKind.W_DEFINITE, margin, omega_star, margin, assumptions,
        cutoff, outcome, flags,
    )


def sweep_table(sys, ps, sec, cfg=None):
    """Per-frequency rows (omega, lambda_min(W), ||G||_2) for CSV export."""
    cfg = cfg or SweepConfig.default(sys)
    omegas = cfg.grid()
    g_norm = _norm_curve(sys, ps)(omegas)
    if sec is None:
        lam = np.full_like(omegas, np.nan)
    else:
        lam = _lambda_min_curve(sys, ps, sec)(omegas)
    return {"omega": omegas, "lambda_min_w": lam, "g_norm": g_norm}


def nyquist_disc_check(sys, ps, k1, k2, cfg=None) -> bool:
    """Circle criterion for p = m = 1: G(i omega) stays inside the disc through
    -1/k1, -1/k2 when k1 < 0 < k2, and outside it when k1 k2 > 0."""
    if ps.p != 1 or ps.m != 1:
        raise DimensionMismatchError("the Nyquist disc check needs p = m = 1")
    if not k2 > k1:
        raise InvalidSectorOrderError(k1, k2)
    if k1 * k2 == 0:
        raise ValueError("sector bounds must be nonzero for the disc form")
    cfg = cfg or SweepConfig.default(sys)
    center = -0.5 * (1.0 / k1 + 1.0 / k2)
    radius = 0.5 * abs(1.0 / k1 - 1.0 / k2)
    inside = 1.0 if k1 * k2 < 0 else -1.0

    def slack(omegas):
        g = transfer_g_batch(sys, ps, 1j * omegas)[:, 0, 0]
        return inside * (radius**2 - np.abs(g - center) ** 2)

    omegas = cfg.grid(max(cfg.omega_max, _required_cutoff(
        sys, ps, sector_preset(SectorKind.III_C, {"k1": k1, "k2": k2}, 1, 1))))
    worst, _ = refine_extremum(slack, omegas, slack(omegas), cfg, maximize=False)
    return worst > 0
