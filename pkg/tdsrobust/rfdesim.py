"""Simulation of the perturbed delay equation and trajectory-level checks of the functional."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
import logging
import math
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .const import BLOW_UP_NORM, SETTLE_DELAYS
from .errors import BlowUpError, ConfigError, NonzeroAtOriginError
from .lkbuild import (
    ChebyshevSegment,
    evaluate_V,
    evaluate_v,
    nominal_derivative,
    random_segment,
)
from .sysmodel import sector_value

_LOGGER = logging.getLogger(__name__)


class NonlinearityKind(str, Enum):
    LINEAR_GAIN = "LinearGain"
    SATURATION = "Saturation"
    CUBIC_DIAGONAL = "CubicDiagonal"
    TIME_VARYING_GAIN = "TimeVaryingGain"
    CUSTOM = "Custom"


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """The map a(t, zeta) closing the loop; use the named constructors."""

    kind: NonlinearityKind
    descriptor: str
    func: Callable
    p: int
    m: int

    def __post_init__(self):
        value = np.asarray(self(np.zeros(self.p)), dtype=float)
        if value.shape != (self.m,):
            raise ConfigError("simulation.nonlinearity", f"a(zeta) must have {self.m} entries, got shape {value.shape}")
        if np.linalg.norm(value) > 1e-12:
            raise NonzeroAtOriginError(self.descriptor, value.tolist())

    def __call__(self, zeta, t=0.0):
        return np.asarray(self.func(t, np.asarray(zeta, dtype=float)), dtype=float)

    @classmethod
    def linear_gain(cls, gain):
        gain = np.atleast_2d(np.asarray(gain, dtype=float))
        return cls(
            NonlinearityKind.LINEAR_GAIN,
            f"LinearGain(||G||={np.linalg.norm(gain, 2):.6g})",
            lambda t, zeta: gain @ zeta,
            gain.shape[1],
            gain.shape[0],
        )

    @classmethod
    def saturation(cls, slope, limit, mixing=None, p=None):
        """a = slope * clip(M zeta, -limit, limit); lies in the sector [0, slope] of M zeta."""
        if mixing is None:
            mixing = np.eye(p if p is not None else 1)
        mixing = np.atleast_2d(np.asarray(mixing, dtype=float))
        slope, limit = float(slope), float(limit)
        return cls(
            NonlinearityKind.SATURATION,
            f"Saturation(slope={slope:.6g}, limit={limit:.6g})",
            lambda t, zeta: slope * np.clip(mixing @ zeta, -limit, limit),
            mixing.shape[1],
            mixing.shape[0],
        )

    @classmethod
    def cubic_diagonal(cls, signs):
        signs = np.atleast_1d(np.asarray(signs, dtype=float))
        return cls(
            NonlinearityKind.CUBIC_DIAGONAL,
            f"CubicDiagonal(signs={signs.tolist()})",
            lambda t, zeta: signs * zeta**3,
            len(signs),
            len(signs),
        )

    @classmethod
    def time_varying_gain(cls, gain_at, descriptor="TimeVaryingGain"):
        """a(t, zeta) = gain_at(t) zeta."""
        shape = np.atleast_2d(np.asarray(gain_at(0.0), dtype=float)).shape
        return cls(
            NonlinearityKind.TIME_VARYING_GAIN,
            descriptor,
            lambda t, zeta: np.atleast_2d(np.asarray(gain_at(t), dtype=float)) @ zeta,
            shape[1],
            shape[0],
        )

    @classmethod
    def custom(cls, callback, p, m, descriptor="Custom"):
        """callback(t, zeta) -> a."""
        return cls(NonlinearityKind.CUSTOM, descriptor, callback, p, m)


def _history(phi0, n):
    if isinstance(phi0, ChebyshevSegment):
        return phi0
    if not callable(phi0):
        constant = np.broadcast_to(np.asarray(phi0, dtype=float), (n,))

        def history(theta):
            theta = np.asarray(theta, dtype=float)
            return np.broadcast_to(constant, theta.shape + (n,)).copy()

        return history

    def history(theta):
        theta = np.asarray(theta, dtype=float)
        values = np.array(
            [np.broadcast_to(np.asarray(phi0(t), dtype=float), (n,)) for t in theta.ravel()]
        )
        return values.reshape(theta.shape + (n,))

    return history


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution on [-h, t_end]: the initial function followed by RK4 steps with
    cubic Hermite dense output."""

    step: float
    t_end: float
    h: float
    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    history: Callable

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @cached_property
    def _spline(self):
        return CubicHermiteSpline(self.times, self.states, self.derivatives, axis=0)

    @cached_property
    def _spline_derivative(self):
        return self._spline.derivative()

    def _query(self, t, future, past):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty((flat.size, self.n))
        before = flat < 0
        if np.any(before):
            out[before] = past(flat[before])
        if np.any(~before):
            out[~before] = future(flat[~before])
        return out.reshape(t.shape + (self.n,))

    def state_at(self, t):
        return self._query(t, self._spline, self.history)

    def derivative_at(self, t):
        return self._query(t, self._spline_derivative, self._history_derivative)

    def _history_derivative(self, theta):
        if hasattr(self.history, "derivative"):
            return self.history.derivative(theta)
        eps = 1e-6 * self.h
        return (self.history(theta + eps) - self.history(theta - eps)) / (2.0 * eps)

    def segment(self, t, nodes):
        """x_t sampled at the offsets nodes (values in [-h, 0])."""
        return self.state_at(t + np.asarray(nodes, dtype=float))


def integrate(sys, ps, nl, phi0, step, t_end) -> Trajectory:
    """Classical RK4 on a uniform grid, delayed values from the dense output.

    The grid spacing is t_end / ceil(t_end / step), so t_end is always hit.
    """
    if not 0 < step <= sys.h / 4.0:
        raise ConfigError("simulation.step", f"must be in (0, h/4] = (0, {sys.h / 4.0:.6g}]")
    n, h = sys.n, sys.h
    count = max(1, math.ceil(t_end / step - 1e-9))
    dt = t_end / count
    history = _history(phi0, n)

    times = dt * np.arange(count + 1)
    states = np.zeros((count + 1, n))
    derivatives = np.zeros((count + 1, n))
    pieces = []

    def delayed(tau):
        if tau <= 0:
            return history(np.array(tau))
        j = min(int(tau / dt), len(pieces) - 1)
        return pieces[j](tau)

    def rhs(t, x):
        x_delayed = delayed(t - h)
        return sys.f(x, x_delayed) - ps.b @ nl(ps.output(x, x_delayed), t)

    states[0] = history(np.array(0.0))
    for i in range(count):
        t, x = times[i], states[i]
        k1 = rhs(t, x)
        derivatives[i] = k1
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > BLOW_UP_NORM:
            partial = Trajectory(
                step=dt, t_end=t, h=h, times=times[: i + 1], states=states[: i + 1],
                derivatives=derivatives[: i + 1], history=history,
            )
            raise BlowUpError(float(times[i + 1]), partial)
        states[i + 1] = x_next
        derivatives[i + 1] = rhs(times[i + 1], x_next)
        pieces.append(
            CubicHermiteSpline(times[i : i + 2], states[i : i + 2], derivatives[i : i + 2], axis=0)
        )
    _LOGGER.debug("Integrated %d RK4 steps of size %.3g, |x(t_end)| = %.3e", count, dt, np.linalg.norm(states[-1]))
    return Trajectory(
        step=dt, t_end=float(t_end), h=h, times=times, states=states,
        derivatives=derivatives, history=history,
    )


def random_initial_function(rng, n, h, radius) -> ChebyshevSegment:
    """Smooth random initial function with sup norm radius."""
    return random_segment(rng, n, h, radius=radius)


def check_times(traj, count=None):
    """Sample times for the trajectory checks, after the initial kink has smoothed out."""
    start = min(SETTLE_DELAYS * traj.h, 0.5 * traj.t_end)
    stop = traj.t_end - 2.0 * traj.step
    count = count or max(2, int(round((stop - start) / traj.h)) * 4)
    return np.linspace(start, stop, count)


def functional_along(lk, traj, times):
    """(t, V(x_t)) for each t."""
    return [(float(t), evaluate_V(lk, traj.segment(t, lk.disc.nodes))) for t in times]


def fd_slope(lk, traj, t, spacing=None):
    """Richardson-extrapolated central difference of V(x_t)."""
    delta = spacing or traj.step

    def central(d):
        ahead = evaluate_V(lk, traj.segment(t + d, lk.disc.nodes))
        behind = evaluate_V(lk, traj.segment(t - d, lk.disc.nodes))
        return (ahead - behind) / (2.0 * d)

    return (4.0 * central(0.5 * delta) - central(delta)) / 3.0


def monotonicity_violation(values):
    """Largest relative increase between consecutive V samples; 0 when nonincreasing."""
    worst = 0.0
    for (_, previous), (_, current) in zip(values, values[1:]):
        worst = max(worst, (current - previous) / (1.0 + abs(previous)))
    return worst


def perturbation_derivative_check(lk, sys, ps, nl, traj, times) -> float:
    """Max over times of |FD slope - (D_f V + 2 v^T g)| / (1 + |FD slope|)."""
    nodes = lk.disc.nodes
    worst = 0.0
    for t in times:
        phi = traj.segment(t, nodes)
        dphi = traj.derivative_at(t + nodes)
        g = -ps.b @ nl(ps.output(phi[0], phi[-1]), t)
        predicted = nominal_derivative(lk, sys, phi, dphi) + 2.0 * evaluate_v(lk, phi) @ g
        slope = fd_slope(lk, traj, t)
        mismatch = abs(slope - predicted) / (1.0 + abs(slope))
        _LOGGER.debug("t=%.4g: FD slope %.6g, predicted %.6g", t, slope, predicted)
        worst = max(worst, mismatch)
    return worst


def slope_bound_check(lk, traj, times, ps, k3) -> float:
    """Largest excess of the FD slope over -k3 ||C x_t||^2, relative to 1 + |slope|."""
    nodes = lk.disc.nodes
    worst = 0.0
    for t in times:
        phi = traj.segment(t, nodes)
        zeta = ps.output(phi[0], phi[-1])
        slope = fd_slope(lk, traj, t)
        worst = max(worst, (slope + k3 * float(zeta @ zeta)) / (1.0 + abs(slope)))
    return worst


def sector_membership(nl, ps, sec, samples, radius, rng=None, offset=0.0, t=0.0):
    """Sample zeta in the radius ball (zeta = 0 included) and test w(zeta, a(zeta)) >= offset ||zeta||^2.

    Returns:
        tuple: (fraction inside, worst margin)
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    p = ps.p
    directions = rng.standard_normal((samples, p))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=samples) ** (1.0 / p)
    zetas = directions * radii[:, None]
    zetas[0] = 0.0
    margins = np.array(
        [sector_value(sec, zeta, nl(zeta, t)) - offset * float(zeta @ zeta) for zeta in zetas]
    )
    inside = margins >= -1e-12 * (1.0 + np.abs(margins))
    return float(np.mean(inside)), float(np.min(margins))


def trajectory_table(traj, lk=None, times=None):
    """Columns t, x_1..x_n and, with a functional, V and its FD slope."""
    times = traj.times if times is None else np.asarray(times, dtype=float)
    columns = {"t": times}
    states = traj.state_at(times)
    for i in range(traj.n):
        columns[f"x{i + 1}"] = states[:, i]
    if lk is not None:
        columns["V"] = np.array([value for _, value in functional_along(lk, traj, times)])
        slopes = np.full(len(times), np.nan)
        inner = (times - traj.step >= 0) & (times + traj.step <= traj.t_end)
        slopes[inner] = [fd_slope(lk, traj, t) for t in times[inner]]
        columns["dV_fd"] = slopes
    return columns
