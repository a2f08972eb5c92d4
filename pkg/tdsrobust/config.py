"""Problem configuration files."""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
import os

import numpy as np
import voluptuous as vol

from .const import (
    CONF_A0,
    CONF_A1,
    CONF_B,
    CONF_C0,
    CONF_C1,
    CONF_C_GRID,
    CONF_COMPLETE_TYPE,
    CONF_COUNT,
    CONF_DIR,
    CONF_DISCRETIZATION,
    CONF_ELLIPSE,
    CONF_GRID_POINTS,
    CONF_H,
    CONF_DERIVATIVE_TOL,
    CONF_MAX_REFINE_ITERS,
    CONF_MONOTONE_TOL,
    CONF_NONLINEARITY,
    CONF_OMEGA_MAX,
    CONF_ORDER,
    CONF_OUTPUT,
    CONF_PARAMS,
    CONF_PRESET,
    CONF_RADIUS,
    CONF_RAW,
    CONF_REFINE_TOL,
    CONF_SAMPLES,
    CONF_SECTOR,
    CONF_SIMULATION,
    CONF_SPECTRUM,
    CONF_STEP,
    CONF_STRUCTURE,
    CONF_SWEEP,
    CONF_SYSTEM,
    CONF_T_END,
    CONF_TRAJECTORIES,
    CONF_VERIFICATION,
    DEFAULT_DERIVATIVE_TOL,
    DEFAULT_MONOTONE_TOL,
    DEFAULT_ORDER,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_RADIUS,
    DEFAULT_ROOT_COUNT,
    DEFAULT_SAMPLES,
    DEFAULT_SPECTRUM_ORDER,
    DEFAULT_STEP,
    DEFAULT_T_END,
    DEFAULT_TRAJECTORIES,
    MIN_GRID_POINTS,
    MIN_SPECTRUM_ORDER,
)
from .errors import ConfigError, TdsRobustError
from .freqbounds import SweepConfig
from .rfdesim import Nonlinearity, NonlinearityKind
from .sysmodel import (
    PerturbationStructure,
    SectorKind,
    SectorRestriction,
    TdsSystem,
    sector_preset,
)

_LOGGER = logging.getLogger(__name__)

DEFAULT_C_GRID = [[1.0, 1.0], [1.0, 0.5], [0.1, 1.0]]


def matrix(value):
    """Scalar, flat list or rectangular nested list of numbers."""
    try:
        array = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as err:
        raise vol.Invalid("must be a rectangular numeric matrix") from err
    if array.ndim > 2:
        raise vol.Invalid("must be a rectangular numeric matrix")
    if not np.all(np.isfinite(array)):
        raise vol.Invalid("entries must be finite")
    return array


def _positive():
    return vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False, msg="must be > 0"))


def _non_negative():
    return vol.All(vol.Coerce(float), vol.Range(min=0, msg="must be >= 0"))


SYSTEM_SCHEMA = vol.Schema({
    vol.Required(CONF_A0): matrix,
    vol.Required(CONF_A1): matrix,
    vol.Required(CONF_H): _positive(),
})

STRUCTURE_SCHEMA = vol.Schema({
    vol.Optional(CONF_B): matrix,
    vol.Optional(CONF_C0): matrix,
    vol.Optional(CONF_C1): matrix,
})

PARAMS_SCHEMA = vol.Schema({
    vol.Optional("gamma"): _non_negative(),
    vol.Optional("L"): matrix,
    vol.Optional("W"): matrix,
    vol.Optional("rho"): _positive(),
    vol.Optional("rho_hat"): _positive(),
    vol.Optional("k1"): matrix,
    vol.Optional("k2"): matrix,
    vol.Optional("sign"): vol.In(["upper", "lower"]),
})

SECTOR_SCHEMA = vol.Schema({
    vol.Optional(CONF_PRESET): vol.In([kind.value for kind in SectorKind]),
    vol.Optional(CONF_PARAMS, default={}): PARAMS_SCHEMA,
    vol.Optional(CONF_RAW): {
        vol.Required("pi_zz"): matrix,
        vol.Required("pi_za"): matrix,
        vol.Required("pi_aa"): matrix,
    },
})

SWEEP_SCHEMA = vol.Schema({
    vol.Optional(CONF_OMEGA_MAX): _positive(),
    vol.Optional(CONF_GRID_POINTS): vol.All(vol.Coerce(int), vol.Range(min=MIN_GRID_POINTS)),
    vol.Optional(CONF_REFINE_TOL): _positive(),
    vol.Optional(CONF_MAX_REFINE_ITERS): vol.All(vol.Coerce(int), vol.Range(min=1)),
})

NONLINEARITY_SCHEMA = vol.Schema({
    vol.Required("type"): vol.In([kind.value for kind in NonlinearityKind if kind != NonlinearityKind.CUSTOM]),
    vol.Optional("gain"): matrix,
    vol.Optional("slope"): vol.Coerce(float),
    vol.Optional("limit"): _positive(),
    vol.Optional("mixing"): matrix,
    vol.Optional("signs"): matrix,
    vol.Optional("frequency", default=1.0): vol.Coerce(float),
})

CONFIG_SCHEMA = vol.Schema({
    vol.Required(CONF_SYSTEM): SYSTEM_SCHEMA,
    vol.Required(CONF_STRUCTURE): STRUCTURE_SCHEMA,
    vol.Optional(CONF_SECTOR): SECTOR_SCHEMA,
    vol.Optional(CONF_SWEEP, default={}): SWEEP_SCHEMA,
    vol.Optional(CONF_DISCRETIZATION, default={}): {
        vol.Optional(CONF_ORDER, default=DEFAULT_ORDER): vol.All(vol.Coerce(int), vol.Range(min=2)),
    },
    vol.Optional(CONF_SPECTRUM, default={}): {
        vol.Optional(CONF_ORDER, default=DEFAULT_SPECTRUM_ORDER): vol.All(
            vol.Coerce(int), vol.Range(min=MIN_SPECTRUM_ORDER)
        ),
        vol.Optional(CONF_COUNT, default=DEFAULT_ROOT_COUNT): vol.All(vol.Coerce(int), vol.Range(min=1)),
    },
    vol.Optional(CONF_SIMULATION, default={}): {
        vol.Optional(CONF_STEP, default=DEFAULT_STEP): _positive(),
        vol.Optional(CONF_T_END, default=DEFAULT_T_END): _positive(),
        vol.Optional(CONF_TRAJECTORIES, default=DEFAULT_TRAJECTORIES): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_RADIUS, default=DEFAULT_RADIUS): _positive(),
        vol.Optional(CONF_SAMPLES, default=DEFAULT_SAMPLES): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_NONLINEARITY): NONLINEARITY_SCHEMA,
    },
    vol.Optional(CONF_COMPLETE_TYPE, default={}): {
        vol.Optional("w0"): matrix,
        vol.Optional("w1"): matrix,
        vol.Optional("w2"): matrix,
    },
    vol.Optional(CONF_ELLIPSE, default={}): {
        vol.Optional(CONF_C_GRID, default=DEFAULT_C_GRID): [
            vol.All([vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False, msg="must be > 0"))],
                    vol.Length(min=2, max=2, msg="must be a (c1, c0) pair")),
        ],
    },
    vol.Optional(CONF_VERIFICATION, default={}): {
        vol.Optional(CONF_MONOTONE_TOL, default=DEFAULT_MONOTONE_TOL): _positive(),
        vol.Optional(CONF_DERIVATIVE_TOL, default=DEFAULT_DERIVATIVE_TOL): _positive(),
    },
    vol.Optional(CONF_OUTPUT, default={}): {
        vol.Optional(CONF_DIR, default=DEFAULT_OUTPUT_DIR): str,
    },
})


@dataclass(frozen=True)
class SimulationSettings:
    step: float
    t_end: float
    trajectories: int
    radius: float
    samples: int
    nonlinearity: dict | None = None


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    """A validated problem: the typed model plus the remaining settings."""

    system: TdsSystem
    structure: PerturbationStructure
    sector_kind: SectorKind | None
    sector_params: dict
    sector: SectorRestriction | None
    sweep: dict
    order: int
    spectrum_order: int
    root_count: int
    simulation: SimulationSettings
    complete_type: tuple
    c_grid: list
    monotone_tol: float
    derivative_tol: float
    output_dir: str
    raw: dict = field(default_factory=dict)

    def sweep_config(self, system=None) -> SweepConfig:
        return SweepConfig.default(system or self.system, **self.sweep)

    def nonlinearity(self) -> Nonlinearity:
        if self.simulation.nonlinearity is None:
            raise ConfigError(f"{CONF_SIMULATION}.{CONF_NONLINEARITY}", "required for this command")
        return build_nonlinearity(self.simulation.nonlinearity, self.structure.p, self.structure.m)


def _gain_matrix(value, p, m, path):
    gain = np.asarray(value, dtype=float)
    if gain.ndim == 0:
        return float(gain) * np.eye(m, p)
    gain = np.atleast_2d(gain)
    if gain.shape != (m, p):
        raise ConfigError(path, f"must be a scalar or {m}x{p}")
    return gain


def build_nonlinearity(conf, p, m) -> Nonlinearity:
    path = f"{CONF_SIMULATION}.{CONF_NONLINEARITY}"
    kind = NonlinearityKind(conf["type"])
    try:
        if kind == NonlinearityKind.LINEAR_GAIN:
            return Nonlinearity.linear_gain(_gain_matrix(conf.get("gain", 0.0), p, m, f"{path}.gain"))
        if kind == NonlinearityKind.SATURATION:
            if "slope" not in conf or "limit" not in conf:
                raise ConfigError(path, "Saturation needs slope and limit")
            mixing = conf.get("mixing")
            mixing = np.eye(m, p) if mixing is None else _gain_matrix(mixing, p, m, f"{path}.mixing")
            return Nonlinearity.saturation(conf["slope"], conf["limit"], mixing)
        if kind == NonlinearityKind.CUBIC_DIAGONAL:
            if p != m:
                raise ConfigError(path, f"CubicDiagonal needs p = m, got p={p}, m={m}")
            signs = np.broadcast_to(np.asarray(conf.get("signs", 1.0), dtype=float), (m,))
            return Nonlinearity.cubic_diagonal(signs)
        gain = _gain_matrix(conf.get("gain", 0.0), p, m, f"{path}.gain")
        frequency = conf["frequency"]
        return Nonlinearity.time_varying_gain(
            lambda t: gain * np.cos(frequency * t),
            f"TimeVaryingGain(cos({frequency:.6g} t))",
        )
    except ConfigError:
        raise
    except TdsRobustError as err:
        raise ConfigError(path, str(err)) from err


def _path(err: vol.Invalid) -> str:
    return ".".join(str(part) for part in err.path)


def _build(section, factory):
    try:
        return factory()
    except ConfigError:
        raise
    except TdsRobustError as err:
        raise ConfigError(section, str(err)) from err


def _sector(conf, structure):
    sector_conf = conf.get(CONF_SECTOR)
    if sector_conf is None:
        return None, {}, None
    params = sector_conf[CONF_PARAMS]
    if CONF_RAW in sector_conf:
        if CONF_PRESET in sector_conf:
            raise ConfigError(CONF_SECTOR, "give either preset or raw, not both")
        raw = sector_conf[CONF_RAW]
        return None, params, _build(CONF_SECTOR + "." + CONF_RAW, lambda: SectorRestriction(**raw))
    if CONF_PRESET not in sector_conf:
        raise ConfigError(CONF_SECTOR, "needs a preset or raw matrices")

    kind = SectorKind(sector_conf[CONF_PRESET])
    required = {
        SectorKind.I_A: ("gamma",),
        SectorKind.I_B: ("gamma", "L", "W"),
        SectorKind.II_A: ("rho",),
        SectorKind.II_B: ("rho_hat",),
        SectorKind.III_A: ("k2",),
        SectorKind.III_B: ("k2",),
        SectorKind.III_C: ("k2",),
    }[kind]
    for key in required:
        if key not in params:
            raise ConfigError(f"{CONF_SECTOR}.{CONF_PARAMS}.{key}", f"required for preset {kind.value}")
    if kind in (SectorKind.III_A, SectorKind.III_B, SectorKind.III_C) and "k1" not in params:
        # only bounds can run without k1; it computes k1_min instead
        return kind, params, None
    sector = _build(
        f"{CONF_SECTOR}.{CONF_PARAMS}",
        lambda: sector_preset(kind, params, structure.p, structure.m),
    )
    return kind, params, sector


def parse_config(raw) -> ProblemConfig:
    """Validate a config dictionary and build the typed model."""
    try:
        conf = CONFIG_SCHEMA(raw)
    except vol.MultipleInvalid as err:
        first = err.errors[0]
        raise ConfigError(_path(first), first.msg) from err

    sys_conf = conf[CONF_SYSTEM]
    system = _build(CONF_SYSTEM, lambda: TdsSystem(sys_conf[CONF_A0], sys_conf[CONF_A1], sys_conf[CONF_H]))
    n = system.n
    ps_conf = conf[CONF_STRUCTURE]
    structure = _build(
        CONF_STRUCTURE,
        lambda: PerturbationStructure(
            ps_conf.get(CONF_B, np.eye(n)),
            ps_conf.get(CONF_C1, np.eye(n)),
            ps_conf.get(CONF_C0, np.eye(n)),
        ),
    )
    _build(CONF_STRUCTURE, lambda: structure.check_system(system))
    kind, params, sector = _sector(conf, structure)

    ct_conf = conf[CONF_COMPLETE_TYPE]
    complete_type = tuple(
        np.atleast_2d(ct_conf[key]) if key in ct_conf else np.eye(n) for key in ("w0", "w1", "w2")
    )
    for key, w in zip(("w0", "w1", "w2"), complete_type):
        if w.shape != (n, n):
            raise ConfigError(f"{CONF_COMPLETE_TYPE}.{key}", f"must be {n}x{n}")

    sim = conf[CONF_SIMULATION]
    return ProblemConfig(
        system=system,
        structure=structure,
        sector_kind=kind,
        sector_params=params,
        sector=sector,
        sweep=dict(conf[CONF_SWEEP]),
        order=conf[CONF_DISCRETIZATION][CONF_ORDER],
        spectrum_order=conf[CONF_SPECTRUM][CONF_ORDER],
        root_count=conf[CONF_SPECTRUM][CONF_COUNT],
        simulation=SimulationSettings(
            step=sim[CONF_STEP],
            t_end=sim[CONF_T_END],
            trajectories=sim[CONF_TRAJECTORIES],
            radius=sim[CONF_RADIUS],
            samples=sim[CONF_SAMPLES],
            nonlinearity=sim.get(CONF_NONLINEARITY),
        ),
        complete_type=complete_type,
        c_grid=[tuple(pair) for pair in conf[CONF_ELLIPSE][CONF_C_GRID]],
        monotone_tol=conf[CONF_VERIFICATION][CONF_MONOTONE_TOL],
        derivative_tol=conf[CONF_VERIFICATION][CONF_DERIVATIVE_TOL],
        output_dir=conf[CONF_OUTPUT][CONF_DIR],
        raw=raw,
    )


def load_config(path) -> ProblemConfig:
    if not os.path.isfile(path):
        raise ConfigError("", f"config file {path} not found")
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError("", f"{path} is not valid JSON: {err}") from err
    _LOGGER.debug("Loaded config from %s", path)
    return parse_config(raw)
