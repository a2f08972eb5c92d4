"""Command-line entry point."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .config import load_config
from .const import (
    ELLIPSE_CSV,
    ELLIPSE_PNG,
    EXIT_ASSUMPTIONS,
    EXIT_DENIED,
    EXIT_INCONCLUSIVE,
    EXIT_INPUT,
    EXIT_OK,
    FUNCTIONAL_FILE,
    ROOTS_CSV,
    SWEEP_CSV,
    SWEEP_PNG,
    TRAJECTORY_CSV,
)
from .errors import (
    AreNoStabilizingSolutionError,
    AsymmetricMatrixError,
    BlowUpError,
    ConfigError,
    DegenerateBoundError,
    DimensionMismatchError,
    FunctionalMismatchError,
    NodeMismatchError,
    NonNegativeDefinitePiAaError,
    TailBoundInvalidError,
    TdsRobustError,
    UnstableNominalError,
)
from .freqbounds import (
    Outcome,
    certify_w,
    gamma_max,
    k1_min,
    rho_min,
    sweep_table,
)
from .lkbuild import (
    Discretization,
    build_functional,
    defining_equation_residual,
    load_functional,
    positivity_probe,
    problem_hash,
    random_segment,
    sample,
    save_functional,
    upper_bound_constant,
)
from .lyapunov_matrix import complete_type_gamma
from .plotting import plot_ellipses, plot_sweep
from .report import Report
from .rfdesim import (
    NonlinearityKind,
    check_times,
    functional_along,
    integrate,
    monotonicity_violation,
    perturbation_derivative_check,
    random_initial_function,
    sector_membership,
    slope_bound_check,
    trajectory_table,
)
from .spectrum import rightmost_roots
from .sysmodel import (
    PerturbationStructure,
    SectorKind,
    flip_sign,
    spectral_norm,
    weighted_structure,
)

_LOGGER = logging.getLogger(__name__)

RESIDUAL_SAMPLES = 100
INPUT_ERRORS = (
    ConfigError,
    DimensionMismatchError,
    AsymmetricMatrixError,
    NonNegativeDefinitePiAaError,
    FunctionalMismatchError,
    NodeMismatchError,
    TailBoundInvalidError,
)
OUTCOME_EXIT = {
    Outcome.COMPUTED: EXIT_OK,
    Outcome.CERTIFIED: EXIT_OK,
    Outcome.DENIED: EXIT_DENIED,
    Outcome.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    Outcome.ASSUMPTIONS_FAILED: EXIT_ASSUMPTIONS,
}


def write_csv(path, columns):
    """RFC-4180 CSV with a header row and 17 significant digits."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=",".join(names), comments="")
    _LOGGER.debug("Wrote %d rows to %s", len(data), path)


def _require_sector(config):
    if config.sector is None:
        raise ConfigError("sector", "a complete sector (preset with all parameters, or raw) is required")
    return config.sector


def _write_sweep(config, ps, sec, out_dir, report):
    table = sweep_table(config.system, ps, sec, config.sweep_config())
    write_csv(os.path.join(out_dir, SWEEP_CSV), table)
    plot_sweep(table, os.path.join(out_dir, SWEEP_PNG))
    report.files.extend([SWEEP_CSV, SWEEP_PNG])


def _scalar_k2(config):
    k2 = np.asarray(config.sector_params["k2"], dtype=float)
    if k2.size != 1:
        raise ConfigError("sector.params.k2", "k1_min needs a scalar upper bound")
    return float(k2.reshape(-1)[0])


def cmd_bounds(config, args, out_dir) -> Report:
    """The bound of the configured sector row (gamma_max when no sector is given)."""
    system, ps = config.system, config.structure
    cfg = config.sweep_config()
    kind = config.sector_kind
    report = Report("bounds")

    if kind in (None, SectorKind.I_A):
        cert, name = gamma_max(system, ps, cfg, config.spectrum_order), "gamma_max"
    elif kind == SectorKind.I_B:
        params = config.sector_params
        scaled = weighted_structure(ps, params["L"], params["W"])
        cert, name = gamma_max(system, scaled, cfg, config.spectrum_order), "gamma_max"
    elif kind == SectorKind.II_A:
        cert, name = rho_min(system, ps, cfg, config.spectrum_order), "rho_min"
    elif kind == SectorKind.II_B:
        cert, name = rho_min(system, flip_sign(ps), cfg, config.spectrum_order), "rho_hat_min"
    else:
        try:
            cert = k1_min(system, ps, _scalar_k2(config), cfg, config.spectrum_order)
        except DegenerateBoundError as err:
            _LOGGER.info("%s", err)
            cert = err.certificate
        name = "k1_min"

    report.certificates.append(cert)
    report.assumptions.extend(cert.assumptions)
    report.values[name] = cert.value
    report.outcome = cert.outcome.value
    report.exit_code = OUTCOME_EXIT[cert.outcome]

    if args.complete_type:
        try:
            gamma, psi0 = complete_type_gamma(system, *config.complete_type, order=config.spectrum_order)
            report.values["complete_type_gamma"] = gamma
            report.values["psi0"] = psi0
        except UnstableNominalError as err:
            _LOGGER.error("%s", err)
            report.values["complete_type_gamma"] = float("nan")
            report.exit_code = EXIT_ASSUMPTIONS
            report.outcome = Outcome.ASSUMPTIONS_FAILED.value

    _write_sweep(config, ps, config.sector, out_dir, report)
    return report


def cmd_certify(config, args, out_dir) -> Report:
    sec = _require_sector(config)
    cert = certify_w(config.system, config.structure, sec, config.sweep_config(), config.spectrum_order)
    report = Report("certify", certificates=[cert], assumptions=list(cert.assumptions))
    report.values["min_lambda_w"] = cert.margin
    report.outcome = cert.outcome.value
    report.exit_code = OUTCOME_EXIT[cert.outcome]
    _write_sweep(config, config.structure, sec, out_dir, report)
    return report


def _residual_summary(lk, config, rng):
    system, ps, sec = config.system, config.structure, config.sector
    degree = max(1, config.order // 2)
    worst = 0.0
    for _ in range(RESIDUAL_SAMPLES):
        segment = random_segment(rng, system.n, system.h, degree=degree)
        phi = sample(lk.disc, segment)
        worst = max(worst, defining_equation_residual(lk, system, ps, sec, phi))
    return worst


def cmd_construct(config, args, out_dir) -> Report:
    system, ps = config.system, config.structure
    sec = _require_sector(config)
    rng = np.random.default_rng(args.seed)
    cert = certify_w(system, ps, sec, config.sweep_config(), config.spectrum_order)
    report = Report("construct", certificates=[cert], assumptions=list(cert.assumptions))
    if cert.outcome == Outcome.ASSUMPTIONS_FAILED:
        report.outcome = cert.outcome.value
        report.exit_code = EXIT_ASSUMPTIONS
        return report
    if cert.outcome != Outcome.CERTIFIED:
        _LOGGER.warning("Existence test is %s; attempting the construction anyway", cert.outcome.value)

    disc = Discretization.chebyshev(system.h, config.order)
    try:
        lk, are = build_functional(system, ps, sec, disc)
    except AreNoStabilizingSolutionError as err:
        _LOGGER.error("%s", err)
        report.are = err.report.as_dict() if err.report is not None else None
        report.outcome = "no_stabilizing_solution"
        report.exit_code = EXIT_DENIED
        return report

    save_functional(lk, os.path.join(out_dir, FUNCTIONAL_FILE))
    report.files.append(FUNCTIONAL_FILE)
    report.are = are.as_dict()

    cubic, razumikhin = positivity_probe(lk, config.simulation.samples, config.simulation.radius, rng)
    if not (cubic > 0 and razumikhin > 0):
        _LOGGER.warning("Positivity probe found non-positive ratios (%.3g, %.3g)", cubic, razumikhin)
    report.verification = {
        "positivity_cubic_min": cubic,
        "positivity_razumikhin_min": razumikhin,
        "defining_equation_residual_max": _residual_summary(lk, config, rng),
    }
    report.values = {
        "p_xx": lk.p_xx,
        "upper_bound_constant": upper_bound_constant(lk),
        "order": config.order,
        "hash": lk.problem_hash,
    }
    report.outcome = "constructed"
    return report


def _verify_trajectories(config, lk, nl, rng, report):
    system, ps = config.system, config.structure
    sim = config.simulation
    k3 = None
    if config.sector_kind == SectorKind.I_A and nl.kind == NonlinearityKind.LINEAR_GAIN:
        gain = np.column_stack([nl(unit) for unit in np.eye(ps.p)])
        gain_norm = spectral_norm(gain)
        k3 = float(config.sector_params["gamma"]) ** 2 - gain_norm**2

    worst_mono, worst_derivative, worst_slope = 0.0, 0.0, 0.0
    for i in range(sim.trajectories):
        phi0 = random_initial_function(rng, system.n, system.h, sim.radius * rng.uniform(0.2, 1.0))
        try:
            traj = integrate(system, ps, nl, phi0, sim.step, sim.t_end)
        except BlowUpError as err:
            _LOGGER.error("Trajectory %d diverged: %s", i, err)
            report.verification["blow_up"] = True
            return float("inf"), float("inf"), float("inf")
        times = check_times(traj)
        worst_mono = max(worst_mono, monotonicity_violation(functional_along(lk, traj, times)))
        worst_derivative = max(worst_derivative, perturbation_derivative_check(lk, system, ps, nl, traj, times))
        if k3 is not None:
            worst_slope = max(worst_slope, slope_bound_check(lk, traj, times, ps, k3))
    if k3 is not None:
        report.verification["slope_bound_k3"] = k3
        report.verification["slope_bound_violation"] = worst_slope
    return worst_mono, worst_derivative, worst_slope


def cmd_verify(config, args, out_dir) -> Report:
    system, ps = config.system, config.structure
    sec = _require_sector(config)
    path = args.functional or os.path.join(out_dir, FUNCTIONAL_FILE)
    if not os.path.isfile(path):
        raise ConfigError("functional", f"{path} not found; run construct first")
    lk = load_functional(path)
    if lk.problem_hash != problem_hash(system, ps, sec):
        raise FunctionalMismatchError(f"{path} was built for a different problem")
    nl = config.nonlinearity()
    rng = np.random.default_rng(args.seed)
    report = Report("verify")

    zeta_radius = 2.0 * spectral_norm(ps.c_stack) * config.simulation.radius
    fraction, margin = sector_membership(nl, ps, sec, config.simulation.samples, zeta_radius, rng)
    report.verification = {
        "nonlinearity": nl.descriptor,
        "sector_fraction_inside": fraction,
        "sector_worst_margin": margin,
    }
    if fraction < 1.0:
        _LOGGER.error("Nonlinearity %s leaves the sector (worst margin %.3g)", nl.descriptor, margin)
        report.outcome = "out_of_sector"
        report.exit_code = EXIT_DENIED
        return report

    mono, mismatch, slope = _verify_trajectories(config, lk, nl, rng, report)
    report.verification["monotonicity_violation"] = mono
    report.verification["derivative_mismatch"] = mismatch
    failed = mono > config.monotone_tol or mismatch > config.derivative_tol or slope > config.monotone_tol
    if failed:
        _LOGGER.error("Verification failed: monotonicity %.3g, derivative mismatch %.3g", mono, mismatch)
    report.outcome = "violated" if failed else "verified"
    report.exit_code = EXIT_DENIED if failed else EXIT_OK
    return report


def cmd_ellipse(config, args, out_dir) -> Report:
    """gamma_max for B = I, C1 = c1 I, C0 = c0 I and the matching boundary curves."""
    system = config.system
    eye = np.eye(system.n)
    angles = np.linspace(0.0, 0.5 * np.pi, 91)
    report = Report("ellipse")
    rows = {"c1": [], "c0": [], "gamma_max": [], "delta0": [], "delta1": []}
    curves, entries = [], []
    for c1, c0 in config.c_grid:
        cert = gamma_max(system, PerturbationStructure(eye, c1 * eye, c0 * eye),
                         config.sweep_config(), config.spectrum_order)
        report.certificates.append(cert)
        d0 = c0 * cert.value * np.cos(angles)
        d1 = c1 * cert.value * np.sin(angles)
        curves.append(((c1, c0), d0, d1))
        entries.append({"c1": c1, "c0": c0, "gamma_max": cert.value})
        rows["c1"].extend([c1] * len(angles))
        rows["c0"].extend([c0] * len(angles))
        rows["gamma_max"].extend([cert.value] * len(angles))
        rows["delta0"].extend(d0)
        rows["delta1"].extend(d1)
        if cert.outcome == Outcome.ASSUMPTIONS_FAILED:
            report.exit_code = EXIT_ASSUMPTIONS
            report.outcome = cert.outcome.value
    write_csv(os.path.join(out_dir, ELLIPSE_CSV), rows)
    plot_ellipses(curves, os.path.join(out_dir, ELLIPSE_PNG))
    report.files.extend([ELLIPSE_CSV, ELLIPSE_PNG])
    report.values["ellipses"] = entries
    return report


def cmd_complete_type(config, args, out_dir) -> Report:
    report = Report("complete-type")
    gamma, psi0 = complete_type_gamma(config.system, *config.complete_type, order=config.spectrum_order)
    report.values = {"complete_type_gamma": gamma, "psi0": psi0, "w": config.complete_type}
    return report


def cmd_spectrum(config, args, out_dir) -> Report:
    roots = rightmost_roots(config.system, config.spectrum_order, config.root_count)
    write_csv(
        os.path.join(out_dir, ROOTS_CSV),
        {"re": [root.real for root in roots.roots], "im": [root.imag for root in roots.roots]},
    )
    report = Report("spectrum", files=[ROOTS_CSV])
    report.values = roots.as_dict()
    return report


def cmd_simulate(config, args, out_dir) -> Report:
    system, ps = config.system, config.structure
    nl = config.nonlinearity()
    rng = np.random.default_rng(args.seed)
    lk = load_functional(args.functional) if args.functional else None
    phi0 = random_initial_function(rng, system.n, system.h, config.simulation.radius)
    report = Report("simulate", files=[TRAJECTORY_CSV])
    try:
        traj = integrate(system, ps, nl, phi0, config.simulation.step, config.simulation.t_end)
    except BlowUpError as err:
        _LOGGER.error("%s", err)
        traj = err.trajectory
        report.outcome = "blow_up"
        report.exit_code = EXIT_DENIED
        lk = None
    write_csv(os.path.join(out_dir, TRAJECTORY_CSV), trajectory_table(traj, lk))
    report.values = {"steps": len(traj.times) - 1, "final_norm": float(np.linalg.norm(traj.states[-1]))}
    return report


COMMANDS = {
    "bounds": cmd_bounds,
    "certify": cmd_certify,
    "construct": cmd_construct,
    "verify": cmd_verify,
    "ellipse": cmd_ellipse,
    "complete-type": cmd_complete_type,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="problem config (JSON)")
    common.add_argument("--out", help="output directory (default: output.dir of the config)")
    common.add_argument("--seed", type=int, default=0, help="seed of the random verification samples")
    common.add_argument("--format", choices=["json", "text"], default="text", help="report printed to stdout")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="tdsrobust", description="Robust stability of time-delay systems")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, func in COMMANDS.items():
        sub = commands.add_parser(name, parents=[common], help=(func.__doc__ or "").strip().split("\n")[0] or None)
        if name == "bounds":
            sub.add_argument("--complete-type", action="store_true", help="also compute the complete-type bound")
        if name in ("verify", "simulate"):
            sub.add_argument("--functional", help="functional JSON written by construct")
    return parser


def _error_exit(err):
    if isinstance(err, INPUT_ERRORS):
        return EXIT_INPUT
    if isinstance(err, UnstableNominalError):
        return EXIT_ASSUMPTIONS
    return EXIT_DENIED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args.config)
    except ConfigError as err:
        _LOGGER.error("%s", err)
        return EXIT_INPUT
    out_dir = args.out or config.output_dir
    os.makedirs(out_dir, exist_ok=True)

    try:
        report = COMMANDS[args.command](config, args, out_dir)
    except TdsRobustError as err:
        _LOGGER.error("%s failed: %s", args.command, err)
        report = Report(args.command, exit_code=_error_exit(err), outcome="error")
        report.values["error"] = str(err)

    report.write(out_dir)
    if args.format == "json":
        print(report.to_json())
    else:
        print(report.to_text(), end="")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
