"""Constants for the tdsrobust package."""

DOMAIN = "tdsrobust"
SCHEMA_VERSION = "1.0"
FUNCTIONAL_FORMAT = "tdsrobust.lk_functional"

# Matrix checks
SYMMETRY_TOL = 1e-12
ASYMMETRY_ERROR_TOL = 1e-8
BLOCK_DIAGONAL_TOL = 1e-10
SINGULAR_CHAR_TOL = 1e-12

# Frequency sweep
DEFAULT_GRID_POINTS = 4096
MIN_GRID_POINTS = 64
DEFAULT_REFINE_TOL = 1e-6
MAX_REFINE_TOL = 1e-2
DEFAULT_MAX_REFINE_ITERS = 200
OMEGA_MAX_FACTOR = 10.0
# Upper limit on how far the sweep may be stretched to make the tail bound valid
MAX_TAIL_STRETCH = 1e3
MAX_REFINE_STARTS = 16

# Spectrum
DEFAULT_SPECTRUM_ORDER = 32
MIN_SPECTRUM_ORDER = 8
DEFAULT_ROOT_COUNT = 6
STABILITY_THRESHOLD = -1e-8
CLEARANCE_TOL = 1e-8
NEWTON_POLISH_TOL = 1e-12
NEWTON_POLISH_ACCEPT = 1e-8
NEWTON_POLISH_MAX_ITERS = 30

# Functional construction
DEFAULT_ORDER = 24
ARE_TOL = 1e-10
ARE_ACCEPT_TOL = 1e-8
ARE_MAX_ITERS = 50
MIN_QUAD_WEIGHT = 1e-14

# Simulation
BLOW_UP_NORM = 1e12
DEFAULT_STEP = 1e-2
DEFAULT_T_END = 10.0
DEFAULT_TRAJECTORIES = 20
DEFAULT_RADIUS = 1.0
DEFAULT_SAMPLES = 1000
DEFAULT_MONOTONE_TOL = 1e-5
DEFAULT_DERIVATIVE_TOL = 1e-4
# Segments are checked once the initial derivative jumps have been smoothed out
SETTLE_DELAYS = 5

# Configuration keys
CONF_SYSTEM = "system"
CONF_A0 = "a0"
CONF_A1 = "a1"
CONF_H = "h"
CONF_STRUCTURE = "structure"
CONF_B = "b"
CONF_C0 = "c0"
CONF_C1 = "c1"
CONF_SECTOR = "sector"
CONF_PRESET = "preset"
CONF_PARAMS = "params"
CONF_RAW = "raw"
CONF_SWEEP = "sweep"
CONF_OMEGA_MAX = "omega_max"
CONF_GRID_POINTS = "grid_points"
CONF_REFINE_TOL = "refine_tol"
CONF_MAX_REFINE_ITERS = "max_refine_iters"
CONF_DISCRETIZATION = "discretization"
CONF_ORDER = "order"
CONF_SPECTRUM = "spectrum"
CONF_COUNT = "count"
CONF_SIMULATION = "simulation"
CONF_STEP = "step"
CONF_T_END = "t_end"
CONF_NONLINEARITY = "nonlinearity"
CONF_TRAJECTORIES = "trajectories"
CONF_RADIUS = "radius"
CONF_SAMPLES = "samples"
CONF_COMPLETE_TYPE = "complete_type"
CONF_ELLIPSE = "ellipse"
CONF_C_GRID = "c_grid"
CONF_VERIFICATION = "verification"
CONF_MONOTONE_TOL = "monotone_tol"
CONF_DERIVATIVE_TOL = "derivative_tol"
CONF_OUTPUT = "output"
CONF_DIR = "dir"
DEFAULT_OUTPUT_DIR = "tdsrobust_out"

# Exit codes
EXIT_OK = 0
EXIT_DENIED = 1
EXIT_ASSUMPTIONS = 2
EXIT_INPUT = 3
EXIT_INCONCLUSIVE = 4

# Output files
REPORT_FILE = "report.json"
REPORT_TEXT_FILE = "report.txt"
FUNCTIONAL_FILE = "functional.json"
SWEEP_CSV = "sweep.csv"
SWEEP_PNG = "sweep.png"
ELLIPSE_CSV = "ellipse.csv"
ELLIPSE_PNG = "ellipse.png"
ROOTS_CSV = "roots.csv"
TRAJECTORY_CSV = "trajectory.csv"
