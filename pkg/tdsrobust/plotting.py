"""PNG figures for sweeps and uncertainty ellipses."""
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_LOGGER = logging.getLogger(__name__)


def plot_sweep(table, output_path, title="Frequency sweep"):
    """lambda_min(W) and ||G||_2 versus omega."""
    omega = table["omega"]
    plt.figure(figsize=(10, 6))
    plt.plot(omega, table["g_norm"], label="||G(i omega)||_2")
    if not np.all(np.isnan(table["lambda_min_w"])):
        plt.plot(omega, table["lambda_min_w"], label="lambda_min(W(i omega))")
        plt.axhline(0.0, color="gray", linewidth=0.8)
    plt.xscale("symlog", linthresh=1.0)
    plt.xlabel("omega")
    plt.title(title)
    plt.legend()
    plt.savefig(output_path, dpi=100, bbox_inches="tight")
    plt.close()
    _LOGGER.debug("Saved sweep plot to %s", output_path)


def plot_ellipses(curves, output_path):
    """One admissible boundary per (c1, c0) in the (||D0||, ||D1||) plane.

    Args:
        curves: list of ((c1, c0), d0 array, d1 array)
        output_path: PNG file to write
    """
    plt.figure(figsize=(8, 8))
    for (c1, c0), d0, d1 in curves:
        plt.plot(d0, d1, label=f"c1={c1:g}, c0={c0:g}")
    plt.xlabel("||Delta_0||_2")
    plt.ylabel("||Delta_1||_2")
    plt.gca().set_aspect("equal", adjustable="datalim")
    plt.title("Admissible uncertainty bounds")
    plt.legend()
    plt.savefig(output_path, dpi=100, bbox_inches="tight")
    plt.close()
    _LOGGER.debug("Saved ellipse plot to %s", output_path)
