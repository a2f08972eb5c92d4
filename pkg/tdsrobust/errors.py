"""Exceptions raised by tdsrobust."""


class TdsRobustError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(TdsRobustError):
    """Matrix shapes do not fit together."""


class AsymmetricMatrixError(TdsRobustError):
    """A matrix required to be symmetric is not, beyond round-off."""


class NonNegativeDefinitePiAaError(TdsRobustError):
    """Pi_aa of a sector restriction is not negative definite."""

    def __init__(self, max_eig):
        super().__init__(f"pi_aa must be negative definite, largest eigenvalue is {max_eig:.6g}")
        self.max_eig = max_eig


class SingularPiAaError(TdsRobustError):
    """Pi_aa cannot be inverted."""


class InvalidSectorOrderError(TdsRobustError):
    """Sector bounds are given as k2 <= k1."""

    def __init__(self, k1, k2):
        super().__init__(f"sector requires k2 > k1, got k1={k1!r}, k2={k2!r}")
        self.k1 = k1
        self.k2 = k2


class SingularCharMatrixError(TdsRobustError):
    """s is numerically a characteristic root."""

    def __init__(self, s):
        super().__init__(f"characteristic matrix is singular at s={s!r}")
        self.s = s


class NotBlockDiagonalError(TdsRobustError):
    """The transformed Pi_zz couples the delayed and current outputs."""

    def __init__(self, offdiag_norm):
        super().__init__(
            f"pi_zz is not block diagonal (off-diagonal norm {offdiag_norm:.3e}); "
            "the functional cannot be split"
        )
        self.offdiag_norm = offdiag_norm


class TailBoundInvalidError(TdsRobustError):
    """The frequency cap is too low for the analytic tail bound."""

    def __init__(self, omega, norm_sum):
        super().__init__(
            f"tail bound needs omega > ||A0|| + ||A1|| = {norm_sum:.6g}, got {omega:.6g}; "
            "increase omega_max"
        )
        self.omega = omega
        self.norm_sum = norm_sum


class DegenerateBoundError(TdsRobustError):
    """Every k1 < k2 is admissible; the certificate holds the -inf sentinel."""

    def __init__(self, certificate):
        super().__init__("max mu_2(G_II) <= 0, every k1 < k2 is admissible")
        self.certificate = certificate


class AreNoStabilizingSolutionError(TdsRobustError):
    """Newton-Kleinman did not reach a stabilizing Riccati solution."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class IllConditionedQuadratureError(TdsRobustError):
    """A quadrature weight is too small to de-weight kernels reliably."""


class NodeMismatchError(TdsRobustError):
    """Samples do not match the discretization nodes."""


class NewtonDivergenceError(TdsRobustError):
    """Newton polishing of a characteristic root failed."""

    def __init__(self, s, residual):
        super().__init__(f"Newton polish diverged near s={s!r} (residual {residual:.3e})")
        self.s = s
        self.residual = residual


class BlowUpError(TdsRobustError):
    """The simulated state left every reasonable bound."""

    def __init__(self, t, trajectory=None):
        super().__init__(f"state norm exceeded the blow-up bound at t={t:.6g}")
        self.t = t
        self.trajectory = trajectory


class UnstableNominalError(TdsRobustError):
    """The nominal system is not exponentially stable."""


class FunctionalMismatchError(TdsRobustError):
    """A stored functional was built for a different problem."""


class ConfigError(TdsRobustError):
    """Invalid problem configuration; the message is path qualified."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class NonzeroAtOriginError(TdsRobustError):
    """A nonlinearity does not vanish at zeta = 0."""

    def __init__(self, descriptor, value):
        super().__init__(f"nonlinearity {descriptor} has a(0) = {value!r}, expected 0")
        self.descriptor = descriptor
        self.value = value
