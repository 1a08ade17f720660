"""Exception types shared across the package."""


class PhotonodeError(Exception):
    """Base class for package errors."""


class DegeneratePostselectionError(PhotonodeError):
    def __init__(self, success_probability):
        self.success_probability = success_probability
        super().__init__(
            f"post-selection success probability {success_probability:.3e} is below 1e-12"
        )


class NoConsistentConventionError(PhotonodeError):
    """No convention flag set reproduces every calibration target.

    ``best_flags`` and ``row_fidelities`` describe the closest candidate.
    """

    def __init__(self, best_flags, row_fidelities):
        self.best_flags = best_flags
        self.row_fidelities = row_fidelities
        rows = ", ".join(f"{k}={v:.6f}" for k, v in row_fidelities.items())
        super().__init__(f"no consistent convention; best flags {best_flags} give {rows}")


class MLEConvergenceError(PhotonodeError):
    def __init__(self, last_iterate, residual, iterations):
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"MLE did not converge after {iterations} iterations (residual {residual:.3e})"
        )


class BootstrapError(PhotonodeError):
    """Too many bootstrap resamples failed to reconstruct."""
