"""Filter-run diagnostics: per-step absolute error, sample variance, norms."""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._kernels import weighted_mean_var
from .particle_filter import Ensemble


@dataclass(frozen=True)
class RunDiagnostics:
    """Per-step ensemble means, spreads, and errors plus their table norms.

    ``error_inf_norm`` is the max of the absolute errors over all steps and
    components; ``variance_2norm`` is the Euclidean norm of every per-step
    variance component stacked into one vector.
    """

    times: np.ndarray
    ensemble_means: np.ndarray
    sample_variances: np.ndarray
    absolute_errors: np.ndarray
    exact_values: np.ndarray
    error_inf_norm: float
    variance_2norm: float


def _moments(ensemble: Ensemble):
    values = np.ascontiguousarray(ensemble.newest)
    return weighted_mean_var(values, ensemble.weights)


def ensemble_mean(ensemble: Ensemble) -> np.ndarray:
    """Weighted mean of the newest block over the ensemble."""
    return _moments(ensemble)[0]


def sample_variance(ensemble: Ensemble) -> np.ndarray:
    """Weighted population variance per component of the newest block."""
    if ensemble.n_particles < 2:
        raise ValueError("sample variance needs at least 2 particles")
    return _moments(ensemble)[1]


def diagnostics(
    run: Sequence[Ensemble], exact: Callable[[float], np.ndarray]
) -> RunDiagnostics:
    """Assemble error/variance sequences for a filter run against the truth."""
    times = np.array([ens.time for ens in run])
    means = np.stack([ensemble_mean(ens) for ens in run])
    variances = np.stack([sample_variance(ens) for ens in run])
    truth = np.stack([np.atleast_1d(np.asarray(exact(t), dtype=float)) for t in times])
    errors = np.abs(means - truth)
    return RunDiagnostics(
        times=times,
        ensemble_means=means,
        sample_variances=variances,
        absolute_errors=errors,
        exact_values=truth,
        error_inf_norm=float(np.max(errors)) if errors.size else 0.0,
        variance_2norm=float(np.linalg.norm(variances.ravel())),
    )
