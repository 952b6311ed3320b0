"""Auxiliary particle filter driven by a multistep-integrator pair.

Each filter step propagates every particle one integrator step (the
predictor), estimates a per-particle innovation covariance from the pair
discrepancy, resamples by predictor fitness at observation times, perturbs
the newest block, and reweights by the observation-likelihood ratio.

Random draws are consumed in a fixed order so replay under one seed is
byte-identical: the prior draw at initialization (one (N, d) normal block),
then per step the resampling uniforms (N for multinomial, 1 for systematic,
none between observations) followed by one (N, d) innovation normal block.
All operations return new ensembles; inputs are never mutated.
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._kernels import inverse_cdf_indices, normalize_log_weights
from .homec import MethodPair, propagate_blocks
from .integrators import startup_states_batch
from .ode_models import ObservationRecord
from .state_space import AugmentedState, EvolutionObservationModel

RESAMPLERS = ("multinomial", "systematic")


class LikelihoodUnderflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class Particle:
    state: AugmentedState
    weight: float
    predictor: Optional[AugmentedState] = None


@dataclass(frozen=True)
class Ensemble:
    """Weighted particle sample at one time index, stored as stacked arrays.

    ``states`` holds each particle's history blocks (N, r, d) newest first;
    ``predictors`` and ``innovation_vars``, when present, are the pair
    propagation outputs aligned row-by-row with the particles.
    """

    states: np.ndarray
    weights: np.ndarray
    time_index: int
    time: float
    predictors: Optional[np.ndarray] = None
    innovation_vars: Optional[np.ndarray] = None

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    @property
    def newest(self) -> np.ndarray:
        """Newest state block per particle, shape (N, d)."""
        return self.states[:, 0]

    @property
    def particles(self) -> List[Particle]:
        out = []
        for n in range(self.n_particles):
            pred = None
            if self.predictors is not None:
                # in every ensemble run_filter returns, the stored predictors
                # are the pre-innovation propagation of this same step
                pred = AugmentedState(
                    blocks=self.predictors[n].copy(),
                    time_index=self.time_index,
                    time=self.time,
                )
            out.append(
                Particle(
                    state=AugmentedState(
                        blocks=self.states[n].copy(),
                        time_index=self.time_index,
                        time=self.time,
                    ),
                    weight=float(self.weights[n]),
                    predictor=pred,
                )
            )
        return out


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int
    initial_variance: float
    step: float
    pair: MethodPair
    resampler: str = "multinomial"
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.initial_variance <= 0.0:
            raise ValueError("initial_variance must be positive")
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if self.resampler not in RESAMPLERS:
            raise ValueError(f"resampler must be one of {RESAMPLERS}")


def initialize(
    config: FilterConfig,
    prior_mean: np.ndarray,
    rng: np.random.Generator,
    *,
    model: EvolutionObservationModel,
    t_start: float,
) -> Ensemble:
    """Draw N particles from N(prior_mean, V0 I) and warm their histories.

    The sampled value is each particle's newest block; older blocks are
    filled by reverse-time RK startup steps along the particle's own flow.
    """
    prior_mean = np.atleast_1d(np.asarray(prior_mean, dtype=float))
    n, d = config.n_particles, prior_mean.shape[0]
    draws = prior_mean[None, :] + np.sqrt(config.initial_variance) * rng.standard_normal((n, d))
    r = model.steps_required
    if r == 1:
        blocks = draws[:, None, :].copy()
    else:
        blocks = startup_states_batch(
            model.system, draws, t_start, config.step, r, backward=True
        )
    weights = np.full(n, 1.0 / n)
    return Ensemble(states=blocks, weights=weights, time_index=0, time=float(t_start))


def propagate_ensemble(
    ensemble: Ensemble, model: EvolutionObservationModel, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Pair-propagate every particle; returns (predictors, innovation diag)."""
    return propagate_blocks(
        model.pair, model.system, ensemble.states, ensemble.time, h, model.solve
    )


def _resample_indices(
    fitness: np.ndarray, rng: np.random.Generator, resampler: str
) -> np.ndarray:
    n = fitness.shape[0]
    cum = np.cumsum(fitness)
    if resampler == "multinomial":
        us = rng.random(n)
    elif resampler == "systematic":
        us = (rng.random() + np.arange(n)) / n
    else:
        raise ValueError(f"resampler must be one of {RESAMPLERS}")
    return inverse_cdf_indices(cum, us)


def survival_of_the_fittest(
    ensemble: Ensemble,
    predictors: np.ndarray,
    observation: ObservationRecord,
    model: EvolutionObservationModel,
    rng: np.random.Generator,
    *,
    gammas: Optional[np.ndarray] = None,
    resampler: str = "multinomial",
) -> Ensemble:
    """Resample particles with replacement by normalized predictor fitness.

    Fitness of particle n is w_n * pi(y | predictor_n). States, predictors,
    and the per-particle innovation covariances are reshuffled together; the
    returned ensemble carries the reshuffled arrays and uniform weights.
    """
    loglik = model.log_likelihood_batch(observation.value, predictors[:, 0])
    with np.errstate(divide="ignore"):
        log_fitness = np.log(ensemble.weights) + loglik
    m = np.max(log_fitness)
    if not np.isfinite(m):
        raise LikelihoodUnderflowError(
            "likelihood underflow; observation inconsistent with ensemble"
        )
    fitness = normalize_log_weights(np.ascontiguousarray(log_fitness))
    idx = _resample_indices(fitness, rng, resampler)
    n = ensemble.n_particles
    return Ensemble(
        states=ensemble.states[idx].copy(),
        weights=np.full(n, 1.0 / n),
        time_index=ensemble.time_index,
        time=ensemble.time,
        predictors=predictors[idx].copy(),
        innovation_vars=None if gammas is None else gammas[idx].copy(),
    )


def innovation_step(
    ensemble: Ensemble,
    predictors: np.ndarray,
    gammas: np.ndarray,
    rng: np.random.Generator,
    *,
    h: float,
) -> Ensemble:
    """Proliferate: perturb each predictor's newest block by N(0, Gamma_n).

    Older blocks pass through untouched; weights are carried over.
    """
    n, _, d = predictors.shape
    noise = np.sqrt(gammas) * rng.standard_normal((n, d))
    newest = predictors[:, 0] + noise
    states = np.concatenate([newest[:, None, :], predictors[:, 1:]], axis=1)
    return Ensemble(
        states=states,
        weights=ensemble.weights.copy(),
        time_index=ensemble.time_index + 1,
        time=ensemble.time + h,
        predictors=predictors.copy(),
        innovation_vars=gammas.copy(),
    )


def weight_update(
    ensemble: Ensemble,
    predictors: np.ndarray,
    observation: ObservationRecord,
    model: EvolutionObservationModel,
) -> Ensemble:
    """Set weights to the likelihood ratio pi(y|x) / pi(y|predictor), normalized."""
    ll_state = model.log_likelihood_batch(observation.value, ensemble.states[:, 0])
    ll_pred = model.log_likelihood_batch(observation.value, predictors[:, 0])
    log_ratio = ll_state - ll_pred
    m = np.max(log_ratio)
    if not np.isfinite(m):
        raise LikelihoodUnderflowError(
            "likelihood underflow; observation inconsistent with ensemble"
        )
    weights = normalize_log_weights(np.ascontiguousarray(log_ratio))
    return replace(ensemble, weights=weights)


def _observation_schedule(
    observations: Sequence[ObservationRecord], h: float, t_start: Optional[float]
) -> Tuple[float, dict]:
    if not observations:
        raise ValueError("observations must be nonempty")
    if t_start is None:
        first = observations[0]
        t_start = first.time - first.time_index * h
    schedule = {}
    prev_k = 0
    for rec in observations:
        k = int(round((rec.time - t_start) / h))
        if k < 1 or abs(t_start + k * h - rec.time) > 1e-9 * max(1.0, abs(rec.time)):
            raise ValueError(
                f"observation at t={rec.time} does not sit on the step grid "
                f"(t_start={t_start}, h={h}); stride and step are inconsistent"
            )
        if k <= prev_k:
            raise ValueError("observation times must be strictly increasing")
        schedule[k] = rec
        prev_k = k
    return float(t_start), schedule


def run_filter(
    config: FilterConfig,
    model: EvolutionObservationModel,
    observations: Sequence[ObservationRecord],
    prior_mean: np.ndarray,
    *,
    t_start: Optional[float] = None,
) -> List[Ensemble]:
    """Run the filter over all observations; returns [S_0, S_1, ..., S_T].

    Element 0 is the initial ensemble. Steps without an observation execute
    propagation and innovation only. Identical seeds give identical output.
    Observation time indices count integrator steps from t_start; when
    t_start is omitted it is inferred from the first record.
    """
    h = config.step
    t_start, schedule = _observation_schedule(observations, h, t_start)
    last_step = max(schedule)
    rng = np.random.default_rng(config.seed)
    ensemble = initialize(config, prior_mean, rng, model=model, t_start=t_start)
    out = [ensemble]
    for j in range(1, last_step + 1):
        predictors, gammas = propagate_ensemble(ensemble, model, h)
        record = schedule.get(j)
        if record is not None:
            ensemble = survival_of_the_fittest(
                ensemble,
                predictors,
                record,
                model,
                rng,
                gammas=gammas,
                resampler=config.resampler,
            )
            predictors = ensemble.predictors
            gammas = ensemble.innovation_vars
            ensemble = innovation_step(ensemble, predictors, gammas, rng, h=h)
            ensemble = weight_update(ensemble, predictors, record, model)
        else:
            ensemble = innovation_step(ensemble, predictors, gammas, rng, h=h)
        out.append(ensemble)
    return out
