"""Innovation covariance by higher-order-method error control.

The discrepancy between one step of an order-p method and one step of an
order p+1 (or higher) method from the same family estimates the lower
method's local truncation error; scaled by tau^2 > 1 it becomes the
diagonal innovation covariance of the evolution model. Both methods are
re-seeded from the same accepted state each step, so the discrepancy is a
per-step (local) quantity.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .integrators import (
    DEFAULT_SOLVE,
    Family,
    HistoryBuffer,
    ImplicitSolveConfig,
    MethodSpec,
    _require_warm,
    advance_batch,
    make_method,
    rk_embedded_step_batch,
)
from .ode_models import OdeSystem


@dataclass(frozen=True)
class InnovationCovariance:
    """Diagonal covariance diag(gamma), entries >= 0."""

    diagonal: np.ndarray

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diagonal, dtype=float))
        if np.any(diag < 0.0):
            raise ValueError("innovation covariance entries must be nonnegative")
        object.__setattr__(self, "diagonal", diag)


@dataclass(frozen=True)
class MethodPair:
    """An order-p propagator and an order >= p+1 companion from one family.

    Embedded RK pairs are a single MethodSpec exposing both orders, stored in
    both slots. ``eps_floor`` keeps the innovation covariance away from an
    exactly degenerate zero (set 0 to disable).
    """

    low: MethodSpec
    high: MethodSpec
    tau: float = 1.5
    eps_floor: float = 1e-20

    def __post_init__(self):
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")
        if self.eps_floor < 0.0:
            raise ValueError("eps_floor must be nonnegative")
        if self.low.family is not self.high.family:
            raise ValueError("pair methods must share a family")
        if self.low.family is Family.RUNGE_KUTTA_EMBEDDED:
            if self.high is not self.low or self.low.embedded_order < self.low.order + 1:
                raise ValueError("embedded RK pair must be one spec exposing adjacent orders")
        elif self.high.order < self.low.order + 1:
            raise ValueError("high method order must exceed the low order")

    @property
    def steps_required(self) -> int:
        return max(self.low.steps, self.high.steps)

    @property
    def label(self) -> str:
        if self.low.family is Family.RUNGE_KUTTA_EMBEDDED:
            return f"RK{self.low.order}-RK{self.low.embedded_order}"
        return f"{self.low.label}-{self.high.label}"


_PAIR_DEFS = {
    "AB1-AB2": (Family.ADAMS_BASHFORTH, 1, 2),
    "AB3-AB4": (Family.ADAMS_BASHFORTH, 3, 4),
    "AM1-AM2": (Family.ADAMS_MOULTON, 1, 2),
    "AM3-AM4": (Family.ADAMS_MOULTON, 3, 4),
    "BDF1-BDF2": (Family.BDF, 1, 2),
    "BDF3-BDF4": (Family.BDF, 3, 4),
    "RK1-RK2": (Family.RUNGE_KUTTA_EMBEDDED, 1, 2),
    "RK4-RK5": (Family.RUNGE_KUTTA_EMBEDDED, 4, 5),
}

PAIR_IDS = tuple(_PAIR_DEFS)


def make_pair(pair_id: str, tau: float = 1.5, eps_floor: float = 1e-20) -> MethodPair:
    """Build a method pair from its identifier (e.g. 'AB1-AB2')."""
    try:
        family, lo, hi = _PAIR_DEFS[pair_id]
    except KeyError:
        raise ValueError(
            f"unknown method pair {pair_id!r}; valid pairs: {', '.join(PAIR_IDS)}"
        ) from None
    if family is Family.RUNGE_KUTTA_EMBEDDED:
        spec = make_method(family, lo)
        return MethodPair(low=spec, high=spec, tau=tau, eps_floor=eps_floor)
    return MethodPair(
        low=make_method(family, lo), high=make_method(family, hi), tau=tau, eps_floor=eps_floor
    )


def innovation_covariance(
    u_low: np.ndarray, u_high: np.ndarray, tau: float
) -> InnovationCovariance:
    """gamma_i = tau^2 (u_low - u_high)_i^2, exactly (no floor applied)."""
    u_low = np.atleast_1d(np.asarray(u_low, dtype=float))
    u_high = np.atleast_1d(np.asarray(u_high, dtype=float))
    if u_low.shape != u_high.shape:
        raise ValueError("solution vectors must have matching dimension")
    diff = u_low - u_high
    return InnovationCovariance(diagonal=tau * tau * diff * diff)


def propagate_pair(
    pair: MethodPair,
    system: OdeSystem,
    history_low: HistoryBuffer,
    history_high: HistoryBuffer,
    h: float,
    solve: ImplicitSolveConfig = DEFAULT_SOLVE,
) -> Tuple[np.ndarray, np.ndarray]:
    """One step of each method of the pair from aligned histories."""
    if history_low.current_time != history_high.current_time:
        raise ValueError("pair histories must be aligned at the same time")
    if pair.low.family is Family.RUNGE_KUTTA_EMBEDDED:
        _require_warm(pair.low, history_low)
        low, high = rk_embedded_step_batch(
            pair.low, system, history_low.current_time, history_low.states[0][None], h
        )
        return low[0], high[0]
    _require_warm(pair.low, history_low)
    _require_warm(pair.high, history_high)
    t = history_low.current_time
    u_low = advance_batch(
        pair.low,
        system,
        t,
        history_low.state_array()[None],
        history_low.deriv_array()[None],
        h,
        solve,
    )
    u_high = advance_batch(
        pair.high,
        system,
        t,
        history_high.state_array()[None],
        history_high.deriv_array()[None],
        h,
        solve,
    )
    return u_low[0], u_high[0]


def propagate_blocks(
    pair: MethodPair,
    system: OdeSystem,
    blocks: np.ndarray,
    t: float,
    h: float,
    solve: ImplicitSolveConfig = DEFAULT_SOLVE,
) -> Tuple[np.ndarray, np.ndarray]:
    """Batched pair step over stacked histories.

    blocks: (N, r, d) newest-first with r = pair.steps_required, aligned at
    time t. Returns the shifted predictor blocks (N, r, d) whose newest block
    is the low-order step, and the floored innovation diagonal (N, d).
    """
    r = pair.steps_required
    if blocks.shape[1] != r:
        raise ValueError(f"blocks have {blocks.shape[1]} entries; pair needs {r}")
    if pair.low.family is Family.RUNGE_KUTTA_EMBEDDED:
        u_low, u_high = rk_embedded_step_batch(pair.low, system, t, blocks[:, 0], h)
    else:
        if np.any(pair.low.beta) or np.any(pair.high.beta):
            derivs = np.stack(
                [system.rhs_batch(t - i * h, blocks[:, i]) for i in range(r)], axis=1
            )
        else:
            derivs = np.zeros_like(blocks)
        u_low = advance_batch(
            pair.low, system, t, blocks[:, : pair.low.steps], derivs[:, : pair.low.steps], h, solve
        )
        u_high = advance_batch(
            pair.high,
            system,
            t,
            blocks[:, : pair.high.steps],
            derivs[:, : pair.high.steps],
            h,
            solve,
        )
    diff = u_low - u_high
    gamma = np.maximum(pair.tau * pair.tau * diff * diff, pair.eps_floor)
    pred = np.concatenate([u_low[:, None, :], blocks[:, : r - 1]], axis=1)
    return pred, gamma
