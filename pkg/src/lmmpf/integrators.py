"""Fixed-step ODE propagators: Adams-Bashforth, Adams-Moulton, BDF, and
embedded Runge-Kutta pairs, with multistep history management and startup.

All stepping routines are written against particle batches of shape (N, d);
the single-trajectory operations wrap the batched ones with N=1. Steps never
mutate their inputs and are bit-reproducible.
"""

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ._kernels import multistep_combine
from .ode_models import OdeSystem, TestProblem


class Family(enum.Enum):
    ADAMS_BASHFORTH = "adams_bashforth"
    ADAMS_MOULTON = "adams_moulton"
    BDF = "bdf"
    RUNGE_KUTTA_EMBEDDED = "runge_kutta_embedded"


class SolveStrategy(enum.Enum):
    FIXED_POINT = "fixed_point"
    NEWTON_NUMERIC_JACOBIAN = "newton_numeric_jacobian"


class ColdHistoryError(ValueError):
    """Raised when a multistep method is stepped with insufficient startup values."""


class ImplicitSolveError(RuntimeError):
    """Raised when the implicit stage equation fails to converge."""

    def __init__(self, message: str, residual_norm: float):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class ImplicitSolveConfig:
    max_iterations: int = 50
    tolerance: float = 1e-10
    strategy: SolveStrategy = SolveStrategy.FIXED_POINT

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


DEFAULT_SOLVE = ImplicitSolveConfig()


@dataclass(frozen=True)
class MethodSpec:
    """One integrator: family, order p, step count r, and coefficients.

    Multistep update (newest history entry first):

        u_{j+1} = sum_i alpha[i] u_{j-i}
                  + h * (beta_new f(t_{j+1}, u_{j+1}) + sum_i beta[i] f(t_{j-i}, u_{j-i}))

    Embedded RK pairs use the Butcher tableau fields instead and expose the
    propagating order in ``order`` and the companion order in ``embedded_order``.
    """

    family: Family
    order: int
    steps: int
    alpha: np.ndarray
    beta: np.ndarray
    beta_new: float = 0.0
    rk_c: Optional[np.ndarray] = None
    rk_a: Optional[Tuple[Tuple[float, ...], ...]] = None
    rk_b_low: Optional[np.ndarray] = None
    rk_b_high: Optional[np.ndarray] = None
    embedded_order: Optional[int] = None

    @property
    def is_implicit(self) -> bool:
        return self.beta_new != 0.0

    @property
    def label(self) -> str:
        prefix = {
            Family.ADAMS_BASHFORTH: "AB",
            Family.ADAMS_MOULTON: "AM",
            Family.BDF: "BDF",
            Family.RUNGE_KUTTA_EMBEDDED: "RK",
        }[self.family]
        return f"{prefix}{self.order}"


_AB_BETA = {
    1: [1.0],
    2: [3.0 / 2.0, -1.0 / 2.0],
    3: [23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0],
    4: [55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
}

# (beta_new, history betas); order-p Adams-Moulton keeps r = max(p-1, 1) states
_AM_BETA = {
    1: (1.0, [0.0]),
    2: (1.0 / 2.0, [1.0 / 2.0]),
    3: (5.0 / 12.0, [8.0 / 12.0, -1.0 / 12.0]),
    4: (9.0 / 24.0, [19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0]),
}

# (beta_new, state alphas)
_BDF_COEFFS = {
    1: (1.0, [1.0]),
    2: (2.0 / 3.0, [4.0 / 3.0, -1.0 / 3.0]),
    3: (6.0 / 11.0, [18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0]),
    4: (12.0 / 25.0, [48.0 / 25.0, -36.0 / 25.0, 16.0 / 25.0, -3.0 / 25.0]),
}

# Heun-Euler 1(2) pair
_RK12 = dict(
    c=[0.0, 1.0],
    a=((), (1.0,)),
    b_low=[1.0, 0.0],
    b_high=[0.5, 0.5],
)

# Fehlberg 4(5) pair
_RK45 = dict(
    c=[0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0],
    a=(
        (),
        (1.0 / 4.0,),
        (3.0 / 32.0, 9.0 / 32.0),
        (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
        (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
        (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
    ),
    b_low=[25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0],
    b_high=[
        16.0 / 135.0,
        0.0,
        6656.0 / 12825.0,
        28561.0 / 56430.0,
        -9.0 / 50.0,
        2.0 / 55.0,
    ],
)

_SUPPORTED = "AB orders 1-4, AM orders 1-4, BDF orders 1-4, RK embedded orders 1 (pair 1(2)) and 4 (pair 4(5))"


def make_method(family: Family, order: int) -> MethodSpec:
    """Build the standard published coefficients for (family, order)."""
    if family is Family.ADAMS_BASHFORTH and order in _AB_BETA:
        beta = np.array(_AB_BETA[order])
        r = order
        alpha = np.zeros(r)
        alpha[0] = 1.0
        return MethodSpec(family=family, order=order, steps=r, alpha=alpha, beta=beta)
    if family is Family.ADAMS_MOULTON and order in _AM_BETA:
        beta_new, beta = _AM_BETA[order]
        r = max(order - 1, 1)
        alpha = np.zeros(r)
        alpha[0] = 1.0
        return MethodSpec(
            family=family,
            order=order,
            steps=r,
            alpha=alpha,
            beta=np.array(beta),
            beta_new=beta_new,
        )
    if family is Family.BDF and order in _BDF_COEFFS:
        beta_new, alpha = _BDF_COEFFS[order]
        r = order
        return MethodSpec(
            family=family,
            order=order,
            steps=r,
            alpha=np.array(alpha),
            beta=np.zeros(r),
            beta_new=beta_new,
        )
    if family is Family.RUNGE_KUTTA_EMBEDDED and order in (1, 4):
        tab = _RK12 if order == 1 else _RK45
        return MethodSpec(
            family=family,
            order=order,
            steps=1,
            alpha=np.array([1.0]),
            beta=np.zeros(1),
            rk_c=np.array(tab["c"]),
            rk_a=tab["a"],
            rk_b_low=np.array(tab["b_low"]),
            rk_b_high=np.array(tab["b_high"]),
            embedded_order=order + 1,
        )
    raise ValueError(f"unsupported method ({family.value}, order {order}); supported: {_SUPPORTED}")


@dataclass
class HistoryBuffer:
    """The r most recent states (newest first), their f-evaluations, and t_j."""

    states: List[np.ndarray]
    derivatives: List[np.ndarray]
    current_time: float

    def state_array(self) -> np.ndarray:
        return np.stack(self.states)

    def deriv_array(self) -> np.ndarray:
        return np.stack(self.derivatives)


def _require_warm(method: MethodSpec, history: HistoryBuffer):
    if len(history.states) != method.steps or len(history.derivatives) != method.steps:
        raise ColdHistoryError(
            f"insufficient startup values: {method.label} needs {method.steps} states, "
            f"history has {len(history.states)}"
        )


# --------------------------------------------------------------- batch steps


def explicit_step_batch(
    spec: MethodSpec, states: np.ndarray, derivs: np.ndarray, h: float
) -> np.ndarray:
    """Adams-Bashforth update for a batch, states/derivs of shape (N, r, d)."""
    return multistep_combine(states, derivs, spec.alpha, spec.beta, h)


def _solve_stage_batch(
    system: OdeSystem,
    t_new: float,
    const: np.ndarray,
    hb: float,
    u0: np.ndarray,
    solve: ImplicitSolveConfig,
) -> np.ndarray:
    """Solve u = const + hb*f(t_new, u) row-wise in the residual max-norm."""

    def residual(u):
        return const + hb * system.rhs_batch(t_new, u) - u

    u = u0.copy()
    if solve.strategy is SolveStrategy.FIXED_POINT:
        omega = 1.0
        prev_norm = np.inf
        for _ in range(solve.max_iterations):
            res = residual(u)
            norm = np.max(np.abs(res))
            if norm <= solve.tolerance:
                return u
            if norm > prev_norm:
                omega *= 0.5
            prev_norm = norm
            u = u + omega * res
        # fall through to Newton on the current iterate
    last_norm = np.inf
    for _ in range(solve.max_iterations):
        f_val = system.rhs_batch(t_new, u)
        res = const + hb * f_val - u
        last_norm = float(np.max(np.abs(res)))
        if last_norm <= solve.tolerance:
            return u
        n, d = u.shape
        jac = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        for k in range(d):
            eps = 1e-8 * np.maximum(1.0, np.abs(u[:, k]))
            up = u.copy()
            up[:, k] += eps
            df = (system.rhs_batch(t_new, up) - f_val) / eps[:, None]
            jac[:, :, k] -= hb * df
        u = u + np.linalg.solve(jac, res[..., None])[..., 0]
    res = residual(u)
    last_norm = float(np.max(np.abs(res)))
    if last_norm <= solve.tolerance:
        return u
    raise ImplicitSolveError(
        f"implicit stage equation did not converge; last residual max-norm {last_norm:.3e}",
        residual_norm=last_norm,
    )


def implicit_step_batch(
    spec: MethodSpec,
    system: OdeSystem,
    t: float,
    states: np.ndarray,
    derivs: np.ndarray,
    h: float,
    solve: ImplicitSolveConfig = DEFAULT_SOLVE,
) -> np.ndarray:
    """Adams-Moulton / BDF update for a batch; t is the current time t_j."""
    if h == 0.0:
        return states[:, 0].copy()
    const = multistep_combine(states, derivs, spec.alpha, spec.beta, h)
    if spec.family is Family.ADAMS_MOULTON:
        # seed the iteration with the explicit Adams step the buffer supports
        ab_beta = np.array(_AB_BETA[spec.steps])
        predictor = multistep_combine(states, derivs, spec.alpha, ab_beta, h)
    else:
        predictor = states[:, 0].copy()
    return _solve_stage_batch(system, t + h, const, h * spec.beta_new, predictor, solve)


def rk_embedded_step_batch(
    spec: MethodSpec, system: OdeSystem, t: float, states: np.ndarray, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Both embedded solutions from shared stages; states of shape (N, d)."""
    ks = []
    for i in range(len(spec.rk_c)):
        ui = states
        for j, a in enumerate(spec.rk_a[i]):
            if a != 0.0:
                ui = ui + (h * a) * ks[j]
        ks.append(system.rhs_batch(t + spec.rk_c[i] * h, ui))
    low = states.copy()
    high = states.copy()
    for i, k in enumerate(ks):
        if spec.rk_b_low[i] != 0.0:
            low = low + (h * spec.rk_b_low[i]) * k
        if spec.rk_b_high[i] != 0.0:
            high = high + (h * spec.rk_b_high[i]) * k
    return low, high


def advance_batch(
    spec: MethodSpec,
    system: OdeSystem,
    t: float,
    states: np.ndarray,
    derivs: np.ndarray,
    h: float,
    solve: ImplicitSolveConfig = DEFAULT_SOLVE,
) -> np.ndarray:
    """One step of the propagating solution for any family (batched)."""
    if spec.family is Family.ADAMS_BASHFORTH:
        return explicit_step_batch(spec, states, derivs, h)
    if spec.family in (Family.ADAMS_MOULTON, Family.BDF):
        return implicit_step_batch(spec, system, t, states, derivs, h, solve)
    return rk_embedded_step_batch(spec, system, t, states[:, 0], h)[0]


# ------------------------------------------------------- single-trajectory


def step_explicit(
    method: MethodSpec, system: OdeSystem, history: HistoryBuffer, h: float
) -> np.ndarray:
    """Explicit multistep step u_{j+1} = u_j + h sum_i beta_i f(t_{j-i}, u_{j-i})."""
    if method.family is not Family.ADAMS_BASHFORTH:
        raise ValueError(f"step_explicit requires an Adams-Bashforth method, got {method.label}")
    _require_warm(method, history)
    out = explicit_step_batch(
        method, history.state_array()[None], history.deriv_array()[None], h
    )
    return out[0]


def step_implicit(
    method: MethodSpec,
    system: OdeSystem,
    history: HistoryBuffer,
    h: float,
    solve: ImplicitSolveConfig = DEFAULT_SOLVE,
) -> np.ndarray:
    """Implicit multistep step, solved to ``solve.tolerance`` in the max-norm."""
    if method.family not in (Family.ADAMS_MOULTON, Family.BDF):
        raise ValueError(f"step_implicit requires an AM or BDF method, got {method.label}")
    _require_warm(method, history)
    out = implicit_step_batch(
        method,
        system,
        history.current_time,
        history.state_array()[None],
        history.deriv_array()[None],
        h,
        solve,
    )
    return out[0]


def step_rk_embedded(
    method: MethodSpec, system: OdeSystem, t: float, u: np.ndarray, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Both embedded solutions (low order, high order) from shared stages."""
    if method.family is not Family.RUNGE_KUTTA_EMBEDDED:
        raise ValueError(f"step_rk_embedded requires an embedded RK method, got {method.label}")
    low, high = rk_embedded_step_batch(method, system, t, np.asarray(u, dtype=float)[None], h)
    return low[0], high[0]


_STARTUP_RK = None


def _startup_rk() -> MethodSpec:
    global _STARTUP_RK
    if _STARTUP_RK is None:
        _STARTUP_RK = make_method(Family.RUNGE_KUTTA_EMBEDDED, 4)
    return _STARTUP_RK


def startup_states_batch(
    system: OdeSystem, u0: np.ndarray, t0: float, h: float, r: int, backward: bool = False
) -> np.ndarray:
    """History blocks (N, r, d), newest first, generated by order-5 RK steps.

    Forward startup integrates ahead of t0, so the newest block sits at
    t0 + (r-1)h. Backward startup fills blocks behind t0, keeping u0 newest.
    """
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    n, d = u0.shape
    blocks = np.empty((n, r, d))
    rk = _startup_rk()
    if backward:
        blocks[:, 0] = u0
        u, t = u0, t0
        for i in range(1, r):
            u = rk_embedded_step_batch(rk, system, t, u, -h)[1]
            t = t0 - i * h
            blocks[:, i] = u
    else:
        seq = [u0]
        u, t = u0, t0
        for i in range(1, r):
            u = rk_embedded_step_batch(rk, system, t, u, h)[1]
            t = t0 + i * h
            seq.append(u)
        for i in range(r):
            blocks[:, i] = seq[r - 1 - i]
    return blocks


def history_from_blocks(
    system: OdeSystem, blocks: np.ndarray, newest_time: float, h: float
) -> HistoryBuffer:
    """Build a HistoryBuffer from newest-first blocks of shape (r, d)."""
    r = blocks.shape[0]
    states = [np.array(blocks[i]) for i in range(r)]
    derivs = [system(newest_time - i * h, blocks[i]) for i in range(r)]
    return HistoryBuffer(states=states, derivatives=derivs, current_time=newest_time)


def bootstrap_history(
    method: MethodSpec,
    system: OdeSystem,
    u0: np.ndarray,
    t0: float,
    h: float,
    direction: str = "forward",
) -> HistoryBuffer:
    """Produce the r-1 startup values with order-5 RK steps and a warm buffer.

    Forward direction (the default) returns a buffer whose newest state sits
    at t0 + (r-1)h; backward fills history behind u0, leaving it newest at t0.
    """
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    backward = direction == "backward"
    blocks = startup_states_batch(system, u0, t0, h, method.steps, backward=backward)[0]
    newest_time = t0 if backward else t0 + (method.steps - 1) * h
    return history_from_blocks(system, blocks, newest_time, h)


def integrate_problem(
    method: MethodSpec,
    problem: TestProblem,
    h: float,
    t_end: Optional[float] = None,
    solve: ImplicitSolveConfig = DEFAULT_SOLVE,
    rk_output: str = "low",
) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed-step integration of a test problem; returns (times, states).

    The first r-1 values come from the RK startup. For embedded RK methods
    ``rk_output`` selects which of the two orders is propagated.
    """
    if rk_output not in ("low", "high"):
        raise ValueError("rk_output must be 'low' or 'high'")
    t0, tf = problem.t_span[0], float(t_end if t_end is not None else problem.t_span[1])
    n_steps = int(round((tf - t0) / h))
    if abs(t0 + n_steps * h - tf) > 1e-9 * max(1.0, abs(tf)):
        raise ValueError("integration span is not an integral number of steps")
    system = problem.system
    r = method.steps
    d = system.dimension
    times = t0 + h * np.arange(n_steps + 1)
    out = np.empty((n_steps + 1, d))
    out[0] = problem.initial_state

    if method.family is Family.RUNGE_KUTTA_EMBEDDED:
        pick = 0 if rk_output == "low" else 1
        u = np.asarray(problem.initial_state, dtype=float)[None]
        for j in range(n_steps):
            u = rk_embedded_step_batch(method, system, times[j], u, h)[pick]
            out[j + 1] = u[0]
        return times, out

    blocks = startup_states_batch(system, problem.initial_state, t0, h, r)
    for i in range(min(r, n_steps + 1)):
        out[i] = blocks[0, r - 1 - i]
    needs_derivs = bool(np.any(method.beta)) or method.beta_new != 0.0
    for j in range(r - 1, n_steps):
        t = times[j]
        if needs_derivs or method.family is Family.ADAMS_BASHFORTH:
            derivs = np.stack(
                [system.rhs_batch(t - i * h, blocks[:, i]) for i in range(r)], axis=1
            )
        else:
            derivs = np.zeros_like(blocks)
        u_new = advance_batch(method, system, t, blocks, derivs, h, solve)
        blocks = np.concatenate([u_new[:, None, :], blocks[:, : r - 1]], axis=1)
        out[j + 1] = u_new[0]
    return times, out
