"""Time evolution of the selection-mutation system.

The state is a nonnegative weight vector w over the atoms of a strategy
space; it evolves by

    dw_j/dt = sum_i B(s, q_i) w_i gamma[i][j] - D(s, q_j) w_j,
    s = sum_k w_k.

This module provides the rate vector, a positivity-preserving adaptive
Runge-Kutta integrator (Dormand-Prince 5(4) with PI step control), a
consistency check against the exponential solution formula available
under pure selection, and Newton-based equilibrium location with
finite-difference Jacobians for small-mutation continuation studies.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import _backend, _pycore
from .eig import spectral_bound as _spectral_bound
from .errors import InputError, PreconditionError, StiffnessError
from .kernel import MutationKernel, blend_toward, identity_kernel, kernel_distance
from .measure import AtomicMeasure, StrategySpace
from .vitals import RateModel

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "EquilibriumResult",
    "ContinuationEntry",
    "vector_field",
    "integrate",
    "verify_integral_representation",
    "find_equilibrium",
    "jacobian_at",
    "continuation",
]

# Hairer-style PI step controller constants.
_SAFE = 0.9
_BETA = 0.04
_EXPO1 = 0.2 - _BETA * 0.75
_FACC1 = 5.0   # steepest allowed shrink: h/5
_FACC2 = 0.1   # steepest allowed growth: 10h

_NEWTON_MAX_ITER = 100
_ARMIJO = 1e-4
_LINESEARCH_TRIES = 40
_UNDERFLOW_GUARD = 1e-250


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive integrator settings.

    Attributes:
        t_end: Final time (integration always starts at 0).
        rel_tol: Relative tolerance of the mixed error norm.
        abs_tol: Absolute tolerance of the mixed error norm.
        dt_init: Initial trial step.
        dt_min: Controller steps below this raise StiffnessError.
        clamp_floor: Proposals with a weight below -clamp_floor are
            rejected and the step halved; weights in [-clamp_floor, 0)
            on accepted steps are snapped to 0.
        dt_out: Optional dense-output interval; accepted steps are
            clipped so snapshots land on multiples of dt_out.
    """

    t_end: float
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dt_init: float = 1e-2
    dt_min: float = 1e-12
    clamp_floor: float = 1e-12
    dt_out: float | None = None

    def __post_init__(self) -> None:
        for name in ("t_end", "rel_tol", "abs_tol", "dt_init", "dt_min",
                     "clamp_floor"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and isfinite(v) and v > 0):
                raise InputError(f"{name} must be a positive finite real, got {v!r}")
        if self.dt_min >= self.dt_init:
            raise InputError(
                f"dt_min ({self.dt_min}) must be smaller than dt_init ({self.dt_init})"
            )
        if self.dt_out is not None and not (
            isinstance(self.dt_out, (int, float))
            and isfinite(self.dt_out)
            and self.dt_out > 0
        ):
            raise InputError(f"dt_out must be positive or None, got {self.dt_out!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A completed integration: every accepted step, in order.

    Attributes:
        space: Strategy space of the run.
        times: (n,) strictly increasing snapshot times, starting at 0.
        weights: (n, N) nonnegative weights, one row per snapshot.
        config: Integrator settings that produced the run.
        pure_selection: Whether the run used the identity kernel.
        n_accepted: Accepted step count.
        n_rejected: Rejected trial count (error or positivity).
        min_weight_seen: Smallest proposed weight over accepted steps,
            before snapping (>= -clamp_floor by the acceptance rule).
    """

    space: StrategySpace
    times: np.ndarray
    weights: np.ndarray
    config: IntegratorConfig
    pure_selection: bool
    n_accepted: int
    n_rejected: int
    min_weight_seen: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if times.ndim != 1 or weights.ndim != 2:
            raise InputError("times must be 1-D and weights 2-D")
        if weights.shape != (times.shape[0], len(self.space)):
            raise InputError(
                f"weights shape {weights.shape} does not match "
                f"{times.shape[0]} snapshots x {len(self.space)} atoms"
            )
        if times.shape[0] == 0:
            raise InputError("trajectory needs at least one snapshot")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(weights)):
            raise InputError("trajectory entries must be finite")
        if np.any(np.diff(times) <= 0):
            raise InputError("times must be strictly increasing")
        if np.any(weights < 0):
            raise InputError("trajectory weights must be nonnegative")
        times = times.copy()
        weights = weights.copy()
        times.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def totals(self) -> np.ndarray:
        """Total mass at each snapshot."""
        return self.weights.sum(axis=1)

    def state_at(self, index: int) -> AtomicMeasure:
        """The population measure at snapshot ``index``."""
        return AtomicMeasure(self.space, self.weights[index])

    def final_state(self) -> AtomicMeasure:
        return self.state_at(len(self) - 1)

    def to_csv(self, path) -> None:
        """Write columns t, total, then one column per atom id."""
        totals = self.totals
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t,total," + ",".join(self.space.ids) + "\n")
            for i in range(len(self)):
                row = [self.times[i], totals[i], *self.weights[i]]
                fh.write(",".join("%.17g" % v for v in row) + "\n")


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Outcome of a Newton solve for a rest point.

    converged implies residual <= the newton_tol that was requested.
    """

    x_star: AtomicMeasure
    residual: float
    jacobian: np.ndarray
    spectral_bound: float
    converged: bool
    n_iter: int

    def __post_init__(self) -> None:
        jac = np.asarray(self.jacobian, dtype=np.float64).copy()
        jac.flags.writeable = False
        object.__setattr__(self, "jacobian", jac)


class ContinuationEntry(NamedTuple):
    eps: float
    result: EquilibriumResult
    kernel_distance: float


def _stepping_context(k: MutationKernel, model: RateModel,
                      backend: str | None = None):
    """Pick a backend module and build its context for (kernel, model)."""
    spec = model.backend_spec()
    if spec is None:
        # Custom Python models can only run on the pure-Python core.
        if backend == "compiled":
            raise InputError(
                "models without a tabulated/parametric spec cannot run on "
                "the compiled core")
        return _pycore, _pycore.make_context(k.gamma, k.is_identity(), None, model)
    mod = _backend.get_backend(backend)
    return mod, mod.make_context(k.gamma, k.is_identity(), spec, None)


def _check_shared_space(mu_space: StrategySpace, k: MutationKernel,
                        model: RateModel) -> None:
    if k.space != mu_space:
        raise InputError("measure and kernel are defined on different spaces")
    if model.n_atoms != len(mu_space):
        raise InputError(
            f"model covers {model.n_atoms} atoms but the space has {len(mu_space)}"
        )


def vector_field(mu: AtomicMeasure, k: MutationKernel,
                 model: RateModel) -> np.ndarray:
    """Instantaneous weight rates at the state mu.

    Returns the signed vector dw/dt; at any atom with zero weight the
    rate is nonnegative (mutation inflow only), which is what keeps the
    nonnegative cone invariant.
    """
    _check_shared_space(mu.space, k, model)
    mod, ctx = _stepping_context(k, model)
    w = np.ascontiguousarray(mu.weights, dtype=np.float64)
    out = np.empty_like(w)
    mod.rhs(ctx, w, out)
    return out


def integrate(mu0: AtomicMeasure, k: MutationKernel, model: RateModel,
              cfg: IntegratorConfig, *, backend: str | None = None) -> Trajectory:
    """Integrate the system from mu0 over [0, cfg.t_end].

    Every accepted step is stored.  Step acceptance needs both the
    embedded error estimate <= 1 in the mixed norm and no proposed
    weight below -clamp_floor; positivity rejections halve the step.
    Accepted weights in [-clamp_floor, 0) are snapped to 0 (and the
    cached stage derivative refreshed, preserving FSAL consistency).

    backend forces the stepping core ("compiled" or "python"); by
    default the compiled core is used when installed.  Both produce
    bit-identical trajectories.

    Raises:
        StiffnessError: If the controller step falls below cfg.dt_min.
            The partial trajectory is attached to the exception.
    """
    _check_shared_space(mu0.space, k, model)
    if not isinstance(cfg, IntegratorConfig):
        raise InputError("cfg must be an IntegratorConfig")
    mod, ctx = _stepping_context(k, model, backend)
    pure = k.is_identity()
    n = len(mu0.space)

    w = np.ascontiguousarray(mu0.weights, dtype=np.float64).copy()
    k1 = np.empty(n)
    w5 = np.empty(n)
    k7 = np.empty(n)
    mod.rhs(ctx, w, k1)

    t = 0.0
    t_end = float(cfg.t_end)
    tiny = 1e-14 * max(1.0, t_end)
    rel = cfg.rel_tol
    atol = cfg.abs_tol
    floor = cfg.clamp_floor
    dt_out = cfg.dt_out
    next_out = dt_out if dt_out is not None else 0.0

    times = [0.0]
    rows = [w.copy()]
    h = cfg.dt_init
    facold = 1e-4
    n_acc = 0
    n_rej = 0
    min_seen = float(w.min())
    just_rejected = False

    def _partial() -> Trajectory:
        return Trajectory(
            space=mu0.space,
            times=np.array(times),
            weights=np.array(rows),
            config=cfg,
            pure_selection=pure,
            n_accepted=n_acc,
            n_rejected=n_rej,
            min_weight_seen=min_seen,
        )

    while t_end - t > tiny:
        if h < cfg.dt_min:
            raise StiffnessError(
                f"step size fell below dt_min={cfg.dt_min:g} at t={t:.6g} "
                f"({n_acc} accepted / {n_rej} rejected steps)",
                trajectory=_partial(),
            )
        h_step = h
        if t + h_step > t_end:
            h_step = t_end - t
        if dt_out is not None:
            while next_out <= t + tiny:
                next_out += dt_out
            if t + h_step > next_out:
                h_step = next_out - t

        try:
            err, minw = mod.try_step(ctx, w, k1, h_step, rel, atol, w5, k7)
        except OverflowError:
            err, minw = float("inf"), 0.0

        if err <= 1.0 and minw >= -floor:
            # accepted
            t = t + h_step
            w, w5 = w5, w
            if minw < min_seen:
                min_seen = minw
            snapped = False
            for j in range(n):
                if w[j] < 0.0:
                    w[j] = 0.0
                    snapped = True
            if snapped:
                mod.rhs(ctx, w, k1)
            else:
                k1, k7 = k7, k1
            times.append(t)
            rows.append(w.copy())
            n_acc += 1
            fac11 = err ** _EXPO1
            fac = fac11 / (facold ** _BETA)
            fac = max(_FACC2, min(_FACC1, fac / _SAFE))
            hnew = h_step / fac
            if just_rejected and hnew > h_step:
                hnew = h_step
            h = hnew
            facold = max(err, 1e-4)
            just_rejected = False
        else:
            n_rej += 1
            if err <= 1.0:
                # positivity rejection: the error test passed but a
                # weight undershot the floor
                h = h_step / 2.0
            elif isfinite(err):
                h = h_step / min(_FACC1, (err ** _EXPO1) / _SAFE)
            else:
                h = h_step / _FACC1
            just_rejected = True

    return _partial()


def verify_integral_representation(traj: Trajectory,
                                   model: RateModel) -> float:
    """Worst relative mismatch against the pure-selection solution formula.

    Under the identity kernel each weight satisfies
    w_j(t) = w_j(0) exp(int_0^t [B(s(tau), q_j) - D(s(tau), q_j)] dtau);
    the exponent is integrated by the trapezoid rule on the stored
    snapshot grid and compared against the stored weights.  Atoms with
    zero initial weight are skipped, as are points where both the
    stored and the predicted weight are below 1e-250 (pure underflow).

    Raises:
        PreconditionError: If the trajectory was not produced with the
            identity kernel; the formula does not hold under mutation.
    """
    if not traj.pure_selection:
        raise PreconditionError(
            "integral-representation check requires a pure-selection "
            "(identity kernel) trajectory"
        )
    if model.n_atoms != len(traj.space):
        raise InputError("model and trajectory disagree on atom count")
    times = traj.times
    totals = traj.totals
    nt = len(traj)
    n = len(traj.space)
    growth = np.empty((nt, n))
    for ti in range(nt):
        s = float(totals[ti])
        for j in range(n):
            growth[ti, j] = model.B(s, j) - model.D(s, j)
    exponent = np.zeros((nt, n))
    if nt > 1:
        dt = np.diff(times)[:, None]
        exponent[1:] = np.cumsum(0.5 * dt * (growth[1:] + growth[:-1]), axis=0)

    w0 = traj.weights[0]
    worst = 0.0
    for j in range(n):
        if w0[j] <= 0.0:
            continue
        predicted = w0[j] * np.exp(exponent[:, j])
        actual = traj.weights[:, j]
        denom = np.maximum(np.abs(actual), np.abs(predicted))
        live = denom >= _UNDERFLOW_GUARD
        if not np.any(live):
            continue
        rel = np.abs(actual[live] - predicted[live]) / denom[live]
        worst = max(worst, float(rel.max()))
    return worst


def _field_on_weights(k: MutationKernel, model: RateModel) -> Callable[[np.ndarray], np.ndarray]:
    mod, ctx = _stepping_context(k, model)

    def f(x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        mod.rhs(ctx, np.ascontiguousarray(x, dtype=np.float64), out)
        return out

    return f


def _fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Finite-difference Jacobian restricted to the nonnegative cone.

    Central differences with step h = max(1e-6, 1e-6*max|x|); columns
    whose coordinate sits within h of the boundary use the one-sided
    second-order stencil (-3f(x) + 4f(x+h) - f(x+2h)) / (2h) so that no
    probe leaves the cone.
    """
    n = x.shape[0]
    h = max(1e-6, 1e-6 * float(np.max(np.abs(x))) if n else 1e-6)
    jac = np.empty((n, n))
    f0 = None
    for j in range(n):
        if x[j] >= h:
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            col = (f(xp) - f(xm)) / (2.0 * h)
        else:
            if f0 is None:
                f0 = f(x)
            x1 = x.copy()
            x2 = x.copy()
            x1[j] += h
            x2[j] += 2.0 * h
            col = (-3.0 * f0 + 4.0 * f(x1) - f(x2)) / (2.0 * h)
        jac[:, j] = col
    return jac


def jacobian_at(k: MutationKernel, model: RateModel,
                x) -> tuple[np.ndarray, float]:
    """Jacobian of the weight-rate field at x, plus its spectral bound.

    Args:
        x: Nonnegative weights (array-like or AtomicMeasure).

    Returns:
        (J, bound) where J is the N x N finite-difference Jacobian and
        bound is the largest real part over its eigenvalues (computed
        by the in-repo QR iteration).
    """
    if isinstance(x, AtomicMeasure):
        x = x.weights
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_atoms:
        raise InputError(f"x must be a length-{model.n_atoms} vector")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise InputError("x must be finite and nonnegative")
    if len(k.space) != model.n_atoms:
        raise InputError("kernel and model disagree on atom count")
    f = _field_on_weights(k, model)
    jac = _fd_jacobian(f, x)
    return jac, _spectral_bound(jac)


def find_equilibrium(k: MutationKernel, model: RateModel, x_init,
                     newton_tol: float = 1e-10) -> EquilibriumResult:
    """Damped Newton search for a rest point of the weight dynamics.

    Iterates are projected onto the nonnegative cone after each update
    (equilibria generically sit on its boundary), with a backtracking
    line search on the max-norm residual.  Non-convergence within 100
    iterations is reported via converged=False on the best iterate,
    not raised.
    """
    if not (isfinite(newton_tol) and newton_tol > 0):
        raise InputError("newton_tol must be positive")
    if isinstance(x_init, AtomicMeasure):
        if x_init.space != k.space:
            raise InputError("x_init and kernel live on different spaces")
        x = np.array(x_init.weights, dtype=np.float64)
    else:
        x = np.asarray(x_init, dtype=np.float64).copy()
    if x.ndim != 1 or x.shape[0] != model.n_atoms:
        raise InputError(f"x_init must be a length-{model.n_atoms} vector")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise InputError("x_init must be finite and nonnegative")
    if len(k.space) != model.n_atoms:
        raise InputError("kernel and model disagree on atom count")

    f = _field_on_weights(k, model)
    fx = f(x)
    res = float(np.max(np.abs(fx)))
    n_iter = 0
    for _ in range(_NEWTON_MAX_ITER):
        if res <= newton_tol:
            break
        jac = _fd_jacobian(f, x)
        try:
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -fx, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        lam = 1.0
        improved = False
        for _ in range(_LINESEARCH_TRIES):
            x_new = np.maximum(x + lam * step, 0.0)
            f_new = f(x_new)
            res_new = float(np.max(np.abs(f_new)))
            if res_new <= (1.0 - _ARMIJO * lam) * res or res_new <= newton_tol:
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
        x, fx, res = x_new, f_new, res_new
        n_iter += 1

    jac, bound = jacobian_at(k, model, x)
    return EquilibriumResult(
        x_star=AtomicMeasure(k.space, x),
        residual=res,
        jacobian=jac,
        spectral_bound=bound,
        converged=bool(res <= newton_tol),
        n_iter=n_iter,
    )


def continuation(k_target: MutationKernel, model: RateModel,
                 eps_list: Sequence[float], *,
                 k_base: MutationKernel | None = None,
                 x_init=None,
                 newton_tol: float = 1e-10) -> list[ContinuationEntry]:
    """Equilibrium branch along gamma_eps = (1-eps)*base + eps*target.

    Follows the rest point as the mutation strength eps shrinks toward
    pure baseline behaviour, warm-starting each Newton solve from the
    previous solution.  The base kernel defaults to the identity
    (selection-only limit); pass a directed kernel to study that limit
    instead.

    Args:
        eps_list: Strictly decreasing blend strengths in [0, 1].

    Returns:
        One ContinuationEntry per eps: (eps, EquilibriumResult,
        kernel distance from gamma_eps to the base kernel).
    """
    if k_base is None:
        k_base = identity_kernel(k_target.space)
    if k_base.space != k_target.space:
        raise InputError("base and target kernels live on different spaces")
    eps_values = [float(e) for e in eps_list]
    if not eps_values:
        raise InputError("eps_list must be nonempty")
    for e in eps_values:
        if not (isfinite(e) and 0.0 <= e <= 1.0):
            raise InputError(f"eps values must lie in [0, 1], got {e!r}")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise InputError("eps_list must be strictly decreasing")

    if x_init is None:
        base_res = find_equilibrium(k_base, model,
                                    np.ones(model.n_atoms), newton_tol)
        x_prev = base_res.x_star.weights
    elif isinstance(x_init, AtomicMeasure):
        x_prev = x_init.weights
    else:
        x_prev = np.asarray(x_init, dtype=np.float64)

    entries: list[ContinuationEntry] = []
    for eps in eps_values:
        g_eps = blend_toward(k_base, k_target, eps)
        result = find_equilibrium(g_eps, model, x_prev, newton_tol)
        dist = kernel_distance(g_eps, k_base)
        entries.append(ContinuationEntry(eps, result, dist))
        if result.converged:
            x_prev = result.x_star.weights
    return entries
