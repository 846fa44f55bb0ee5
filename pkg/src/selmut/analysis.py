"""Long-time-behaviour checks on computed trajectories.

Every routine here takes finished artifacts (a Trajectory, a
CarryingProfile, a kernel) and tests a qualitative claim about the
dynamics numerically: total-mass envelopes, persistence certificates
for invadable strategy sets, two Lyapunov-type monotonicity checks,
convergence verdicts toward the optimal Dirac state, and an
exponential-quotient diagnostic for suboptimal strategy mass.

Violations are reported in structured objects, never silently dropped;
only genuine contract violations (undefined logarithms, empty inputs)
raise.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite, log
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import Trajectory
from .errors import (
    CertificateUnavailableError,
    DomainError,
    InputError,
    SearchFailureError,
)
from .kernel import MutationKernel, is_irreducible_into
from .measure import TestFunctionFamily, distance_to_dirac, nearest_optimal_equilibrium
from .vitals import CarryingProfile, RateModel, net_growth, reproduction_number

__all__ = [
    "PermanenceReport",
    "PersistenceCertificate",
    "LyapunovSeries",
    "ConvergenceVerdict",
    "RatioDiagnostic",
    "permanence_check",
    "persistence_certificate",
    "lyapunov_series",
    "choose_c",
    "ass_verdict",
    "ratio_diagnostic",
]

VERDICT_TOL = 1e-3
_MONO_FACTOR = 1e-8
_SLACK_FACTOR = 10.0
_TAIL_FRACTION = 0.2   # final stretch (by time) used for limsup-style stats
_FIT_FRACTION = 0.5    # last half of samples used for the decay-rate fit
_C_FLOOR = 1e-8
_C_GRID = 200


def _as_index_set(subset, space, what: str) -> tuple[int, ...]:
    idx = []
    for q in subset:
        qi = int(q)
        if qi != q or not 0 <= qi < len(space):
            raise InputError(f"{what} contains invalid atom index {q!r}")
        idx.append(qi)
    if not idx:
        raise InputError(f"{what} must be nonempty")
    if len(set(idx)) != len(idx):
        raise InputError(f"{what} contains duplicate atom indices")
    return tuple(sorted(idx))


def _check_traj_profile(traj: Trajectory, profile: CarryingProfile) -> None:
    if traj.space != profile.space:
        raise InputError("trajectory and profile are defined on different spaces")


class Violation(NamedTuple):
    """One envelope breach: value at time t crossed bound by slack
    beyond the allowed integrator tolerance."""

    t: float
    bound: float
    value: float
    slack: float


@dataclass(frozen=True, eq=False)
class PermanenceReport:
    """Total-mass envelope check.

    The total mass of any solution must stay within
    [min(k_low, initial total), max(initial total, K_high)] for all
    time, where k_low/K_high are the smallest/largest carrying
    capacities in the profile.  Bounds are tested with a slack of
    10 * rel_tol * scale so that integrator error is never reported as
    a violation.
    """

    lower: float
    upper: float
    slack_tol: float
    violations: tuple[Violation, ...]
    tail_start_index: int
    tail_max_total: float
    tail_min_total: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def envelopes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Constant per-snapshot envelope series of length n."""
        return np.full(n, self.lower), np.full(n, self.upper)

    def to_dict(self) -> dict:
        return {
            "kind": "permanence",
            "lower": self.lower,
            "upper": self.upper,
            "slack_tol": self.slack_tol,
            "ok": self.ok,
            "violations": [
                {"t": v.t, "bound": v.bound, "value": v.value, "slack": v.slack}
                for v in self.violations
            ],
            "tail_start_index": self.tail_start_index,
            "tail_max_total": self.tail_max_total,
            "tail_min_total": self.tail_min_total,
        }


def permanence_check(traj: Trajectory, profile: CarryingProfile) -> PermanenceReport:
    """Check the permanence envelope on every stored snapshot.

    Also reports the extremes of the total mass over the final 20% of
    the run (by time), which is where the limsup/liminf claims bite.
    """
    _check_traj_profile(traj, profile)
    totals = traj.totals
    mu0 = float(totals[0])
    lower = min(profile.kd, mu0)
    upper = max(mu0, profile.Kd)
    slack_tol = _SLACK_FACTOR * traj.config.rel_tol * max(1.0, upper)

    violations = []
    for i, t in enumerate(traj.times):
        v = float(totals[i])
        if v < lower - slack_tol:
            violations.append(Violation(float(t), lower, v, (lower - v) - slack_tol))
        elif v > upper + slack_tol:
            violations.append(Violation(float(t), upper, v, (v - upper) - slack_tol))

    t_final = float(traj.times[-1])
    t_cut = t_final - _TAIL_FRACTION * (t_final - float(traj.times[0]))
    tail_start = int(np.searchsorted(traj.times, t_cut))
    tail_start = min(tail_start, len(traj) - 1)
    tail = totals[tail_start:]
    return PermanenceReport(
        lower=lower,
        upper=upper,
        slack_tol=slack_tol,
        violations=tuple(violations),
        tail_start_index=tail_start,
        tail_max_total=float(tail.max()),
        tail_min_total=float(tail.min()),
    )


@dataclass(frozen=True, eq=False)
class PersistenceCertificate:
    """Invasion certificate for a strategy set E at low density eps.

    value = min over q in E of R(eps, q) * gamma(q)(E): the worst-case
    per-capita reproduction at density eps, discounted by the mutant
    mass that stays inside E.  A value above 1 certifies that E cannot
    die out through that bottleneck.  irreducible is None when the
    mixing certificate could not be established either way.
    """

    E: tuple[int, ...]
    eps: float
    value: float
    certified: bool
    irreducible: bool | None

    def __bool__(self) -> bool:
        return self.certified

    def to_dict(self) -> dict:
        return {
            "kind": "persistence",
            "E": list(self.E),
            "eps": self.eps,
            "value": self.value,
            "certified": self.certified,
            "irreducible": self.irreducible,
        }


def persistence_certificate(model: RateModel, k: MutationKernel,
                            E, eps: float) -> PersistenceCertificate:
    """Evaluate the low-density balancing inequality on the set E."""
    if not (isinstance(eps, (int, float)) and isfinite(eps) and eps > 0):
        raise InputError(f"eps must be a positive real, got {eps!r}")
    if model.n_atoms != len(k.space):
        raise InputError("kernel and model disagree on atom count")
    idx = _as_index_set(E, k.space, "E")

    value = float("inf")
    for q in idx:
        repro = reproduction_number(model, float(eps), q)
        inside = float(sum(k.gamma[q][j] for j in idx))
        value = min(value, repro * inside)

    try:
        irreducible: bool | None = is_irreducible_into(k, idx, model)
    except CertificateUnavailableError:
        irreducible = None

    return PersistenceCertificate(
        E=idx,
        eps=float(eps),
        value=value,
        certified=bool(value > 1.0),
        irreducible=irreducible,
    )


@dataclass(frozen=True, eq=False)
class LyapunovSeries:
    """A Lyapunov-type function sampled along a trajectory.

    kind "V" is the squared overshoot of the total mass above the top
    carrying capacity; it must be nonincreasing along every solution.
    kind "volterra" is the relative-entropy-like functional against
    the optimal Dirac state plus c times the suboptimal mass; theory
    guarantees decrease only once the total mass has entered the
    attracting region (total <= K_high), so monotonicity is asserted on
    that tail only (tail_start_index).
    """

    kind: str
    times: np.ndarray
    values: np.ndarray
    mono_tol: float
    tail_start_index: int
    first_increase_index: int | None

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64).copy()
        v = np.asarray(self.values, dtype=np.float64).copy()
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def monotone(self) -> bool:
        return self.first_increase_index is None

    def __bool__(self) -> bool:
        return self.monotone

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.times, self.values):
                fh.write("%.17g,%.17g\n" % (t, v))

    def to_dict(self) -> dict:
        return {
            "kind": "lyapunov",
            "function": self.kind,
            "monotone": self.monotone,
            "first_increase_index": self.first_increase_index,
            "mono_tol": self.mono_tol,
            "tail_start_index": self.tail_start_index,
            "n_samples": int(self.times.shape[0]),
            "initial": float(self.values[0]),
            "final": float(self.values[-1]),
        }


def _first_increase(values: np.ndarray, start: int, tol: float) -> int | None:
    for i in range(max(start, 0), values.shape[0] - 1):
        if values[i + 1] > values[i] + tol:
            return i + 1
    return None


def lyapunov_series(traj: Trajectory, profile: CarryingProfile, kind: str,
                    params=None) -> LyapunovSeries:
    """Evaluate a Lyapunov-type function along the trajectory.

    Args:
        kind: "V" or "volterra".
        params: For "volterra", a (qd, Qd, c) triple: the optimal atom
            index, the near-optimal index set, and the weight on the
            suboptimal mass (see choose_c).  Ignored for "V".

    Raises:
        DomainError: Volterra kind with zero weight at qd anywhere
            along the trajectory (the logarithm is undefined).
    """
    _check_traj_profile(traj, profile)
    kind_norm = str(kind).strip().lower()
    totals = traj.totals
    Kd = profile.Kd

    if kind_norm == "v":
        over = np.maximum(totals - Kd, 0.0)
        values = over * over
        tail_start = 0
        label = "V"
    elif kind_norm == "volterra":
        if params is None:
            raise InputError("volterra kind requires params (qd, Qd, c)")
        qd, Qd, c = params
        qd = int(qd)
        if not 0 <= qd < len(traj.space):
            raise InputError(f"invalid atom index qd={qd}")
        Qd_idx = _as_index_set(Qd, traj.space, "Qd")
        if qd not in Qd_idx:
            raise InputError("qd must belong to Qd")
        if not (isfinite(c) and c > 0):
            raise InputError(f"c must be a positive real, got {c!r}")
        if Kd <= 0:
            raise InputError("volterra kind needs a positive top carrying capacity")
        wq = traj.weights[:, qd]
        if np.any(wq <= 0.0):
            bad = int(np.argmax(wq <= 0.0))
            raise DomainError(
                f"zero weight at atom {qd} at t={traj.times[bad]:.6g}: "
                "the Volterra functional is undefined"
            )
        outside = [j for j in range(len(traj.space)) if j not in Qd_idx]
        out_mass = traj.weights[:, outside].sum(axis=1) if outside else np.zeros(len(traj))
        lnKd = log(Kd)
        values = wq + Kd * (lnKd - np.log(wq)) + c * out_mass
        label = "volterra"
    else:
        raise InputError(f"kind must be 'V' or 'volterra', got {kind!r}")

    scale = float(np.max(np.abs(values))) if values.size else 0.0
    mono_tol = _MONO_FACTOR * (1.0 + scale)

    if kind_norm == "volterra":
        # decrease is guaranteed only after the total mass has entered
        # the region total <= Kd; find the first index from which it
        # never leaves again
        inside = totals <= Kd + mono_tol
        tail_start = len(traj)
        for i in range(len(traj) - 1, -1, -1):
            if inside[i]:
                tail_start = i
            else:
                break

    first_inc = _first_increase(values, tail_start, mono_tol)
    return LyapunovSeries(
        kind=label,
        times=traj.times,
        values=values,
        mono_tol=mono_tol,
        tail_start_index=tail_start,
        first_increase_index=first_inc,
    )


def choose_c(model: RateModel, profile: CarryingProfile, qd: int) -> float:
    """Largest admissible weight for the Volterra functional's
    suboptimal-mass term.

    Halving search from 1: returns the first c such that
    c * G(x, q) - G(x, qd) < 0 for every suboptimal atom q and every x
    on a 200-point grid over [0, K_high], where G is the net growth
    rate.  If every atom is optimal the constraint is vacuous and 1 is
    returned.

    Raises:
        SearchFailureError: No admissible c >= 1e-8 exists on the grid.
    """
    qd = int(qd)
    if not 0 <= qd < len(profile.space):
        raise InputError(f"invalid atom index qd={qd}")
    if qd not in profile.Qd:
        raise InputError(f"atom {qd} is not optimal in this profile")
    if profile.Kd <= 0:
        raise InputError("choose_c needs a positive top carrying capacity")
    if model.n_atoms != len(profile.space):
        raise InputError("model and profile disagree on atom count")

    outside = [q for q in range(len(profile.space)) if q not in profile.Qd]
    if not outside:
        return 1.0

    xs = np.linspace(0.0, profile.Kd, _C_GRID)
    g_opt = np.array([net_growth(model, float(x), qd) for x in xs])
    g_out = {q: np.array([net_growth(model, float(x), q) for x in xs])
             for q in outside}

    c = 1.0
    while c >= _C_FLOOR:
        if all(np.all(c * g_out[q] - g_opt < 0.0) for q in outside):
            return c
        c *= 0.5
    raise SearchFailureError(
        f"no admissible c >= {_C_FLOOR:g}: the net growth of some "
        "suboptimal atom dominates the optimal one on [0, K_high]"
    )


@dataclass(frozen=True, eq=False)
class ConvergenceVerdict:
    """Did the run settle at the optimal Dirac state?

    converged requires both the weak-norm distance to the target
    equilibrium and the mass outside the optimal set to fall below the
    tolerance at the final snapshot.
    """

    target_atom: int
    target_mass: float
    Qd: tuple[int, ...]
    final_distance: float
    mass_outside: float
    tol: float
    converged: bool

    def __bool__(self) -> bool:
        return self.converged

    def to_dict(self) -> dict:
        return {
            "kind": "ass",
            "target_atom": self.target_atom,
            "target_mass": self.target_mass,
            "Qd": list(self.Qd),
            "final_distance": self.final_distance,
            "mass_outside": self.mass_outside,
            "tol": self.tol,
            "converged": self.converged,
        }


def ass_verdict(traj: Trajectory, profile: CarryingProfile,
                fam: TestFunctionFamily,
                verdict_tol: float = VERDICT_TOL) -> ConvergenceVerdict:
    """Measure the final state against the optimal equilibrium.

    With a unique optimal atom the target is its Dirac state at mass
    K_high; with ties the distance to the nearest equilibrium supported
    on the optimal set is reported instead.
    """
    _check_traj_profile(traj, profile)
    if not (isfinite(verdict_tol) and verdict_tol > 0):
        raise InputError("verdict_tol must be positive")
    final = traj.final_state()
    Qd = profile.Qd
    qd = min(Qd)
    if len(Qd) == 1:
        dist = distance_to_dirac(final, qd, profile.Kd, fam)
    else:
        _, dist = nearest_optimal_equilibrium(final, Qd, profile.Kd, fam)
    outside = [j for j in range(len(traj.space)) if j not in Qd]
    mass_out = float(final.weights[outside].sum()) if outside else 0.0
    return ConvergenceVerdict(
        target_atom=qd,
        target_mass=profile.Kd,
        Qd=Qd,
        final_distance=float(dist),
        mass_outside=mass_out,
        tol=float(verdict_tol),
        converged=bool(dist <= verdict_tol and mass_out <= verdict_tol),
    )


@dataclass(frozen=True, eq=False)
class RatioDiagnostic:
    """The quotient z(t) = mass(U)^xi / mass(V) along a trajectory.

    When V carries the optimal strategies and U a suboptimal set, z is
    expected to decay exponentially; slope is the least-squares slope
    of log z over the fitted tail (-inf if z vanished identically
    there).
    """

    U: tuple[int, ...]
    V: tuple[int, ...]
    xi: float
    times: np.ndarray
    values: np.ndarray
    fit_start_index: int
    n_fit: int
    slope: float
    intercept: float

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64).copy()
        v = np.asarray(self.values, dtype=np.float64).copy()
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t,value\n")
            for t, v in zip(self.times, self.values):
                fh.write("%.17g,%.17g\n" % (t, v))

    def to_dict(self) -> dict:
        return {
            "kind": "ratio",
            "U": list(self.U),
            "V": list(self.V),
            "xi": self.xi,
            "slope": self.slope,
            "intercept": self.intercept,
            "fit_start_index": self.fit_start_index,
            "n_fit": self.n_fit,
            "final": float(self.values[-1]),
        }


def ratio_diagnostic(traj: Trajectory, U, V, xi: float) -> RatioDiagnostic:
    """Track mass(U)^xi / mass(V) and fit its exponential decay rate.

    The fit uses the last half of the samples; nonpositive values of z
    (the U mass can be snapped to exact zero) are excluded from the
    fit, and a tail with fewer than two positive samples reports slope
    -inf, meaning the quotient already vanished.

    Raises:
        DomainError: The V mass is zero initially or hits zero along
            the run (the quotient is undefined there).
    """
    if not (isinstance(xi, (int, float)) and isfinite(xi) and xi > 0):
        raise InputError(f"xi must be a positive real, got {xi!r}")
    U_idx = _as_index_set(U, traj.space, "U")
    V_idx = _as_index_set(V, traj.space, "V")

    y = traj.weights[:, U_idx].sum(axis=1)
    x = traj.weights[:, V_idx].sum(axis=1)
    if x[0] <= 0.0:
        raise DomainError("mass on V is zero at t=0: quotient undefined")
    if np.any(x <= 0.0):
        bad = int(np.argmax(x <= 0.0))
        raise DomainError(
            f"mass on V hit zero at t={traj.times[bad]:.6g}: quotient undefined"
        )
    z = np.power(y, xi) / x

    n = len(traj)
    fit_start = n // 2
    t_tail = traj.times[fit_start:]
    z_tail = z[fit_start:]
    positive = z_tail > 0.0
    n_fit = int(np.count_nonzero(positive))
    if n_fit < 2:
        slope, intercept = float("-inf"), float("-inf")
    else:
        coef = np.polyfit(t_tail[positive], np.log(z_tail[positive]), 1)
        slope, intercept = float(coef[0]), float(coef[1])

    return RatioDiagnostic(
        U=U_idx,
        V=V_idx,
        xi=float(xi),
        times=traj.times,
        values=z,
        fit_start_index=fit_start,
        n_fit=n_fit,
        slope=slope,
        intercept=intercept,
    )
