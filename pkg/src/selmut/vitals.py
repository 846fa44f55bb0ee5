"""Birth/death rate models and the fitness quantities derived from them.

A rate model supplies two evaluations per atom q:

    B(s, q)  birth rate at total population s   (nonincreasing in s)
    D(s, q)  death rate at total population s   (positive, nondecreasing)

Derived quantities:

    R(s, q) = B(s, q) / D(s, q)     reproduction number
    R0(q)   = R(0, q)               basic reproduction number
    K(q)                            carrying capacity: root of R(., q) = 1,
                                    defined as 0 when R0(q) <= 1
    G(s, q) = B(s, q) - D(s, q)     net growth rate

The carrying profile collects K over all atoms together with its extremes
and the set of maximizers; relative fitness compares a rival's reproduction
number at the resident's carrying capacity.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, InvalidModelError, NoFiniteRootError
from .measure import StrategySpace

__all__ = [
    "RateModel",
    "RickerModel",
    "LogisticModel",
    "TabulatedModel",
    "CarryingProfile",
    "ESSReport",
    "SuperiorityReport",
    "reproduction_number",
    "carrying_capacity",
    "build_profile",
    "relative_fitness",
    "is_ess",
    "check_superiority",
    "net_growth",
]

# Root-finding parameters for carrying capacities.
TOL_ROOT = 1e-10          # reproduction-number residual certificate
S_MAX = 1e6               # bracket-expansion cap (population units)
_BISECT_WIDTH = 1e-12     # interval width target (relative to max(1, root))

# Default number of monotonicity samples per atom in the model audit.
AUDIT_SAMPLES = 100


# ---------------------------------------------------------------------------
# Rate models
# ---------------------------------------------------------------------------


class RateModel:
    """Contract for birth/death rates on a finite strategy space.

    Subclasses implement scalar ``B(s, q)`` / ``D(s, q)`` with q an atom
    index.  ``death_floor`` declares the positive lower bound on D(0, .).
    ``backend_spec`` lets the stepping core recognize built-in families;
    custom models return None and are integrated through the generic
    Python path.
    """

    n_atoms: int
    death_floor: float = 0.0

    def B(self, s: float, q: int) -> float:
        raise NotImplementedError

    def D(self, s: float, q: int) -> float:
        raise NotImplementedError

    def backend_spec(self):
        return None


class RickerModel(RateModel):
    """Exponentially crowding-suppressed births, exponential deaths.

    B(s, q) = kappa_q * exp(-eta_q * s)
    D(s, q) = exp(theta * s)            (theta shared across atoms)

    Closed forms: R(s, q) = kappa_q * exp(-(eta_q + theta) s), so
    K(q) = ln(kappa_q) / (eta_q + theta) when kappa_q > 1, else 0.
    """

    def __init__(self, kappa: Sequence[float], eta: Sequence[float], theta: float):
        kappa = [float(x) for x in kappa]
        eta = [float(x) for x in eta]
        if len(kappa) != len(eta):
            raise InputError("kappa and eta must have one entry per atom")
        if any(x <= 0.0 for x in kappa):
            raise InputError("kappa must be positive (birth rates vanish otherwise)")
        if any(x < 0.0 for x in eta) or theta < 0.0:
            raise InputError("eta and theta must be nonnegative")
        self.kappa = tuple(kappa)
        self.eta = tuple(eta)
        self.theta = float(theta)
        self.n_atoms = len(kappa)
        self.death_floor = 1.0  # D(0, q) = 1 exactly

    def B(self, s: float, q: int) -> float:
        return self.kappa[q] * math.exp(-self.eta[q] * s)

    def D(self, s: float, q: int) -> float:
        return math.exp(self.theta * s)

    def backend_spec(self):
        return ("ricker", np.array(self.kappa), np.array(self.eta), self.theta)


class LogisticModel(RateModel):
    """Constant births, linearly crowding-increased deaths.

    B(s, q) = r_q
    D(s, q) = d_q + a_q * s     with d_q > 0 (keeps D(0, .) positive)

    Closed form: K(q) = (r_q - d_q) / a_q when r_q > d_q, else 0.
    """

    def __init__(self, r: Sequence[float], d: Sequence[float], a: Sequence[float]):
        r = [float(x) for x in r]
        d = [float(x) for x in d]
        a = [float(x) for x in a]
        if not (len(r) == len(d) == len(a)):
            raise InputError("r, d, a must have one entry per atom")
        if any(x < 0.0 for x in r):
            raise InputError("birth rates r must be nonnegative")
        if any(x <= 0.0 for x in d):
            raise InputError("baseline death rates d must be positive")
        if any(x < 0.0 for x in a):
            raise InputError("crowding coefficients a must be nonnegative")
        self.r = tuple(r)
        self.d = tuple(d)
        self.a = tuple(a)
        self.n_atoms = len(r)
        self.death_floor = min(d)

    def B(self, s: float, q: int) -> float:
        return self.r[q]

    def D(self, s: float, q: int) -> float:
        return self.d[q] + self.a[q] * s

    def backend_spec(self):
        return ("logistic", np.array(self.r), np.array(self.d), np.array(self.a))


class TabulatedModel(RateModel):
    """Per-atom birth/death samples on a shared s-grid, linearly interpolated.

    Evaluations clamp to the end samples outside the grid (constant
    extension), so the integrator may probe beyond the tabulated range
    without extrapolation artifacts.
    """

    def __init__(self, s_grid: Sequence[float], B_table, D_table):
        s = np.asarray(s_grid, dtype=np.float64)
        Bt = np.asarray(B_table, dtype=np.float64)
        Dt = np.asarray(D_table, dtype=np.float64)
        if s.ndim != 1 or s.size < 2:
            raise InputError("s-grid needs at least two samples")
        if np.any(np.diff(s) <= 0.0):
            raise InputError("s-grid must be strictly increasing")
        if Bt.ndim != 2 or Bt.shape != Dt.shape or Bt.shape[1] != s.size:
            raise InputError("tables must be (n_atoms, len(s_grid)) and congruent")
        if np.any(~np.isfinite(Bt)) or np.any(~np.isfinite(Dt)):
            raise InputError("table entries must be finite")
        if np.any(Bt < 0.0):
            raise InputError("birth samples must be nonnegative")
        if np.any(Dt <= 0.0):
            raise InvalidModelError("death samples must be strictly positive")
        self.s_grid = s
        self.B_table = Bt
        self.D_table = Dt
        self.n_atoms = Bt.shape[0]
        self.death_floor = float(Dt[:, 0].min())
        for arr in (self.s_grid, self.B_table, self.D_table):
            arr.flags.writeable = False

    def _interp(self, table: np.ndarray, s: float, q: int) -> float:
        grid = self.s_grid
        if s <= grid[0]:
            return float(table[q, 0])
        if s >= grid[-1]:
            return float(table[q, -1])
        lo = int(np.searchsorted(grid, s, side="right") - 1)
        s0, s1 = grid[lo], grid[lo + 1]
        y0, y1 = table[q, lo], table[q, lo + 1]
        return float(y0 + (y1 - y0) * ((s - s0) / (s1 - s0)))

    def B(self, s: float, q: int) -> float:
        return self._interp(self.B_table, s, q)

    def D(self, s: float, q: int) -> float:
        return self._interp(self.D_table, s, q)

    def backend_spec(self):
        return ("tabulated", self.s_grid, self.B_table, self.D_table)

    @staticmethod
    def from_csv(path, space: StrategySpace) -> "TabulatedModel":
        """Load from CSV with columns s, atom_id, B, D.

        Every atom of ``space`` must be sampled on the same s-grid.
        """
        rows = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            need = {"s", "atom_id", "B", "D"}
            if reader.fieldnames is None or not need.issubset(reader.fieldnames):
                raise InputError(f"CSV must have columns {sorted(need)}")
            for rec in reader:
                rows.setdefault(str(rec["atom_id"]), []).append(
                    (float(rec["s"]), float(rec["B"]), float(rec["D"]))
                )
        grids = []
        Bt, Dt = [], []
        for atom_id in space.ids:
            if atom_id not in rows:
                raise InputError(f"CSV has no samples for atom {atom_id!r}")
            samples = sorted(rows[atom_id])
            grids.append([s for s, _, _ in samples])
            Bt.append([b for _, b, _ in samples])
            Dt.append([d for _, _, d in samples])
        for g in grids[1:]:
            if g != grids[0]:
                raise InputError("all atoms must share the same s-grid")
        return TabulatedModel(grids[0], Bt, Dt)


# ---------------------------------------------------------------------------
# Reproduction numbers and carrying capacities
# ---------------------------------------------------------------------------


def reproduction_number(model: RateModel, s: float, q: int) -> float:
    """Reproduction number R(s, q) = B(s, q) / D(s, q).

    Args:
        model: Rate model.
        s: Total population, >= 0.
        q: Atom index.

    Returns:
        B/D at (s, q); at s = 0 this is the basic reproduction number R0(q).
    """
    if s < 0.0:
        raise InputError("total population s must be nonnegative")
    d = model.D(s, q)
    if d <= 0.0:
        raise InvalidModelError(
            f"death rate D({s}, atom {q}) = {d} is not positive"
        )
    return model.B(s, q) / d


def _root_residual_ok(model: RateModel, s: float, q: int) -> bool:
    return abs(reproduction_number(model, s, q) - 1.0) <= TOL_ROOT


def carrying_capacity(model: RateModel, q: int) -> float:
    """Carrying capacity K(q): the root of R(., q) = 1.

    Returns 0 when R0(q) <= 1.  Otherwise brackets the root by doubling
    from [0, 1] up to the population cap and bisects; the result carries
    a residual certificate |R(K, q) - 1| <= 1e-10.

    For tabulated models the reproduction number may cross 1 several
    times; the smallest crossing is returned with a warning.

    Raises:
        NoFiniteRootError: bracket expansion hit the cap with R still > 1.
    """
    r0 = reproduction_number(model, 0.0, q)
    if r0 <= 1.0:
        return 0.0

    lo, hi = 0.0, 1.0
    if isinstance(model, TabulatedModel):
        # scan the knots for sign changes of R - 1 to catch non-monotone tables
        knots = model.s_grid
        vals = [reproduction_number(model, float(s), q) - 1.0 for s in knots]
        crossings = [
            i for i in range(len(vals) - 1) if vals[i] > 0.0 >= vals[i + 1]
        ]
        if len(crossings) > 1:
            warnings.warn(
                f"atom {q}: reproduction number crosses 1 more than once; "
                "returning the smallest root",
                stacklevel=2,
            )
        if crossings:
            lo, hi = float(knots[crossings[0]]), float(knots[crossings[0] + 1])
        elif vals[-1] > 0.0:
            raise NoFiniteRootError(
                f"atom {q}: R stays above 1 over the whole table"
            )

    while reproduction_number(model, hi, q) > 1.0:
        lo = hi
        hi *= 2.0
        if hi > S_MAX:
            raise NoFiniteRootError(
                f"atom {q}: no root of R = 1 below the population cap {S_MAX:g}"
            )

    # bisect to a tight interval, then certify the residual
    while hi - lo > _BISECT_WIDTH * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if reproduction_number(model, mid, q) > 1.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if not _root_residual_ok(model, root, q):
        raise InvalidModelError(
            f"atom {q}: carrying-capacity residual exceeds {TOL_ROOT:g} "
            "(reproduction number is too flat or discontinuous at the root)"
        )
    return root


@dataclass(frozen=True)
class CarryingProfile:
    """Carrying capacities over a space with extremes and maximizer set.

    Attributes:
        space: Hosting space.
        K: (N,) array of carrying capacities.
        Kd: max K (the optimal capacity).
        kd: min K.
        Qd: tuple of atom indices with K within tol_Q of Kd.
        tol_Q: grouping tolerance used for Qd membership.
    """

    space: StrategySpace
    K: np.ndarray
    Kd: float
    kd: float
    Qd: tuple
    tol_Q: float

    def __post_init__(self):
        k = np.asarray(self.K, dtype=np.float64)
        k.flags.writeable = False
        object.__setattr__(self, "K", k)

    def __eq__(self, other) -> bool:  # ndarray field: explicit comparison
        return (
            isinstance(other, CarryingProfile)
            and self.space == other.space
            and np.array_equal(self.K, other.K)
            and self.Qd == other.Qd
        )

    def __hash__(self):
        return hash((self.space, self.K.tobytes()))


def _audit_rates(model: RateModel, space: StrategySpace, s_hi: float, samples: int):
    """Sampled monotonicity and death-floor checks.

    B(., q) must be nonincreasing and D(., q) nondecreasing on [0, s_hi];
    D(0, q) must be strictly positive for every atom.
    """
    grid = np.linspace(0.0, s_hi, samples)
    slack = 1e-12
    for q in range(space.n_atoms):
        d0 = model.D(0.0, q)
        if d0 <= 0.0:
            raise InvalidModelError(f"atom {q}: D(0) = {d0} violates positivity")
        if model.death_floor > 0.0 and d0 < model.death_floor - slack:
            raise InvalidModelError(
                f"atom {q}: D(0) = {d0} below the declared floor {model.death_floor}"
            )
        b_prev = model.B(float(grid[0]), q)
        d_prev = d0
        for s in grid[1:]:
            b, d = model.B(float(s), q), model.D(float(s), q)
            scale_b = max(1.0, abs(b_prev))
            scale_d = max(1.0, abs(d_prev))
            if b > b_prev + slack * scale_b:
                raise InvalidModelError(
                    f"atom {q}: birth rate increases near s = {s:g}"
                )
            if d < d_prev - slack * scale_d:
                raise InvalidModelError(
                    f"atom {q}: death rate decreases near s = {s:g}"
                )
            b_prev, d_prev = b, d


def build_profile(
    model: RateModel,
    space: StrategySpace,
    tol_Q: Optional[float] = None,
    audit: bool = True,
    audit_samples: int = AUDIT_SAMPLES,
) -> CarryingProfile:
    """Carrying capacities for every atom, with extremes and maximizer set.

    Args:
        model: Rate model (one entry per atom of ``space``).
        space: Hosting space.
        tol_Q: Membership tolerance for the maximizer set
            (default 1e-9 * max(1, Kd), so floating-point ties group).
        audit: Run sampled monotonicity/positivity checks on [0, 2*Kd + 1].
        audit_samples: Samples per atom for the audit.

    Returns:
        CarryingProfile.
    """
    if getattr(model, "n_atoms", space.n_atoms) != space.n_atoms:
        raise InputError(
            f"model has {model.n_atoms} atoms, space has {space.n_atoms}"
        )
    K = np.array([carrying_capacity(model, q) for q in range(space.n_atoms)])
    Kd = float(np.max(K))
    kd = float(np.min(K))
    if audit:
        _audit_rates(model, space, s_hi=2.0 * Kd + 1.0, samples=audit_samples)
    tol = 1e-9 * max(1.0, Kd) if tol_Q is None else float(tol_Q)
    Qd = tuple(int(j) for j in range(space.n_atoms) if K[j] >= Kd - tol)
    return CarryingProfile(space=space, K=K, Kd=Kd, kd=kd, Qd=Qd, tol_Q=tol)


# ---------------------------------------------------------------------------
# Fitness comparisons
# ---------------------------------------------------------------------------


def relative_fitness(model: RateModel, profile: CarryingProfile, q: int, qhat: int) -> float:
    """Relative fitness of rival qhat against resident q.

    lambda(q, qhat) = R(K(q), qhat) - 1: positive means qhat can invade
    a resident-q population sitting at its carrying capacity.
    """
    return reproduction_number(model, float(profile.K[q]), qhat) - 1.0


@dataclass(frozen=True)
class ESSReport:
    """Uninvadability verdict for one resident atom.

    rivals lists (rival index, relative fitness, invasion number) for
    every other atom; ok is True iff every relative fitness < -tol.
    """

    q: int
    ok: bool
    tol: float
    rivals: tuple

    def __bool__(self) -> bool:
        return self.ok


def is_ess(model: RateModel, profile: CarryingProfile, q: int, tol: float = 0.0) -> ESSReport:
    """Is atom q evolutionarily stable (no rival can invade)?

    Args:
        model, profile: Rates and their carrying profile.
        q: Resident atom index.
        tol: Strictness margin; rivals must satisfy lambda < -tol.

    Returns:
        ESSReport (truthy iff uninvadable); vacuously true with no rivals.
    """
    rivals = []
    ok = True
    for qhat in range(profile.space.n_atoms):
        if qhat == q:
            continue
        lam = relative_fitness(model, profile, q, qhat)
        rivals.append((qhat, lam, lam + 1.0))
        if lam >= -tol:
            ok = False
    return ESSReport(q=q, ok=ok, tol=tol, rivals=tuple(rivals))


@dataclass(frozen=True)
class SuperiorityReport:
    """Result of the optimal-strategy superiority scan.

    worst = (X, optimal atom, rival atom, margin) at the smallest margin
    R(X, optimal) - R(X, rival) found on the scan grid; ok iff that margin
    is positive everywhere.
    """

    ok: bool
    worst: Optional[tuple]

    def __bool__(self) -> bool:
        return self.ok


def check_superiority(
    model: RateModel, profile: CarryingProfile, grid_size: int = 64
) -> SuperiorityReport:
    """Do all optimal atoms dominate all others on [kd, Kd]?

    Scans R(X, q_opt) > R(X, q) for every optimal q_opt, non-optimal q,
    and grid_size equispaced X between the smallest and largest carrying
    capacity.  Vacuously true when every atom is optimal.

    Args:
        grid_size: Number of X samples, >= 2.

    Returns:
        SuperiorityReport with the minimizing (X, q_opt, q, margin).
    """
    if grid_size < 2:
        raise InputError("grid_size must be at least 2")
    inside = set(profile.Qd)
    outside = [q for q in range(profile.space.n_atoms) if q not in inside]
    if not outside:
        return SuperiorityReport(ok=True, worst=None)
    xs = np.linspace(profile.kd, profile.Kd, grid_size)
    worst = None
    for x in xs:
        x = float(x)
        for qd in profile.Qd:
            r_opt = reproduction_number(model, x, qd)
            for q in outside:
                margin = r_opt - reproduction_number(model, x, q)
                if worst is None or margin < worst[3]:
                    worst = (x, qd, q, margin)
    return SuperiorityReport(ok=worst[3] > 0.0, worst=worst)


def net_growth(model: RateModel, s: float, q: int) -> float:
    """Net growth rate G(s, q) = B(s, q) - D(s, q).

    Zero at s = K(q) whenever K(q) > 0.
    """
    if s < 0.0:
        raise InputError("total population s must be nonnegative")
    return model.B(s, q) - model.D(s, q)
