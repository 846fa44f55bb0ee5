"""Atomic measures on a finite strategy space and the weak*-compatible norm.

A population state is a nonnegative weight per strategy atom.  Convergence
to Dirac equilibria is quantified with a truncated dual-pairing norm

    p(nu) = |nu(Q)| + sum_k 2^{-k} |<f_k, nu>|

built from a family of test functions with sup-norm at most one.  The
default family consists of indicator bumps (one per atom, radius half the
minimal atom spacing), which separates atoms exactly and makes the norm
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "StrategySpace",
    "AtomicMeasure",
    "TestFunctionFamily",
    "default_family",
    "mass",
    "weak_norm",
    "distance_to_dirac",
    "nearest_optimal_equilibrium",
]


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StrategySpace:
    """Finite labeled set of strategy points with Euclidean geometry.

    Attributes:
        ids: Atom labels, unique, in fixed order.
        coords: (N, d) float64 array of atom coordinates.
    """

    ids: tuple
    coords: np.ndarray

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StrategySpace)
            and self.ids == other.ids
            and self.coords.shape == other.coords.shape
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self):
        return hash((self.ids, self.coords.tobytes()))

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords[:, None]
        if len(ids) == 0:
            raise InputError("strategy space needs at least one atom")
        if len(set(ids)) != len(ids):
            raise InputError("atom ids must be unique")
        if coords.shape[0] != len(ids):
            raise InputError(
                f"{len(ids)} ids but {coords.shape[0]} coordinate rows"
            )
        if not np.all(np.isfinite(coords)):
            raise InputError("atom coordinates must be finite")
        coords.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "coords", coords)
        if self.n_atoms > 1 and self.min_spacing <= 0.0:
            raise InputError("atoms must be pairwise distinct")

    @property
    def n_atoms(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def min_spacing(self) -> float:
        """Minimal pairwise Euclidean distance between atoms (inf for N=1)."""
        n = self.n_atoms
        if n == 1:
            return math.inf
        best = math.inf
        for i in range(n - 1):
            d = np.linalg.norm(self.coords[i + 1 :] - self.coords[i], axis=1)
            best = min(best, float(d.min()))
        return best

    def distance(self, i: int, j: int) -> float:
        return float(np.linalg.norm(self.coords[i] - self.coords[j]))

    def index(self, atom_id: str) -> int:
        try:
            return self.ids.index(str(atom_id))
        except ValueError:
            raise InputError(f"unknown atom id {atom_id!r}") from None

    @staticmethod
    def from_points(points: Sequence) -> "StrategySpace":
        """Build from a sequence of (id, coords) pairs."""
        ids = [p[0] for p in points]
        coords = [np.atleast_1d(np.asarray(p[1], dtype=float)) for p in points]
        return StrategySpace(tuple(ids), np.vstack(coords))

    @staticmethod
    def grid_1d(lo: float, hi: float, n: int, prefix: str = "q") -> "StrategySpace":
        """Equispaced 1D grid of n atoms labeled prefix1..prefixN."""
        if n < 1:
            raise InputError("grid needs at least one atom")
        xs = np.linspace(lo, hi, n)
        return StrategySpace(tuple(f"{prefix}{k + 1}" for k in range(n)), xs)


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Nonnegative weight per strategy atom.

    Attributes:
        space: The hosting StrategySpace.
        weights: (N,) float64 array, finite and >= 0, read-only.
    """

    space: StrategySpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (self.space.n_atoms,):
            raise InputError(
                f"expected {self.space.n_atoms} weights, got shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise InputError("weights must be finite")
        if np.any(w < 0.0):
            raise InputError("weights must be nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        """Total mass (population size)."""
        return float(np.sum(self.weights))

    @staticmethod
    def dirac(space: StrategySpace, atom: int, mass_: float = 1.0) -> "AtomicMeasure":
        w = np.zeros(space.n_atoms)
        w[atom] = mass_
        return AtomicMeasure(space, w)

    @staticmethod
    def uniform(space: StrategySpace, total: float = 1.0) -> "AtomicMeasure":
        n = space.n_atoms
        return AtomicMeasure(space, np.full(n, total / n))


@dataclass(frozen=True, eq=False)
class TestFunctionFamily:
    """Truncated test-function family defining the weak* norm.

    Attributes:
        space: Hosting space.
        values: (M, N) array, values[k][j] = f_{k+1}(atom j), all in [-1, 1].
        rule: Human-readable construction rule (recorded for reproducibility).
    """

    space: StrategySpace
    values: np.ndarray
    rule: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.space.n_atoms:
            raise InputError(
                f"family values must be (M, {self.space.n_atoms}), got {v.shape}"
            )
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) > 1.0 + 1e-15):
            raise InputError("test functions must take values in [-1, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def truncation(self) -> int:
        return self.values.shape[0]


def default_family(space: StrategySpace, truncation: Optional[int] = None) -> TestFunctionFamily:
    """Indicator-bump family: f_k = 1 at atom k, 0 elsewhere.

    Each bump is the atomic sample of a Lipschitz hat of support radius
    half the minimal atom spacing, so the family separates atoms exactly.
    Truncation defaults to the number of atoms; a larger truncation pads
    with zero functions (they contribute nothing to the norm).

    Args:
        space: Hosting space.
        truncation: Number of test functions M >= N (default N).

    Returns:
        TestFunctionFamily with values = identity rows (padded if M > N).
    """
    n = space.n_atoms
    m = n if truncation is None else int(truncation)
    if m < n:
        raise InputError(
            f"default family needs truncation >= {n} atoms, got {m}"
        )
    vals = np.zeros((m, n))
    vals[:n, :n] = np.eye(n)
    return TestFunctionFamily(space, vals, rule="indicator-bumps")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _as_weight_vector(nu, n: int) -> np.ndarray:
    if isinstance(nu, AtomicMeasure):
        v = nu.weights
    else:
        v = np.asarray(nu, dtype=np.float64)
    if v.shape != (n,):
        raise InputError(f"expected weight vector of length {n}, got {v.shape}")
    return v


def mass(mu: AtomicMeasure, subset: Optional[Iterable[int]] = None) -> float:
    """Mass of mu on a subset of atoms (None = whole space).

    Args:
        mu: The measure.
        subset: Iterable of atom indices, or None for total mass.

    Returns:
        Sum of weights over the subset.
    """
    if subset is None:
        return float(np.sum(mu.weights))
    idx = list(subset)
    n = mu.space.n_atoms
    for j in idx:
        if not (isinstance(j, (int, np.integer)) and 0 <= j < n):
            raise InputError(f"atom index {j!r} out of range for {n} atoms")
    if not idx:
        return 0.0
    return float(np.sum(mu.weights[np.asarray(idx, dtype=int)]))


def weak_norm(nu, fam: TestFunctionFamily) -> float:
    """Truncated weak* norm of a signed weight vector.

    p(nu) = |sum_j nu_j| + sum_{k=1}^{M} 2^{-k} |sum_j f_k(j) nu_j|

    Args:
        nu: Signed weight vector (length N) or AtomicMeasure on fam.space.
        fam: Test-function family on the same space.

    Returns:
        Nonnegative real; zero iff nu = 0 when the family separates atoms.
    """
    if isinstance(nu, AtomicMeasure) and nu.space is not fam.space and nu.space != fam.space:
        raise InputError("measure and family live on different spaces")
    v = _as_weight_vector(nu, fam.space.n_atoms)
    pairings = fam.values @ v
    k = np.arange(1, fam.truncation + 1, dtype=np.float64)
    return float(abs(np.sum(v)) + np.sum(np.exp2(-k) * np.abs(pairings)))


def distance_to_dirac(mu: AtomicMeasure, q: int, K: float, fam: TestFunctionFamily) -> float:
    """Weak-norm distance from mu to the Dirac state K * delta_q.

    Args:
        mu: The measure.
        q: Target atom index.
        K: Target mass, K >= 0.

    Returns:
        weak_norm(mu - K * delta_q).
    """
    if K < 0.0:
        raise InputError("target mass K must be nonnegative")
    n = mu.space.n_atoms
    if not 0 <= q < n:
        raise InputError(f"atom index {q} out of range")
    diff = mu.weights.astype(np.float64).copy()
    diff[q] -= K
    return weak_norm(diff, fam)


def nearest_optimal_equilibrium(
    mu: AtomicMeasure,
    Qd: Iterable[int],
    Kd: float,
    fam: TestFunctionFamily,
) -> tuple:
    """Candidate equilibrium on the optimal set nearest to mu, with distance.

    Restricts mu to the optimal atoms Qd and rescales to total mass Kd
    (uniform on Qd if mu carries no mass there).  The returned weak-norm
    distance is an upper bound on the true distance to the equilibrium
    set {nu supported on Qd : nu(Q) = Kd} -- the exact projection is a
    transport problem this diagnostic does not need to solve.

    Args:
        mu: The measure.
        Qd: Nonempty set of optimal atom indices.
        Kd: Target total mass, > 0.

    Returns:
        (candidate AtomicMeasure, weak-norm distance).
    """
    idx = sorted(set(int(j) for j in Qd))
    n = mu.space.n_atoms
    if not idx:
        raise InputError("Qd must be nonempty")
    if idx[0] < 0 or idx[-1] >= n:
        raise InputError("Qd contains out-of-range atom indices")
    if Kd <= 0.0:
        raise InputError("Kd must be positive")
    w = np.zeros(n)
    on_qd = mu.weights[idx]
    m_qd = float(np.sum(on_qd))
    if m_qd > 0.0:
        w[idx] = on_qd * (Kd / m_qd)
    else:
        w[idx] = Kd / len(idx)
    candidate = AtomicMeasure(mu.space, w)
    dist = weak_norm(mu.weights - w, fam)
    return candidate, dist
