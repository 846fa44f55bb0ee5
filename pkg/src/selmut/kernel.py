"""Mutation kernels: row-stochastic offspring-redistribution weights.

gamma[i][j] is the fraction of strategy-i offspring landing on strategy j.
Pure selection is the identity kernel (offspring copy the parent).  The
structural predicates the long-time analyses rely on are provided here:

  * optimum preserving -- no mutation loss from the optimal set,
  * directed           -- optimum preserving and funneling the optimal
                          set toward a single strategy,
  * irreducible into E -- a static reachability certificate that mass
                          eventually appears on E (valid when birth
                          rates are strictly positive).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import CertificateUnavailableError, InputError
from .measure import StrategySpace, default_family, weak_norm
from .vitals import RateModel

__all__ = [
    "MutationKernel",
    "identity_kernel",
    "uniform_kernel",
    "directed_kernel",
    "blend_toward",
    "is_optimum_preserving",
    "is_directed",
    "is_irreducible_into",
    "kernel_distance",
    "gaussian_grid_kernel",
    "OptimumPreservingReport",
    "DirectedReport",
]

TOL_ROW = 1e-12        # row-stochasticity defect tolerated after construction
_ROW_SUM_SLACK = 1e-6  # raw row sums further from 1 than this are rejected


@dataclass(frozen=True, eq=False)
class MutationKernel:
    """Row-stochastic N x N weights over the atoms of a space.

    Rows are renormalized on construction (raw sums must already lie
    within 1e-6 of 1 -- anything farther off is treated as a caller bug
    rather than silently rescaled).  Entries in [-1e-12, 0) are snapped
    to zero.
    """

    space: StrategySpace
    gamma: np.ndarray

    def __post_init__(self):
        n = self.space.n_atoms
        g = np.array(self.gamma, dtype=np.float64)
        if g.shape != (n, n):
            raise InputError(f"kernel must be {n}x{n}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InputError("kernel entries must be finite")
        if np.any(g < -TOL_ROW):
            raise InputError("kernel entries must be nonnegative")
        g[g < 0.0] = 0.0
        sums = g.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _ROW_SUM_SLACK):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise InputError(
                f"row {bad} sums to {sums[bad]!r}; rows must sum to 1 "
                f"(within {_ROW_SUM_SLACK:g} before renormalization)"
            )
        g /= sums[:, None]
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    @property
    def n_atoms(self) -> int:
        return self.space.n_atoms

    def row(self, i: int) -> np.ndarray:
        return self.gamma[i]

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.gamma, np.eye(self.n_atoms)))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.gamma:
                fh.write(",".join(format(x, ".17g") for x in row) + "\n")

    @staticmethod
    def from_csv(path, space: StrategySpace) -> "MutationKernel":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append([float(x) for x in line.split(",")])
        return MutationKernel(space, np.array(rows))


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def identity_kernel(space: StrategySpace) -> MutationKernel:
    """Pure selection: offspring land exactly on the parent strategy."""
    return MutationKernel(space, np.eye(space.n_atoms))


def uniform_kernel(space: StrategySpace) -> MutationKernel:
    """Maximal mixing: every row is uniform over all atoms."""
    n = space.n_atoms
    return MutationKernel(space, np.full((n, n), 1.0 / n))


def directed_kernel(
    space: StrategySpace, qd: int, Qd: Iterable[int], pull: float = 0.3
) -> MutationKernel:
    """Canonical kernel directed to atom qd within the optimal set Qd.

    Row qd is a pure copy (delta at qd); every other row keeps fraction
    (1 - pull) on its own atom and sends fraction pull to qd.  Rows inside
    Qd therefore stay inside Qd with positive flow to qd, which is exactly
    the directedness condition.

    Args:
        qd: Funnel target, must belong to Qd.
        Qd: Optimal atom indices.
        pull: Mutation fraction routed to qd, in (0, 1].
    """
    n = space.n_atoms
    qd = int(qd)
    qset = set(int(j) for j in Qd)
    if qd not in qset:
        raise InputError("qd must belong to Qd")
    if not 0.0 < pull <= 1.0:
        raise InputError("pull must lie in (0, 1]")
    g = np.zeros((n, n))
    for i in range(n):
        if i == qd:
            g[i, qd] = 1.0
        else:
            g[i, i] = 1.0 - pull
            g[i, qd] = pull
    return MutationKernel(space, g)


def blend_toward(base: MutationKernel, target: MutationKernel, eps: float) -> MutationKernel:
    """Convex blend (1 - eps) * base + eps * target.

    Realizes small-perturbation families around a base kernel; rows stay
    stochastic by convexity.

    Args:
        eps: Blend weight in [0, 1].
    """
    if base.space != target.space:
        raise InputError("kernels live on different spaces")
    if not 0.0 <= eps <= 1.0:
        raise InputError(f"eps must lie in [0, 1], got {eps}")
    return MutationKernel(base.space, (1.0 - eps) * base.gamma + eps * target.gamma)


def gaussian_grid_kernel(space: StrategySpace, sigma: float) -> MutationKernel:
    """Distance-decaying mutation: gamma[i][j] ~ exp(-dist(i,j)^2 / (2 sigma^2)).

    Rows are renormalized; as sigma -> 0 the kernel approaches identity.
    """
    if sigma <= 0.0:
        raise InputError("sigma must be positive")
    c = space.coords
    d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=2)
    g = np.exp(-d2 / (2.0 * sigma * sigma))
    g /= g.sum(axis=1)[:, None]
    return MutationKernel(space, g)


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimumPreservingReport:
    """ok iff no optimal-set row leaks mass outside the optimal set.

    worst_leak = max over rows q in Qd of 1 - gamma(q)(Qd), at worst_atom.
    """

    ok: bool
    worst_leak: float
    worst_atom: Optional[int]

    def __bool__(self) -> bool:
        return self.ok


def is_optimum_preserving(k: MutationKernel, Qd: Iterable[int]) -> OptimumPreservingReport:
    """Does every optimal atom's offspring distribution stay in Qd?

    True iff sum_{j in Qd} gamma[i][j] = 1 (within 1e-12) for every i in Qd.
    """
    idx = sorted(set(int(j) for j in Qd))
    n = k.n_atoms
    if not idx or idx[0] < 0 or idx[-1] >= n:
        raise InputError("Qd must be a nonempty set of valid atom indices")
    worst_leak, worst_atom = 0.0, None
    for i in idx:
        leak = 1.0 - float(np.sum(k.gamma[i, idx]))
        if leak > worst_leak:
            worst_leak, worst_atom = leak, i
    return OptimumPreservingReport(
        ok=worst_leak <= TOL_ROW, worst_leak=worst_leak, worst_atom=worst_atom
    )


@dataclass(frozen=True)
class DirectedReport:
    """ok iff the kernel funnels the optimal set toward qd.

    failing describes the first violated condition, if any.
    """

    ok: bool
    failing: Optional[str]

    def __bool__(self) -> bool:
        return self.ok


def is_directed(k: MutationKernel, qd: int, Qd: Iterable[int]) -> DirectedReport:
    """Is the kernel directed to qd within Qd?

    Conditions (all within 1e-12):
      (1) gamma[qd][qd] = 1 (the target strategy breeds true),
      (2) gamma[i][qd] > 0 for every i in Qd (positive flow to the target),
      (3) sum_{j in Qd} gamma[i][j] = 1 for every i in Qd (no leak outside).
    """
    idx = sorted(set(int(j) for j in Qd))
    qd = int(qd)
    if qd not in idx:
        raise InputError("qd must belong to Qd")
    if abs(k.gamma[qd, qd] - 1.0) > TOL_ROW:
        return DirectedReport(
            ok=False, failing=f"gamma[{qd}][{qd}] = {k.gamma[qd, qd]!r} != 1"
        )
    for i in idx:
        if not k.gamma[i, qd] > 0.0:
            return DirectedReport(
                ok=False, failing=f"gamma[{i}][{qd}] = 0 (no flow to target)"
            )
        leak = 1.0 - float(np.sum(k.gamma[i, idx]))
        if leak > TOL_ROW:
            return DirectedReport(
                ok=False, failing=f"row {i} leaks {leak:g} outside the optimal set"
            )
    return DirectedReport(ok=True, failing=None)


def is_irreducible_into(
    k: MutationKernel,
    E: Iterable[int],
    model: RateModel,
    s_samples: Optional[np.ndarray] = None,
) -> bool:
    """Static certificate that mass eventually appears on E.

    In the directed graph with an edge i -> j whenever gamma[i][j] > 0,
    checks that every atom has a path into E.  This certifies the dynamic
    property only when birth rates are strictly positive, which is checked
    by sampling; when that fails, no verdict is possible and
    CertificateUnavailableError is raised (callers should report
    "unknown", never "false").

    Args:
        E: Target atom index set.
        model: Rate model whose positivity justifies the certificate.
        s_samples: Population sizes at which B > 0 is checked
            (default: 201 points on [0, 100]).
    """
    targets = set(int(j) for j in E)
    n = k.n_atoms
    if not targets or min(targets) < 0 or max(targets) >= n:
        raise InputError("E must be a nonempty set of valid atom indices")

    if s_samples is None:
        s_samples = np.linspace(0.0, 100.0, 201)
    for q in range(n):
        for s in s_samples:
            if not model.B(float(s), q) > 0.0:
                raise CertificateUnavailableError(
                    f"B({float(s):g}, atom {q}) = 0: the reachability "
                    "certificate requires strictly positive birth rates"
                )

    # breadth-first search over reversed edges, seeded with E
    reaches = [False] * n
    stack = list(targets)
    for j in targets:
        reaches[j] = True
    while stack:
        j = stack.pop()
        for i in range(n):
            if not reaches[i] and k.gamma[i, j] > 0.0:
                reaches[i] = True
                stack.append(i)
    return all(reaches)


def kernel_distance(k1: MutationKernel, k2: MutationKernel) -> float:
    """Distance between kernels: max over rows of the weak norm of the
    row difference (computed with the default test family)."""
    if k1.space != k2.space:
        raise InputError("kernels live on different spaces")
    fam = default_family(k1.space)
    return max(
        weak_norm(k1.gamma[i] - k2.gamma[i], fam) for i in range(k1.n_atoms)
    )
