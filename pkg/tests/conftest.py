"""Shared fixtures and an independent reference integrator.

The reference right-hand side and RK4 stepper below deliberately avoid
the package's stepping cores: they recompute the dynamics from the model
contract (B/D evaluations and the kernel matrix) so integrator tests
compare two independent routes.
"""

import numpy as np
import pytest

from selmut.kernel import identity_kernel
from selmut.measure import AtomicMeasure, StrategySpace
from selmut.vitals import RickerModel


def reference_rhs(model, gamma, w):
    """dw/dt from the model contract: births redistributed by gamma, deaths local."""
    w = np.asarray(w, dtype=float)
    s = float(w.sum())
    n = w.size
    births = np.array([model.B(s, q) for q in range(n)]) * w
    deaths = np.array([model.D(s, q) for q in range(n)]) * w
    return gamma.T @ births - deaths


def rk4_reference(model, gamma, w0, t_end, n_steps):
    """Classic fixed-step RK4 on the reference right-hand side."""
    w = np.asarray(w0, dtype=float).copy()
    h = t_end / n_steps
    for _ in range(n_steps):
        k1 = reference_rhs(model, gamma, w)
        k2 = reference_rhs(model, gamma, w + 0.5 * h * k1)
        k3 = reference_rhs(model, gamma, w + 0.5 * h * k2)
        k4 = reference_rhs(model, gamma, w + h * k3)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return w


@pytest.fixture(scope="session")
def space3():
    return StrategySpace.from_points([("fast", 0.0), ("fit", 1.0), ("weak", 2.0)])


@pytest.fixture(scope="session")
def ricker3():
    # carrying capacities ln20/5.5, ln10/1, 0 -- the middle atom wins
    return RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)


@pytest.fixture(scope="session")
def ass_trajectory(space3, ricker3):
    """The 3-atom pure-selection run used across analysis tests."""
    from selmut.dynamics import IntegratorConfig, integrate

    mu0 = AtomicMeasure(space3, [1.0, 1.0, 1.0])
    cfg = IntegratorConfig(t_end=200.0)
    return integrate(mu0, identity_kernel(space3), ricker3, cfg)
