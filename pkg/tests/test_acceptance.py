"""End-to-end acceptance gate: ten integration-level checks.

Each test is one pass/fail line under ``pytest -v``.  Tolerances are
fixed here and should not be loosened; a failure means the library no
longer meets its contract, not that the test needs adjusting.
"""

import math
import time

import numpy as np
import pytest

from selmut.analysis import (
    choose_c,
    lyapunov_series,
    permanence_check,
    persistence_certificate,
)
from selmut.dynamics import (
    IntegratorConfig,
    continuation,
    find_equilibrium,
    integrate,
    jacobian_at,
    verify_integral_representation,
)
from selmut.kernel import (
    MutationKernel,
    blend_toward,
    directed_kernel,
    identity_kernel,
    is_optimum_preserving,
    uniform_kernel,
)
from selmut.measure import (
    AtomicMeasure,
    StrategySpace,
    default_family,
    distance_to_dirac,
    weak_norm,
)
from selmut.vitals import (
    LogisticModel,
    RickerModel,
    TabulatedModel,
    build_profile,
    carrying_capacity,
    reproduction_number,
)

LN10 = math.log(10.0)


def grid(n):
    return StrategySpace.grid_1d(0.0, float(n - 1), n)


def test_criterion_01_ricker_capacity_matches_closed_form():
    # 50 randomized parameter sets: the bisection root must agree with
    # ln(kappa)/(eta+theta) -- or 0 for subcritical kappa -- to 1e-9
    rng = np.random.default_rng(101)
    for _ in range(50):
        kappa = float(rng.uniform(0.2, 50.0))
        eta = float(rng.uniform(0.0, 3.0))
        theta = float(rng.uniform(0.1, 3.0))
        model = RickerModel([kappa], [eta], theta)
        expected = math.log(kappa) / (eta + theta) if kappa > 1.0 else 0.0
        assert carrying_capacity(model, 0) == pytest.approx(expected, abs=1e-9)


def test_criterion_02_aggressive_run_settles_on_optimal_dirac():
    space = grid(3)
    model = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    mu0 = AtomicMeasure(space, [1.0, 1.0, 1.0])
    t0 = time.perf_counter()
    traj = integrate(mu0, identity_kernel(space), model,
                     IntegratorConfig(t_end=200.0))
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    final = traj.weights[-1]
    target = np.array([0.0, LN10, 0.0])
    assert np.max(np.abs(final - target)) <= 1e-3
    dist = distance_to_dirac(traj.final_state(), 1, LN10, default_family(space))
    assert dist <= 1e-3


def test_criterion_03_randomized_envelope_suite():
    # 20 scenarios across the three rate families, initial total drawn
    # from [0.1, 3 * K_high]: the permanence envelope must hold with
    # zero violations and the late-time total must respect K_high
    rng = np.random.default_rng(303)
    for case in range(20):
        n = int(rng.integers(2, 6))
        space = grid(n)
        family = case % 3
        if family == 0:
            model = RickerModel(rng.uniform(1.5, 30.0, n),
                                rng.uniform(0.1, 2.0, n),
                                float(rng.uniform(0.1, 2.0)))
        elif family == 1:
            model = LogisticModel(rng.uniform(1.0, 5.0, n),
                                  rng.uniform(0.2, 0.9, n),
                                  rng.uniform(0.3, 2.0, n))
        else:
            kappa = rng.uniform(1.5, 30.0, n)
            eta = rng.uniform(0.1, 2.0, n)
            theta = float(rng.uniform(0.1, 2.0))
            k_max = float(np.max(np.log(kappa) / (eta + theta)))
            s_grid = np.linspace(0.0, 3.0 * k_max + 2.0, 1500)
            B = kappa[:, None] * np.exp(-eta[:, None] * s_grid[None, :])
            D = np.tile(np.exp(theta * s_grid), (n, 1))
            model = TabulatedModel(s_grid, B, D)
        profile = build_profile(model, space)
        assert profile.Kd > 0.0
        total0 = float(rng.uniform(0.1, 3.0 * profile.Kd))
        raw = rng.random(n) + 1e-3
        mu0 = AtomicMeasure(space, raw * (total0 / raw.sum()))
        traj = integrate(mu0, identity_kernel(space), model,
                         IntegratorConfig(t_end=300.0))
        report = permanence_check(traj, profile)
        assert report.violations == (), f"case {case}: {report.violations}"
        assert report.tail_max_total <= profile.Kd + 1e-2, f"case {case}"


def test_criterion_04_integral_representation_on_pure_selection():
    # stored-grid quadrature reconstruction of each atom's exponential
    # form, at rel_tol 1e-10 and dt_out 0.01, must agree to 1e-5
    cfg = IntegratorConfig(t_end=50.0, rel_tol=1e-10, abs_tol=1e-12,
                           dt_out=0.01)
    runs = [
        # equilibrium start: the representation is exact up to roundoff
        (grid(1), RickerModel([10.0], [0.5], 0.5), [LN10], cfg),
        # mild 3-atom transient
        (grid(3), RickerModel([8.0, 6.0, 2.0], [0.5, 0.5, 0.5], 0.5),
         [1.5, 0.3, 0.2], cfg),
        # 2-atom run over a longer horizon
        (grid(2), RickerModel([3.0, 2.0], [0.5, 0.5], 0.5), [0.9, 0.2],
         IntegratorConfig(t_end=80.0, rel_tol=1e-10, abs_tol=1e-12,
                          dt_out=0.01)),
    ]
    for space, model, w0, run_cfg in runs:
        traj = integrate(AtomicMeasure(space, w0), identity_kernel(space),
                         model, run_cfg)
        assert traj.pure_selection
        err = verify_integral_representation(traj, model)
        assert err <= 1e-5, f"{len(space)}-atom run: {err}"


def test_criterion_05_jacobian_matches_closed_form_at_dirac():
    space = grid(2)
    model = RickerModel([10.0, 20.0], [0.5, 5.0], 0.5)
    x_star = np.array([LN10, 0.0])
    J, bound = jacobian_at(identity_kernel(space), model, x_star)
    j_winner = -math.sqrt(10.0) * LN10
    j_invader = 20.0 * math.exp(-5.0 * LN10) - math.exp(0.5 * LN10)
    closed = np.array([[j_winner, j_winner], [0.0, j_invader]])
    scale = np.maximum(np.abs(closed), 1e-30)
    assert np.max(np.abs(J - closed) / scale) <= 1e-5
    assert bound < 0.0


def test_criterion_06_small_mutation_equilibria_track_the_dirac_limit():
    space = grid(2)
    model = RickerModel([10.0, 20.0], [0.5, 5.0], 0.5)
    eps_list = [0.1, 0.01, 0.001]
    entries = continuation(uniform_kernel(space), model, eps_list)
    ref = np.array([LN10, 0.0])
    l1 = []
    for entry in entries:
        assert entry.result.converged
        assert entry.result.spectral_bound < 0.0
        l1.append(float(np.abs(entry.result.x_star.weights - ref).sum()))
    assert l1[0] > l1[1] > l1[2]

    # each perturbed equilibrium attracts every run with mass on atom 0
    inits = ([3.0, 3.0], [0.5, 0.1], [2.5, 0.01])
    for entry in entries:
        kern = blend_toward(identity_kernel(space), uniform_kernel(space),
                            entry.eps)
        x_star = entry.result.x_star.weights
        for w0 in inits:
            traj = integrate(AtomicMeasure(space, w0), kern, model,
                             IntegratorConfig(t_end=500.0))
            gap = float(np.abs(traj.weights[-1] - x_star).sum())
            assert gap <= 1e-3, f"eps={entry.eps}, w0={w0}: gap {gap}"


def test_criterion_07_directed_kernel_gives_volterra_descent():
    space = grid(3)
    model = RickerModel([10.0, 10.0, 2.0], [0.5, 0.5, 0.5], 0.5)
    profile = build_profile(model, space)
    assert profile.Qd == (0, 1)
    kern = directed_kernel(space, 0, profile.Qd, pull=0.3)
    traj = integrate(AtomicMeasure(space, [1.0, 1.0, 1.0]), kern, model,
                     IntegratorConfig(t_end=200.0))
    c = choose_c(model, profile, 0)
    series = lyapunov_series(traj, profile, "volterra",
                             params=(0, profile.Qd, c))
    assert series.monotone
    tail = series.values[series.tail_start_index:]
    assert np.all(np.diff(tail) <= series.mono_tol)
    target = profile.Kd * np.array([1.0, 0.0, 0.0])
    assert np.max(np.abs(traj.weights[-1] - target)) <= 1e-3


def test_criterion_08_certified_sets_persist_and_subcritical_dies():
    rng = np.random.default_rng(808)

    # ten certified-and-irreducible scenarios keep the population away
    # from extinction over the whole late stretch of a long run
    for case in range(10):
        n = int(rng.integers(2, 6))
        space = grid(n)
        model = RickerModel(rng.uniform(1.5, 10.0, n),
                            rng.uniform(0.2, 1.0, n),
                            float(rng.uniform(0.2, 1.0)))
        kern = MutationKernel(space, rng.dirichlet(np.ones(n), size=n))
        cert = persistence_certificate(model, kern, range(n), eps=0.01)
        assert cert.certified and cert.irreducible is True, f"case {case}"
        traj = integrate(AtomicMeasure.uniform(space, 0.05), kern, model,
                         IntegratorConfig(t_end=500.0))
        totals = traj.totals
        t_cut = 0.8 * traj.times[-1]
        tail_min = float(totals[np.searchsorted(traj.times, t_cut):].min())
        assert tail_min >= 1e-2, f"case {case}: tail min {tail_min}"

    # five all-subcritical scenarios decay below 1e-6
    for case in range(5):
        n = int(rng.integers(2, 6))
        space = grid(n)
        model = RickerModel(rng.uniform(0.2, 0.9, n),
                            rng.uniform(0.2, 1.0, n),
                            float(rng.uniform(0.2, 1.0)))
        for q in range(n):
            assert reproduction_number(model, 0.0, q) < 1.0
        kern = MutationKernel(space, rng.dirichlet(np.ones(n), size=n))
        traj = integrate(AtomicMeasure.uniform(space, 3.0), kern, model,
                         IntegratorConfig(t_end=500.0))
        assert float(traj.totals[-1]) < 1e-6, f"case {case}"


def test_criterion_09_directed_kernels_never_leak_optimal_mass():
    rng = np.random.default_rng(909)
    for _ in range(200):
        n = int(rng.integers(2, 8))
        space = grid(n)
        size = int(rng.integers(1, n + 1))
        Qd = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
        qd = int(rng.choice(Qd))
        pull = float(rng.uniform(0.05, 1.0))
        kern = directed_kernel(space, qd, Qd, pull)
        assert is_optimum_preserving(kern, Qd).ok


def test_criterion_10_weak_norm_is_a_norm():
    space = grid(5)
    fam = default_family(space)
    rng = np.random.default_rng(1010)
    violations = 0
    for _ in range(1000):
        u = rng.normal(0.0, 10.0, 5)
        v = rng.normal(0.0, 10.0, 5)
        c = float(rng.normal(0.0, 5.0))
        pu, pv = weak_norm(u, fam), weak_norm(v, fam)
        if weak_norm(u + v, fam) > pu + pv + 1e-12:
            violations += 1
        scaled = weak_norm(c * u, fam)
        if abs(scaled - abs(c) * pu) > 1e-12 * max(1.0, abs(c) * pu):
            violations += 1
    assert violations == 0
