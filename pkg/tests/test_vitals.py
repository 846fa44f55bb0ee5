import math

import numpy as np
import pytest

from selmut.errors import InputError, InvalidModelError, NoFiniteRootError
from selmut.measure import StrategySpace
from selmut.vitals import (
    LogisticModel,
    RickerModel,
    TabulatedModel,
    build_profile,
    carrying_capacity,
    check_superiority,
    is_ess,
    net_growth,
    relative_fitness,
    reproduction_number,
)


def space(n):
    return StrategySpace.grid_1d(0.0, 1.0 * (n - 1) if n > 1 else 0.0, n)


# ---------------------------------------------------------------------------
# model constructors
# ---------------------------------------------------------------------------


def test_ricker_rates_and_spec():
    m = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    assert m.B(0.0, 0) == pytest.approx(20.0)
    assert m.B(1.0, 1) == pytest.approx(10.0 * math.exp(-0.5))
    assert m.D(2.0, 2) == pytest.approx(math.exp(1.0))
    kind, kappa, eta, theta = m.backend_spec()
    assert kind == "ricker" and theta == 0.5
    assert kappa.tolist() == [20.0, 10.0, 1.0]


def test_ricker_validation():
    with pytest.raises(InputError):
        RickerModel([1.0], [0.5, 0.5], 0.5)
    with pytest.raises(InputError):
        RickerModel([0.0], [0.5], 0.5)
    with pytest.raises(InputError):
        RickerModel([2.0], [-0.1], 0.5)
    with pytest.raises(InputError):
        RickerModel([2.0], [0.5], -0.5)


def test_logistic_rates_and_validation():
    m = LogisticModel([2.0, 3.0], [1.0, 1.0], [0.5, 1.0])
    assert m.B(100.0, 0) == 2.0  # births ignore crowding
    assert m.D(2.0, 1) == pytest.approx(3.0)
    assert m.death_floor == 1.0
    with pytest.raises(InputError):
        LogisticModel([2.0], [0.0], [0.5])  # death rate must start positive
    with pytest.raises(InputError):
        LogisticModel([-1.0], [1.0], [0.5])


def test_tabulated_interpolation_and_clamping():
    m = TabulatedModel([0.0, 1.0, 2.0], [[4.0, 2.0, 1.0]], [[1.0, 1.0, 2.0]])
    assert m.B(0.5, 0) == pytest.approx(3.0)
    assert m.B(-5.0, 0) == 4.0  # constant extension below the grid
    assert m.B(99.0, 0) == 1.0  # and above
    assert m.D(1.5, 0) == pytest.approx(1.5)


def test_tabulated_validation():
    with pytest.raises(InputError):
        TabulatedModel([0.0], [[1.0]], [[1.0]])  # grid too short
    with pytest.raises(InputError):
        TabulatedModel([0.0, 0.0], [[1.0, 1.0]], [[1.0, 1.0]])
    with pytest.raises(InvalidModelError):
        TabulatedModel([0.0, 1.0], [[1.0, 1.0]], [[1.0, 0.0]])  # death hits 0
    with pytest.raises(InputError):
        TabulatedModel([0.0, 1.0], [[-1.0, 1.0]], [[1.0, 1.0]])


def test_tabulated_csv_round_trip(tmp_path):
    sp = StrategySpace.from_points([("lo", 0.0), ("hi", 1.0)])
    path = tmp_path / "rates.csv"
    path.write_text(
        "s,atom_id,B,D\n"
        "0.0,lo,4.0,1.0\n1.0,lo,2.0,1.5\n2.0,lo,1.0,2.0\n"
        "0.0,hi,3.0,1.0\n1.0,hi,1.5,1.2\n2.0,hi,0.5,1.4\n"
    )
    m = TabulatedModel.from_csv(path, sp)
    assert m.n_atoms == 2
    assert m.B(1.0, 0) == 2.0 and m.D(2.0, 1) == 1.4
    bad = tmp_path / "bad.csv"
    bad.write_text("s,atom_id,B,D\n0.0,lo,4.0,1.0\n1.0,lo,2.0,1.5\n")
    with pytest.raises(InputError):
        TabulatedModel.from_csv(bad, sp)  # atom "hi" missing


# ---------------------------------------------------------------------------
# reproduction numbers and carrying capacities
# ---------------------------------------------------------------------------


def test_reproduction_number():
    m = RickerModel([10.0], [0.5], 0.5)
    assert reproduction_number(m, 0.0, 0) == pytest.approx(10.0)
    # R(s) = kappa * exp(-(eta + theta) s)
    assert reproduction_number(m, 2.0, 0) == pytest.approx(10.0 * math.exp(-2.0))
    with pytest.raises(InputError):
        reproduction_number(m, -1.0, 0)


@pytest.mark.parametrize(
    "kappa,eta,theta",
    [(10.0, 0.5, 0.5), (20.0, 5.0, 0.5), (1.2, 0.0, 0.3), (1000.0, 2.0, 0.0)],
)
def test_ricker_carrying_capacity_closed_form(kappa, eta, theta):
    m = RickerModel([kappa], [eta], theta)
    assert carrying_capacity(m, 0) == pytest.approx(
        math.log(kappa) / (eta + theta), abs=1e-10
    )


def test_carrying_capacity_zero_when_subcritical():
    assert carrying_capacity(RickerModel([0.9], [0.5], 0.5), 0) == 0.0
    assert carrying_capacity(RickerModel([1.0], [0.5], 0.5), 0) == 0.0  # R0 = 1
    assert carrying_capacity(LogisticModel([1.0], [2.0], [0.5]), 0) == 0.0


def test_logistic_carrying_capacity_closed_form():
    m = LogisticModel([3.0, 2.0], [1.0, 0.5], [0.5, 2.0])
    assert carrying_capacity(m, 0) == pytest.approx(4.0, abs=1e-10)
    assert carrying_capacity(m, 1) == pytest.approx(0.75, abs=1e-10)


def test_carrying_capacity_residual_certificate():
    m = RickerModel([50.0], [1.0], 1.0)
    K = carrying_capacity(m, 0)
    assert abs(reproduction_number(m, K, 0) - 1.0) <= 1e-10


def test_no_finite_root():
    # eta = theta = 0 keeps R constant above 1: no crossing below the cap
    with pytest.raises(NoFiniteRootError):
        carrying_capacity(RickerModel([2.0], [0.0], 0.0), 0)
    with pytest.raises(NoFiniteRootError):
        carrying_capacity(LogisticModel([3.0], [1.0], [0.0]), 0)


def test_tabulated_multiple_crossings_warns_and_takes_smallest():
    # R - 1 changes sign at s in (0,1) and again in (2,3)
    m = TabulatedModel(
        [0.0, 1.0, 2.0, 3.0],
        [[2.0, 0.5, 1.5, 0.6]],
        [[1.0, 1.0, 1.0, 1.0]],
    )
    with pytest.warns(UserWarning, match="crosses 1 more than once"):
        K = carrying_capacity(m, 0)
    assert K == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_tabulated_carrying_capacity_matches_sampled_ricker():
    ref = RickerModel([10.0], [0.5], 0.5)
    s = np.linspace(0.0, 6.0, 4001)
    m = TabulatedModel(s, [[ref.B(float(x), 0) for x in s]],
                       [[ref.D(float(x), 0) for x in s]])
    assert carrying_capacity(m, 0) == pytest.approx(math.log(10.0), abs=1e-5)


# ---------------------------------------------------------------------------
# carrying profile
# ---------------------------------------------------------------------------


def test_build_profile_extremes_and_maximizers():
    sp = space(3)
    m = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    prof = build_profile(m, sp)
    assert prof.K == pytest.approx(
        [math.log(20.0) / 5.5, math.log(10.0), 0.0], abs=1e-10
    )
    assert prof.Kd == pytest.approx(math.log(10.0))
    assert prof.kd == 0.0
    assert prof.Qd == (1,)
    assert prof.tol_Q == pytest.approx(1e-9 * math.log(10.0))


def test_build_profile_groups_ties():
    sp = space(3)
    m = RickerModel([10.0, 10.0, 2.0], [0.5, 0.5, 0.5], 0.5)
    prof = build_profile(m, sp)
    assert prof.Qd == (0, 1)
    assert prof.kd == pytest.approx(math.log(2.0))


def test_build_profile_audit_catches_increasing_births():
    sp = space(1)
    m = TabulatedModel([0.0, 1.0], [[1.0, 2.0]], [[1.0, 1.0]])
    with pytest.raises(InvalidModelError, match="birth rate increases"):
        build_profile(m, sp)
    prof = build_profile(m, sp, audit=False)
    assert prof.Kd == 0.0


def test_build_profile_atom_count_mismatch():
    with pytest.raises(InputError):
        build_profile(RickerModel([10.0], [0.5], 0.5), space(2))


# ---------------------------------------------------------------------------
# fitness comparisons
# ---------------------------------------------------------------------------


def test_relative_fitness_signs():
    sp = space(3)
    m = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    prof = build_profile(m, sp)
    # nobody invades the top atom at its capacity...
    assert relative_fitness(m, prof, 1, 0) < 0.0
    assert relative_fitness(m, prof, 1, 2) < 0.0
    # ...but the top atom invades the others at theirs
    assert relative_fitness(m, prof, 0, 1) > 0.0
    # self-fitness vanishes at a positive capacity (R(K, q) = 1)
    assert relative_fitness(m, prof, 1, 1) == pytest.approx(0.0, abs=1e-10)


def test_is_ess():
    sp = space(3)
    m = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    prof = build_profile(m, sp)
    assert is_ess(m, prof, 1)
    report = is_ess(m, prof, 0)
    assert not report.ok
    assert len(report.rivals) == 2


def test_is_ess_vacuous_single_atom():
    sp = space(1)
    m = RickerModel([10.0], [0.5], 0.5)
    assert is_ess(m, build_profile(m, sp), 0).ok


def test_check_superiority():
    sp = space(2)
    # same decay profile, different ceilings: the top atom dominates everywhere
    m = RickerModel([10.0, 5.0], [0.5, 0.5], 0.5)
    prof = build_profile(m, sp)
    rep = check_superiority(m, prof)
    assert rep.ok and rep.worst[3] > 0.0
    # steep-decay rival beats the winner at low density: scan must say no
    m2 = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    prof2 = build_profile(m2, space(3))
    assert not check_superiority(m2, prof2).ok
    with pytest.raises(InputError):
        check_superiority(m, prof, grid_size=1)


def test_net_growth_vanishes_at_capacity():
    m = RickerModel([10.0, 20.0], [0.5, 5.0], 0.5)
    for q in range(2):
        K = carrying_capacity(m, q)
        assert abs(net_growth(m, K, q)) <= m.D(K, q) * 1e-10
    assert net_growth(m, 0.0, 0) == pytest.approx(9.0)
