"""The compiled stepping core and its pure-Python twin must agree bitwise."""

import os
import subprocess
import sys

import numpy as np
import pytest

from selmut import _backend, _pycore
from selmut.dynamics import IntegratorConfig, integrate
from selmut.kernel import blend_toward, identity_kernel, uniform_kernel
from selmut.measure import AtomicMeasure, StrategySpace
from selmut.vitals import LogisticModel, RickerModel

needs_compiled = pytest.mark.skipif(
    not _backend.HAVE_COMPILED, reason="compiled core not built"
)


def space(n):
    return StrategySpace.grid_1d(0.0, float(n - 1), n)


def both(mu0, kern, model, cfg):
    a = integrate(mu0, kern, model, cfg, backend="compiled")
    b = integrate(mu0, kern, model, cfg, backend="python")
    return a, b


def assert_identical(a, b):
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.weights, b.weights)
    assert a.n_accepted == b.n_accepted and a.n_rejected == b.n_rejected
    assert a.min_weight_seen == b.min_weight_seen


@needs_compiled
def test_parity_pure_selection():
    sp = space(3)
    model = RickerModel([20.0, 10.0, 1.0], [5.0, 0.5, 0.5], 0.5)
    mu0 = AtomicMeasure(sp, [1.0, 1.0, 1.0])
    a, b = both(mu0, identity_kernel(sp), model, IntegratorConfig(t_end=200.0))
    assert_identical(a, b)


@needs_compiled
def test_parity_with_mutation_and_dense_output():
    sp = space(5)
    model = RickerModel([8.0, 10.0, 6.0, 3.0, 2.0],
                        [0.5, 0.5, 0.8, 0.5, 0.5], 0.5)
    kern = blend_toward(identity_kernel(sp), uniform_kernel(sp), 0.05)
    mu0 = AtomicMeasure(sp, [0.2, 0.1, 0.5, 0.7, 0.3])
    cfg = IntegratorConfig(t_end=80.0, dt_out=0.25)
    a, b = both(mu0, kern, model, cfg)
    assert_identical(a, b)


@needs_compiled
def test_parity_logistic_and_tabulated():
    sp = space(2)
    mu0 = AtomicMeasure(sp, [0.4, 0.6])
    cfg = IntegratorConfig(t_end=60.0)
    logi = LogisticModel([3.0, 2.0], [1.0, 1.0], [0.5, 0.5])
    assert_identical(*both(mu0, uniform_kernel(sp), logi, cfg))

    from selmut.vitals import TabulatedModel

    s = np.linspace(0.0, 10.0, 101)
    ref = RickerModel([10.0, 5.0], [0.5, 0.5], 0.5)
    tab = TabulatedModel(
        s,
        [[ref.B(float(x), q) for x in s] for q in range(2)],
        [[ref.D(float(x), q) for x in s] for q in range(2)],
    )
    assert_identical(*both(mu0, uniform_kernel(sp), tab, cfg))


@needs_compiled
def test_identity_fast_path_equals_full_kernel_loop():
    # an explicit identity matrix must take the fast path and still match
    # the generic row loop run on a bitwise-identical near-identity kernel
    sp = space(4)
    model = RickerModel([10.0, 7.0, 4.0, 2.0], [0.5, 0.5, 0.5, 0.5], 0.5)
    mu0 = AtomicMeasure(sp, [0.5, 0.5, 0.5, 0.5])
    cfg = IntegratorConfig(t_end=30.0)
    ident = identity_kernel(sp)
    full = blend_toward(ident, uniform_kernel(sp), 0.0)  # same matrix
    assert np.array_equal(ident.gamma, full.gamma)
    a = integrate(mu0, ident, model, cfg, backend="compiled")
    b = integrate(mu0, full, model, cfg, backend="compiled")
    assert_identical(a, b)


def test_python_core_module_flags():
    assert _pycore.compiled is False
    if _backend.HAVE_COMPILED:
        from selmut import _core

        assert _core.compiled is True


def test_get_backend_names():
    assert _backend.get_backend("python") is _pycore
    with pytest.raises(ValueError):
        _backend.get_backend("fortran")
    if _backend.HAVE_COMPILED:
        assert _backend.get_backend("compiled").compiled is True
    assert _backend.get_backend(None).compiled is _backend.HAVE_COMPILED


def test_custom_model_refuses_compiled_core():
    from selmut.errors import InputError
    from selmut.vitals import RateModel

    class Custom(RateModel):
        n_atoms = 1
        death_floor = 1.0

        def B(self, s, q):
            return 2.0 / (1.0 + s)

        def D(self, s, q):
            return 1.0

    sp = space(1)
    mu0 = AtomicMeasure(sp, [0.5])
    cfg = IntegratorConfig(t_end=40.0)
    traj = integrate(mu0, identity_kernel(sp), Custom(), cfg)  # generic path
    # R(s) = 2/(1+s) crosses 1 at s = 1, the only stable total
    assert traj.final_state().total == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(InputError):
        integrate(mu0, identity_kernel(sp), Custom(), cfg, backend="compiled")


def test_env_var_forces_python_backend():
    env = dict(os.environ, SELMUT_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c",
         "from selmut import _backend; print(_backend.BACKEND_NAME)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "python"


def test_env_var_rejects_unknown_backend():
    env = dict(os.environ, SELMUT_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import selmut"],
        capture_output=True, text=True, env=env,
    )
    assert out.returncode != 0
    assert "SELMUT_BACKEND" in out.stderr
