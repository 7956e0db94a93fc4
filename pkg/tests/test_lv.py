import math

import numpy as np
import pytest

from mfld import lv
from mfld.rng import DATA, stream


def test_all_zero_rates_constant_trajectory():
    params = lv.LVParams(a=0.0, b=0.0, c=0.0, d=0.0)
    traj = lv.lv_ode(params, [0.0, 1.0, 30.0, 60.0])
    assert np.allclose(traj, [10.0, 10.0])


def test_decoupled_exponentials():
    params = lv.LVParams(a=lv.A_STAR, b=0.0, c=0.0, d=0.02)
    traj = lv.lv_ode(params, [1.0])
    # xi1 e^{a tau}, xi2 e^{-d tau}: closed form from the decoupled system
    assert traj[0, 0] == pytest.approx(10.0 * math.exp(lv.A_STAR), rel=1e-8)
    assert traj[0, 1] == pytest.approx(10.0 * math.exp(-0.02), rel=1e-8)


def test_rk4_step_halving_convergence():
    params = lv.LVParams(a=lv.A_STAR, b=lv.B_STAR)
    coarse = lv.lv_ode(params, [60.0])
    fine = lv.lv_ode(lv.LVParams(a=lv.A_STAR, b=lv.B_STAR, dt=0.005), [60.0])
    # the prey orbit dips to ~1e-65 at these rates, where relative error is
    # vacuous; the absolute floor covers that regime
    assert np.allclose(coarse, fine, rtol=1e-6, atol=1e-12)
    # order >= 3.5: compare dt vs dt/2 against dt/4 as the reference
    finest = lv.lv_ode(lv.LVParams(a=lv.A_STAR, b=lv.B_STAR, dt=0.0025), [60.0])
    e1 = np.abs(coarse - finest).max()
    e2 = np.abs(fine - finest).max()
    assert e1 / e2 >= 2.0**3.5


def test_ode_rejects_off_grid_times():
    with pytest.raises(ValueError):
        lv.lv_ode(lv.LVParams(a=0.1, b=0.0), [0.005])


def test_sde_deterministic_limit():
    params = lv.LVParams(a=lv.A_STAR, b=0.0, c=0.0, d=0.02, eps=0.0, horizon=1.0)
    path = lv.lv_sde_generate(params, stream(0, DATA, 0))
    assert path[-1, 0] == pytest.approx(10.0 * math.exp(lv.A_STAR), rel=1e-4)
    assert path[-1, 1] == pytest.approx(10.0 * math.exp(-0.02), rel=1e-4)


def test_sde_pure_diffusion_variance():
    params = lv.LVParams(a=0.0, b=0.0, c=0.0, d=0.0, eps=0.4, horizon=1.0)
    finals = np.array([lv.lv_sde_generate(params, stream(s, DATA, 1))[-1, 0] for s in range(10_000)])
    var = (finals - 10.0).var()
    assert abs(var / params.eps**2 - 1.0) <= 0.05


def test_sde_population_floor():
    params = lv.LVParams(a=0.0, b=0.0, c=0.0, d=0.0, xi1=1e-5, xi2=1e-5, eps=50.0, horizon=1.0)
    path = lv.lv_sde_generate(params, stream(0, DATA, 2))
    assert (path >= lv.POP_FLOOR).all()


def test_dataset_shape_and_determinism():
    taus, ys = lv.make_dataset(42)
    assert taus.shape == (61,)
    assert ys.shape == (61, 2)
    taus2, ys2 = lv.make_dataset(42)
    assert np.array_equal(ys, ys2)
    _, ys3 = lv.make_dataset(43)
    assert not np.array_equal(ys, ys3)


def test_dataset_noise_free_mode_matches_ode():
    taus, ys = lv.make_dataset(0, with_noise=False, eps=0.0)
    ref = lv.lv_ode(lv.LVParams(a=lv.A_STAR, b=lv.B_STAR), taus)
    # Heun is order 2 and its paths sit on the population floor where the
    # exact prey orbit is ~1e-65
    assert np.allclose(ys, ref, rtol=5e-3, atol=2e-6)


def test_dataset_csv_roundtrip(tmp_path):
    taus, ys = lv.make_dataset(7)
    path = tmp_path / "lv.csv"
    lv.save_dataset(path, taus, ys)
    t2, y2 = lv.load_dataset(path)
    assert np.array_equal(taus, t2)
    assert np.array_equal(ys, y2)
    lv.save_dataset(tmp_path / "lv2.csv", t2, y2)
    assert (tmp_path / "lv.csv").read_bytes() == (tmp_path / "lv2.csv").read_bytes()


def test_param_map():
    a, b = lv.param_map(np.array([0.0, 0.0]))
    assert a == pytest.approx(0.5)
    assert b == pytest.approx(0.25)
    a2, _ = lv.param_map(np.array([-2.0, 0.0]))
    assert a2 == pytest.approx(lv.A_STAR, rel=1e-12)
    rng = np.random.default_rng(0)
    X = 5 * rng.standard_normal((100, 2))
    a3, b3 = lv.param_map(X)
    assert ((a3 > 0) & (a3 < 1)).all()
    assert ((b3 > 0) & (b3 < a3)).all()


def test_positivity_assertion():
    # a huge predation coefficient drives RK4 through zero -> solver error
    with pytest.raises(lv.SolverError):
        lv.lv_ode(lv.LVParams(a=0.0, b=80.0, c=0.0, d=0.0), [60.0])
