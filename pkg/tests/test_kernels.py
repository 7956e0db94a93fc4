import math

import numpy as np
import pytest

from mfld import kernels
from mfld.kernels import Gaussian, SobolevSum

# Closed-form reference values, computed symbolically (sympy) from the
# Bernoulli polynomials and the Gaussian form.
SOB_DIAG_123_D1 = 7.4892007250876275  # pi^2/3 + (2pi)^4/720 + (2pi)^6/30240
SOB_S1_AT_HALF = -(math.pi**2) / 6.0
SOB_GRAD_S1_AT_QUARTER = -(math.pi**2)
SUP_S1_D2 = (1.0 + math.pi**2 / 3.0) ** 2 - 1.0


def test_gaussian_eval_values():
    k = Gaussian(1.0)
    assert kernels.eval(k, [0.0, 0.0], [0.0, 0.0]) == 1.0
    assert kernels.eval(k, [0.0], [1.0]) == pytest.approx(math.exp(-0.5), rel=1e-12)
    wide = Gaussian(2.0)
    assert kernels.eval(wide, [0.0], [1.0]) == pytest.approx(math.exp(-1.0 / 8.0), rel=1e-12)


def test_sobolev_eval_values():
    assert kernels.eval(SobolevSum((1,)), [0.75], [0.25]) == pytest.approx(SOB_S1_AT_HALF, rel=1e-12)
    assert kernels.eval(SobolevSum((1, 2, 3)), [0.3], [0.3]) == pytest.approx(SOB_DIAG_123_D1, rel=1e-12)


def test_gaussian_grad_values():
    k = Gaussian(1.0)
    assert np.allclose(kernels.grad1(k, [1.0, 2.0], [1.0, 2.0]), 0.0)
    g = kernels.grad1(k, [1.0, 0.0], [0.0, 0.0])
    assert g == pytest.approx([-math.exp(-0.5), 0.0], rel=1e-12)


def test_sobolev_grad_value():
    g = kernels.grad1(SobolevSum((1,)), [0.5], [0.25])
    assert g[0] == pytest.approx(SOB_GRAD_S1_AT_QUARTER, rel=1e-12)


def test_sup_bound():
    assert kernels.sup_bound(Gaussian(2.0), 5) == 1.0
    assert kernels.sup_bound(SobolevSum((1, 2, 3)), 1) == pytest.approx(SOB_DIAG_123_D1, rel=1e-12)
    assert kernels.sup_bound(SobolevSum((1,)), 2) == pytest.approx(SUP_S1_D2, rel=1e-4)


def test_validation():
    with pytest.raises(ValueError):
        Gaussian(-1.0)
    with pytest.raises(ValueError):
        SobolevSum(())
    with pytest.raises(ValueError):
        SobolevSum((4,))
    with pytest.raises(ValueError):
        kernels.eval(Gaussian(), [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        kernels.eval(Gaussian(), [np.nan], [1.0])


@pytest.mark.parametrize("kern", [Gaussian(1.0), Gaussian(0.5), SobolevSum((1,)), SobolevSum((1, 2, 3))])
def test_symmetry(kern):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = rng.integers(1, 5)
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        assert kernels.eval(kern, x, y) == kernels.eval(kern, y, x)


@pytest.mark.parametrize("kern", [Gaussian(1.0), SobolevSum((1, 2, 3)), SobolevSum((2,))])
def test_gradient_matches_finite_differences(kern):
    rng = np.random.default_rng(1)
    step = 1e-5
    checked = 0
    while checked < 200:
        d = int(rng.integers(1, 4))
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        if isinstance(kern, SobolevSum):
            frac = (x - y) - np.floor(x - y)
            # keep away from the wrap-around discontinuity of the fractional part
            if (frac < 1e-3).any() or (frac > 1 - 1e-3).any():
                continue
        grad = kernels.grad1(kern, x, y)
        for axis in range(d):
            e = np.zeros(d)
            e[axis] = step
            fd = (kernels.eval(kern, x + e, y) - kernels.eval(kern, x - e, y)) / (2 * step)
            assert grad[axis] == pytest.approx(fd, rel=1e-4, abs=1e-7)
        checked += 1


@pytest.mark.parametrize("kern", [Gaussian(1.0), SobolevSum((1,)), SobolevSum((1, 2, 3))])
def test_positive_semidefinite(kern):
    rng = np.random.default_rng(2)
    kappa = kernels.sup_bound(kern, 3)
    for _ in range(20):
        pts = rng.standard_normal((10, 3))
        gram = kernels.cross(kern, pts, pts)
        eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
        assert eigs.min() >= -1e-8 * kappa


def test_sobolev_periodicity():
    kern = SobolevSum((1, 2, 3))
    rng = np.random.default_rng(3)
    for _ in range(100):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        shift = rng.integers(-3, 4, size=3).astype(float)
        assert kernels.eval(kern, x + shift, y) == pytest.approx(kernels.eval(kern, x, y), abs=1e-12)


@pytest.mark.parametrize("kern,dim", [(Gaussian(1.0), 3), (SobolevSum((1, 2, 3)), 2)])
def test_boundedness(kern, dim):
    rng = np.random.default_rng(4)
    kappa = kernels.sup_bound(kern, dim)
    bound = kappa if isinstance(kern, Gaussian) else kappa * dim * len(kern.orders)
    pts = rng.standard_normal((200, dim)) * 3
    vals = kernels.cross(kern, pts, pts)
    assert np.abs(vals).max() <= bound + 1e-12


def test_vectorised_forms_match_scalar():
    rng = np.random.default_rng(5)
    for kern in (Gaussian(0.7), SobolevSum((1, 3))):
        X = rng.standard_normal((4, 3))
        Y = rng.standard_normal((6, 3))
        gram = kernels.cross(kern, X, Y)
        for i in range(4):
            for j in range(6):
                assert gram[i, j] == pytest.approx(kernels.eval(kern, X[i], Y[j]), rel=1e-12)
        gm = kernels.grad1_mean(kern, X, Y)
        for i in range(4):
            manual = np.mean([kernels.grad1(kern, X[i], Y[j]) for j in range(6)], axis=0)
            assert np.allclose(gm[i], manual, rtol=1e-10, atol=1e-12)
        batched = kernels.cross_batch(kern, np.stack([X, X + 1.0]))
        assert np.allclose(batched[0], kernels.cross(kern, X, X))
        assert np.allclose(batched[1], kernels.cross(kern, X + 1.0, X + 1.0))
