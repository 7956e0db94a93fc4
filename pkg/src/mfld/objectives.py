"""Objective instantiations: each exposes the drift field evaluated against
an interaction coreset, a full-set diagnostic objective, and task metrics.

All drifts are the particle-system form of the Wasserstein steepest-descent
field: for pair-interaction energies q2 plus a linear term q3,

    drift(x) = (2/M) sum_j grad1 q2(x, xbar_j) + grad q3(x),

and for data-fit energies E[R1(<q1(u, .), mu>)], the chain rule through the
coreset average.  Diagnostics (objective, metrics) always use the full
particle set.
"""

import abc
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels, lv
from . import rng as streams
from .kernels import Gaussian, KernelSpec

CLIP_LEVEL = 1e3


class DriftModel(abc.ABC):
    """Interface consumed by the dynamics engine."""

    dim: int

    @abc.abstractmethod
    def drift(self, coreset_positions: np.ndarray, x: np.ndarray, rng=None) -> np.ndarray:
        """Drift at probe points x (n, d) against the frozen coreset (M, d)."""

    @abc.abstractmethod
    def objective(self, positions: np.ndarray) -> float:
        """Diagnostic value of the energy at the full particle set."""

    def metrics(self, positions: np.ndarray) -> dict:
        return {"objective": self.objective(positions)}


# ---------------------------------------------------------------------------
# Quantization of a target distribution under squared MMD.


@dataclass(frozen=True)
class GaussianMixture:
    """Isotropic Gaussian mixture target with closed-form kernel embeddings."""

    weights: np.ndarray
    means: np.ndarray  # (C, d)
    variances: np.ndarray  # (C,) isotropic

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        v = np.asarray(self.variances, dtype=np.float64)
        if (w <= 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to 1")
        if (v < 0).any():
            raise ValueError("variances must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    def embedding(self, kernel: Gaussian, X: np.ndarray) -> np.ndarray:
        """E_target[k(x, .)] for each row of X, via the Gaussian convolution identity."""
        l2 = kernel.lengthscale**2
        out = np.zeros(X.shape[0])
        for w, m, v in zip(self.weights, self.means, self.variances):
            s2 = l2 + v
            sq = ((X - m) ** 2).sum(axis=1)
            out += w * (l2 / s2) ** (X.shape[1] / 2) * np.exp(-sq / (2.0 * s2))
        return out

    def embedding_grad(self, kernel: Gaussian, X: np.ndarray) -> np.ndarray:
        """E_target[grad1 k(x, .)] for each row of X."""
        l2 = kernel.lengthscale**2
        out = np.zeros_like(X)
        for w, m, v in zip(self.weights, self.means, self.variances):
            s2 = l2 + v
            sq = ((X - m) ** 2).sum(axis=1)
            coef = w * (l2 / s2) ** (X.shape[1] / 2) * np.exp(-sq / (2.0 * s2)) / s2
            out += coef[:, None] * (m - X)
        return out

    def double_expectation(self, kernel: Gaussian, dim: int) -> float:
        l2 = kernel.lengthscale**2
        total = 0.0
        for wc, mc, vc in zip(self.weights, self.means, self.variances):
            for wb, mb, vb in zip(self.weights, self.means, self.variances):
                s2 = l2 + vc + vb
                sq = float(((mc - mb) ** 2).sum())
                total += wc * wb * (l2 / s2) ** (dim / 2) * math.exp(-sq / (2.0 * s2))
        return total


@dataclass(frozen=True)
class SampleSet:
    """Target given by samples; embeddings are sample averages."""

    points: np.ndarray

    def embedding(self, kernel: KernelSpec, X: np.ndarray) -> np.ndarray:
        return kernels.cross(kernel, X, self.points).mean(axis=1)

    def embedding_grad(self, kernel: KernelSpec, X: np.ndarray) -> np.ndarray:
        return kernels.grad1_mean(kernel, X, self.points)

    def double_expectation(self, kernel: KernelSpec, dim: int) -> float:
        return float(kernels.cross(kernel, self.points, self.points).mean())


def default_quantization_target(dim: int = 2) -> GaussianMixture:
    """Four equally weighted components at (+-2, +-2), std 0.5."""
    corners = np.array([[2.0, 2.0], [2.0, -2.0], [-2.0, 2.0], [-2.0, -2.0]])[:, :dim]
    return GaussianMixture(weights=np.full(4, 0.25), means=corners, variances=np.full(4, 0.25))


class MMDQuantizationModel(DriftModel):
    """Minimise squared MMD between the particle measure and a target."""

    def __init__(self, target=None, kernel: Optional[Gaussian] = None, dim: int = 2):
        self.kernel = kernel or Gaussian(1.0)
        self.target = target or default_quantization_target(dim)
        self.dim = dim

    def drift(self, coreset_positions, x, rng=None):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        interact = kernels.grad1_mean(self.kernel, x, coreset_positions)
        return 2.0 * (interact - self.target.embedding_grad(self.kernel, x))

    def objective(self, positions):
        positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
        kxx = float(kernels.cross(self.kernel, positions, positions).mean())
        cross_term = float(self.target.embedding(self.kernel, positions).mean())
        return kxx - 2.0 * cross_term + self.target.double_expectation(self.kernel, self.dim)

    def metrics(self, positions):
        return {"mmd2": self.objective(positions)}


# ---------------------------------------------------------------------------
# Online student-teacher mean-field two-layer network.

_NET_CHUNK = 8_000_000  # cap on the (particles*batch) x coreset work array


def _smooth_clip(psi: np.ndarray, c: float) -> np.ndarray:
    """c * tanh(psi / c): smooth clipping of the network output at +-c."""
    return c * np.tanh(psi / c)


class MeanFieldNetModel(DriftModel):
    """Two-layer ReLU network trained on fresh teacher batches.

    Particle layout: x = (w1 in R^dz, b1, w2), so dim = dz + 2.  The network
    output is smoothly clipped, psi~ = C tanh(psi / C) with C = 1e3.
    Covariates live on the unit sphere of R^dz; labels are teacher outputs
    plus Gaussian noise.
    """

    def __init__(
        self,
        seed: int,
        dz: int = 10,
        n_teacher: int = 100,
        n_modes: int = 10,
        batch_size: int = 32,
        label_noise_var: float = 1e-4,
        n_test: int = 256,
        clip: float = CLIP_LEVEL,
    ):
        self.dim = dz + 2
        self.dz = dz
        self.batch_size = batch_size
        self.label_noise_var = label_noise_var
        self.clip = clip
        gen = streams.stream(seed, streams.MODEL)
        centers = 2.0 * gen.standard_normal((n_modes, self.dim))
        assign = gen.integers(0, n_modes, size=n_teacher)
        teacher = centers[assign] + math.sqrt(0.2) * gen.standard_normal((n_teacher, self.dim))
        teacher[:, :dz] *= 0.8
        teacher[:, dz + 1] *= 0.8
        self.teacher = teacher
        self.z_test = self._sphere(gen, n_test)
        self.y_test = self.forward(self.teacher, self.z_test)
        self.y_test += math.sqrt(label_noise_var) * gen.standard_normal(n_test)

    def _sphere(self, gen, n: int) -> np.ndarray:
        z = gen.standard_normal((n, self.dz))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    def _psi_tilde(self, Z: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Clipped network output psi~(z, x), shape (nz, nx)."""
        pre = Z @ X[:, : self.dz].T + X[:, self.dz]
        psi = np.maximum(pre, 0.0) * X[:, self.dz + 1]
        return _smooth_clip(psi, self.clip)

    def forward(self, positions_subset: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Mean-field network output over the subset, one value per row of Z."""
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        subset = np.atleast_2d(np.asarray(positions_subset, dtype=np.float64))
        nz, m = Z.shape[0], subset.shape[0]
        if nz * m <= _NET_CHUNK:
            return self._psi_tilde(Z, subset).mean(axis=1)
        out = np.empty(nz)
        step = max(1, _NET_CHUNK // m)
        for lo in range(0, nz, step):
            out[lo : lo + step] = self._psi_tilde(Z[lo : lo + step], subset).mean(axis=1)
        return out

    def drift(self, coreset_positions, x, rng=None):
        if rng is None:
            raise ValueError("net drift draws fresh batches and needs an rng")
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n, b = X.shape[0], self.batch_size
        Z = self._sphere(rng, n * b)  # one fresh batch per particle
        y = self.forward(self.teacher, Z)
        y += math.sqrt(self.label_noise_var) * rng.standard_normal(n * b)
        return self.drift_given_batch(coreset_positions, X, Z.reshape(n, b, self.dz), y.reshape(n, b))

    def drift_given_batch(self, coreset_positions, x, Zb: np.ndarray, y: np.ndarray):
        """Drift under explicit per-particle batches (n, B, dz) and labels (n, B)."""
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n, b = Zb.shape[0], Zb.shape[1]
        h = self.forward(coreset_positions, Zb.reshape(n * b, self.dz))
        resid = h.reshape(n, b) - y

        w1, b1, w2 = X[:, : self.dz], X[:, self.dz], X[:, self.dz + 1]
        pre = np.einsum("nbk,nk->nb", Zb, w1) + b1[:, None]
        act = np.maximum(pre, 0.0)
        ind = (pre > 0.0).astype(np.float64)
        psi = act * w2[:, None]
        # d psi~ / d psi = 1 - tanh^2(psi / C), with tanh read back off the
        # clipped output
        tanh_u = _smooth_clip(psi, self.clip) / self.clip
        coeff = resid * (1.0 - tanh_u**2) / b
        out = np.empty_like(X)
        cw = coeff * ind * w2[:, None]
        out[:, : self.dz] = np.einsum("nb,nbk->nk", cw, Zb)
        out[:, self.dz] = cw.sum(axis=1)
        out[:, self.dz + 1] = (coeff * act).sum(axis=1)
        return out

    def test_loss(self, positions: np.ndarray) -> float:
        h = self.forward(positions, self.z_test)
        return float(np.mean(0.5 * (h - self.y_test) ** 2))

    def objective(self, positions):
        return self.test_loss(positions)

    def metrics(self, positions):
        return {"test_loss": self.test_loss(positions)}


# ---------------------------------------------------------------------------
# Predictive posterior for the misspecified Lotka-Volterra model.


class PrOLVModel(DriftModel):
    """Kernel-scoring-rule posterior over the two free predator-prey rates.

    The pair energy between parameters x and x' is the expectation of a
    product-of-Gaussians kernel under the two trajectory likelihoods; with
    observation variance v and kernel lengthscale l this collapses to

        q2(x, x') = prod_i (l^2/(l^2+2v)) exp(-||u_x(t_i)-u_x'(t_i)||^2 / (2(l^2+2v)))

    and the data term q3 analogously with (l^2+v).  Products are accumulated
    in log space.  Trajectory sensitivities are central finite differences
    (4 extra ODE solves per particle per drift evaluation).
    """

    dim = 2

    def __init__(self, taus: np.ndarray, ys: np.ndarray, ell: float = 1.0, obs_var: float = 1.0, fd_step: float = 1e-4):
        self.taus = np.asarray(taus, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.ell2 = ell**2
        self.obs_var = obs_var
        self.fd_step = fd_step
        d_y = self.ys.shape[1]
        self._pair_denom = 2.0 * (self.ell2 + 2.0 * obs_var)
        self._pair_log = (d_y / 2.0) * math.log(self.ell2 / (self.ell2 + 2.0 * obs_var))
        self._lin_denom = 2.0 * (self.ell2 + obs_var)
        self._lin_log = (d_y / 2.0) * math.log(self.ell2 / (self.ell2 + obs_var))

    @classmethod
    def from_seed(cls, seed: int, **kwargs):
        taus, ys = lv.make_dataset(seed)
        return cls(taus, ys, **kwargs)

    def trajectories(self, X: np.ndarray) -> np.ndarray:
        """Model trajectories u_x at the observation grid, (n, T, 2)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return lv.lv_ode_batch(lv.param_map_batch(X), self.taus)

    def log_pair(self, traj_a: np.ndarray, traj_b: np.ndarray) -> float:
        sq = float(((traj_a - traj_b) ** 2).sum())
        return self.taus.size * self._pair_log - sq / self._pair_denom

    def pair_kernel(self, traj_a: np.ndarray, traj_b: np.ndarray) -> float:
        """q2 between two trajectories (log-space product, then exponentiated)."""
        return math.exp(self.log_pair(traj_a, traj_b))

    def linear_term(self, traj: np.ndarray) -> float:
        """q3: the -2x data cross term of the squared MMD."""
        sq = float(((traj - self.ys) ** 2).sum())
        return -2.0 * math.exp(self.taus.size * self._lin_log - sq / self._lin_denom)

    def _pair_matrix(self, U_a: np.ndarray, U_b: np.ndarray) -> np.ndarray:
        """q2 values between two stacks of trajectories, (na, nb)."""
        A = U_a.reshape(U_a.shape[0], -1)
        B = U_b.reshape(U_b.shape[0], -1)
        sq = np.maximum(
            np.einsum("nf,nf->n", A, A)[:, None] + np.einsum("mf,mf->m", B, B)[None, :] - 2.0 * A @ B.T,
            0.0,
        )
        return np.exp(self.taus.size * self._pair_log - sq / self._pair_denom)

    def _lin_values(self, U: np.ndarray) -> np.ndarray:
        sq = ((U - self.ys) ** 2).sum(axis=(1, 2))
        return -2.0 * np.exp(self.taus.size * self._lin_log - sq / self._lin_denom)

    def _solve_with_jacobian(self, X: np.ndarray):
        """Trajectories plus central-difference sensitivities for each particle."""
        n = X.shape[0]
        h = self.fd_step
        stacked = [X]
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            stacked.extend([X + e, X - e])
        try:
            U_all = self.trajectories(np.concatenate(stacked, axis=0))
        except lv.SolverError as exc:
            particle = exc.row % n if exc.row >= 0 else -1
            raise lv.SolverError(f"trajectory solve failed for particle {particle}: {exc}", row=exc.row) from exc
        U = U_all[:n]
        J = np.empty((n, self.taus.size, 2, 2))
        for axis in range(2):
            plus = U_all[(1 + 2 * axis) * n : (2 + 2 * axis) * n]
            minus = U_all[(2 + 2 * axis) * n : (3 + 2 * axis) * n]
            J[:, :, :, axis] = (plus - minus) / (2.0 * h)
        return U, J

    def drift(self, coreset_positions, x, rng=None):
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        C = np.atleast_2d(np.asarray(coreset_positions, dtype=np.float64))
        m = C.shape[0]
        U, J = self._solve_with_jacobian(X)
        U_c = self.trajectories(C)

        Q2 = self._pair_matrix(U, U_c)  # (n, m)
        w = Q2.sum(axis=1)  # (n,)
        v = np.einsum("nm,mtc->ntc", Q2, U_c)
        delta_int = U * w[:, None, None] - v
        grad_int = (-4.0 / (self._pair_denom * m)) * np.einsum("ntcl,ntc->nl", J, delta_int)

        q3 = self._lin_values(U)
        delta_lin = U - self.ys[None, :, :]
        grad_lin = (-2.0 / self._lin_denom) * q3[:, None] * np.einsum("ntcl,ntc->nl", J, delta_lin)
        return grad_int + grad_lin

    def objective(self, positions):
        """Squared MMD between the predictive mixture and the observed data."""
        U = self.trajectories(positions)
        q2_mean = float(self._pair_matrix(U, U).mean())
        q3_mean = float(self._lin_values(U).mean())
        return q2_mean + q3_mean + 1.0

    def param_rmse(self, positions: np.ndarray) -> float:
        """RMSE of the posterior-mean rates against the data-generating ones."""
        a, b = lv.param_map(np.atleast_2d(positions))
        err_a = float(np.mean(a)) - lv.A_STAR
        err_b = float(np.mean(b)) - lv.B_STAR
        return math.sqrt((err_a**2 + err_b**2) / 2.0)

    def metrics(self, positions):
        return {"objective": self.objective(positions), "param_rmse": self.param_rmse(positions)}
