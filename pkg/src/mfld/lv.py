"""Lotka-Volterra simulators and the predator-prey dataset.

The deterministic model

    du1/dtau = a*u1 - b*u1*u2        u1(0) = xi1
    du2/dtau = c*u1*u2 - d*u2        u2(0) = xi2

is solved with classical RK4 at a fixed step.  Observed data come from the
stochastic variant (additive diffusion eps dB on each coordinate) solved
with an explicit Heun predictor-corrector, read at integer times and
corrupted with unit-variance Gaussian noise.  Inference runs over the two
free parameters through x1 = logit(a), x2 = logit(b/a); the remaining
coefficients stay at their data-generating values.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import rng as streams

DT = 0.01
HORIZON = 60.0
OBS_SPACING = 1.0
XI = (10.0, 10.0)
# Data-generating coefficients: a = logit^-1(-2), b = logit^-1(-4).
A_STAR = 1.0 / (1.0 + math.exp(2.0))
B_STAR = 1.0 / (1.0 + math.exp(4.0))
C_FIXED = 0.4
D_FIXED = 0.02
EPS_DATA = 0.4
POP_FLOOR = 1e-6  # stochastic paths are clamped below this


class SolverError(RuntimeError):
    def __init__(self, message: str, row: int = -1):
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class LVParams:
    a: float
    b: float
    c: float = C_FIXED
    d: float = D_FIXED
    xi1: float = XI[0]
    xi2: float = XI[1]
    dt: float = DT
    horizon: float = HORIZON
    eps: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("horizon must be a multiple of dt")


def _rhs(u: np.ndarray, abcd: np.ndarray) -> np.ndarray:
    """Vectorised drift for a batch of states u (k, 2) and coefficients (k, 4)."""
    u1, u2 = u[:, 0], u[:, 1]
    a, b, c, d = abcd[:, 0], abcd[:, 1], abcd[:, 2], abcd[:, 3]
    return np.stack([a * u1 - b * u1 * u2, c * u1 * u2 - d * u2], axis=1)


def lv_ode_batch(abcd: np.ndarray, obs_times: np.ndarray, xi=XI, dt: float = DT) -> np.ndarray:
    """RK4 trajectories for a batch of coefficient vectors.

    Args:
      abcd: (k, 4) coefficients.
      obs_times: times on the dt grid at which to report the state.

    Returns (k, len(obs_times), 2).  Raises SolverError on non-finite or
    non-positive states.
    """
    abcd = np.atleast_2d(np.asarray(abcd, dtype=np.float64))
    obs_times = np.asarray(obs_times, dtype=np.float64)
    obs_steps = np.rint(obs_times / dt).astype(int)
    if not np.allclose(obs_steps * dt, obs_times, atol=1e-9):
        raise ValueError("observation times must lie on the dt grid")
    k = abcd.shape[0]
    u = np.tile(np.asarray(xi, dtype=np.float64), (k, 1))
    out = np.empty((k, obs_times.size, 2))
    want = {int(s): i for i, s in enumerate(obs_steps)}
    if 0 in want:
        out[:, want[0]] = u
    n_steps = int(obs_steps.max()) if obs_steps.size else 0
    for step in range(1, n_steps + 1):
        k1 = _rhs(u, abcd)
        k2 = _rhs(u + 0.5 * dt * k1, abcd)
        k3 = _rhs(u + 0.5 * dt * k2, abcd)
        k4 = _rhs(u + dt * k3, abcd)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(u).all():
            row = int(np.argwhere(~np.isfinite(u).all(axis=1))[0, 0])
            raise SolverError(f"non-finite state at tau={step * dt:.2f} (batch row {row})", row=row)
        if (u <= 0).any():
            row = int(np.argwhere((u <= 0).any(axis=1))[0, 0])
            raise SolverError(f"population lost positivity at tau={step * dt:.2f} (batch row {row})", row=row)
        if step in want:
            out[:, want[step]] = u
    return out


def lv_ode(params: LVParams, obs_times) -> np.ndarray:
    """Deterministic RK4 trajectory sampled at obs_times; shape (len, 2)."""
    if params.eps != 0.0:
        raise ValueError("lv_ode solves the deterministic system; eps must be 0")
    abcd = np.array([[params.a, params.b, params.c, params.d]])
    return lv_ode_batch(abcd, np.asarray(obs_times, dtype=np.float64), xi=(params.xi1, params.xi2), dt=params.dt)[0]


def lv_sde_generate(params: LVParams, rng: np.random.Generator) -> np.ndarray:
    """Stochastic trajectory on the full dt grid via explicit Heun.

    The Brownian increment eps*sqrt(dt)*N(0,1) per coordinate is shared by
    the predictor and the corrector and added once per step.  Populations
    are clamped below at POP_FLOOR.  Returns (n_steps+1, 2).
    """
    n_steps = int(round(params.horizon / params.dt))
    abcd = np.array([[params.a, params.b, params.c, params.d]])
    u = np.array([[params.xi1, params.xi2]])
    out = np.empty((n_steps + 1, 2))
    out[0] = u[0]
    sqdt = math.sqrt(params.dt)
    for step in range(1, n_steps + 1):
        dw = params.eps * sqdt * rng.standard_normal(2)
        f0 = _rhs(u, abcd)
        pred = u + params.dt * f0 + dw
        u = u + 0.5 * params.dt * (f0 + _rhs(pred, abcd)) + dw
        np.maximum(u, POP_FLOOR, out=u)
        out[step] = u[0]
    return out


def obs_times() -> np.ndarray:
    """The observation grid: tau = 0..60 in steps of 1."""
    return np.arange(0.0, HORIZON + OBS_SPACING / 2, OBS_SPACING)


def make_dataset(seed: int, with_noise: bool = True, eps: float = EPS_DATA):
    """Observations from the stochastic model at the data-generating parameters.

    Returns (taus (61,), ys (61, 2)).  `with_noise=False` and `eps=0` give
    the deterministic test mode.
    """
    params = LVParams(a=A_STAR, b=B_STAR, eps=eps)
    gen = streams.stream(seed, streams.DATA, 0)
    path = lv_sde_generate(params, gen)
    taus = obs_times()
    idx = np.rint(taus / params.dt).astype(int)
    ys = path[idx].copy()
    if with_noise:
        ys += gen.standard_normal(ys.shape)
    return taus, ys


def save_dataset(path: str, taus: np.ndarray, ys: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tau", "y1", "y2"])
        for t, (y1, y2) in zip(taus, ys):
            writer.writerow([repr(float(t)), repr(float(y1)), repr(float(y2))])


def load_dataset(path: str):
    taus, ys = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            taus.append(float(row["tau"]))
            ys.append((float(row["y1"]), float(row["y2"])))
    return np.asarray(taus), np.asarray(ys)


def param_map(x) -> tuple:
    """Map unconstrained particle coordinates to (a, b).

    a = sigmoid(x1), b = a * sigmoid(x2); c and d stay fixed.
    """
    x = np.asarray(x, dtype=np.float64)
    a = _sigmoid(x[..., 0])
    b = a * _sigmoid(x[..., 1])
    return a, b


def param_map_batch(X: np.ndarray) -> np.ndarray:
    """(n, 2) particles -> (n, 4) full coefficient rows (a, b, c, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    a, b = param_map(X)
    out = np.empty((X.shape[0], 4))
    out[:, 0] = a
    out[:, 1] = b
    out[:, 2] = C_FIXED
    out[:, 3] = D_FIXED
    return out


def _sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    z = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
