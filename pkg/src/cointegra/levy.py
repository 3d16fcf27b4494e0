"""Levy drivers on a grid and solution paths in moving-average form.

Random numbers come from a counter-based stream.  Increment ``k`` (covering
``((k-1) step, k step]``) belongs to block ``b = k // 4096``; each block is
generated by ``numpy.random.Generator(Philox(key=[seed, path_id],
counter=[0, 0, 0, (b + 2**63) mod 2**64]))`` in a fixed draw order, so any
window of increments can be regenerated on its own.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import CholeskyError, WindowError, XiError
from .kernel import KernelGrid
from .measure import SignedMatrixMeasure, pi_at, total_mass
from .spectral import CointegrationStructure

__all__ = [
    "GaussianJumps",
    "DiscreteJumps",
    "LevyModel",
    "IncrementGrid",
    "SolutionPath",
    "sample_levy",
    "granger_path",
    "project_xi",
    "ecf_residual",
    "variance_profile",
    "simulate_ensemble",
    "window_moments",
    "BLOCK",
]

BLOCK = 4096
_MASK64 = (1 << 64) - 1


def covariance_factor(cov: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Lower factor ``L`` with ``L L' = cov``; eigen square root when singular."""
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T, atol=tol, rtol=0):
        raise CholeskyError("covariance matrix is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(cov)
    if w.min() < -tol:
        raise CholeskyError(f"covariance has eigenvalue {w.min():.3g} below -{tol:g}")
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class GaussianJumps:
    mean: np.ndarray
    cov: np.ndarray

    def second_moment(self) -> np.ndarray:
        m = np.asarray(self.mean, dtype=float)
        return np.asarray(self.cov, dtype=float) + np.outer(m, m)

    def draw(self, rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
        L = covariance_factor(self.cov)
        return np.asarray(self.mean, dtype=float) + rng.standard_normal((count, dim)) @ L.T


@dataclass(frozen=True)
class DiscreteJumps:
    values: np.ndarray
    probs: np.ndarray

    def second_moment(self) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        return np.einsum("k,ki,kj->ij", np.asarray(self.probs, dtype=float), v, v)

    def draw(self, rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
        v = np.asarray(self.values, dtype=float)
        idx = rng.choice(len(v), size=count, p=np.asarray(self.probs, dtype=float))
        return v[idx]


@dataclass(frozen=True)
class LevyModel:
    """Drift, Gaussian covariance (per unit time) and optional compound Poisson jumps."""

    dim: int
    drift: np.ndarray = None
    gaussian_cov: np.ndarray = None
    jump_rate: float = 0.0
    jumps: GaussianJumps | DiscreteJumps | None = None

    def __post_init__(self):
        n = int(self.dim)
        drift = np.zeros(n) if self.drift is None else np.asarray(self.drift, dtype=float)
        cov = np.eye(n) if self.gaussian_cov is None else np.asarray(self.gaussian_cov, dtype=float)
        if drift.shape != (n,) or cov.shape != (n, n):
            raise ValueError("drift or covariance does not match dim")
        if self.jump_rate < 0:
            raise ValueError("jump rate must be nonnegative")
        if self.jump_rate > 0 and self.jumps is None:
            raise ValueError("a positive jump rate needs a jump distribution")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "gaussian_cov", cov)
        object.__setattr__(self, "_factor", covariance_factor(cov))

    @property
    def factor(self) -> np.ndarray:
        return self._factor

    @property
    def sigma(self) -> np.ndarray:
        """Covariance of ``Z_1``."""
        out = self.gaussian_cov.copy()
        if self.jump_rate > 0:
            out = out + self.jump_rate * self.jumps.second_moment()
        return out


def _block_generator(seed: int, path_id: int, block: int) -> np.random.Generator:
    # explicit uint64 arrays: plain ints above 2**53 lose bits on the way in
    counter = np.array([0, 0, 0, (block + (1 << 63)) & _MASK64], dtype=np.uint64)
    key = np.array([seed & _MASK64, path_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _block_increments(model: LevyModel, step: float, seed: int, path_id: int, block: int):
    rng = _block_generator(seed, path_id, block)
    n = model.dim
    out = model.drift * step + np.sqrt(step) * rng.standard_normal((BLOCK, n)) @ model.factor.T
    jumps = 0
    if model.jump_rate > 0:
        counts = rng.poisson(model.jump_rate * step, BLOCK)
        jumps = int(counts.sum())
        if jumps:
            sizes = model.jumps.draw(rng, jumps, n)
            owner = np.repeat(np.arange(BLOCK), counts)
            np.add.at(out, owner, sizes)
        return out, counts
    return out, np.zeros(BLOCK, dtype=np.int64)


@dataclass(frozen=True)
class IncrementGrid:
    """Increments ``dZ_k`` for ``k = k0 + 1 .. k_end``; ``Z`` vanishes at index 0."""

    step: float
    k0: int
    increments: np.ndarray
    seed: int
    path_id: int = 0
    jump_counts: np.ndarray | None = field(default=None, repr=False)
    model: LevyModel | None = field(default=None, repr=False)

    @property
    def k_end(self) -> int:
        return self.k0 + len(self.increments)

    @property
    def count(self) -> int:
        return len(self.increments)

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    def level_times(self) -> np.ndarray:
        return self.step * np.arange(self.k0, self.k_end + 1)

    def levels(self) -> np.ndarray:
        """``Z`` at indices ``k0 .. k_end`` with ``Z = 0`` at index 0."""
        Z = np.zeros((self.count + 1, self.dim))
        np.cumsum(self.increments, axis=0, out=Z[1:])
        return Z - Z[-self.k0] if self.k0 <= 0 <= self.k_end else Z

    def coarsen(self, factor: int) -> "IncrementGrid":
        """Sum blocks of ``factor`` increments (the index grid must align)."""
        if self.k0 % factor or self.k_end % factor:
            raise ValueError("increment window is not aligned with the coarsening factor")
        inc = self.increments.reshape(-1, factor, self.dim).sum(axis=1)
        counts = None if self.jump_counts is None else self.jump_counts.reshape(-1, factor).sum(axis=1)
        return IncrementGrid(self.step * factor, self.k0 // factor, inc, self.seed, self.path_id, counts, self.model)

    def scaled(self, a: float) -> "IncrementGrid":
        return IncrementGrid(self.step, self.k0, a * self.increments, self.seed, self.path_id, None, self.model)

    def __add__(self, other: "IncrementGrid") -> "IncrementGrid":
        if (other.step, other.k0, other.count) != (self.step, self.k0, self.count):
            raise ValueError("increment grids do not match")
        return IncrementGrid(self.step, self.k0, self.increments + other.increments, self.seed, self.path_id)


def sample_levy(
    model: LevyModel,
    step: float,
    window: tuple[float, float],
    seed: int,
    path_id: int = 0,
) -> IncrementGrid:
    """Increments on ``[-T_burn, T_max]``; identical for identical ``(seed, path_id)``."""
    if not step > 0:
        raise ValueError("step must be positive")
    t_burn, t_max = window
    k0 = -int(np.ceil(t_burn / step - 1e-9))
    k_end = int(np.floor(t_max / step + 1e-9))
    if k_end <= k0:
        raise ValueError("empty simulation window")
    first, last = k0 + 1, k_end  # increment indices
    b_first, b_last = first // BLOCK, last // BLOCK
    parts, counts = [], []
    for b in range(b_first, b_last + 1):
        inc, cnt = _block_increments(model, step, seed, path_id, b)
        lo = max(first - b * BLOCK, 0)
        hi = min(last - b * BLOCK + 1, BLOCK)
        parts.append(inc[lo:hi])
        counts.append(cnt[lo:hi])
    return IncrementGrid(step, k0, np.concatenate(parts), int(seed), int(path_id), np.concatenate(counts), model)


@dataclass(frozen=True)
class SolutionPath:
    """``X`` at ``times``; ``Z`` is kept alongside for residual checks."""

    times: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    xi: np.ndarray
    c0: np.ndarray
    step: float
    kernel_horizon: float
    truncation_bound: float
    path_id: int = 0

    def index(self, t: float) -> int:
        k = int(round((t - self.times[0]) / self.step))
        if not 0 <= k < len(self.times) or abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise WindowError(f"t = {t} is not on the path grid")
        return k


def project_xi(structure: CointegrationStructure, xi) -> np.ndarray:
    """Orthogonal projection of ``xi`` onto the null space of ``Pi0``."""
    b = structure.beta_perp
    return b @ (b.T @ np.asarray(xi, dtype=float))


def _check_xi(structure: CointegrationStructure, xi: np.ndarray) -> None:
    pi0 = structure.pi0
    scale = np.linalg.norm(pi0, 2) * np.linalg.norm(xi)
    if np.linalg.norm(pi0 @ xi) > 1e-8 * scale:
        raise XiError("Pi0 xi must vanish; project xi onto the null space of Pi0 first")


def granger_path(
    kernel: KernelGrid,
    structure: CointegrationStructure,
    incr: IncrementGrid,
    xi=None,
) -> SolutionPath:
    """``X_m = xi + C0 Z_m + sum_{k <= m} C((m - k) step) dZ_k``.

    The sum runs over the kernel horizon; output starts at the first index
    whose full window of increments is available.  Raises WindowError when
    that index lies after 0 (burn-in shorter than the kernel horizon).
    """
    n = structure.dim
    xi = np.zeros(n) if xi is None else np.asarray(xi, dtype=float)
    _check_xi(structure, xi)
    h = incr.step
    C = kernel.c if abs(kernel.step - h) < 1e-12 * h else kernel.resample(h, "c")
    L = len(C) - 1
    m_first = incr.k0 + 1 + L
    if m_first > 0:
        raise WindowError(
            f"burn-in {-incr.k0 * h:g} must exceed the kernel horizon {L * h:g} by one step"
        )
    dZ = incr.increments
    # ma[j] = sum_l C[l] dZ[j - l]; fully covered for j >= L
    ma = np.zeros((len(dZ), n))
    for i in range(n):
        for j in range(n):
            ma[:, i] += fftconvolve(C[:, i, j], dZ[:, j])[: len(dZ)]
    X_ma = ma[L:]
    Z = incr.levels()[L + 1 :]
    X = xi + Z @ structure.c0.T + X_ma
    times = h * np.arange(m_first, incr.k_end + 1)
    tr = 0.0
    if incr.model is not None:
        tr = float(np.trace(incr.model.sigma))
    bound = kernel.truncation_error_bound * np.sqrt(tr * max(kernel.horizon, h))
    return SolutionPath(times, X, Z, xi, structure.c0, h, L * h, float(bound), incr.path_id)


def ecf_residual(path: SolutionPath, measure: SignedMatrixMeasure, s: float, t: float) -> np.ndarray:
    """Residual of the error-correction form between grid times ``s < t``.

    ``X_t - X_s - Pi0 int_s^t X du - int_0^H pi(u) (X_{t-u} - X_{s-u}) du - (Z_t - Z_s)``
    with trapezoid quadrature and ``H`` the kernel horizon.
    """
    if not s < t:
        raise ValueError("need s < t")
    h = path.step
    i_s, i_t = path.index(s), path.index(t)
    L = int(round(path.kernel_horizon / h))
    if i_s - L < 0:
        raise WindowError("not enough history before s for the increment integral")
    pi0 = total_mass(measure)
    X = path.X
    level = pi0 @ np.trapezoid(X[i_s : i_t + 1], dx=h, axis=0)
    u = h * np.arange(L + 1)
    pi = pi_at(measure, u)
    pim = 0.5 * (pi + pi_at(measure, u, left=True))
    pim[0] = pi[0]
    lag = X[i_t - L : i_t + 1][::-1] - X[i_s - L : i_s + 1][::-1]
    incr = np.trapezoid(np.einsum("kij,kj->ki", pim, lag), dx=h, axis=0)
    return X[i_t] - X[i_s] - level - incr - (path.Z[i_t] - path.Z[i_s])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COINTEGRA_THREADS", "0")) or os.cpu_count() or 1)
    except ValueError:
        return 1


def simulate_ensemble(
    kernel: KernelGrid,
    structure: CointegrationStructure,
    model: LevyModel,
    paths: int,
    t_max: float,
    seed: int,
    xi=None,
    burn: float | None = None,
) -> list[SolutionPath]:
    """Independent paths ``path_id = 0..paths-1``, returned sorted by id."""
    burn = 2 * kernel.horizon if burn is None else burn

    def one(pid: int) -> SolutionPath:
        incr = sample_levy(model, kernel.step, (burn, t_max), seed, pid)
        return granger_path(kernel, structure, incr, xi)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        out = list(pool.map(one, range(paths)))
    return sorted(out, key=lambda p: p.path_id)


def variance_profile(ensemble, gamma, t_from: float = 0.0):
    """Cross-sectional ``Var(gamma'(X_t - X_{t_from}))`` and its least-squares slope.

    The slope is fitted over the final half of the horizon.
    """
    if len(ensemble) < 2:
        raise ValueError("need at least two paths")
    gamma = np.asarray(gamma, dtype=float)
    p0 = ensemble[0]
    i0 = p0.index(t_from)
    proj = np.stack([p.X[i0:] @ gamma for p in ensemble])
    proj = proj - proj[:, :1]
    var = proj.var(axis=0, ddof=1)
    times = p0.times[i0:]
    half = len(times) // 2
    slope = float(np.polyfit(times[half:], var[half:], 1)[0])
    return times, var, slope


def window_moments(series: np.ndarray, windows: int = 4):
    """Means, variances and standard errors of the mean over equal windows."""
    series = np.asarray(series, dtype=float)
    parts = np.array_split(series, windows)
    means = np.array([p.mean(axis=0) for p in parts])
    vars_ = np.array([p.var(axis=0, ddof=1) for p in parts])
    sems = np.sqrt(vars_ / np.array([len(p) for p in parts]).reshape(-1, *([1] * (series.ndim - 1))))
    return means, vars_, sems
