"""Signed n x n matrix measures on [0, inf) and the transforms built on them.

A measure is a finite list of Dirac atoms plus an optional density part.
Two density families are supported:

* ``MatExpDensity``: ``d(t) = H exp(F t) G`` with ``F`` Hurwitz; every
  transform has a closed form.
* ``SampledDensity``: values on a uniform grid plus a certified envelope
  ``|d(t)| <= K exp(-lam t)`` beyond the last sample.  Between samples the
  density is taken to be the piecewise-linear interpolant, and all
  integrals are computed exactly for that interpolant.

Measures are immutable; every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, GridError

__all__ = [
    "MatExpDensity",
    "SampledDensity",
    "SignedMatrixMeasure",
    "SampledKernel",
    "PiFunction",
    "total_mass",
    "total_mass_error",
    "cdf",
    "cdf_uniform",
    "pi_at",
    "pi_integral",
    "laplace",
    "laplace_many",
    "laplace_continued",
    "laplace_bound",
    "convolve",
    "density_uniform",
]


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


@dataclass(frozen=True)
class MatExpDensity:
    """Density ``t -> H @ expm(F t) @ G`` for ``t >= 0``."""

    H: np.ndarray
    F: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        H, F, G = _frozen(self.H), _frozen(self.F), _frozen(self.G)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ValueError("F must be square")
        m = F.shape[0]
        if H.ndim != 2 or H.shape[1] != m or G.ndim != 2 or G.shape[0] != m:
            raise ValueError(f"incompatible shapes H{H.shape} F{F.shape} G{G.shape}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)

    @property
    def order(self) -> int:
        return self.F.shape[0]

    @property
    def abscissa(self) -> float:
        """Largest real part of the spectrum of F."""
        if self.order == 0:
            return -np.inf
        return float(np.max(np.linalg.eigvals(self.F).real))

    def value(self, t: float) -> np.ndarray:
        return self.H @ expm(self.F * t) @ self.G

    def integral(self, t: float) -> np.ndarray:
        """``int_0^t d(u) du`` via the block exponential ``[[F, G], [0, 0]]``."""
        m, n = self.G.shape
        block = np.zeros((m + n, m + n))
        block[:m, :m] = self.F
        block[:m, m:] = self.G
        return self.H @ expm(block * t)[:m, m:]

    def total(self) -> np.ndarray:
        return -self.H @ np.linalg.solve(self.F, self.G)

    def first_moment(self) -> np.ndarray:
        """``int_0^inf t d(t) dt = H F^-2 G``."""
        return self.H @ np.linalg.solve(self.F, np.linalg.solve(self.F, self.G))

    def laplace(self, z: complex) -> np.ndarray:
        m = self.order
        return self.H @ np.linalg.solve(z * np.eye(m) - self.F, self.G)


@dataclass(frozen=True)
class SampledDensity:
    """Density sampled at ``j * step``; ``tail_bound = (K, lam)`` covers the rest."""

    step: float
    values: np.ndarray
    tail_bound: tuple[float, float]

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2] or len(vals) < 2:
            raise ValueError("sampled density needs an array of shape (K, n, n) with K >= 2")
        if not self.step > 0:
            raise ValueError("sampled density step must be positive")
        K, lam = self.tail_bound
        if K < 0 or lam <= 0:
            raise ValueError("tail bound needs K >= 0 and lam > 0")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "tail_bound", (float(K), float(lam)))

    @property
    def end(self) -> float:
        return self.step * (len(self.values) - 1)

    def tail_mass_bound(self) -> float:
        K, lam = self.tail_bound
        return K * np.exp(-lam * self.end) / lam

    def value(self, t: float) -> np.ndarray:
        x = t / self.step
        if x < 0 or x > len(self.values) - 1:
            return np.zeros(self.values.shape[1:])
        i = min(int(np.floor(x)), len(self.values) - 2)
        w = x - i
        return (1 - w) * self.values[i] + w * self.values[i + 1]

    def value_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        x = ts / self.step
        last = len(self.values) - 1
        i = np.clip(np.floor(x).astype(int), 0, last - 1)
        w = (x - i)[:, None, None]
        out = (1 - w) * self.values[i] + w * self.values[i + 1]
        out[(x < 0) | (x > last)] = 0.0
        return out

    def integral(self, t: float) -> np.ndarray:
        t = min(max(t, 0.0), self.end)
        h = self.step
        k = int(np.floor(t / h))
        k = min(k, len(self.values) - 1)
        vals = self.values
        full = h * (0.5 * vals[0] + vals[1:k].sum(axis=0) + 0.5 * vals[k]) if k > 0 else 0.0 * vals[0]
        rem = t - k * h
        if rem > 0 and k < len(vals) - 1:
            full = full + rem * (vals[k] + self.value(t)) / 2
        return full

    def total(self) -> np.ndarray:
        return self.integral(self.end)

    def first_moment(self) -> np.ndarray:
        h = self.step
        a = h * np.arange(len(self.values) - 1)[:, None, None]
        d0, d1 = self.values[:-1], self.values[1:]
        diff = d1 - d0
        cells = a * d0 * h + a * diff * h / 2 + d0 * h * h / 2 + diff * h * h / 3
        return cells.sum(axis=0)

    def laplace(self, z: complex) -> np.ndarray:
        h = self.step
        w = z * h
        if abs(w) < 1e-4:
            i0 = h * (1 - w / 2 + w * w / 6 - w**3 / 24)
            i1 = h * h * (0.5 - w / 3 + w * w / 8 - w**3 / 30)
        else:
            i0 = -np.expm1(-w) / z
            i1 = (1 - np.exp(-w) * (1 + w)) / (z * z)
        a = h * np.arange(len(self.values) - 1)
        d0, d1 = self.values[:-1], self.values[1:]
        weights = np.exp(-z * a)[:, None, None]
        return (weights * (d0 * i0 + (d1 - d0) / h * i1)).sum(axis=0)


Density = MatExpDensity | SampledDensity | None


@dataclass(frozen=True)
class SignedMatrixMeasure:
    """Delay measure: Dirac atoms ``(t_k, A_k)`` plus an optional density.

    ``decay_rate`` is a rate ``delta`` for which ``int e^{delta t} |eta|(dt)``
    is finite.  It is derived from the density when omitted
    (``-max Re eig(F) / 2`` or ``lam / 2``); atom-only measures default to 1.
    """

    dim: int
    atoms: tuple = ()
    density: Density = None
    decay_rate: float | None = None

    def __post_init__(self):
        n = int(self.dim)
        if n < 1:
            raise ValueError("dim must be a positive integer")
        atoms = []
        for loc, A in self.atoms:
            A = _frozen(A)
            if A.shape != (n, n):
                raise ValueError(f"atom weight has shape {A.shape}, expected {(n, n)}")
            if loc < 0:
                raise ValueError(f"atom location {loc} is negative")
            atoms.append((float(loc), A))
        atoms.sort(key=lambda a: a[0])
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "atoms", tuple(atoms))

        d = self.density
        if isinstance(d, MatExpDensity):
            if d.H.shape[0] != n or d.G.shape[1] != n:
                raise ValueError("matrix-exponential density does not match dim")
        elif isinstance(d, SampledDensity):
            if d.values.shape[1] != n:
                raise ValueError("sampled density does not match dim")
        elif d is not None:
            raise TypeError(f"unsupported density {type(d).__name__}")

        rate = self.decay_rate
        if rate is None:
            rate = 1.0
            if isinstance(d, MatExpDensity) and d.order:
                rate = -d.abscissa / 2
            elif isinstance(d, SampledDensity):
                rate = d.tail_bound[1] / 2
        rate = float(rate)
        if not rate > 0:
            raise ValueError("decay_rate must be positive")
        if isinstance(d, MatExpDensity) and d.order and not d.abscissa < -rate:
            raise ValueError(
                f"max Re eig(F) = {d.abscissa:.6g} must be below -decay_rate = {-rate:.6g}"
            )
        if isinstance(d, SampledDensity) and not d.tail_bound[1] > rate:
            raise ValueError("sampled tail rate must exceed decay_rate")
        object.__setattr__(self, "decay_rate", rate)

    # -- algebra -------------------------------------------------------------

    def __mul__(self, c: float) -> "SignedMatrixMeasure":
        c = float(c)
        d = self.density
        if isinstance(d, MatExpDensity):
            d = MatExpDensity(c * d.H, d.F, d.G)
        elif isinstance(d, SampledDensity):
            d = SampledDensity(d.step, c * d.values, (abs(c) * d.tail_bound[0], d.tail_bound[1]))
        return SignedMatrixMeasure(
            self.dim, tuple((t, c * A) for t, A in self.atoms), d, self.decay_rate
        )

    __rmul__ = __mul__

    def __add__(self, other: "SignedMatrixMeasure") -> "SignedMatrixMeasure":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        merged: dict[float, np.ndarray] = {}
        for t, A in self.atoms + other.atoms:
            merged[t] = merged.get(t, 0.0) + A
        d1, d2 = self.density, other.density
        if d1 is None:
            d = d2
        elif d2 is None:
            d = d1
        elif isinstance(d1, MatExpDensity) and isinstance(d2, MatExpDensity):
            m1, m2 = d1.order, d2.order
            F = np.zeros((m1 + m2, m1 + m2))
            F[:m1, :m1], F[m1:, m1:] = d1.F, d2.F
            d = MatExpDensity(np.hstack([d1.H, d2.H]), F, np.vstack([d1.G, d2.G]))
        elif (
            isinstance(d1, SampledDensity)
            and isinstance(d2, SampledDensity)
            and d1.step == d2.step
            and d1.values.shape == d2.values.shape
        ):
            tb = (d1.tail_bound[0] + d2.tail_bound[0], min(d1.tail_bound[1], d2.tail_bound[1]))
            d = SampledDensity(d1.step, d1.values + d2.values, tb)
        else:
            raise TypeError("cannot add densities of different kinds")
        return SignedMatrixMeasure(
            self.dim, tuple(merged.items()), d, min(self.decay_rate, other.decay_rate)
        )

    # -- helpers -------------------------------------------------------------

    @property
    def atom_mass(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for _, A in self.atoms:
            out = out + A
        return out

    @property
    def has_density(self) -> bool:
        d = self.density
        return d is not None and not (isinstance(d, MatExpDensity) and d.order == 0)

    def atom_cdf(self, t: float, left: bool = False) -> np.ndarray:
        """Atom mass on ``[0, t]`` (or ``[0, t)`` when ``left``)."""
        out = np.zeros((self.dim, self.dim))
        for loc, A in self.atoms:
            if loc < t or (loc == t and not left):
                out = out + A
        return out

    def density_value(self, t: float) -> np.ndarray:
        if not self.has_density or t < 0:
            return np.zeros((self.dim, self.dim))
        return self.density.value(t)

    def density_integral(self, t: float) -> np.ndarray:
        if not self.has_density or t <= 0:
            return np.zeros((self.dim, self.dim))
        return self.density.integral(t)

    def support_end(self) -> float:
        """Last atom location or end of sampled grid (inf for matexp)."""
        end = max((t for t, _ in self.atoms), default=0.0)
        if isinstance(self.density, SampledDensity):
            end = max(end, self.density.end)
        elif self.has_density:
            end = np.inf
        return end


# -- operations ---------------------------------------------------------------


def total_mass(measure: SignedMatrixMeasure) -> np.ndarray:
    """Total mass ``eta([0, inf))``, the level matrix of the error-correction form."""
    out = measure.atom_mass
    if measure.has_density:
        out = out + measure.density.total()
    return out


def total_mass_error(measure: SignedMatrixMeasure) -> float:
    """Absolute error bound attached to :func:`total_mass`."""
    if isinstance(measure.density, SampledDensity):
        return measure.density.tail_mass_bound()
    return 1e-12 * (1 + _norm(total_mass(measure)))


def cdf(measure: SignedMatrixMeasure, t, left: bool = False) -> np.ndarray:
    """``eta([0, t])``; zero for ``t < 0``.  Vectorised over 1-D ``t``."""
    if np.ndim(t):
        ts = np.asarray(t, dtype=float).ravel()
        n = measure.dim
        out = np.zeros((len(ts), n, n))
        for loc, A in measure.atoms:
            out[(ts > loc) if left else (ts >= loc)] += A
        if measure.has_density:
            h = ts[1] - ts[0] if len(ts) > 1 else 0.0
            if h > 0 and ts[0] == 0 and np.allclose(np.diff(ts), h, rtol=0, atol=1e-12 * h):
                out += _density_integral_uniform(measure, h, len(ts))
            else:
                out += np.stack([measure.density_integral(s) for s in ts])
        out[ts < 0] = 0.0
        return out
    t = float(t)
    if t < 0:
        return np.zeros((measure.dim, measure.dim))
    return measure.atom_cdf(t, left) + measure.density_integral(t)


def _density_integral_uniform(measure: SignedMatrixMeasure, h: float, count: int) -> np.ndarray:
    n = measure.dim
    out = np.zeros((count, n, n))
    d = measure.density
    if not measure.has_density:
        return out
    if isinstance(d, MatExpDensity):
        m = d.order
        block = np.zeros((m + n, m + n))
        block[:m, :m] = d.F
        block[:m, m:] = d.G
        step = expm(block * h)
        cur = np.eye(m + n)
        for k in range(count):
            out[k] = d.H @ cur[:m, m:]
            cur = cur @ step
        return out
    for k in range(count):
        out[k] = d.integral(k * h)
    return out


def cdf_uniform(measure: SignedMatrixMeasure, h: float, count: int, left: bool = False) -> np.ndarray:
    """``cdf`` at ``k h`` for ``k = 0..count-1`` (fast path for solvers)."""
    out = _density_integral_uniform(measure, h, count)
    ts = h * np.arange(count)
    tol = 1e-9 * h
    for loc, A in measure.atoms:
        # grid times within tol of an atom count as the atom location
        mask = ts > loc + tol if left else ts >= loc - tol
        out[mask] += A
    return out


def density_uniform(measure: SignedMatrixMeasure, h: float, count: int) -> np.ndarray:
    """Density values at ``k h`` for ``k = 0..count-1``."""
    n = measure.dim
    if not measure.has_density:
        return np.zeros((count, n, n))
    d = measure.density
    if isinstance(d, SampledDensity):
        return d.value_many(h * np.arange(count))
    out = np.zeros((count, n, n))
    step = expm(d.F * h)
    cur = d.G.copy()
    for k in range(count):
        out[k] = d.H @ cur
        cur = step @ cur
    return out


def pi_at(measure: SignedMatrixMeasure, t, left: bool = False) -> np.ndarray:
    """``pi(t) = eta([0, t]) - eta([0, inf))``."""
    return cdf(measure, t, left) - total_mass(measure)


def pi_integral(measure: SignedMatrixMeasure) -> np.ndarray:
    """``Pi([0, inf)) = int_0^inf pi(u) du = -int t eta(dt)``."""
    out = np.zeros((measure.dim, measure.dim))
    for loc, A in measure.atoms:
        out = out - loc * A
    if measure.has_density:
        out = out - measure.density.first_moment()
    return out


def laplace(measure: SignedMatrixMeasure, z: complex) -> np.ndarray:
    """``L[eta](z) = int e^{-z t} eta(dt)`` for ``Re z > -decay_rate``."""
    z = complex(z)
    if not z.real > -measure.decay_rate:
        raise DomainError(f"Re(z) = {z.real:.6g} is not above -decay_rate = {-measure.decay_rate:.6g}")
    out = np.zeros((measure.dim, measure.dim), dtype=complex)
    for loc, A in measure.atoms:
        out = out + np.exp(-z * loc) * A
    if measure.has_density:
        out = out + measure.density.laplace(z)
    return out


def laplace_continued(measure: SignedMatrixMeasure, z: complex) -> np.ndarray:
    """Closed-form continuation of :func:`laplace` past ``-decay_rate``.

    Atoms and matrix-exponential densities extend to every ``z`` outside the
    spectrum of ``F``; sampled densities have no continuation.
    """
    if isinstance(measure.density, SampledDensity):
        return laplace(measure, z)
    z = complex(z)
    out = np.zeros((measure.dim, measure.dim), dtype=complex)
    for loc, A in measure.atoms:
        out = out + np.exp(-z * loc) * A
    if measure.has_density:
        out = out + measure.density.laplace(z)
    return out


def laplace_many(measure: SignedMatrixMeasure, zs) -> np.ndarray:
    """Batched :func:`laplace` over a 1-D array of points, shape ``(len, n, n)``."""
    zs = np.asarray(zs, dtype=complex).ravel()
    if zs.size and not np.min(zs.real) > -measure.decay_rate:
        raise DomainError("some points lie outside the half-plane Re(z) > -decay_rate")
    n = measure.dim
    out = np.zeros((zs.size, n, n), dtype=complex)
    for loc, A in measure.atoms:
        out += np.exp(-zs * loc)[:, None, None] * A
    d = measure.density
    if isinstance(d, MatExpDensity) and d.order:
        m = d.order
        sys = zs[:, None, None] * np.eye(m) - d.F
        rhs = np.broadcast_to(d.G.astype(complex), (zs.size,) + d.G.shape)
        out += d.H @ np.linalg.solve(sys, rhs)
    elif isinstance(d, SampledDensity):
        for i, z in enumerate(zs):
            out[i] += d.laplace(z)
    return out


def laplace_bound(measure: SignedMatrixMeasure, eps: float) -> float:
    """Upper bound on ``sup_{Re z >= -eps} ||L[eta](z)||``."""
    bound = sum(np.exp(eps * loc) * _norm(A) for loc, A in measure.atoms)
    d = measure.density
    if isinstance(d, MatExpDensity) and d.order:
        rate = -d.abscissa - eps
        T = 40.0 / rate
        ts = np.linspace(0.0, T, 4001)
        vals = density_uniform(measure, ts[1], len(ts))
        norms = np.array([_norm(v) for v in vals]) * np.exp(eps * ts)
        bound += 1.1 * np.trapezoid(norms, ts) + norms[-1] / rate
    elif isinstance(d, SampledDensity):
        ts = d.step * np.arange(len(d.values))
        norms = np.array([_norm(v) for v in d.values]) * np.exp(eps * ts)
        K, lam = d.tail_bound
        bound += np.trapezoid(norms, ts) + K * np.exp(-(lam - eps) * d.end) / (lam - eps)
    return float(bound)


@dataclass(frozen=True)
class SampledKernel:
    """Matrix function sampled at ``k * step``, ``k = 0..len-1``; zero for t < 0."""

    step: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def horizon(self) -> float:
        return self.step * (len(self.values) - 1)

    def index(self, t: float) -> int:
        x = t / self.step
        k = int(round(x))
        if abs(x - k) > 1e-9 * max(1.0, abs(x)) or k < 0 or k >= len(self.values):
            raise GridError(f"t = {t!r} is not a point of the kernel grid (step {self.step!r})")
        return k

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation; zero for negative arguments and past the horizon."""
        x = t / self.step
        k = int(round(x))
        if abs(x - k) <= 1e-9 * max(1.0, abs(x)):
            if 0 <= k < len(self.values):
                return self.values[k]
            return np.zeros(self.values.shape[1:])
        if x < 0 or x > len(self.values) - 1:
            return np.zeros(self.values.shape[1:])
        i = int(np.floor(x))
        w = x - i
        return (1 - w) * self.values[i] + w * self.values[i + 1]


def convolve(measure: SignedMatrixMeasure, kernel: SampledKernel, t: float) -> np.ndarray:
    """``(kernel * eta)(t) = int kernel(t - u) eta(du)`` at a kernel grid time.

    Atoms use the kernel at ``t - t_k`` (linear interpolation off the grid);
    the density part uses the trapezoid rule on the kernel grid.
    """
    k = kernel.index(t)
    out = np.zeros((kernel.values.shape[1], measure.dim))
    for loc, A in measure.atoms:
        if loc <= t:
            out = out + kernel.at(t - loc) @ A
    if measure.has_density and k > 0:
        dens = density_uniform(measure, kernel.step, k + 1)
        w = np.full(k + 1, kernel.step)
        w[0] = w[-1] = kernel.step / 2
        # kernel(t - u_j) for u_j = j * step
        kv = kernel.values[k::-1]
        out = out + np.einsum("j,jab,jbc->ac", w, kv, dens)
    return out


@dataclass(frozen=True)
class PiFunction:
    """``pi(t)`` with a scanned decay certificate ``||pi(t)|| <= k_pi e^{-eps t}``."""

    measure: SignedMatrixMeasure
    epsilon: float = field(init=False)
    k_pi: float = field(init=False)
    total: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.measure
        eps = m.decay_rate / 2
        total = total_mass(m)
        T = 60.0 / m.decay_rate
        end = m.support_end()
        if np.isfinite(end):
            T = min(T, end + 1.0)
        count = 4001
        h = T / (count - 1)
        vals = cdf_uniform(m, h, count) - total
        ts = h * np.arange(count)
        scan = [np.exp(eps * ts) * np.linalg.norm(vals, 2, axis=(1, 2))]
        # pi is right-continuous with jumps at atoms: also scan the left limits
        for loc, _ in m.atoms:
            if loc > 0:
                scan.append(np.atleast_1d(np.exp(eps * loc) * _norm(pi_at(m, loc, left=True))))
        k_pi = 1.5 * max(float(np.max(s)) for s in scan)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "k_pi", k_pi)
        object.__setattr__(self, "total", _frozen(total))

    def __call__(self, t, left: bool = False) -> np.ndarray:
        return cdf(self.measure, t, left) - self.total

    def bound(self, t) -> np.ndarray:
        return self.k_pi * np.exp(-self.epsilon * np.asarray(t, dtype=float))


def atoms_from(pairs: Sequence[tuple[float, Sequence]]) -> tuple:
    return tuple((float(t), np.asarray(A, dtype=float)) for t, A in pairs)
