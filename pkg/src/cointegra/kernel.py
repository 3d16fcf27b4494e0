"""Granger kernels of an MSDDE: ``C~``, ``C = C~ - C0`` and ``f``.

Both kernels solve a delay equation driven by the same measure:

* ``C~' = C~ * eta`` with ``C~(0) = I`` and ``C~ = 0`` on negative times;
* ``f(t) = int_0^t (f * eta)(u) du - eta([0, t])``.

They are written as ``Y' = ((Y + phi) * eta)`` for a continuous unknown ``Y``
that vanishes on ``(-inf, 0]``: ``phi = I`` gives ``Y = C~ - I`` and
``phi = -eta([0, .])`` gives ``Y = f + eta([0, .])``.  The two systems are
stacked row-wise (convolution with ``eta`` acts from the right) and advanced
together by classical RK4.  Delayed values come from cubic interpolation of
the stored history, with stencils kept inside the smooth pieces between
atom-induced kinks.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
from scipy.integrate import simpson

from .errors import GridError, InstabilityError, PreconditionError, VerificationError
from .measure import (
    MatExpDensity,
    SampledDensity,
    SampledKernel,
    SignedMatrixMeasure,
    cdf,
    cdf_uniform,
    density_uniform,
    pi_at,
    total_mass,
)
from .spectral import (
    STATIONARY,
    CharacteristicFunction,
    CointegrationStructure,
    check_conditions,
    cointegration_structure,
)

__all__ = [
    "KernelGrid",
    "solve_kernel",
    "default_step",
    "truncation_horizon",
    "laplace_check",
    "integral_of_f",
    "ecf_kernel_residual",
    "stationary_kernel_g",
]


# -- interpolation -------------------------------------------------------------


_WEIGHT_CACHE: dict = {}


def _lagrange_weights(x: float, count: int) -> np.ndarray:
    """Weights at offset ``x`` for nodes ``0..count-1``."""
    key = (round(x, 12), count)
    w = _WEIGHT_CACHE.get(key)
    if w is None:
        w = np.ones(count)
        for i in range(count):
            for j in range(count):
                if i != j:
                    w[i] *= (x - j) / (i - j)
        if len(_WEIGHT_CACHE) < 4096:
            _WEIGHT_CACHE[key] = w
    return w


def cubic_sample(values: np.ndarray, x: float, breaks=(), limit: int | None = None) -> np.ndarray:
    """Cubic Lagrange interpolation of ``values`` at fractional index ``x``.

    The 4-point stencil stays inside ``[lo, hi]``, the smooth piece between
    the sorted grid indices ``breaks`` that brackets ``x``; ``limit`` caps
    the highest usable index.
    """
    last = len(values) - 1 if limit is None else limit
    j = int(np.floor(x))
    if j >= last:
        return values[last]
    if x - j < 1e-12:
        return values[j]
    lo, hi = 0, last
    if breaks:
        pos = bisect.bisect_right(breaks, j)
        if pos:
            lo = max(lo, breaks[pos - 1])
        pos = bisect.bisect_left(breaks, j + 1)
        if pos < len(breaks):
            hi = min(hi, breaks[pos])
    start = max(min(j - 1, hi - 3), lo)
    count = min(start + 4, hi + 1) - start
    w = _lagrange_weights(x - start, count)
    return np.tensordot(w, values[start : start + count], axes=1)


# -- the grid ------------------------------------------------------------------


@dataclass(frozen=True)
class KernelGrid:
    """Kernels sampled at ``k * step`` for ``k = 0..N``.

    ``f`` is right-continuous; it jumps where ``eta`` has atoms.  Values
    between grid points come from :meth:`at` (cubic interpolation).
    """

    step: float
    horizon: float
    c_tilde: np.ndarray
    c: np.ndarray
    f: np.ndarray
    c0: np.ndarray
    truncation_error_bound: float
    breaks: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return self.c0.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(len(self.c))

    def series(self, which: str) -> np.ndarray:
        return {"c_tilde": self.c_tilde, "ctilde": self.c_tilde, "c": self.c, "f": self.f}[which]

    def at(self, t: float, which: str = "c") -> np.ndarray:
        """Cubic interpolation; zero for ``t < 0``, the last sample past the horizon."""
        if t < 0:
            return np.zeros_like(self.c0)
        return cubic_sample(self.series(which), t / self.step, self.breaks)

    def resample(self, step: float, which: str = "c") -> np.ndarray:
        """Values on a different uniform grid covering the same horizon."""
        count = int(np.floor(self.horizon / step + 1e-9)) + 1
        ratio = step / self.step
        k = int(round(ratio))
        src = self.series(which)
        if abs(ratio - k) < 1e-9 and k >= 1:
            return src[::k][:count].copy()
        return np.stack([self.at(i * step, which) for i in range(count)])

    def sampled(self, which: str = "c") -> SampledKernel:
        return SampledKernel(self.step, self.series(which))

    def derivative_consistency(self) -> float:
        """``max ||f + C'||`` at interior points away from breaks (central differences)."""
        c, f, h = self.c, self.f, self.step
        if len(c) < 3:
            return 0.0
        mask = np.ones(len(c) - 2, dtype=bool)
        for b in self.breaks:
            for k in (b - 1, b, b + 1):
                if 1 <= k <= len(c) - 2:
                    mask[k - 1] = False
        d = (c[2:] - c[:-2]) / (2 * h) + f[1:-1]
        d = d[mask]
        return float(np.abs(d).max()) if d.size else 0.0

    def csv_rows(self):
        n = self.dim
        header = (
            ["t"]
            + [f"Ctilde_{i+1}{j+1}" for i in range(n) for j in range(n)]
            + [f"C_{i+1}{j+1}" for i in range(n) for j in range(n)]
            + [f"f_{i+1}{j+1}" for i in range(n) for j in range(n)]
        )
        body = np.column_stack(
            [
                self.times,
                self.c_tilde.reshape(len(self.c), -1),
                self.c.reshape(len(self.c), -1),
                self.f.reshape(len(self.c), -1),
            ]
        )
        return header, body


# -- solver ----------------------------------------------------------------------


def default_step(measure: SignedMatrixMeasure) -> float:
    return float(np.clip(1e-3 / measure.decay_rate, 1e-4, 1e-2))


def _kink_indices(measure: SignedMatrixMeasure, step: float, count: int, depth: int = 5) -> tuple:
    """Grid indices of sums of up to ``depth`` positive atom locations."""
    locs = sorted({t for t, _ in measure.atoms if t > 0})
    horizon = step * (count - 1)
    out = {0}
    for d in range(1, depth + 1):
        for combo in combinations_with_replacement(locs, d):
            s = sum(combo)
            if s > horizon + step:
                continue
            x = s / step
            k = int(round(x))
            if abs(x - k) < 1e-9 * max(1.0, x) and k < count:
                out.add(k)
        if len(out) > 20000:
            break
    return tuple(sorted(out))


class _Phi:
    """Forcing term on the half-step grid with left/right limits."""

    def __init__(self, measure, step, count, with_f):
        n = measure.dim
        self.measure, self.n, self.with_f = measure, n, with_f
        self.half = step / 2
        m = 2 * count - 1
        rows = 2 * n if with_f else n
        self.right = np.zeros((m, rows, n))
        self.right[:, :n] = np.eye(n)
        self.left = self.right.copy()
        self.left[0] = 0.0
        if with_f:
            self.cdf_right = cdf_uniform(measure, self.half, m)
            self.right[:, n:] = -self.cdf_right
            self.left[:, n:] = -cdf_uniform(measure, self.half, m, left=True)
        self.zero = np.zeros((rows, n))

    def at_index(self, i: int, left: bool) -> np.ndarray:
        if i < 0:
            return self.zero
        return (self.left if left else self.right)[i]

    def at(self, s: float, left: bool) -> np.ndarray:
        if s < 0 or (s == 0 and left):
            return self.zero
        x = s / self.half
        i = int(round(x))
        if abs(x - i) < 1e-9 * max(1.0, x) and i < len(self.right):
            return self.at_index(i, left)
        out = self.zero.copy()
        out[: self.n] = np.eye(self.n)
        if self.with_f:
            out[self.n :] = -cdf(self.measure, s, left)
        return out


def _integrate(measure: SignedMatrixMeasure, step: float, count: int, with_f: bool, c0, guard: bool):
    n, h = measure.dim, float(step)
    atoms0 = [A for t, A in measure.atoms if t == 0]
    A0 = sum(atoms0) if atoms0 else None
    delayed = []
    for t, A in measure.atoms:
        if t == 0:
            continue
        if t < h * (1 - 1e-9):
            raise GridError(f"atom at t = {t:g} lies strictly inside the first step (step {h:g})")
        x = t / (h / 2)
        k = int(round(x))
        delayed.append((t, A, k if abs(x - k) < 1e-9 * x else None))
    breaks = _kink_indices(measure, h, count)
    phi = _Phi(measure, h, count, with_f)
    rows = phi.right.shape[1]

    d = measure.density
    matexp = isinstance(d, MatExpDensity) and d.order > 0
    sampled = isinstance(d, SampledDensity)

    Y = np.zeros((count, rows, n))
    V = np.zeros((count, rows, n)) if sampled else None  # history of Y + phi (right limits)
    W = np.zeros((rows, d.order)) if matexp else None

    def rhs(i2: int, n_now: int, Ys, Ws, left: bool):
        """Derivatives at time ``i2 * h / 2`` given the stage state."""
        tau = i2 * h / 2
        v_now = Ys + phi.at_index(i2, left)
        out = v_now @ A0 if A0 is not None else np.zeros((rows, n))
        for t, A, k2 in delayed:
            s = tau - t
            if s < 0 or (s == 0 and left):
                continue
            ph = phi.at_index(i2 - k2, left) if k2 is not None else phi.at(s, left)
            if s == 0:
                out = out + ph @ A
                continue
            yh = cubic_sample(Y, s / h, breaks, limit=n_now)
            out = out + (yh + ph) @ A
        dW = None
        if matexp:
            out = out + Ws @ d.G
            dW = v_now @ d.H + Ws @ d.F
        elif sampled:
            m = n_now + 1
            grid = h * np.arange(m)
            nodes = np.append(grid[grid < tau - 1e-12 * h], tau)
            vals = np.concatenate([V[: len(nodes) - 1], v_now[None]])
            dens = d.value_many(tau - nodes)
            if len(nodes) > 1:
                integrand = np.einsum("jab,jbc->jac", vals, dens)
                out = out + np.trapezoid(integrand, nodes, axis=0)
        return out, dW

    limit = 1e3 * max(np.linalg.norm(np.eye(n) - c0, 2), 1.0) if guard else np.inf
    c0_stack = c0
    for k in range(count - 1):
        i2 = 2 * k
        if sampled:
            V[k] = Y[k] + phi.at_index(i2, False)
        y = Y[k]
        k1, w1 = rhs(i2, k, y, W, False)
        k2, w2 = rhs(i2 + 1, k, y + h / 2 * k1, None if W is None else W + h / 2 * w1, False)
        k3, w3 = rhs(i2 + 1, k, y + h / 2 * k2, None if W is None else W + h / 2 * w2, False)
        k4, w4 = rhs(i2 + 2, k, y + h * k3, None if W is None else W + h * w3, True)
        Y[k + 1] = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if W is not None:
            W = W + h / 6 * (w1 + 2 * w2 + 2 * w3 + w4)
        if guard and (k & 31) == 31:
            ck = Y[k + 1, :n] + np.eye(n) - c0_stack
            if not np.all(np.isfinite(ck)) or np.linalg.norm(ck, 2) > limit:
                raise InstabilityError(
                    f"||C(t)|| exceeded {limit:.3g} at t = {(k + 1) * h:.6g}; "
                    "the model is not admissible or the step is too coarse"
                )
    c_tilde = Y[:, :n] + np.eye(n)
    f = Y[:, n:] - phi.cdf_right[::2] if with_f else None
    return c_tilde, f, breaks


def _tail_constant(series: np.ndarray, times: np.ndarray, eps: float) -> float:
    norms = np.linalg.norm(series, 2, axis=(1, 2))
    return 1.5 * float(np.max(np.exp(eps * times) * norms)) if len(norms) else 0.0


def solve_kernel(
    measure: SignedMatrixMeasure,
    structure: CointegrationStructure | None = None,
    step: float | None = None,
    horizon: float | None = None,
) -> KernelGrid:
    """Solve for ``C~``, ``C`` and ``f`` on ``[0, horizon]``.

    Raises InstabilityError when ``||C||`` grows past ``1e3 ||C(0)||``.
    """
    if structure is None:
        structure = cointegration_structure(measure)
    h = default_step(measure) if step is None else float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    T = truncation_horizon(measure, 1e-8) if horizon is None else float(horizon)
    count = int(np.floor(T / h + 1e-9)) + 1
    c0 = np.asarray(structure.c0, dtype=float)
    c_tilde, f, breaks = _integrate(measure, h, count, True, c0, guard=True)
    c = c_tilde - c0
    times = h * np.arange(count)
    eps = measure.decay_rate / 2
    K = max(_tail_constant(f, times, eps), _tail_constant(c, times, eps))
    bound = K * np.exp(-eps * times[-1])
    return KernelGrid(h, float(times[-1]), c_tilde, c, f, c0, float(bound), breaks)


def truncation_horizon(measure: SignedMatrixMeasure, target: float = 1e-8) -> float:
    """Horizon ``T`` with ``K_f exp(-eps T) <= target``, ``eps = decay_rate / 2``.

    ``K_f = 1.5 max e^{eps t} ||f(t)||`` from a pilot solve on ``[0, 20 / decay_rate]``.
    """
    if not target > 0:
        raise ValueError("target must be positive")
    delta = measure.decay_rate
    eps = delta / 2
    T_pilot = 20.0 / delta
    h = T_pilot / 2000
    locs = [t for t, _ in measure.atoms if t > 0]
    if locs:
        # keep the first delay commensurate with the pilot grid
        h = min(locs) / max(1, int(np.ceil(min(locs) / h)))
    count = int(np.floor(T_pilot / h + 1e-9)) + 1
    _, f, _ = _integrate(measure, h, count, True, np.zeros((measure.dim,) * 2), guard=False)
    K_f = _tail_constant(f, h * np.arange(count), eps)
    if K_f <= target:
        T = 0.0
    else:
        T = float(np.log(K_f / target) / eps)
    return max(T, max(locs, default=0.0))


# -- checks -----------------------------------------------------------------------


def _decay_rate_estimate(series: np.ndarray, times: np.ndarray, fallback: float) -> float:
    norms = np.linalg.norm(series, 2, axis=(1, 2))
    half = len(norms) // 2
    a, b = norms[half], norms[-1]
    if a > 0 and b > 0 and b < a:
        lam = np.log(a / b) / (times[-1] - times[half])
        if np.isfinite(lam) and lam > 0:
            return float(lam)
    return fallback


def _atom_step_sum(measure: SignedMatrixMeasure, times: np.ndarray) -> np.ndarray:
    out = np.zeros((len(times), measure.dim, measure.dim))
    tol = 1e-9 * (times[1] - times[0] if len(times) > 1 else 1.0)
    for loc, A in measure.atoms:
        out[times >= loc - tol] += A
    return out


def integral_of_f(kernel: KernelGrid, measure: SignedMatrixMeasure) -> np.ndarray:
    """``int_0^inf f(t) dt`` from the grid plus an exponential tail estimate.

    The atom jumps of ``f`` are removed before quadrature and added back exactly.
    """
    t = kernel.times
    T = t[-1]
    smooth = kernel.f + _atom_step_sum(measure, t)
    body = simpson(smooth, x=t, axis=0) if len(t) > 2 else np.trapezoid(smooth, t, axis=0)
    for loc, A in measure.atoms:
        body = body - A * max(T - loc, 0.0)
    lam = _decay_rate_estimate(kernel.f, t, measure.decay_rate / 2)
    return body + kernel.f[-1] / lam


def _laplace_grid(series, times, z, lam):
    weights = np.exp(-z * times)[:, None, None]
    body = simpson(weights * series, x=times, axis=0)
    tail = np.exp(-z * times[-1]) * series[-1] / (z + lam)
    return body + tail


def laplace_check(
    kernel: KernelGrid,
    cf,
    z_samples=(0.5, 1.0, 2.0, 1 + 3j),
    tol: float = 1e-5,
    measure: SignedMatrixMeasure | None = None,
) -> dict:
    """Compare grid Laplace transforms of ``f`` and ``C`` with their closed forms.

    ``L[f](z) = I - z h(z)^{-1}`` and ``L[C](z) = h(z)^{-1} - C0 / z``.
    """
    cf = cf if isinstance(cf, CharacteristicFunction) else CharacteristicFunction(cf)
    measure = cf.measure if measure is None else measure
    n = kernel.dim
    t = kernel.times
    steps = _atom_step_sum(measure, t)
    smooth_f = kernel.f + steps
    lam_f = _decay_rate_estimate(kernel.f, t, measure.decay_rate / 2)
    lam_c = _decay_rate_estimate(kernel.c, t, measure.decay_rate / 2)
    rows = []
    for z in z_samples:
        z = complex(z)
        if z.real < 0.1:
            raise ValueError("laplace_check needs Re(z) >= 0.1")
        hinv = np.linalg.inv(cf(z))
        # steps removed on [0, T]; the tail of f itself is extrapolated separately
        atom_part = sum(
            (A * (np.exp(-z * loc) - np.exp(-z * t[-1])) / z for loc, A in measure.atoms if loc <= t[-1]),
            np.zeros((n, n)),
        )
        lf = _laplace_grid(smooth_f, t, z, lam_f) - atom_part
        lf += np.exp(-z * t[-1]) * (kernel.f[-1] - smooth_f[-1]) / (z + lam_f)
        lc = _laplace_grid(kernel.c, t, z, lam_c)
        dev_f = float(np.abs(lf - (np.eye(n) - z * hinv)).max())
        dev_c = float(np.abs(lc - (hinv - kernel.c0 / z)).max())
        rows.append({"z": [z.real, z.imag], "dev_f": dev_f, "dev_c": dev_c})
    max_f = max(r["dev_f"] for r in rows)
    max_c = max(r["dev_c"] for r in rows)
    return {
        "samples": rows,
        "max_dev_f": max_f,
        "max_dev_c": max_c,
        "tol": tol,
        "pass": bool(max(max_f, max_c) <= tol),
    }


def ecf_kernel_residual(kernel: KernelGrid, measure: SignedMatrixMeasure, pairs) -> np.ndarray:
    """Residuals of the error-correction identity for ``C~`` at grid pairs ``(s, t)``.

    ``C~(t) - C~(s) = int_s^t C~ Pi0 du + int_0^t [C~(t-u) - C~(s-u)] pi(u) du``.
    Jumps of the integrand at grid nodes take the mean of both one-sided limits.
    """
    h = kernel.step
    pi0 = total_mass(measure)
    ct = kernel.c_tilde
    kmax = max(int(round(t / h)) for _, t in pairs)
    grid = h * np.arange(kmax + 1)
    pi_r = pi_at(measure, grid)
    pi_l = pi_at(measure, grid, left=True)
    pi_mid = 0.5 * (pi_r + pi_l)
    pi_mid[0] = pi_r[0]  # the integral starts at 0
    out = []
    for s, t in pairs:
        ks, kt = int(round(s / h)), int(round(t / h))
        if not 0 <= ks < kt < len(ct):
            raise GridError("pairs must satisfy 0 <= s < t within the kernel grid")
        level = np.trapezoid(ct[ks : kt + 1] @ pi0, dx=h, axis=0)
        diff = ct[kt::-1].copy()
        diff[kt] *= 0.5  # C~ jumps from 0 to I at the origin
        sub = ct[ks::-1].copy()
        sub[ks] *= 0.5
        diff[: ks + 1] -= sub
        integrand = diff @ pi_mid[: kt + 1]
        incr = np.trapezoid(integrand, dx=h, axis=0)
        out.append(ct[kt] - ct[ks] - level - incr)
    return np.array(out)


def stationary_kernel_g(
    measure: SignedMatrixMeasure,
    step: float | None = None,
    horizon: float | None = None,
    check: bool = True,
) -> SampledKernel:
    """Kernel ``g`` with ``g' = g * eta``, ``g(0) = I``; stationary models only.

    Verifies ``f + g * eta = 0`` on the grid and raises VerificationError
    when the residual exceeds ``10 step^2`` (scaled).
    """
    report = check_conditions(measure)
    if report.verdict != STATIONARY:
        raise PreconditionError(
            f"g is defined for stationary models only (verdict {report.verdict})"
        )
    n = measure.dim
    kernel = solve_kernel(measure, None, step, horizon)
    g = SampledKernel(kernel.step, kernel.c_tilde)
    if check:
        residual = convolution_residual(measure, g, kernel.f)
        scale = 1.0 + float(np.abs(kernel.c_tilde).max())
        tol = 10 * kernel.step**2 * scale + 1e-10
        if residual > tol:
            raise VerificationError(
                f"f + g * eta residual {residual:.3g} exceeds {tol:.3g}"
            )
    return g


def convolution_residual(measure: SignedMatrixMeasure, g: SampledKernel, f: np.ndarray) -> float:
    """``max_k ||f(k h) + (g * eta)(k h)||`` over the grid."""
    h = g.step
    N = len(g.values)
    conv = np.zeros_like(g.values)
    for loc, A in measure.atoms:
        x = loc / h
        k = int(round(x))
        if abs(x - k) < 1e-9 * max(1.0, x):
            if k < N:
                conv[k:] += g.values[: N - k] @ A
        else:
            for i in range(N):
                if i * h >= loc:
                    conv[i] += g.at(i * h - loc) @ A
    if measure.has_density:
        dens = density_uniform(measure, h, N)
        for i in range(1, N):
            w = np.full(i + 1, h)
            w[0] = w[-1] = h / 2
            conv[i] += np.einsum("j,jab,jbc->ac", w, g.values[i::-1], dens[: i + 1])
    return float(np.abs(f + conv).max())
