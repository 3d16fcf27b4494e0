"""Discrete cointegrated VARs: error-correction form, Granger coefficients,
simulation, and the Euler bridge from a delay measure to a VAR.

``X_t = Gamma_1 X_{t-1} + ... + Gamma_p X_{t-p} + eps_t`` with
``Gamma(z) = I - sum Gamma_j z^j``.  Granger coefficients ``C(j)`` are the
power-series coefficients at ``z = 0`` of ``Gamma(z)^{-1} - (1 - z)^{-1} C0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .errors import LagError, RootError, XiError
from .levy import LevyModel, sample_levy
from .measure import MatExpDensity, SampledDensity, SignedMatrixMeasure, total_mass
from .spectral import CharacteristicFunction, long_run_matrix, null_bases, refine_zero

__all__ = [
    "VARSpec",
    "VARGrangerRep",
    "var_ecf",
    "companion",
    "var_granger",
    "series_identity_error",
    "simulate_var",
    "discretization_bridge",
    "cointegration_angles",
    "root_mapping",
]


@dataclass(frozen=True)
class VARSpec:
    dim: int
    p: int
    gammas: tuple
    sigma_eps: np.ndarray = None

    def __post_init__(self):
        n, p = int(self.dim), int(self.p)
        gammas = tuple(np.asarray(G, dtype=float) for G in self.gammas)
        if len(gammas) != p or any(G.shape != (n, n) for G in gammas):
            raise ValueError(f"expected {p} coefficient matrices of shape {(n, n)}")
        sig = np.eye(n) if self.sigma_eps is None else np.asarray(self.sigma_eps, dtype=float)
        if sig.shape != (n, n):
            raise ValueError("noise covariance does not match dim")
        if np.linalg.cond(sig) >= 1e12:
            raise ValueError("noise covariance must be invertible (condition number < 1e12)")
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "sigma_eps", sig)

    def gamma_at(self, z: complex) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for j, G in enumerate(self.gammas, start=1):
            out = out - G * z**j
        return out


def var_ecf(spec: VARSpec):
    """``(Pi0, [Pi_1..Pi_{p-1}])`` of the error-correction form."""
    n = spec.dim
    pi0 = -np.eye(n) + sum(spec.gammas, np.zeros((n, n)))
    pis = [-sum(spec.gammas[j:], np.zeros((n, n))) for j in range(1, spec.p)]
    return pi0, pis


def companion(spec: VARSpec) -> np.ndarray:
    n, p = spec.dim, spec.p
    M = np.zeros((n * p, n * p))
    M[:n] = np.hstack(spec.gammas)
    M[n:, :-n] = np.eye(n * (p - 1))
    return M


@dataclass(frozen=True)
class VARGrangerRep:
    pi0: np.ndarray
    pis: tuple
    rank_r: int
    alpha_perp: np.ndarray
    beta_perp: np.ndarray
    c0_disc: np.ndarray
    c_coeffs: np.ndarray
    tail_bound: float
    rho: float

    @property
    def J(self) -> int:
        return len(self.c_coeffs) - 1

    def csv_rows(self):
        n = self.c0_disc.shape[0]
        header = ["j"] + [f"C_{i+1}{k+1}" for i in range(n) for k in range(n)]
        rows = [np.concatenate([[-1], self.c0_disc.ravel()])]
        rows += [np.concatenate([[j], C.ravel()]) for j, C in enumerate(self.c_coeffs)]
        return header, np.array(rows)


def _check_roots(spec: VARSpec) -> float:
    """Spectral radius of the companion once unit roots are set aside."""
    lam = np.linalg.eigvals(companion(spec))
    unit = np.abs(lam - 1) < 1e-6
    bad = (~unit) & (np.abs(lam) >= 1 - 1e-9)
    if bad.any():
        worst = lam[bad][np.argmax(np.abs(lam[bad]))]
        raise RootError(
            f"reciprocal root {worst:.6g} lies on or outside the unit circle away from 1"
        )
    rest = np.abs(lam[~unit])
    return float(rest.max()) if rest.size else 0.0


def _coefficients(spec: VARSpec, c0: np.ndarray, count: int) -> np.ndarray:
    """``C(0..count-1)`` from ``Gamma(z) C0 + (1 - z) Gamma(z) C(z) = (1 - z) I``."""
    n, p = spec.dim, spec.p
    gstar = [np.eye(n)] + [-G for G in spec.gammas]  # Gamma(z) = sum gstar_k z^k

    def gs(k):
        return gstar[k] if 0 <= k <= p else np.zeros((n, n))

    phi = [gs(k) - gs(k - 1) for k in range(p + 2)]  # (1 - z) Gamma(z)
    C = np.zeros((count, n, n))
    for k in range(count):
        rhs = (np.eye(n) if k == 0 else 0) - (np.eye(n) if k == 1 else 0) - gs(k) @ c0
        for i in range(1, min(k, p + 1) + 1):
            rhs = rhs - phi[i] @ C[k - i]
        C[k] = rhs
    return C


def var_granger(spec: VARSpec, tol: float = 1e-12, max_terms: int = 1_000_000) -> VARGrangerRep:
    """Long-run matrix and Granger coefficients of a VAR with roots outside the disk or at 1.

    The series is truncated at ``J`` where a geometric bound with ratio
    ``(1 + rho) / 2`` (``rho`` the non-unit companion spectral radius) drops
    below ``tol``.  Raises RootError or SingularError.
    """
    rho = _check_roots(spec)
    n, p = spec.dim, spec.p
    pi0, pis = var_ecf(spec)
    r, _, _, a_perp, b_perp = null_bases(pi0)
    middle = np.eye(n) - sum(pis, np.zeros((n, n)))
    c0 = long_run_matrix(a_perp, b_perp, middle)
    if rho < 1e-12:
        # nilpotent stable part: the series terminates within n p terms
        J = n * p + 1
        C = _coefficients(spec, c0, J + 1)
        tail = 0.0
    else:
        q = (1 + rho) / 2
        pilot = _coefficients(spec, c0, 50)
        K = max(np.linalg.norm(Cj, 2) / q**j for j, Cj in enumerate(pilot))
        J = int(np.ceil(np.log(tol * (1 - q) / max(K, 1e-300)) / np.log(q))) if K > 0 else 0
        J = max(J, 0)
        if J > max_terms:
            raise RootError(f"series needs {J} terms; spectral radius {rho:.6g} is too close to 1")
        C = _coefficients(spec, c0, J + 1)
        tail = float(K * q ** (J + 1) / (1 - q))
    return VARGrangerRep(pi0, tuple(pis), r, a_perp, b_perp, c0, C, tail, rho)


def series_identity_error(spec: VARSpec, rep: VARGrangerRep, z: complex) -> float:
    """``|| Gamma(z) [(1 - z)^{-1} C0 + sum_{j <= J} C(j) z^j] - I ||``."""
    powers = z ** np.arange(len(rep.c_coeffs))
    series = np.tensordot(powers, rep.c_coeffs, axes=1) + rep.c0_disc / (1 - z)
    return float(np.linalg.norm(spec.gamma_at(z) @ series - np.eye(spec.dim), 2))


def simulate_var(
    spec: VARSpec,
    rep: VARGrangerRep,
    xi,
    T: int,
    seed: int,
    burn: int | None = None,
    path_id: int = 0,
) -> dict:
    """Paths ``X_0..X_T`` from the Granger form and from the recursion.

    The recursion starts ``burn`` steps before 0 from Granger-form values.
    Noise uses the counter-based stream of :func:`sample_levy` with unit step.
    """
    n = spec.dim
    xi = np.asarray(xi, dtype=float)
    if np.linalg.norm(rep.pi0 @ xi) > 1e-8 * max(1.0, np.linalg.norm(xi)):
        raise XiError("Pi0 xi must vanish")
    J = rep.J
    burn = max(spec.p, 2 * J) if burn is None else int(burn)
    start = -(burn + spec.p)  # first index of the seeded history
    noise_model = LevyModel(n, gaussian_cov=spec.sigma_eps)
    incr = sample_levy(noise_model, 1.0, (J + 1 - start, T), seed, path_id)
    eps = incr.increments  # eps_k for k = incr.k0 + 1 .. T
    k_first = incr.k0 + 1
    S = incr.levels()  # cumulative sums with S_0 = 0, indices k0..T

    def granger(t):
        lo = t - J - k_first
        window = eps[lo : t - k_first + 1][::-1]
        ma = np.einsum("jab,jb->a", rep.c_coeffs[: len(window)], window)
        return xi + rep.c0_disc @ S[t - incr.k0] + ma

    ts = np.arange(start, T + 1)
    XG = np.array([granger(t) for t in ts])
    XR = XG.copy()
    for i in range(spec.p, len(ts)):
        t = ts[i]
        acc = eps[t - k_first].copy()
        for j, G in enumerate(spec.gammas, start=1):
            acc = acc + G @ XR[i - j]
        XR[i] = acc
    keep = ts >= 0
    dev = float(np.abs(XG[keep] - XR[keep]).max())
    scale = float(np.abs(eps).max()) * (1 + sum(np.linalg.norm(G, 2) for G in spec.gammas))
    bound = 10 * (T + burn + spec.p) * rep.tail_bound * scale + 1e-10
    return {
        "times": ts[keep],
        "granger": XG[keep],
        "recursion": XR[keep],
        "max_deviation": dev,
        "bound": float(bound),
        "pass": bool(dev <= bound),
    }


# -- bridge from a delay measure ------------------------------------------------


def _density_cell_masses(measure: SignedMatrixMeasure, step: float, lags: int) -> np.ndarray:
    """Density mass of ``[(j - 1/2) step, (j + 1/2) step) ∩ [0, inf)``, ``j = 0..lags-1``."""
    n = measure.dim
    if not measure.has_density:
        return np.zeros((lags, n, n))
    edges = np.concatenate([[0.0], (np.arange(lags) + 0.5) * step])
    cum = np.stack([measure.density_integral(e) for e in edges])
    return np.diff(cum, axis=0)


def discretization_bridge(
    measure: SignedMatrixMeasure,
    step: float,
    lag_cap: int,
    sigma=None,
    tail_tol: float = 1e-6,
) -> VARSpec:
    """Euler scheme of the delay equation written as a VAR.

    Atoms go to the nearest lag and densities contribute their cell masses,
    so ``Gamma_1 = I + step W_0`` and ``Gamma_{j+1} = step W_j``.  Raises
    LagError when mass beyond the last lag exceeds ``tail_tol``.
    """
    n = measure.dim
    W = np.zeros((lag_cap, n, n))
    for loc, A in measure.atoms:
        j = int(np.floor(loc / step + 0.5))
        if j >= lag_cap:
            raise LagError(f"atom at t = {loc:g} needs lag {j + 1} > lag_cap = {lag_cap}")
        W[j] += A
    W += _density_cell_masses(measure, step, lag_cap)
    if measure.has_density:
        covered = (lag_cap - 0.5) * step
        d = measure.density
        if isinstance(d, SampledDensity) and covered >= d.end:
            rest = d.tail_mass_bound()
        elif isinstance(d, MatExpDensity):
            rest = float(np.linalg.norm(d.total() - d.integral(covered), 2))
        else:
            rest = float(np.linalg.norm(d.total() - d.integral(covered), 2)) + d.tail_mass_bound()
        if rest > tail_tol:
            raise LagError(f"density mass {rest:.3g} beyond lag_cap * step exceeds {tail_tol:g}")
    nonzero = [j for j in range(lag_cap) if np.any(W[j] != 0)]
    p = max(nonzero, default=0) + 1
    gammas = [step * W[j] for j in range(p)]
    gammas[0] = gammas[0] + np.eye(n)
    sig = step * (np.eye(n) if sigma is None else np.asarray(sigma, dtype=float))
    return VARSpec(n, p, tuple(gammas), sig)


def cointegration_angles(measure: SignedMatrixMeasure, spec: VARSpec) -> np.ndarray:
    """Principal angles between the row spaces of the continuous and discrete ``Pi0``."""
    cont = total_mass(measure)
    disc, _ = var_ecf(spec)
    rc, *_ = null_bases(cont)
    rd, *_ = null_bases(disc)
    if rc != rd:
        return np.array([np.pi / 2])
    if rc == 0:
        return np.zeros(0)
    Uc = np.linalg.svd(cont.T)[0][:, :rc]
    Ud = np.linalg.svd(disc.T)[0][:, :rd]
    return subspace_angles(Uc, Ud)


def root_mapping(measure: SignedMatrixMeasure, spec: VARSpec, step: float, count: int = 5) -> dict:
    """Compare the ``count`` largest companion eigenvalues with ``exp(step s)``.

    Each continuous zero ``s`` of ``det h`` is found by Newton's method started
    at ``log(mu) / step``.
    """
    mu = np.linalg.eigvals(companion(spec))
    order = np.lexsort((-mu.imag, -np.round(np.abs(mu), 12)))
    lead = mu[order[:count]]
    cf = CharacteristicFunction(measure)
    rows = []
    for m in lead:
        if abs(m - 1) < 1e-9:
            s = 0.0
        else:
            s = refine_zero(cf, np.log(complex(m)) / step)
        rows.append({"mu": m, "s": s, "deviation": abs(m - np.exp(step * s))})
    return {"roots": rows, "max_deviation": max(r["deviation"] for r in rows)}
