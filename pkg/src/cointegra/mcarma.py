"""MCARMA(p, p-1) models and their delay-equation form.

``P(z) = I z^p + P_1 z^{p-1} + ... + P_p`` and
``Q(z) = I z^{p-1} + Q_1 z^{p-2} + ... + Q_{p-1}``.  The equivalent delay
measure is ``eta(dt) = eta_0 delta_0(dt) + eta_1(t) dt`` with
``eta_0 = Q_1 - P_1`` and ``L[eta_1] = Q^{-1} R`` where
``R(z) = Q(z)(z I - eta_0) - P(z)`` has degree at most ``p - 2``.  Then
``h(z) = Q(z)^{-1} P(z)``.  ``eta_1`` is realised exactly as
``H exp(F t) G`` from an observer-form realisation of ``Q^{-1} R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionError, ScanResolutionError, SingularError, VerificationError
from .measure import MatExpDensity, SignedMatrixMeasure, laplace
from .spectral import count_zeros, long_run_matrix, null_bases

__all__ = [
    "MCARMASpec",
    "StateSpaceRealization",
    "msdde_from_mcarma",
    "fourier_identity_error",
    "check_cointegrated_conditions",
    "carma_c0",
    "state_space",
    "transfer_fn",
    "polynomial_zeros",
]


def _mats(seq, n: int) -> tuple:
    out = []
    for M in seq:
        M = np.array(M, dtype=float)
        if M.shape != (n, n):
            raise ValueError(f"coefficient has shape {M.shape}, expected {(n, n)}")
        M.setflags(write=False)
        out.append(M)
    return tuple(out)


@dataclass(frozen=True)
class MCARMASpec:
    dim: int
    p: int
    P: tuple
    Q: tuple = ()

    def __post_init__(self):
        n, p = int(self.dim), int(self.p)
        if n < 1 or p < 1:
            raise ValueError("dim and p must be positive")
        P, Q = _mats(self.P, n), _mats(self.Q, n)
        if len(P) != p:
            raise ValueError(f"expected {p} P coefficients, got {len(P)}")
        if len(Q) != p - 1:
            raise ValueError(f"expected {p - 1} Q coefficients, got {len(Q)}")
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)

    def p_coeff(self, i: int) -> np.ndarray:
        """``P_i`` with ``P_0 = I`` and zero past ``p``."""
        if i == 0:
            return np.eye(self.dim)
        return self.P[i - 1] if i <= self.p else np.zeros((self.dim, self.dim))

    def q_coeff(self, i: int) -> np.ndarray:
        """``Q_i`` with ``Q_0 = I`` and zero past ``p - 1``."""
        if i == 0:
            return np.eye(self.dim)
        return self.Q[i - 1] if i <= self.p - 1 else np.zeros((self.dim, self.dim))

    def P_at(self, z: complex) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(self.p + 1):
            out = out * z + self.p_coeff(i)
        return out

    def Q_at(self, z: complex) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for i in range(self.p):
            out = out * z + self.q_coeff(i)
        return out

    @property
    def eta0(self) -> np.ndarray:
        return self.q_coeff(1) - self.p_coeff(1) if self.p > 1 else -self.P[0]

    def remainder(self) -> tuple:
        """Coefficients ``R_1..R_{p-1}`` of ``R(z) = sum R_i z^{p-1-i}``."""
        e0 = self.eta0
        return tuple(
            self.q_coeff(i + 1) - self.q_coeff(i) @ e0 - self.p_coeff(i + 1)
            for i in range(1, self.p)
        )


def _companion_q(spec: MCARMASpec) -> np.ndarray:
    """Observer-form matrix whose eigenvalues are the zeros of ``det Q``."""
    n, q = spec.dim, spec.p - 1
    F = np.zeros((n * q, n * q))
    for i in range(q):
        F[i * n : (i + 1) * n, :n] = -spec.Q[i]
        if i + 1 < q:
            F[i * n : (i + 1) * n, (i + 1) * n : (i + 2) * n] = np.eye(n)
    return F


def polynomial_zeros(coeffs) -> np.ndarray:
    """Zeros of ``det(I z^k + C_1 z^{k-1} + ... + C_k)`` via the block companion."""
    coeffs = list(coeffs)
    if not coeffs:
        return np.zeros(0, dtype=complex)
    n, k = coeffs[0].shape[0], len(coeffs)
    M = np.zeros((n * k, n * k))
    for i, C in enumerate(coeffs):
        M[:n, i * n : (i + 1) * n] = -C
    M[n:, :-n] = np.eye(n * (k - 1))
    return np.linalg.eigvals(M)


def fourier_identity_error(spec: MCARMASpec, measure: SignedMatrixMeasure, freqs=None) -> float:
    """``max_y || L[eta_1](iy) - (iy I - eta_0 - Q(iy)^{-1} P(iy)) ||`` in the spectral norm."""
    if freqs is None:
        freqs = np.logspace(-2, 2, 64)
    n = spec.dim
    eta1 = SignedMatrixMeasure(n, (), measure.density, measure.decay_rate)
    worst = 0.0
    for y in freqs:
        z = 1j * y
        target = z * np.eye(n) - spec.eta0 - np.linalg.solve(spec.Q_at(z), spec.P_at(z))
        worst = max(worst, float(np.linalg.norm(laplace(eta1, z) - target, 2)))
    return worst


def msdde_from_mcarma(spec: MCARMASpec, verify: bool = True, tol: float = 1e-8) -> SignedMatrixMeasure:
    """Delay measure whose characteristic function is ``Q(z)^{-1} P(z)``.

    Raises ConditionError when ``det Q`` has a zero with ``Re >= 0`` and
    VerificationError when the Fourier identity fails at 32 frequencies.
    """
    n = spec.dim
    atoms = ((0.0, spec.eta0),)
    if spec.p == 1:
        return SignedMatrixMeasure(n, atoms)
    F = _companion_q(spec)
    zeros = np.linalg.eigvals(F)
    if np.max(zeros.real) >= 0:
        raise ConditionError(
            f"det Q has a zero with nonnegative real part ({zeros[np.argmax(zeros.real)]:.6g})"
        )
    H = np.zeros((n, F.shape[0]))
    H[:, :n] = np.eye(n)
    G = np.vstack(spec.remainder())
    measure = SignedMatrixMeasure(n, atoms, MatExpDensity(H, F, G))
    if verify:
        err = fourier_identity_error(spec, measure, np.logspace(-2, 2, 32))
        if err > tol:
            raise VerificationError(f"Fourier identity deviates by {err:.3g} (> {tol:g})")
    return measure


def _det_many(poly_at, zs):
    return np.array([np.linalg.det(poly_at(z)) for z in np.asarray(zs).ravel()])


def _zero_bound(coeffs) -> float:
    return 1.0 + sum(float(np.linalg.norm(C, 2)) for C in coeffs)


def check_cointegrated_conditions(spec: MCARMASpec, rank_tol: float = 1e-8, eps: float = 1e-6) -> dict:
    """Clause-by-clause report on the cointegrated MCARMA conditions.

    (i) zeros of ``det P`` lie in ``Re < 0`` or at 0; (ii) ``0 < rank P_p < n``;
    (iii) ``alpha_perp' P_{p-1} beta_perp`` is invertible; (iv) zeros of
    ``det Q`` lie in ``Re < 0``.
    """
    n = spec.dim
    out: dict = {"notes": []}
    try:
        scan = count_zeros(
            lambda zs: _det_many(spec.P_at, zs), eps, 2 * _zero_bound(spec.P), rho=1e-3
        )
        out["i_det_P_zeros"] = scan["count"] == 0
        out["det_P_zero_count"] = int(scan["count"])
    except ScanResolutionError as exc:
        out["i_det_P_zeros"] = False
        out["notes"].append(f"det P scan inconclusive: {exc}")

    r, _, _, a_perp, b_perp = null_bases(spec.P[-1], rank_tol)
    out["rank"] = r
    out["ii_rank"] = 0 < r < n
    if n == 1:
        out["notes"].append("dimension 1 admits no rank strictly between 0 and n")

    out["iii_invertible"] = False
    if 0 < r < n:
        core = a_perp.T @ spec.p_coeff(spec.p - 1) @ b_perp
        out["iii_invertible"] = bool(np.linalg.cond(core) < 1e12)

    if spec.p == 1:
        out["iv_det_Q_zeros"] = True
    else:
        try:
            scan = count_zeros(
                lambda zs: _det_many(spec.Q_at, zs), 0.0, 2 * _zero_bound(spec.Q), rho=None
            )
            out["iv_det_Q_zeros"] = scan["count"] == 0
        except ScanResolutionError as exc:
            out["iv_det_Q_zeros"] = False
            out["notes"].append(f"det Q scan inconclusive: {exc}")
    out["all_pass"] = bool(
        out["i_det_P_zeros"] and out["ii_rank"] and out["iii_invertible"] and out["iv_det_Q_zeros"]
    )
    return out


def carma_c0(spec: MCARMASpec, rank_tol: float = 1e-8) -> np.ndarray:
    """``beta_perp [alpha_perp' P_{p-1} beta_perp]^{-1} alpha_perp' Q_{p-1}``."""
    _, _, _, a_perp, b_perp = null_bases(spec.P[-1], rank_tol)
    n = spec.dim
    if a_perp.shape[1] == 0:
        return np.zeros((n, n))
    core = long_run_matrix(a_perp, b_perp, spec.p_coeff(spec.p - 1))
    return core @ spec.q_coeff(spec.p - 1)


@dataclass(frozen=True)
class StateSpaceRealization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def transfer(self, z: complex) -> np.ndarray:
        m = self.A.shape[0]
        return self.C.T @ np.linalg.solve(z * np.eye(m) - self.A, self.B)


def state_space(spec: MCARMASpec) -> StateSpaceRealization:
    """Companion realisation ``dG = A G dt + B dZ``, ``Y = C' G``.

    ``B_k = Q_{k-1} - sum_{i=1}^{k-1} P_i B_{k-i}`` makes
    ``P(z)(B_1 z^{p-1} + ... + B_p) - Q(z) z^p`` of degree below ``p``.
    """
    n, p = spec.dim, spec.p
    A = np.zeros((n * p, n * p))
    A[: n * (p - 1), n:] = np.eye(n * (p - 1))
    for i in range(p):
        A[n * (p - 1) :, i * n : (i + 1) * n] = -spec.p_coeff(p - i)
    Bs = []
    for k in range(1, p + 1):
        Bk = spec.q_coeff(k - 1).copy()
        for i in range(1, k):
            Bk = Bk - spec.p_coeff(i) @ Bs[k - i - 1]
        Bs.append(Bk)
    C = np.zeros((n * p, n))
    C[:n] = np.eye(n)
    return StateSpaceRealization(A, np.vstack(Bs), C)


def transfer_fn(spec: MCARMASpec, z: complex) -> np.ndarray:
    """``P(z)^{-1} Q(z)``; SingularError at zeros of ``det P``."""
    Pz = spec.P_at(z)
    if np.linalg.cond(Pz) > 1e14:
        raise SingularError(f"P(z) is singular at z = {z}")
    return np.linalg.solve(Pz, spec.Q_at(z))
