"""Characteristic function, zero counting, and the cointegration structure.

``h(z) = z I - L[eta](z)`` governs existence and stationarity of solutions.
The model is accepted when ``det h`` has no zeros in ``Re z >= -eps`` other
than the origin and ``z h(z)^{-1}`` has a finite limit at 0.  That is checked
twice: analytically (winding number + pole probe, route A) and algebraically
(invertibility of ``alpha_perp' (I - Pi([0, inf))) beta_perp``, route B).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError, DomainError, ScanResolutionError, SingularError
from .measure import (
    SignedMatrixMeasure,
    laplace,
    laplace_bound,
    laplace_continued,
    laplace_many,
    pi_integral,
    total_mass,
)

__all__ = [
    "CharacteristicFunction",
    "CointegrationStructure",
    "ConditionReport",
    "char_fn",
    "null_bases",
    "long_run_matrix",
    "cointegration_structure",
    "count_zeros",
    "check_conditions",
    "c0_residue_numeric",
    "refine_zero",
]

STATIONARY = "Stationary"
COINTEGRATED = "Cointegrated"
REJECTED = "Rejected"


@dataclass(frozen=True)
class CharacteristicFunction:
    """``z -> z I - L[eta](z)`` on ``Re z > -delta``."""

    measure: SignedMatrixMeasure

    @property
    def delta(self) -> float:
        return self.measure.decay_rate

    @property
    def dim(self) -> int:
        return self.measure.dim

    def __call__(self, z: complex) -> np.ndarray:
        return z * np.eye(self.dim) - laplace(self.measure, z)

    def many(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=complex).ravel()
        return zs[:, None, None] * np.eye(self.dim) - laplace_many(self.measure, zs)

    def det(self, zs) -> np.ndarray:
        return np.linalg.det(self.many(zs))


def char_fn(cf: CharacteristicFunction, z: complex) -> np.ndarray:
    return cf(z)


def _as_cf(obj) -> CharacteristicFunction:
    return obj if isinstance(obj, CharacteristicFunction) else CharacteristicFunction(obj)


# -- cointegration structure --------------------------------------------------


def null_bases(M: np.ndarray, rank_tol: float = 1e-8):
    """Rank factorisation and orthonormal null bases of a square matrix.

    Returns ``(r, alpha, beta, alpha_perp, beta_perp)`` with ``M = alpha beta'``,
    ``M' alpha_perp = 0`` and ``M beta_perp = 0``.  The rank counts singular
    values above ``rank_tol * sigma_max``.
    """
    U, s, Vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    if smax <= 1e-300:
        r = 0
    else:
        r = int(np.sum(s > rank_tol * smax))
    alpha = U[:, :r] * s[:r]
    beta = Vt[:r].T
    return r, alpha, beta, U[:, r:], Vt[r:].T


def long_run_matrix(alpha_perp, beta_perp, middle, max_cond: float = 1e12) -> np.ndarray:
    """``beta_perp [alpha_perp' middle beta_perp]^{-1} alpha_perp'``."""
    n = middle.shape[0]
    if alpha_perp.shape[1] == 0:
        return np.zeros((n, n))
    core = alpha_perp.T @ middle @ beta_perp
    cond = np.linalg.cond(core)
    if not np.isfinite(cond) or cond > max_cond:
        raise SingularError(
            f"alpha_perp' M beta_perp is numerically singular (condition number {cond:.3g})"
        )
    return beta_perp @ np.linalg.solve(core, alpha_perp.T)


@dataclass(frozen=True)
class CointegrationStructure:
    pi0: np.ndarray
    rank_r: int
    alpha: np.ndarray
    beta: np.ndarray
    alpha_perp: np.ndarray
    beta_perp: np.ndarray
    c0: np.ndarray
    pi_total: np.ndarray
    rank_tol: float

    @property
    def dim(self) -> int:
        return self.pi0.shape[0]

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def cointegration_structure(cf, rank_tol: float = 1e-8) -> CointegrationStructure:
    """Level matrix, its rank factors and null bases, and the long-run matrix C0.

    C0 is zero at full rank; otherwise it is the residue of ``h(z)^{-1}`` at 0,
    ``beta_perp [alpha_perp' (I - Pi([0, inf))) beta_perp]^{-1} alpha_perp'``.
    Raises SingularError when the bracket is not invertible.
    """
    cf = _as_cf(cf)
    pi0 = total_mass(cf.measure)
    pi_tot = pi_integral(cf.measure)
    r, alpha, beta, a_perp, b_perp = null_bases(pi0, rank_tol)
    n = cf.dim
    c0 = long_run_matrix(a_perp, b_perp, np.eye(n) - pi_tot)
    return CointegrationStructure(pi0, r, alpha, beta, a_perp, b_perp, c0, pi_tot, rank_tol)


# -- zero counting -------------------------------------------------------------


def _segment_phase(func, seg, levels: int, n0: int = 64):
    """Total phase change of ``func`` along ``seg(u), u in [0, 1]``.

    Intervals are bisected while their phase increment exceeds pi/4.
    """
    us = np.linspace(0.0, 1.0, n0 + 1)
    vals = func(seg(us))
    for _ in range(levels):
        if not np.all(np.isfinite(vals)) or np.any(vals == 0):
            raise ScanResolutionError("the contour passes through a zero of the determinant")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.abs(dphi) > np.pi / 4
        if not bad.any():
            break
        mids = 0.5 * (us[:-1][bad] + us[1:][bad])
        new_vals = func(seg(mids))
        us_all = np.concatenate([us, mids])
        vals_all = np.concatenate([vals, new_vals])
        order = np.argsort(us_all, kind="stable")
        us, vals = us_all[order], vals_all[order]
    if not np.all(np.isfinite(vals)) or np.any(vals == 0):
        raise ScanResolutionError("the contour passes through a zero of the determinant")
    dphi = np.angle(vals[1:] / vals[:-1])
    worst = float(np.max(np.abs(dphi)))
    if worst > np.pi / 2:
        raise ScanResolutionError(
            f"phase increment {worst:.3f} rad exceeds pi/2 after {levels} refinements"
        )
    return float(np.sum(dphi)), len(us)


def _winding(func, segments, levels: int) -> tuple[int, int]:
    total, points = 0.0, 0
    for seg in segments:
        phase, npts = _segment_phase(func, seg, levels)
        total += phase
        points += npts
    w = total / (2 * np.pi)
    k = int(round(w))
    if abs(w - k) > 0.05:
        raise ScanResolutionError(f"winding number {w:.4f} is not close to an integer")
    return k, points


def _line(a: complex, b: complex) -> Callable:
    return lambda u: a + (b - a) * u


def count_zeros(
    det: Callable[[np.ndarray], np.ndarray],
    epsilon: float,
    radius: float,
    rho: float | None = 1e-3,
    levels: int = 24,
) -> dict:
    """Zeros of an analytic ``det`` in ``[-epsilon, R] x [-R, R]`` outside ``|z| < rho``.

    Counts by the argument principle: winding around the rectangle minus
    winding around the small circle at the origin.  ``rho=None`` skips the
    indentation and counts every enclosed zero.
    """
    R = float(radius)
    corners = [complex(R, -R), complex(R, R), complex(-epsilon, R), complex(-epsilon, -R)]
    rect = [_line(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    n_rect, p1 = _winding(det, rect, levels)
    n_origin, p2 = 0, 0
    if rho:
        circle = [lambda u: rho * np.exp(2j * np.pi * u)]
        n_origin, p2 = _winding(det, circle, levels)
    return {
        "count": n_rect - n_origin,
        "origin_multiplicity": n_origin,
        "radius": R,
        "points": p1 + p2,
    }


@dataclass
class ConditionReport:
    zero_count_right_halfplane: int
    zero_at_origin: bool
    pole_simple: bool
    route_a_pass: bool
    route_b_pass: bool
    verdict: str
    epsilon: float = 0.0
    radius: float = 0.0
    origin_multiplicity: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def routes_agree(self) -> bool:
        return self.route_a_pass == self.route_b_pass

    def to_dict(self) -> dict:
        return asdict(self)


def _pole_probe(cf: CharacteristicFunction) -> tuple[bool, bool]:
    """``(has_pole, simple)`` from ``z h(z)^{-1}`` along ``z = 10^-k``, k = 2..6."""
    zs = 10.0 ** -np.arange(2, 7)
    vals = [z * np.linalg.inv(cf(complex(z))) for z in zs]
    norms = np.array([np.linalg.norm(v, 2) for v in vals])
    diffs = np.array([np.linalg.norm(vals[i + 1] - vals[i], 2) for i in range(len(vals) - 1)])
    if norms[-1] < 1e-3 * max(1.0, norms[0]) and norms[-1] < 1e-4:
        return False, False
    bounded = norms[-1] <= 3.0 * max(norms[2], 1e-300)
    settling = diffs[-1] <= 0.5 * diffs[0] + 1e-12 * norms[-1]
    return True, bool(bounded and settling)


def check_conditions(
    cf,
    epsilon: float | None = None,
    radius: float | None = None,
    refinement: int = 24,
    rank_tol: float = 1e-8,
    rho: float = 1e-3,
) -> ConditionReport:
    """Classify the model as Stationary, Cointegrated or Rejected.

    ``epsilon`` defaults to ``delta / 2``; ``radius`` is enlarged until
    ``||L[eta](z)|| < |z| / 2`` outside the scanned rectangle.
    """
    cf = _as_cf(cf)
    delta = cf.delta
    eps = delta / 2 if epsilon is None else float(epsilon)
    if not 0 < eps < delta:
        raise DomainError(f"scan epsilon must lie in (0, {delta})")
    lbound = laplace_bound(cf.measure, eps)
    R = max(float(radius or 0.0), 2.0 * lbound + 1.0, 4.0 * eps)
    scan = count_zeros(cf.det, eps, R, rho=rho, levels=refinement)

    pi0 = total_mass(cf.measure)
    s = np.linalg.svd(pi0, compute_uv=False)
    smax = s[0]
    zero_at_origin = bool(smax <= 1e-300 or s[-1] <= rank_tol * smax)
    notes = []

    has_pole, simple = _pole_probe(cf)
    if has_pole != zero_at_origin:
        notes.append("pole probe and rank test disagree about a singularity at the origin")
    no_zeros = scan["count"] == 0
    route_a = no_zeros and (simple if has_pole else not zero_at_origin)

    try:
        cointegration_structure(cf, rank_tol)
        algebraic = True
    except SingularError:
        algebraic = False
    route_b = no_zeros and algebraic

    if not no_zeros:
        verdict = REJECTED
    elif not zero_at_origin and route_a and route_b:
        verdict = STATIONARY
    elif zero_at_origin and route_a and route_b:
        verdict = COINTEGRATED
    else:
        verdict = REJECTED
    if route_a != route_b:
        notes.append("route A (pole probe) and route B (algebraic) disagree")
    return ConditionReport(
        zero_count_right_halfplane=int(scan["count"]),
        zero_at_origin=zero_at_origin,
        pole_simple=bool(has_pole and simple),
        route_a_pass=bool(route_a),
        route_b_pass=bool(route_b),
        verdict=verdict,
        epsilon=eps,
        radius=scan["radius"],
        origin_multiplicity=int(scan["origin_multiplicity"]),
        notes=notes,
    )


def c0_residue_numeric(cf, kmin: int = 4, kmax: int = 20, order: int = 3) -> np.ndarray:
    """Richardson-extrapolated limit of ``z h(z)^{-1}`` along ``z = 2^-k``."""
    cf = _as_cf(cf)
    ks = np.arange(kmin, kmax + 1)
    seq = np.array([2.0**-k * np.linalg.inv(cf(complex(2.0**-k))).real for k in ks])
    table = [seq]
    for j in range(1, order + 1):
        prev = table[-1]
        table.append((2.0**j * prev[1:] - prev[:-1]) / (2.0**j - 1))
    col = table[-1]
    diffs = np.array([np.abs(col[i + 1] - col[i]).max() for i in range(len(col) - 1)])
    i = int(np.argmin(diffs))
    est = col[i + 1]
    scale = 1.0 + np.abs(est).max()
    if diffs[i] > 1e-7 * scale or np.abs(seq[-1]).max() > 1e3 * (1 + np.abs(seq[0]).max()):
        raise DivergenceError(
            "z h(z)^{-1} does not converge at the origin (pole of order > 1?)"
        )
    return est


def refine_zero(cf, z0: complex, tol: float = 1e-13, maxiter: int = 60) -> complex:
    """Newton iteration on ``det h`` started at ``z0``.

    Uses the closed-form continuation of the transform, so zeros left of
    ``-delta`` are reachable for atom and matrix-exponential measures.
    """
    cf = _as_cf(cf)
    n = cf.dim

    def det(z):
        return np.linalg.det(z * np.eye(n) - laplace_continued(cf.measure, z))

    z = complex(z0)
    for _ in range(maxiter):
        h = 1e-6 * (1 + abs(z))
        f, fp, fm = det(z), det(z + h), det(z - h)
        step = f / ((fp - fm) / (2 * h))
        z -= step
        if abs(step) <= tol * (1 + abs(z)):
            break
    return z


def cauchy_riemann_error(cf, z: complex, h: float = 1e-5) -> float:
    """Relative mismatch between the x- and y-derivatives of ``h`` at ``z``."""
    cf = _as_cf(cf)
    dx = (cf(z + h) - cf(z - h)) / (2 * h)
    dy = (cf(z + 1j * h) - cf(z - 1j * h)) / (2j * h)
    return float(np.linalg.norm(dx - dy) / max(np.linalg.norm(dx), 1e-300))
