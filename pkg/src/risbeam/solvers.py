"""Optimization kernels shared across the package.

Two workhorses live here: a ridge least-squares solve under a total power
cap (the multiplier found by doubling plus bisection on the monotone power
curve), and an increasing-penalty dual-decomposition loop that minimizes a
Hermitian quadratic over vectors with v-bit unit-modulus entries.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .projections import DiscretePhaseVector, quantized_angle_index

POWER_REL_TOL = 1e-12
_MAX_BISECT = 500


@dataclass(frozen=True)
class IpddConfig:
    """Controls for the penalty-dual loop over discrete phases."""

    bits: int
    penalty_init: float = 10.0
    penalty_decay: float = 0.8
    consensus_tol: float = 1e-4
    max_outer_iters: int = 200

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if self.penalty_init <= 0:
            raise ValueError("penalty_init must be positive")
        if not 0 < self.penalty_decay < 1:
            raise ValueError("penalty_decay must lie in (0, 1)")
        if self.consensus_tol <= 0:
            raise ValueError("consensus_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")


@dataclass(frozen=True)
class QuadraticForm:
    """f(x) = x^H A x - 2 Re{b^H x} + c with A Hermitian PSD.

    All discrete-phase subproblems in the package arrive in this shape; the
    constant keeps the value equal to the originating squared residual.
    """

    hessian: np.ndarray
    linear: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.hessian, dtype=complex)
        b = np.asarray(self.linear, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("hessian must be square")
        if b.shape != (a.shape[0],):
            raise ValueError("linear term must match the hessian dimension")
        scale = max(np.linalg.norm(a), 1.0)
        if np.linalg.norm(a - a.conj().T) > 1e-12 * scale:
            raise ValueError("hessian must be Hermitian")
        object.__setattr__(self, "hessian", a)
        object.__setattr__(self, "linear", b)

    @property
    def dim(self):
        return self.hessian.shape[0]

    def value(self, x):
        x = np.asarray(x)
        return float(
            np.real(np.vdot(x, self.hessian @ x))
            - 2.0 * np.real(np.vdot(self.linear, x))
            + self.constant
        )


@dataclass
class IpddResult:
    """Discrete phases plus convergence diagnostics from the penalty loop."""

    phases: DiscretePhaseVector
    consensus_gap: float
    iterations: int
    converged: bool
    gap_trace: list = field(default_factory=list)


def _smallest_feasible_ridge(power_of, p_max):
    """Smallest lam >= 0 with power_of(lam) <= p_max.

    power_of must be non-increasing in lam. Doubles an upper bracket from 1,
    then bisects until the power matches p_max to POWER_REL_TOL relative.
    Only strictly feasible multipliers are ever returned, so the produced
    solution never exceeds the cap.
    """
    if power_of(0.0) <= p_max:
        return 0.0
    hi = 1.0
    for _ in range(_MAX_BISECT):
        if power_of(hi) <= p_max:
            break
        hi *= 2.0
    else:
        raise ValueError("power cap unreachable by ridge regularization")
    lo = 0.0
    lam = hi
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        p = power_of(mid)
        if p > p_max:
            lo = mid
            continue
        hi = mid
        lam = mid
        if p_max - p <= POWER_REL_TOL * p_max:
            break
    return lam


def power_constrained_ls(a, target, p_max):
    """Minimize ||a w - target||^2 subject to ||w||^2 <= p_max.

    Solved through the singular directions of a: w(lam) has coefficients
    s_i c_i / (s_i^2 + lam), with the smallest lam >= 0 meeting the cap. With
    lam = 0 and a rank deficient this reduces to the minimum-norm solution.
    """
    a = np.asarray(a, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if a.ndim != 2 or target.shape != (a.shape[0],):
        raise ValueError("target length must match the number of rows of a")
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    c = u.conj().T @ target
    cutoff = s.max(initial=0.0) * max(a.shape) * np.finfo(float).eps
    keep = s > cutoff
    s_kept = s[keep]
    c_kept = c[keep]
    energy = np.abs(c_kept) ** 2

    def power_of(lam):
        return float(np.sum(energy * (s_kept / (s_kept**2 + lam)) ** 2))

    if s_kept.size == 0:
        return np.zeros(a.shape[1], dtype=complex)
    lam = _smallest_feasible_ridge(power_of, p_max)
    gains = np.zeros_like(s)
    gains[keep] = s_kept / (s_kept**2 + lam)
    return vh.conj().T @ (gains * c)


def ridge_power_solve(hessian, rhs, p_max):
    """Columns w_k = (hessian + lam I)^{-1} rhs_k under a total power cap.

    hessian must be Hermitian PSD; the single multiplier lam >= 0 is the
    smallest one bringing sum_k ||w_k||^2 under p_max. Returns (W, lam).
    Null-space components of the rhs (numerical noise when the rhs lies in
    the range of the hessian) are discarded, so lam = 0 yields the
    pseudo-inverse solution.
    """
    h = np.asarray(hessian, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    if h.shape[0] != h.shape[1] or rhs.shape[0] != h.shape[0]:
        raise ValueError("rhs rows must match the hessian dimension")
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    evals, evecs = np.linalg.eigh(h)
    evals = np.clip(evals, 0.0, None)
    c = evecs.conj().T @ rhs
    cutoff = evals.max(initial=0.0) * h.shape[0] * np.finfo(float).eps
    keep = evals > cutoff
    c[~keep, :] = 0.0
    energy = np.sum(np.abs(c) ** 2, axis=1)

    def power_of(lam):
        denom = np.where(keep, evals + lam, 1.0)
        return float(np.sum(np.where(keep, energy / denom**2, 0.0)))

    if not np.any(keep):
        w = np.zeros_like(rhs)
        return (w[:, 0], 0.0) if squeeze else (w, 0.0)
    lam = _smallest_feasible_ridge(power_of, p_max)
    gains = np.where(keep, 1.0 / np.where(keep, evals + lam, 1.0), 0.0)
    w = evecs @ (gains[:, None] * c)
    return (w[:, 0], lam) if squeeze else (w, lam)


def ipdd_quadratic_discrete(quadratic, config, init):
    """Minimize a Hermitian quadratic over v-bit unit-modulus vectors.

    Increasing-penalty dual decomposition: a continuous copy is updated by a
    ridge solve, the discrete copy by element-wise projection of the shifted
    continuous iterate, then the scaled dual and penalty are refreshed. The
    loop stops once the consensus gap ||phi - zeta||_2 falls under the
    configured tolerance. The anneal path is not monotone in the objective,
    so the best discrete iterate visited is returned rather than the last;
    the final consensus gap is reported either way.
    """
    if not isinstance(quadratic, QuadraticForm):
        raise TypeError("quadratic must be a QuadraticForm")
    n = quadratic.dim
    if len(init) != n:
        raise ValueError("init length must match the quadratic dimension")
    if init.bits != config.bits:
        raise ValueError("init and config disagree on the number of bits")
    levels = 2**config.bits
    evals, evecs = np.linalg.eigh(quadratic.hessian)
    evals = np.clip(evals, 0.0, None)
    b = quadratic.linear

    phi = init.values.astype(complex)
    zeta_idx = init.indices.copy()
    zeta = init.values.astype(complex)
    dual = np.zeros(n, dtype=complex)
    eta = config.penalty_init

    best_idx = zeta_idx.copy()
    best_value = quadratic.value(zeta)
    prev_idx = zeta_idx
    gap = float(np.linalg.norm(phi - zeta))
    gaps = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_outer_iters + 1):
        rhs = b + zeta / (2.0 * eta) + 0.5 * dual
        phi = evecs @ ((evecs.conj().T @ rhs) / (evals + 0.5 / eta))
        zeta_idx = quantized_angle_index(phi - eta * dual, config.bits)
        zeta = np.exp(2j * np.pi * zeta_idx / levels)
        if not np.array_equal(zeta_idx, prev_idx):
            value = quadratic.value(zeta)
            if value < best_value:
                best_value = value
                best_idx = zeta_idx.copy()
            prev_idx = zeta_idx
        dual = dual + (zeta - phi) / eta
        eta *= config.penalty_decay
        gap = float(np.linalg.norm(phi - zeta))
        gaps.append(gap)
        if gap <= config.consensus_tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"penalty loop stopped at consensus gap {gap:.3e} after "
            f"{iterations} iterations"
        )
    return IpddResult(
        phases=DiscretePhaseVector(bits=config.bits, indices=best_idx),
        consensus_gap=gap,
        iterations=iterations,
        converged=converged,
        gap_trace=gaps,
    )
