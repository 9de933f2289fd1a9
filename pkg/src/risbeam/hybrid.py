"""Hybrid factorization of a fully digital precoder.

Approximates a target precoder w* by V_A v_D, where V_A has v-bit discrete
unit-modulus entries (one phase shifter per antenna and chain) and v_D is an
unconstrained digital vector under the transmit power cap. The two factors
are refined alternately; analog candidates are accepted only if the
residual after refitting the digital part improves, so the recorded
residual trace never increases and every iterate stays power feasible.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg import unvec, vec
from .projections import DiscretePhaseVector, quantized_angle_index
from .solvers import ipdd_quadratic_discrete, QuadraticForm


@dataclass
class HybridPrecoder:
    """Discrete analog matrix, digital combiner, and the fit residual."""

    analog_indices: np.ndarray
    bits: int
    digital: np.ndarray
    residual: float
    residual_trace: list = field(default_factory=list)

    @property
    def analog(self):
        return np.exp(2j * np.pi * self.analog_indices / 2**self.bits)

    @property
    def effective(self):
        return self.analog @ self.digital


def solve_digital(v_a, w_star, p_max):
    """Power-capped least-squares digital vector for a fixed analog matrix.

    The unconstrained fit is scaled by 1 / (1 + lam) with
    lam = max(0, sqrt(projected power / p_max) - 1), which makes the power
    constraint exactly active whenever it binds. A rank-deficient analog
    matrix falls back to the minimum-norm fit, with a warning.
    """
    v_a = np.asarray(v_a, dtype=complex)
    w_star = np.asarray(w_star, dtype=complex)
    if v_a.shape[0] != w_star.shape[0]:
        raise ValueError("analog rows must match the target length")
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    v_ls, _, rank, _ = np.linalg.lstsq(v_a, w_star, rcond=None)
    if rank < v_a.shape[1]:
        warnings.warn("analog matrix is rank deficient; using the minimum-norm fit")
    projected_power = float(np.linalg.norm(v_a @ v_ls) ** 2)
    lam = max(0.0, np.sqrt(projected_power / p_max) - 1.0)
    return v_ls / (1.0 + lam)


def solve_analog(v_d, w_star, ipdd_cfg, init=None):
    """Discrete analog matrix minimizing ||V_A v_D - w*||_F for fixed v_D.

    The entries are optimized jointly through the penalty-dual loop on the
    column-stacked quadratic with Kronecker structure; transmit power is
    the caller's concern (the digital refit handles it).
    """
    v_d = np.asarray(v_d, dtype=complex)
    w_star = np.asarray(w_star, dtype=complex)
    m = w_star.shape[0]
    m_rf = v_d.shape[0]
    hessian = np.kron(np.outer(np.conj(v_d), v_d), np.eye(m))
    linear = vec(np.outer(w_star, np.conj(v_d)))
    if init is None:
        init = DiscretePhaseVector.zeros(m * m_rf, ipdd_cfg.bits)
    result = ipdd_quadratic_discrete(
        QuadraticForm(
            hessian=hessian,
            linear=linear,
            constant=float(np.linalg.norm(w_star) ** 2),
        ),
        ipdd_cfg,
        init,
    )
    return unvec(result.phases.indices, m, m_rf)


def _init_indices(w_star, m_rf, bits):
    """Deterministic start: target phases with per-column linear ramps.

    Column j projects w* multiplied by the j-th uniform phase ramp, which
    keeps the first column aligned with the target and makes the columns
    linearly independent surrogates of further directions.
    """
    m = w_star.shape[0]
    cols = []
    for j in range(m_rf):
        ramp = np.exp(2j * np.pi * j * np.arange(m) / m)
        cols.append(quantized_angle_index(w_star * ramp, bits))
    return np.column_stack(cols)


def _residual(v_a, v_d, w_star):
    return float(np.linalg.norm(v_a @ v_d - w_star) ** 2)


def hybrid_factorize(w_star, m_rf, bits, ipdd_cfg, p_max, rounds=10):
    """Alternate digital and analog fits to the target precoder.

    rounds = 0 returns the pure digital fit on the fixed deterministic
    analog start.
    """
    w_star = np.asarray(w_star, dtype=complex)
    if m_rf < 1:
        raise ValueError("m_rf must be >= 1")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if ipdd_cfg.bits != bits:
        raise ValueError("bits disagrees with the solver config")
    indices = _init_indices(w_star, m_rf, bits)
    levels = 2**bits

    def analog_of(idx):
        return np.exp(2j * np.pi * idx / levels)

    v_d = solve_digital(analog_of(indices), w_star, p_max)
    residual = _residual(analog_of(indices), v_d, w_star)
    trace = [residual]
    for _ in range(rounds):
        flat_init = DiscretePhaseVector(bits=bits, indices=vec(indices))
        cand = solve_analog(v_d, w_star, ipdd_cfg, init=flat_init)
        v_d_cand = solve_digital(analog_of(cand), w_star, p_max)
        residual_cand = _residual(analog_of(cand), v_d_cand, w_star)
        if residual_cand <= residual:
            indices = cand
            v_d = v_d_cand
            residual = residual_cand
        trace.append(residual)
    # safety net: the digital step already keeps ||V_A v_D||^2 <= p_max
    power = float(np.linalg.norm(analog_of(indices) @ v_d) ** 2)
    if power > p_max * (1.0 + 1e-12):
        v_d = v_d * np.sqrt(p_max / power)
        residual = _residual(analog_of(indices), v_d, w_star)
    return HybridPrecoder(
        analog_indices=indices,
        bits=bits,
        digital=v_d,
        residual=residual,
        residual_trace=trace,
    )
