"""Multiuser interference management with fairness-driven gain shaping.

Instead of maximizing a rate objective directly, the precoders and surface
phases are fit to a K x K target gain matrix: diagonal entries set the
per-user beam gains, off-diagonal entries cap how much of stream k is
allowed to leak into user i. The five shaping parameters (alpha, beta and
three exponents) are adapted by finite-difference ascent on the Jain
fairness index of the resulting rates.
"""

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from .benchmarks import achievable_rates
from .linalg import unvec, vec
from .projections import DiscretePhaseVector, phase_align, quantized_angle_index
from .solvers import QuadraticForm, ipdd_quadratic_discrete, ridge_power_solve


@dataclass(frozen=True)
class FairnessParams:
    """Gain-shaping parameters chi = (alpha, beta, gamma1, gamma2, gamma3).

    step and perturb are the adaptation knobs: the ascent rate on chi and
    the finite-difference probe size (relative for alpha, absolute for the
    rest). run_im can override both per call.
    """

    alpha: float
    beta: float
    gamma1: float
    gamma2: float
    gamma3: float
    eps_h: float = 1e-9
    step: float = 0.1
    perturb: float = 1e-2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.eps_h <= 0:
            raise ValueError("eps_h must be positive")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.perturb <= 0:
            raise ValueError("perturb must be positive")

    def as_array(self):
        return np.array(
            [self.alpha, self.beta, self.gamma1, self.gamma2, self.gamma3]
        )


def default_fairness_params(p_max, k_users):
    """Shaping init: alpha at the equal-split amplitude, mild leakage caps."""
    return FairnessParams(
        alpha=float(np.sqrt(p_max) / k_users),
        beta=0.01,
        gamma1=0.5,
        gamma2=1.0,
        gamma3=1.0,
    )


@dataclass(frozen=True)
class GainMatrix:
    """Target amplitudes and free phases, both K x K.

    amplitudes[i, k] is the wanted magnitude of stream k at user i;
    phases carries the matching auxiliary unit-modulus factors.
    """

    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float)
        ph = np.asarray(self.phases, dtype=complex)
        if amp.ndim != 2 or amp.shape[0] != amp.shape[1]:
            raise ValueError("amplitudes must be square")
        if ph.shape != amp.shape:
            raise ValueError("phases must match the amplitude shape")
        if np.any(amp < 0):
            raise ValueError("amplitudes must be non-negative")
        if not np.allclose(np.abs(ph), 1.0, atol=1e-12):
            raise ValueError("phases must be unit modulus")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "phases", ph)

    @property
    def target(self):
        return self.amplitudes * self.phases


def channel_correlation(h_i, h_k):
    """Normalized inner product of two channel matrices, in [0, 1]."""
    a = vec(np.asarray(h_i))
    b = vec(np.asarray(h_k))
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("channel correlation undefined for a zero channel")
    return float(abs(np.vdot(a, b)) / (na * nb))


def build_gain_matrix(cascaded, params, phases=None):
    """Shape the K x K amplitude targets from channel strengths.

    Diagonals compress toward the weakest user: gain alpha times
    (min_j ||H_j|| / ||H_k||)^gamma1. The off-diagonal cap on stream k at
    user i scales with the norm ratio ||H_k|| / ||H_i|| and shrinks between
    correlated channels, so strong users tolerate less incoming leakage.
    """
    k_users = len(cascaded)
    norms = np.array([np.linalg.norm(h) for h in cascaded])
    if np.any(norms == 0):
        raise ValueError("gain shaping undefined for a zero channel")
    amp = np.empty((k_users, k_users))
    weakest = norms.min()
    for k in range(k_users):
        amp[k, k] = params.alpha * (weakest / norms[k]) ** params.gamma1
    for i in range(k_users):
        for k in range(k_users):
            if i == k:
                continue
            rho = channel_correlation(cascaded[i], cascaded[k])
            amp[i, k] = (
                params.beta
                * (norms[k] / (norms[i] + params.eps_h)) ** params.gamma2
                * (1.0 + rho) ** -params.gamma3
            )
    if phases is None:
        phases = np.ones((k_users, k_users), dtype=complex)
    return GainMatrix(amplitudes=amp, phases=phases)


def interference_matrix(cascaded, w_matrix):
    """Columns H_i w_k, user index fastest; shape (N, K^2)."""
    w_matrix = np.asarray(w_matrix)
    k_users = len(cascaded)
    if w_matrix.shape[1] != k_users:
        raise ValueError("precoder column count must match the user count")
    cols = [h @ w_matrix[:, k] for k in range(k_users) for h in cascaded]
    return np.column_stack(cols)


def effective_rows(cascaded, phi_values):
    """Rows phi^H H_i; shape (K, M)."""
    return np.array([np.conj(phi_values) @ h for h in cascaded])


def solve_precoders(eff_rows, gain, p_max):
    """Per-stream ridge fits sharing one multiplier under the power cap.

    Column k solves min ||eff_rows w_k - target_k||^2 regularized by the
    smallest shared gamma >= 0 keeping the summed power under p_max.
    """
    eff_rows = np.asarray(eff_rows)
    target = gain.target
    if target.shape[0] != eff_rows.shape[0]:
        raise ValueError("gain matrix size disagrees with the effective rows")
    hess = eff_rows.conj().T @ eff_rows
    rhs = eff_rows.conj().T @ target
    w, _ = ridge_power_solve(hess, rhs, p_max)
    return w


def solve_phase_cfm(xi, q_tilde, bits):
    """Correlation-maximizing discrete phases, one projection per element.

    Element n aligns with the correlation sum_i xi[n, i] * conj(q_tilde_i);
    this is exactly the element-wise grid projection of that sum.
    """
    xi = np.asarray(xi)
    q_tilde = np.asarray(q_tilde)
    if xi.shape[1] != q_tilde.shape[0]:
        raise ValueError("xi columns must match the target length")
    correlation = xi @ np.conj(q_tilde)
    return DiscretePhaseVector(
        bits=bits, indices=quantized_angle_index(correlation, bits)
    )


def jain_index(rates):
    """Jain fairness (sum r)^2 / (K sum r^2), in [1/K, 1]."""
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise ValueError("rates must be non-empty")
    if np.any(r < 0):
        raise ValueError("rates must be non-negative")
    total_sq = float(np.sum(r**2))
    if total_sq == 0:
        raise ValueError("fairness undefined when every rate is zero")
    return float(np.sum(r)) ** 2 / (r.size * total_sq)


@dataclass
class PrecoderSet:
    """Joint design snapshot with its achieved rates."""

    w_matrix: np.ndarray
    ris_phases: DiscretePhaseVector
    rates: np.ndarray
    sum_rate: float
    jain: float


@dataclass
class ImResult:
    """Best-fairness iterate of the adaptation loop plus the full trace."""

    best: PrecoderSet
    best_iteration: int
    trace: list = field(default_factory=list)
    params: FairnessParams = None


def _fit_objective(xi, phi_values, q_tilde):
    achieved = xi.T @ np.conj(phi_values)
    return float(np.sum(np.abs(achieved - q_tilde) ** 2))


def _inner_ao(cascaded, state, gain_amp, ipdd_cfg, phase_method, p_max, rounds):
    """Alternate precoders, phases, and auxiliary phases at fixed shaping.

    Phase candidates that increase the fit residual are rejected, so the
    residual is non-increasing across rounds.
    """
    w, phi, qnu = state
    k_users = len(cascaded)
    for _ in range(rounds):
        gain = GainMatrix(amplitudes=gain_amp, phases=qnu)
        w = solve_precoders(effective_rows(cascaded, phi.values), gain, p_max)
        xi = interference_matrix(cascaded, w)
        q_tilde = vec(gain.target)
        if phase_method == "ipdd":
            qf = QuadraticForm(
                hessian=xi @ xi.conj().T,
                linear=xi @ np.conj(q_tilde),
                constant=float(np.sum(np.abs(q_tilde) ** 2)),
            )
            cand = ipdd_quadratic_discrete(qf, ipdd_cfg, init=phi).phases
        elif phase_method == "cfm":
            cand = solve_phase_cfm(xi, q_tilde, ipdd_cfg.bits)
        else:
            raise ValueError("phase_method must be 'ipdd' or 'cfm'")
        if _fit_objective(xi, cand.values, q_tilde) <= _fit_objective(
            xi, phi.values, q_tilde
        ):
            phi = cand
        achieved = xi.T @ np.conj(phi.values)
        qnu = unvec(phase_align(achieved), k_users, k_users)
    return w, phi, qnu


def _evaluate(cascaded, w, phi, noise_power):
    rates = achievable_rates(cascaded, w, phi.values, noise_power)
    return rates, float(np.sum(rates)), jain_index(rates)


def run_im(
    geom,
    cascaded,
    params,
    ipdd_cfg,
    phase_method="ipdd",
    iters=10,
    inner_rounds=10,
    probe_rounds=5,
    step=None,
    perturb=None,
):
    """Fairness-adaptive interference management.

    Each adaptation iteration rebuilds the gain targets from the current
    shaping parameters, refines precoders and phases by alternating fits,
    then nudges the parameters along a finite-difference estimate of the
    Jain gradient (relative step for alpha, absolute for the rest).
    Gradient probes warm start from the incumbent design with a short fit.
    The best-fairness iterate seen is returned, never just the last one.
    step and perturb default to the values carried by params; an explicit
    step of 0.0 freezes the shaping parameters.
    """
    k_users = len(cascaded)
    if k_users < 1:
        raise ValueError("need at least one user channel")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if step is None:
        step = params.step
    if perturb is None:
        perturb = params.perturb
    n = cascaded[0].shape[0]
    phi = DiscretePhaseVector.zeros(n, ipdd_cfg.bits)
    qnu = np.ones((k_users, k_users), dtype=complex)
    w = np.zeros((cascaded[0].shape[1], k_users), dtype=complex)
    state = (w, phi, qnu)
    chi = params
    p_max = geom.max_power_w
    noise = geom.noise_power_w

    names = ("alpha", "beta", "gamma1", "gamma2", "gamma3")
    trace = []
    best = None
    best_jain = -np.inf
    best_iter = -1
    for it in range(1, iters + 1):
        gain_amp = build_gain_matrix(cascaded, chi).amplitudes
        state = _inner_ao(
            cascaded, state, gain_amp, ipdd_cfg, phase_method, p_max, inner_rounds
        )
        w, phi, qnu = state
        rates, sum_rate, jain = _evaluate(cascaded, w, phi, noise)
        row = {
            "iter": it,
            "alpha": chi.alpha,
            "beta": chi.beta,
            "gamma1": chi.gamma1,
            "gamma2": chi.gamma2,
            "gamma3": chi.gamma3,
            "J": jain,
            "sum_rate": sum_rate,
        }
        for k in range(k_users):
            row[f"rate_{k + 1}"] = float(rates[k])
        trace.append(row)
        if jain > best_jain:
            best_jain = jain
            best_iter = it
            best = PrecoderSet(
                w_matrix=w.copy(),
                ris_phases=phi,
                rates=rates.copy(),
                sum_rate=sum_rate,
                jain=jain,
            )
        if it == iters or step == 0.0:
            continue

        grad = np.zeros(len(names))
        for j, name in enumerate(names):
            value = getattr(chi, name)
            delta = perturb * value if name == "alpha" else perturb
            if delta == 0.0:
                delta = perturb
            try:
                chi_probe = replace(chi, **{name: value + delta})
            except ValueError:
                grad[j] = 0.0
                continue
            amp_probe = build_gain_matrix(cascaded, chi_probe).amplitudes
            probe_state = _inner_ao(
                cascaded,
                copy.deepcopy(state),
                amp_probe,
                ipdd_cfg,
                phase_method,
                p_max,
                probe_rounds,
            )
            _, _, jain_probe = _evaluate(
                cascaded, probe_state[0], probe_state[1], noise
            )
            grad[j] = (jain_probe - jain) / delta
        updated = chi.as_array() + step * grad
        updated[0] = max(updated[0], 0.0)
        updated[1] = max(updated[1], 0.0)
        chi = FairnessParams(
            *updated, eps_h=chi.eps_h, step=chi.step, perturb=chi.perturb
        )

    return ImResult(best=best, best_iteration=best_iter, trace=trace, params=chi)
