"""Rate evaluation and the weighted-MMSE sum-rate baseline.

Rates always come from the full downlink SINR with every cross-stream term
included, independent of whatever surrogate a solver optimized. The
weighted-MMSE loop alternates closed-form receiver and weight updates, a
ridge precoder solve under the sum-power cap, and a discrete phase step;
phase candidates that lower the sum rate are rejected so the recorded
trace is non-decreasing.
"""

from dataclasses import dataclass, field

import numpy as np

from .projections import DiscretePhaseVector
from .solvers import QuadraticForm, ipdd_quadratic_discrete, ridge_power_solve


def _gains(cascaded, w_matrix, phi_values):
    """gains[k, i] = phi^H H_k w_i for every user k and stream i."""
    w_matrix = np.asarray(w_matrix)
    return np.array(
        [np.conj(phi_values) @ (h @ w_matrix) for h in cascaded]
    )


def user_sinr(cascaded, w_matrix, phi_values, k, noise_power):
    """Downlink SINR of user k under precoder columns w_i and phases phi."""
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    gains = _gains(cascaded, w_matrix, phi_values)
    signal = abs(gains[k, k]) ** 2
    interference = float(np.sum(np.abs(gains[k]) ** 2)) - signal
    return signal / (interference + noise_power)


def achievable_rates(cascaded, w_matrix, phi_values, noise_power):
    """log2(1 + SINR) for every user; noise_power may be per user."""
    k_users = len(cascaded)
    noise = np.broadcast_to(np.asarray(noise_power, dtype=float), (k_users,))
    return np.array(
        [
            np.log2(1.0 + user_sinr(cascaded, w_matrix, phi_values, k, noise[k]))
            for k in range(k_users)
        ]
    )


@dataclass
class WmmseState:
    """Iterates of the weighted-MMSE loop."""

    w_matrix: np.ndarray
    ris_phases: DiscretePhaseVector
    v_aux: np.ndarray
    rho_aux: np.ndarray
    sum_rate_trace: list = field(default_factory=list)


def _default_init(cascaded, bits, p_max):
    """Equal-power matched filters plus a one-shot phase projection.

    The phase init projects the summed direct-stream responses onto the
    discrete grid (the correlation-maximization rule against a diagonal
    gain target), then the matched filters are rebuilt for those phases.
    """
    k_users = len(cascaded)
    n = cascaded[0].shape[0]
    phi = np.ones(n, dtype=complex)

    def matched(phi_values):
        cols = []
        for h in cascaded:
            direction = h.conj().T @ phi_values
            norm = np.linalg.norm(direction)
            if norm == 0:
                direction = np.zeros_like(direction)
                direction[0] = 1.0
                norm = 1.0
            cols.append(np.sqrt(p_max / k_users) * direction / norm)
        return np.column_stack(cols)

    w = matched(phi)
    phases = DiscretePhaseVector.project(
        sum(h @ w[:, k] for k, h in enumerate(cascaded)), bits
    )
    return matched(phases.values), phases


def wmmse_sum_rate(cascaded, ipdd_cfg, p_max, noise_power, init=None, iters=50):
    """Alternating weighted-MMSE maximization of the sum rate.

    Returns the final state with one sum-rate trace entry per iteration.
    """
    if not cascaded:
        raise ValueError("need at least one user channel")
    if p_max <= 0 or noise_power <= 0:
        raise ValueError("p_max and noise_power must be positive")
    k_users = len(cascaded)
    if init is None:
        w, phi = _default_init(cascaded, ipdd_cfg.bits, p_max)
    else:
        w = np.asarray(init.w_matrix, dtype=complex).copy()
        phi = init.ris_phases

    trace = []
    v_aux = np.zeros(k_users, dtype=complex)
    rho_aux = np.ones(k_users)
    sum_rate = float(np.sum(achievable_rates(cascaded, w, phi.values, noise_power)))
    for _ in range(iters):
        gains = _gains(cascaded, w, phi.values)
        # receive scalars and MSE weights, both closed forms
        totals = np.sum(np.abs(gains) ** 2, axis=1) + noise_power
        v_aux = np.diag(gains) / totals
        # the residual power equals interference plus noise and can never
        # fall below the noise floor; without the clamp a strong
        # interference-free link cancels it to zero in floating point and
        # the weight blows up to inf
        residual = np.maximum(totals - np.abs(np.diag(gains)) ** 2, noise_power)
        rho_aux = totals / residual

        # precoder block: shared ridge multiplier under the sum-power cap.
        # The weighted-MSE surrogate guarantees this exact step never lowers
        # the sum rate; the guard only protects against the multiplier
        # bisection tolerance at floating-point level.
        eff = np.column_stack([h.conj().T @ phi.values for h in cascaded])
        weights = rho_aux * np.abs(v_aux) ** 2
        hess = (weights * eff) @ eff.conj().T
        rhs = eff * (rho_aux * v_aux)
        w_cand, _ = ridge_power_solve(hess, rhs, p_max)
        rate_w_cand = float(
            np.sum(achievable_rates(cascaded, w_cand, phi.values, noise_power))
        )
        rate_w_keep = float(
            np.sum(achievable_rates(cascaded, w, phi.values, noise_power))
        )
        if rate_w_cand >= rate_w_keep:
            w = w_cand

        # discrete phase step, rejected if it lowers the sum rate
        w_gram = w @ w.conj().T
        d_hat = np.zeros((phi.indices.size, phi.indices.size), dtype=complex)
        b_hat = np.zeros(phi.indices.size, dtype=complex)
        for k, h in enumerate(cascaded):
            d_hat += rho_aux[k] * abs(v_aux[k]) ** 2 * (h @ w_gram @ h.conj().T)
            b_hat += rho_aux[k] * np.conj(v_aux[k]) * (h @ w[:, k])
        d_hat = 0.5 * (d_hat + d_hat.conj().T)
        cand = ipdd_quadratic_discrete(
            QuadraticForm(hessian=d_hat, linear=b_hat), ipdd_cfg, init=phi
        ).phases
        rate_cand = float(
            np.sum(achievable_rates(cascaded, w, cand.values, noise_power))
        )
        rate_keep = float(
            np.sum(achievable_rates(cascaded, w, phi.values, noise_power))
        )
        if rate_cand >= rate_keep:
            phi = cand
            sum_rate = rate_cand
        else:
            sum_rate = rate_keep
        trace.append(sum_rate)

    return WmmseState(
        w_matrix=w,
        ris_phases=phi,
        v_aux=v_aux,
        rho_aux=rho_aux,
        sum_rate_trace=trace,
    )
