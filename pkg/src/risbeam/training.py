"""Beam training: probe codewords, follow the strongest response.

Hierarchical training descends the codebook level by level, probing only
the children of the current winner; exhaustive training probes every leaf.
Both feed back the argmax-SNR probe (ties resolve to the lowest region
index) and report the winning leaf's center as the position estimate.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import bs_ris_channel, cascaded_channel, ris_user_channel


@dataclass
class TrainingResult:
    """Outcome of one training run."""

    selected_path: list
    estimated_user_xz: tuple
    probes_used: int
    snr_trace: list
    achieved_rate: float
    selected_snr: float = 0.0
    probe_log: list = field(default_factory=list)


def training_overhead(s, l, scheme):
    """Probe count: s*l for hierarchical descent, s**l for exhaustive."""
    if s < 1 or l < 1:
        raise ValueError("s and l must be at least 1")
    if scheme == "hierarchical":
        return s * l
    if scheme == "exhaustive":
        return s**l
    raise ValueError("scheme must be 'hierarchical' or 'exhaustive'")


def _received_value(cascaded, codeword):
    return complex(
        np.vdot(codeword.ris_phases.values, cascaded @ codeword.bs_precoder)
    )


def probe_snr(geom, codeword, user_xyz, noise_power, rng=None):
    """Measured SNR of one probe at the exact user location.

    Deterministic without an rng; with one, a single complex Gaussian noise
    draw perturbs the received symbol before the magnitude is taken.
    """
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    h = ris_user_channel(geom, user_xyz)
    c = cascaded_channel(bs_ris_channel(geom), h)
    return _measure(_received_value(c, codeword), noise_power, rng)


def _measure(value, noise_power, rng):
    if rng is not None:
        scale = np.sqrt(noise_power / 2.0)
        value = value + scale * (rng.standard_normal() + 1j * rng.standard_normal())
    return float(abs(value) ** 2 / noise_power)


def _probe_round(cascaded, codewords, noise_power, rng, level, log):
    snrs = []
    for cw in codewords:
        snr = _measure(_received_value(cascaded, cw), noise_power, rng)
        snrs.append(snr)
        log.append((level, cw.region_index, snr))
    return int(np.argmax(snrs)), snrs


def hierarchical_train(codebook, geom, user_xyz, noise_power, rng=None):
    """Descend the codebook, probing the current winner's children only."""
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    cascaded = cascaded_channel(bs_ris_channel(geom), ris_user_channel(geom, user_xyz))
    path = []
    snr_trace = []
    log = []
    candidates = codebook.levels[0]
    winner = None
    for level in range(codebook.n_levels):
        if not candidates:
            raise ValueError("codebook level has no candidates to probe")
        best, snrs = _probe_round(cascaded, candidates, noise_power, rng, level, log)
        winner = candidates[best]
        path.append(winner.region_index)
        snr_trace.extend(snrs)
        candidates = codebook.children(level, winner.region_index)
    return _finish(winner, cascaded, noise_power, path, snr_trace, log)


def exhaustive_train(codebook, geom, user_xyz, noise_power, rng=None):
    """Probe every leaf codeword once and keep the strongest."""
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    cascaded = cascaded_channel(bs_ris_channel(geom), ris_user_channel(geom, user_xyz))
    leaves = codebook.levels[-1]
    log = []
    best, snrs = _probe_round(
        cascaded, leaves, noise_power, rng, codebook.n_levels - 1, log
    )
    winner = leaves[best]
    return _finish(winner, cascaded, noise_power, [winner.region_index], snrs, log)


def _finish(winner, cascaded, noise_power, path, snr_trace, log):
    # the reported rate uses the true (noise-free) response of the pick
    true_snr = abs(_received_value(cascaded, winner)) ** 2 / noise_power
    return TrainingResult(
        selected_path=path,
        estimated_user_xz=winner.center,
        probes_used=len(log),
        snr_trace=snr_trace,
        achieved_rate=float(np.log2(1.0 + true_snr)),
        selected_snr=float(true_snr),
        probe_log=log,
    )
