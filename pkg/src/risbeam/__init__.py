"""Near-field codebook construction and multiuser precoding for discrete-phase
reconfigurable surfaces.

The package is organized around a single residual form: the squared distance
between achieved beam responses and a desired amplitude/phase pattern. The
codebook, precoding, and hybrid modules all reduce their subproblems to that
form and share the solvers in :mod:`risbeam.solvers`.
"""

from .geometry import (
    SystemGeometry,
    ChannelSet,
    bs_ris_channel,
    ris_user_channel,
    cascaded_channel,
    build_channel_set,
    rayleigh_distance,
)
from .projections import (
    DiscretePhaseVector,
    cmdpp_project,
    quantized_angle_index,
    phase_align,
)
from .solvers import (
    IpddConfig,
    QuadraticForm,
    IpddResult,
    power_constrained_ls,
    ridge_power_solve,
    ipdd_quadratic_discrete,
)
from .codebook import (
    SamplingGrid,
    DesiredPattern,
    Codeword,
    Codebook,
    CodebookSpec,
    make_sampling_grid,
    desired_pattern,
    assemble_training_matrices,
    solve_socc,
    solve_jocc,
    socc_precoder,
    update_pnu,
    beam_values,
    evaluate_beam_pattern,
    build_codebook,
    save_codebook,
    load_codebook,
)
from .training import (
    TrainingResult,
    probe_snr,
    hierarchical_train,
    exhaustive_train,
    training_overhead,
)
from .benchmarks import WmmseState, user_sinr, achievable_rates, wmmse_sum_rate
from .interference import (
    FairnessParams,
    GainMatrix,
    PrecoderSet,
    ImResult,
    default_fairness_params,
    channel_correlation,
    build_gain_matrix,
    interference_matrix,
    effective_rows,
    solve_precoders,
    solve_phase_cfm,
    jain_index,
    run_im,
)
from .hybrid import HybridPrecoder, solve_digital, solve_analog, hybrid_factorize

__version__ = "0.1.0"
