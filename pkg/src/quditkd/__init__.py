"""Qudit two-basis key distribution: channel algebra, two-way distillation analytics and simulation."""

__version__ = "0.1.0"

from .der_map import (
    DerEvolution,
    ac_table,
    check_observation1,
    der_diagnostics,
    dstep,
    dstep_closed_form,
    iterate_dstep,
)
from .errors import *  # noqa: F401,F403
from .gf_algebra import (
    fourier_matrix,
    identity_residual,
    pauli_matrix,
    phase,
    prime_dim,
    roots_of_unity,
    xor_gate,
    xor_matrix,
)
from .isotropic import (
    characteristic_exponent,
    critical_rounds,
    d_2cc,
    d_th,
    delta_gap,
    distillable,
    iso_abc,
    iso_dstep_closed,
    threshold_table,
)
from .mc_sim import SimConfig, SimReport, run_protocol
from .pauli_channel import (
    ErrorDistribution,
    IsotropicParams,
    disturbance,
    from_depolarizing,
    from_isotropic,
    isotropic_from_disturbance,
    make_distribution,
    symmetrize,
)
from .pec_bounds import (
    choose_block_length,
    f_value,
    majority_failure_bound,
    security_assessment,
)
