"""Nonadiabatic transitions of driven two-level systems with a band-touching point."""

from .dynamics import (
    PhaseDecomposition,
    Protocol,
    Trajectory,
    adiabatic_frame_evolve,
    cn_step,
    delta_phi_estimate,
    drive_probability,
    evolve,
    lz_probability,
    rk4_oracle_evolve,
    split_phase_analysis,
    transition_probability,
    wrap_phase,
)
from .errors import (
    BandTouchError,
    DegeneratePointError,
    GapCollapseError,
    UnsupportedModelError,
    VanishingAmplitudeError,
)
from .fis import FisProfile, chi_closed_form, chi_matrix_element, chi_zero_limit, fis_profile
from .models import (
    GL,
    GP,
    EigenSystem,
    GrapheneQuadratic,
    GrapheneTightBinding,
    HermitianMatrix2,
    ModelSpec,
    PolyDiag,
    PWave,
    eigensystem,
    eval_hamiltonian,
    graphene_effective_model,
    graphene_structure_factor,
    hamiltonian_derivative,
    model_from_dict,
)

__version__ = "0.1.0"
