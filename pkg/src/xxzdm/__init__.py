"""Two-qubit XXZ spin dimer with Dzyaloshinskii-Moriya coupling in Lorentzian baths."""
__version__ = "0.1.0"

from .model import (
    ModelParams,
    DerivedParams,
    ParameterError,
    build_hamiltonian,
    derived_params,
    gibbs_state,
    validate_density,
)
from .dynamics import (
    rate,
    decay_exponent,
    liouvillian_rhs,
    evolve_ode,
    evolve_closed_form,
    build_propagator_block,
    thermal_spectrum,
)
from .observables import (
    eigenvalues_hermitian,
    specific_heat_normalized,
    specific_heat_closed_oracle,
    concurrence,
    concurrence_xstate,
    thermal_concurrence_analytic,
    eof,
)
