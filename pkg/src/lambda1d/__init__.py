"""Single-photon stimulation of a lambda emitter in a semi-infinite 1D waveguide."""

from .core import (
    PhysicalParams,
    SpatialGrid,
    Wavepacket,
    default_grid,
    make_exponential_wavepacket,
    overlap,
)
from .dynamics import (
    SingleExcitationState,
    SiteHistory,
    TimeSeries,
    evolve,
    excited_population,
    initial_state,
    reabsorption_signature,
    solve_analytic,
    step_delay_pde,
)

__version__ = "0.1.0"
