"""Reconstruct quasiprobability distributions of a decaying cavity field.

The field is displaced by a short drive, left to decay, and its photon
statistics are read out. A weighted parity series whose weights undo the
decay recovers the Wigner (or any ``s <= 0``) function of the state as it
was right after preparation.
"""

from .channel import (
    DecayParams,
    DriveParams,
    damp,
    damp_diagonal,
    drive_and_decay,
    effective_drive_amplitude,
    integrate_master,
)
from .exceptions import (
    ConfigError,
    DegenerateStateError,
    DimensionError,
    GridError,
    ReconError,
    SamplingError,
    TruncationError,
    UnphysicalStateError,
)
from .fockspace import (
    DensityMatrix,
    FockVector,
    PhotonDistribution,
    cat_density,
    coherent_density,
    coherent_vector,
    displace,
    displacement_matrix,
    fock_density,
    number_distribution,
)
from .probe import InversionTrace, ProbeConfig, invert_trace, sample_trace
from .quasiprob import (
    QuasiprobGrid,
    evaluate_series,
    grid_eval,
    husimi_q,
    quasiprob_point,
    series_weight,
    wigner_direct,
)
from .recon import (
    ReconPlan,
    Snapshot,
    StateSpec,
    axis,
    drive_for_target,
    monte_carlo_grid,
    reconstruct_grid,
    reconstruct_point,
    snapshot_series,
)
from .estimators import ParitySeriesTransformer, QuasiprobReconstructor

__version__ = "0.1.0"
