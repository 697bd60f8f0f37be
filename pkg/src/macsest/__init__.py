"""Compressed-sensing channel estimation for movable-antenna links.

A channel between two square antenna regions is reconstructed from a few
pilot measurements at chosen Tx/Rx positions by running orthogonal matching
pursuit over a quantised grid of virtual departure/arrival angles.
"""

from .channel import (
    ChannelRealization,
    NoiseModel,
    PathComponent,
    Position,
    VirtualAngles,
    channel_response,
    field_response_phase,
    measure,
    measure_many,
    random_channel,
    random_on_grid_channel,
)
from .estimate import (
    EstimatedChannel,
    OmpConfig,
    SparseEstimate,
    extract_paths,
    omp,
    reconstruct,
)
from .grid import AngleGrid, GridIndex4, flat_index, grid_value, quantize, unflatten
from .harness import ExperimentConfig, coherence_report, run_trial, sweep
from .measure import (
    MeasurementOperator,
    MeasurementPlan,
    OperatorMode,
    Setup,
    effective_coherence_1d,
    gen_cross,
    gen_edge,
    gen_random,
    gen_random_walk,
    gen_upa,
    ideal_sinc_coherence,
    mutual_coherence_column,
)
from .metrics import (
    ErrorReport,
    SampleGrid,
    angle_error,
    coeff_error,
    error_report,
    fpa_snr,
    max_snr,
    nmse,
)

__version__ = "0.1.0"
