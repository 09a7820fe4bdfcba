"""Carrier-emitter and reader selection for bistatic backscatter links in cell-free MIMO."""

from .channel import make_orthogonal_sequences, make_probing_signal, synthesize_channels
from .detector import (
    DetectorConfig,
    closed_form_pe,
    closed_form_pe_case3,
    llr_detect,
    monte_carlo_ber,
    pe_from_metric,
    q_function,
    simulate_received,
)
from .geometry import (
    DegenerateGeometryError,
    Deployment,
    InfeasibleGeometryError,
    Point,
    Rectangle,
    boundary_points,
    distance,
    nearest_ap,
    partition_centroids,
    path_gain,
)
from .metrics import MetricContext, lambda1, lambda2, lambda3, pair_metric, received_snr
from .selection import (
    PgdSettings,
    benchmark_pair,
    exhaustive_pair,
    grid_search_min,
    opc1_objective,
    pgd_minimize,
    select_ce,
    select_pair,
    snr_gap_db,
)

__version__ = "0.1.0"
