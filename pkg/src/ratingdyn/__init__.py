"""Credit-rating transition matrices and tests of the continuous-time,
Markov, time-homogeneous assumptions across rating-scale resolutions."""
import logging

from .diagnostics import (
    DiagnosticSeries,
    IncrementStats,
    date_grid,
    delta_across_states,
    distance_report,
    increment_moments,
    likelihood_distance,
    rating_histogram,
    rating_increments,
    rolling_diagnostics,
    series_lookup,
)
from .estimators import (
    EmptyWindowError,
    SegmentTable,
    TransitionCounts,
    chapman_kolmogorov_estimate,
    cohort_estimate,
    count_window,
    generator_estimate,
    matrix_exponential,
)
from .ingest import (
    GRADES,
    IngestConfig,
    IngestError,
    RatingHistory,
    Segment,
    grade_to_index,
    parse_history_file,
    write_history_file,
)
from .simulate import (
    SimulationConfig,
    birth_death_generator,
    pairflip_generator,
    simulate,
    uniform_jump_generator,
)
from .statespace import CoarseningMap, StateSpace, coarsen_history, make_state_space, pairwise_coarsen

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
