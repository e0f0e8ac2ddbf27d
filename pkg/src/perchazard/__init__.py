"""Percolation micro-foundation of the JLS crash hazard rate.

Traders sit on the sites of a square lattice; connected clusters act in
concert and switch to selling at a rate growing super-linearly with their
size. Summing over clusters gives a crash hazard that diverges as the
occupancy fraction approaches the percolation threshold, which in turn
drives a rational-expectation bubble price path.
"""

from .analysis import (
    HazardCurve,
    PowerLawFit,
    bubble_segments,
    excursions,
    fit_singularity,
    hazard_curve,
    path_summary,
    saddle_point_convergence,
)
from .config import RunConfig, load_config, load_preset, preset_names
from .driver import DriverSpec, DriverState, reset_after_crash, step_driver
from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    InsufficientDataError,
    NormalizationError,
    PositivityError,
    SingularityError,
)
from .hazard import (
    ActivityLaw,
    HazardModel,
    MinSizeRule,
    PercolationConstants,
    activity_rate,
    characteristic_size,
    effective_exponent,
    empirical_hazard,
    heterogeneous_hazard_integral,
    singularity_exponent,
    theoretical_hazard,
)
from .market import (
    CrashEvent,
    HazardBank,
    MarketPath,
    MarketState,
    PriceParams,
    draw_crash,
    ensemble_final_prices,
    run_simulation,
    step_price,
)
from .percolation import (
    ClusterLabeling,
    ClusterSizeHistogram,
    IncrementalLattice,
    LatticeSpec,
    OccupancyMask,
    add_random_site,
    cluster_histogram,
    generate_reshuffled,
    label_clusters,
    normalized_numbers,
)
