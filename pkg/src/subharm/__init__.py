"""Approximation of subharmonic functions by logarithms of moduli of entire functions."""

__version__ = "0.1.0"

from .measure import (  # noqa: E402
    Measure,
    MeasureError,
    MeasureFormatError,
    Region,
    canonicalize,
    discretize_radial_density,
    generic_origin_shift,
    read_measure,
    restrict,
    split_at_quantile,
    total_mass,
    verify_generic_origin,
    write_measure,
)
from .partition import LogRectangle, PartitionPiece, partition_mass_two, verify_partition  # noqa: E402
from .decomposition import (  # noqa: E402
    AnnularDecomposition,
    HeavyTailSchedule,
    SlowlyVarying,
    annular_split,
    heavy_tail_schedule,
    normalize_origin,
)
from .atomize import AtomPair, atomize_pair, delta_term, to_log_coords  # noqa: E402
from .potential import (  # noqa: E402
    ZeroSet,
    approximate,
    assemble_approximant,
    build_f2,
    extract_integer_atoms,
    log_modulus,
    log_potential,
)
from .metrics import (  # noqa: E402
    circle_mean,
    counting_function,
    integrated_counting,
    jensen_residual,
    l1_disk_error,
    sup_on_circle,
)
from .counterexample import UPhiSpec, best_rounding, build_u_phi, counting_gap_scan  # noqa: E402
