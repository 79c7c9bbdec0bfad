"""Monte Carlo laboratory for critical planar percolation on trivalent tilings."""
from .arms import (CLOSED_ONE_ARM, FOUR_ARM, ONE_ARM, AnnulusSpec, ArmPattern, ArmProbabilityTable,
                   boundary_three_arm, estimate_arm_probability, fit_exponent, has_arm_event,
                   interface_strands)
from .connectivity import (CLOSED, HORIZONTAL, OPEN, VERTICAL, Quad, check_duality, clusters,
                           crossing_matrix, crossing_witness, has_crossing, has_dual_crossing,
                           is_conforming, snap_quad)
from .experiments import (appendixB_experiment, coupling_sum_experiment, finite_predictor_experiment,
                          gluing_experiment)
from .explore import (BoundaryCondition, dobrushin_interface, is_pivotal, lowest_crossing, pivotal_set,
                      trace_interface)
from .quadalgebra import QuadFamily, crossing_vector, perturbation_stability, rect_leq
from .stats import Estimate
from .tiling import (SQUARE_BOND, TRIANGULAR, Configuration, CurveSpec, Lattice, build_lattice,
                     resample_region, sample_configuration)

__version__ = "0.1.0"

__all__ = [
    "CLOSED_ONE_ARM",
    "FOUR_ARM",
    "ONE_ARM",
    "AnnulusSpec",
    "ArmPattern",
    "ArmProbabilityTable",
    "boundary_three_arm",
    "estimate_arm_probability",
    "fit_exponent",
    "has_arm_event",
    "interface_strands",
    "CLOSED",
    "HORIZONTAL",
    "OPEN",
    "VERTICAL",
    "Quad",
    "check_duality",
    "clusters",
    "crossing_matrix",
    "crossing_witness",
    "has_crossing",
    "has_dual_crossing",
    "is_conforming",
    "snap_quad",
    "appendixB_experiment",
    "coupling_sum_experiment",
    "finite_predictor_experiment",
    "gluing_experiment",
    "BoundaryCondition",
    "dobrushin_interface",
    "is_pivotal",
    "lowest_crossing",
    "pivotal_set",
    "trace_interface",
    "QuadFamily",
    "crossing_vector",
    "perturbation_stability",
    "rect_leq",
    "Estimate",
    "SQUARE_BOND",
    "TRIANGULAR",
    "Configuration",
    "CurveSpec",
    "Lattice",
    "build_lattice",
    "resample_region",
    "sample_configuration",
]
