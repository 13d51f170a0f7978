"""Volume, facets and stability of normal cones of clusterings."""
from .assign import kmeans, kmeans_restarts, lsa_bounded, lsa_fixed_shape, maximize_linear_bounded, solve_transport
from .cone import (
    NormalConeH,
    build_normal_cone,
    cone_contains,
    enumerate_cyclic_movements,
    enumerate_feasible_single_movements,
    estimate_volume,
    filter_facets,
    sphere_surface_area,
    spherical_distance,
)
from .core import Bounds, Clustering, Dataset, InvalidInput, PointSet, check_general_position, clustering_vector, load_dataset
from .movements import Movement, apply_movement, build_cdg, decompose, movement_vector
from .oracle import PolytopeOracle, empirical_lsa_frequency, enumerate_feasible, is_vertex, oracle_adjacent
from .powerdiagram import PowerDiagram, locate, verify_induces, weights_for_sites
from .stability import gamma_p, most_stable_site, rescale_for_norm, stability_of

__version__ = "0.1.0"
