"""Exact computation of scattering diagrams, broken-line theta functions,
theta-basis mirror algebras, and Stanley-Reisner central fibres."""

from .geometry import (AffineManifold, Fan, PLFunction, RationalCone,
                       build_affine_structure_dim2, bend, locate, monodromy,
                       parallel_transport, p2_manifold, plane_manifold,
                       toric_manifold)
from .scattering import (PLSection, ScatteringDiagram, Wall, complete,
                         empty_diagram, height, is_consistent,
                         make_line_wall, make_ray_wall, path_ordered_product,
                         wall_cross, wall_cross_series)
from .series import CurveClassMonoid, TruncatedSeries
from .spines import (MetricTree, Spine, WallSet, concat, generate_walls, glue,
                     is_balanced, is_transverse, is_wall_spine, nb_vertex,
                     solve_weights, z_cycle)
from .theta import (BrokenLine, MirrorAlgebra, ThetaFunction, absolutize,
                    build_algebra, check_associativity, check_convexity,
                    check_grading, enumerate_broken_lines, multiply,
                    rees_filtration, structure_constants,
                    theta_consistency_check, theta_local)
from .vertex import (DualComplex, VertexAlgebra, check_pseudomanifold,
                     compare_central_fibre, complex_from_fan,
                     complex_from_simplices, link_homology_check, sr_multiply)

__version__ = "0.1.0"
