"""Finite-time coherent sets from trajectory data.

The dynamic Laplacian is discretized with P1 finite elements on Delaunay
meshes of the trajectory positions at each time; its leading eigenfunctions
are post-processed with SEBA and scored with static and dynamic Cheeger
ratios.
"""
from .cheeger import (NodeSet, PackingReport, check_bound, dynamic_cheeger_ratio,
                      dynamic_cheeger_ratios, nodal_domains, static_cheeger_ratio,
                      superlevel_packing, threshold_scan)
from .dynamic import BC, DynLapSystem, assemble_slice, assemble_system
from .eigen import EigenResult, pushforward_field, solve_gevp, solve_system
from .flow import (FlowField, Polyline, TrajectoryEnsemble, advect_polyline, double_gyre_field,
                   generate_trajectories, integrate, polyline_length, rotation_field, zero_field)
from .kernels import BACKEND
from .mesh import TriMesh, assemble_mass, assemble_stiffness, delaunay_triangulate
from .seba import SebaBasis, reliability, seba
from .trajio import export_fields, load_trajectories, save_trajectories

__version__ = "0.1.0"
