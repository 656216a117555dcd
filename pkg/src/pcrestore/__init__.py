"""Piecewise-constant restoration of damaged color images."""
from .core import (ColorImage, DamageMask, GreyObservation, GridGeometry, Labeling, ModelParams,
                   Neighborhood, Palette, Problem, ValidationReport, validate_instance)
from .distortion import DistortionTable, Extrapolation, eval_L, fit_distortion, synthesize_instance
from .energy import (EnergyBreakdown, Triviality, fidelity_terms, nontriviality_check,
                     per_label_boundary_length, total_energy, unweighted_interface_length,
                     weighted_perimeter)
from .mincut import FlowNetwork, max_flow_min_cut
from .solver import Engine, SolveOptions, SolveTrace, expansion_move, icm_move, solve_fixed_palette
from .palette import (PaletteSolveResult, init_palette_kmeans, merge_degenerate, solve_free_palette,
                      update_color)
from .diagnostics import (RegularityReport, check_h3, density_ratio, elimination_scan,
                          extract_jump_edges, regularity_report)
from .oracle import brute_force_binary_move, brute_force_fixed_palette

__version__ = "0.1.0"
