"""Hadamard variation of Laplacian eigenvalues on P1 meshes.

Pull a deformed domain back to a fixed reference mesh, assemble the pulled
back forms and their t-derivatives, and read first and second unilateral
eigenvalue derivatives off small cluster eigenproblems.
"""

from .assemble import FormBundle, assemble_forms, eval_form
from .deform import AnalyticField, NodalField, affine_family, identity_family, pullback_coeffs
from .gevp import EigenPacket, b_orthonormalize, solve_gevp
from .hadamard import (Tolerances, detect_clusters, first_derivatives, full_report,
                       second_derivatives, sensitivity, solve_gamma)
from .mesh import BoundaryTag, Mesh, generate_rect_mesh, load_mesh, save_mesh, validate_mesh
from .rearrange import (CurveGrid, apply_plan, cluster_p_value, mesh_node_evaluator,
                        sample_curves, transversal_rearrange)

__version__ = "0.1.0"
