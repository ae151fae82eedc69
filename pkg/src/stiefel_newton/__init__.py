"""Second-order optimization on orthogonal Stiefel manifolds St(n, p).

The embedded-gradient approach: Lagrange multiplier matrix, explicit tangent
frames, frame Hessians, critical-point classification and a Newton iteration
with the qf retraction.
"""

from .costs import (
    BrockettModel,
    CostModel,
    CustomModel,
    PenroseModel,
    ProcrustesModel,
    brockett_model,
    custom_model,
    penrose_model,
    procrustes_model,
)
from .errors import *  # noqa: F401,F403
from .frame import (
    LocalFrame,
    PivotSet,
    build_frame,
    frame_dimension,
    orthonormalize_frame,
    select_pivot_rows,
)
from .newton import (
    NewtonOptions,
    OptimizationResult,
    Status,
    enumerate_brockett_critical_points,
    newton_solve,
    newton_step,
)
from .optimality import (
    Classification,
    CriticalityReport,
    FrameHessian,
    Kind,
    assemble_frame_hessian,
    classify_critical_point,
    embedded_gradient,
    frame_gradient_coords,
    hessian_form_on_pair,
    is_critical,
    sigma_kron_bilinear,
    sigma_matrix,
)
from .stiefel import (
    ConstraintVector,
    StiefelPoint,
    TangentVector,
    constraint_values,
    make_stiefel_point,
    project_tangent,
    random_stiefel,
    retract_qf,
    tangent_components,
)

__version__ = "0.1.0"
