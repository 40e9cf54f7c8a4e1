"""Direct and inverse kinematics for hyper-redundant arms with online sector restructuring."""
from .errors import (
    HyperkinError,
    InconsistentConfiguration,
    InvalidArgument,
    InvalidState,
    InvalidTransition,
    MalformedLayout,
    NoFunctionalDofs,
    NoFurtherStates,
    SelfCheckFailure,
    SingularSystem,
)
from .ik import (
    Jacobian,
    SolveReport,
    SolverSettings,
    Status,
    classic_jacobian,
    damped_pseudo_inverse,
    finite_difference_jacobian,
    ik_step,
    reduced_jacobian,
    solve_to_pose,
)
from .kinematics import ArmLayout, Mode, classic_forward
from .meta import (
    ControllerState,
    failure_detector,
    halving_step,
    initial_state,
    mark_damaged,
    restructure,
    solve_with_escalation,
    state_count,
)
from .sectors import (
    SectorDecomposition,
    body_transform_closed,
    body_transform_iterative,
    chord_length,
    count_dofs,
    decompose,
    expand_configuration,
    project_configuration,
    reduced_forward,
)
from .transforms import HomTransform, Twist, bend_translation, compose, pose_error, twist_rotation

__version__ = "0.1.0"
