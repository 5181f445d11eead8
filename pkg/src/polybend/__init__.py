"""Shape and tip-force estimation for tendon-driven continuum instruments.

The bent shape is parameterized by a quadratic curvature profile plus a
bending-plane angle; cable displacements, tip poses, and their Jacobians
are closed-form or fixed-cost quadrature.  Statics follow the virtual-work
balance between cable tensions, an external tip wrench, and the bending
strain energy.  A discretized-elastica plant and a simulated
tension-sensing actuation unit provide independent synthetic ground truth.
"""

from .actuation import (
    ActuationUnitSim,
    TorqueReading,
    chirp_profile,
    measure_tension,
    tension_from_torque,
    torque_from_tension,
)
from .estimation import EstimationResult, estimate_log, write_estimates
from .jacobians import (
    FiniteDifferenceReport,
    JointShapeJacobian,
    TaskShapeJacobian,
    finite_difference_check,
    joint_shape_jacobian,
    task_shape_jacobian,
)
from .kinematics import (
    InstrumentParams,
    JointVector,
    RigidTransform,
    ShapeState,
    backbone_position,
    bending_angle_at,
    cable_lengths,
    constant_curvature_pose,
    curvature_at,
    forward_pose,
    joint_displacements,
    random_shape_state,
    wrap_angle,
)
from .plant import (
    ElasticaPlant,
    PlantConvergenceError,
    PlantEquilibrium,
    plant_equilibrium,
    plant_gradient_norm,
)
from .scenarios import (
    ExperimentSpec,
    NoiseSpec,
    ScenarioLog,
    build_scenario,
    generate_scenario,
    read_scenario,
    write_scenario,
)
from .shape_solver import (
    SolveResult,
    SolverConfig,
    objective,
    solve_constant_curvature,
    solve_shape,
    solve_stream,
)
from .statics import (
    EquilibriumReport,
    TensionVector,
    Wrench,
    articulation_tensions,
    elastic_energy,
    elastic_energy_gradient,
    equilibrium_residual,
    estimate_tip_force,
    estimate_wrench,
    tension_generalized_force,
)
from .verify import run_verification

__version__ = "0.1.0"
