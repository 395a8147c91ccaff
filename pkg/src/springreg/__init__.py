"""Point cloud registration by simulating a spring-damper rigid body."""
from .core import (BodyModel, DegenerateCloud, DegenerateSpectrum, EnergyReport, NonFiniteState,
                   NonPositiveSigma, Pose, ProblemInstance, RegistrationError, SingularInertia,
                   SingularInput, State, build_body_model, hat, pose_from_state, project_so3,
                   rotation_geodesic_error)
from .dynamics import (SimConfig, Termination, Trajectory, energies, initial_state, simulate,
                       state_derivative, step, total_force, total_torque)
from .horn import horn_solve, objective_value

__all__ = [
    "BodyModel", "DegenerateCloud", "DegenerateSpectrum", "EnergyReport", "NonFiniteState",
    "NonPositiveSigma", "Pose", "ProblemInstance", "RegistrationError", "SingularInertia",
    "SingularInput", "State", "build_body_model", "hat", "pose_from_state", "project_so3",
    "rotation_geodesic_error", "SimConfig", "Termination", "Trajectory", "energies",
    "initial_state", "simulate", "state_derivative", "step", "total_force", "total_torque",
    "horn_solve", "objective_value",
]
