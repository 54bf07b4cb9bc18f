"""Simulation and control toolkit for a pneumatic soft humanoid hand
with an actuated palm: PCC kinematics, pneumatic valve dynamics, a
corotational FEM cross-check, grasp scheduling/evaluation, and a
session-hosting service."""

__version__ = "0.1.0"

from .errors import (ConvergenceError, SafetyLimitError, SoftHandError,
                     ValidationError)
from .hand import (DEFAULT_CONFIG, FingerRole, HandDescription,
                   PressureState, build_hand)

__all__ = [
    "ConvergenceError", "SafetyLimitError", "SoftHandError",
    "ValidationError", "DEFAULT_CONFIG", "FingerRole", "HandDescription",
    "PressureState", "build_hand", "__version__",
]
