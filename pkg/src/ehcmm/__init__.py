"""Embodied holistic control for mobile manipulators.

Whole-body velocity QP with a reachability-derived base weight, monitoring
servo targets, a kinematic simulator and the experiment suites.
"""

from .controller import Controller, ControllerParams, Sphere, assemble, solve
from .errors import EhcError, InvalidInputError, SchemaError, UnusableMapError
from .kinematics import Configuration, RobotModel, default_model
from .reachability import ReachabilityMap, build_map, load_map, save_map
from .se3 import RigidTransform, Twist
from .simulator import NoiseModel, Scene

__version__ = "0.1.0"
