"""Random tick problems shared by the controller and acceptance tests."""

from __future__ import annotations

import numpy as np

from ehcmm.controller import Sphere, assemble, min_obstacle_distance
from ehcmm.kinematics import fk_end_effector, random_configuration
from ehcmm.se3 import RigidTransform, exp_so3


def random_target(model, cfg, rng, spread=(0.05, 2.0)):
    ee = fk_end_effector(model, cfg)
    return RigidTransform(ee.rotation @ exp_so3(rng.normal(size=3) * 0.5),
                          ee.translation + rng.normal(size=3) * rng.uniform(*spread))


def clear_obstacles(model, cfg, params, rng, n=3, scale=0.3):
    """n spheres near the tool, rejection-sampled to sit at least S off the robot."""
    ee = fk_end_effector(model, cfg).translation
    out = []
    while len(out) < n:
        o = Sphere(ee + rng.normal(size=3) * scale, rng.uniform(0.05, 0.2))
        if min_obstacle_distance(model, cfg, [o], params.samples_per_link) >= params.safety_distance:
            out.append(o)
    return out


def random_assembled_problem(model, params, rng, n_obstacles=3):
    cfg = random_configuration(model, rng)
    target = random_target(model, cfg, rng)
    obs = clear_obstacles(model, cfg, params, rng, n_obstacles)
    wb = 10 ** rng.uniform(-3, 1)
    return cfg, assemble(model, cfg, target, None, obs, params, w_base=wb)
