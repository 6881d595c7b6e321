"""Differentiable multiphysics simulation with a differentiable rasterizer.

Semi-implicit Euler dynamics for rigid bodies, tetrahedral FEM solids, thin
shells, and pendula, with hand-written analytic adjoints throughout, coupled
to a soft rasterizer so scalar image losses yield gradients with respect to
physical parameters, initial conditions, and controller weights.
"""

__version__ = "1.0.0"

from .engine import ConfigurationError, backward, grad_check, rollout
from .estimation import (Adam, LossSpec, OptimizerConfig, estimate,
                         frame_loss, sweep_landscape)
from .scene import (Camera, FemBody, GradBuffer, Light, Material, ModelParams,
                    PendulumBody, RasterSettings, RigidBody, Scene, ShellBody)
from .dynamics.contact import ContactPlane
from .dynamics.particles import SimulationError

__all__ = [
    "Adam", "Camera", "ConfigurationError", "ContactPlane", "FemBody",
    "GradBuffer", "Light", "LossSpec", "Material", "ModelParams",
    "OptimizerConfig", "PendulumBody", "RasterSettings", "RigidBody",
    "Scene", "ShellBody", "SimulationError", "backward", "estimate",
    "frame_loss", "grad_check", "rollout", "sweep_landscape",
]
