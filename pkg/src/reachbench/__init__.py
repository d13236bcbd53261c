"""Kinematic robot-arm reaching workbench: environment, actor-critic agents,
curriculum scheduling, a networked environment service and a top-view
vision pipeline."""
__version__ = "0.1.0"
