"""Verified steering safety filters for the kinematic bicycle model."""

__version__ = "0.1.0"
