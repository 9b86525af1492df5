"""Controllable generation of articulated 3D objects as box abstractions."""

__version__ = "0.1.0"
