"""Numerics for ring blowup in the 3D parabolic-elliptic Keller-Segel system."""

__version__ = "0.1.0"
