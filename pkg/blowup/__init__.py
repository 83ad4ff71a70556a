"""Hopf points and the blow up of cycles: planar Lotka-Volterra and harmonic balance."""

__version__ = "1.0.0"
