"""Soft actor-critic with hybrid quantum-classical policies, simulated exactly."""

__version__ = "0.1.0"
