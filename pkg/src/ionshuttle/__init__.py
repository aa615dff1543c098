"""Robust transport of two ions of different mass in a moving harmonic trap.

Trap trajectories are inverse-engineered in dynamical normal-mode coordinates,
their final excitation under a constant spring-constant error is evaluated,
and the harmonic approximation is checked against full classical dynamics.
"""

__version__ = "0.1.0"
