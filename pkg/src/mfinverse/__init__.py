"""Multi-fidelity inverse design toolkit.

Trains a low-fidelity surrogate of a scalar performance summary, uses it to
shrink optimization bounds before search and to gate expensive high-fidelity
evaluations during search. Ships two demo problems: scalar field
reconstruction on a 2D diffusion domain and B-spline airfoil inverse design.
"""

__version__ = "0.1.0"
