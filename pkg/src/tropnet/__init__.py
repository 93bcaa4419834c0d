"""tropnet: tropical-algebra traffic engineering toolkit.

Subpackages cover max-plus metro-line analytics, min-plus network calculus
for road traffic, generic monotone dynamic-programming simulation, and a
piecewise-linear car-following model, plus a scenario-driven CLI.
"""

__version__ = "0.1.0"
