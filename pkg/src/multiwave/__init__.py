"""Wave-equation reconstruction for multiwave tomography on a square cavity.

Modules
-------
fields       grids, phantoms, speeds and image-space norms
boundary     perimeter ordering, measured sets and boundary traces
wave         leapfrog forward and adjoint solvers
measurement  the measurement operator, its adjoint and data perturbations
landweber    Landweber iteration and its spectral step-size theory
atr          averaged time reversal as a Neumann series
spectral     dense assembly and eigen-analysis on small grids
experiments  named experiment configurations and the run pipeline
"""

__version__ = "0.1.0"
