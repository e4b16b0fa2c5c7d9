"""Non-uniform IMEX-L1 finite element solver for time-fractional PDEs/PIDEs.

Subpackages:

- ``fractional``: graded meshes, L1 kernels, Mittag-Leffler, Gronwall checks
- ``linalg``: sparse assembly and direct/iterative solves
- ``fem``: P1 spaces in 1D/2D, bilinear forms, projections, norms
- ``integrals``: nonlocal integral operator and the Merton jump model
- ``stepper``: the fully discrete scheme and trajectory production
- ``examples``/``studies``/``cli``: built-in benchmark problems and the
  convergence/property reproduction harness
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("imexl1")
except PackageNotFoundError:  # pragma: no cover - not installed
    __version__ = "0.0.0"
