"""Scattering in two-dimensional metallic waveguide circuits."""

import os

# numba's TBB layer is often too old on stock systems; prefer OpenMP quietly
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
