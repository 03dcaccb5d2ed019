"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``NAVBENCH_PURE=1`` to
force the pure-Python implementation.
"""
import os

from . import _pykernels as pure

if os.environ.get("NAVBENCH_PURE", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = pure

BACKEND = "compiled" if _impl is not pure else "python"

cloth_relax = _impl.cloth_relax
astar_grid = _impl.astar_grid
cast_rays = _impl.cast_rays
band_cost = _impl.band_cost
band_descent = _impl.band_descent
