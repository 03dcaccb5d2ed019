"""Off-road navigation benchmark: LiDAR and monocular perception pipelines in a deterministic simulator."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
