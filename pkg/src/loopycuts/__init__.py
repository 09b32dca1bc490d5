"""Block-decomposition hexahedral meshing by field-coherent loop cutting."""

from ._kernels import KERNEL

__version__ = "0.1.0"
__all__ = ["KERNEL", "__version__"]
