"""Kernel selection: compiled extension if available, pure Python otherwise."""

try:
    from ._kernels import comet_rhs, increment_potential, mcgehee_rhs_circular
    COMPILED = True
except ImportError:  # extension not built
    from ._kernels_py import comet_rhs, increment_potential, mcgehee_rhs_circular
    COMPILED = False

__all__ = ["comet_rhs", "increment_potential", "mcgehee_rhs_circular", "COMPILED"]
