"""Chain control sets of control-affine systems on R^n and its Poincare sphere."""

__version__ = "0.1.0"
