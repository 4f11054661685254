"""Numerical solver for a free-boundary problem with initial phase onset.

Modules: grids, sh_spaces, symbols, elliptic, parabolic, hamilton_jacobi,
coupling, verify, plus config, io and cli for the command-line surface.
"""
__version__ = "0.1.0"
