"""Hamiltonian stationary and self-similar Lagrangian surfaces in C^2.

Thin wrapper over the compiled ``_lagflow`` module: every entry point takes a
family spec string (``"clifford:a=-0.5"``, ``"phi:a=0.25,delta=0.9"``,
``"psi:a=-0.5,m=1,n=2"``, ...) and returns a plain dict decoded from the
module's JSON output.
"""

import json as _json

from ._lagflow import __version__  # noqa: F401
from . import _lagflow as _core


def verify(spec, grid=64, mode="analytic"):
    """Residual sweep over the fundamental cell; report with per-check pass flags."""
    return _json.loads(_core.verify(spec, grid, mode))


def area(spec, grid=256):
    """Trapezoid-rule area on the fundamental cell, with closed form when known."""
    return _json.loads(_core.area(spec, grid))


def willmore(spec, grid=256):
    """Trapezoid-rule bending energy on the fundamental cell."""
    return _json.loads(_core.willmore(spec, grid))


def classify(spec):
    """Profile-curve branch, recovered parameters and round-trip congruence residual."""
    return _json.loads(_core.classify(spec))


def flow(spec, grid=48, dt=1e-4, t_end=0.1):
    """Discrete mean curvature flow; summary plus (time, area, max_H, ss_error) samples."""
    return _json.loads(_core.flow(spec, grid, dt, t_end))


def sample(spec, grid=32):
    """Point cloud on a grid over the fundamental cell, columns s,t,x1,y1,x2,y2."""
    return _json.loads(_core.sample(spec, grid))


__all__ = ["verify", "area", "willmore", "classify", "flow", "sample", "__version__"]
