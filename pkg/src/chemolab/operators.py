"""Discrete spatial operators on scalar fields.

Conventions (shared with the compiled kernels):

* mirror ghosts (even reflection of the nearest interior cell) implement the
  no-flux boundary to second order for cell-centered grids;
* the chemotaxis operator is in conservative face-flux form, so its integral
  telescopes to zero exactly, and with upwind donor cells a cell holding zero
  density sends zero flux out through every face;
* the Laplacian is matrix-free only; the dense assembly used to cross-check
  the flux code lives in the test suite.

Operators are read-only on their inputs and return fresh fields.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import PositivityError
from .fields import ScalarField, _require_finite


def laplacian(f: ScalarField) -> ScalarField:
    """Second-order 5-point Laplacian with homogeneous Neumann boundary."""
    _require_finite(f, "laplacian")
    g = f.grid
    out = np.empty_like(f.data)
    kernels.laplacian(f.data, g.hx * g.hx, g.hy * g.hy, out)
    return ScalarField(g, out)


def chemotactic_divergence(u: ScalarField, v: ScalarField, chi: float,
                           scheme: str = "upwind") -> ScalarField:
    """The term -chi * div(u grad v) in face-flux form.

    ``scheme`` selects the face value of u: "upwind" (donor cell, positivity
    preserving under the advective step restriction) or "central"
    (arithmetic mean, second order but no positivity guarantee).
    """
    _require_finite(u, "chemotactic_divergence")
    _require_finite(v, "chemotactic_divergence")
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    if np.any(u.data < 0):
        raise PositivityError("chemotactic_divergence: u has negative entries")
    if scheme not in ("upwind", "central"):
        raise ValueError(f"unknown advection scheme {scheme!r}")
    g = u.grid
    out = np.empty_like(u.data)
    kernels.chemo_stab(u.data, v.data, float(chi), g.hx, g.hy,
                       scheme == "upwind", out)
    return ScalarField(g, out)


def gradient_squared(v: ScalarField) -> ScalarField:
    """Cellwise |grad v|^2 from central differences with mirrored ghosts."""
    _require_finite(v, "gradient_squared")
    g = v.grid
    out = np.empty_like(v.data)
    kernels.gradient_squared(v.data, g.hx, g.hy, out)
    return ScalarField(g, out)


def face_gradient_norm(w: ScalarField) -> float:
    """Discrete L2 norm of grad w built from interior face differences.

    This is the gradient norm the aggregation-threshold estimator uses, kept
    consistent with the flux stencils above.
    """
    _require_finite(w, "face_gradient_norm")
    g = w.grid
    return float(np.sqrt(kernels.face_gradient_energy(w.data, g.hx, g.hy,
                                                      g.cell_area)))


def advection_stability(v: ScalarField, chi: float):
    """(max face gradient of v, max per-cell advective outflow rate)."""
    g = v.grid
    return kernels.advection_stability(v.data, float(chi), g.hx, g.hy)
