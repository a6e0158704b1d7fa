"""Discrete operators: stencils, conservation, upwinding, convergence order."""

import math

import numpy as np
import pytest

from chemolab import (Grid, PositivityError, ScalarField, chemotactic_divergence,
                      constant_field, field_from_function, gradient_squared,
                      integrate, laplacian, norm)
from chemolab.operators import face_gradient_norm


def dense_chemo_oracle(u, v, chi):
    """Independent reassembly of the upwind face-flux divergence by loops."""
    g = u.grid
    ny, nx = g.shape()
    hx, hy = g.hx, g.hy
    fx = np.zeros((ny, nx + 1))
    fy = np.zeros((ny + 1, nx))
    for j in range(ny):
        for i in range(nx - 1):
            grad = (v.data[j, i + 1] - v.data[j, i]) / hx
            donor = u.data[j, i] if grad > 0 else u.data[j, i + 1]
            fx[j, i + 1] = chi * donor * grad
    for j in range(ny - 1):
        for i in range(nx):
            grad = (v.data[j + 1, i] - v.data[j, i]) / hy
            donor = u.data[j, i] if grad > 0 else u.data[j + 1, i]
            fy[j + 1, i] = chi * donor * grad
    out = np.zeros((ny, nx))
    for j in range(ny):
        for i in range(nx):
            out[j, i] = -((fx[j, i + 1] - fx[j, i]) / hx
                          + (fy[j + 1, i] - fy[j, i]) / hy)
    return out


def test_laplacian_constant_zero():
    g = Grid(16, 16)
    out = laplacian(constant_field(g, 3.7))
    assert np.abs(out.data).max() == 0.0


def test_laplacian_cosine_second_order():
    # no-flux eigenfunction: errors shrink 4x per mesh doubling
    lx = 2.0
    errs = []
    for n in (32, 64):
        g = Grid(n, 8, lx, 1.0)
        f = field_from_function(g, lambda x, y: np.cos(np.pi * x / lx))
        lap = laplacian(f)
        exact = -(np.pi / lx) ** 2 * f.data
        errs.append(np.abs(lap.data - exact).max())
    ratio = errs[0] / errs[1]
    assert 3.7 <= ratio <= 4.3


def test_laplacian_integral_zero():
    g = Grid(24, 16, 1.5, 1.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        f = ScalarField(g, rng.standard_normal(g.shape()))
        out = laplacian(f)
        scale = max(norm(out, 1), 1.0)
        assert abs(integrate(out)) <= 1e-12 * scale


def test_chemo_constant_v_zero():
    g = Grid(16, 16)
    rng = np.random.default_rng(1)
    u = ScalarField(g, rng.uniform(0, 2, g.shape()))
    out = chemotactic_divergence(u, constant_field(g, 2.0), 1.5)
    assert np.abs(out.data).max() == 0.0


def test_chemo_constant_u_matches_laplacian():
    # with uniform density the upwind flux reduces to c*chi*Lap(v)
    g = Grid(20, 20)
    rng = np.random.default_rng(2)
    v = ScalarField(g, rng.standard_normal(g.shape()))
    c, chi = 1.7, 0.9
    out = chemotactic_divergence(constant_field(g, c), v, chi)
    expected = -c * chi * laplacian(v).data
    assert np.abs(out.data - expected).max() <= 1e-12 * max(1.0, np.abs(expected).max())
    assert abs(integrate(out)) <= 1e-12


def test_chemo_dense_oracle_single_bump():
    g = Grid(32, 32)
    v = field_from_function(
        g, lambda x, y: np.exp(-((x - 0.6) ** 2 + (y - 0.4) ** 2) / 0.02))
    u = constant_field(g, 1.0)
    chi = 1.3
    out = chemotactic_divergence(u, v, chi)
    oracle = dense_chemo_oracle(u, v, chi)
    assert np.abs(out.data - oracle).max() <= 1e-13 * max(1.0, np.abs(oracle).max())


def test_chemo_dense_oracle_random_fields():
    g = Grid(16, 24, 2.0, 1.0)
    rng = np.random.default_rng(3)
    for _ in range(5):
        u = ScalarField(g, rng.uniform(0, 3, g.shape()))
        v = ScalarField(g, rng.standard_normal(g.shape()))
        out = chemotactic_divergence(u, v, 0.8)
        oracle = dense_chemo_oracle(u, v, 0.8)
        scale = max(1.0, np.abs(oracle).max())
        assert np.abs(out.data - oracle).max() <= 1e-12 * scale


def test_chemo_conservation_random():
    g = Grid(32, 32)
    rng = np.random.default_rng(4)
    for _ in range(10):
        u = ScalarField(g, rng.uniform(0, 5, g.shape()))
        v = ScalarField(g, rng.standard_normal(g.shape()) * 3)
        out = chemotactic_divergence(u, v, 2.0)
        scale = max(norm(out, 1), 1.0)
        assert abs(integrate(out)) <= 1e-12 * scale


def test_chemo_upwind_empty_cell_sends_nothing():
    # a cell with zero density cannot lose mass through advection
    g = Grid(8, 8)
    rng = np.random.default_rng(5)
    for _ in range(20):
        u = rng.uniform(0, 2, g.shape())
        u[4, 4] = 0.0
        v = rng.standard_normal(g.shape())
        out = chemotactic_divergence(ScalarField(g, u), ScalarField(g, v), 1.0)
        assert out.data[4, 4] >= 0.0   # inflow only


def test_chemo_rejects_negative_u():
    g = Grid(8, 8)
    d = np.ones(g.shape())
    d[1, 1] = -0.5
    with pytest.raises(PositivityError):
        chemotactic_divergence(ScalarField(g, d), constant_field(g, 0.0), 1.0)


def test_chemo_central_scheme_available():
    g = Grid(16, 16)
    rng = np.random.default_rng(6)
    u = ScalarField(g, rng.uniform(0, 2, g.shape()))
    v = ScalarField(g, rng.standard_normal(g.shape()))
    up = chemotactic_divergence(u, v, 1.0, scheme="upwind")
    ce = chemotactic_divergence(u, v, 1.0, scheme="central")
    assert abs(integrate(ce)) <= 1e-12
    assert np.abs(up.data - ce.data).max() > 0.0
    with pytest.raises(ValueError):
        chemotactic_divergence(u, v, 1.0, scheme="quick")


def test_gradient_squared_constant():
    g = Grid(16, 16)
    out = gradient_squared(constant_field(g, 4.2))
    assert np.abs(out.data).max() == 0.0


def test_gradient_squared_linear_interior():
    g = Grid(16, 16)
    v = field_from_function(g, lambda x, y: x)
    out = gradient_squared(v)
    assert out.data[:, 1:-1] == pytest.approx(np.ones((16, 14)), rel=1e-12)


def test_gradient_squared_nonnegative():
    g = Grid(12, 12)
    rng = np.random.default_rng(7)
    out = gradient_squared(ScalarField(g, rng.standard_normal(g.shape())))
    assert out.data.min() >= 0.0


def test_face_gradient_norm_linear():
    # interior faces of w = x all carry gradient 1
    g = Grid(32, 32)
    w = field_from_function(g, lambda x, y: x)
    expected = math.sqrt(g.area * (g.nx - 1) / g.nx)
    assert face_gradient_norm(w) == pytest.approx(expected, rel=1e-12)
