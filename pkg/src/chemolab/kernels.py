"""Compiled stencil kernels for the hot simulation loop.

All kernels implement homogeneous Neumann boundaries by mirror ghosts: the
ghost value equals the adjacent interior value.  Boundary faces therefore
carry exactly zero flux, and every divergence-form kernel telescopes to a
zero integral.

Layout notes for throughput: interior sweeps are separated from boundary
fixups so the inner loops stay branchless and vectorizable; the upwind
selection uses positive/negative gradient parts instead of data-dependent
branches; face quantities are gathered per cell (each face gradient is
recomputed identically on both sides, so flux cancellation stays exact).

Kernels are serial and write each output element exactly once, so results
are bitwise reproducible run to run, which the diagnostics byte-determinism
contract relies on.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def laplacian(f, hx2, hy2, out):
    """5-point Laplacian with mirrored ghosts; out may not alias f."""
    ny, nx = f.shape
    for j in range(ny):
        jm = j - 1 if j > 0 else 0
        jp = j + 1 if j < ny - 1 else ny - 1
        out[j, 0] = (f[j, 1] - f[j, 0]) / hx2 \
            + (f[jp, 0] - 2.0 * f[j, 0] + f[jm, 0]) / hy2
        for i in range(1, nx - 1):
            out[j, i] = (f[j, i + 1] - 2.0 * f[j, i] + f[j, i - 1]) / hx2 \
                + (f[jp, i] - 2.0 * f[j, i] + f[jm, i]) / hy2
        out[j, nx - 1] = (f[j, nx - 2] - f[j, nx - 1]) / hx2 \
            + (f[jp, nx - 1] - 2.0 * f[j, nx - 1] + f[jm, nx - 1]) / hy2


@njit(cache=True)
def shifted_matvec(p, alpha, hx2, hy2, out):
    """out = alpha*p - laplacian(p); the SPD operator of the signal solves."""
    laplacian(p, hx2, hy2, out)
    ny, nx = p.shape
    for j in range(ny):
        for i in range(nx):
            out[j, i] = alpha * p[j, i] - out[j, i]


@njit(cache=True)
def chemo_stab(u, v, chi, hx, hy, upwind, out):
    """Chemotactic term -chi*div(u grad v) plus its stability statistics.

    Face flux F = chi * u_donor * (dv/dn); the donor is the side the face
    gradient of v points away from (branchless via gradient sign parts).
    With upwind=False the face density is the arithmetic mean instead.
    Writes the discrete -div(F) into out and returns

      (gmax, outflow_max): the largest face-gradient magnitude of v and the
      largest per-cell total advective outflow rate.

    dt * outflow_max < 1 keeps the explicit substep a convex, hence
    nonnegative, update.  The fluxes seen by the two cells sharing a face
    are the same floating-point value, so the integral telescopes exactly.
    """
    ny, nx = u.shape
    gmax = 0.0
    omax = 0.0
    if upwind:
        for j in range(ny):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < ny - 1 else ny - 1
            for i in range(nx):
                im = max(i - 1, 0)
                ip = min(i + 1, nx - 1)
                ge = (v[j, ip] - v[j, i]) / hx
                gw = (v[j, i] - v[j, im]) / hx
                gn = (v[jp, i] - v[j, i]) / hy
                gs = (v[j, i] - v[jm, i]) / hy
                fe = max(ge, 0.0) * u[j, i] + min(ge, 0.0) * u[j, ip]
                fw = max(gw, 0.0) * u[j, im] + min(gw, 0.0) * u[j, i]
                fn = max(gn, 0.0) * u[j, i] + min(gn, 0.0) * u[jp, i]
                fs = max(gs, 0.0) * u[jm, i] + min(gs, 0.0) * u[j, i]
                out[j, i] = -chi * ((fe - fw) / hx + (fn - fs) / hy)
                gmax = max(gmax, abs(ge), abs(gn))
                omax = max(omax, chi * ((max(ge, 0.0) - min(gw, 0.0)) / hx
                                        + (max(gn, 0.0) - min(gs, 0.0)) / hy))
    else:
        for j in range(ny):
            jm = j - 1 if j > 0 else 0
            jp = j + 1 if j < ny - 1 else ny - 1
            for i in range(nx):
                im = max(i - 1, 0)
                ip = min(i + 1, nx - 1)
                ge = (v[j, ip] - v[j, i]) / hx
                gw = (v[j, i] - v[j, im]) / hx
                gn = (v[jp, i] - v[j, i]) / hy
                gs = (v[j, i] - v[jm, i]) / hy
                fe = ge * 0.5 * (u[j, i] + u[j, ip])
                fw = gw * 0.5 * (u[j, im] + u[j, i])
                fn = gn * 0.5 * (u[j, i] + u[jp, i])
                fs = gs * 0.5 * (u[jm, i] + u[j, i])
                out[j, i] = -chi * ((fe - fw) / hx + (fn - fs) / hy)
                gmax = max(gmax, abs(ge), abs(gn))
                omax = max(omax, chi * ((max(ge, 0.0) - min(gw, 0.0)) / hx
                                        + (max(gn, 0.0) - min(gs, 0.0)) / hy))
    return gmax, omax


@njit(cache=True)
def advection_stability(v, chi, hx, hy):
    """(gmax, outflow_max) of chemo_stab without forming the divergence."""
    ny, nx = v.shape
    gmax = 0.0
    omax = 0.0
    for j in range(ny):
        jm = j - 1 if j > 0 else 0
        jp = j + 1 if j < ny - 1 else ny - 1
        for i in range(nx):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < nx - 1 else nx - 1
            ge = (v[j, ip] - v[j, i]) / hx
            gw = (v[j, i] - v[j, im]) / hx
            gn = (v[jp, i] - v[j, i]) / hy
            gs = (v[j, i] - v[jm, i]) / hy
            g1 = max(abs(ge), abs(gn))
            if g1 > gmax:
                gmax = g1
            o = chi * ((max(ge, 0.0) - min(gw, 0.0)) / hx
                       + (max(gn, 0.0) - min(gs, 0.0)) / hy)
            if o > omax:
                omax = o
    return gmax, omax


@njit(cache=True)
def gradient_squared(v, hx, hy, out):
    """Cellwise |grad v|^2 by central differences with mirrored ghosts."""
    ny, nx = v.shape
    for j in range(ny):
        jm = j - 1 if j > 0 else 0
        jp = j + 1 if j < ny - 1 else ny - 1
        for i in range(nx):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < nx - 1 else nx - 1
            gx = (v[j, ip] - v[j, im]) / (2.0 * hx)
            gy = (v[jp, i] - v[jm, i]) / (2.0 * hy)
            out[j, i] = gx * gx + gy * gy


@njit(cache=True)
def tridiag_factor(diag_base, off, shifts, cw, minv):
    """Factor the shifted tridiagonal systems (one per y-mode).

    System m has diagonal diag_base[i] + shifts[m] and constant off-diagonal
    ``off``.  Stores the Thomas coefficients transposed as (nx, ny) so the
    solve sweeps run contiguously over modes.
    """
    nx = diag_base.shape[0]
    ny = shifts.shape[0]
    for m in range(ny):
        b0 = diag_base[0] + shifts[m]
        cw[0, m] = off / b0
        minv[0, m] = 1.0 / b0
    for i in range(1, nx):
        for m in range(ny):
            d = (diag_base[i] + shifts[m]) - off * cw[i - 1, m]
            minv[i, m] = 1.0 / d
            cw[i, m] = off * minv[i, m]


@njit(cache=True)
def tridiag_apply(off, cw, minv, rhs_t, out_t):
    """Solve the factored systems; rhs_t and out_t are (nx, ny)."""
    nx, ny = rhs_t.shape
    for m in range(ny):
        out_t[0, m] = rhs_t[0, m] * minv[0, m]
    for i in range(1, nx):
        for m in range(ny):
            out_t[i, m] = (rhs_t[i, m] - off * out_t[i - 1, m]) * minv[i, m]
    for i in range(nx - 2, -1, -1):
        for m in range(ny):
            out_t[i, m] = out_t[i, m] - cw[i, m] * out_t[i + 1, m]


@njit(cache=True, inline="always")
def _source_f_fp(code, a, b, ex, ts, tf, s):
    """(f(s), f'(s)) sharing the transcendental evaluations."""
    if code == 0:
        return 0.0, 0.0
    if code == 1:
        if s <= 0.0:
            return 0.0, a
        if ex == 2.0:
            p = s * s
            pm = s
        else:
            pm = s ** (ex - 1.0)
            p = pm * s
        return a * s - b * p, a - b * ex * pm
    if code == 2:
        # below 1e-100 the damping term is s^(2-gamma)-small: use the exact
        # linearization (also avoids denominator underflow to zero)
        if s <= 1e-100:
            if ex == 1.0:
                return (a - b) * s, a - b
            return a * s, a
        ln = np.log1p(s)
        if ex == 1.0:
            den = ln
        elif ex == 0.5:
            den = np.sqrt(ln)
        else:
            den = ln ** ex
        q = 1.0 / (den * ln * (1.0 + s))    # single division, shared
        fval = a * s - b * s * s * ln * (1.0 + s) * q
        fp = a - b * s * (2.0 * ln * (1.0 + s) - ex * s) * q
        return fval, fp
    if code == 3:
        if s <= 1e-100:
            return (a - b * np.e) * s, a - b * np.e
        l1 = np.log1p(s / np.e)
        d = np.log1p(l1)        # ln(ln(s+e)), exact for tiny s (no 1+x round)
        w = (s + np.e) * (1.0 + l1)
        q = 1.0 / (d * d * w)               # single division, shared
        return (a * s - b * s * s * d * w * q,
                a - b * s * (2.0 * d * w - s) * q)
    # tabulated: piecewise linear, end segments extrapolate
    n = ts.shape[0]
    if s <= ts[0]:
        k = 0
    elif s >= ts[n - 2]:
        k = n - 2
    else:
        lo = 0
        hi = n - 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ts[mid] <= s:
                lo = mid
            else:
                hi = mid
        k = lo
    slope = (tf[k + 1] - tf[k]) / (ts[k + 1] - ts[k])
    return tf[k] + (s - ts[k]) * slope, slope


@njit(cache=True)
def reaction_solve(u, dt, code, a, b, ex, ts, tf, sup_f, out):
    """Cellwise implicit reaction substep: solve x = u + dt*f(x), x >= 0.

    Bracketed Newton with bisection fallback on [0, hi].  g(0) <= 0 because
    u >= 0 and f(0) >= 0, and g(hi) > 0 for hi = u + dt*sup(f)^+ + 1, so a
    nonnegative root always exists; dt * local Lipschitz < 1 makes it the
    relevant one.  Stray negative inputs (there should be none) resolve to
    x = 0 since the bracket never opens below zero.

    Acceptance uses the fixed-point contraction bound: when the map
    x -> u + dt*f(x) has |phi'| = |dt f'| < 1/2 at the iterate, the distance
    to the root is at most |step| * |phi'| / (1 - |phi'|); otherwise a plain
    small-step criterion applies inside the shrinking bracket.
    """
    ny, nx = u.shape
    sup_pos = max(sup_f, 0.0)
    bounded = np.isfinite(sup_f)
    for j in range(ny):
        for i in range(nx):
            un = u[j, i]
            lo = 0.0
            if bounded:
                hi = un + dt * sup_pos + 1.0
            else:
                hi = un + 1.0
                for _ in range(200):
                    fh, _fp = _source_f_fp(code, a, b, ex, ts, tf, hi)
                    if hi - un - dt * fh >= 0.0:
                        break
                    hi *= 2.0
            x = un
            for _ in range(160):
                fx, fp = _source_f_fp(code, a, b, ex, ts, tf, x)
                g = x - un - dt * fx
                if g <= 0.0:
                    lo = x
                else:
                    hi = x
                gp = 1.0 - dt * fp
                if gp > 0.0:
                    xn = x - g / gp
                    if not (lo <= xn <= hi):
                        xn = 0.5 * (lo + hi)
                else:
                    xn = 0.5 * (lo + hi)
                step = abs(xn - x)
                tol = 1e-13 * (1.0 + abs(xn))
                phip = abs(1.0 - gp)
                if phip < 0.5:
                    if step * phip <= tol * (1.0 - phip):
                        x = xn
                        break
                elif step <= tol:
                    x = xn
                    break
                x = xn
            out[j, i] = x


@njit(cache=True)
def face_gradient_energy(w, hx, hy, cell_area):
    """Discrete Dirichlet energy sum over interior faces of (dw/dn)^2 * area.

    Boundary faces carry zero gradient (mirror ghosts) and are skipped.
    """
    ny, nx = w.shape
    acc = 0.0
    for j in range(ny):
        for i in range(nx - 1):
            g = (w[j, i + 1] - w[j, i]) / hx
            acc += g * g
    for j in range(ny - 1):
        for i in range(nx):
            g = (w[j + 1, i] - w[j, i]) / hy
            acc += g * g
    return acc * cell_area
