"""Runtime monitoring of every functional the theory keeps bounded.

Each record captures, at one instant: the L1/L2/Linf norms of the density,
the L1 norm of u*ln(u) (absolute value), the entropy functional
integral(u ln u) + (tau*chi/2) * integral(|grad v|^2), the signal norms
(L2, grad L2, grad L4, Laplacian L2), and the residual of the mass balance
d/dt integral(u) = integral(f(u)) in its per-step difference form.  The
entropy and mass series are the quantities whose a-priori bounds the
simulator is meant to exhibit; check_bounds turns a recorded series into
an explicit pass/fail summary against those bounds.

The residual compares the per-interval mass difference quotient against the
source integral at the interval start (left endpoint): the implicit
reaction moves mass by exactly dt * integral(f(u_new)), so an endpoint
evaluation would cancel identically and record nothing but rounding noise,
while the left-endpoint form exposes the genuine first-order-in-dt
discretization residual.  It is meaningful when records are taken every
step (it divides by the step's dt); at coarser cadences it is only
indicative.

CSV columns are a fixed external contract; rows format floats with repr
(shortest round-trip), so identical runs produce identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

CSV_HEADER = ("t,dt,u_l1,u_l2,u_linf,u_lnu_l1,entropy,v_l2,grad_v_l2,"
              "grad_v_l4,delta_v_l2,mass_odi_residual,step_count")

_FIELDS = CSV_HEADER.split(",")


@dataclass
class DiagnosticsRecord:
    t: float
    dt: float
    u_l1: float
    u_l2: float
    u_linf: float
    u_lnu_l1: float
    entropy: float
    v_l2: float
    grad_v_l2: float
    grad_v_l4: float
    delta_v_l2: float
    mass_odi_residual: float
    step_count: int
    diverged: bool = False
    f_int: float = 0.0      # integral of f(u) at this instant; not in the CSV

    def csv_row(self) -> str:
        vals = []
        for name in _FIELDS:
            v = getattr(self, name)
            vals.append(repr(int(v)) if name == "step_count" else repr(float(v)))
        return ",".join(vals)


def record(state, opts, prev: DiagnosticsRecord | None = None) -> DiagnosticsRecord:
    """Compute all monitored functionals for one state.

    Non-finite values do not raise; the record is marked diverged instead so
    a failing run still leaves a usable trace.
    """
    grid = state.u.grid
    area = grid.cell_area
    u = state.u.data
    v = state.v.data

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        u_l1 = area * float(np.sum(np.abs(u)))
        u_l2 = math.sqrt(area * float(np.sum(u * u))) if np.isfinite(u).all() else math.nan
        u_linf = float(np.max(np.abs(u)))
        pos = u > 0
        ulnu = u[pos] * np.log(u[pos])
        u_lnu_l1 = area * float(np.sum(np.abs(ulnu)))
        ent_u = area * float(np.sum(ulnu))

        work = np.empty_like(v)
        kernels.gradient_squared(v, grid.hx, grid.hy, work)
        grad2_int = area * float(np.sum(work))
        grad4_int = area * float(np.sum(work * work))
        grad_v_l2 = math.sqrt(grad2_int) if grad2_int >= 0 else math.nan
        grad_v_l4 = grad4_int ** 0.25 if grad4_int >= 0 else math.nan
        v_l2 = math.sqrt(area * float(np.sum(v * v))) if np.isfinite(v).all() else math.nan
        kernels.laplacian(v, grid.hx * grid.hx, grid.hy * grid.hy, work)
        delta_v_l2 = math.sqrt(area * float(np.sum(work * work)))

        entropy = ent_u + 0.5 * opts.tau * opts.chi * grad2_int

        f_int = area * float(np.sum(opts.source.f(u)))
        residual = 0.0
        if prev is not None and state.dt > 0:
            residual = (u_l1 - prev.u_l1) / state.dt - prev.f_int

    rec = DiagnosticsRecord(
        t=state.t, dt=state.dt, u_l1=u_l1, u_l2=u_l2, u_linf=u_linf,
        u_lnu_l1=u_lnu_l1, entropy=entropy, v_l2=v_l2, grad_v_l2=grad_v_l2,
        grad_v_l4=grad_v_l4, delta_v_l2=delta_v_l2,
        mass_odi_residual=residual, step_count=state.step_count, f_int=f_int)
    values = [getattr(rec, name) for name in _FIELDS]
    rec.diverged = not all(math.isfinite(float(x)) for x in values)
    return rec


@dataclass
class BoundCheckSummary:
    maxima: dict
    mass_bound_ok: bool | None      # None when no mass bound was supplied
    mass_bound_limit: float | None
    caps_ok: dict
    linf_growth_rate: float
    growth_alarm: bool
    any_diverged: bool


def check_bounds(series, report=None, caps: dict | None = None,
                 mass_slack: float = 0.01, growth_window: float = 0.1,
                 growth_alarm_threshold: float = 0.1) -> BoundCheckSummary:
    """Summarize a diagnostics series against its a-priori bounds.

    Checks the running maxima of every functional, whether the recorded mass
    stayed below report.M * (1 + mass_slack), optional per-functional caps,
    and the growth rate of the density sup-norm over the trailing
    growth_window fraction of the time span (the blow-up early signal).
    """
    if not series:
        raise ValueError("check_bounds: empty series")
    finite_max = {}
    for name in _FIELDS:
        if name in ("t", "dt", "step_count"):
            continue
        vals = [float(getattr(r, name)) for r in series]
        finite_max[name] = max(vals)
    any_diverged = any(r.diverged for r in series)

    mass_ok = None
    limit = None
    if report is not None and math.isfinite(report.M):
        limit = report.M * (1.0 + mass_slack)
        mass_ok = all(r.u_l1 <= limit for r in series)

    caps_ok = {}
    for name, cap in (caps or {}).items():
        caps_ok[name] = finite_max[name] <= cap

    t0, t1 = series[0].t, series[-1].t
    t_cut = t1 - growth_window * (t1 - t0)
    window = [r for r in series if r.t >= t_cut] or [series[-1]]
    start, end = window[0].u_linf, window[-1].u_linf
    rate = (end - start) / max(abs(start), 1e-300)
    return BoundCheckSummary(
        maxima=finite_max, mass_bound_ok=mass_ok, mass_bound_limit=limit,
        caps_ok=caps_ok, linf_growth_rate=rate,
        growth_alarm=rate > growth_alarm_threshold,
        any_diverged=any_diverged)


def entropy_plateau_ok(series, tolerance: float = 0.05) -> bool:
    """True when the entropy series levels off instead of growing.

    Compares the maximum over the final half of the records against the
    maximum over the first half, allowing `tolerance` relative growth on a
    sign-robust scale (the raw ratio test misbehaves for negative maxima).
    """
    n = len(series)
    if n < 2:
        return True
    half = n // 2
    first = max(r.entropy for r in series[:half])
    last = max(r.entropy for r in series[half:])
    scale = max(abs(first), abs(last), 1e-300)
    return (last - first) <= tolerance * scale


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(r.csv_row() + "\n")
