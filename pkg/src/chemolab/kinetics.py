"""Kinetic source terms and the boundedness classifier.

A source f(u) added to the density equation competes with chemotactic
aggregation.  Two scalars summarize the competition:

* ``mu``: the liminf of -f(s) * ln(s) / s^2 as s grows, the damping strength
  measured against the log-weighted quadratic scale.  mu = inf for logistic
  and stronger damping and for mildly sub-logistic families; finite positive
  mu marks the delicate regimes.
* ``M``: an a-priori bound on the total mass, initial mass plus
  |Omega| * inf_{eta>0} sup_s {f(s) + eta*s} / eta.

The classifier combines them with the aggregation strength chi and the
interpolation constant c_gn into the strict inequality

    (chi - mu)^+ * M < 1 / (2 * c_gn^4)

and names the regime: B1 (mu infinite), B2 (finite mu >= chi), B3 (finite
mu < chi with the inequality satisfied), or NotCovered.  For B2/B3 it also
reports the margin epsilon0 = 0.5 * min(mu, 1/(2*M*c_gn^4) - (chi-mu)^+).

Built-in families have known mu limits which are returned in closed form
(a liminf at infinity is not reachable from finite samples); the numeric
tail estimator remains available for tabulated sources and cross-checks,
and classification of tabulated sources uses its conservative lower end.

Suprema are located by a coarse geometric scan followed by golden-section
refinement in log coordinates; the scan makes no silent unimodality
assumption.  All operations are pure functions, safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EstimationFailureError, UnboundedSourceError

HUGE_CAP = 1e12

_FAMILIES = ("zero", "logistic", "sublog", "subloglog", "tabulated")


class SourceSpec:
    """A parameterized kinetic source f with f(0) >= 0.

    Families (config-file spellings in parentheses):

    * zero ("zero"): f = 0, the minimal system with no kinetics.
    * logistic ("logistic a b theta"): f(s) = a*s - b*s^theta, b > 0,
      theta >= 2.  theta in (1, 2) is constructible but has mu = 0, so the
      boundedness condition never applies to it.
    * sublog ("sublog a b gamma"): f(s) = a*s - b*s^2 / ln(s+1)^gamma,
      b > 0, gamma in (0, 1].  gamma < 1 gives mu = inf; gamma = 1 gives
      mu = b.
    * subloglog ("subloglog a b"): f(s) = a*s - b*s^2 / ln(ln(s+e)),
      b > 0, mu = inf.
    * tabulated ("tabulated <path>"): piecewise-linear interpolation of
      (s, f(s)) breakpoints with strictly increasing s, extrapolated
      linearly beyond both ends.
    """

    def __init__(self, family, a=0.0, b=0.0, exponent=0.0,
                 table_s=None, table_f=None, table_path=None):
        if family not in _FAMILIES:
            raise ValueError(f"unknown source family {family!r}")
        self.family = family
        self.a = float(a)
        self.b = float(b)
        self.exponent = float(exponent)
        self.table_path = table_path
        if family in ("logistic", "sublog", "subloglog"):
            if not self.b > 0:
                raise ValueError(f"{family}: b must be positive, got {self.b}")
        if family == "logistic" and not self.exponent > 1:
            raise ValueError(f"logistic: theta must exceed 1, got {self.exponent}")
        if family == "sublog" and not (0 < self.exponent <= 1):
            raise ValueError(f"sublog: gamma must lie in (0, 1], got {self.exponent}")
        if family == "tabulated":
            s = np.asarray(table_s, dtype=np.float64)
            f = np.asarray(table_f, dtype=np.float64)
            if s.ndim != 1 or s.shape != f.shape or s.size < 2:
                raise ValueError("tabulated: need matching 1-D s and f arrays, >= 2 points")
            if not np.all(np.diff(s) > 0):
                raise ValueError("tabulated: breakpoints must be strictly increasing")
            if s[0] < 0:
                raise ValueError("tabulated: breakpoints must be nonnegative")
            self.table_s = s
            self.table_f = f
        else:
            self.table_s = None
            self.table_f = None
        self._sup_f = None
        f0 = float(self.f(np.zeros(1))[0])
        if f0 < 0:
            raise ValueError(f"source must satisfy f(0) >= 0, got f(0) = {f0}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def logistic(cls, a, b, theta=2.0):
        return cls("logistic", a=a, b=b, exponent=theta)

    @classmethod
    def sublog(cls, a, b, gamma):
        return cls("sublog", a=a, b=b, exponent=gamma)

    @classmethod
    def subloglog(cls, a, b):
        return cls("subloglog", a=a, b=b)

    @classmethod
    def tabulated(cls, s, f, path=None):
        return cls("tabulated", table_s=s, table_f=f, table_path=path)

    @classmethod
    def tabulated_from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (s, f)")
        return cls.tabulated(data[:, 0], data[:, 1], path=str(path))

    def __repr__(self):
        return f"SourceSpec({format_source_spec(self)!r})"

    # -- evaluation --------------------------------------------------------

    def f(self, s):
        """Vectorized f(s) for s >= 0 (not range-checked; see eval_f)."""
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        if self.family == "zero":
            return np.zeros_like(s)
        if self.family == "logistic":
            return self.a * s - self.b * np.power(s, self.exponent)
        if self.family == "sublog":
            # below 1e-100 the damping linearizes (s^2/ln(1+s)^g ~ s^(2-g));
            # the cut also avoids denominator underflow for tiny s
            out = self.a * s
            if self.exponent == 1.0:
                tiny = (s > 0) & (s <= 1e-100)
                out[tiny] -= self.b * s[tiny]
            pos = s > 1e-100
            sp = s[pos]
            denom = np.log1p(sp) ** self.exponent
            out[pos] -= self.b * sp * sp / denom
            return out
        if self.family == "subloglog":
            out = (self.a - self.b * math.e) * s
            pos = s > 1e-100
            sp = s[pos]
            denom = np.log1p(np.log1p(sp / math.e))
            out[pos] = self.a * sp - self.b * sp * sp / denom
            return out
        # tabulated, linear extrapolation from the end segments
        xs, ys = self.table_s, self.table_f
        idx = np.clip(np.searchsorted(xs, s, side="right") - 1, 0, xs.size - 2)
        x0, x1 = xs[idx], xs[idx + 1]
        y0, y1 = ys[idx], ys[idx + 1]
        return y0 + (s - x0) * (y1 - y0) / (x1 - x0)

    def f_prime(self, s):
        """Vectorized one-sided derivative of f (for the implicit reaction solve)."""
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        if self.family == "zero":
            return np.zeros_like(s)
        if self.family == "logistic":
            th = self.exponent
            return self.a - self.b * th * np.power(s, th - 1.0)
        if self.family == "sublog":
            g = self.exponent
            out = np.full_like(s, self.a - (self.b if g == 1.0 else 0.0))
            pos = s > 1e-100
            sp = s[pos]
            ln = np.log1p(sp)
            out[pos] = self.a - self.b * sp * (2.0 * ln - g * sp / (1.0 + sp)) \
                / ln ** (g + 1.0)
            if g != 1.0:
                out[(s >= 0) & ~pos] = self.a
            return out
        if self.family == "subloglog":
            out = np.full_like(s, self.a - self.b * math.e)
            pos = s > 1e-100
            sp = s[pos]
            inner = 1.0 + np.log1p(sp / math.e)   # ln(s + e)
            d = np.log(inner)
            dprime = 1.0 / ((sp + math.e) * inner)
            out[pos] = self.a - self.b * sp * (2.0 * d - sp * dprime) / (d * d)
            return out
        xs, ys = self.table_s, self.table_f
        idx = np.clip(np.searchsorted(xs, s, side="right") - 1, 0, xs.size - 2)
        return (ys[idx + 1] - ys[idx]) / (xs[idx + 1] - xs[idx])

    # -- analytic facts ----------------------------------------------------

    @property
    def family_code(self) -> int:
        """Integer family tag for the compiled reaction kernel."""
        return _FAMILIES.index(self.family)

    def kernel_args(self):
        """(code, a, b, exponent, table_s, table_f) for compiled kernels."""
        empty = np.empty(0)
        ts = self.table_s if self.table_s is not None else empty
        tf = self.table_f if self.table_f is not None else empty
        return self.family_code, self.a, self.b, self.exponent, ts, tf

    @property
    def closed_form_mu(self):
        """Known liminf value, or None when only numeric estimation applies."""
        if self.family == "zero":
            return 0.0
        if self.family == "logistic":
            return math.inf if self.exponent >= 2.0 else 0.0
        if self.family == "sublog":
            return self.b if self.exponent == 1.0 else math.inf
        if self.family == "subloglog":
            return math.inf
        return None

    @property
    def sup_f(self):
        """sup_{s>0} f(s); may be +inf (cached)."""
        if self._sup_f is None:
            if self.family == "zero":
                self._sup_f = 0.0
            elif self.family == "tabulated":
                end_slope = float(self.f_prime(np.array([self.table_s[-1] + 1.0]))[0])
                if end_slope > 0:
                    self._sup_f = math.inf
                else:
                    cand = [float(self.f(np.zeros(1))[0])] + list(self.table_f)
                    self._sup_f = float(max(cand))
            elif self.a <= 0:
                self._sup_f = float(self.f(np.zeros(1))[0])
            else:
                val, _ = _sup_f_plus_linear(self, 0.0, allow_unbounded=True)
                self._sup_f = val
        return self._sup_f


def eval_f(spec: SourceSpec, s):
    """f(s) with the s >= 0 domain enforced; scalar in, scalar out."""
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError(f"eval_f: s must be nonnegative, got {s}")
    out = spec.f(arr)
    if np.isscalar(s) or arr.ndim == 0:
        return float(out[0])
    return out


# -- golden-section refinement in log coordinates ---------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_log(fn, lo, hi, rel_tol, minimize=False):
    """Extremize fn over [lo, hi] (0 < lo < hi) working on the log axis.

    Returns (argext, value).  rel_tol bounds the final log-interval width,
    i.e. the relative uncertainty of the abscissa.
    """
    sign = 1.0 if minimize else -1.0
    a, b = math.log(lo), math.log(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = sign * fn(math.exp(c))
    fd = sign * fn(math.exp(d))
    while (b - a) > rel_tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = sign * fn(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = sign * fn(math.exp(d))
    x = math.exp(0.5 * (a + b))
    return x, fn(x)


def _sup_f_plus_linear(spec: SourceSpec, eta: float, huge_cap: float = HUGE_CAP,
                       allow_unbounded: bool = False):
    """sup over s > 0 of f(s) + eta*s and its location.

    Brackets the supremum by scanning for a sign change of f(s) + eta*s
    (beyond the maximum the sub-quadratic tail is negative), then refines
    over a dense geometric grid plus golden-section polish.  Without a sign
    change below huge_cap the supremum is treated as infinite.
    """
    def phi(s):
        return float(spec.f(np.asarray([s]))[0]) + eta * s

    f0 = float(spec.f(np.zeros(1))[0])
    s_hi = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        while s_hi <= huge_cap:
            val = phi(s_hi)
            if not math.isfinite(val) or val < 0.0:
                break
            s_hi *= 4.0
        else:
            if allow_unbounded:
                return math.inf, math.inf
            raise UnboundedSourceError(
                f"sup{{f(s) + {eta:g}*s}} shows no decay up to s = {huge_cap:g}")
        lo = min(1e-16, s_hi * 1e-16)
        grid = np.geomspace(lo, s_hi, 800)
        vals = spec.f(grid) + eta * grid
        vals[~np.isfinite(vals)] = -math.inf
        k = int(np.argmax(vals))
        blo = grid[k - 1] if k > 0 else lo * 0.1
        bhi = grid[k + 1] if k < grid.size - 1 else s_hi
        s_star, best = _golden_log(phi, blo, bhi, rel_tol=1e-10)
    if f0 >= best:
        return f0, 0.0
    return best, s_star


# -- mu estimation -----------------------------------------------------------

@dataclass
class MuEstimate:
    value: float        # math.inf allowed
    trend: str          # "increasing" | "decreasing" | "plateau"
    exact: bool         # True when a closed form was used for the value

    def __str__(self):
        v = "inf" if math.isinf(self.value) else f"{self.value:.12g}"
        qual = {"increasing": " (tail rising, read as >= estimate)",
                "decreasing": " (tail falling)",
                "plateau": ""}[self.trend]
        return f"{v}{'' if self.exact else qual}"


def estimate_mu(spec: SourceSpec, s_min: float = 10.0, s_max: float = 1e12,
                points_per_decade: int = 16, huge_cap: float = HUGE_CAP,
                closed_form: bool = True) -> MuEstimate:
    """Estimate mu = liminf_{s->inf} of -f(s) * ln(s) / s^2.

    Evaluates g(s) = -f(s) ln(s) / s^2 on a geometric grid; the estimate is
    the minimum of g over the last two decades (a conservative stand-in for
    the liminf), and the trend labels whether the tail is still rising,
    falling, or flat across the final decade.  g exceeding huge_cap across
    the final decade is reported as +inf.  With closed_form=True (default)
    the value is replaced by the known limit for built-in families; the
    trend stays numeric.
    """
    if not s_max >= 1e6 * s_min:
        raise ValueError("estimate_mu: need s_max >= 1e6 * s_min")
    if points_per_decade < 8:
        raise ValueError("estimate_mu: need points_per_decade >= 8")
    decades = math.log10(s_max / s_min)
    n = max(int(round(decades * points_per_decade)) + 1, 16)
    s = np.geomspace(s_min, s_max, n)
    with np.errstate(over="ignore", invalid="ignore"):
        g = -spec.f(s) * np.log(s) / (s * s)
    tail2 = s >= s_max / 100.0
    tail1 = s >= s_max / 10.0
    if not np.all(np.isfinite(g[tail2])):
        raise EstimationFailureError(
            "estimate_mu: non-finite tail values of -f(s) ln(s)/s^2")
    value = float(np.min(g[tail2]))
    if float(np.min(g[tail1])) > huge_cap:
        value = math.inf
    gt = g[tail1]
    third = max(gt.size // 3, 1)
    m1 = float(np.mean(gt[:third]))
    m2 = float(np.mean(gt[-third:]))
    scale = max(abs(value), abs(m1), 1e-300)
    rel = (m2 - m1) / scale
    if rel > 0.01:
        trend = "increasing"
    elif rel < -0.01:
        trend = "decreasing"
    else:
        trend = "plateau"
    if closed_form and spec.closed_form_mu is not None:
        return MuEstimate(spec.closed_form_mu, trend, True)
    return MuEstimate(value, trend, False)


# -- mass bound --------------------------------------------------------------

def compute_M_eta(spec: SourceSpec, eta: float, huge_cap: float = HUGE_CAP) -> float:
    """sup over s > 0 of f(s) + eta*s (finite or UnboundedSourceError)."""
    if not eta > 0:
        raise ValueError(f"compute_M_eta: eta must be positive, got {eta}")
    val, _ = _sup_f_plus_linear(spec, float(eta), huge_cap=huge_cap)
    return val


def optimal_eta(spec: SourceSpec, eta_lo: float = 1e-6, eta_hi: float = 1e6,
                rel_tol: float = 1e-8):
    """Minimize M_eta / eta over [eta_lo, eta_hi].

    Returns (eta_star, M_eta_star, ratio_star).  M_eta is a supremum of
    functions affine in eta, hence convex, so M_eta/eta is quasiconvex and
    a scan plus golden-section refinement on the log axis is reliable.
    """
    def ratio(eta):
        return compute_M_eta(spec, eta) / eta

    grid = np.geomspace(eta_lo, eta_hi, 61)
    vals = np.array([ratio(e) for e in grid])
    k = int(np.argmin(vals))
    blo = grid[k - 1] if k > 0 else eta_lo
    bhi = grid[k + 1] if k < grid.size - 1 else eta_hi
    eta_star, r_star = _golden_log(ratio, blo, bhi, rel_tol=rel_tol, minimize=True)
    if vals[k] < r_star:
        eta_star, r_star = float(grid[k]), float(vals[k])
    return eta_star, compute_M_eta(spec, eta_star), r_star


def compute_M(spec: SourceSpec, u0_mass: float, omega_area: float) -> float:
    """Mass bound: u0_mass + |Omega| * inf_eta sup_s {f(s)+eta*s} / eta."""
    if u0_mass < 0:
        raise ValueError("compute_M: u0_mass must be nonnegative")
    if not omega_area > 0:
        raise ValueError("compute_M: omega_area must be positive")
    _, _, ratio = optimal_eta(spec)
    return float(u0_mass) + float(omega_area) * ratio


# -- regime classification ---------------------------------------------------

REGIMES = ("B1", "B2", "B3", "NotCovered")


@dataclass
class RegimeReport:
    mu: float
    mu_trend: str
    M: float
    c_gn: float
    threshold: float        # 1 / (2 * c_gn^4)
    gap: float              # threshold - (chi - mu)^+ * M
    regime: str
    epsilon0: float | None
    reason: str = ""

    def lines(self):
        def fmt(x):
            if x is None:
                return "none"
            return repr(float(x))
        out = [
            f"regime: {self.regime}",
            f"mu: {fmt(self.mu)}",
            f"mu_trend: {self.mu_trend}",
            f"M: {fmt(self.M)}",
            f"c_gn: {fmt(self.c_gn)}",
            f"threshold: {fmt(self.threshold)}",
            f"gap: {fmt(self.gap)}",
            f"epsilon0: {fmt(self.epsilon0)}",
        ]
        if self.reason:
            out.append(f"reason: {self.reason}")
        return out


def classify_values(mu: float, chi: float, M: float, c_gn: float):
    """Regime from the four scalars; returns (regime, threshold, gap, epsilon0).

    The boundedness inequality is strict: gap must be positive for B3.
    """
    if not chi > 0:
        raise ValueError("classify: chi must be positive")
    if not c_gn > 0:
        raise ValueError("classify: c_gn must be positive")
    threshold = 1.0 / (2.0 * c_gn ** 4)
    excess = 0.0 if math.isinf(mu) else max(chi - mu, 0.0)
    if excess == 0.0:
        gap = threshold
    else:
        gap = threshold - excess * M
    if math.isinf(mu):
        regime = "B1"
    elif mu > 0 and mu >= chi:
        regime = "B2"
    elif 0 < mu < chi and gap > 0:
        regime = "B3"
    else:
        regime = "NotCovered"
    epsilon0 = None
    if regime in ("B2", "B3"):
        inv = math.inf if M == 0 else 1.0 / (2.0 * M * c_gn ** 4)
        epsilon0 = 0.5 * min(mu, inv - excess)
    return regime, threshold, gap, epsilon0


def classify(spec: SourceSpec, chi: float, c_gn: float,
             u0_mass: float, omega_area: float) -> RegimeReport:
    """Full report: mu, M, threshold, gap, regime, and epsilon0."""
    est = estimate_mu(spec)
    mu = est.value
    try:
        M = compute_M(spec, u0_mass, omega_area)
        unbounded = False
    except UnboundedSourceError:
        M = math.inf
        unbounded = True
    if unbounded:
        threshold = 1.0 / (2.0 * c_gn ** 4)
        excess = 0.0 if math.isinf(mu) else max(chi - mu, 0.0)
        gap = threshold if excess == 0.0 else -math.inf
        return RegimeReport(mu, est.trend, M, c_gn, threshold, gap,
                            "NotCovered", None, reason="M unbounded")
    regime, threshold, gap, epsilon0 = classify_values(mu, chi, M, c_gn)
    reason = ""
    if regime == "NotCovered":
        if mu <= 0:
            reason = "mu = 0: boundedness condition requires mu > 0"
        else:
            reason = "(chi - mu) * M >= 1/(2*c_gn^4)"
    return RegimeReport(mu, est.trend, M, c_gn, threshold, gap, regime,
                        epsilon0, reason=reason)


# -- config-file naming ------------------------------------------------------

def parse_source_spec(text: str, base_dir=None) -> SourceSpec:
    """Parse a config-file source line.

    Accepted forms: "zero", "logistic a b theta", "sublog a b gamma",
    "subloglog a b", "tabulated <path>".
    """
    tokens = text.split()
    if not tokens:
        raise ValueError("empty source specification")
    name, args = tokens[0], tokens[1:]
    try:
        if name == "zero":
            _expect(args, 0, name)
            return SourceSpec.zero()
        if name == "logistic":
            _expect(args, 3, name)
            return SourceSpec.logistic(float(args[0]), float(args[1]), float(args[2]))
        if name == "sublog":
            _expect(args, 3, name)
            return SourceSpec.sublog(float(args[0]), float(args[1]), float(args[2]))
        if name == "subloglog":
            _expect(args, 2, name)
            return SourceSpec.subloglog(float(args[0]), float(args[1]))
        if name == "tabulated":
            _expect(args, 1, name)
            path = args[0]
            if base_dir is not None:
                import os
                if not os.path.isabs(path):
                    path = os.path.join(base_dir, path)
            return SourceSpec.tabulated_from_csv(path)
    except ValueError as e:
        raise ValueError(f"source {text!r}: {e}") from e
    raise ValueError(f"unknown source family {name!r}")


def _expect(args, n, name):
    if len(args) != n:
        raise ValueError(f"{name} takes {n} parameter(s), got {len(args)}")


def format_source_spec(spec: SourceSpec) -> str:
    if spec.family == "zero":
        return "zero"
    if spec.family == "logistic":
        return f"logistic {spec.a!r} {spec.b!r} {spec.exponent!r}"
    if spec.family == "sublog":
        return f"sublog {spec.a!r} {spec.b!r} {spec.exponent!r}"
    if spec.family == "subloglog":
        return f"subloglog {spec.a!r} {spec.b!r}"
    return f"tabulated {spec.table_path or '<inline>'}"
