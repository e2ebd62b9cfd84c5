"""Young functions: convex integrands B(t) = int_0^t b(s) ds with controlled growth.

A Young function is represented by the pair (b, B) where b is non-decreasing
with b(0) = 0.  The growth indices

    i_b = inf_{t>0} t b'(t)/b(t),    s_b = sup_{t>0} t b'(t)/b(t)

quantify the admissible range of power-like behaviour; we require
0 < i_b <= s_b < inf.  Three concrete families are provided (pure powers,
sums of powers, tabulated data), together with the Legendre-type conjugate
and the smoothing family a_eps/b_eps/B_eps used by the solver's
regularization-continuation scheme.

All evaluation methods are pure and vectorized over numpy arrays; instances
are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DegenerateYoungError",
    "YoungFunction",
    "PowerYoung",
    "PowerSumYoung",
    "TabulatedYoung",
    "RegularizedYoung",
    "AuxiliaryReport",
    "check_auxiliary_functions",
    "default_index_grid",
    "make_young",
]


class DegenerateYoungError(ValueError):
    """b fails the admissibility requirements (not monotone, i_b <= 0, ...)."""


# 32-point Gauss-Legendre rule on [0, 1]; used for all quadratures of b.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

# 12-point rule for the composite log-space panels of the regularized family
_GLS_X, _GLS_W = np.polynomial.legendre.leggauss(12)
_GLS_X = 0.5 * (_GLS_X + 1.0)
_GLS_W = 0.5 * _GLS_W


def default_index_grid(lo: float = 1e-6, hi: float = 1e6, per_decade: int = 200) -> np.ndarray:
    """Geometric grid used for growth-index estimation."""
    decades = math.log10(hi / lo)
    n = int(round(decades * per_decade)) + 1
    return np.geomspace(lo, hi, n)


def _as_nonneg(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("Young functions are defined on t >= 0")
    return t


def _gl_integral(func: Callable, lo, hi) -> np.ndarray:
    """Vectorized fixed-order Gauss-Legendre integral of func over [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = hi - lo
    nodes = lo[..., None] + span[..., None] * _GL_X
    return span * np.einsum("...k,k->...", func(nodes), _GL_W)


class YoungFunction:
    """Base class; subclasses provide b, its derivative, and (optionally) B.

    Attributes i_b, s_b hold the growth indices (exact where the closed form
    allows, grid estimates otherwise); i_a = i_b - 1 and s_a = s_b - 1 are the
    indices of a(t) = b(t)/t.
    """

    i_b: float
    s_b: float

    # -- core evaluations -------------------------------------------------

    def b(self, t):
        raise NotImplementedError

    def db(self, t):
        """Derivative b'(t); finite differences unless overridden."""
        t = _as_nonneg(t)
        h = 1e-7 * np.maximum(t, 1e-3)
        lo = np.maximum(t - h, 0.0)
        return (self.b(t + h) - self.b(lo)) / (t + h - lo)

    def B(self, t):
        t = _as_nonneg(t)
        return _gl_integral(self.b, np.zeros_like(t), t)

    def a(self, t):
        """a(t) = b(t)/t, extended by its limit at 0 when finite."""
        t = _as_nonneg(t)
        tt = np.where(t > 0, t, 1.0)
        out = self.b(tt) / tt
        if np.any(t == 0):
            a0 = self._a_at_zero()
            out = np.where(t > 0, out, a0)
        return out

    def da(self, t):
        """a'(t) = (b'(t) - a(t))/t for t > 0."""
        t = np.asarray(t, dtype=float)
        return (self.db(t) - self.a(t)) / t

    def _a_at_zero(self) -> float:
        # limit is 0 for i_a > 0, finite for i_a = 0, +inf for i_a < 0;
        # evaluate just off zero as a proxy.
        return float(self.b(np.asarray(1e-8)) / 1e-8)

    @property
    def i_a(self) -> float:
        return self.i_b - 1.0

    @property
    def s_a(self) -> float:
        return self.s_b - 1.0

    # -- derived quantities ------------------------------------------------

    def conjugate(self, t, rtol: float = 1e-12):
        """Legendre-type conjugate sup_{s>=0} (s t - B(s)) by golden section.

        The supremand is concave in s, so a bracket [0, s_hi] with the slope
        t - b(s_hi) <= 0 contains the maximizer; the bracket is grown
        geometrically before the golden-section contraction.
        """
        t = _as_nonneg(t)
        scalar = t.ndim == 0
        tv = np.atleast_1d(t)
        out = np.empty_like(tv)
        for idx, ti in np.ndenumerate(tv):
            out[idx] = self._conjugate_scalar(float(ti), rtol)
        return float(out[0]) if scalar else out.reshape(t.shape)

    def _conjugate_scalar(self, t: float, rtol: float) -> float:
        if t == 0.0:
            return 0.0
        s_hi = 1.0
        for _ in range(2000):
            if float(self.b(np.asarray(s_hi))) >= t:
                break
            s_hi *= 2.0
            if s_hi > 1e250:
                raise ValueError("conjugate supremum did not stabilize (upper index too small?)")
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        lo, hi = 0.0, s_hi
        x1 = hi - phi * (hi - lo)
        x2 = lo + phi * (hi - lo)
        f1 = x1 * t - float(self.B(np.asarray(x1)))
        f2 = x2 * t - float(self.B(np.asarray(x2)))
        while hi - lo > rtol * max(1.0, hi):
            if f1 < f2:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + phi * (hi - lo)
                f2 = x2 * t - float(self.B(np.asarray(x2)))
            else:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - phi * (hi - lo)
                f1 = x1 * t - float(self.B(np.asarray(x1)))
        s_star = 0.5 * (lo + hi)
        return max(0.0, s_star * t - float(self.B(np.asarray(s_star))))

    def b_inverse(self, x, rtol: float = 1e-12) -> float:
        """Generalized inverse inf{t : b(t) >= x} by bisection."""
        x = float(x)
        if x < 0:
            raise ValueError("b is nonnegative")
        if x == 0.0:
            return 0.0
        hi = 1.0
        for _ in range(2000):
            if float(self.b(np.asarray(hi))) >= x:
                break
            hi *= 2.0
            if hi > 1e250:
                raise ValueError("b never reaches the requested value")
        lo = 0.0
        while hi - lo > rtol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if float(self.b(np.asarray(mid))) >= x:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def F(self, t):
        """F(t) = int_0^t b(s)^2 ds."""
        t = _as_nonneg(t)
        return _gl_integral(lambda s: self.b(s) ** 2, np.zeros_like(t), t)

    def regularize(self, epsilon: float) -> "RegularizedYoung":
        return RegularizedYoung(self, epsilon)

    # -- index estimation ---------------------------------------------------

    def estimate_indices(self, grid: np.ndarray | None = None) -> tuple[float, float]:
        """Grid estimates of (i_b, s_b) from the log-log slope of b.

        The returned pair brackets from the inside: the estimated infimum is
        >= the true i_b and the estimated supremum is <= the true s_b.
        """
        if grid is None:
            grid = default_index_grid()
        grid = np.asarray(grid, dtype=float)
        if np.any(grid <= 0):
            raise ValueError("index grid must be positive")
        bg = self.b(grid)
        if np.any(bg <= 0):
            raise DegenerateYoungError("b vanishes at a positive grid point")
        eta = 1e-6
        slope = (np.log(self.b(grid * math.exp(eta))) - np.log(self.b(grid * math.exp(-eta)))) / (2 * eta)
        return float(slope.min()), float(slope.max())


@dataclass(frozen=True)
class PowerYoung(YoungFunction):
    """B(t) = t^p / p, the p-Laplacian integrand; b(t) = t^(p-1)."""

    p: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise DegenerateYoungError("power Young function requires p > 1")
        object.__setattr__(self, "i_b", self.p - 1.0)
        object.__setattr__(self, "s_b", self.p - 1.0)

    @property
    def is_power(self) -> bool:
        return True

    def b(self, t):
        t = _as_nonneg(t)
        return t ** (self.p - 1.0)

    def db(self, t):
        t = _as_nonneg(t)
        return (self.p - 1.0) * t ** (self.p - 2.0)

    def B(self, t):
        t = _as_nonneg(t)
        return t ** self.p / self.p

    def F(self, t):
        t = _as_nonneg(t)
        return t ** (2 * self.p - 1.0) / (2 * self.p - 1.0)

    def conjugate_exact(self, t):
        """Closed form: the conjugate of t^p/p is t^p'/p'."""
        t = _as_nonneg(t)
        pc = self.p / (self.p - 1.0)
        return t ** pc / pc


@dataclass(frozen=True)
class PowerSumYoung(YoungFunction):
    """b(t) = alpha t^(p-1) + beta t^(q-1), a two-power blend."""

    p: float
    q: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if min(self.p, self.q) <= 1.0 or self.alpha <= 0 or self.beta <= 0:
            raise DegenerateYoungError("power-sum Young function requires p, q > 1 and positive weights")
        object.__setattr__(self, "i_b", min(self.p, self.q) - 1.0)
        object.__setattr__(self, "s_b", max(self.p, self.q) - 1.0)

    def b(self, t):
        t = _as_nonneg(t)
        return self.alpha * t ** (self.p - 1.0) + self.beta * t ** (self.q - 1.0)

    def db(self, t):
        t = _as_nonneg(t)
        return (self.alpha * (self.p - 1.0) * t ** (self.p - 2.0)
                + self.beta * (self.q - 1.0) * t ** (self.q - 2.0))

    def B(self, t):
        t = _as_nonneg(t)
        return self.alpha * t ** self.p / self.p + self.beta * t ** self.q / self.q


class TabulatedYoung(YoungFunction):
    """b supplied as monotone samples starting at (0, 0); piecewise-linear
    inside the table, power-law extrapolation above the last sample with the
    exponent of the final log-log chord.

    Plateaus (constant stretches) are admitted only while the grid estimate of
    i_b stays positive; otherwise construction fails.
    """

    def __init__(self, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 3:
            raise DegenerateYoungError("need matching 1-D grid/values with >= 3 samples")
        if grid[0] != 0.0 or values[0] != 0.0:
            raise DegenerateYoungError("table must start at b(0) = 0")
        if np.any(np.diff(grid) <= 0):
            raise DegenerateYoungError("grid must be strictly increasing")
        if np.any(np.diff(values) < 0) or np.any(values[1:] <= 0):
            raise DegenerateYoungError("b samples must be non-decreasing and positive for t > 0")
        self._grid = grid
        self._values = values
        self._hi_exp = math.log(values[-1] / values[-2]) / math.log(grid[-1] / grid[-2])
        if not (self._hi_exp > 0 and math.isfinite(self._hi_exp)):
            raise DegenerateYoungError("upper tail exponent must be positive and finite")
        idx_grid = default_index_grid(grid[1] * 1e-2, grid[-1] * 1e2, per_decade=50)
        i_est, s_est = self.estimate_indices(idx_grid)
        if i_est <= 0:
            raise DegenerateYoungError(f"estimated lower index {i_est:.3g} <= 0 (plateau too flat)")
        self.i_b = i_est
        self.s_b = s_est
        # exact prefix integrals of the piecewise-linear interpolant
        self._prefix = np.concatenate(
            [[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(grid))]
        )

    def b(self, t):
        t = _as_nonneg(t)
        g, v = self._grid, self._values
        out = np.interp(t, g, v)
        above = t > g[-1]
        if np.any(above):
            out = np.where(above, v[-1] * (np.maximum(t, g[-1]) / g[-1]) ** self._hi_exp, out)
        return out

    def B(self, t):
        t = _as_nonneg(t)
        g, v, P = self._grid, self._values, self._prefix
        t_in = np.clip(t, 0.0, g[-1])
        k = np.clip(np.searchsorted(g, t_in, side="right") - 1, 0, g.size - 2)
        bl = v[k] + (v[k + 1] - v[k]) * (t_in - g[k]) / (g[k + 1] - g[k])
        inner = P[k] + 0.5 * (v[k] + bl) * (t_in - g[k])
        e = self._hi_exp
        tail = np.where(
            t > g[-1],
            v[-1] / g[-1] ** e * (np.maximum(t, g[-1]) ** (e + 1.0) - g[-1] ** (e + 1.0)) / (e + 1.0),
            0.0,
        )
        return inner + tail


class RegularizedYoung:
    """The uniformly-elliptic smoothing of a Young function.

    For eps in (0, 1):

        a_eps(t) = (a(sqrt(eps + t^2)) + eps) / (1 + eps a(sqrt(eps + t^2)))
        b_eps(t) = a_eps(t) t,      B_eps(t) = int_0^t b_eps.

    a_eps is pinched into [eps, 1/eps], so the induced vector field is
    Lipschitz and uniformly monotone; b_eps -> b uniformly on compacts as
    eps -> 0.  Exposes the same evaluation surface as YoungFunction (b, db,
    B, a, da) so solver code is agnostic to regularization.
    """

    def __init__(self, base: YoungFunction, epsilon: float):
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        self.base = base
        self.epsilon = float(epsilon)

    # indices controlling the field bounds are those of the base function
    @property
    def i_b(self) -> float:
        return self.base.i_b

    @property
    def s_b(self) -> float:
        return self.base.s_b

    def a(self, t):
        t = _as_nonneg(t)
        eps = self.epsilon
        au = self.base.a(np.sqrt(eps + t * t))
        return (au + eps) / (1.0 + eps * au)

    def da(self, t):
        t = np.asarray(t, dtype=float)
        eps = self.epsilon
        u = np.sqrt(eps + t * t)
        au = self.base.a(u)
        dau = self.base.da(u)
        return dau * (1.0 - eps * eps) / (1.0 + eps * au) ** 2 * (t / u)

    def b(self, t):
        t = _as_nonneg(t)
        return self.a(t) * t

    def db(self, t):
        t = np.asarray(t, dtype=float)
        return self.a(t) + t * self.da(t)

    def B(self, t):
        # composite rule: one linear panel on [0, sqrt(eps)] where b_eps is an
        # even analytic function of that scale, then 8 geometric panels in
        # log(s) up to t.  Power-type integrands are entire in log
        # coordinates, so the scheme is machine-accurate; this matters
        # because the solver's line search compares these values against
        # the exactly assembled residual.
        t = _as_nonneg(t)
        m = np.minimum(t, math.sqrt(self.epsilon))
        out = _gl_integral(self.b, np.zeros_like(t), m)
        mask = t > m
        if np.any(mask):
            m_safe = np.where(mask, m, 1.0)
            t_safe = np.where(mask, t, 2.0)
            L = np.log(t_safe / m_safe)
            fr = np.linspace(0.0, 1.0, 9)
            y0 = np.log(m_safe)[..., None] + L[..., None] * fr[:-1]
            y1 = np.log(m_safe)[..., None] + L[..., None] * fr[1:]
            yy = y0[..., :, None] + (y1 - y0)[..., :, None] * _GLS_X
            ss = np.exp(yy)
            seg = np.einsum("...pk,k->...p", self.b(ss) * ss, _GLS_W) * (y1 - y0)
            out = out + np.where(mask, seg.sum(axis=-1), 0.0)
        return out

    def estimate_a_indices(self, grid: np.ndarray | None = None) -> tuple[float, float]:
        """Grid estimates of the indices of a_eps (inner bracket)."""
        if grid is None:
            grid = default_index_grid(1e-6, 1e6, per_decade=50)
        slope = grid * self.da(grid) / self.a(grid)
        return float(slope.min()), float(slope.max())

    def sup_deviation(self, M: float, n: int = 2001) -> float:
        """sup_{t in [0, M]} |b_eps(t) - b(t)| on a uniform sample."""
        t = np.linspace(0.0, M, n)
        return float(np.max(np.abs(self.b(t) - self.base.b(t))))


@dataclass(frozen=True)
class AuxiliaryReport:
    """Empirical constants for the beta/gamma/F comparisons.

    ratios are (min, max) of beta/B, gamma/conjugate and t b^2/F over the
    grid; `ok` records that every ratio is finite and positive and that the
    one-sided inequalities B <= beta and F <= t b^2 hold up to `tol`.
    """

    beta_over_B: tuple[float, float]
    gamma_over_conj: tuple[float, float]
    tb2_over_F: tuple[float, float]
    ok: bool


def check_auxiliary_functions(yf: YoungFunction, grid, tol: float = 1e-9) -> AuxiliaryReport:
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("grid must be positive")
    bb = yf.b(grid)
    BB = yf.B(grid)
    beta = bb * grid
    gamma = np.array([yf.b_inverse(t) for t in grid]) * grid
    conj = np.array([yf.conjugate(t) for t in grid])
    FF = yf.F(grid)
    tb2 = grid * bb ** 2
    r1 = beta / BB
    r2 = gamma / conj
    r3 = tb2 / FF
    ratios = np.concatenate([r1, r2, r3])
    ok = bool(
        np.all(np.isfinite(ratios))
        and np.all(ratios > 0)
        and np.all(r1 >= 1.0 - tol)
        and np.all(r3 >= 1.0 - tol)
    )
    return AuxiliaryReport(
        beta_over_B=(float(r1.min()), float(r1.max())),
        gamma_over_conj=(float(r2.min()), float(r2.max())),
        tb2_over_F=(float(r3.min()), float(r3.max())),
        ok=ok,
    )


def make_young(desc: dict) -> YoungFunction:
    """Build a Young function from a config table, e.g. {kind='power', p=3}."""
    kind = desc.get("kind")
    if kind == "power":
        return PowerYoung(p=float(desc["p"]))
    if kind == "power_sum":
        return PowerSumYoung(
            p=float(desc["p"]),
            q=float(desc["q"]),
            alpha=float(desc.get("alpha", 1.0)),
            beta=float(desc.get("beta", 1.0)),
        )
    if kind == "tabulated":
        return TabulatedYoung(desc["grid"], desc["values"])
    raise ValueError(f"unknown Young function kind: {kind!r}")
