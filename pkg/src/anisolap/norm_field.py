"""Anisotropic norms H and the monotone vector fields they induce.

A norm H enters the solver through three oracles: H itself, its gradient,
and the Hessian of H^2.  The ellipticity constants (lam, Lam) are the extreme
eigenvalues of (1/2) Hess H^2 over the unit sphere; by 0-homogeneity of that
Hessian the sphere sweep covers all nonzero directions.

The vector field of a Young function b and a norm H is

    A(xi) = b(H(xi)) grad H(xi)   (xi != 0),   A(0) = 0,

equivalently a(H(xi)) * (1/2) grad H^2(xi).  Its Jacobian

    grad A = a(H) * (1/2) Hess H^2 + (b'(H) - a(H)) gradH (x) gradH

is symmetric with eigenvalues pinched between
lam*min(1,i_b)*a(H) and Lam*max(1,s_b)*a(H); feeding a regularized Young
function makes the field globally Lipschitz and uniformly monotone.

Everything here is pure and immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "AnisotropicNorm",
    "EuclideanNorm",
    "EllipseNorm",
    "PowerSumNorm",
    "make_norm",
    "MonotoneField",
    "SingularPointError",
    "NormConstructionError",
    "PolynomialField",
    "check_divergence_identity",
    "DivergenceIdentityReport",
    "field_convergence_report",
]


class NormConstructionError(ValueError):
    """Descriptor does not define an admissible uniformly convex norm."""


class SingularPointError(ValueError):
    """Derivative requested at xi = 0 where the field is not differentiable."""


def _vec(xi, dim) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != dim:
        raise ValueError(f"expected vectors of dimension {dim}, got shape {xi.shape}")
    return xi


class AnisotropicNorm:
    """Base class; subclasses implement __call__, grad and half_hess_H2."""

    dim: int
    lam: float
    Lam: float

    def __call__(self, xi) -> np.ndarray:
        raise NotImplementedError

    def grad(self, xi) -> np.ndarray:
        raise NotImplementedError

    def half_hess_H2(self, xi) -> np.ndarray:
        """(1/2) Hess H^2 at xi != 0, shape (..., n, n)."""
        raise NotImplementedError

    def half_grad_H2(self, xi) -> np.ndarray:
        """(1/2) grad H^2 = H grad H; overridden where a direct form exists."""
        xi = _vec(xi, self.dim)
        return self(xi)[..., None] * self.grad(xi)

    def hess_H(self, xi) -> np.ndarray:
        """Hess H = ((1/2) Hess H^2 - gradH (x) gradH) / H for xi != 0."""
        xi = _vec(xi, self.dim)
        g = self.grad(xi)
        return (self.half_hess_H2(xi) - g[..., :, None] * g[..., None, :]) / self(xi)[..., None, None]

    # -- ellipticity estimation --------------------------------------------

    def _estimate_ellipticity(self, n_dirs: int = 10_000, seed: int = 0) -> tuple[float, float]:
        """Extreme eigenvalues of (1/2) Hess H^2 over sphere directions.

        In 2-D the sweep is a dense uniform angle grid refined by local 1-D
        minimization around the extremal samples; in higher dimensions a
        seeded random sample is used.
        """
        if self.dim == 2:
            theta = np.linspace(0.0, 2 * math.pi, n_dirs, endpoint=False)
            dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        else:
            rng = np.random.default_rng(seed)
            dirs = rng.standard_normal((n_dirs, self.dim))
            dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        eig = np.linalg.eigvalsh(self.half_hess_H2(dirs))
        lo = float(eig[:, 0].min())
        hi = float(eig[:, -1].max())
        if self.dim == 2:
            step = 2 * math.pi / n_dirs

            def min_eig(t):
                return float(np.linalg.eigvalsh(
                    self.half_hess_H2(np.array([math.cos(t), math.sin(t)])))[0])

            def neg_max_eig(t):
                return -float(np.linalg.eigvalsh(
                    self.half_hess_H2(np.array([math.cos(t), math.sin(t)])))[-1])

            t_lo = float(theta[np.argmin(eig[:, 0])])
            t_hi = float(theta[np.argmax(eig[:, -1])])
            r1 = minimize_scalar(min_eig, bounds=(t_lo - step, t_lo + step), method="bounded",
                                 options={"xatol": 1e-12})
            r2 = minimize_scalar(neg_max_eig, bounds=(t_hi - step, t_hi + step), method="bounded",
                                 options={"xatol": 1e-12})
            lo = min(lo, float(r1.fun))
            hi = max(hi, -float(r2.fun))
        return lo, hi


class EuclideanNorm(AnisotropicNorm):
    def __init__(self, dim: int = 2):
        self.dim = int(dim)
        self.lam = 1.0
        self.Lam = 1.0

    def __call__(self, xi):
        return np.linalg.norm(_vec(xi, self.dim), axis=-1)

    def grad(self, xi):
        xi = _vec(xi, self.dim)
        return xi / np.linalg.norm(xi, axis=-1, keepdims=True)

    def half_hess_H2(self, xi):
        xi = _vec(xi, self.dim)
        eye = np.eye(self.dim)
        return np.broadcast_to(eye, xi.shape[:-1] + (self.dim, self.dim)).copy()

    def half_grad_H2(self, xi):
        return _vec(xi, self.dim).copy()


class EllipseNorm(AnisotropicNorm):
    """Gauge of an ellipse: H(xi) = sqrt(xi^T M xi), M symmetric positive definite."""

    def __init__(self, M):
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise NormConstructionError("M must be a square matrix")
        if not np.allclose(M, M.T, atol=1e-12):
            raise NormConstructionError("M must be symmetric")
        w = np.linalg.eigvalsh(M)
        if w[0] <= 0:
            raise NormConstructionError("M must be positive definite")
        self.M = M
        self.dim = M.shape[0]
        self.lam = float(w[0])
        self.Lam = float(w[-1])

    def __call__(self, xi):
        xi = _vec(xi, self.dim)
        return np.sqrt(np.einsum("...i,ij,...j->...", xi, self.M, xi))

    def grad(self, xi):
        xi = _vec(xi, self.dim)
        return np.einsum("ij,...j->...i", self.M, xi) / self(xi)[..., None]

    def half_hess_H2(self, xi):
        xi = _vec(xi, self.dim)
        return np.broadcast_to(self.M, xi.shape[:-1] + (self.dim, self.dim)).copy()

    def half_grad_H2(self, xi):
        xi = _vec(xi, self.dim)
        return np.einsum("ij,...j->...i", self.M, xi)


class PowerSumNorm(AnisotropicNorm):
    """H(xi) = (alpha K^p(xi) + beta |xi|^p)^(1/p) with K the l_q norm, q >= 2.

    The beta |xi|^p term keeps the Hessian uniformly elliptic even where the
    pure l_q part degenerates on the axes; construction verifies lam > 1e-8.
    The Hessian of H^2 is obtained by central differences of the analytic
    gradient, evaluated on the unit sphere (0-homogeneity) and only for
    |xi| >= 1e-10.
    """

    def __init__(self, p: float, q: float, alpha: float = 1.0, beta: float = 1.0, dim: int = 2):
        if p <= 1 or q < 2 or alpha <= 0 or beta <= 0:
            raise NormConstructionError("require p > 1, q >= 2 and positive weights")
        self.p, self.q, self.alpha, self.beta = float(p), float(q), float(alpha), float(beta)
        self.dim = int(dim)
        self.lam, self.Lam = self._estimate_ellipticity()
        if self.lam <= 1e-8:
            raise NormConstructionError(f"degenerate descriptor: estimated lower constant {self.lam:.3g}")

    def _K(self, xi):
        return np.sum(np.abs(xi) ** self.q, axis=-1) ** (1.0 / self.q)

    def __call__(self, xi):
        xi = _vec(xi, self.dim)
        S = self.alpha * self._K(xi) ** self.p + self.beta * np.linalg.norm(xi, axis=-1) ** self.p
        return S ** (1.0 / self.p)

    def grad(self, xi):
        xi = _vec(xi, self.dim)
        K = self._K(xi)
        r = np.linalg.norm(xi, axis=-1)
        H = (self.alpha * K ** self.p + self.beta * r ** self.p) ** (1.0 / self.p)
        gK = np.sign(xi) * np.abs(xi) ** (self.q - 1.0) / K[..., None] ** (self.q - 1.0)
        term = (self.alpha * K ** (self.p - 1.0))[..., None] * gK \
            + (self.beta * r ** (self.p - 2.0))[..., None] * xi
        return H[..., None] ** (1.0 - self.p) * term

    def half_hess_H2(self, xi):
        xi = _vec(xi, self.dim)
        r = np.linalg.norm(xi, axis=-1)
        if np.any(r < 1e-10):
            raise SingularPointError("Hessian of H^2 requested too close to 0")
        u = xi / r[..., None]
        h = 1e-5
        out = np.empty(xi.shape[:-1] + (self.dim, self.dim))
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = h
            out[..., :, j] = (self.half_grad_H2(u + e) - self.half_grad_H2(u - e)) / (2 * h)
        return 0.5 * (out + np.swapaxes(out, -1, -2))


def make_norm(desc: dict) -> AnisotropicNorm:
    """Build a norm from a config table.

    Kinds: euclidean | ellipse {m11, m12, m22} | power_sum {p, q, alpha, beta}.
    """
    kind = desc.get("kind")
    dim = int(desc.get("dim", 2))
    if kind == "euclidean":
        return EuclideanNorm(dim)
    if kind == "ellipse":
        M = np.array([[float(desc["m11"]), float(desc.get("m12", 0.0))],
                      [float(desc.get("m12", 0.0)), float(desc["m22"])]])
        return EllipseNorm(M)
    if kind == "power_sum":
        return PowerSumNorm(float(desc["p"]), float(desc["q"]),
                            float(desc.get("alpha", 1.0)), float(desc.get("beta", 1.0)), dim)
    raise NormConstructionError(f"unknown norm kind: {kind!r}")


@dataclass(frozen=True)
class MonotoneField:
    """The vector field A(xi) = b(H(xi)) grad H(xi) of a (possibly regularized)
    Young function and an anisotropic norm."""

    norm: AnisotropicNorm
    yf: object  # YoungFunction or RegularizedYoung

    def __call__(self, xi) -> np.ndarray:
        xi = _vec(xi, self.norm.dim)
        r = np.linalg.norm(xi, axis=-1)
        safe = np.where(r > 0, 1.0, np.nan)
        out = self.yf.b(self.norm(xi))[..., None] * self.norm.grad(xi * safe[..., None])
        return np.where(r[..., None] > 0, out, 0.0)

    def eval_alt(self, xi) -> np.ndarray:
        """Alternate form a(H(xi)) * (1/2) grad H^2(xi); agrees with __call__."""
        xi = _vec(xi, self.norm.dim)
        r = np.linalg.norm(xi, axis=-1)
        safe = np.where(r > 0, 1.0, np.nan)
        out = self.yf.a(self.norm(xi))[..., None] * self.norm.half_grad_H2(xi * safe[..., None])
        return np.where(r[..., None] > 0, out, 0.0)

    def potential(self, xi) -> np.ndarray:
        """Scalar potential B(H(xi)); A is its gradient."""
        xi = _vec(xi, self.norm.dim)
        return self.yf.B(self.norm(xi))

    def jac(self, xi) -> np.ndarray:
        """Symmetric Jacobian grad A at xi != 0."""
        xi = _vec(xi, self.norm.dim)
        if np.any(np.linalg.norm(xi, axis=-1) == 0):
            raise SingularPointError("field Jacobian is undefined at xi = 0")
        H = self.norm(xi)
        g = self.norm.grad(xi)
        aH = self.yf.a(H)
        dbH = self.yf.db(H)
        return aH[..., None, None] * self.norm.half_hess_H2(xi) \
            + (dbH - aH)[..., None, None] * g[..., :, None] * g[..., None, :]

    def jac_or_surrogate(self, xi) -> np.ndarray:
        """Jacobian with an SPD surrogate a(0) * (1/2) Hess H^2(e1) at xi = 0.

        Any SPD matrix gives a valid descent direction at the kink; the
        surrogate is exact for quadratic norms.
        """
        xi = _vec(xi, self.norm.dim)
        r = np.linalg.norm(xi, axis=-1)
        zero = r == 0
        if not np.any(zero):
            return self.jac(xi)
        e1 = np.zeros(self.norm.dim)
        e1[0] = 1.0
        fallback = float(self.yf.a(np.asarray(0.0))) * self.norm.half_hess_H2(e1)
        xi_safe = np.where(zero[..., None], e1, xi)
        out = self.jac(xi_safe)
        out[zero] = fallback
        return out

    def jacobian_eigen_bounds(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Two-sided eigenvalue envelope lam*min(1,i_b)*a(H) .. Lam*max(1,s_b)*a(H)."""
        H = self.norm(_vec(xi, self.norm.dim))
        aH = self.yf.a(H)
        lo = self.norm.lam * min(1.0, self.yf.i_b) * aH
        hi = self.norm.Lam * max(1.0, self.yf.s_b) * aH
        return lo, hi


# ---------------------------------------------------------------------------
# Vector-field identities
# ---------------------------------------------------------------------------


class PolynomialField:
    """2-D vector field with polynomial components, for identity checks.

    coeffs[c][i, j] is the coefficient of x^i y^j in component c.
    """

    def __init__(self, coeffs: Sequence[np.ndarray]):
        self.coeffs = [np.asarray(c, dtype=float) for c in coeffs]
        if len(self.coeffs) != 2:
            raise ValueError("expected two components")

    @staticmethod
    def random(rng: np.random.Generator, degree: int = 2) -> "PolynomialField":
        size = degree + 1
        comps = []
        for _ in range(2):
            c = rng.uniform(-1.0, 1.0, size=(size, size))
            for i in range(size):
                for j in range(size):
                    if i + j > degree:
                        c[i, j] = 0.0
            comps.append(c)
        return PolynomialField(comps)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.polynomial.polynomial.polyval2d(x[..., 0], x[..., 1], c)
                         for c in self.coeffs], axis=-1)

    def jac(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[:-1] + (2, 2))
        for c_idx, c in enumerate(self.coeffs):
            cx = np.polynomial.polynomial.polyder(c, axis=0)
            cy = np.polynomial.polynomial.polyder(c, axis=1)
            out[..., c_idx, 0] = np.polynomial.polynomial.polyval2d(x[..., 0], x[..., 1], cx)
            out[..., c_idx, 1] = np.polynomial.polynomial.polyval2d(x[..., 0], x[..., 1], cy)
        return out

    def div(self, x) -> np.ndarray:
        J = self.jac(x)
        return J[..., 0, 0] + J[..., 1, 1]


def _div_fd4(func: Callable, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Divergence by 4th-order central differences (exact for poly deg <= 4)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = h
        out = out + (func(x - 2 * e)[..., j] - 8 * func(x - e)[..., j]
                     + 8 * func(x + e)[..., j] - func(x + 2 * e)[..., j]) / (12 * h)
    return out


@dataclass(frozen=True)
class DivergenceIdentityReport:
    pointwise_residual: float
    integral_residual: float


def check_divergence_identity(V, W, omega, n_points: int = 200,
                              quad_order: int = 20, seed: int = 0) -> DivergenceIdentityReport:
    """Numerically verify the product rule for divergences.

    Pointwise, at sampled interior points:

        (div V)(div W) = tr(grad V grad W) + div( V (div W) - (grad W) V ),

    the last divergence taken by high-order finite differences of the
    composite field (an independent route; the other terms are analytic).
    The integral counterpart replaces the divergence term by the boundary
    flux of the same composite and is evaluated with the domain's interior
    and boundary quadratures.
    """
    rng = np.random.default_rng(seed)
    pts = omega.sample_interior(n_points, rng)

    def composite(x):
        return V(x) * W.div(x)[..., None] - np.einsum("...ij,...j->...i", W.jac(x), V(x))

    lhs = V.div(pts) * W.div(pts)
    tr = np.einsum("...ij,...ji->...", V.jac(pts), W.jac(pts))
    res_pt = float(np.max(np.abs(lhs - tr - _div_fd4(composite, pts))))

    qx, qw = omega.interior_quadrature(quad_order)
    bx, bw, bn = omega.boundary_quadrature(quad_order)
    vol = np.sum(qw * (V.div(qx) * W.div(qx)
                       - np.einsum("...ij,...ji->...", V.jac(qx), W.jac(qx))))
    flux = np.sum(bw * np.einsum("...i,...i->...", composite(bx), bn))
    return DivergenceIdentityReport(pointwise_residual=res_pt,
                                    integral_residual=float(abs(vol - flux)))


def field_convergence_report(norm: AnisotropicNorm, yf, eps_list: Sequence[float],
                             M_list: Sequence[float] = (1.0, 10.0),
                             n_samples: int = 4000, seed: int = 0) -> dict[float, dict[float, float]]:
    """sup_{|xi| <= M} |A_eps(xi) - A(xi)| for each eps and M.

    The deviation must shrink along a decreasing eps_list; returned as
    {M: {eps: sup_deviation}}.
    """
    rng = np.random.default_rng(seed)
    base = MonotoneField(norm, yf)
    out: dict[float, dict[float, float]] = {}
    for M in M_list:
        xi = rng.uniform(-1.0, 1.0, size=(n_samples, norm.dim))
        xi *= (M * rng.uniform(0, 1, size=n_samples) ** 0.5 /
               np.maximum(np.linalg.norm(xi, axis=-1), 1e-30))[:, None]
        xi[0] = 0.0
        row = {}
        for eps in eps_list:
            reg = MonotoneField(norm, yf.regularize(eps))
            row[float(eps)] = float(np.max(np.linalg.norm(reg(xi) - base(xi), axis=-1)))
        out[float(M)] = row
    return out
