"""Closed-form Green function of the restricted fractional Laplacian on a
ball (an interval when N = 1), its regular part, the Robin function, the
boundary quotient G/d^s and the boundary integral R_{N,s,x0}."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special as sp

from .special import beta_fn, fundamental_coefficient, sphere_measure


@dataclass(frozen=True)
class GreenKernelBall:
    N: int
    s: float
    radius: float = 1.0

    def __post_init__(self):
        if not 0 < self.s < 1 or not self.N > 2 * self.s:
            raise ValueError("need 0 < s < 1 and N > 2s")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def kappa(self) -> float:
        N, s = self.N, self.s
        return math.gamma(N / 2) / (2 ** (2 * s) * math.pi ** (N / 2) * math.gamma(s) ** 2)

    @property
    def full_beta(self) -> float:
        """B(s, N/2 - s); kappa times this equals the fundamental coefficient."""
        return beta_fn(self.s, self.N / 2 - self.s)

    @property
    def fundamental_coeff(self) -> float:
        return fundamental_coefficient(self.N, self.s)


def _points(x, N):
    x = np.asarray(x, dtype=float)
    if N == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def _check_interior(r2, k: GreenKernelBall):
    if np.any(r2 >= k.radius ** 2):
        raise ValueError("point outside the open ball")


def _pair_geometry(x, y, k: GreenKernelBall):
    x, y = _points(x, k.N), _points(y, k.N)
    rho2 = k.radius ** 2
    xx, yy = np.sum(x * x, axis=-1), np.sum(y * y, axis=-1)
    _check_interior(xx, k)
    _check_interior(yy, k)
    dist2 = np.sum((x - y) ** 2, axis=-1)
    if np.any(dist2 == 0):
        raise ValueError("Green function is singular on the diagonal")
    r0 = (rho2 - xx) * (rho2 - yy) / (rho2 * dist2)
    return dist2, r0


def green_ball(x, y, k: GreenKernelBall):
    """kappa |x-y|^{2s-N} * int_0^{r0} t^{s-1}(1+t)^{-N/2} dt.

    The integral is an incomplete Beta function in u = t/(1+t).
    """
    dist2, r0 = _pair_geometry(x, y, k)
    a, b = k.s, k.N / 2 - k.s
    inc = k.full_beta * sp.betainc(a, b, r0 / (1 + r0))
    return k.kappa * dist2 ** ((2 * k.s - k.N) / 2) * inc


def regular_part(x, y, k: GreenKernelBall):
    """H = a_{N,s}|x-y|^{2s-N} - G, via the complementary incomplete Beta."""
    dist2, r0 = _pair_geometry(x, y, k)
    a, b = k.s, k.N / 2 - k.s
    comp = k.full_beta * sp.betainc(b, a, 1 / (1 + r0))
    return k.kappa * dist2 ** ((2 * k.s - k.N) / 2) * comp


def robin_function(x, k: GreenKernelBall):
    """Diagonal limit of the regular part:
    kappa / (N/2 - s) * rho^{N-2s} (rho^2 - |x|^2)^{2s-N}."""
    x = _points(x, k.N)
    xx = np.sum(x * x, axis=-1)
    if np.any(xx >= k.radius ** 2):
        raise ValueError("Robin function diverges at the boundary")
    N, s = k.N, k.s
    return k.kappa / (N / 2 - s) * k.radius ** (N - 2 * s) * (k.radius ** 2 - xx) ** (2 * s - N)


def boundary_quotient(z, y, k: GreenKernelBall):
    """Limit of G(x, y)/d(x)^s as x -> z on the sphere of radius rho."""
    z, y = _points(z, k.N), _points(y, k.N)
    yy = np.sum(y * y, axis=-1)
    _check_interior(yy, k)
    dist = np.sqrt(np.sum((z - y) ** 2, axis=-1))
    s = k.s
    return k.kappa * 2 ** s / s * (k.radius ** 2 - yy) ** s * k.radius ** (-s) * dist ** (-k.N)


def boundary_r_constant(x0, k: GreenKernelBall) -> float:
    """R_{N,s,x0}: integral over the sphere of (G(., x0)/d^s)^2 <x - x0, nu>."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (k.N,):
        raise ValueError(f"x0 must have {k.N} coordinates")
    r0 = float(np.linalg.norm(x0))
    if r0 >= k.radius:
        raise ValueError("x0 must be an interior point")
    rho = k.radius
    if k.N == 1:
        total = 0.0
        for z in (-rho, rho):
            q = boundary_quotient(z, x0, k)
            total += float(q) ** 2 * (z - x0[0]) * np.sign(z)
        return total
    # axisymmetric about the direction of x0; theta is the angle to that axis
    pref = k.kappa * 2 ** k.s / k.s * (rho ** 2 - r0 ** 2) ** k.s * rho ** (-k.s)
    ring = sphere_measure(k.N - 1)

    def integrand(theta):
        c = math.cos(theta)
        d2 = rho ** 2 + r0 ** 2 - 2 * rho * r0 * c
        return (pref ** 2 * d2 ** (-k.N) * (rho - r0 * c)
                * ring * rho ** (k.N - 1) * math.sin(theta) ** (k.N - 2))

    return integrate.quad(integrand, 0.0, math.pi, epsabs=0, epsrel=1e-12, limit=200)[0]


def green_bound_constants(N: int, s: float) -> tuple[float, float]:
    """Explicit constants (C1, C2) with, on any ball,
    G(x, y) |x-y|^{N-2s} <= C1 and G(x, y) |x-y|^{N-s} / d(x)^s <= C2.

    C1 = a_{N,s} because the regular part is nonnegative.  For C2 split at
    |x-y| = d(x): far pairs use int_0^{r0} <= r0^s/s together with
    (1-|x|^2)(1-|y|^2) <= 4 d(x)(d(x) + |x-y|), near pairs use the full Beta integral.
    """
    k = GreenKernelBall(N, s)
    c1 = k.fundamental_coeff
    c2 = k.kappa * max(8 ** s / s, k.full_beta)
    return c1, c2


def green_bound_ratios(x, y, k: GreenKernelBall) -> tuple[np.ndarray, np.ndarray]:
    """The two scale-invariant quantities bounded by green_bound_constants."""
    G = green_ball(x, y, k)
    x, y = _points(x, k.N), _points(y, k.N)
    dist = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    d = k.radius - np.sqrt(np.sum(x * x, axis=-1))
    return G * dist ** (k.N - 2 * k.s), G * dist ** (k.N - k.s) / d ** k.s


def torsion_constant(N: int, s: float) -> float:
    return math.gamma(N / 2) / (2 ** (2 * s) * math.gamma(1 + s) * math.gamma(N / 2 + s))


def torsion_function(x, k: GreenKernelBall):
    """Solution of (-Delta)^s u = 1 in the ball with zero exterior data:
    C (rho^2 - |x|^2)^s."""
    x = _points(x, k.N)
    xx = np.sum(x * x, axis=-1)
    return torsion_constant(k.N, k.s) * np.clip(k.radius ** 2 - xx, 0, None) ** k.s


def green_potential(f, x, k: GreenKernelBall, points=(), **quad_opts) -> float:
    """u(x) = int G(x, y) f(y) dy on an interval.

    The |x - y|^{2s-1} singularity and the boundary factor d(y)^s are handled
    as algebraic quadrature weights; ``points`` adds breakpoints where f is
    not smooth.
    """
    if k.N != 1:
        raise NotImplementedError("quadrature potential is implemented for intervals")
    x = float(x)
    rho, s, a = k.radius, k.s, 2 * k.s - 1
    opts = dict(epsabs=1e-12, epsrel=1e-10, limit=200) | quad_opts

    def exponent(end):
        return a if end == x else s if abs(end) == rho else 0.0

    def regular(y):
        return float(robin_function(x, k) if y == x else regular_part(x, y, k))

    def piece(lo, hi):
        wl, wr = exponent(lo), exponent(hi)
        if wl == wr == 0.0:
            return integrate.quad(lambda y: float(green_ball(x, y, k)) * f(y), lo, hi, **opts)[0]
        if a in (wl, wr) and x in (lo, hi):
            # G = kappa B |x-y|^{2s-1} - H with H smooth near the diagonal
            near = integrate.quad(lambda y: k.kappa * k.full_beta * f(y), lo, hi,
                                  weight="alg", wvar=(wl, wr), **opts)[0]
            return near - integrate.quad(lambda y: regular(y) * f(y), lo, hi, **opts)[0]
        pad = 1e-13 * (hi - lo)

        def g(y):
            y = min(max(y, lo + pad), hi - pad)
            return float(green_ball(x, y, k)) * f(y) / ((y - lo) ** wl * (hi - y) ** wr)

        return integrate.quad(g, lo, hi, weight="alg", wvar=(wl, wr), **opts)[0]

    cuts = sorted({-rho, rho, x} | {float(p) for p in points if -rho < p < rho})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if exponent(lo) and exponent(hi):
            mid = 0.5 * (lo + hi)
            total += piece(lo, mid) + piece(mid, hi)
        else:
            total += piece(lo, hi)
    return total
