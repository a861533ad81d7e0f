"""Entire-space profiles: the extremal bubble, its rescalings, the normalized
limit profile and the kernel modes of the linearized critical equation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .special import Exponents, bubble_amplitude, sphere_measure


def _as_points(x, N: int) -> np.ndarray:
    """Coerce scalars / arrays to shape (..., N)."""
    x = np.asarray(x, dtype=float)
    if N == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != N:
        raise ValueError(f"points must have trailing dimension {N}")
    return x


def _sqnorm(x) -> np.ndarray:
    return np.sum(np.asarray(x) ** 2, axis=-1)


@dataclass(frozen=True)
class BubbleProfile:
    """amplitude * scale^{-(N-2s)/2} (1 + |x - center|^2 / scale^2)^{-(N-2s)/2}."""

    exponents: Exponents
    center: tuple = (0.0,)
    scale: float = 1.0
    amplitude: float | None = None

    @classmethod
    def standard(cls, e: Exponents, center=None, scale: float = 1.0) -> "BubbleProfile":
        if center is None:
            center = (0.0,) * e.N
        return cls(e, tuple(np.atleast_1d(center).astype(float)), scale, bubble_amplitude(e.N, e.s))

    @classmethod
    def limit_profile(cls, e: Exponents) -> "BubbleProfile":
        """Z with Z(0) = 1: the standard bubble at scale xi = c^{2/(N-2s)}."""
        c = bubble_amplitude(e.N, e.s)
        return cls(e, (0.0,) * e.N, c ** (2 / e.decay), c)

    @property
    def peak(self) -> float:
        amp = bubble_amplitude(self.exponents.N, self.exponents.s) if self.amplitude is None else self.amplitude
        return amp * self.scale ** (-self.exponents.decay / 2)


def eval_bubble(profile: BubbleProfile, x) -> np.ndarray:
    e = profile.exponents
    pts = _as_points(x, e.N)
    r2 = _sqnorm(pts - np.asarray(profile.center, dtype=float))
    return profile.peak * (1.0 + r2 / profile.scale ** 2) ** (-e.decay / 2)


def eval_limit_profile(e: Exponents, x) -> np.ndarray:
    """Z(x) = (1 + |x|^2 / mu)^{-(N-2s)/2}."""
    mu = bubble_amplitude(e.N, e.s) ** (4 / e.decay)
    return (1.0 + _sqnorm(_as_points(x, e.N)) / mu) ** (-e.decay / 2)


@dataclass(frozen=True)
class KernelMode:
    index: int
    width: float


def kernel_modes(e: Exponents) -> list[KernelMode]:
    mu = bubble_amplitude(e.N, e.s) ** (4 / e.decay)
    return [KernelMode(i, mu) for i in range(1, e.N + 2)]


def eval_kernel_mode(mode: KernelMode, e: Exponents, x) -> np.ndarray:
    """Translation modes (index 1..N) and the dilation mode (index N+1).

    The dilation mode is the derivative of the width family of Z, which
    vanishes on the sphere |x|^2 = mu; it reduces to the unit-sphere form
    only when mu = 1.
    """
    if not 1 <= mode.index <= e.N + 1:
        raise ValueError(f"mode index must lie in 1..{e.N + 1}")
    pts = _as_points(x, e.N)
    t = _sqnorm(pts) / mode.width
    envelope = (1.0 + t) ** (-(e.decay + 2) / 2)
    if mode.index <= e.N:
        return 2.0 * pts[..., mode.index - 1] * envelope
    return (1.0 - t) * envelope


def kelvin_transform(f: Callable, e: Exponents) -> Callable:
    """x -> |x|^{-(N-2s)} f(x / |x|^2)."""

    def transformed(x):
        pts = _as_points(x, e.N)
        r2 = _sqnorm(pts)
        if np.any(r2 == 0):
            raise ValueError("Kelvin transform is undefined at the origin")
        inv = pts / r2[..., None]
        arg = inv[..., 0] if e.N == 1 else inv
        return r2 ** (-e.decay / 2) * f(arg)

    return transformed


def radial_integral(g: Callable[[float], float], N: int) -> float:
    """Integral over R^N of a radial function g(r), split at r = 1 with the
    tail mapped by t = 1/r."""
    om = sphere_measure(N)
    head = integrate.quad(lambda r: r ** (N - 1) * g(r), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    tail = integrate.quad(
        lambda t: t ** (-N - 1) * g(1.0 / t), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200
    )[0]
    return om * (head + tail)


def identity_nov39(e: Exponents) -> tuple[float, float]:
    """Two evaluations of the same integral of the dilation-mode weight:
    the full-space radial form and the form folded onto (0, 1) via inversion.
    """
    if not e.is_critical:
        raise ValueError("identity holds for critical exponents")
    N, s = e.N, e.s
    a = (N + 2 * s + 2) / 2
    om = sphere_measure(N)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    head = integrate.quad(lambda r: r ** (N - 1) * (1 - r * r) * (1 + r * r) ** (-a), 0.0, 1.0, **opts)[0]
    # t = 1/r turns the tail into t^{2s-1} (t^2 - 1)(1 + t^2)^{-a} on (0, 1)
    tail = integrate.quad(
        lambda t: (t * t - 1) * (1 + t * t) ** (-a), 0.0, 1.0, weight="alg", wvar=(2 * s - 1, 0.0), **opts
    )[0]
    lhs = om * (head + tail)
    rhs = -om * integrate.quad(
        lambda r: (1 - r * r) * (1 - r ** (N - 2 * s)) * (1 + r * r) ** (-a),
        0.0, 1.0, weight="alg", wvar=(2 * s - 1, 0.0), **opts,
    )[0]
    return lhs, rhs
