"""Closed-form constants: Gamma, Beta, sphere measure, bubble amplitude and
width, boundary-profile coefficient and the blow-up limit constant."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Gamma overflows double precision a little above 171.
_GAMMA_DIRECT_MAX = 170.0


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    if not x > 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x!r}")
    return math.gamma(x)


def log_gamma(x: float) -> float:
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def log_beta(a: float, b: float) -> float:
    if not (a > 0 and b > 0):
        raise ValueError(f"beta requires positive arguments, got ({a!r}, {b!r})")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_fn(a: float, b: float) -> float:
    """Euler Beta function B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b).

    Uses the direct Gamma ratio while it cannot overflow and switches to
    log-Gamma for large arguments.
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"beta requires positive arguments, got ({a!r}, {b!r})")
    if a + b < _GAMMA_DIRECT_MAX:
        return math.gamma(a) * math.gamma(b) / math.gamma(a + b)
    return math.exp(log_beta(a, b))


def sphere_measure(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2, 2*pi, 4*pi, ...)."""
    if N < 1:
        raise ValueError("dimension must be a positive integer")
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def laplacian_normalization(N: int, s: float) -> float:
    """C(N, s) making the singular integral have Fourier symbol |xi|^{2s}."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return (
        2.0 ** (2 * s) * s * math.gamma((N + 2 * s) / 2)
        / (math.pi ** (N / 2) * math.gamma(1 - s))
    )


@dataclass(frozen=True)
class Exponents:
    """Dimension, fractional order and the two nonlinearity exponents p < q."""

    N: int
    s: float
    p: float
    q: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if not self.N > 2 * self.s:
            raise ValueError("need N > 2s for a finite critical exponent")
        pc = (self.N + 2 * self.s) / (self.N - 2 * self.s)
        if self.p < pc * (1 - 1e-14):
            raise ValueError(f"p={self.p} is below the critical value {pc}")
        if not self.q > self.p:
            raise ValueError(f"need q > p, got p={self.p}, q={self.q}")

    @classmethod
    def critical(cls, N: int, s: float, q: float) -> "Exponents":
        return cls(N, s, (N + 2 * s) / (N - 2 * s), q)

    @property
    def critical_power(self) -> float:
        """Sobolev exponent 2* = 2N / (N - 2s)."""
        return 2 * self.N / (self.N - 2 * self.s)

    @property
    def critical_p(self) -> float:
        return (self.N + 2 * self.s) / (self.N - 2 * self.s)

    @property
    def is_critical(self) -> bool:
        return abs(self.p - self.critical_p) <= 1e-12 * self.critical_p

    @property
    def l_exponent(self) -> float:
        """Homogeneity exponent balancing the two terms of the supercritical
        functional; undefined (nan) at the critical exponent, where the
        denominator vanishes."""
        N, s, p, q = self.N, self.s, self.p, self.q
        den = 2 * s * (p + 1) - N * (p - 1)
        if abs(den) <= 1e-12 * (2 * s * (p + 1)):
            return math.nan
        return (2 * s * (q + 1) - N * (p - 1)) / den

    @property
    def dilation_exponent(self) -> float:
        """beta with Omega_eps = eps^{-beta} Omega."""
        return (self.p - 1) / (2 * self.s * (self.q - self.p))

    @property
    def decay(self) -> float:
        """N - 2s, the decay rate of the bubble."""
        return self.N - 2 * self.s


def bubble_amplitude(N: int, s: float) -> float:
    """c_{N,s}: value at the origin of the entire positive solution of
    (-Delta)^s U = U^{2*-1} with U = c (1 + |x|^2)^{-(N-2s)/2}."""
    d = N - 2 * s
    return 2.0 ** (d / 2) * (math.gamma((N + 2 * s) / 2) / math.gamma(d / 2)) ** (d / (4 * s))


def fundamental_coefficient(N: int, s: float) -> float:
    """a_{N,s} with (-Delta)^s (a |x|^{2s-N}) = delta."""
    return math.gamma(N / 2 - s) / (2.0 ** (2 * s) * math.pi ** (N / 2) * math.gamma(s))


def limit_profile_power_integral(N: int, s: float, k: float) -> float:
    """Integral over R^N of Z^k with Z = (1 + |x|^2/mu)^{-(N-2s)/2}.

    Finite when k (N - 2s) > N.
    """
    d = N - 2 * s
    b = d * k / 2 - N / 2
    if not b > 0:
        raise ValueError("integral diverges: need k (N - 2s) > N")
    return sphere_measure(N) * bubble_amplitude(N, s) ** (2 * N / d) / 2 * beta_fn(N / 2, b)


def bubble_critical_mass(N: int, s: float) -> float:
    """Integral of U^{2*} over R^N for the fixed-amplitude bubble (not 1 in general)."""
    d = N - 2 * s
    return sphere_measure(N) * bubble_amplitude(N, s) ** (2 * N / d) / 2 * beta_fn(N / 2, N / 2)


def sobolev_constant(N: int, s: float) -> float:
    """Best constant S in ||u||^2 >= S (int |u|^{2*})^{2/2*}, with the quadratic form
    normalized so that its Fourier symbol is |xi|^{2s}."""
    return bubble_critical_mass(N, s) ** (2 * s / N)


@dataclass(frozen=True)
class ProfileConstants:
    exponents: Exponents
    sphere_area: float
    amplitude: float  # c_{N,s}
    fundamental_coeff: float  # a_{N,s}
    width: float  # mu_{N,s}
    boundary_coeff: float  # gamma_0

    def blowup_limit(self, r_constant: float) -> float:
        return blowup_limit(self.exponents, r_constant)


def closed_form_constants(e: Exponents) -> ProfileConstants:
    N, s = e.N, e.s
    c = bubble_amplitude(N, s)
    om = sphere_area = sphere_measure(N)
    gamma0 = om * c ** e.critical_power / 2 * beta_fn(N / 2, s)
    return ProfileConstants(
        exponents=e,
        sphere_area=sphere_area,
        amplitude=c,
        fundamental_coeff=fundamental_coefficient(N, s),
        width=c ** (4 / e.decay),
        boundary_coeff=gamma0,
    )


def blowup_numerators(N: int, s: float, q: float, r_constant: float) -> tuple[float, float, float]:
    """The blow-up constant times its denominator, in two algebraic forms.

    Returns (Gamma/Beta form, profile form, denominator q(N-2s) - (N+2s)).
    No hypotheses on q are imposed, so the identity between the two forms
    can be checked even where the limit itself is not defined.
    """
    d = N - 2 * s
    c = bubble_amplitude(N, s)
    pref = sphere_measure(N) * c ** (2 * N / d) / 2
    gamma_form = (pref * (q + 1) * r_constant * s ** 2 * math.gamma(s) ** 2
               * beta_fn(N / 2, s) ** 2 / beta_fn(N / 2, d * q / 2 - s))
    g0 = pref * beta_fn(N / 2, s)
    zq = limit_profile_power_integral(N, s, q + 1)
    profile = g0 ** 2 * math.gamma(1 + s) ** 2 * r_constant * (q + 1) / zq
    return gamma_form, profile, q * d - (N + 2 * s)


def _checked_denominator(e: Exponents) -> None:
    if not e.is_critical:
        raise ValueError("blow-up constant is defined for the critical exponent only")
    if not e.q * e.decay - (e.N + 2 * e.s) > 0:
        raise ValueError("q (N - 2s) must exceed N + 2s")


def blowup_limit(e: Exponents, r_constant: float) -> float:
    """Limit of eps ||u_eps||^{q-p+2}, written in terms of Gamma and Beta values."""
    _checked_denominator(e)
    num, _, den = blowup_numerators(e.N, e.s, e.q, r_constant)
    return num / den


def blowup_limit_from_profile(e: Exponents, r_constant: float) -> float:
    """Same limit assembled from gamma_0 and the integral of Z^{q+1}."""
    _checked_denominator(e)
    _, num, den = blowup_numerators(e.N, e.s, e.q, r_constant)
    return num / den
