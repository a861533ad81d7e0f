"""Continuation in eps toward concentration, with per-step diagnostics:
concentration length, rescaled profile against Z, the normalized blow-up
product, both sides of the Pohozaev identity and the boundary profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import bubble
from .fracop import FracOperator, Field, format_float
from .greens import GreenKernelBall, boundary_quotient, green_ball
from .solver import ConvergenceError, ManifoldProblem, minimize_manifold
from .special import Exponents, closed_form_constants

CSV_COLUMNS = ("eps", "supNorm", "gammaEps", "massCrit", "blowupProduct",
               "pohozaevLhs", "pohozaevRhs", "profileError")


@dataclass
class ContinuationRecord:
    eps: float  # parameter of the equation solved by u
    supNorm: float
    gammaEps: float
    massCrit: float
    blowupProduct: float
    pohozaevLhs: float
    pohozaevRhs: float
    profileError: float
    schedule_eps: float = math.nan
    lam: float = math.nan
    trusted: bool = True
    boundaryError: float = math.nan

    def csv_row(self) -> str:
        return ",".join(format_float(getattr(self, c)) for c in CSV_COLUMNS)

    @property
    def pohozaev_mismatch(self) -> float:
        return abs(self.pohozaevLhs - self.pohozaevRhs) / abs(self.pohozaevRhs)


def records_to_csv(records) -> str:
    return "\n".join([",".join(CSV_COLUMNS)] + [r.csv_row() for r in records]) + "\n"


# ---------------------------------------------------------------- boundary quotient


def boundary_quotient_fit(u: Field, side: int, n_fit: int = 6) -> float:
    """u/d^s at an endpoint of an interval from the n_fit nearest nodes.

    Least squares on u = k d^s + c1 d^{s+1} + c2 h d^{s-1}; the last term
    absorbs the O(h/d) first-node layer of the lattice solution.
    """
    d = u.domain
    if d.dim != 1:
        raise NotImplementedError("boundary fits are implemented for intervals")
    s = _order(u)
    x = d.nodes[:, 0]
    idx = np.argsort(x)[::-1][:n_fit] if side > 0 else np.argsort(x)[:n_fit]
    dist = d.radius - np.abs(x[idx])
    vals = u.values[idx]
    order = np.argsort(dist)
    if np.any(np.diff(vals[order]) <= 0):
        raise ConvergenceError("near-boundary samples are not monotone; boundary fit rejected")
    basis = np.c_[dist ** s, dist ** (s + 1), d.h * dist ** (s - 1)]
    coef = np.linalg.lstsq(basis, vals, rcond=None)[0]
    return float(coef[0])


def _order(u: Field) -> float:
    s = getattr(u, "order", None)
    if s is None:
        raise ValueError("field carries no fractional order; use with_order")
    return s


def with_order(f: Field, s: float) -> Field:
    f.order = s
    return f


# ---------------------------------------------------------------- diagnostics


def rescale_profile(u: Field, e: Exponents, center=None, window: float = 1.0, samples: int = 201):
    """z(x) = u(gamma x + center)/||u|| sampled on |x| <= window, gamma = ||u||^{-2/(N-2s)}.

    Returns (sample points, z, Z).
    """
    d = u.domain
    if d.dim != 1:
        raise NotImplementedError("profile rescaling is implemented for intervals")
    x = d.nodes[:, 0]
    imax = int(np.argmax(u.values))
    if imax in (0, d.size - 1):
        raise ValueError("maximum sits on the boundary layer")
    M = float(u.values[imax])
    c = x[imax] if center is None else float(np.atleast_1d(center)[0])
    gamma = M ** (-2 / e.decay)
    xs = np.linspace(-window, window, samples)
    z = np.interp(gamma * xs + c, x, u.values, left=0.0, right=0.0) / M
    return xs, z, bubble.eval_limit_profile(e, xs)


def pohozaev_check(u: Field, e: Exponents, eps: float, coeff: float = 1.0) -> tuple[float, float]:
    """Both sides for (-Delta)^s u = coeff u^p - eps u^q on a centred interval.

    lhs = (2s - N) int u f(u) + 2N int F(u), rhs = Gamma(1+s)^2 sum (u/d^s)^2 <x, nu>.
    """
    d = u.domain
    if d.dim != 1:
        raise NotImplementedError("Pohozaev check is implemented for intervals")
    p, q, N, s = e.p, e.q, e.N, e.s
    v = u.values
    uf = coeff * v ** (p + 1) - eps * v ** (q + 1)
    Fu = coeff * v ** (p + 1) / (p + 1) - eps * v ** (q + 1) / (q + 1)
    lhs = (2 * s - N) * d.integrate(uf) + 2 * N * d.integrate(Fu)
    f = with_order(Field(d, v), s)
    rhs = math.gamma(1 + s) ** 2 * sum(boundary_quotient_fit(f, side) ** 2 * d.radius for side in (-1, 1))
    return lhs, rhs


def boundary_profile_check(u: Field, e: Exponents, x0=0.0, annulus: float = 0.5,
                           layer: int = 10) -> float:
    """Normalized sup of | ||u|| u/d^s - gamma0 G(., x0)/d^s | away from x0.

    Nodes within `layer` cells of the boundary are replaced by the fitted
    boundary quotients at the endpoints.
    """
    d = u.domain
    if d.dim != 1:
        raise NotImplementedError("boundary profile check is implemented for intervals")
    k = GreenKernelBall(1, e.s, d.radius)
    g0 = closed_form_constants(e).boundary_coeff
    x = d.nodes[:, 0]
    x0 = float(np.atleast_1d(x0)[0])
    dist = d.radius - np.abs(x)
    keep = (np.abs(x - x0) >= annulus) & (dist >= layer * d.h)
    if not np.any(keep):
        raise ValueError("annulus contains no nodes")
    M = float(np.max(u.values))
    num = M * u.values[keep] / dist[keep] ** e.s
    ref = g0 * green_ball(x[keep], x0, k) / dist[keep] ** e.s
    f = with_order(Field(d, u.values), e.s)
    ends = np.array([M * boundary_quotient_fit(f, side) for side in (-1, 1)])
    ref_ends = g0 * boundary_quotient(np.array([-d.radius, d.radius]), x0, k)
    diff = np.r_[np.abs(num - ref), np.abs(ends - ref_ends)]
    scale = max(np.max(ref), np.max(ref_ends))
    return float(np.max(diff) / scale)


def rescaled_coefficient(rec: ContinuationRecord, e: Exponents) -> float:
    """eps gamma^{((N+2s) - q(N-2s))/2}, the coefficient of z^q after rescaling."""
    return rec.eps * rec.gammaEps ** (((e.N + 2 * e.s) - e.q * e.decay) / 2)


# ---------------------------------------------------------------- continuation


def geometric_schedule(eps0: float = 0.5, ratio: float = 0.7, steps: int = 12) -> list[float]:
    """eps0 * ratio^k for k = 0..steps."""
    return [eps0 * ratio ** k for k in range(steps + 1)]


def blowup_study(op: FracOperator, e: Exponents, schedule,
                 tol: float = 1e-9, window: float = 1.0, min_cells: float = 4.0):
    """One record per eps, warm-started; stops at the first unresolved eps.

    Returns (records, failure message or None).
    """
    if not e.is_critical:
        raise ValueError("the blow-up study needs the critical exponent")
    if op.domain.dim != 1:
        raise NotImplementedError("continuation is implemented for intervals")
    d = op.domain
    records: list[ContinuationRecord] = []
    prev = None
    for eps in schedule:
        prob = ManifoldProblem(op, e, eps)
        try:
            res = minimize_manifold(prob, prev, tol=tol)
        except ConvergenceError as exc:
            return records, f"solver failure at eps={eps!r}: {exc}"
        prev = res.w.values
        u = res.u
        M = float(np.max(u.values))
        gam = M ** (-2 / e.decay)
        if gam < min_cells * d.h:
            if records:
                records[-1].trusted = True
            return records, f"unresolved at eps={eps!r}: gamma={gam:.3e} < {min_cells}h"
        ep = res.eps_effective
        lhs, rhs = pohozaev_check(u, e, ep)
        _, z, Z = rescale_profile(u, e, center=0.0, window=window)
        rec = ContinuationRecord(
            eps=ep, supNorm=M, gammaEps=gam,
            massCrit=d.integrate(u.values ** e.critical_power),
            blowupProduct=ep * M ** (e.q - e.p + 2),
            pohozaevLhs=lhs, pohozaevRhs=rhs,
            profileError=float(np.max(np.abs(z - Z))),
            schedule_eps=eps, lam=res.lam,
            boundaryError=boundary_profile_check(u, e),
        )
        records.append(rec)
    return records, None


def successive_relative_differences(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.abs(v[1:] / v[:-1] - 1.0)


def shrinking_tail(values, count: int = 3) -> bool:
    """True when the last `count` entries strictly decrease."""
    v = np.asarray(values, dtype=float)[-count:]
    return len(v) == count and bool(np.all(np.diff(v) < 0))
