"""Lattice discretization of the restricted fractional Laplacian.

The operator is the s-th power of the standard nearest-neighbour lattice
Laplacian, scaled by h^{-2s}, restricted to the nodes inside the domain.
Its symbol is (sum_i 4 sin^2(theta_i / 2))^s, which approximates |xi|^{2s},
so the continuum limit carries the standard normalization C(N, s).  The
diagonal entry is the full-lattice one, which already accounts for the
exterior-zero datum; off-diagonal entries are negative with tails
~ -C(N, s) h^N |x - y|^{-N-2s}.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import integrate, linalg
from scipy.sparse.linalg import LinearOperator, cg

from .special import Exponents, laplacian_normalization

DENSE_LIMIT = 4096
KINDS = ("interval", "ball", "box")


def fft_workers() -> int:
    """Data-parallel width for FFTs, capped by FRACLAB_THREADS."""
    raw = os.environ.get("FRACLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------- domains


class DiscreteDomain:
    """Uniform lattice h Z^N intersected with a ball, interval or box centred at 0.

    Nodes lie strictly inside the domain and are ordered lexicographically.
    """

    def __init__(self, kind: str, h: float, radius: float, dim: int = 1):
        if kind not in KINDS:
            raise ValueError(f"unknown domain kind {kind!r}")
        if kind == "interval" and dim != 1:
            raise ValueError("interval domains are one-dimensional")
        if dim not in (1, 2):
            raise ValueError("only N = 1 and N = 2 lattices are supported")
        if not (h > 0 and radius > 0):
            raise ValueError("h and radius must be positive")
        self.kind, self.h, self.radius, self.dim = kind, float(h), float(radius), dim
        kmax = math.ceil(radius / h - 1e-9) - 1
        if kmax < 1:
            raise ValueError("grid too coarse: need at least 3 interior nodes per axis")
        self.kmax = kmax
        self.shape = (2 * kmax + 1,) * dim
        ks = np.arange(-kmax, kmax + 1)
        grids = np.meshgrid(*([ks] * dim), indexing="ij")
        lattice = np.stack(grids, axis=-1).reshape(-1, dim)
        coords = lattice * self.h
        if kind == "ball":
            inside = np.sum(coords ** 2, axis=1) < self.radius ** 2 * (1 - 1e-12)
        else:
            inside = np.all(np.abs(coords) < self.radius * (1 - 1e-12), axis=1)
        self.mask = inside.reshape(self.shape)
        self.flat_index = np.flatnonzero(inside)
        self.lattice = lattice[inside]
        self.nodes = coords[inside]

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def contiguous(self) -> bool:
        return bool(self.mask.all())

    def dilated(self, factor: float) -> "DiscreteDomain":
        """Same lattice mask on the domain scaled by factor."""
        out = DiscreteDomain.__new__(DiscreteDomain)
        out.__dict__.update(self.__dict__)
        out.h = self.h * factor
        out.radius = self.radius * factor
        out.nodes = self.nodes * factor
        return out

    def distance_to_boundary(self, x=None) -> np.ndarray:
        x = self.nodes if x is None else np.atleast_2d(x)
        if self.kind == "ball" or self.dim == 1:
            return self.radius - np.sqrt(np.sum(x ** 2, axis=1))
        return np.min(self.radius - np.abs(x), axis=1)

    def embed(self, values: np.ndarray) -> np.ndarray:
        grid = np.zeros(int(np.prod(self.shape)))
        grid[self.flat_index] = values
        return grid.reshape(self.shape)

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint rule h^N sum."""
        return float(self.h ** self.dim * np.sum(values))

    def same_lattice(self, other: "DiscreteDomain") -> bool:
        return (
            self.kind == other.kind and self.dim == other.dim and self.shape == other.shape
            and math.isclose(self.h, other.h, rel_tol=1e-12)
            and math.isclose(self.radius, other.radius, rel_tol=1e-12)
        )

    def __repr__(self):
        return f"DiscreteDomain(kind={self.kind!r}, h={self.h!r}, radius={self.radius!r}, dim={self.dim}, n={self.size})"


# ---------------------------------------------------------------- fields


@dataclass
class Field:
    domain: DiscreteDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.size,):
            raise ValueError(f"expected {self.domain.size} values, got shape {self.values.shape}")

    def to_csv(self) -> str:
        d = self.domain
        lines = [f"# domain={d.kind} h={d.h!r} n={d.size}"]
        for i, (x, v) in enumerate(zip(d.nodes, self.values)):
            coords = ",".join(format_float(c) for c in x)
            lines.append(f"{i},{coords},{format_float(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, radius: float, dim: int = 1) -> "Field":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
        dom = DiscreteDomain(header["domain"], float(header["h"]), radius, dim)
        if dom.size != int(header["n"]):
            raise ValueError("node count in header does not match the rebuilt domain")
        rows = np.array([[float(t) for t in ln.split(",")] for ln in lines[1:]])
        return cls(dom, rows[:, -1])


def format_float(x: float) -> str:
    """17 significant digits, the round-trip precision of a double."""
    return f"{float(x):.17g}"


# ---------------------------------------------------------------- weights


@functools.lru_cache(maxsize=32)
def lattice_weights_1d(s: float, length: int) -> np.ndarray:
    """g_k, k = 0..length-1: Fourier coefficients of (4 sin^2(theta/2))^s.

    g_0 = Gamma(2s+1)/Gamma(s+1)^2 and g_{k+1} = g_k (k - s)/(k + s + 1).
    """
    g = np.empty(length)
    g[0] = math.gamma(2 * s + 1) / math.gamma(s + 1) ** 2
    k = np.arange(length - 1)
    g[1:] = g[0] * np.cumprod((k - s) / (k + s + 1))
    g.setflags(write=False)
    return g


def _outer_square_tail(s: float, half_width: float) -> float:
    """Integral of |y|^{-2-2s} over the plane outside the square [-a, a]^2."""
    ang = integrate.quad(lambda t: max(abs(math.cos(t)), abs(math.sin(t))) ** (2 * s), 0, math.pi / 4)[0]
    return 8 * ang * half_width ** (-2 * s) / (2 * s)


@functools.lru_cache(maxsize=8)
def lattice_weights_2d(s: float, length: int) -> np.ndarray:
    """g[m1, m2] for 0 <= m1, m2 < length on the planar lattice.

    A periodic FFT of the symbol returns the image sum over period P; the
    images are removed with the far-field asymptote -C(2, s)|m|^{-2-2s}.
    """
    P = max(256, 1 << math.ceil(math.log2(2 * length + 2)))
    th = 2 * math.pi * np.arange(P) / P
    w = 4 * np.sin(th / 2) ** 2
    sym = (w[:, None] + w[None, :]) ** s
    a = sfft.irfft2(sym[:, : P // 2 + 1], s=(P, P), workers=fft_workers())[:length, :length]
    C = laplacian_normalization(2, s)
    m = np.arange(length, dtype=float)
    J = 8
    images = np.zeros((length, length))
    for j1 in range(-J, J + 1):
        for j2 in range(-J, J + 1):
            if j1 == 0 and j2 == 0:
                continue
            r2 = (m[:, None] + j1 * P) ** 2 + (m[None, :] + j2 * P) ** 2
            images -= C * r2 ** (-1 - s)
    # remaining images: lattice sum ~ integral with density 1/P^2
    images -= C * _outer_square_tail(s, (J + 0.5) * P) / P ** 2
    g = a - images
    g = 0.5 * (g + g.T)  # exact axis-swap symmetry
    g.setflags(write=False)
    return g


def lattice_kernel(s: float, dim: int, length: int) -> np.ndarray:
    """Unscaled weights on nonnegative offsets, shape (length,) * dim."""
    return lattice_weights_1d(s, length) if dim == 1 else lattice_weights_2d(s, length)


def _circulant_embedding(gq: np.ndarray, size: int) -> np.ndarray:
    """Kernel laid out on a periodic grid of period `size` per axis, using
    offsets |k| < len(gq) and zero elsewhere."""
    K = gq.shape[0]
    idx = np.zeros(size, dtype=int)
    valid = np.zeros(size, dtype=bool)
    for k in range(size):
        off = k if k <= size // 2 else size - k
        if off < K:
            idx[k], valid[k] = off, True
    if gq.ndim == 1:
        return np.where(valid, gq[idx], 0.0)
    out = gq[np.ix_(idx, idx)]
    return out * (valid[:, None] & valid[None, :])


# ---------------------------------------------------------------- operator


class FracOperator:
    """Symmetric positive definite M-matrix acting on fields over a domain."""

    def __init__(self, domain: DiscreteDomain, s: float):
        if not 0 < s < 1:
            raise ValueError("s must lie in (0, 1)")
        self.domain, self.s = domain, float(s)
        M = domain.shape[0]
        self.offsets = lattice_kernel(self.s, domain.dim, M)
        self.scale = domain.h ** (-2 * self.s)
        conv = 2 * M
        kc = _circulant_embedding(self.offsets, conv)
        self._conv_shape = (conv,) * domain.dim
        self._kernel_hat = sfft.rfftn(kc, workers=fft_workers())
        pc = _circulant_embedding(self.offsets, M)
        self._precond_hat = sfft.rfftn(pc, workers=fft_workers())
        self._chol = None
        self._dense = None

    @property
    def diagonal(self) -> float:
        return float(self.offsets.flat[0] * self.scale)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        d = self.domain
        grid = d.embed(v)
        pad = sfft.rfftn(grid, s=self._conv_shape, workers=fft_workers())
        full = sfft.irfftn(pad * self._kernel_hat, s=self._conv_shape, workers=fft_workers())
        sl = tuple(slice(0, n) for n in d.shape)
        return self.scale * full[sl].reshape(-1)[d.flat_index]

    def precondition(self, v: np.ndarray) -> np.ndarray:
        """Approximate inverse from the periodic (circulant) version of the operator."""
        d = self.domain
        grid = d.embed(v)
        out = sfft.irfftn(sfft.rfftn(grid, workers=fft_workers()) / self._precond_hat, s=d.shape,
                          workers=fft_workers())
        return out.reshape(-1)[d.flat_index] / self.scale

    def to_dense(self) -> np.ndarray:
        if self._dense is None:
            d = self.domain
            if d.size > 3 * DENSE_LIMIT:
                raise MemoryError(f"refusing to densify a {d.size}-node operator")
            if d.dim == 1 and d.contiguous:
                A = linalg.toeplitz(self.offsets[: d.size])
            else:
                diff = np.abs(d.lattice[:, None, :] - d.lattice[None, :, :])
                A = self.offsets[tuple(diff[..., i] for i in range(d.dim))]
            self._dense = self.scale * A
        return self._dense

    def solve(self, rhs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        n = self.domain.size
        if n <= DENSE_LIMIT:
            if self._chol is None:
                self._chol = linalg.cho_factor(self.to_dense())
            return linalg.cho_solve(self._chol, rhs)
        A = LinearOperator((n, n), matvec=self.matvec)
        P = LinearOperator((n, n), matvec=self.precondition)
        x, info = cg(A, rhs, M=P, rtol=tol, atol=0.0, maxiter=5000)
        if info != 0:
            raise RuntimeError(f"conjugate gradients did not converge (info={info})")
        return x

    def dilated(self, factor: float) -> "FracOperator":
        """Operator on factor * Omega with the same lattice."""
        out = FracOperator.__new__(FracOperator)
        out.__dict__.update(self.__dict__)
        out.domain = self.domain.dilated(factor)
        out.scale = out.domain.h ** (-2 * self.s)
        out._chol = None
        out._dense = None
        return out


def assemble(domain: DiscreteDomain, s: float) -> FracOperator:
    return FracOperator(domain, s)


def apply(op: FracOperator, f: Field) -> Field:
    if not (f.domain is op.domain or f.domain.same_lattice(op.domain)):
        raise ValueError("field and operator live on different domains")
    return Field(op.domain, op.matvec(f.values))


def exterior_source(op: FracOperator, datum, far_factor: int = 8) -> np.ndarray:
    """Contribution at the interior nodes of a nonzero exterior datum.

    Returns sum over lattice points outside the domain of the weight times
    datum, out to far_factor times the domain, plus the continuum tail
    -C(1, s) * integral of datum(y) |x - y|^{-1-2s} beyond that.  One
    dimension only.
    """
    d = op.domain
    if d.dim != 1:
        raise NotImplementedError("exterior data are supported on one-dimensional lattices")
    K = far_factor * (d.kmax + 1)
    ks = np.arange(-K, K + 1)
    y = ks * d.h
    outside = np.abs(y) >= d.radius * (1 - 1e-12)
    vals = np.where(outside, datum(y), 0.0)
    g = lattice_weights_1d(op.s, 2 * K + 1)
    rows = d.lattice[:, 0]
    # convolution restricted to the interior rows
    conv = 4 * K + 2
    kc = _circulant_embedding(g, conv)
    full = sfft.irfft(sfft.rfft(vals, n=conv) * sfft.rfft(kc), n=conv)
    lattice_part = full[rows + K]
    C = laplacian_normalization(1, op.s)
    Y = (K + 0.5) * d.h
    x = d.nodes[:, 0]

    def tail(t):
        yy = Y / t
        jac = Y / t ** 2
        return -C * jac * (datum(yy) * np.abs(x - yy) ** (-1 - 2 * op.s)
                           + datum(-yy) * np.abs(x + yy) ** (-1 - 2 * op.s))

    tail_part = integrate.quad_vec(tail, 1e-300, 1.0, epsabs=1e-14, epsrel=1e-10)[0]
    return op.scale * lattice_part + tail_part


# ---------------------------------------------------------------- energies


def gagliardo_energy(op: FracOperator, f: Field) -> float:
    """Discrete ||f||^2: h^N <A f, f>."""
    return op.domain.integrate(op.matvec(f.values) * f.values)


def energy_F(op: FracOperator, f: Field, e: Exponents) -> float:
    """Supercritical functional, invariant under f -> t^{2s/(p-1)} f(t x)."""
    d = op.domain
    a = np.abs(f.values)
    mass = d.integrate(a ** (e.p + 1))
    if mass <= 0:
        raise ValueError("field has zero p+1 integral")
    return (0.5 * gagliardo_energy(op, f) / mass
            + d.integrate(a ** (e.q + 1)) / ((e.q + 1) * mass ** e.l_exponent))


def energy_F_hat(op: FracOperator, f: Field, e: Exponents) -> float:
    """Energy on the constraint manifold: 1/2 ||f||^2 + int |f|^{q+1} / (q+1)."""
    return 0.5 * gagliardo_energy(op, f) + op.domain.integrate(np.abs(f.values) ** (e.q + 1)) / (e.q + 1)


def energy_S(op: FracOperator, f: Field, e: Exponents) -> float:
    """Critical Rayleigh quotient ||f||^2 / (int |f|^{p+1})^{2/(p+1)}."""
    mass = op.domain.integrate(np.abs(f.values) ** (e.p + 1))
    if mass <= 0:
        raise ValueError("Rayleigh quotient of the zero field")
    return gagliardo_energy(op, f) / mass ** (2 / (e.p + 1))


def bubble_rayleigh_quotient(e: Exponents, h: float, half_width: float = 64.0, far_factor: int = 8,
                             perturbation: np.ndarray | None = None) -> float:
    """Critical Rayleigh quotient of the sampled standard bubble on the line.

    The operator acts on the bubble everywhere (box plus exterior datum);
    beyond the box the pairing uses U (-Delta)^s U = U^{2*} in closed form.
    An optional perturbation lives on the box nodes (zero outside).
    """
    from . import bubble  # local import: bubble does not depend on fracop

    if e.N != 1:
        raise NotImplementedError("one-dimensional lattices only")
    dom = DiscreteDomain("box", h, half_width, 1)
    op = assemble(dom, e.s)
    prof = bubble.BubbleProfile.standard(e)
    U = lambda x: bubble.eval_bubble(prof, np.asarray(x, dtype=float))
    u = U(dom.nodes[:, 0])
    if perturbation is not None:
        u = u + perturbation
    AU = op.matvec(u) + exterior_source(op, U, far_factor)
    edge = (dom.kmax + 0.5) * h
    tail = 2 * integrate.quad(lambda x: float(U(x)) ** e.critical_power, edge, np.inf,
                              epsabs=0, epsrel=1e-12, limit=200)[0]
    # exterior rows see the box values through the symmetric weights; for the
    # unperturbed bubble that pairing is the closed-form tail, the
    # perturbation adds <A_ext phi, U> = <phi, ext source> once more
    num = dom.integrate(u * AU) + tail
    if perturbation is not None:
        num += dom.integrate(perturbation * exterior_source(op, U, far_factor))
    den = dom.integrate(np.abs(u) ** e.critical_power) + tail
    return num / den ** (2 / e.critical_power)
