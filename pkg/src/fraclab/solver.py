"""Energy minimization on the constraint manifold int w^{p+1} = 1, the
transformations back to solutions on the original domain, and symmetric
eigenproblems (first Dirichlet eigenpair, linearization at the bubble)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, gmres

from . import bubble
from .fracop import DiscreteDomain, FracOperator, Field, assemble
from .special import Exponents, bubble_amplitude


# Newton systems change every step; beyond this size Krylov solves win.
NEWTON_DENSE_LIMIT = 1024


class ConvergenceError(RuntimeError):
    """Raised when an iteration stops short of its tolerance; keeps the last iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


@dataclass
class ManifoldProblem:
    """Minimize 1/2 ||w||^2 + int w^{q+1}/(q+1) over int w^{p+1} = 1 on the
    dilated domain eps^{-beta} Omega, beta = (p-1)/(2s(q-p))."""

    op: FracOperator
    e: Exponents
    eps: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        self.scaled_op = self.op.dilated(self.dilation) if self.dilation != 1.0 else self.op

    @property
    def dilation(self) -> float:
        return self.eps ** (-self.e.dilation_exponent)

    @property
    def cell(self) -> float:
        return self.scaled_op.domain.h ** self.scaled_op.domain.dim


@dataclass
class SolveResult:
    w: Field
    lam: float
    energy: float
    iterations: int
    residual: float
    energy_history: list = field(default_factory=list)
    v: Field | None = None
    u: Field | None = None
    eps_effective: float | None = None


def project(w: np.ndarray, cell: float, p: float) -> np.ndarray:
    """Clip negatives and rescale so that cell * sum w^{p+1} = 1."""
    w = np.maximum(w, 0.0)
    mass = cell * np.sum(w ** (p + 1))
    if not mass > 0:
        raise ValueError("field has zero constraint integral")
    return w / mass ** (1 / (p + 1))


def bubble_init(prob: ManifoldProblem) -> np.ndarray:
    """Sampled bubble centred at 0 with unit peak, i.e. the profile Z."""
    return bubble.eval_limit_profile(prob.e, prob.scaled_op.domain.nodes)


def _multiplier(Aw, w, cell, q):
    return cell * (w @ Aw) + cell * np.sum(w ** (q + 1))


def minimize_manifold(prob: ManifoldProblem, init: Field | np.ndarray | None = None,
                      tol: float = 1e-7, max_iter: int = 50000) -> SolveResult:
    """Projected descent with Newton acceleration.

    Each step is either a Newton step on the bordered Euler-Lagrange system
    (tried once the relative residual is below 1e-2, kept only if the energy
    does not increase) or a preconditioned gradient step with halving
    backtracking until the energy decreases.  Iterates are clipped at zero
    and re-projected, so accepted energies never increase.
    """
    e, op = prob.e, prob.scaled_op
    p, q, cell = e.p, e.q, prob.cell
    n = op.domain.size
    if init is None:
        w0 = bubble_init(prob)
    else:
        w0 = init.values if isinstance(init, Field) else np.asarray(init, dtype=float)
    w = project(w0, cell, p)

    def energy(v, Av=None):
        Av = op.matvec(v) if Av is None else Av
        return cell * (0.5 * v @ Av + np.sum(v ** (q + 1)) / (q + 1))

    Aw = op.matvec(w)
    E = energy(w, Aw)
    history = [E]
    dense = op.to_dense() if n <= NEWTON_DENSE_LIMIT else None
    precond = LinearOperator((n, n), matvec=op.precondition)
    res = np.inf
    for it in range(max_iter):
        lam = _multiplier(Aw, w, cell, q)
        r = Aw + w ** q - lam * w ** p
        res = float(np.max(np.abs(r)))
        if res <= tol:
            break
        rel = res / max(lam * float(np.max(w)) ** p, 1e-300)
        accepted = False
        if rel < 1e-2:
            diag = q * w ** (q - 1) - lam * p * w ** (p - 1)
            wp = w ** p
            try:
                if dense is not None:
                    J = dense + np.diag(diag)
                    sol = linalg.solve(J, np.c_[-r, wp], assume_a="sym")
                    a, b = sol[:, 0], sol[:, 1]
                else:
                    J = LinearOperator((n, n), matvec=lambda v: op.matvec(v) + diag * v)
                    a, _ = gmres(J, -r, M=precond, rtol=1e-11, restart=200, maxiter=5)
                    b, _ = gmres(J, wp, M=precond, rtol=1e-11, restart=200, maxiter=5)
                # linearized constraint: <w^p, a + t b> = 0
                step = a - (wp @ a) / (wp @ b) * b
                trial = project(w + step, cell, p)
                A_trial = op.matvec(trial)
                E_trial = energy(trial, A_trial)
                if np.isfinite(E_trial) and E_trial <= E + 1e-13 * abs(E):
                    w, Aw, E, accepted = trial, A_trial, E_trial, True
            except (linalg.LinAlgError, ValueError, ZeroDivisionError):
                accepted = False
        if not accepted:
            direction = -op.precondition(r)
            t = 1.0
            while True:
                trial = project(w + t * direction, cell, p)
                A_trial = op.matvec(trial)
                E_trial = energy(trial, A_trial)
                if E_trial < E:
                    w, Aw, E = trial, A_trial, E_trial
                    break
                t *= 0.5
                if t < 1e-14:
                    raise ConvergenceError(
                        f"line search stalled at residual {res:.3e}",
                        last=SolveResult(Field(op.domain, w), lam, E, it, res, history),
                    )
        history.append(E)
    else:
        lam = _multiplier(Aw, w, cell, q)
        raise ConvergenceError(
            f"no convergence in {max_iter} iterations (residual {res:.3e})",
            last=SolveResult(Field(op.domain, w), lam, E, max_iter, res, history),
        )
    lam = _multiplier(Aw, w, cell, q)
    result = SolveResult(Field(op.domain, w), lam, E, it, res, history)
    transform_solutions(result, prob)
    return result


def transform_solutions(res: SolveResult, prob: ManifoldProblem) -> tuple[Field, Field]:
    """v = eps^{-1/(q-p)} w(eps^{-beta} x) and u = lambda^{1/(p-1)} v on the
    original nodes; u solves the problem with eps' = eps lambda^{-(q-1)/(p-1)}."""
    e = prob.e
    v = prob.eps ** (-1 / (e.q - e.p)) * res.w.values
    u = res.lam ** (1 / (e.p - 1)) * v
    res.v = Field(prob.op.domain, v)
    res.u = Field(prob.op.domain, u)
    res.eps_effective = prob.eps * res.lam ** (-(e.q - 1) / (e.p - 1))
    return res.v, res.u


def equation_residual(op: FracOperator, u: np.ndarray, coeff: float, eps: float, e: Exponents) -> float:
    """sup |(-Delta)^s u - coeff u^p + eps u^q|."""
    return float(np.max(np.abs(op.matvec(u) - coeff * u ** e.p + eps * u ** e.q)))


def first_eigenpair(op: FracOperator, tol: float = 1e-11, max_iter: int = 500) -> tuple[float, Field]:
    """Smallest eigenvalue by inverse iteration; eigenfield positive, unit l2 norm.

    Stops when ||A phi - lambda phi|| <= tol * lambda.
    """
    n = op.domain.size
    x = np.ones(n) / np.sqrt(n)
    for _ in range(max_iter):
        y = op.solve(x)
        x = y / np.linalg.norm(y)
        Ax = op.matvec(x)
        lam = float(x @ Ax)
        if np.linalg.norm(Ax - lam * x) <= tol * lam:
            break
    else:
        raise ConvergenceError("inverse iteration stagnated")
    if x.sum() < 0:
        x = -x
    return lam, Field(op.domain, x)


@dataclass
class KernelSpectrum:
    eigenvalues: np.ndarray  # ascending, lowest part of the spectrum
    near_zero: list  # indices into eigenvalues
    threshold: float
    gap: float
    cosines: np.ndarray  # |cos| of each mode against the span of near-zero eigenvectors
    boundary_amplitude: np.ndarray  # max |mode| on the outer node layer over max |mode|

    @property
    def near_zero_count(self) -> int:
        return len(self.near_zero)


def linearized_kernel(e: Exponents, half_width: float, h: float, zero_gap: float = 0.1,
                      n_eigs: int = 8, max_boundary_amplitude: float = 0.5) -> KernelSpectrum:
    """Spectrum of the lattice operator minus p Z^{p-1} on a centred box.

    The N+1 eigenvalues closest to zero are the kernel candidates; the gap is
    the distance from the farthest of them to the next eigenvalue above, and
    eigenvalues with |lambda| below zero_gap * gap are counted as near zero.
    """
    if not e.is_critical:
        raise ValueError("the linearization at the bubble needs the critical exponent")
    dom = DiscreteDomain("box", h, half_width, e.N)
    op = assemble(dom, e.s)
    Z = bubble.eval_limit_profile(e, dom.nodes)
    L = op.to_dense() - np.diag(e.p * Z ** (e.p - 1))
    vals, vecs = linalg.eigh(L, subset_by_index=[0, min(n_eigs, dom.size) - 1])
    k = e.N + 1
    cand = sorted(np.argsort(np.abs(vals))[:k])
    top = max(vals[cand])
    above = vals[vals > top]
    gap = float(above[0] - top) if above.size else np.inf
    thr = zero_gap * gap
    near = [int(i) for i in range(len(vals)) if abs(vals[i]) < thr]
    span = vecs[:, cand]
    cosines = []
    for mode in bubble.kernel_modes(e):
        psi = bubble.eval_kernel_mode(mode, e, dom.nodes)
        psi = psi / np.linalg.norm(psi)
        cosines.append(float(np.linalg.norm(span.T @ psi)))
    dist = dom.distance_to_boundary()
    outer = dist <= dist.min() + 0.5 * h
    amp = np.array([float(np.max(np.abs(vecs[outer, i])) / np.max(np.abs(vecs[:, i]))) for i in cand])
    if np.any(amp > max_boundary_amplitude):
        raise ConvergenceError(
            f"kernel candidates reach {amp.max():.3f} of their peak on the boundary; enlarge the box")
    return KernelSpectrum(vals, near, thr, gap, np.array(cosines), amp)


def dilation_energies(e: Exponents, radii, h: float, tol: float = 1e-9) -> list[float]:
    """Minimal manifold energy on radius * (-1, 1) for each radius, same h."""
    if e.N != 1:
        raise NotImplementedError("interval families only")
    out = []
    prev = None
    for rho in radii:
        dom = DiscreteDomain("interval", h, rho)
        prob = ManifoldProblem(assemble(dom, e.s), e, 1.0)
        init = None
        if prev is not None:
            # warm start: previous minimizer extended by zero
            init = np.interp(dom.nodes[:, 0], prev.domain.nodes[:, 0], prev.values, left=0.0, right=0.0)
            init = np.maximum(init, 1e-3 * bubble.eval_limit_profile(e, dom.nodes))
        res = minimize_manifold(prob, init, tol=tol)
        out.append(res.energy)
        prev = res.w
    return out
