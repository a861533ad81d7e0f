import math

import numpy as np
import pytest
from scipy import integrate

from fraclab import greens
from fraclab.fracop import DiscreteDomain, assemble
from fraclab.greens import GreenKernelBall


def random_ball_points(rng, n, N, radius=1.0):
    r = radius * rng.uniform(0, 1, n) ** (1 / N)
    if N == 1:
        return r * rng.choice([-1, 1], n)
    th = rng.uniform(0, 2 * np.pi, n)
    return np.c_[r * np.cos(th), r * np.sin(th)]


def richardson_quotient(k, z, y, d0=1e-3):
    """Boundary limit of G(x, y)/d^s along the inward normal at z, by
    Richardson extrapolation in d (expansion Q (1 + a d + b d^2 + ...))."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = z / np.linalg.norm(z)
    vals = []
    for d in (d0, d0 / 2, d0 / 4):
        x = z - d * n
        vals.append(float(greens.green_ball(x if k.N > 1 else x[0], y, k)) / d ** k.s)
    a, b, c = vals
    r1, r2 = 2 * b - a, 2 * c - b
    return (4 * r2 - r1) / 3


@pytest.mark.parametrize("N, s, radius", [(1, 0.25, 1.0), (1, 0.4, 2.0), (2, 0.5, 1.0), (2, 0.3, 1.5)])
def test_green_symmetry_and_positivity(N, s, radius, rng):
    k = GreenKernelBall(N, s, radius)
    x = random_ball_points(rng, 100, N, radius * 0.999)
    y = random_ball_points(rng, 100, N, radius * 0.999)
    gxy, gyx = greens.green_ball(x, y, k), greens.green_ball(y, x, k)
    assert np.all(gxy > 0)
    np.testing.assert_allclose(gxy, gyx, rtol=1e-12)


def test_green_vanishes_toward_boundary():
    k = GreenKernelBall(2, 0.5)
    t = np.linspace(0.5, 0.99999, 200)
    vals = greens.green_ball(np.c_[t * 0.6, t * 0.8], np.array([0.1, -0.2]), k)
    assert np.all(np.diff(vals) < 0)
    assert vals[-1] < 1e-2 * vals[0]


def test_green_plus_regular_part_is_fundamental(rng):
    for N, s in [(1, 0.25), (2, 0.5)]:
        k = GreenKernelBall(N, s)
        x, y = random_ball_points(rng, 50, N, 0.99), random_ball_points(rng, 50, N, 0.99)
        dist = np.abs(x - y) if N == 1 else np.linalg.norm(x - y, axis=1)
        total = greens.green_ball(x, y, k) + greens.regular_part(x, y, k)
        np.testing.assert_allclose(total, k.fundamental_coeff * dist ** (2 * s - N), rtol=1e-12)
    assert k.kappa * k.full_beta == pytest.approx(k.fundamental_coeff, rel=1e-14)


def test_regular_part_continuous_on_diagonal():
    k = GreenKernelBall(1, 0.25, 1.3)
    for x in (0.0, 0.4, -0.9):
        near = float(greens.regular_part(x, x + 1e-8, k))
        assert near == pytest.approx(float(greens.robin_function(x, k)), rel=1e-6)


def test_green_errors():
    k = GreenKernelBall(1, 0.25)
    with pytest.raises(ValueError):
        greens.green_ball(0.2, 0.2, k)
    with pytest.raises(ValueError):
        greens.green_ball(0.2, 1.5, k)
    with pytest.raises(ValueError):
        greens.robin_function(1.0, k)
    with pytest.raises(ValueError):
        greens.boundary_r_constant([1.0], k)
    with pytest.raises(ValueError):
        GreenKernelBall(1, 0.5)


@pytest.mark.parametrize("s", [0.25, 0.4])
def test_torsion_oracle(s):
    k = GreenKernelBall(1, s)
    for x in np.linspace(-0.9, 0.9, 7):
        u = greens.green_potential(lambda y: 1.0, x, k)
        assert u == pytest.approx(float(greens.torsion_function(x, k)), rel=1e-2)


def test_robin_radial_symmetry(rng):
    k = GreenKernelBall(2, 0.5)
    base = np.array([0.37, 0.21])
    r0 = float(greens.robin_function(base, k))
    for th in rng.uniform(0, 2 * np.pi, 50):
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert float(greens.robin_function(R @ base, k)) == pytest.approx(r0, rel=1e-13)


@pytest.mark.parametrize("N, s", [(1, 0.25), (2, 0.5), (2, 0.8)])
def test_robin_growth_toward_boundary(N, s):
    k = GreenKernelBall(N, s)
    t = np.linspace(0, 0.99, 100)
    pts = t[:, None] * np.eye(N)[0]
    vals = greens.robin_function(pts if N > 1 else t, k)
    assert np.all(np.diff(vals) > 0)
    at = lambda d: float(greens.robin_function((1 - d) * np.eye(N)[0] if N > 1 else 1 - d, k))
    ratio = at(0.1) / at(0.2)
    assert abs(ratio / 2 ** (N - 2 * s) - 1) <= 0.2


def test_r_constant_unit_interval_center():
    k = GreenKernelBall(1, 0.25)
    left = float(greens.boundary_quotient(-1.0, 0.0, k))
    right = float(greens.boundary_quotient(1.0, 0.0, k))
    assert left == right
    R = greens.boundary_r_constant([0.0], k)
    Q = richardson_quotient(k, 1.0, 0.0)
    assert R == pytest.approx(2 * Q ** 2, rel=1e-6)
    assert R == pytest.approx(0.1309515611632357, rel=1e-13)


def test_boundary_quotient_against_extrapolation(rng):
    for N, s, radius in [(1, 0.4, 2.0), (2, 0.5, 1.0), (2, 0.3, 1.5)]:
        k = GreenKernelBall(N, s, radius)
        for _ in range(5):
            y = random_ball_points(rng, 1, N, 0.8 * radius)[0]
            th = rng.uniform(0, 2 * np.pi)
            z = radius * (np.array([math.cos(th), math.sin(th)]) if N == 2 else np.sign(math.cos(th)))
            exact = float(greens.boundary_quotient(z, y, k))
            assert exact == pytest.approx(richardson_quotient(k, z, y, d0=1e-3 * radius), rel=1e-5)


def test_r_constant_2d_against_angle_quadrature(rng):
    k = GreenKernelBall(2, 0.5, 1.5)
    x0 = np.array([0.3, -0.5])

    def integrand(phi):
        z = 1.5 * np.array([math.cos(phi), math.sin(phi)])
        Q = richardson_quotient(k, z, x0, d0=1e-3)
        return Q ** 2 * (z - x0) @ (z / 1.5) * 1.5

    oracle = integrate.quad(integrand, 0, 2 * np.pi, epsrel=1e-9, limit=200)[0]
    assert greens.boundary_r_constant(x0, k) == pytest.approx(oracle, rel=1e-5)


def test_r_constant_positive_for_interior_points(rng):
    k = GreenKernelBall(2, 0.5)
    for x0 in random_ball_points(rng, 20, 2, 0.95):
        assert greens.boundary_r_constant(x0, k) > 0
    k1 = GreenKernelBall(1, 0.25)
    for x0 in rng.uniform(-0.95, 0.95, 20):
        assert greens.boundary_r_constant([x0], k1) > 0


@pytest.mark.parametrize("N, s", [(1, 0.25), (2, 0.5)])
def test_green_bounds_single_constant(N, s, rng):
    k = GreenKernelBall(N, s)
    x = random_ball_points(rng, 10000, N)
    y = random_ball_points(rng, 10000, N)
    # stress pairs: close to each other and to the boundary
    x[:100] = x[:100] / np.max(np.abs(x[:100])) * 0.9999 if N == 1 else x[:100]
    y[:100] = x[:100] * (1 - 1e-4)
    a, b = greens.green_bound_ratios(x, y, k)
    c1, c2 = greens.green_bound_constants(N, s)
    assert a.max() <= c1 and b.max() <= c2
    assert a.max() >= 0.5 * c1  # the first constant is attained on the diagonal


def test_green_bounds_scale_invariant(rng):
    for radius in (0.5, 3.0):
        k = GreenKernelBall(2, 0.5, radius)
        x = random_ball_points(rng, 200, 2, radius)
        y = random_ball_points(rng, 200, 2, radius)
        a, b = greens.green_bound_ratios(x, y, k)
        a1, b1 = greens.green_bound_ratios(x / radius, y / radius, GreenKernelBall(2, 0.5))
        np.testing.assert_allclose(a, a1, rtol=1e-11)
        np.testing.assert_allclose(b, b1, rtol=1e-11)


def _reproduced(h, s=0.3):
    k = GreenKernelBall(1, s)
    op = assemble(DiscreteDomain("interval", h, 1.0), s)
    f = lambda y: max(0.0, 1 - (y / 0.5) ** 2) ** 4
    x = op.domain.nodes[:, 0]
    u = np.array([greens.green_potential(f, xi, k, points=[-0.5, 0.5]) for xi in x])
    fx = np.array([f(xi) for xi in x])
    return x, op.matvec(u) - fx, np.max(fx)


def test_reproducing_property():
    """Green potential of a smooth bump, fed through the lattice operator,
    returns the bump to 3% in sup norm over all nodes."""
    _, r, fmax = _reproduced(1 / 128)
    rel = float(np.max(np.abs(r)) / fmax)
    assert rel <= 0.03, f"relative sup defect {rel:.4f} at node {int(np.argmax(np.abs(r)))}"


def test_reproducing_property_interior():
    """Away from the boundary layer the defect is small and shrinks with h."""
    errs = []
    for h in (1 / 64, 1 / 128):
        x, r, fmax = _reproduced(h)
        inner = np.abs(x) <= 0.9
        errs.append(np.max(np.abs(r[inner])) / fmax)
    assert errs[1] < errs[0] <= 0.03
