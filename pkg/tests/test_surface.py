import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from dewet.errors import DegenerateSlope
from dewet.profile import Profile, cosine_bump, cosine_bump_exact, triangle
from dewet.surface import geometry, length_energy, surface_energy, surface_gradient, surface_hessian

from conftest import STD, random_profile


def _flat_fd(fun, p, eps=1e-6):
    z = np.concatenate(([p.alpha, p.beta], p.h[1:-1]))
    mk = lambda w: Profile(w[0], w[1], np.concatenate(([0.0], w[2:], [0.0])))  # noqa: E731
    out = np.empty(len(z))
    for i in range(len(z)):
        e = np.zeros(len(z))
        e[i] = eps
        out[i] = (fun(mk(z + e)) - fun(mk(z - e))) / (2 * eps)
    return out


@given(st.integers(0, 10_000))
def test_energy_lower_bound(seed):
    p = random_profile(np.random.default_rng(seed), 31)
    assert surface_energy(p, STD) >= (STD.gamma - STD.gamma0) * p.width >= 0
    assert length_energy(p, STD) >= (STD.gamma - STD.gamma0) * p.width


@given(st.integers(0, 10_000), st.floats(-5, 5))
def test_mirror_and_translation_invariance(seed, c):
    p = random_profile(np.random.default_rng(seed), 25)
    E = surface_energy(p, STD)
    assert surface_energy(p.mirrored(), STD) == pytest.approx(E, rel=1e-13)
    assert surface_energy(p.shifted(c), STD) == pytest.approx(E, rel=1e-12)


def test_matches_quadrature_oracle():
    w = 2.0
    a, _ = cosine_bump_exact(1.0, w)
    k = math.pi / w

    def density(x):
        hp = -a * k * math.sin(k * x)
        hpp = -a * k * k * math.cos(k * x)
        J2 = 1 + hp * hp
        return STD.gamma * math.sqrt(J2) + 0.5 * STD.nu0 * hpp * hpp / J2**2.5

    exact = quad(density, -1, 1, epsabs=1e-15, epsrel=1e-13, limit=200)[0] - STD.gamma0 * w
    E1 = surface_energy(cosine_bump(401, 1.0, w), STD)
    E2 = surface_energy(cosine_bump(801, 1.0, w), STD)
    # second-order discretization: the Richardson combination removes the leading error
    assert (4 * E2 - E1) / 3 == pytest.approx(exact, rel=1e-8)
    assert abs(E2 - exact) < abs(E1 - exact) / 3.5


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_finite_differences(seed):
    p = random_profile(np.random.default_rng(seed), 41)
    g = surface_gradient(p, STD).flat()
    fd = _flat_fd(lambda q: surface_energy(q, STD), p)
    assert np.max(np.abs(g - fd)) <= 1e-4 * np.max(np.abs(fd))


def test_symmetric_gradient():
    p = cosine_bump(51, 1.0, 2.0)
    g = surface_gradient(p, STD)
    assert g.alpha == pytest.approx(-g.beta, rel=1e-12)
    assert np.allclose(g.h, g.h[::-1], rtol=1e-11, atol=1e-12)


def test_curvature_term_linear_in_nu():
    p = random_profile(np.random.default_rng(7), 31)
    E0 = surface_energy(p, STD.replace(nu0=0.0))
    E1 = surface_energy(p, STD.replace(nu0=1.0))
    assert surface_energy(p, STD) == pytest.approx(E0 + STD.nu0 * (E1 - E0), rel=1e-14)
    assert E0 == pytest.approx(length_energy(p, STD), rel=1e-15)
    g0 = surface_gradient(p, STD.replace(nu0=0.0)).flat()
    g1 = surface_gradient(p, STD.replace(nu0=1.0)).flat()
    assert np.allclose(surface_gradient(p, STD).flat(), g0 + STD.nu0 * (g1 - g0), rtol=1e-12, atol=1e-12)


def test_degenerate_slope():
    x = np.linspace(0, 1, 21)
    h = np.sin(np.pi * x)
    # the one-sided stencil (-3 h0 + 4 h1 - h2) / 2dx vanishes when h1 = h2 / 4
    h[1], h[-2] = h[2] / 4, h[-3] / 4
    with pytest.raises(DegenerateSlope):
        surface_gradient(Profile(0.0, 1.0, h), STD)


def test_hessian_matches_gradient_differences():
    p = random_profile(np.random.default_rng(4), 25)
    H = surface_hessian(p, STD)
    z = np.concatenate(([p.alpha, p.beta], p.h[1:-1]))
    mk = lambda w: Profile(w[0], w[1], np.concatenate(([0.0], w[2:], [0.0])))  # noqa: E731
    eps = 1e-6
    fd = np.column_stack([
        (surface_gradient(mk(z + e), STD).flat() - surface_gradient(mk(z - e), STD).flat()) / (2 * eps)
        for e in eps * np.eye(len(z))
    ])
    assert np.max(np.abs(H - fd)) <= 1e-5 * np.max(np.abs(fd))
    assert np.allclose(H, H.T)


def test_geometry_invariants():
    p = random_profile(np.random.default_rng(9), 41)
    g = geometry(p)
    assert g.s[0] == 0 and np.all(np.diff(g.s) > 0)
    assert np.all(g.J >= 1)
    hp = np.gradient(p.h, p.dx)  # only used for the sign of the contact angles
    assert g.theta_alpha > 0 and g.theta_beta < 0 and hp[0] > 0
    assert g.to_csv().splitlines()[0] == "x,s,J,kappa"


def test_straight_pieces_have_zero_curvature():
    p = triangle(41, 1.0, 1.5)
    k = geometry(p).kappa
    mid = p.n // 2
    assert np.allclose(np.delete(k, [mid - 1, mid, mid + 1]), 0.0, atol=1e-10)


def test_triangle_arclength():
    slope = 1.5
    p = triangle(41, 1.0, slope)
    half = p.width / 2
    assert geometry(p).s[-1] == pytest.approx(2 * math.sqrt(1 + slope**2) * half, rel=1e-14)


def test_circle_curvature_second_order():
    R, c = 1.5, 1.0
    errs = []
    for n in (51, 101, 201):
        a = math.sqrt(R * R - c * c)
        x = np.linspace(-a, a, n)
        h = np.sqrt(R * R - x * x) - c
        h[0] = h[-1] = 0.0
        k = geometry(Profile(-a, a, h)).kappa
        errs.append(np.abs(k[1:-1] + 1 / R).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
