import dataclasses
import json
import math

import numpy as np
import pytest

import dewet.diagnostics as diag
from dewet.diagnostics import (
    bound_monitors,
    bump_family,
    chemical_potential,
    diagnose,
    endpoint_curvature,
    euler_lagrange_residual,
    normal_velocity_residual,
    youngs_law_residual,
)
from dewet.errors import GridTooCoarse
from dewet.profile import Profile, cosine_bump, triangle
from dewet.stepper import StepOptions, initial_state, minimize_increment, run_minimizing_movements

from conftest import STD


def circle_cap(n, R=1.0, a=0.6):
    x = np.linspace(-a, a, n)
    h = np.sqrt(R * R - x * x) - math.sqrt(R * R - a * a)
    h[0] = h[-1] = 0.0
    return Profile(-a, a, h)


# chemical potential


def test_circle_chemical_potential_is_constant_to_second_order():
    par = STD.replace(e0=0.0, nu0=0.0)
    errs = []
    for n in (101, 201, 401):
        _, zeta = chemical_potential(circle_cap(n), par)
        # the cap is convex from above, so kappa = h''/J^3 = -1/R and -gamma kappa = +gamma/R
        errs.append(np.abs(zeta[2:-2] - par.gamma / 1.0).max())
    assert errs[-1] < 1e-4
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8), rates


def test_circle_with_bending_term():
    par = STD.replace(e0=0.0)
    _, zeta = chemical_potential(circle_cap(401), par)
    # kappa_ss = 0 on a circle, so zeta = gamma/R + nu0 (-1/R)^3 / 2
    assert np.abs(zeta[2:-2] - (par.gamma - 0.5 * par.nu0)).max() < 1e-4


def test_flat_segment_has_zero_chemical_potential():
    n = 41
    x = np.linspace(-1, 1, n)
    h = np.minimum(1.0, 2.0 * np.minimum(x + 1, 1 - x))
    h[0] = h[-1] = 0.0
    s, zeta = chemical_potential(Profile(-1.0, 1.0, h), STD)
    flat = np.abs(x[1:-1]) < 0.5 - 2.5 * 0.05
    assert flat.sum() > 10
    assert np.all(zeta[flat] == 0.0)


def test_chemical_potential_needs_five_nodes():
    with pytest.raises(GridTooCoarse):
        chemical_potential(Profile(-1.0, 1.0, np.array([0.0, 0.5, 0.5, 0.0])), STD)


def test_symmetric_state(short_traj):
    st = short_traj.steps[-1]
    s, zeta = chemical_potential(st, STD)
    np.testing.assert_allclose(zeta, zeta[::-1], atol=1e-8)
    np.testing.assert_allclose(s - s[0], (s[-1] - s[::-1]), atol=1e-12)
    ha, hb = endpoint_curvature(st)
    assert abs(abs(ha) - abs(hb)) < 1e-8
    for i in range(1, len(short_traj.steps)):
        left, right = youngs_law_residual(short_traj.steps[i], short_traj.steps[i - 1], short_traj.tau, STD)
        assert abs(left + right) < 1e-8


# Young's law and endpoint curvature


def test_young_static_balance():
    # cos(theta) = 1/J = gamma0/gamma at slope sqrt(3); straight flanks make the curvature term vanish
    st = initial_state(triangle(41, STD.A0, math.sqrt(3.0)), STD, 3)
    left, right = youngs_law_residual(st, st, 0.02, STD)
    assert abs(left) < 1e-12 and abs(right) < 1e-12
    st = initial_state(triangle(41, STD.A0, 1.0), STD, 3)
    left, right = youngs_law_residual(st, st, 0.02, STD)
    imbalance = STD.gamma / math.sqrt(2.0) - STD.gamma0
    assert left == pytest.approx(-imbalance, abs=1e-12)
    assert right == pytest.approx(imbalance, abs=1e-12)


def test_endpoint_curvature_of_shape_with_flat_ends():
    # h = x - 2x^3 + x^4 has h''(0) = h''(1) = 0; the one-sided stencil is exact for cubics
    errs = []
    for n in (21, 41, 81):
        x = np.linspace(0.0, 1.0, n)
        h = x - 2 * x**3 + x**4
        h[-1] = 0.0
        err = np.abs(endpoint_curvature(Profile(0.0, 1.0, h))).max()
        # leading error of the 4-point one-sided stencil: (11/12) d^2 h'''' = 22 d^2
        assert err <= 22 * (1.0 / (n - 1)) ** 2 * (1 + 1e-6)
        errs.append(err)
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5
    cubic = Profile(0.0, 1.0, (lambda x: x - x**3)(np.linspace(0.0, 1.0, 21)))
    assert endpoint_curvature(cubic)[0] == pytest.approx(0.0, abs=1e-10)
    assert endpoint_curvature(cubic)[1] == pytest.approx(-6.0, rel=1e-10)


# Euler-Lagrange residual


def test_constant_shift_of_wbar_absorbed_by_multiplier(short_traj, monkeypatch):
    st, pv = short_traj.steps[1], short_traj.steps[0]
    base = euler_lagrange_residual(st, pv, short_traj.tau, STD)
    orig = diag.boundary_energy_trace
    monkeypatch.setattr(diag, "boundary_energy_trace", lambda *a: orig(*a) + 0.37)
    shifted = euler_lagrange_residual(st, pv, short_traj.tau, STD)
    assert shifted.m == pytest.approx(base.m + 0.37, abs=1e-12)
    for k in ("l1", "l2", "linf"):
        assert getattr(shifted, k) == pytest.approx(getattr(base, k), abs=1e-12)


def test_residual_excludes_nodes_near_previous_contacts(short_traj):
    st, pv = short_traj.steps[1], short_traj.steps[0]
    mask = diag.el_mask(st.profile, pv.profile)
    x = st.profile.x
    for c in (pv.profile.alpha, pv.profile.beta):
        assert not mask[np.abs(x - c) < 2 * st.profile.dx * (1 - 1e-9)].any()
    assert euler_lagrange_residual(st, pv, short_traj.tau, STD).nodes == mask.sum()


def test_weak_elasticity_perturbs_residual_quadratically():
    p = cosine_bump(81, STD.A0, 2.0)
    opts = StepOptions(ny=3)

    def residual(e0):
        par = STD.replace(e0=e0)
        s0 = initial_state(p, par, 3)
        return euler_lagrange_residual(minimize_increment(s0, 0.02, par, opts).state, s0, 0.02, par).l2

    r0 = residual(0.0)
    d3 = abs(residual(1e-3) - r0)
    d6 = abs(residual(1e-6) - r0)
    assert d3 < 10 * (1e-3) ** 2
    assert d6 < 1e-10


# normal velocity


def test_bump_family_supports_are_inside():
    c, r = bump_family(-1.0, 3.0)
    assert len(c) == diag.N_TEST
    assert c.min() - r > -1.0 and c.max() + r < 3.0
    x = np.linspace(-5, 5, 101)
    phi, dphi, d2phi = diag._bump(x, 10.0, 0.5)
    assert not phi.any() and not dphi.any() and not d2phi.any()


def test_bump_derivatives():
    x = np.linspace(-0.5, 0.5, 2001)
    phi, dphi, d2phi = diag._bump(x, 0.1, 0.3)
    np.testing.assert_allclose(np.gradient(phi, x), dphi, atol=1e-4)
    np.testing.assert_allclose(np.gradient(dphi, x), d2phi, atol=2e-2)


def test_normal_velocity_residual_at_equilibrium():
    # with e0=0 the island relaxes to a static cap by t ~ 5; what is left is the
    # discretization error of zeta, which falls below 1e-6 of the pairing size at n=401
    tr = run_minimizing_movements(cosine_bump(401, STD.A0, 2.0), 2, 10.0, STD.replace(e0=0.0), StepOptions(ny=3))
    r, scale = normal_velocity_residual(tr, len(tr.steps) - 1)
    assert r < 1e-6 * scale


def test_normal_velocity_residual_needs_a_step(short_traj):
    with pytest.raises(ValueError):
        normal_velocity_residual(short_traj, 0)


# bounds and report


def test_bounds_hold_on_completed_run(short_traj):
    bounds = bound_monitors(short_traj)
    assert set(bounds) >= {"M0_check", "holder_alpha", "holder_h", "h2_bound", "mass_rate", "dissipation"}
    for name, chk in bounds.items():
        assert chk.passed, name
        assert chk.passed == (chk.worst_ratio <= 1 + diag.BOUND_RTOL)


def test_single_step_trajectory_passes():
    tr = run_minimizing_movements(cosine_bump(41, STD.A0, 2.0), 10, 0.1, STD, StepOptions(ny=2))
    assert len(tr.steps) == 2
    assert all(c.passed for c in bound_monitors(tr).values())


def test_corrupted_energy_fails_m0_check(short_traj):
    st = short_traj.steps[2]
    bad = dataclasses.replace(st, energies=dict(st.energies, surface=st.energies["surface"] + 0.1))
    steps = list(short_traj.steps)
    steps[2] = bad
    tr = dataclasses.replace(short_traj, steps=steps)
    assert not bound_monitors(tr)["M0_check"].passed
    assert bound_monitors(short_traj)["M0_check"].passed


def test_report_serializes(short_traj):
    rep = diagnose(short_traj)
    nsteps = len(short_traj.steps) - 1
    d = json.loads(rep.to_json())
    assert len(d["el_residual"]) == len(d["young_left"]) == len(d["vtilde_residual"]) == nsteps
    assert all(math.isfinite(v) for v in d["young_left"] + d["young_right"] + d["vtilde_residual"])
    assert all(b["passed"] for b in d["bounds"].values())
    lines = rep.summary_csv().strip().splitlines()
    assert lines[0].startswith("i,el_l2") and len(lines) == nsteps + 1
    assert all(math.isfinite(float(v)) for line in lines[1:] for v in line.split(","))
