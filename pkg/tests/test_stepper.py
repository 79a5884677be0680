import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import dewet.stepper as stepper
from dewet.errors import AdmissibilityError, DescentFailure, SchemeAborted
from dewet.profile import Profile, area, cosine_bump, triangle, validate_admissible
from dewet.stepper import (
    StepOptions,
    estimate_multiplier,
    initial_state,
    interpolants,
    lipschitz_minorant,
    minimize_increment,
    project,
    run_minimizing_movements,
    total_energy,
    with_options,
)

from conftest import STD, random_profile

OPTS = StepOptions(ny=3)


def test_total_energy_bookkeeping():
    p = random_profile(np.random.default_rng(0), 31)
    s0 = initial_state(p, STD, 3)
    tot, parts = total_energy(p, s0, 0.1, STD, 3)
    assert parts["transport"] == 0.0
    assert tot == pytest.approx(s0.free_energy, rel=1e-14)
    q = random_profile(np.random.default_rng(1), 31)
    tot, parts = total_energy(q, s0, 0.1, STD, 3)
    assert tot == pytest.approx(parts["surface"] + parts["elastic"] + parts["transport"], rel=1e-12)
    _, parts0 = total_energy(q, s0, 0.1, STD.replace(e0=0.0), 3)
    assert parts0["elastic"] == 0.0


@given(st.integers(0, 10_000), st.floats(0.5, 3.0))
def test_lipschitz_minorant(seed, L):
    rng = np.random.default_rng(seed)
    h = np.abs(rng.standard_normal(25))
    d = 0.1
    m = lipschitz_minorant(h, d, L)
    assert np.all(m <= h)
    assert np.max(np.abs(np.diff(m))) <= L * d * (1 + 1e-12)
    assert np.array_equal(lipschitz_minorant(m, d, L), m)


@given(st.integers(0, 10_000))
def test_projection_is_admissible_or_refused(seed):
    rng = np.random.default_rng(seed)
    p = random_profile(rng, 31)
    z = np.concatenate(([p.alpha, p.beta], p.h[1:-1]))
    z = z + 0.05 * rng.standard_normal(len(z))
    q = project(z, STD)
    if q is not None:
        assert validate_admissible(q, STD).passed


def test_step_decreases_free_energy_from_asymmetric_start():
    p = random_profile(np.random.default_rng(3), 41)
    s0 = initial_state(p, STD, 3)
    r = minimize_increment(s0, 0.02, STD, OPTS)
    assert r.state.free_energy < s0.free_energy
    assert r.state.energies["total"] <= s0.free_energy + 1e-12 * max(1, abs(s0.free_energy))
    assert validate_admissible(r.state.profile, STD).passed
    assert r.stats["converged"] and not r.stats["reverted"]


def test_symmetry_preserved_without_mismatch():
    prm = STD.replace(e0=0.0)
    traj = run_minimizing_movements(cosine_bump(41, prm.A0, 2.0), 20, 0.1, prm, OPTS)
    for s in traj.steps:
        p = s.profile
        assert abs(p.alpha + p.beta) <= 1e-8
        assert np.max(np.abs(p.h - p.h[::-1])) <= 1e-8


def test_stationary_start_is_kept():
    prm = STD.replace(e0=0.0)
    traj = run_minimizing_movements(cosine_bump(41, prm.A0, 2.0), 1, 10, prm, StepOptions(ny=2))
    last = traj.steps[-1]
    r = minimize_increment(last, 1.0, prm, StepOptions(ny=2))
    assert np.max(np.abs(r.state.profile.h - last.profile.h)) < 1e-4
    assert r.state.energies["transport"] < 1e-8


def test_zero_horizon():
    p = cosine_bump(31, 1.0, 2.0)
    traj = run_minimizing_movements(p, 10, 0.0, STD, OPTS)
    assert len(traj.steps) == 1 and traj.steps[0].profile is p
    assert traj.M0 == traj.steps[0].free_energy


def test_step_count_and_invariants(short_traj):
    assert len(short_traj.steps) - 1 == math.ceil(20 * 0.1)
    assert np.allclose(np.diff(short_traj.times), 1 / 20)
    for s in short_traj.steps:
        p = s.profile
        assert abs(area(p) - STD.A0) <= 1e-10 * STD.A0
        assert np.max(np.abs(p.slopes())) <= STD.L0
        assert p.width >= STD.min_width
        e = s.energies
        assert e["total"] == pytest.approx(e["surface"] + e["elastic"] + e["transport"], rel=1e-12)


def test_initial_slack_required():
    p = triangle(41, 1.0, STD.L0)  # slope exactly L0: no slack
    with pytest.raises(AdmissibilityError):
        run_minimizing_movements(p, 10, 0.1, STD, OPTS)
    with pytest.raises(AdmissibilityError):
        run_minimizing_movements(cosine_bump(31, 1.0, 2.0), 10, 0.1, STD.replace(gamma0=1.2), OPTS)


def test_abort_keeps_partial_trajectory(monkeypatch):
    real = stepper.minimize_increment
    calls = {"n": 0}

    def flaky(prev, tau, params, opts):
        calls["n"] += 1
        if calls["n"] == 2:
            raise DescentFailure("injected")
        return real(prev, tau, params, opts)

    monkeypatch.setattr(stepper, "minimize_increment", flaky)
    with pytest.raises(SchemeAborted) as info:
        run_minimizing_movements(cosine_bump(31, 1.0, 2.0), 10, 0.5, STD, OPTS)
    assert len(info.value.partial.steps) == 2


def test_interpolants(short_traj):
    ip = interpolants(short_traj)
    tau = short_traj.tau
    for i, s in enumerate(short_traj.steps):
        t = i * tau
        assert ip.alpha(t) == s.profile.alpha and ip.alpha_hat(t) == s.profile.alpha
        assert ip.beta(t) == s.profile.beta and ip.beta_hat(t) == s.profile.beta
    a, b = short_traj.steps[0].profile, short_traj.steps[1].profile
    assert ip.alpha(0.5 * tau) == pytest.approx(0.5 * (a.alpha + b.alpha), rel=1e-15)
    x = np.linspace(-1, 1, 7)
    assert np.allclose(ip.h(0.5 * tau, x), 0.5 * (a.evaluate(x) + b.evaluate(x)))
    assert ip.alpha_hat(0.5 * tau) == b.alpha  # piecewise constant takes the right end
    assert ip.mass_rate_integral() <= 2 * short_traj.M0


def test_multiplier_estimate_consistent(short_traj):
    s, prev = short_traj.steps[1], short_traj.steps[0]
    m, res = estimate_multiplier(s, prev, short_traj.tau, STD)
    assert res < 0.05 * abs(m)
    assert m == pytest.approx(s.multiplier_m, rel=0.05)


def test_options_roundtrip():
    o = with_options(StepOptions(), gtol=1e-6, ny=4)
    assert StepOptions.from_dict(o.to_dict()) == o
