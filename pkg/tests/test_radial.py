import numpy as np
import pytest

from dwlab.errors import DomainTooSmall, EmptySupport, NonConvergence, SweepExhausted
from dwlab.potential import tilt
from dwlab.radial import (RadialGrid, RadialOptions, ansatz_values,
                          comparison_energy, extract_multiplier,
                          gamma_threshold, minimize_radial, pohozaev_residual,
                          project_mass, radial_energy, radial_kinetic,
                          radial_mass, radius_bounds, support_radius,
                          unit_ball_volume, w_sup_on_well)


# ----------------------------------------------------------------------
# grid and projection basics
# ----------------------------------------------------------------------

def test_shell_weights_sum_to_ball_volume():
    grid = RadialGrid(2, 4.0, 200)
    assert grid.shell_weights.sum() == pytest.approx(np.pi * 16.0, rel=1e-12)
    grid3 = RadialGrid(3, 2.0, 100)
    assert grid3.shell_weights.sum() == pytest.approx(4 * np.pi * 8.0 / 3.0, rel=1e-12)


def test_origin_stencil_matches_symmetry_expansion():
    # the variational gradient at r=0 must reproduce 2N(u1-u0)/h^2
    for dim in (1, 2, 3):
        grid = RadialGrid(dim, 1.0, 50)
        h = grid.h
        u = 1.0 - grid.nodes ** 2  # u'' = -2 everywhere, u'(0) = 0
        from dwlab.radial import _weighted_gradient
        from dwlab.potential import from_callables
        zero = from_callables(lambda s: 0.0 * np.asarray(s),
                              lambda s: 0.0 * np.asarray(s),
                              lambda s: 0.0 * np.asarray(s), (-2, 2))
        g = _weighted_gradient(grid, u, zero)
        # -lap u at 0 for u = 1 - r^2 is 2N
        assert g[0] == pytest.approx(2.0 * dim, rel=1e-10)


def test_projection_feasibility_randomized():
    rng = np.random.default_rng(3)
    for mode in ("upper", "equal"):
        for _ in range(100):
            n = int(rng.integers(4, 60))
            v = rng.normal(0.0, 1.0, n)
            w = rng.uniform(0.05, 2.0, n)
            gamma = float(rng.uniform(0.1, 4.0))
            u = project_mass(v, w, gamma, mode)
            assert np.min(u) >= 0.0
            mass = float(w @ u)
            if mode == "equal":
                assert mass == pytest.approx(gamma, rel=1e-12)
            else:
                assert mass <= gamma * (1 + 1e-12)


def test_projection_is_identity_on_feasible_points():
    w = np.ones(5)
    u = np.array([0.1, 0.2, 0.0, 0.3, 0.1])
    out = project_mass(u, w, 1.0, "upper")
    assert np.array_equal(out, u)


# ----------------------------------------------------------------------
# the 1-D exact oracle: plateau family
# ----------------------------------------------------------------------

def line_grid(gamma):
    # support ~ gamma / (2 u*) + O(1); leave head room
    r_max = gamma / 2.8 + 8.0
    return RadialGrid(1, r_max, int(np.ceil(r_max / 0.02)))


@pytest.mark.parametrize("gamma", [30.0, 50.0])
def test_line_solver_matches_plateau_oracle(q12, cert12, line_oracle, gamma):
    prof = minimize_radial(q12, cert12, gamma, line_grid(gamma),
                           RadialOptions(enforce_grid_margin=False))
    assert prof.lam == pytest.approx(line_oracle.lam, abs=2e-5)
    assert prof.energy == pytest.approx(line_oracle.energy(gamma), abs=5e-3)
    assert prof.support_radius == pytest.approx(line_oracle.radius(gamma), abs=0.05)
    assert prof.mass == pytest.approx(gamma, rel=1e-9)


def test_line_refinement_improves_energy(q12, cert12, line_oracle):
    # energies agree at second order between successive grids
    gamma = 50.0
    errs = []
    for n_mult in (1, 2):
        grid = RadialGrid(1, 26.0, 650 * n_mult)
        prof = minimize_radial(q12, cert12, gamma, grid,
                               RadialOptions(enforce_grid_margin=False))
        errs.append(abs(prof.energy - line_oracle.energy(gamma)))
    assert errs[1] < 0.5 * errs[0]
    # O(h^2) magnitude at h = 0.04: generous constant frozen from runs
    assert errs[0] < 40.0 * (26.0 / 650) ** 2


# ----------------------------------------------------------------------
# planar ground state and its checks
# ----------------------------------------------------------------------

def test_flagship_profile_quantities(prof200, cert12):
    assert prof200.energy < 0.0
    assert prof200.mass == pytest.approx(200.0, rel=1e-9)
    assert prof200.lam < 0.0
    assert prof200.lam >= cert12.w_minus
    assert 0.0 <= prof200.values.min()
    assert prof200.max_value <= cert12.s0 + 1e-8
    assert np.all(np.diff(prof200.values) <= 1e-9)  # radially nonincreasing


def test_flagship_radius_within_explicit_bounds(prof200, cert12):
    rb = radius_bounds(cert12, 2)
    assert rb.lower(200.0) <= prof200.support_radius <= rb.upper(200.0)


def test_support_edge_derivative_vanishes(prof200):
    info = support_radius(prof200)
    assert abs(info.edge_derivative) <= 10.0 * prof200.grid.h


def test_support_radius_of_zero_profile():
    grid = RadialGrid(2, 4.0, 100)
    from dwlab.radial import support_radius_values
    info = support_radius_values(grid, np.zeros(101))
    assert info.radius == 0.0
    assert info.edge_derivative == 0.0


def test_small_budget_energy_never_positive_with_fallback(q12, cert12):
    # the zero profile is feasible, so the global minimum is <= 0; the
    # fallback compares the stalled branch against it
    for gamma in (1.0, 10.0, 50.0):
        grid = RadialGrid(2, max(2.2 * 1.084 * np.sqrt(gamma), 4.0), 256)
        prof = minimize_radial(q12, cert12, gamma, grid,
                               RadialOptions(enforce_grid_margin=False,
                                             zero_fallback=True))
        assert prof.energy <= 0.0
        assert prof.mass <= gamma * (1 + 1e-12)


def test_default_mode_returns_metastable_branch(q12, cert12):
    # without the fallback the budget-saturating critical point is kept
    # even when its energy is positive (below the mass threshold)
    grid = RadialGrid(2, 2.2 * 1.084 * np.sqrt(50.0), 256)
    prof = minimize_radial(q12, cert12, 50.0, grid,
                           RadialOptions(enforce_grid_margin=False))
    assert prof.energy > 0.0
    assert prof.mass == pytest.approx(50.0, rel=1e-9)
    assert prof.lam < 0.0


def test_multiplier_extraction_and_diagnostics(prof200, q12):
    lam, lam_std = extract_multiplier(prof200, q12)
    assert lam == pytest.approx(prof200.lam, abs=1e-9)
    assert lam_std < 1e-5


def test_multiplier_tilt_shift_on_same_profile(prof200, q12):
    # reevaluating the stationarity quantity with the tilted well shifts
    # the multiplier by exactly the tilt size
    for a in (0.1, 1.0):
        lam_t, _ = extract_multiplier(prof200, tilt(q12, a))
        assert lam_t == pytest.approx(prof200.lam + a, abs=1e-9)


def test_multiplier_requires_support(q12, cert12):
    grid = RadialGrid(2, 4.0, 100)
    from dwlab.radial import RadialProfile
    prof = RadialProfile(grid=grid, values=np.zeros(101), gamma=1.0, lam=0.0,
                         energy=0.0, support_radius=0.0, mass=0.0)
    with pytest.raises(EmptySupport):
        extract_multiplier(prof, q12)


def test_grid_too_small_raises(q12, cert12):
    with pytest.raises(DomainTooSmall):
        minimize_radial(q12, cert12, 200.0, RadialGrid(2, 10.0, 300))


def test_iteration_cap_raises(q12, cert12):
    with pytest.raises(NonConvergence):
        minimize_radial(q12, cert12, 200.0, RadialGrid(2, 32.0, 512),
                        RadialOptions(max_iter=20))


# ----------------------------------------------------------------------
# radius bounds
# ----------------------------------------------------------------------

def test_radius_bound_constants_match_formulas(cert12):
    rb = radius_bounds(cert12, 2)
    assert rb.c_minus == pytest.approx((1.0 / (cert12.s0 * np.pi)) ** 0.5, rel=1e-12)
    assert rb.c_plus == pytest.approx(1.5 * (1.0 / (cert12.s1crit * np.pi)) ** 0.5,
                                      rel=1e-12)
    assert rb.c_minus == pytest.approx(0.4405, abs=2e-4)
    assert rb.c_plus == pytest.approx(1.0839, abs=2e-4)
    assert rb.c_minus < rb.c_plus


def test_radius_bounds_reduce_in_one_dimension(cert12):
    rb = radius_bounds(cert12, 1)
    assert rb.c_minus == pytest.approx(1.0 / (2.0 * cert12.s0), rel=1e-12)
    assert rb.c_plus == pytest.approx(1.5 / (2.0 * cert12.s1crit), rel=1e-12)


def test_bound_ordering_various_wells():
    from dwlab.potential import certify, quartic
    for a1, a2 in ((1.0, 1.5), (0.5, 3.0), (1.0, 2.5)):
        cert = certify(quartic(a1, a2))
        for dim in (1, 2, 3):
            rb = radius_bounds(cert, dim)
            assert rb.c_minus < rb.c_plus


# ----------------------------------------------------------------------
# dilation identity
# ----------------------------------------------------------------------

def test_pohozaev_report_flagship(prof200, q12):
    rep = pohozaev_residual(prof200, q12)
    assert rep.residual <= 0.05 * rep.scale
    assert rep.dilation_sign_ok
    assert rep.potential_negative
    # at N = 2 the gradient coefficient vanishes: rhs is the boundary term
    assert rep.rhs == pytest.approx(-rep.boundary_term, abs=1e-12)


def test_pohozaev_zero_profile(q12):
    grid = RadialGrid(2, 4.0, 100)
    from dwlab.radial import RadialProfile
    prof = RadialProfile(grid=grid, values=np.zeros(101), gamma=1.0, lam=0.0,
                         energy=0.0, support_radius=0.0, mass=0.0)
    rep = pohozaev_residual(prof, q12)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.residual == 0.0


def test_dilation_scaling_by_quadrature(prof200, q12):
    # E(u(./rho)) = A rho^(N-2) + B rho^N, checked by interpolating the
    # dilated profile onto a fresh grid and integrating
    grid = prof200.grid
    A = radial_kinetic(grid, prof200.values)
    B = prof200.energy - A
    for rho, rtol in ((0.5, 5e-3), (2.0, 1e-3)):
        big = RadialGrid(2, grid.r_max * max(1.0, rho) * 1.25,
                         int(1000 * max(1.0, rho) * 1.25))
        vals = np.interp(big.nodes / rho, grid.nodes, prof200.values, right=0.0)
        pred = A + B * rho ** 2
        assert radial_energy(big, vals, q12) == pytest.approx(pred, rel=rtol)


# ----------------------------------------------------------------------
# comparison energy
# ----------------------------------------------------------------------

def test_comparison_energy_majorizes_minimum(prof200, q12, cert12):
    w_sup = w_sup_on_well(q12, cert12)
    assert prof200.energy <= comparison_energy(cert12, 200.0, 2, w_sup=w_sup)


def test_comparison_energy_negative_for_large_budget(q12, cert12):
    w_sup = w_sup_on_well(q12, cert12)
    assert comparison_energy(cert12, 2000.0, 2, w_sup=w_sup) < 0.0


def test_ansatz_quadrature_below_closed_form(q12, cert12):
    w_sup = w_sup_on_well(q12, cert12)
    for gamma in (200.0, 2000.0):
        grid = RadialGrid(2, 1.084 * np.sqrt(gamma) + 4.0, 4000)
        vals = ansatz_values(cert12, gamma, grid)
        e_direct = radial_energy(grid, vals, q12)
        assert e_direct <= comparison_energy(cert12, gamma, 2, w_sup=w_sup)
        mass = radial_mass(grid, vals)
        assert 0.5 * gamma <= mass <= gamma * (1 + 1e-9)


def test_comparison_energy_requires_large_budget(cert12):
    with pytest.raises(ValueError):
        comparison_energy(cert12, 0.5, 2, w_sup=0.62)


# ----------------------------------------------------------------------
# empirical threshold
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def threshold_sweep(q12, cert12):
    return gamma_threshold(q12, cert12, 2, gammas=[8.0, 16.0, 32.0, 64.0, 128.0],
                           h_target=0.06)


def test_threshold_is_finite_and_qualifies_onward(threshold_sweep):
    assert threshold_sweep.gamma_tilde == 64.0
    seen = False
    for gamma, energy, mass, radius, ok in threshold_sweep.rows:
        if gamma == threshold_sweep.gamma_tilde:
            seen = True
        if seen:
            assert ok, f"gamma={gamma} above the threshold must qualify"


def test_threshold_energies_monotone(threshold_sweep):
    # nested feasible sets: the minimum energy is nonincreasing in gamma
    energies = [row[1] for row in threshold_sweep.rows]
    assert all(e2 <= e1 + 1e-9 for e1, e2 in zip(energies, energies[1:]))


def test_threshold_sweep_exhausted(q12, cert12):
    with pytest.raises(SweepExhausted):
        gamma_threshold(q12, cert12, 2, gammas=[1.0, 2.0], h_target=0.1)


# ----------------------------------------------------------------------
# solver invariants
# ----------------------------------------------------------------------

def test_energy_monotone_along_iteration(q12, cert12):
    prof = minimize_radial(q12, cert12, 100.0, RadialGrid(2, 23.0, 500),
                           RadialOptions(track_energy=True))
    history = np.asarray(prof.diagnostics["energy_history"])
    rises = np.diff(history)
    # descent up to the documented float-resolution slack
    assert np.max(rises, initial=0.0) <= 1e-7
    assert history[-1] < history[0]


def test_profile_equals_its_own_rearrangement(prof200):
    from dwlab.rearrange import rearrange_radial
    out = rearrange_radial(prof200.values, prof200.grid.nodes[:, None], [0.0])
    assert np.array_equal(out, prof200.values)


def test_mass_mode_equal_keeps_bump_below_threshold(q12, cert12):
    prof = minimize_radial(q12, cert12, 50.0,
                           RadialGrid(2, 16.0, 520),
                           RadialOptions(mass_mode="equal",
                                         enforce_grid_margin=False))
    assert prof.mass == pytest.approx(50.0, rel=1e-9)
    assert prof.energy > 0.0  # below the threshold the bump costs energy


# ----------------------------------------------------------------------
# other dimensions and other wells
# ----------------------------------------------------------------------

def test_three_dimensional_ground_state(q12, cert12):
    rb = radius_bounds(cert12, 3)
    gamma = 1000.0
    r_max = 2.0 * rb.upper(gamma)
    prof = minimize_radial(q12, cert12, gamma,
                           RadialGrid(3, r_max, int(r_max / 0.035)))
    assert prof.energy < 0.0
    assert prof.mass == pytest.approx(gamma, rel=1e-9)
    assert cert12.w_minus <= prof.lam < 0.0
    assert rb.lower(gamma) <= prof.support_radius <= rb.upper(gamma)
    rep = pohozaev_residual(prof, q12)
    assert rep.residual <= 0.05 * rep.scale
    assert rep.dilation_sign_ok and rep.potential_negative


@pytest.mark.parametrize("a1,a2,gamma", [(1.0, 1.5, 600.0), (0.5, 3.0, 100.0)])
def test_invariants_across_wells(a1, a2, gamma):
    from dwlab.potential import certify, quartic
    p = quartic(a1, a2)
    cert = certify(p)
    rb = radius_bounds(cert, 2)
    r_max = 2.0 * rb.upper(gamma)
    prof = minimize_radial(p, cert, gamma,
                           RadialGrid(2, r_max, int(r_max / 0.03)))
    assert prof.energy < 0.0
    assert rb.lower(gamma) <= prof.support_radius <= rb.upper(gamma)
    assert cert.w_minus <= prof.lam < 0.0
    assert 0.0 <= prof.values.min() and prof.max_value <= cert.s0 + 1e-8
    rep = pohozaev_residual(prof, p)
    assert rep.residual <= 0.05 * rep.scale
