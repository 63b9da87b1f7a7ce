import math

import numpy as np
import pytest
from scipy.optimize import brentq

from climgame import _search
from climgame.climate_econ import (ClimateParams, EconParams, TechCurve,
                                   emissions, phi_constant,
                                   resource_feasibility)
from climgame.itm_core import TimeGrid
from climgame.regimes import (REGIMES, closed_form, compare_regimes,
                              gp_closed_form, gp_rb_zero_threshold,
                              gp_weighted, hetero_discount_path,
                              nash_closed_form, rp_closed_form, solve_regime,
                              temporary_oracle, _rb_objective,
                              _rp_transfer_objective)

from conftest import rel_gap

RHO = 0.40821994520255167


class TestGlobalPlanner:
    def test_b1_hand_value(self, econ, phi_c):
        # (0.5 * 9)^2 with theta1 = 1/2
        assert gp_closed_form(econ, phi_c).B1 == pytest.approx(20.25, abs=0)

    def test_consumption_formula(self, econ, phi_c):
        gp = gp_closed_form(econ, phi_c)
        expected = 9.0 / (0.025 * phi_c)
        assert gp.C1 == pytest.approx(expected, rel=1e-14)
        assert gp.C2 == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(430.6, abs=0.05)

    def test_transfer_solves_benchmark_condition(self, econ, phi_c):
        # interior condition 1.35 g(Rb) / (Rb+1)^2 = 1/9, solved
        # independently by bisection
        g = econ.g_fn
        rb_ref = brentq(lambda r: 1.35 * g(r) / (r + 1) ** 2 - 1.0 / 9.0,
                        0.1, 5.0, xtol=1e-13)
        assert gp_closed_form(econ, phi_c).Rb == pytest.approx(rb_ref,
                                                               abs=1e-10)
        assert rb_ref == pytest.approx(1.08, abs=0.01)

    def test_structural_zeros(self, econ, phi_c):
        gp = gp_closed_form(econ, phi_c)
        assert gp.K2 == 0.0 and gp.Ra == 0.0

    def test_budget_binds(self, econ, phi_c):
        _, slacks = resource_feasibility(gp_closed_form(econ, phi_c), econ,
                                         "gp")
        assert abs(slacks["pooled"]) < 1e-9

    def test_matches_oracle(self, econ, phi_c):
        cf = gp_closed_form(econ, phi_c).as_array()
        orc = temporary_oracle("gp", econ, phi_c).as_array()
        assert rel_gap(cf, orc) < 1e-6


class TestRbThreshold:
    def test_benchmark_interior(self, econ):
        # RHS = sqrt(0.2) sqrt(0.3) sqrt(0.5) * 9 ~ 1.558 > 1
        rhs = math.sqrt(0.2) * math.sqrt(0.3) * math.sqrt(0.5) * 9.0
        assert rhs == pytest.approx(1.558, abs=1e-3)
        assert not gp_rb_zero_threshold(econ)
        assert gp_closed_form(econ, phi_constant(econ.rho, ClimateParams())).Rb > 0

    def test_dominant_input_cost_shuts_transfer(self, phi_c):
        econ = EconParams(eta_K=50.0)
        assert gp_rb_zero_threshold(econ)
        assert gp_closed_form(econ, phi_c).Rb == 0.0

    def test_boundary_has_vanishing_slope(self, climate):
        # pick eta_B so the threshold holds with equality; the transfer
        # objective's one-sided slope at zero is then ~0
        base = EconParams()
        rhs = (0.2 ** 0.5 * 0.3 ** 0.5 * 0.5 ** 0.5 * 9.0)
        econ = EconParams(eta_B=1.0 / rhs)
        f = _rb_objective(econ, econ.A_bar - 1.0)
        eps = 1e-7
        slope = (f(eps) - f(0.0)) / eps
        assert abs(slope) < 1e-4
        assert gp_rb_zero_threshold(econ)


class TestRestrictedPlanner:
    def test_consumption_north_equals_gp(self, econ, phi_c):
        assert rp_closed_form(econ, phi_c).C1 \
            == pytest.approx(gp_closed_form(econ, phi_c).C1, rel=1e-14)

    def test_transfer_stationarity(self, econ, phi_c):
        rp = rp_closed_form(econ, phi_c)
        v = _rp_transfer_objective(econ, (econ.gamma1 + econ.gamma2) * phi_c,
                                   1.0)
        x = np.array([rp.Ra, rp.Rb])
        h = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            grad = (v(x + e) - v(x - e)) / (2 * h)
            assert abs(grad) < 1e-8

    def test_budgets_bind(self, econ, phi_c):
        _, slacks = resource_feasibility(rp_closed_form(econ, phi_c), econ,
                                         "rp")
        assert abs(slacks["country1"]) < 1e-9
        assert abs(slacks["country2"]) < 1e-9

    def test_flat_production_curve_degenerates(self, phi_c):
        # nearly flat h: the productivity transfer loses its purpose and
        # the abatement transfer approaches the fixed-h(0) solution
        econ = EconParams(h_fn=TechCurve(0.5, 0.5 + 1e-9))
        rp = rp_closed_form(econ, phi_c)
        assert rp.Ra < 1e-3
        from climgame.regimes import _solve_rb
        rb_fixed_h = _solve_rb(econ, econ.A_bar * 0.5 - 1.0)
        assert rp.Rb == pytest.approx(rb_fixed_h, abs=1e-4)

    def test_matches_oracle(self, econ, phi_c):
        cf = rp_closed_form(econ, phi_c).as_array()
        orc = temporary_oracle("rp", econ, phi_c).as_array()
        assert rel_gap(cf, orc) < 1e-6


class TestNash:
    def test_consumption_south_hand_value(self, econ, phi_c):
        na = nash_closed_form(econ, phi_c)
        assert na.C2 == pytest.approx(4.0 / (0.0125 * phi_c), rel=1e-14)
        assert na.C2 == pytest.approx(382.7, abs=0.05)

    def test_extreme_damage_kills_consumption(self, phi_c):
        econ = EconParams(gamma1=1e6)
        assert nash_closed_form(econ, phi_c).C1 < 1e-4

    def test_structural_zero_transfer(self, econ, phi_c):
        assert nash_closed_form(econ, phi_c).Ra == 0.0

    def test_budgets_bind(self, econ, phi_c):
        _, slacks = resource_feasibility(nash_closed_form(econ, phi_c), econ,
                                         "nash")
        assert abs(slacks["country1"]) < 1e-9
        assert abs(slacks["country2"]) < 1e-9

    def test_matches_oracle_log_and_crra(self, phi_c):
        for sigma in (1.0, 1.2):
            econ = EconParams(sigma1=sigma, sigma2=sigma)
            cf = nash_closed_form(econ, phi_c).as_array()
            orc = temporary_oracle("nash", econ, phi_c).as_array()
            assert rel_gap(cf, orc) < 1e-6


class TestSharedStructure:
    def test_b1_identical_across_regimes(self, econ, phi_c):
        b1s = {r: closed_form(r, econ, phi_c).B1 for r in REGIMES}
        assert b1s["gp"] == b1s["rp"] == b1s["nash"]

    def test_transfer_argmax_scale_invariance(self, econ):
        f = _rb_objective(econ, econ.A_bar - 1.0)
        x1 = _search.maximize_1d_nonneg(f, hi0=1.0)
        x2 = _search.maximize_1d_nonneg(lambda r: 3.7 * f(r), hi0=1.0)
        assert x1 == pytest.approx(x2, abs=1e-8)

    def test_random_draw_oracle_agreement(self, table1_box_sampler, phi_c):
        # small smoke version of the full acceptance sweep
        rng = np.random.default_rng(12)
        for k in range(4):
            econ = table1_box_sampler(rng, sigma=[1.0, 0.8, 1.2][k % 3])
            phi_k = phi_constant(econ.rho, ClimateParams())
            for regime in REGIMES:
                cf = closed_form(regime, econ, phi_k).as_array()
                orc = temporary_oracle(regime, econ, phi_k).as_array()
                assert rel_gap(cf, orc) < 1e-6, (regime, k)


class TestRegimeSolve:
    def test_stationary_paths(self, econ, climate, coarse_grid):
        for regime in REGIMES:
            sol = solve_regime(regime, econ, climate, coarse_grid)
            assert np.all(sol.allocation == sol.allocation[0])

    def test_stock_sum_identity(self, econ, climate, coarse_grid):
        sol = solve_regime("gp", econ, climate, coarse_grid)
        assert np.array_equal(sol.S, sol.P + sol.T)

    def test_welfare_ordering(self, econ, climate, coarse_grid):
        sols = {r: solve_regime(r, econ, climate, coarse_grid)
                for r in REGIMES}
        assert sols["gp"].U > sols["rp"].U > sols["nash"].U

    def test_oracle_check_diagnostic(self, econ, climate, coarse_grid):
        sol = solve_regime("gp", econ, climate, coarse_grid,
                           check_oracle=True)
        assert sol.diagnostics["oracle_max_rel_gap"] < 1e-6


class TestHeterogeneousDiscounting:
    def test_equal_rates_reduce_to_closed_form(self, econ, climate,
                                               coarse_grid, phi_c):
        for regime, cf in (("gp", gp_closed_form(econ, phi_c)),
                           ("rp", rp_closed_form(econ, phi_c))):
            sol = hetero_discount_path(econ, climate, regime, coarse_grid)
            dev = np.max(np.abs(sol.allocation - cf.as_array()[None, :]))
            assert dev / max(1.0, np.max(np.abs(cf.as_array()))) < 1e-8
            assert np.all(sol.allocation == sol.allocation[0])

    def test_impatient_south_consumption_paths(self, climate, coarse_grid):
        econ = EconParams(rho2=1.2 * RHO)
        for regime in ("gp", "rp"):
            sol = hetero_discount_path(econ, climate, regime, coarse_grid)
            c1, c2 = sol.allocation[:, 0], sol.allocation[:, 1]
            assert np.all(np.diff(c1) >= -1e-10 * np.abs(c1[:-1]))
            assert np.all(np.diff(c2) <= 1e-10 * np.abs(c2[:-1]))

    def test_time_zero_matches_blended_weight_problem(self, climate,
                                                      coarse_grid):
        # at t = 0 the weights are (1, 1) and the damage coefficient is
        # gamma1 Phi(rho1) + gamma2 Phi(rho2)
        econ = EconParams(rho2=1.2 * RHO)
        sol = hetero_discount_path(econ, climate, "gp", coarse_grid)
        blended = (econ.gamma1 * phi_constant(econ.rho1, climate)
                   + econ.gamma2 * phi_constant(econ.rho2, climate))
        expected = gp_weighted(econ, blended, 1.0, 1.0)
        assert rel_gap(sol.allocation[0], expected.as_array()) < 1e-12

    def test_late_time_matches_per_t_oracle(self, climate):
        # direct numeric maximization of the weighted temporary problem at
        # the last grid node
        from climgame.regimes import _gp_oracle
        econ = EconParams(rho2=1.2 * RHO)
        grid = TimeGrid(0.0, 50.0, 32)
        sol = hetero_discount_path(econ, climate, "gp", grid)
        t_last = grid.times[-1]
        w2 = math.exp(-(econ.rho2 - econ.rho1) * t_last)
        blended = (econ.gamma1 * phi_constant(econ.rho1, climate)
                   + w2 * econ.gamma2 * phi_constant(econ.rho2, climate))
        orc = _gp_oracle(econ, blended, 1.0, w2).as_array()
        assert rel_gap(sol.allocation[-1], orc) < 1e-6

    def test_nash_heterogeneous_not_defined(self, climate, coarse_grid):
        econ = EconParams(rho2=1.2 * RHO)
        with pytest.raises(ValueError):
            hetero_discount_path(econ, climate, "nash", coarse_grid)


class TestComparisons:
    def test_benchmark_orderings_hold(self, econ, phi_c):
        rep = compare_regimes(econ, phi_c)
        assert rep.all_unconditional_hold
        for v in rep.orderings.values():
            assert v["holds"], v

    def test_benchmark_precondition_false(self, econ, phi_c):
        rep = compare_regimes(econ, phi_c)
        assert rep.precondition_value == pytest.approx(0.5)
        assert rep.precondition_bound == pytest.approx(0.45)
        assert not rep.precondition_holds
        assert not rep.conditional_checked
        assert "C2_rp_lt_nash" not in rep.orderings

    def test_conditional_branch_active_when_south_less_exposed(self, phi_c):
        # gamma1 much larger than gamma2 turns the precondition on
        econ = EconParams(gamma1=0.02, gamma2=0.005)
        rep = compare_regimes(econ, phi_c)
        assert rep.precondition_holds and rep.conditional_checked
        assert rep.orderings["C2_rp_lt_nash"]["holds"]
        assert rep.orderings["G_rp_le_nash"]["holds"]

    def test_requires_log_utility(self, phi_c):
        with pytest.raises(ValueError, match="log"):
            compare_regimes(EconParams(sigma1=1.2, sigma2=1.2), phi_c)

    def test_zero_damage_rejected_upstream(self):
        with pytest.raises(ValueError, match="gamma2"):
            EconParams(gamma2=0.0)
