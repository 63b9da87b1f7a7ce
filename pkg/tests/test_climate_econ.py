import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climgame.climate_econ import (Allocation, ClimateParams, DomainError,
                                   EconParams, TechCurve, climate_integrate,
                                   country_welfare, crra_utility,
                                   direct_welfare, emissions,
                                   emissions_by_country, phi_constant,
                                   resource_feasibility,
                                   sample_admissible_path, temperature)
from climgame.itm_core import TimeGrid

from conftest import rel_gap

RHO = 0.40821994520255167


def alloc(**kw):
    base = dict(C1=0, C2=0, B1=0, B2=0, K1=0, K2=0, Ra=0, Rb=0)
    base.update(kw)
    return Allocation(**base)


class TestPhiConstant:
    def test_benchmark_value(self, climate):
        # high-precision reference: 0.83610361854216285...
        assert phi_constant(RHO, climate) == pytest.approx(
            0.8361036185421629, rel=1e-14)

    def test_all_permanent(self):
        clim = ClimateParams(phi_L=1.0)
        assert phi_constant(RHO, clim) == pytest.approx(1.0 / RHO, rel=1e-15)

    def test_nothing_retained(self):
        clim = ClimateParams(phi_L=0.0, phi_0=0.0)
        assert phi_constant(RHO, clim) == 0.0

    def test_rejects_nonpositive_rate(self, climate):
        with pytest.raises(ValueError):
            phi_constant(0.0, climate)


class TestEmissions:
    def test_zero_allocation(self, econ):
        assert emissions(alloc(), econ) == 0.0

    def test_linear_in_dirty_input(self, econ):
        assert emissions(alloc(K1=1.0), econ) == pytest.approx(1.0)

    def test_benchmark_abatement(self, econ):
        # 10 - 20.25^0.5 = 5.5 with theta1 = 0.5
        a = alloc(K1=10.0, B1=20.25)
        assert emissions(a, econ) == pytest.approx(5.5, abs=1e-12)

    def test_country_split_sums_to_total(self, econ):
        a = alloc(C1=1, K1=3.0, K2=2.0, B1=1.5, B2=0.7, Rb=0.4)
        g1, g2 = emissions_by_country(a, econ)
        assert g1 + g2 == pytest.approx(emissions(a, econ), rel=1e-14)

    def test_monotone_directions(self, econ):
        rng = np.random.default_rng(1)
        for _ in range(20):
            base = dict(C1=0, C2=0,
                        B1=rng.uniform(0.1, 30), B2=rng.uniform(0.1, 30),
                        K1=rng.uniform(0.1, 30), K2=rng.uniform(0.1, 30),
                        Ra=0, Rb=rng.uniform(0.1, 10))
            g0 = emissions(Allocation(**base), econ)
            for k, sign in (("K1", 1), ("K2", 1), ("B1", -1), ("B2", -1),
                            ("Rb", -1)):
                bumped = dict(base)
                bumped[k] += 1e-4
                diff = emissions(Allocation(**bumped), econ) - g0
                assert sign * diff > 0.0


class TestClimateIntegrate:
    def test_zero_emissions(self, climate, grid):
        p, t, s = climate_integrate(climate, np.zeros(grid.n_points - 1), grid)
        assert np.all(p == climate.P0)
        expected = climate.T0 * np.exp(-climate.phi * grid.times)
        assert np.max(np.abs(t - expected)) < 1e-12

    def test_unit_emissions_linear_permanent(self, climate, grid):
        p, t, s = climate_integrate(climate, np.ones(grid.n_points - 1), grid)
        assert np.max(np.abs(p - (climate.P0 + 0.2 * grid.times))) < 1e-10

    def test_unit_emissions_temporary_steady_state(self, climate):
        grid = TimeGrid(0.0, 80.0, 2048)
        p, t, s = climate_integrate(climate, np.ones(grid.n_points - 1), grid)
        # (1 - 0.2) * 0.393 / 0.5 = 0.6288
        assert t[-1] == pytest.approx(0.6288, rel=1e-9)

    def test_sum_identity_exact(self, climate, grid):
        rng = np.random.default_rng(4)
        g = rng.uniform(-1, 5, grid.n_points - 1)
        p, t, s = climate_integrate(climate, g, grid)
        assert np.array_equal(s, p + t)


class TestTemperature:
    def test_preindustrial_is_zero(self):
        assert temperature(1.0, 1.0) == 0.0

    def test_one_doubling_is_three_degrees(self):
        assert temperature(2.0, 1.0) == pytest.approx(3.0, rel=1e-15)

    def test_two_doublings(self):
        assert temperature(4.0, 1.0) == pytest.approx(6.0, rel=1e-15)

    def test_rejects_nonpositive_stock(self):
        with pytest.raises(DomainError):
            temperature(0.0, 1.0)
        with pytest.raises(DomainError):
            temperature(np.array([1.0, -2.0]), 1.0)

    @given(st.floats(min_value=0.1, max_value=1e6),
           st.floats(min_value=0.1, max_value=1e6))
    @settings(max_examples=60, deadline=None)
    def test_strictly_increasing(self, s1, s2):
        if s1 == s2:
            return
        lo, hi = sorted((s1, s2))
        assert temperature(lo, 1.0) < temperature(hi, 1.0)


class TestCrraUtility:
    def test_log_branch_exact(self):
        assert crra_utility(math.e, 1.0) == pytest.approx(1.0, rel=1e-15)

    @given(st.floats(min_value=0.05, max_value=50),
           st.floats(min_value=0.2, max_value=3).filter(lambda s: abs(s - 1) > 1e-3))
    @settings(max_examples=60, deadline=None)
    def test_power_branch(self, c, sigma):
        assert crra_utility(c, sigma) == pytest.approx(
            c ** (1 - sigma) / (1 - sigma), rel=1e-12)


class TestCountryWelfare:
    def test_zero_damage_unit_consumption(self, climate, grid):
        econ = EconParams(gamma1=1e-300, gamma2=1e-300)  # effectively zero
        path = np.tile(alloc(C1=1.0, C2=1.0).as_array(), (grid.n_points, 1))
        assert country_welfare(path, climate, econ, 1, grid) \
            == pytest.approx(0.0, abs=1e-290)

    def test_zero_emissions_closed_quadrature(self, econ, climate, grid):
        c = 3.7
        path = np.tile(alloc(C1=c, C2=c).as_array(), (grid.n_points, 1))
        head = econ.gamma1 * (climate.S_bar / RHO - climate.P0 / RHO
                              - climate.T0 / (RHO + climate.phi))
        expected = head + math.log(c) * (1 - math.exp(-RHO * grid.t_end)) / RHO
        assert country_welfare(path, climate, econ, 1, grid) \
            == pytest.approx(expected, rel=1e-12)

    def test_rewriting_matches_direct_quadrature(self, econ, climate, grid):
        rng = np.random.default_rng(9)
        for k in range(8):
            path = sample_admissible_path(econ, grid, rng).values
            for country in (1, 2):
                a = country_welfare(path, climate, econ, country, grid)
                b = direct_welfare(path, climate, econ, country, grid)
                assert abs(a - b) <= 1e-6 * (1 + abs(a))

    def test_gp_solution_rewriting_vs_direct(self, econ, climate, grid, phi_c):
        from climgame.regimes import gp_closed_form
        path = np.tile(gp_closed_form(econ, phi_c).as_array(),
                       (grid.n_points, 1))
        for country in (1, 2):
            a = country_welfare(path, climate, econ, country, grid)
            b = direct_welfare(path, climate, econ, country, grid)
            assert abs(a - b) <= 1e-6 * (1 + abs(a))

    def test_nonpositive_consumption_sentinel(self, econ, climate, grid):
        path = np.tile(alloc(C1=0.0, C2=1.0).as_array(), (grid.n_points, 1))
        assert country_welfare(path, climate, econ, 1, grid) == -math.inf


class TestResourceFeasibility:
    def test_zero_allocation_feasible(self, econ):
        ok, slacks = resource_feasibility(alloc(), econ, "gp")
        assert ok and slacks["pooled"] == 0.0
        ok, slacks = resource_feasibility(alloc(), econ, "rp")
        assert ok and slacks == {"country1": 0.0, "country2": 0.0}

    def test_gp_closed_form_budget_binds(self, econ, phi_c):
        from climgame.regimes import gp_closed_form
        ok, slacks = resource_feasibility(gp_closed_form(econ, phi_c), econ,
                                          "gp")
        assert ok and abs(slacks["pooled"]) < 1e-9

    def test_overconsumption_infeasible(self, econ):
        a = alloc(C1=100.0, K1=1.0)
        ok, slacks = resource_feasibility(a, econ, "gp")
        assert not ok and slacks["pooled"] < 0


class TestTechCurve:
    def test_benchmark_slope_at_zero(self, econ):
        assert econ.g_fn.derivative(0.0) == pytest.approx(0.3, rel=1e-15)

    @given(st.floats(min_value=0.0, max_value=1e4),
           st.floats(min_value=0.0, max_value=1e4))
    @settings(max_examples=60, deadline=None)
    def test_strictly_increasing(self, x1, x2):
        h = TechCurve(0.5, 0.9)
        if x1 == x2:
            return
        lo, hi = sorted((x1, x2))
        assert h(lo) < h(hi)

    @given(st.floats(min_value=0.0, max_value=100),
           st.floats(min_value=0.0, max_value=100))
    @settings(max_examples=60, deadline=None)
    def test_midpoint_concavity(self, x1, x2):
        g = TechCurve(0.2, 0.5)
        assert g(0.5 * (x1 + x2)) >= 0.5 * (g(x1) + g(x2)) - 1e-12

    def test_bounded_by_asymptote(self):
        g = TechCurve(0.2, 0.5)
        assert g(1e9) < 0.5

    def test_derivative_inverse_roundtrip(self):
        g = TechCurve(0.2, 0.5)
        for x in (0.0, 0.3, 2.0, 40.0):
            assert g.derivative_inverse(g.derivative(x)) \
                == pytest.approx(x, abs=1e-10)

    def test_rejects_decreasing_curve(self):
        with pytest.raises(ValueError):
            TechCurve(0.5, 0.2)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            TechCurve(0.0, 0.5)
        with pytest.raises(ValueError):
            TechCurve(0.2, 1.0)


class TestParamValidation:
    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma1"):
            EconParams(sigma1=0.0)

    def test_unviable_south_rejected(self):
        # A_bar * h(0) = 10 * 0.05 <= 1
        with pytest.raises(ValueError, match="h\\(0\\)"):
            EconParams(h_fn=TechCurve(0.05, 0.9))

    def test_power_concavity_guard(self):
        # theta2/(1-theta2) * (g_inf - g0) > 2 g0 breaks unimodality
        with pytest.raises(ValueError, match="concave"):
            EconParams(theta2=0.8, g_fn=TechCurve(0.05, 0.5))

    def test_climate_fraction_ranges(self):
        with pytest.raises(ValueError):
            ClimateParams(phi_L=1.2)
        with pytest.raises(ValueError):
            ClimateParams(phi=0.0)

    def test_rho_property_guards_heterogeneous(self):
        econ = EconParams(rho2=0.5)
        with pytest.raises(ValueError):
            _ = econ.rho

    def test_negative_allocation_rejected(self):
        with pytest.raises(ValueError, match="C1"):
            Allocation(C1=-1, C2=0, B1=0, B2=0, K1=0, K2=0, Ra=0, Rb=0)
