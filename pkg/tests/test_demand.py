import numpy as np
import pytest

from hashmarket import (
    DegenerateDemandError,
    MinerProfile,
    NashSolveOptions,
    PriceSchedule,
    SolveMode,
    best_response,
    best_response_dynamics,
    closed_form_ne_discriminatory,
    closed_form_ne_uniform,
    miner_utility,
    solve_stage_two,
    uniqueness_diagnostics,
)
from hashmarket.demand import _closed_form_raw, _compile
from conftest import make_params, make_profiles, random_interior_instance


def deviation_gain(result, schedule, profiles, params, points=64):
    """Largest utility gain any miner can get by unilateral deviation."""
    worst = -np.inf
    x = result.demand.x
    for i, prof in enumerate(profiles):
        u_eq = miner_utility(result.demand, i, schedule, profiles, params)
        for alt in np.linspace(prof.x_min, prof.x_max, points):
            xs = x.copy()
            xs[i] = alt
            u_alt = miner_utility(
                result.demand.__class__(xs, result.demand.interior), i, schedule, profiles, params
            )
            worst = max(worst, (u_alt - u_eq) / max(abs(u_eq), 1e-30))
    return worst


class TestBestResponse:
    def test_hand_value(self):
        profile = MinerProfile(0, 0, 1e-2, 1e9)
        params = make_params()
        # sqrt(1e4 * 2500) - 2500, the symmetric equilibrium demand
        assert best_response(0, [2500.0], 1.0, profile, params) == pytest.approx(
            2500.0, rel=1e-12
        )

    def test_clipping_low(self):
        profile = MinerProfile(0, 0, 50.0, 100.0)
        params = make_params()
        # enormous price drives the unclipped response below x_min
        assert best_response(0, [100.0], 1e6, profile, params) == 50.0

    def test_clipping_high(self):
        profile = MinerProfile(0, 0, 1e-2, 100.0)
        params = make_params()
        assert best_response(0, [2500.0], 1.0, profile, params) == 100.0

    def test_degenerate_opponents(self):
        profile = MinerProfile(0, 0, 1e-2, 100.0)
        with pytest.raises(DegenerateDemandError):
            best_response(0, [0.0], 1.0, profile, make_params())

    def test_positivity_under_strict_condition(self, rng):
        # unclipped responses stay positive when the strict condition holds
        for _ in range(50):
            profiles, params, prices = random_interior_instance(rng)
            sched = PriceSchedule.discriminatory(prices)
            diag = uniqueness_diagnostics(profiles, sched, params)
            if not diag.strict_all:
                continue
            result = closed_form_ne_discriminatory(profiles, prices, params)
            x = result.demand.x
            for i, prof in enumerate(profiles):
                others = x.sum() - x[i]
                resp = best_response(i, [others], float(prices[i]), prof, params)
                assert resp > 0.0

    def test_scalability(self, rng):
        # phi * BR(x) > BR(phi * x) for phi > 1 (unclipped branch)
        profile = MinerProfile(0, 100, 1e-12, 1e15)
        params = make_params(r=20.0, z=5e-3)
        for _ in range(50):
            others = float(rng.uniform(1.0, 1000.0))
            price = float(rng.uniform(0.5, 50.0))
            phi = float(rng.uniform(1.0001, 10.0))
            lhs = phi * best_response(0, [others], price, profile, params)
            rhs = best_response(0, [phi * others], price, profile, params)
            assert lhs > rhs


class TestClosedForm:
    def test_symmetric_two_miners(self):
        profiles = make_profiles([0, 0])
        result = closed_form_ne_uniform(profiles, 1.0, make_params())
        assert np.allclose(result.demand.x, [2500.0, 2500.0], rtol=1e-12)
        assert result.interior and result.converged
        # total equals (n-1)/K
        assert result.demand.total == pytest.approx(5000.0, rel=1e-12)

    def test_symmetric_four_miners(self):
        profiles = make_profiles([0, 0, 0, 0])
        result = closed_form_ne_uniform(profiles, 1.0, make_params(n=4))
        assert np.allclose(result.demand.x, 1875.0, rtol=1e-12)

    def test_price_homogeneity(self, rng):
        for _ in range(10):
            profiles, params, prices = random_interior_instance(rng)
            base = closed_form_ne_discriminatory(profiles, prices, params)
            scaled = closed_form_ne_discriminatory(profiles, 2.0 * prices, params)
            if not (base.interior and scaled.interior):
                continue
            assert np.allclose(scaled.demand.x, base.demand.x / 2.0, rtol=1e-12)

    def test_uniform_vector_degenerates_to_uniform(self):
        profiles = make_profiles([100, 200, 300])
        params = make_params(n=3, r=20.0, z=5e-3)
        uni = closed_form_ne_uniform(profiles, 50.0, params)
        disc = closed_form_ne_discriminatory(profiles, [50.0, 50.0, 50.0], params)
        assert np.array_equal(uni.demand.x, disc.demand.x)

    def test_three_miner_mixed_prices_against_dynamics(self):
        profiles = make_profiles([100, 200, 300], x_min=1e-2, x_max=100.0)
        params = make_params(n=3, r=20.0, z=5e-3)
        prices = [50.0, 50.0, 50.0]
        cf = closed_form_ne_discriminatory(profiles, prices, params)
        dyn = best_response_dynamics(
            profiles, PriceSchedule.discriminatory(prices), params
        )
        assert dyn.converged
        assert np.allclose(dyn.demand.x, cf.demand.x, rtol=1e-6)

    def test_summative_identity(self, rng):
        for _ in range(20):
            profiles, params, prices = random_interior_instance(rng)
            inst = _compile(profiles, params)
            result = closed_form_ne_discriminatory(profiles, prices, params)
            expected_total = (params.n - 1) / float(np.sum(prices / inst.a))
            assert result.demand.total == pytest.approx(expected_total, rel=1e-10)

    def test_non_interior_flagged(self):
        # tight bounds force clipping, which clears the interior flag
        profiles = make_profiles([0, 0], x_min=1.0, x_max=10.0)
        result = closed_form_ne_uniform(profiles, 1.0, make_params())
        assert not result.interior
        assert np.all(result.demand.x == 10.0)


class TestBestResponseDynamics:
    def test_symmetric_matches_closed_form(self):
        profiles = make_profiles([0, 0])
        params = make_params()
        dyn = best_response_dynamics(profiles, PriceSchedule.uniform(1.0, 2), params)
        assert dyn.converged
        assert np.allclose(dyn.demand.x, 2500.0, rtol=1e-6)

    def test_matches_closed_form_on_interior_instances(self, rng):
        for _ in range(20):
            profiles, params, prices = random_interior_instance(rng)
            cf = closed_form_ne_discriminatory(profiles, prices, params)
            dyn = best_response_dynamics(
                profiles, PriceSchedule.discriminatory(prices), params
            )
            assert dyn.converged
            assert np.allclose(dyn.demand.x, cf.demand.x, rtol=1e-6)

    def test_huge_prices_pin_demands_at_floor(self):
        profiles = make_profiles([0, 0, 0], x_min=0.5, x_max=100.0)
        params = make_params(n=3, p_max=1e9)
        dyn = best_response_dynamics(profiles, PriceSchedule.uniform(1e8, 3), params)
        assert dyn.converged
        assert np.all(dyn.demand.x == 0.5)

    def test_iteration_budget_respected(self):
        profiles = make_profiles([0, 0])
        params = make_params()
        opts = NashSolveOptions(epsilon=1e-30, max_iters=3)
        dyn = best_response_dynamics(profiles, PriceSchedule.uniform(1.0, 2), params, opts)
        assert not dyn.converged
        assert dyn.iterations == 3

    def test_no_profitable_unilateral_deviation(self, rng):
        for _ in range(5):
            profiles, params, prices = random_interior_instance(rng, n_max=8)
            sched = PriceSchedule.discriminatory(prices)
            dyn = best_response_dynamics(profiles, sched, params)
            assert dyn.converged
            assert deviation_gain(dyn, sched, profiles, params) <= 1e-7

    def test_homogeneity_via_dynamics(self):
        profiles = make_profiles([100, 200, 300], x_min=1e-4, x_max=1e6)
        params = make_params(n=3, r=20.0, z=5e-3)
        one = best_response_dynamics(profiles, PriceSchedule.uniform(10.0, 3), params)
        three = best_response_dynamics(profiles, PriceSchedule.uniform(30.0, 3), params)
        assert np.allclose(three.demand.x, one.demand.x / 3.0, rtol=1e-8)


class TestFixedPoint:
    def test_closed_form_is_best_response_fixed_point(self, rng):
        for _ in range(20):
            profiles, params, prices = random_interior_instance(rng)
            result = closed_form_ne_discriminatory(profiles, prices, params)
            x = result.demand.x
            for i, prof in enumerate(profiles):
                others = x.sum() - x[i]
                resp = best_response(i, [others], float(prices[i]), prof, params)
                assert resp == pytest.approx(float(x[i]), rel=1e-8)


class TestSolveStageTwo:
    def test_fallback_switches_to_dynamics(self):
        profiles = make_profiles([0, 0], x_min=1.0, x_max=10.0)
        params = make_params()
        sched = PriceSchedule.uniform(1.0, 2)
        result = solve_stage_two(profiles, sched, params)
        dyn = best_response_dynamics(profiles, sched, params)
        assert not result.interior
        assert result.iterations > 0
        assert np.array_equal(result.demand.x, dyn.demand.x)

    def test_pure_closed_form_mode_keeps_formula(self):
        profiles = make_profiles([0, 0], x_min=1.0, x_max=10.0)
        params = make_params()
        opts = NashSolveOptions(mode=SolveMode.CLOSED_FORM)
        result = solve_stage_two(profiles, PriceSchedule.uniform(1.0, 2), params, opts)
        assert result.iterations == 0
        assert not result.interior

    def test_interior_instances_stay_on_closed_form(self, rng):
        profiles, params, prices = random_interior_instance(rng)
        result = solve_stage_two(profiles, PriceSchedule.discriminatory(prices), params)
        assert result.interior
        assert result.iterations == 0

    def test_raw_closed_form_can_go_negative(self):
        # one miner far more expensive than the rest: its unclipped demand
        # is negative exactly when the positivity condition fails
        profiles = make_profiles([0, 0, 0], x_min=1e-6, x_max=1e9)
        params = make_params(n=3, p_max=1e6)
        prices = np.array([1e5, 1.0, 1.0])
        inst = _compile(profiles, params)
        raw = _closed_form_raw(prices, inst)
        diag = uniqueness_diagnostics(profiles, PriceSchedule.discriminatory(prices), params)
        assert raw[0] < 0 and not diag.positivity[0]
        result = solve_stage_two(profiles, PriceSchedule.discriminatory(prices), params)
        assert not result.interior
        assert result.converged


class TestUniquenessDiagnostics:
    def test_symmetric_three_miners(self):
        profiles = make_profiles([200, 200, 200])
        params = make_params(n=3, r=20.0, z=5e-3)
        diag = uniqueness_diagnostics(profiles, PriceSchedule.uniform(10.0, 3), params)
        # 2*(n-1) = 4 is not < n = 3, but n-1 = 2 < 3
        assert not diag.strict_all and not diag.strict.any()
        assert diag.positivity_all

    def test_symmetric_pair_sits_on_strict_boundary(self):
        profiles = make_profiles([200, 200])
        params = make_params(n=2, r=20.0, z=5e-3)
        diag = uniqueness_diagnostics(profiles, PriceSchedule.uniform(10.0, 2), params)
        assert not diag.strict.any()
        assert diag.positivity_all

    def test_negligible_miner_satisfies_both(self):
        # miner 0 has a huge effective reward, so its weight is vanishing
        profiles = make_profiles([0, 0, 0])
        params = make_params(n=3, p_max=1e7)
        sched = PriceSchedule.discriminatory([1e-6, 1e4, 1e4])
        diag = uniqueness_diagnostics(profiles, sched, params)
        assert diag.strict[0] and diag.positivity[0]

    def test_uniform_matches_priceless_condition(self, rng):
        # under a shared price the weighting cancels: same verdict at any p
        profiles = make_profiles([100, 250, 400])
        params = make_params(n=3, r=20.0, z=5e-3)
        d1 = uniqueness_diagnostics(profiles, PriceSchedule.uniform(2.0, 3), params)
        d2 = uniqueness_diagnostics(profiles, PriceSchedule.uniform(90.0, 3), params)
        assert np.array_equal(d1.strict, d2.strict)
        assert np.array_equal(d1.positivity, d2.positivity)
