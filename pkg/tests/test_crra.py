import math

import numpy as np
import pytest

from semcrra.compression_opt import CompressionGrid, optimize_compression
from semcrra.crra import (
    METHODS,
    SolverConfig,
    brute_force_joint,
    crra_solve,
    evaluate,
    fcr_solve,
    fra_solve,
    msr_allocation,
    msr_solve,
    solve,
    sum_rate,
)
from semcrra.crra import _project_simplex
from semcrra.errors import DomainError, InfeasibleBudgetError, OracleScaleError
from semcrra.models import AccuracyModel, UserLink
from semcrra.resource_opt import Budgets

N0 = 10 ** -20.4
T0 = 5e-3
REF = AccuracyModel(0.8, -0.5, 0.1, -10.0)
# flat until heavy compression, then a sharp drop
STEEP = AccuracyModel(0.9, 0.0, -0.02, 3.8)


def link(delta, d0=24.5e3):
    return UserLink(d0=d0, t0=T0, delta=delta, n0=N0, bandwidth=1e6, power=0.01)


def asym_pair():
    return [link(1.5e-12), link(6e-12)], Budgets(1e4, 2e6, 1e-5, 0.02)


def random_pair(rng):
    links = [link(rng.uniform(0.1, 3.0) * 1e-11, 24.5e3 * rng.uniform(0.5, 2.0)) for _ in range(2)]
    return links, Budgets(1e4, rng.uniform(5e5, 5e6), 1e-5, rng.uniform(0.002, 0.05))


class TestConfig:
    def test_fixed_o_open_interval(self):
        for bad in (0.0, 1.0, 1.5):
            with pytest.raises(DomainError):
                SolverConfig(fixed_o=bad)

    def test_bad_tolerances(self):
        with pytest.raises(DomainError):
            SolverConfig(tol=0.0)
        with pytest.raises(DomainError):
            SolverConfig(max_iters=0)


class TestCRRA:
    def test_pinned_single_user_is_ratio_choice(self):
        lk = link(3e-11)
        budgets = Budgets(2e6, 2e6, 0.03, 0.03)
        sol = crra_solve([lk], REF, budgets)
        choice = optimize_compression(lk.with_allocation(2e6, 0.03), REF)
        assert sol.o[0] == choice.o_star
        assert sol.surrogate_objective == pytest.approx(choice.value, rel=1e-12)
        assert sol.converged

    @pytest.mark.parametrize("model", [REF, STEEP])
    def test_symmetric_users(self, model):
        links = [link(3e-11)] * 4
        budgets = Budgets(1e4, 4e6, 1e-5, 0.04)
        sol = crra_solve(links, model, budgets)
        single = optimize_compression(links[0].with_allocation(1e6, 0.01), model)
        assert np.all(sol.o == sol.o[0])
        np.testing.assert_allclose(sol.allocation.bandwidth, 1e6, rtol=1e-6)
        assert sol.surrogate_objective == pytest.approx(4 * single.value, rel=1e-9)

    @pytest.mark.parametrize("model", [REF, STEEP])
    def test_asymmetric_pair_matches_joint_grid(self, model):
        links, budgets = asym_pair()
        sol = crra_solve(links, model, budgets)
        oracle = brute_force_joint(links, model, budgets, grid_resolution=400)
        assert sol.surrogate_objective >= 0.99 * oracle.surrogate_objective

    def test_random_pairs_match_joint_grid(self):
        rng = np.random.default_rng(21)
        for _ in range(6):
            links, budgets = random_pair(rng)
            sol = crra_solve(links, REF, budgets)
            oracle = brute_force_joint(links, REF, budgets, grid_resolution=300)
            assert sol.surrogate_objective >= 0.99 * oracle.surrogate_objective

    def test_escape_probe_leaves_stalled_point(self):
        # block ascent stops at o = (0.78, 0.78); the optimum silences user 0
        links = [link(2.443e-11, 41834.0), link(9.288e-12, 31188.0)]
        budgets = Budgets(1e4, 7.4e5, 1e-5, 0.0204)
        oracle = brute_force_joint(links, REF, budgets, grid_resolution=400).surrogate_objective
        plain = crra_solve(links, REF, budgets, SolverConfig(escape=False))
        full = crra_solve(links, REF, budgets)
        assert plain.surrogate_objective < 0.99 * oracle
        assert full.surrogate_objective >= 0.999 * oracle
        assert full.o[0] == CompressionGrid().candidates[-1]
        assert full.probes > 0

    def test_history_monotone_and_budgets(self):
        rng = np.random.default_rng(4)
        links = [link(d) for d in rng.uniform(0.2, 4.0, 6) * 1e-11]
        budgets = Budgets(1e4, 3e6, 1e-5, 0.05)
        sol = crra_solve(links, STEEP, budgets)
        assert np.all(np.diff(sol.history) >= -1e-10)
        assert sol.history[-1] == pytest.approx(sol.surrogate_objective, rel=1e-9, abs=1e-12)
        assert budgets.satisfied_by(sol.allocation.bandwidth, sol.allocation.power)
        assert sol.iterations <= 30 and sol.converged

    def test_iteration_cap_flags(self):
        rng = np.random.default_rng(4)
        links = [link(d) for d in rng.uniform(0.2, 4.0, 6) * 1e-11]
        budgets = Budgets(1e4, 3e6, 1e-5, 0.05)
        sol = crra_solve(links, STEEP, budgets, SolverConfig(max_iters=1))
        assert sol.iterations == 1
        assert not sol.converged

    def test_deterministic(self):
        links, budgets = asym_pair()
        a = crra_solve(links, STEEP, budgets)
        b = crra_solve(links, STEEP, budgets)
        assert a.surrogate_objective == b.surrogate_objective
        np.testing.assert_array_equal(a.allocation.power, b.allocation.power)
        np.testing.assert_array_equal(a.o, b.o)

    def test_per_user_models(self):
        links, budgets = asym_pair()
        sol = crra_solve(links, [REF, STEEP], budgets)
        sur, exact = evaluate(links, [REF, STEEP], sol.allocation.bandwidth,
                              sol.allocation.power, sol.o)
        assert sur == pytest.approx(sol.surrogate_objective, rel=1e-12)
        with pytest.raises(DomainError):
            crra_solve(links, [REF], budgets)

    def test_infeasible(self):
        with pytest.raises(InfeasibleBudgetError):
            crra_solve([link(1e-11)] * 3, REF, Budgets(1e6, 2e6, 1e-5, 0.1))


class TestBaselines:
    def test_fcr_at_crra_ratios(self):
        links, budgets = asym_pair()
        crra = crra_solve(links, REF, budgets)
        fcr = fcr_solve(links, REF, budgets, fixed_o=crra.o)
        assert fcr.surrogate_objective == pytest.approx(crra.surrogate_objective, rel=1e-4)
        np.testing.assert_array_equal(fcr.o, crra.o)

    def test_fcr_default_ratio(self):
        links, budgets = asym_pair()
        sol = fcr_solve(links, REF, budgets)
        np.testing.assert_array_equal(sol.o, [0.5, 0.5])
        with pytest.raises(DomainError):
            fcr_solve(links, REF, budgets, fixed_o=1.0)

    def test_fra_is_equal_split(self):
        links, budgets = asym_pair()
        sol = fra_solve(links, REF, budgets)
        np.testing.assert_array_equal(sol.allocation.bandwidth, [1e6, 1e6])
        np.testing.assert_array_equal(sol.allocation.power, [0.01, 0.01])
        for lk, o in zip(links, sol.o):
            assert o == optimize_compression(lk.with_allocation(1e6, 0.01), REF).o_star

    @pytest.mark.parametrize("model", [REF, STEEP])
    def test_fra_strictly_below_crra_when_asymmetric(self, model):
        links, budgets = asym_pair()
        assert fra_solve(links, model, budgets).surrogate_objective < \
            crra_solve(links, model, budgets).surrogate_objective - 1e-4

    def test_symmetric_baselines_coincide(self):
        links = [link(3e-11)] * 4
        budgets = Budgets(1e4, 4e6, 1e-5, 0.04)
        crra = crra_solve(links, STEEP, budgets)
        fra = fra_solve(links, STEEP, budgets)
        msr = msr_solve(links, STEEP, budgets)
        assert fra.surrogate_objective == pytest.approx(crra.surrogate_objective, rel=1e-9)
        # equal SNR splits are all optimal for equal gains; the solver stays central
        np.testing.assert_allclose(msr.allocation.bandwidth, fra.allocation.bandwidth, rtol=1e-6)
        np.testing.assert_allclose(msr.allocation.power, fra.allocation.power, rtol=1e-6)
        assert msr.surrogate_objective == pytest.approx(fra.surrogate_objective, rel=1e-8)

    def test_dominance_on_random_instances(self):
        rng = np.random.default_rng(9)
        for _ in range(3):
            links = [link(d) for d in rng.uniform(0.2, 4.0, 3) * 1e-11]
            budgets = Budgets(1e4, rng.uniform(1e6, 1e7), 1e-5, rng.uniform(0.005, 0.2))
            sols = {m: solve(m, links, STEEP, budgets) for m in METHODS}
            for m in ("FCR", "FRA", "MSR"):
                assert sols["CRRA"].surrogate_objective >= sols[m].surrogate_objective - 1e-6
            for s in sols.values():
                assert s.exact_objective <= s.surrogate_objective + 1e-12
                assert s.method_tag in METHODS

    def test_unknown_method(self):
        links, budgets = asym_pair()
        with pytest.raises(DomainError):
            solve("greedy", links, REF, budgets)
        assert solve("fra", links, REF, budgets).method_tag == "FRA"


class TestSumRate:
    def test_projection_kkt(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            lo = rng.uniform(0.0, 0.1)
            v = rng.normal(1.0, 2.0, n)
            x = _project_simplex(v, lo, float(n))
            assert x.sum() == pytest.approx(n, rel=1e-12)
            assert np.all(x >= lo - 1e-15)
            # x = max(v - tau, lo) for a single threshold tau
            free = x > lo + 1e-12
            tau = np.mean((v - x)[free])
            np.testing.assert_allclose(x, np.maximum(v - tau, lo), atol=1e-10)

    def test_pair_matches_grid(self):
        links = [link(4e-12), link(2.5e-11)]
        budgets = Budgets(2e5, 2e6, 1e-3, 0.01)
        alloc = msr_allocation(links, budgets)
        assert alloc.converged
        # plain 2-D scan over the two free shares
        res = 1001
        share = np.linspace(0.0, 1.0, res)
        b1 = budgets.b_min + share * (budgets.b_max - 2 * budgets.b_min)
        p1 = budgets.p_min + share * (budgets.p_max - 2 * budgets.p_min)
        bw = np.stack([b1, budgets.b_max - b1])[:, :, None]
        pw = np.stack([p1, budgets.p_max - p1])[:, None, :]
        hbar = np.array([lk.delta for lk in links])[:, None, None] * math.sqrt(2 / math.pi)
        total = np.sum(bw * np.log2(1 + hbar * pw / (N0 * bw)), axis=0)
        i, j = np.unravel_index(np.argmax(total), total.shape)
        cell_b = (budgets.b_max - 2 * budgets.b_min) / (res - 1)
        cell_p = (budgets.p_max - 2 * budgets.p_min) / (res - 1)
        assert abs(alloc.bandwidth[0] - b1[i]) <= cell_b
        assert abs(alloc.power[0] - p1[j]) <= cell_p
        # stationarity 1e-8 in equal-split units bounds the shortfall near 1e-9
        assert alloc.objective >= total[i, j] * (1 - 1e-9)
        assert alloc.objective == pytest.approx(sum_rate(links, alloc.bandwidth, alloc.power),
                                                rel=1e-12)

    def test_single_user(self):
        lk = link(1e-11)
        budgets = Budgets(1e4, 1e6, 1e-5, 0.01)
        alloc = msr_allocation([lk], budgets)
        assert alloc.bandwidth[0] == 1e6 and alloc.power[0] == 0.01
        assert alloc.objective == pytest.approx(sum_rate([lk], [1e6], [0.01]), rel=1e-12)


class TestJointOracle:
    def test_scale_limit(self):
        with pytest.raises(OracleScaleError):
            brute_force_joint([link(1e-11)] * 4, REF, Budgets(1e4, 1e6, 1e-5, 0.1))

    def test_matches_explicit_enumeration(self):
        links, budgets = asym_pair()
        grid = CompressionGrid(8)
        sol = brute_force_joint(links, REF, budgets, grid, grid_resolution=21)
        best = -1.0
        b = budgets.b_min + np.linspace(0, 1, 21) * (budgets.b_max - 2 * budgets.b_min)
        p = budgets.p_min + np.linspace(0, 1, 21) * (budgets.p_max - 2 * budgets.p_min)
        for bi in b:
            for pi in p:
                for o1 in grid.candidates:
                    for o2 in grid.candidates:
                        s, _ = evaluate(links, REF, [bi, budgets.b_max - bi],
                                        [pi, budgets.p_max - pi], [o1, o2])
                        best = max(best, s)
        assert sol.surrogate_objective == pytest.approx(best, rel=1e-12)
