import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semcrra.compression_opt import (
    CompressionGrid,
    best_ratios,
    optimize_compression,
    subproblem_objective,
)
from semcrra.errors import DomainError
from semcrra.models import AccuracyModel, UserLink, effective_accuracy_bound

REF = AccuracyModel(0.8, -0.5, 0.1, -10.0)
FLAT = AccuracyModel(0.6, 0.0, 0.3, 0.0)

# Independent 1/4096 scan of exp(-((2^(2(1-o)) - 1))^2 / 2) * eta(o); see module notes.
FINE_SCAN_O = 0.821044921875
FINE_SCAN_VALUE = 0.5100456263601392


def link_ab(a, b, delta=1.0):
    # t0 = 1 ms, B = 1 MHz, N0 = 1e-9 -> P = b * 1e-3
    return UserLink(d0=a * 1e3, t0=1e-3, delta=delta, n0=1e-9, bandwidth=1e6, power=b * 1e-3)


def test_grid_candidates():
    grid = CompressionGrid(8)
    np.testing.assert_allclose(grid.candidates, np.arange(1, 8) / 8)
    assert CompressionGrid().n_features == 64
    with pytest.raises(DomainError):
        CompressionGrid(1)


class TestSubproblemObjective:
    def test_identity_with_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            link = link_ab(rng.uniform(0.1, 6), rng.uniform(0.1, 20), rng.uniform(0.2, 3))
            o = rng.uniform(0.01, 0.99)
            assert subproblem_objective(link, o, REF) == effective_accuracy_bound(link, o, REF)

    def test_huge_power_reduces_to_accuracy(self):
        link = link_ab(2.0, 1e12)
        assert subproblem_objective(link, 0.3, REF) == pytest.approx(REF(0.3), rel=1e-9)

    def test_flat_curve_increasing(self):
        link = link_ab(3.0, 2.0)
        values = [subproblem_objective(link, o, FLAT) for o in np.linspace(0.01, 0.99, 50)]
        assert np.all(np.diff(values) > 0)

    @pytest.mark.parametrize("o", [0.0, 1.0, -0.2])
    def test_open_interval(self, o):
        with pytest.raises(DomainError):
            subproblem_objective(link_ab(1, 1), o, REF)


class TestOptimizeCompression:
    def test_flat_curve_picks_largest(self):
        choice = optimize_compression(link_ab(3.0, 2.0), FLAT, CompressionGrid(64))
        assert choice.o_star == 63 / 64

    def test_certain_link_picks_smallest(self):
        choice = optimize_compression(link_ab(2.0, 1e12), REF, CompressionGrid(64))
        assert choice.o_star == 1 / 64

    def test_against_fine_scan(self):
        choice = optimize_compression(link_ab(2.0, 1.0), REF, CompressionGrid(64))
        assert abs(choice.o_star - FINE_SCAN_O) <= 1 / 64
        assert choice.value <= FINE_SCAN_VALUE
        refined = optimize_compression(link_ab(2.0, 1.0), REF, CompressionGrid(64), refine=True)
        assert refined.value == pytest.approx(FINE_SCAN_VALUE, abs=1e-6)
        assert abs(refined.o_star - FINE_SCAN_O) < 1 / 4096

    def test_exhaustive(self):
        link = link_ab(2.5, 3.0, 0.7)
        grid = CompressionGrid(32)
        choice = optimize_compression(link, REF, grid)
        explicit = max(subproblem_objective(link, o, REF) for o in grid.candidates)
        assert choice.value == explicit

    def test_permutation_invariant_and_ties_to_smaller(self):
        link = link_ab(2.0, 1.0)
        cand = CompressionGrid(16).candidates
        rng = np.random.default_rng(3)
        a = optimize_compression(link, REF, candidates=cand)
        b = optimize_compression(link, REF, candidates=rng.permutation(cand))
        assert a == b
        # constant objective everywhere -> smallest ratio wins
        tie = optimize_compression(link_ab(0.5, 1e15), AccuracyModel(0.7, 0, 0, 0),
                                   candidates=[0.6, 0.2, 0.4])
        assert tie.o_star == 0.2

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.2, 6.0), b=st.floats(0.1, 30.0), factor=st.floats(1.0, 100.0))
    def test_more_power_never_hurts(self, a, b, factor):
        low = optimize_compression(link_ab(a, b), REF)
        high = optimize_compression(link_ab(a, b * factor), REF)
        assert high.value >= low.value


def test_best_ratios_matches_scalar_path():
    rng = np.random.default_rng(11)
    links = [link_ab(rng.uniform(0.5, 5), rng.uniform(0.5, 10), rng.uniform(0.3, 2)) for _ in range(7)]
    o, v = best_ratios(
        [l.d0 for l in links], 1e-3, 1e-9, [l.delta for l in links],
        [l.bandwidth for l in links], [l.power for l in links], REF)
    for link, oi, vi in zip(links, o, v):
        c = optimize_compression(link, REF)
        assert (c.o_star, c.value) == (oi, pytest.approx(vi, rel=1e-14))
    models = [REF, FLAT] * 3 + [REF]
    o2, _ = best_ratios([l.d0 for l in links], 1e-3, 1e-9, [l.delta for l in links],
                        [l.bandwidth for l in links], [l.power for l in links], models)
    assert o2[1] == optimize_compression(links[1], FLAT).o_star
    assert math.isfinite(float(np.sum(v)))
