import math
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_distribution, random_params
from tricstat.analysis import is_connected_cluster, is_ring_block
from tricstat.energy import TABLE1, Bath, ReducedParams, bath_from_conc
from tricstat.ensemble import (
    SweepResult,
    dominant_state,
    dominant_state_given_n,
    find_mode_crossover,
    mean_occupancy,
    occupancy_distribution,
    state_probabilities,
    sweep,
)
from tricstat.errors import BathError, CrossoverNotFound, DegenerateEnsembleError, StateIndexError
from tricstat.lattice import LatticeSpec, canonical_codes, parse_state, popcounts

ZERO = ReducedParams.zeros()


class TestStateProbabilities:
    def test_flat_ensemble(self, spec16):
        p = state_probabilities(ZERO, bath_from_conc(5, 25), spec16)
        assert np.allclose(p, 2.0**-16, rtol=1e-12, atol=0)

    def test_equal_within_orbit(self, spec16):
        p = state_probabilities(TABLE1, bath_from_conc(120, 25), spec16)
        canon = canonical_codes(np.arange(spec16.num_states), spec16)
        assert np.allclose(p, p[canon], rtol=1e-10, atol=0)

    def test_ring3_against_plain_enumeration(self):
        spec = LatticeSpec(3)
        params = ReducedParams((1.2, -0.7, 0.4), (2.1, -1.3, 0.9), -12.0)
        dist = occupancy_distribution(params, Bath(10.0, 20.0), spec)
        expected = brute_distribution(params, 20.0, 3)
        assert np.allclose(dist.p_n, expected, rtol=1e-12, atol=1e-15)

    def test_all_states_forbidden(self, spec16):
        with pytest.raises(DegenerateEnsembleError):
            state_probabilities(TABLE1, Bath(1.0, 0.0), spec16)

    def test_no_overflow_at_saturation(self, spec16):
        p = state_probabilities(TABLE1, bath_from_conc(1e4, 25), spec16)
        assert np.all(np.isfinite(p))
        assert abs(p.sum() - 1) < 1e-12


class TestOccupancyDistribution:
    def test_binomial_center(self, spec16):
        d = occupancy_distribution(ZERO, bath_from_conc(5, 25), spec16)
        assert d.p_n[8] == pytest.approx(comb(16, 8) / 2**16, abs=1e-12)
        assert round(d.p_n[8], 5) == 0.19638
        assert d.mean_n == pytest.approx(8, abs=1e-12)

    @pytest.mark.parametrize("R", [3, 7, 8, 9])
    def test_binomial_degeneracy(self, R):
        spec = LatticeSpec(R)
        M = spec.total_sites
        d = occupancy_distribution(ZERO, bath_from_conc(1e3, 25, spec), spec)
        exact = np.array([comb(M, n) for n in range(M + 1)]) / 2.0**M
        assert np.max(np.abs(d.p_n - exact)) < 1e-12

    def test_table1_mode_at_500(self, spec16):
        d = occupancy_distribution(TABLE1, bath_from_conc(500, 25), spec16)
        assert d.mode_all == 8 and d.mode_nonzero == 8

    def test_low_atp_modes(self, spec16):
        d = occupancy_distribution(TABLE1, bath_from_conc(5, 25), spec16)
        assert d.mode_all == 0
        assert d.mode_nonzero >= 1

    def test_mean_two_routes_agree(self, spec16):
        for conc in (5, 60, 107, 1e4):
            bath = bath_from_conc(conc, 25)
            d = occupancy_distribution(TABLE1, bath, spec16)
            assert abs(d.mean_n - mean_occupancy(TABLE1, bath, spec16)) < 1e-12

    def test_chunking_does_not_change_result(self, spec16):
        bath = bath_from_conc(80, 25)
        whole = occupancy_distribution(TABLE1, bath, spec16)
        pieces = occupancy_distribution(TABLE1, bath, spec16, chunk_size=1000)
        assert np.allclose(whole.log_p_n, pieces.log_p_n, rtol=0, atol=1e-12)
        assert pieces.dominant_state == whole.dominant_state

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000), log_conc=st.floats(math.log(3.5), math.log(1e4)))
    def test_invariants_random_params(self, seed, log_conc):
        spec = LatticeSpec(5)
        params = random_params(np.random.default_rng(seed))
        bath = bath_from_conc(math.exp(log_conc), 25, spec)
        d = occupancy_distribution(params, bath, spec)
        assert abs(d.p_n.sum() - 1) < 1e-12
        assert np.all((d.p_n >= 0) & (d.p_n <= 1))
        assert abs(d.mean_n - np.dot(np.arange(11), d.p_n)) < 1e-12
        assert 0 <= d.mean_n <= 10
        assert abs(d.mean_n - mean_occupancy(params, bath, spec)) < 1e-12 * max(1, d.mean_n)


class TestMeanOccupancy:
    def test_flat(self, spec16):
        assert mean_occupancy(ZERO, bath_from_conc(5, 25), spec16) == pytest.approx(8, abs=1e-12)

    def test_saturates_towards_eight(self, spec16):
        m = mean_occupancy(TABLE1, bath_from_conc(1e4, 25), spec16)
        assert 7.0 <= m <= 8.5

    def test_rises_with_atp(self, spec16):
        assert mean_occupancy(TABLE1, bath_from_conc(5, 25), spec16) < mean_occupancy(
            TABLE1, bath_from_conc(50, 25), spec16
        )


class TestDominantState:
    def test_low_atp_empty(self, spec16):
        dom = dominant_state(TABLE1, bath_from_conc(5, 25), spec16)
        assert str(dom.state) == "[00000000][00000000]" and not dom.tie

    def test_high_atp_full_ring(self, spec16):
        dom = dominant_state(TABLE1, bath_from_conc(500, 25), spec16)
        assert dom.state == parse_state("[11111111][00000000]")
        assert not dom.tie

    def test_flat_ensemble_ties(self, spec16):
        dom = dominant_state(ZERO, bath_from_conc(5, 25), spec16)
        assert dom.tie and dom.state.index == 1

    def test_given_n_examples(self, spec16):
        bath = bath_from_conc(500, 25)
        two = dominant_state_given_n(2, TABLE1, bath, spec16).state
        assert two == parse_state("[11000000][00000000]")
        assert dominant_state_given_n(8, TABLE1, bath, spec16).state == parse_state("[11111111][00000000]")
        assert dominant_state_given_n(16, TABLE1, bath, spec16).state.n_bound == 16

    def test_given_n_bounds(self, spec16):
        with pytest.raises(StateIndexError):
            dominant_state_given_n(17, TABLE1, bath_from_conc(500, 25), spec16)

    def test_given_n_matches_restricted_argmin(self, spec16):
        bath = bath_from_conc(500, 25)
        from tricstat.energy import reduced_energies

        e = reduced_energies(TABLE1, bath, spec16)
        pc = popcounts(spec16)
        for n in (3, 11):
            dom = dominant_state_given_n(n, TABLE1, bath, spec16)
            assert dom.energy == pytest.approx(e[pc == n].min(), abs=1e-12)

    @pytest.mark.parametrize("n", range(2, 9))
    def test_contiguous_block_n2_to_8(self, spec16, n):
        state = dominant_state_given_n(n, TABLE1, bath_from_conc(500, 25), spec16).state
        assert is_ring_block(state, spec16)

    @pytest.mark.parametrize("n", [10, 15])
    def test_gathered_cluster(self, spec16, n):
        state = dominant_state_given_n(n, TABLE1, bath_from_conc(500, 25), spec16).state
        assert is_connected_cluster(state, spec16)


class TestSweep:
    def test_single_point(self, spec16):
        res = sweep(TABLE1, [5], 25, spec16)
        assert len(res.rows) == 1 and res.rows[0].n_total == 25

    def test_empty(self, spec16):
        assert sweep(TABLE1, [], 25, spec16).rows == []

    def test_monotone_mean_on_log_grid(self, spec16):
        res = sweep(TABLE1, np.geomspace(5, 1e4, 50), 25, spec16)
        means = [r.dist.mean_n for r in res.rows]
        assert all(b >= a for a, b in zip(means, means[1:]))

    def test_unsorted_rejected(self, spec16):
        with pytest.raises(ValueError):
            sweep(TABLE1, [50, 5], 25, spec16)

    def test_bath_error_names_concentration(self, spec16):
        with pytest.raises(BathError, match=r"\[ATP\]=2 uM"):
            sweep(TABLE1, [2, 5], 25, spec16)

    def test_csv_round_trip(self, spec16):
        res = sweep(TABLE1, [5, 118.5, 1e4], 25, spec16)
        text = res.to_csv()
        assert text.splitlines()[0] == ",".join(
            ["atp_uM", "N", "mean_n", *[f"P{n}" for n in range(17)], "mode_all", "mode_nonzero", "dominant_state"]
        )
        back = SweepResult.from_csv(text)
        for a, b in zip(res.rows, back.rows):
            assert abs(a.atp_conc - b.atp_conc) <= 1e-12 and abs(a.n_total - b.n_total) <= 1e-12
            assert np.max(np.abs(a.dist.p_n - b.dist.p_n)) <= 1e-12
            assert (a.dist.mode_all, a.dist.mode_nonzero) == (b.dist.mode_all, b.dist.mode_nonzero)
            assert a.dist.dominant_state == b.dist.dominant_state

    def test_json_round_trip(self, spec16):
        res = sweep(TABLE1, [5, 500], 25, spec16, engine="dp")
        back = SweepResult.from_json(res.to_json())
        assert back.rows[1].dist.dominant_state is None
        assert np.max(np.abs(back.rows[1].dist.p_n - res.rows[1].dist.p_n)) <= 1e-12


class TestCrossover:
    def test_table1_window(self, spec16):
        c = find_mode_crossover(TABLE1, 25, spec16, 5, 500)
        assert 90 <= c <= 130
        # resolution 0.1 uM: just below has not switched, at c it has
        below = occupancy_distribution(TABLE1, bath_from_conc(c - 0.1, 25), spec16).mode_all
        at = occupancy_distribution(TABLE1, bath_from_conc(c, 25), spec16).mode_all
        assert below == 0 and at == 8

    def test_engines_agree(self, spec16):
        assert find_mode_crossover(TABLE1, 25, spec16, 5, 500, engine="dp") == find_mode_crossover(
            TABLE1, 25, spec16, 5, 500, engine="enum"
        )

    def test_degenerate_bounds(self, spec16):
        with pytest.raises(ValueError):
            find_mode_crossover(TABLE1, 25, spec16, 50, 50)

    def test_flat_model_has_no_crossover(self, spec16):
        with pytest.raises(CrossoverNotFound):
            find_mode_crossover(ZERO, 25, spec16, 5, 500)
