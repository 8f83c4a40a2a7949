import itertools
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from conftest import brute_codewords, empty_graph
from loopcalc.errors import ParameterError, SamplingError, SizeGuardError
from loopcalc.tanner import (TannerGraph, codeword_masks, design_rate, enumerate_codewords,
                             null_space, sample_graph, satisfies_checks)


def test_forced_sizes():
    g = sample_graph(3, 6, 6, seed=1)
    assert (g.m, g.num_edges, g.l, g.r) == (3, 18, 3, 6)


def test_complete_bipartite_k43():
    g = sample_graph(3, 4, 4, seed=7)
    assert g.m == 3
    assert all(sorted(nb) == [0, 1, 2, 3] for nb in g.chk_adj)


@pytest.mark.parametrize("l,r,n", [(3, 4, 8), (3, 6, 12), (4, 6, 9), (3, 5, 10)])
def test_sampled_graph_is_regular_and_simple(l, r, n):
    for seed in range(5):
        g = sample_graph(l, r, n, seed)
        assert all(len(a) == l for a in g.var_adj)
        assert all(len(a) == r for a in g.chk_adj)
        assert len(set(g.edges)) == g.num_edges == n * l
        assert list(g.edges) == sorted(g.edges)


def test_sampling_is_reproducible():
    assert sample_graph(3, 6, 12, 5).edges == sample_graph(3, 6, 12, 5).edges
    assert sample_graph(3, 6, 12, 5).edges != sample_graph(3, 6, 12, 6).edges


@pytest.mark.parametrize("args", [(2, 4, 8), (3, 3, 6), (3, 6, 5), (3, 6, 7)])
def test_invalid_degrees(args):
    with pytest.raises(ParameterError):
        sample_graph(*args, seed=0)


def test_rejection_cap():
    with pytest.raises(SamplingError):
        sample_graph(3, 12, 12, seed=0, max_attempts=1)


def _overlap_distribution():
    """Exact law of |N(0) & N(1)| over all simple (3,4)-regular graphs with n=8."""
    subsets = list(itertools.combinations(range(6), 3))

    @lru_cache(None)
    def completions(i, deg):
        if i == 8:
            return int(all(d == 4 for d in deg))
        total = 0
        for s in subsets:
            d = list(deg)
            for c in s:
                d[c] += 1
            if max(d) <= 4:
                total += completions(i + 1, tuple(d))
        return total

    counts = np.zeros(4)
    first = (0, 1, 2)
    for second in subsets:
        deg = [0] * 6
        for c in first + second:
            deg[c] += 1
        counts[len(set(first) & set(second))] += completions(2, tuple(deg))
    return counts / counts.sum()


def test_sampler_uniform_on_small_ensemble():
    # exact law over simple graphs vs. 20k sampled graphs
    law = _overlap_distribution()
    trials = 20_000
    obs = np.zeros(4)
    for seed in range(trials):
        g = sample_graph(3, 4, 8, seed)
        obs[len(set(g.var_adj[0]) & set(g.var_adj[1]))] += 1
    keep = law > 0
    stat = (((obs - trials * law) ** 2)[keep] / (trials * law[keep])).sum()
    assert stat < chi2.ppf(0.999, keep.sum() - 1)


def test_design_rate_table_values():
    assert design_rate(3, 6) == Fraction(1, 2)
    assert design_rate(3, 4) == Fraction(1, 4)
    assert design_rate(3, 5) == Fraction(2, 5)
    assert design_rate(4, 6) == Fraction(1, 3)


def test_null_space_without_checks():
    basis = null_space(empty_graph(5))
    assert basis.rank == 0 and basis.codeword_count == 32


def test_null_space_complete_graph():
    g = sample_graph(3, 4, 4, seed=0)
    basis = null_space(g)
    words = {int(w) for w in codeword_masks(basis)}
    assert words == brute_codewords(g)
    assert (basis.rank == 3) == (words == {0, 0b1111})


@pytest.mark.parametrize("seed", range(4))
def test_codewords_match_exhaustive_filter(seed):
    g = sample_graph(3, 6, 12, seed)
    basis = null_space(g)
    words = enumerate_codewords(basis)
    masks = {int(w) for w in codeword_masks(basis)}
    assert masks == brute_codewords(g)
    assert len(words) == basis.codeword_count == 2 ** (12 - basis.rank)
    assert not words[0].any()
    for b in basis.masks:
        assert satisfies_checks(g, b)
    # independence: the basis has full GF(2) rank
    from loopcalc.tanner import gf2_rref
    assert len(gf2_rref(list(basis.masks), 12)[0]) == len(basis.masks)


def test_full_rank_code_has_only_zero_word():
    g = TannerGraph.from_edges(3, 3, [(0, 0), (1, 1), (2, 2)])
    words = enumerate_codewords(null_space(g))
    assert words.shape == (1, 3) and not words.any()


def test_guards():
    big = TannerGraph.from_edges(30, 0, [])
    with pytest.raises(SizeGuardError):
        null_space(big)
    with pytest.raises(SizeGuardError):
        codeword_masks(null_space(empty_graph(21)))


def test_json_roundtrip():
    g = sample_graph(3, 6, 12, 3)
    assert TannerGraph.from_json(g.to_json()).edges == g.edges


def test_parallel_edges_rejected():
    with pytest.raises(ParameterError):
        TannerGraph.from_edges(2, 1, [(0, 0), (0, 0), (1, 0)])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(3, 4, 8), (3, 6, 12), (4, 6, 9)]))
def test_codewords_closed_under_sum(seed, lrn):
    g = sample_graph(*lrn, seed)
    words = codeword_masks(null_space(g))
    wset = set(words.tolist())
    assert 0 in wset
    rng = np.random.default_rng(seed)
    for a, b in rng.choice(words, size=(10, 2)):
        assert int(a ^ b) in wset
