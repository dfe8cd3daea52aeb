"""Tests for bias groups, flip-vector enumeration and the grouping bound."""

import itertools
import math

import numpy as np
import pytest

from puf_entropy.bounds.entropy import (
    delvaux_iid_bound,
    exact_cond_min_entropy_linear,
    log2_probs,
    make_partition,
)
from puf_entropy.bounds.grouping import (
    BiasGroup,
    BiasGroupSet,
    build_bias_groups,
    enumerate_top_groups,
    group_log_probs,
    grouping_bound_block,
    grouping_bound_total,
    grouping_table_block,
    quantization_error_bracket,
)
from puf_entropy.codes import code_by_name, make_repetition
from puf_entropy.dataset import BiasVector
from puf_entropy.errors import CapabilityError, ParameterError

SMALL_CODES = ["rep3", "rep5", "bch7_4_1", "bch15_5_3"]


def _groups(etas, thetas):
    members, start = [], 0
    for eta in etas:
        members.append(tuple(range(start, start + eta)))
        start += eta
    return BiasGroupSet(
        theta_delta=0.0,
        mode="highest",
        groups=tuple(BiasGroup(members=m, theta=t) for m, t in zip(members, thetas)),
    )


def _quantized(groups):
    p = np.empty(groups.n_b)
    for g in groups.groups:
        p[list(g.members)] = g.theta
    return p


def _random_normalized(rng, n):
    return rng.uniform(0.5, 1.0, size=n)


class TestBuildBiasGroups:
    def test_spread_rule(self):
        groups = build_bias_groups([0.6, 0.62, 0.9], 0.05, "highest")

        assert [g.members for g in groups.groups] == [(2,), (0, 1)]
        assert [g.theta for g in groups.groups] == [0.9, 0.62]

    @pytest.mark.parametrize(
        "mode,theta", [("highest", 0.62), ("lowest", 0.6), ("mean", 0.61), ("median", 0.61)]
    )
    def test_representative_modes(self, mode, theta):
        groups = build_bias_groups([0.6, 0.62], 0.05, mode)

        assert groups.groups[0].theta == pytest.approx(theta)

    def test_full_spread_gives_single_group(self):
        groups = build_bias_groups([0.55, 0.7, 0.99, 0.5], 1.0)

        assert len(groups.groups) == 1
        assert groups.groups[0].eta == 4
        assert groups.groups[0].theta == 0.99

    def test_zero_spread_gives_singletons(self):
        rng = np.random.default_rng(4)
        groups = build_bias_groups(_random_normalized(rng, 15), 0.0)

        assert len(groups.groups) == 15

    def test_invariants_on_random_vectors(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            p = _random_normalized(rng, 31)
            groups = build_bias_groups(p, 0.05)

            assert groups.n_b == 31
            members = sorted(i for g in groups.groups for i in g.members)
            assert members == list(range(31))
            for g in groups.groups:
                values = p[list(g.members)]
                assert values.max() - values.min() <= 0.05
                assert g.theta == values.max()

    def test_requires_normalized_bias(self):
        with pytest.raises(ParameterError):
            build_bias_groups([0.4, 0.9], 0.05)

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            build_bias_groups([0.6], 0.05, "max")


class TestGroupLogProbs:
    def test_best_guess_row(self):
        groups = _groups((2, 1), (0.9, 0.6))

        sigma = group_log_probs(groups, [[0, 0]])
        assert sigma[0] == pytest.approx(2 * math.log2(0.9) + math.log2(0.6))

    def test_single_flip(self):
        groups = _groups((3,), (0.9,))

        assert group_log_probs(groups, [[1]])[0] == pytest.approx(
            2 * math.log2(0.9) + math.log2(0.1)
        )

    def test_flip_in_deterministic_group_is_impossible(self):
        groups = _groups((2, 1), (1.0, 0.7))
        sigma = group_log_probs(groups, [[0, 1], [1, 0]])

        assert sigma[0] == pytest.approx(math.log2(0.3))
        assert sigma[1] == -math.inf

    def test_total_probability_is_one(self):
        groups = _groups((2, 3, 1), (0.9, 0.65, 0.55))
        rows = list(itertools.product(range(3), range(4), range(2)))
        sigma = group_log_probs(groups, rows)
        psi = [math.comb(2, a) * math.comb(3, b) * math.comb(1, c) for a, b, c in rows]

        assert math.fsum(n * 2.0**s for n, s in zip(psi, sigma)) == pytest.approx(1.0)

    def test_rejects_out_of_range_rows(self):
        with pytest.raises(ParameterError):
            group_log_probs(_groups((2,), (0.8,)), [[3]])


class TestEnumerateTopGroups:
    def test_single_group_three_repetition(self):
        table = enumerate_top_groups(_groups((3,), (0.9,)), target=4)

        assert table.Z.tolist() == [[0], [1]]
        assert table.psi == (1, 3)
        assert table.omega == 1
        assert table.partial_count == 3
        assert table.covered() == 4

    def test_matches_full_sort(self):
        groups = _groups((2, 1), (0.9, 0.6))
        table = enumerate_top_groups(groups, target=4)

        rows = sorted(
            itertools.product(range(3), range(2)),
            key=lambda z: -group_log_probs(groups, [z])[0],
        )
        assert [tuple(r) for r in table.Z] == rows[: table.omega + 1]
        assert table.covered() == 4

    def test_rows_non_increasing_and_cutoff_crossed_once(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            groups = build_bias_groups(_random_normalized(rng, 15), 0.05)
            table = enumerate_top_groups(groups, target=1 << 10)

            assert np.all(np.diff(table.sigma) <= 1e-12)
            before = sum(table.psi[: table.omega])
            assert before < table.target <= before + table.psi[table.omega]
            assert 1 <= table.partial_count <= table.psi[table.omega]

    def test_full_enumeration_conserves_mass(self):
        groups = _groups((3, 2, 4), (0.93, 0.71, 0.6))
        table = enumerate_top_groups(groups, target=1 << 9)

        assert table.covered() == 512
        assert table.bound() == pytest.approx(0.0, abs=1e-12)

    def test_zero_probability_groups_exhaust(self):
        table = enumerate_top_groups(_groups((3,), (1.0,)), target=4)

        assert table.exhausted
        assert table.bound() == pytest.approx(0.0)

    def test_half_biases_are_free_flips(self):
        table = enumerate_top_groups(_groups((4,), (0.5,)), target=8)

        assert table.bound() == pytest.approx(1.0)

    def test_target_out_of_range(self):
        with pytest.raises(ParameterError):
            enumerate_top_groups(_groups((2,), (0.8,)), target=5)

    @pytest.mark.parametrize("n_b,k_b", [(7, 4), (9, 3), (11, 5)])
    def test_covers_most_probable_responses(self, n_b, k_b):
        rng = np.random.default_rng(n_b)
        for theta_delta in (0.0, 0.05, 0.1):
            p = _random_normalized(rng, n_b)
            table = grouping_table_block(n_b, k_b, p, theta_delta)
            quantized = _quantized(table.groups)

            responses = table.expand_responses()
            assert len(set(responses)) == len(responses) == 1 << (n_b - k_b)

            all_lp = log2_probs(np.arange(1 << n_b), quantized)
            top = np.sort(all_lp)[::-1][: 1 << (n_b - k_b)]
            taken = np.sort(log2_probs(np.array(responses), quantized))[::-1]
            assert taken == pytest.approx(top, abs=1e-9)

    def test_covers_exact_set_without_boundary_ties(self):
        p = np.array([0.95, 0.9, 0.8, 0.7, 0.6])
        table = grouping_table_block(5, 2, p, 0.0)

        all_lp = log2_probs(np.arange(32), p)
        expected = set(np.argsort(-all_lp, kind="stable")[:8].tolist())
        assert set(table.expand_responses()) == expected

    def test_expand_refuses_huge_tables(self):
        table = grouping_table_block(63, 7, np.full(63, 0.7), 0.05)

        with pytest.raises(CapabilityError):
            table.expand_responses()

    def test_csv_dump(self):
        table = enumerate_top_groups(_groups((3,), (0.9,)), target=4)
        lines = table.to_csv(block=2).splitlines()

        assert lines[0] == "block,j,zeta_0,psi,sigma,taken"
        assert lines[2].startswith("2,1,1,3,")
        assert lines[2].endswith(",3")


class TestGroupingBound:
    @pytest.mark.parametrize("name", SMALL_CODES + ["bch31_6_7"])
    def test_unbiased_gives_k_b(self, name):
        code = code_by_name(name)

        assert grouping_bound_block(code.n_b, code.k_b, [0.5] * code.n_b, 0.05) == pytest.approx(
            code.k_b
        )

    def test_three_repetition_is_tight(self):
        code = make_repetition(3)
        p = [0.9, 0.8, 0.7]

        assert grouping_bound_block(3, 1, p, 0.0) == pytest.approx(
            exact_cond_min_entropy_linear(code, p), abs=1e-9
        )

    @pytest.mark.parametrize("name", ["rep3", "rep5", "rep7"])
    def test_repetition_codes_are_tight_without_quantization(self, name):
        code = code_by_name(name)
        rng = np.random.default_rng(21)
        for _ in range(100):
            p = _random_normalized(rng, code.n_b)
            bound = grouping_bound_block(code.n_b, code.k_b, p, 0.0)

            assert bound == pytest.approx(exact_cond_min_entropy_linear(code, p), abs=1e-9)

    @pytest.mark.parametrize("name", SMALL_CODES)
    def test_lower_bounds_exact_value(self, name):
        code = code_by_name(name)
        rng = np.random.default_rng(31)
        for _ in range(100):
            p = _random_normalized(rng, code.n_b)
            exact = exact_cond_min_entropy_linear(code, p)
            for theta_delta in (0.0, 0.02, 0.05, 0.1):
                bound = grouping_bound_block(code.n_b, code.k_b, p, theta_delta, "highest")
                assert bound <= exact + 1e-9

    @pytest.mark.parametrize("name", SMALL_CODES)
    def test_bracket_ordering(self, name):
        code = code_by_name(name)
        rng = np.random.default_rng(37)
        for _ in range(100):
            p = _random_normalized(rng, code.n_b)
            unquantized = grouping_bound_block(code.n_b, code.k_b, p, 0.0)
            low, high, error = quantization_error_bracket(code, p, 0.1)

            assert high <= low + 1e-9
            assert high - 1e-9 <= unquantized <= low + 1e-9
            assert error == pytest.approx(max(0.0, low - high))

    def test_zero_spread_collapses_bracket(self):
        rng = np.random.default_rng(41)
        code = code_by_name("bch15_5_3")
        low, high, error = quantization_error_bracket(code, _random_normalized(rng, 15), 0.0)

        assert low == high
        assert error == 0.0

    def test_single_group_bracket_example(self):
        code = make_repetition(3)
        p = [0.9, 0.8, 0.7]
        low, high, _ = quantization_error_bracket(code, p, 0.25)
        exact = exact_cond_min_entropy_linear(code, p)

        assert high == pytest.approx(delvaux_iid_bound(code, 0.9))
        assert low == pytest.approx(delvaux_iid_bound(code, 0.7))
        assert high <= exact <= low

    def test_bracket_normalizes_input(self):
        code = make_repetition(3)

        assert quantization_error_bracket(code, [0.1, 0.2, 0.3], 0.0)[1] == pytest.approx(
            grouping_bound_block(3, 1, [0.9, 0.8, 0.7], 0.0)
        )

    @pytest.mark.parametrize("name", SMALL_CODES + ["rep21", "bch31_6_7", "bch63_7_15"])
    def test_single_group_reproduces_iid_grouping(self, name):
        code = code_by_name(name)
        rng = np.random.default_rng(53)
        for _ in range(50 if code.n_b <= 31 else 5):
            p = rng.uniform(0.5, 1.0)
            bound = grouping_bound_block(code.n_b, code.k_b, np.full(code.n_b, p), 1.0)

            assert bound == pytest.approx(delvaux_iid_bound(code, p), rel=1e-12, abs=1e-12)

    def test_block_length_mismatch(self):
        with pytest.raises(ParameterError):
            grouping_bound_block(5, 1, [0.6] * 4, 0.05)


class TestGroupingBoundTotal:
    def test_sums_blocks_and_reports_progress(self):
        code = make_repetition(5)
        rng = np.random.default_rng(61)
        bias = BiasVector(p=rng.uniform(size=32))
        part = make_partition(code, bias.n)
        calls = []

        result = grouping_bound_total(
            code, bias, part, 0.05, progress_callback=lambda d, t: calls.append((d, t))
        )

        assert len(result.per_block) == 6
        assert result.total == pytest.approx(sum(result.per_block))
        assert calls[-1] == (6, 6)

    def test_mirrored_biases_give_the_same_bound(self):
        code = code_by_name("bch7_4_1")
        rng = np.random.default_rng(67)
        p = rng.uniform(size=21)
        part = make_partition(code, 21)

        direct = grouping_bound_total(code, BiasVector(p=p), part, 0.05)
        mirrored = grouping_bound_total(code, BiasVector(p=1.0 - p), part, 0.05)
        assert direct.total == pytest.approx(mirrored.total)

    def test_large_code_terminates_with_small_prefix(self):
        code = code_by_name("bch127_8_31")
        rng = np.random.default_rng(71)
        bias = BiasVector(p=np.clip(rng.normal(0.5, 0.15, size=254), 0.0, 1.0))
        part = make_partition(code, bias.n)

        result = grouping_bound_total(code, bias, part, 0.1)

        assert 0.0 <= result.total <= 16.0
        assert len(result.per_block) == 2
