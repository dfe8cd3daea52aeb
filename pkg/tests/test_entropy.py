"""Tests for the closed-form and exact min-entropy estimators."""

import itertools
import math

import numpy as np
import pytest

from puf_entropy.bounds.entropy import (
    IID,
    IND,
    delvaux_iid_bound,
    delvaux_iid_cover,
    exact_cond_min_entropy_general,
    exact_cond_min_entropy_linear,
    exact_cond_min_entropy_total,
    exact_iid_block,
    make_partition,
    min_entropy_iid,
    min_entropy_ind,
    neg_log2_sum,
    nk_bound,
    nk_bound_blockwise,
    per_bit_traces,
)
from puf_entropy.codes import code_by_name, make_repetition
from puf_entropy.dataset import BiasVector
from puf_entropy.errors import CapabilityError, ParameterError

SMALL_CODES = ["rep3", "rep5", "bch7_4_1", "bch15_5_3"]


def _direct_oracle(code, p):
    """Helper-data sum written out over every y and every codeword."""
    n_b = code.n_b
    words = [tuple((w >> i) & 1 for i in range(n_b)) for w in code.codeword_masks]
    total = 0.0
    for y in itertools.product((0, 1), repeat=n_b):
        best = 0.0
        for w in words:
            prob = 1.0
            for yi, wi, pi in zip(y, w, p):
                prob *= pi if yi ^ wi else 1.0 - pi
            best = max(best, prob)
        total += best
    return -math.log2(total / len(words))


class TestClosedForms:
    @pytest.mark.parametrize(
        "p,n,expected", [(0.5, 8, 8.0), (1.0, 100, 0.0), (0.0, 5, 0.0), (0.25, 2, 0.830074998)]
    )
    def test_min_entropy_iid(self, p, n, expected):
        assert min_entropy_iid(p, n) == pytest.approx(expected)

    @pytest.mark.parametrize("p,expected", [((0.5, 0.5), 2.0), ((1.0, 0.5), 1.0), ((0.0,), 0.0)])
    def test_min_entropy_ind(self, p, expected):
        assert min_entropy_ind(BiasVector(p=p)) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "m,k,n,expected", [(239, 85, 255, 69.0), (236.22, 12, 252, -3.78), (187.3, 85, 255, 17.3)]
    )
    def test_nk_bound(self, m, k, n, expected):
        assert nk_bound(m, k, n) == pytest.approx(expected)

    def test_nk_bound_subtracts_hash_loss(self):
        assert nk_bound(100, 10, 100, L=4) == 6

    def test_per_bit_traces(self):
        iid, ind = per_bit_traces(BiasVector(p=[0.5, 1.0]))

        assert iid.tolist() == pytest.approx([-math.log2(0.75)] * 2)
        assert ind.tolist() == pytest.approx([1.0, 0.0])


class TestBlockwise:
    def test_partition_uses_leading_positions(self):
        part = make_partition(make_repetition(5), 256)

        assert part.block_count == 51
        assert part.n_used == 255
        assert part.k == 51
        assert part.assignments[1] == range(5, 10)

    def test_partition_too_short(self):
        with pytest.raises(ParameterError):
            make_partition(code_by_name("bch15_5_3"), 10)

    def test_unbiased_blocks_contribute_k_b(self):
        part = make_partition(code_by_name("bch7_4_1"), 21)
        total, per_block = nk_bound_blockwise(BiasVector(p=np.full(21, 0.5)), part)

        assert total == pytest.approx(12.0)
        assert per_block == pytest.approx([4.0, 4.0, 4.0])

    def test_deterministic_blocks_are_clamped(self):
        part = make_partition(make_repetition(3), 6)
        total, per_block = nk_bound_blockwise(BiasVector(p=[1.0] * 3 + [0.5] * 3), part)

        assert per_block == [0.0, 1.0]
        assert total == 1.0

    def test_blockwise_not_below_global(self):
        rng = np.random.default_rng(2)
        for name in ["rep5", "bch15_5_3"]:
            code = code_by_name(name)
            bias = BiasVector(p=rng.uniform(size=60))
            part = make_partition(code, 60)
            used = bias.slice(0, part.n_used)
            l_m_tilde = nk_bound(min_entropy_ind(used), part.k, part.n_used)

            assert nk_bound_blockwise(bias, part)[0] >= l_m_tilde


class TestExactGeneral:
    def test_unbiased_repetition_gives_k_b(self):
        assert exact_cond_min_entropy_general(make_repetition(3), [0.5] * 3) == pytest.approx(1.0)

    def test_deterministic_response_gives_zero(self):
        assert exact_cond_min_entropy_general(make_repetition(3), [1.0] * 3) == pytest.approx(0.0)

    def test_matches_direct_oracle(self):
        code = make_repetition(3)
        p = (0.9, 0.8, 0.7)

        assert exact_cond_min_entropy_general(code, p) == pytest.approx(_direct_oracle(code, p))

    def test_matches_direct_oracle_on_hamming(self):
        code = code_by_name("bch7_4_1")
        p = (0.55, 0.6, 0.9, 0.3, 0.5, 0.75, 0.99)

        assert exact_cond_min_entropy_general(code, p) == pytest.approx(_direct_oracle(code, p))

    def test_block_too_large(self):
        with pytest.raises(CapabilityError):
            exact_cond_min_entropy_general(make_repetition(21), [0.5] * 21)

    def test_wrong_block_length(self):
        with pytest.raises(ParameterError):
            exact_cond_min_entropy_general(make_repetition(3), [0.5] * 4)


class TestExactLinear:
    @pytest.mark.parametrize("name", SMALL_CODES)
    def test_agrees_with_general_form(self, name):
        code = code_by_name(name)
        rng = np.random.default_rng(42)
        for _ in range(100):
            p = rng.uniform(size=code.n_b)
            linear = exact_cond_min_entropy_linear(code, p)
            general = exact_cond_min_entropy_general(code, p)

            assert linear == pytest.approx(general, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("name", SMALL_CODES)
    def test_at_most_k_b_with_equality_when_unbiased(self, name):
        code = code_by_name(name)
        rng = np.random.default_rng(8)

        assert exact_cond_min_entropy_linear(code, [0.5] * code.n_b) == pytest.approx(code.k_b)
        for _ in range(10):
            value = exact_cond_min_entropy_linear(code, rng.uniform(size=code.n_b))
            assert value <= code.k_b + 1e-12

    def test_zero_probability_positions(self):
        value = exact_cond_min_entropy_linear(make_repetition(3), [1.0, 0.0, 0.5])

        assert value == pytest.approx(0.0)

    def test_sharpening_a_bias_never_raises_entropy(self):
        code = make_repetition(3)
        rng = np.random.default_rng(13)
        for _ in range(200):
            p = rng.uniform(0.5, 1.0, size=3)
            sharper = p.copy()
            i = rng.integers(3)
            sharper[i] = rng.uniform(p[i], 1.0)

            assert _direct_oracle(code, sharper) <= _direct_oracle(code, p) + 1e-12
            assert exact_cond_min_entropy_linear(code, sharper) <= (
                exact_cond_min_entropy_linear(code, p) + 1e-12
            )

    def test_large_codes_raise(self):
        with pytest.raises(CapabilityError):
            exact_cond_min_entropy_linear(code_by_name("bch31_6_7"), [0.5] * 31)


class TestExactTotal:
    def test_unbiased_total_is_k(self):
        code = code_by_name("bch7_4_1")
        bias = BiasVector(p=np.full(30, 0.5))
        part = make_partition(code, bias.n)

        for model in (IID, IND):
            assert exact_cond_min_entropy_total(code, bias, part, model).total == pytest.approx(
                part.k
            )

    def test_ind_sums_blocks(self):
        code = make_repetition(3)
        bias = BiasVector(p=[0.9, 0.8, 0.7, 0.5, 0.5, 0.5, 0.1])
        part = make_partition(code, bias.n)
        result = exact_cond_min_entropy_total(code, bias, part, IND)

        assert len(result.per_block) == 2
        assert result.per_block[1] == pytest.approx(1.0)
        assert result.total == pytest.approx(sum(result.per_block))

    def test_iid_uses_mean_of_used_positions(self):
        code = make_repetition(3)
        bias = BiasVector.from_counts([3, 3, 3, 1, 1, 1, 0], device_count=4)
        part = make_partition(code, bias.n)
        result = exact_cond_min_entropy_total(code, bias, part, IID)

        assert result.total == pytest.approx(2 * exact_iid_block(code, 0.5))

    def test_iid_equals_ind_on_constant_vector(self):
        code = code_by_name("bch15_5_3")
        bias = BiasVector(p=np.full(45, 0.62))
        part = make_partition(code, bias.n)

        iid = exact_cond_min_entropy_total(code, bias, part, IID)
        ind = exact_cond_min_entropy_total(code, bias, part, IND)
        assert iid.total == pytest.approx(ind.total, rel=1e-12)

    def test_unknown_model(self):
        code = make_repetition(3)
        bias = BiasVector(p=[0.5] * 3)

        with pytest.raises(ParameterError):
            exact_cond_min_entropy_total(code, bias, make_partition(code, 3), "both")

    def test_capability_error_propagates(self):
        code = code_by_name("bch63_7_15")
        bias = BiasVector(p=np.full(126, 0.6))

        with pytest.raises(CapabilityError):
            exact_cond_min_entropy_total(code, bias, make_partition(code, 126), IND)


class TestDelvauxBound:
    def test_three_repetition_example(self):
        code = make_repetition(3)

        assert delvaux_iid_bound(code, 0.9) == pytest.approx(-math.log2(0.729 + 3 * 0.081))
        assert delvaux_iid_bound(code, 0.1) == pytest.approx(-math.log2(0.972))

    def test_15_5_3_cover(self):
        cover = delvaux_iid_cover(code_by_name("bch15_5_3"))

        assert cover == [(0, 1), (1, 15), (2, 105), (3, 455), (4, 448)]

    @pytest.mark.parametrize("name", ["rep3", "rep5", "rep21"])
    def test_unbiased_repetition_gives_k_b(self, name):
        assert delvaux_iid_bound(code_by_name(name), 0.5) == pytest.approx(1.0)

    @pytest.mark.parametrize("name", SMALL_CODES)
    def test_lower_bounds_exact_iid(self, name):
        code = code_by_name(name)
        for p in (0.55, 0.62, 0.7, 0.85, 0.97):
            bound = delvaux_iid_bound(code, p)
            exact = exact_iid_block(code, p)

            assert bound <= exact + 1e-12
            if name.startswith("rep"):
                assert bound == pytest.approx(exact, rel=1e-9, abs=1e-12)


class TestNegLog2Sum:
    def test_ignores_zero_probability_terms(self):
        assert neg_log2_sum([-1.0, -math.inf, -1.0]) == pytest.approx(0.0)

    def test_empty_is_infinite(self):
        assert neg_log2_sum([]) == math.inf

    def test_handles_tiny_terms(self):
        assert neg_log2_sum(np.array([-2000.0, -2000.0])) == pytest.approx(1999.0)
