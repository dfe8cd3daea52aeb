"""Closed-form and exact min-entropy estimators for IID and IND response bits."""

import math
from dataclasses import dataclass
from functools import partial
from typing import Iterable, Sequence

import numpy as np

from ..codes import EXACT_MAX_BLOCK_BITS, LinearBlockCode, coset_leaders
from ..dataset import BiasVector
from ..errors import CapabilityError, ParameterError
from ..parallel import ordered_map

IID = "iid"
IND = "ind"
MODELS = (IID, IND)

# Helper-data enumeration touches |Y| * |W| responses; keep it to small blocks.
GENERAL_MAX_BLOCK_BITS = 20
# Rows of the (response x codeword) matrix evaluated per chunk.
_CHUNK_ROWS = 1 << 16


@dataclass(frozen=True)
class BlockPartition:
    """Consecutive, disjoint blocks of n_b positions starting at position 0."""

    code: LinearBlockCode
    block_count: int

    @property
    def n_used(self) -> int:
        return self.block_count * self.code.n_b

    @property
    def k(self) -> int:
        return self.block_count * self.code.k_b

    @property
    def assignments(self) -> list[range]:
        n_b = self.code.n_b
        return [range(i * n_b, (i + 1) * n_b) for i in range(self.block_count)]

    def blocks(self, bias: BiasVector) -> list[BiasVector]:
        if bias.n < self.n_used:
            raise ParameterError(
                f"Bias vector has {bias.n} positions, partition needs {self.n_used}"
            )
        return [bias.slice(r.start, r.stop) for r in self.assignments]


def make_partition(code: LinearBlockCode, n: int) -> BlockPartition:
    """N_b = floor(n / n_b) blocks over the first N_b * n_b positions."""
    block_count = n // code.n_b
    if block_count < 1:
        raise ParameterError(f"{code.name} needs at least {code.n_b} positions, got {n}")
    return BlockPartition(code=code, block_count=block_count)


def _as_array(p: BiasVector | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(p, BiasVector):
        return p.p
    return np.atleast_1d(np.asarray(p, dtype=np.float64))


def log2_bit_probs(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log2 p_i, log2(1 - p_i)) with log2(0) = -inf."""
    with np.errstate(divide="ignore"):
        return np.log2(p), np.log2(1.0 - p)


def log2_probs(xs: np.ndarray, p: np.ndarray) -> np.ndarray:
    """log2 P(X = x) for int bit sets x under independent bits with P(x_i = 1) = p_i."""
    lp1, lp0 = log2_bit_probs(p)
    out = np.zeros(np.shape(xs), dtype=np.float64)
    for i in range(len(p)):
        out += np.where((xs >> i) & 1, lp1[i], lp0[i])
    return out


def neg_log2_sum(log_terms: Iterable[float] | np.ndarray) -> float:
    """-log2(sum 2^t), shifted by the largest term and summed with math.fsum."""
    if not isinstance(log_terms, np.ndarray):
        log_terms = list(log_terms)
    terms = np.asarray(log_terms, dtype=np.float64)
    terms = terms[terms > -np.inf]
    if terms.size == 0:
        return math.inf
    top = float(terms.max())
    return -(top + math.log2(math.fsum(np.exp2(terms - top))))


def _xlog2(count: int, value: float) -> float:
    if count == 0:
        return 0.0
    if value == 0.0:
        return -math.inf
    return count * math.log2(value)


def min_entropy_iid(p: float, n: int) -> float:
    """m = -n log2(max(p, 1 - p))."""
    return max(0.0, -n * math.log2(max(p, 1.0 - p)))


def per_bit_entropy(bias: BiasVector) -> np.ndarray:
    """-log2(max(p_i, 1 - p_i)) for each position."""
    return -np.log2(np.maximum(bias.p, 1.0 - bias.p))


def per_bit_traces(bias: BiasVector) -> tuple[np.ndarray, np.ndarray]:
    """Per-position entropy under IID (mean bias at every position) and under IND."""
    iid = np.full(bias.n, min_entropy_iid(bias.mean(), 1))
    return iid, per_bit_entropy(bias)


def min_entropy_ind(bias: BiasVector) -> float:
    """m~ = -sum_i log2(max(p_i, 1 - p_i))."""
    return max(0.0, math.fsum(per_bit_entropy(bias)))


def nk_bound(m: float, k: float, n: float, L: float = 0.0) -> float:
    """l = m + k - n - L; may be negative."""
    return m + k - n - L


def blockwise_nk_trace(bias: BiasVector, part: BlockPartition) -> list[float]:
    """Unclamped per-block estimate m~_i + k_b - n_b."""
    code = part.code
    return [min_entropy_ind(b) + code.k_b - code.n_b for b in part.blocks(bias)]


def nk_bound_blockwise(bias: BiasVector, part: BlockPartition) -> tuple[float, list[float]]:
    """l~ = sum_i max(m~_i + k_b - n_b, 0); returns (total, per-block values)."""
    per_block = [max(v, 0.0) for v in blockwise_nk_trace(bias, part)]
    return math.fsum(per_block), per_block


def _check_block(code: LinearBlockCode, p: np.ndarray) -> None:
    if p.size != code.n_b:
        raise ParameterError(f"{code.name}: block bias has {p.size} positions, expected {code.n_b}")


def _best_guess_log_probs(xs: np.ndarray, words: np.ndarray, p: np.ndarray) -> np.ndarray:
    """max over codewords w of log2 P(X = x XOR w), for each x."""
    best = np.empty(xs.size, dtype=np.float64)
    for start in range(0, xs.size, _CHUNK_ROWS):
        chunk = xs[start : start + _CHUNK_ROWS]
        best[start : start + chunk.size] = log2_probs(chunk[:, None] ^ words[None, :], p).max(
            axis=1
        )
    return best


def exact_cond_min_entropy_general(code: LinearBlockCode, p_block) -> float:
    """
    Average conditional min-entropy by enumerating all helper data y.

    H = -log2( 1/|R| * sum_y max_w P(X = y XOR w) )

    Raises:
        CapabilityError: n_b > GENERAL_MAX_BLOCK_BITS
    """
    p = _as_array(p_block)
    _check_block(code, p)
    if code.n_b > GENERAL_MAX_BLOCK_BITS:
        raise CapabilityError(
            f"{code.name}: helper-data enumeration limited to n_b <= {GENERAL_MAX_BLOCK_BITS}"
        )
    ys = np.arange(1 << code.n_b, dtype=np.int64)
    best = _best_guess_log_probs(ys, code.codeword_array(), p)
    return neg_log2_sum(best) + code.k_b


def exact_cond_min_entropy_linear(
    code: LinearBlockCode, p_block, max_bits: int = EXACT_MAX_BLOCK_BITS
) -> float:
    """
    Average conditional min-entropy over coset leaders (linear codes).

    H = -log2( sum_{e in E} max_w P(X = e XOR w) )

    Raises:
        CapabilityError: coset-leader table infeasible
    """
    p = _as_array(p_block)
    _check_block(code, p)
    leaders = coset_leaders(code, max_bits=max_bits).leaders
    best = _best_guess_log_probs(leaders, code.codeword_array(), p)
    return neg_log2_sum(best)


@dataclass(frozen=True)
class ExactEntropy:
    """Exact conditional min-entropy summed over the blocks of a partition."""

    model: str
    total: float
    per_block: list[float]


def exact_iid_block(code: LinearBlockCode, p: float) -> float:
    """Exact value of one block whose positions all share bias p."""
    return exact_cond_min_entropy_linear(code, np.full(code.n_b, p))


def _exact_block(code: LinearBlockCode, p: np.ndarray) -> float:
    return exact_cond_min_entropy_linear(code, p)


def exact_cond_min_entropy_total(
    code: LinearBlockCode,
    bias: BiasVector,
    part: BlockPartition,
    model: str,
    workers: int | None = None,
) -> ExactEntropy:
    """
    IID: one block at the mean bias of the used positions, times N_b.
    IND: sum of per-block values, each with its own p_i.
    """
    if model not in MODELS:
        raise ParameterError(f"Unknown model '{model}' (expected one of {MODELS})")
    if model == IID:
        p_mean = bias.slice(0, part.n_used).mean()
        value = exact_iid_block(code, p_mean)
        per_block = [value] * part.block_count
        return ExactEntropy(model=model, total=value * part.block_count, per_block=per_block)

    # fail before spawning workers
    coset_leaders(code)
    blocks = [b.p for b in part.blocks(bias)]
    per_block = ordered_map(partial(_exact_block, code), blocks, workers=workers)
    return ExactEntropy(model=model, total=math.fsum(per_block), per_block=per_block)


def delvaux_iid_bound(code: LinearBlockCode, p: float) -> float:
    """
    Lower bound per block under IID bits from the 2^(n_b - k_b) most likely responses.

    Responses are grouped by Hamming distance j to the best guess; a group has
    C(n_b, j) members with probability q^j (1 - q)^(n_b - j), q = min(p, 1 - p).
    Groups are accumulated in increasing j, the last one partially.
    """
    q = min(p, 1.0 - p)
    n_b = code.n_b
    return neg_log2_sum(
        math.log2(take) + _xlog2(j, q) + _xlog2(n_b - j, 1.0 - q)
        for j, take in delvaux_iid_cover(code)
    )


def delvaux_iid_cover(code: LinearBlockCode) -> list[tuple[int, int]]:
    """(j, responses taken from group j) covering 2^(n_b - k_b) responses."""
    remaining = 1 << code.redundancy
    cover = []
    for j in range(code.n_b + 1):
        take = min(math.comb(code.n_b, j), remaining)
        cover.append((j, take))
        remaining -= take
        if remaining == 0:
            break
    return cover
