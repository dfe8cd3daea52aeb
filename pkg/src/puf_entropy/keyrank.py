"""Code-offset enrollment and key rank of an optimal guessing attacker.

The attacker knows the Bit-Alias vector p and the helper data y. For each block
it ranks the 2^k_b messages r by P(X = y XOR encode(r)) and guesses full keys
in descending order of their joint probability. The key rank is the number of
guesses made before the enrolled key.
"""

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Sequence

import numpy as np

from .bounds.entropy import BlockPartition, log2_bit_probs, make_partition
from .codes import LinearBlockCode, codewords, encode, message_index
from .dataset import BiasVector, DeviceResponses
from .errors import CapabilityError, Diagnostic, ParameterError, Severity
from .parallel import ordered_map

EXACT = "exact"
HISTOGRAM = "histogram"
AUTO = "auto"
METHODS = (AUTO, EXACT, HISTOGRAM)

DEFAULT_KEY_BITS = 144
DEFAULT_KEY_COUNT = 10
DEFAULT_BINS = 1 << 15
# Largest total message length ranked by full enumeration.
EXACT_MAX_KEY_BITS = 24

_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Enrollment:
    """Helper data of one key on one device."""

    device: int
    key: np.ndarray
    helper: np.ndarray
    code: str

    def block_messages(self, k_b: int) -> list[int]:
        """Enrolled message index per block."""
        return [message_index(self.key[i * k_b : (i + 1) * k_b]) for i in range(len(self.helper))]


def enroll(
    response, key, code: LinearBlockCode, part: BlockPartition, device: int = 0
) -> Enrollment:
    """
    Bind the first k key bits to a response: y_i = x_i XOR encode(r_i) per block.

    Raises:
        ParameterError: key shorter than k or response shorter than n_used
    """
    x = np.asarray(response, dtype=np.uint8).ravel()
    key = np.asarray(key, dtype=np.uint8).ravel()
    if key.size < part.k:
        raise ParameterError(f"Key has {key.size} bits, {code.name} needs {part.k}")
    if x.size < part.n_used:
        raise ParameterError(f"Response has {x.size} bits, {code.name} needs {part.n_used}")
    k_b, n_b = code.k_b, code.n_b
    helper = np.stack(
        [
            x[i * n_b : (i + 1) * n_b] ^ encode(code, key[i * k_b : (i + 1) * k_b])
            for i in range(part.block_count)
        ]
    )
    return Enrollment(device=device, key=key[: part.k].copy(), helper=helper, code=code.name)


@dataclass(frozen=True)
class BlockGuessDistribution:
    """log2 P(X = y XOR encode(r)) for every message r of one block."""

    log_probs: np.ndarray
    true_index: int | None = None

    def __post_init__(self):
        if not np.any(self.log_probs > -np.inf):
            raise ParameterError("Guess distribution has no message with non-zero probability")

    @property
    def k_b(self) -> int:
        return int(self.log_probs.size).bit_length() - 1


def block_guess_distribution(
    y_block, p_block, code: LinearBlockCode, true_index: int | None = None
) -> BlockGuessDistribution:
    """Per-message log-probabilities under the IND model with the un-normalized p."""
    y = np.asarray(y_block, dtype=np.uint8).ravel()
    p = p_block.p if isinstance(p_block, BiasVector) else np.asarray(p_block, dtype=np.float64)
    if y.size != code.n_b or p.size != code.n_b:
        raise ParameterError(
            f"{code.name}: block needs {code.n_b} positions, got y={y.size}, p={p.size}"
        )
    lp1, lp0 = log2_bit_probs(p)
    candidates = codewords(code) ^ y[None, :]
    log_probs = np.where(candidates == 1, lp1, lp0).sum(axis=1)
    return BlockGuessDistribution(log_probs=log_probs, true_index=true_index)


@dataclass(frozen=True)
class RankResult:
    """Rank bracket of the true key; ranks count guesses before it."""

    method: str
    rank_lower: int
    rank_estimate: int
    rank_upper: int
    key_bits: int
    zero_probability: bool = False

    @staticmethod
    def _log2(rank: int) -> float:
        return math.log2(rank + 1)

    @property
    def log2_lower(self) -> float:
        return self._log2(self.rank_lower)

    @property
    def log2_estimate(self) -> float:
        return self._log2(self.rank_estimate)

    @property
    def log2_upper(self) -> float:
        return self._log2(self.rank_upper)

    def same_rank(self, other: "RankResult") -> bool:
        return (self.rank_lower, self.rank_estimate, self.rank_upper) == (
            other.rank_lower,
            other.rank_estimate,
            other.rank_upper,
        )

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {
            "method": self.method,
            "rank_lower": self.rank_lower,
            "rank_estimate": self.rank_estimate,
            "rank_upper": self.rank_upper,
            "log2_rank_lower": self.log2_lower,
            "log2_rank_est": self.log2_estimate,
            "log2_rank_upper": self.log2_upper,
        }
        if self.zero_probability:
            result["zero_probability"] = True
        return result


def _true_indices(
    distributions: Sequence[BlockGuessDistribution], true_key: Sequence[int] | None
) -> list[int]:
    if true_key is None:
        true_key = [d.true_index for d in distributions]
    if len(true_key) != len(distributions) or any(t is None for t in true_key):
        raise ParameterError("True message index needed for every block")
    return [int(t) for t in true_key]


def key_rank_exact(
    distributions: Sequence[BlockGuessDistribution], true_key: Sequence[int] | None = None
) -> RankResult:
    """
    Rank by enumerating every full key.

    rank_lower counts strictly more likely keys, rank_upper adds keys tied
    with the true key.

    Raises:
        CapabilityError: more than EXACT_MAX_KEY_BITS message bits in total
    """
    truth = _true_indices(distributions, true_key)
    key_bits = sum(d.k_b for d in distributions)
    if key_bits > EXACT_MAX_KEY_BITS:
        raise CapabilityError(
            f"Exact key rank enumerates 2^{key_bits} keys (limit 2^{EXACT_MAX_KEY_BITS})"
        )

    totals = np.zeros(1)
    for d in distributions:
        totals = (totals[:, None] + d.log_probs[None, :]).ravel()
    true_lp = math.fsum(float(d.log_probs[t]) for d, t in zip(distributions, truth))

    if true_lp == -math.inf:
        better = int(np.count_nonzero(totals > -np.inf))
        tied = int(np.count_nonzero(totals == -np.inf)) - 1
    else:
        tol = _TIE_TOLERANCE * max(1.0, abs(true_lp))
        better = int(np.count_nonzero(totals > true_lp + tol))
        tied = int(np.count_nonzero(np.abs(totals - true_lp) <= tol)) - 1
    return RankResult(
        method=EXACT,
        rank_lower=better,
        rank_estimate=better,
        rank_upper=better + tied,
        key_bits=key_bits,
        zero_probability=true_lp == -math.inf,
    )


def _convolve_sparse(acc: np.ndarray, hist: np.ndarray) -> np.ndarray:
    out = np.zeros(acc.size + hist.size - 1)
    for shift in np.flatnonzero(hist):
        out[shift : shift + acc.size] += hist[shift] * acc
    return out


def key_rank_histogram(
    distributions: Sequence[BlockGuessDistribution],
    true_key: Sequence[int] | None = None,
    bins: int = DEFAULT_BINS,
) -> RankResult:
    """
    Rank estimate from convolved per-block histograms of log-probabilities.

    All blocks share one linear bin width, span / bins, where span is the
    distance between the smallest and largest finite key log-probability.
    A key's combined bin is the sum of its block bins, which lies at most
    N_b - 1 bins below its exact position; the bracket widens the true key's
    bin by that amount. Zero-probability messages are left out of the
    histograms.
    """
    truth = _true_indices(distributions, true_key)
    if bins < 1:
        raise ParameterError(f"Bin count must be positive, got {bins}")
    key_bits = sum(d.k_b for d in distributions)
    finite = [d.log_probs[d.log_probs > -np.inf] for d in distributions]
    lows = [float(f.min()) for f in finite]
    highs = [float(f.max()) for f in finite]

    true_lps = [float(d.log_probs[t]) for d, t in zip(distributions, truth)]
    if any(lp == -math.inf for lp in true_lps):
        finite_keys = math.prod(f.size for f in finite)
        return RankResult(
            method=HISTOGRAM,
            rank_lower=finite_keys,
            rank_estimate=finite_keys,
            rank_upper=(1 << key_bits) - 1,
            key_bits=key_bits,
            zero_probability=True,
        )

    span = math.fsum(highs) - math.fsum(lows)
    width = span / bins if span > 0 else 1.0
    counts = np.ones(1)
    true_bin = 0
    for values, low, lp in zip(finite, lows, true_lps):
        block_bins = np.floor((values - low) / width).astype(np.int64)
        counts = _convolve_sparse(counts, np.bincount(block_bins).astype(np.float64))
        true_bin += int(math.floor((lp - low) / width))

    n_blocks = len(distributions)
    lower = counts[true_bin + n_blocks :].sum()
    estimate = counts[true_bin + 1 :].sum()
    upper = counts[max(true_bin - n_blocks + 1, 0) :].sum() - 1
    return RankResult(
        method=HISTOGRAM,
        rank_lower=int(round(lower)),
        rank_estimate=int(round(estimate)),
        rank_upper=int(round(upper)),
        key_bits=key_bits,
    )


def generate_keys(count: int, bits: int = DEFAULT_KEY_BITS, seed: int = 0) -> np.ndarray:
    """count x bits key matrix from a counter-based generator seeded with a 64-bit seed."""
    if count < 1 or bits < 1:
        raise ParameterError(f"Need at least one key bit and one key, got {count} x {bits}")
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.integers(0, 2, size=(count, bits), dtype=np.uint8)


def device_distributions(
    enrollment: Enrollment, bias: BiasVector, code: LinearBlockCode, part: BlockPartition
) -> list[BlockGuessDistribution]:
    truth = enrollment.block_messages(code.k_b)
    return [
        block_guess_distribution(y, b, code, true_index=t)
        for y, b, t in zip(enrollment.helper, part.blocks(bias), truth)
    ]


def rank_key(
    distributions: Sequence[BlockGuessDistribution], method: str = AUTO, bins: int = DEFAULT_BINS
) -> RankResult:
    """Exact rank when feasible (or requested), histogram rank otherwise."""
    if method not in METHODS:
        raise ParameterError(f"Unknown rank method '{method}' (expected one of {METHODS})")
    key_bits = sum(d.k_b for d in distributions)
    if method == EXACT or (method == AUTO and key_bits <= EXACT_MAX_KEY_BITS):
        return key_rank_exact(distributions)
    return key_rank_histogram(distributions, bins=bins)


@dataclass
class DeviceRanks:
    """Ranks of every enrolled key on one device."""

    device: int
    ranks: list[RankResult]

    @property
    def key_invariant(self) -> bool:
        return all(r.same_rank(self.ranks[0]) for r in self.ranks[1:])

    @property
    def rank(self) -> RankResult:
        return self.ranks[0]


def _rank_device(
    code: LinearBlockCode,
    part: BlockPartition,
    bias: BiasVector,
    keys: np.ndarray,
    method: str,
    bins: int,
    job: tuple[int, np.ndarray],
) -> DeviceRanks:
    device, response = job
    ranks = []
    for key in keys:
        enrollment = enroll(response, key, code, part, device=device)
        ranks.append(rank_key(device_distributions(enrollment, bias, code, part), method, bins))
    return DeviceRanks(device=device, ranks=ranks)


@dataclass
class KeyRankExperiment:
    """Per-device key ranks for one code."""

    code: str
    k: int
    method: str
    seed: int
    key_count: int
    bins: int
    devices: list[DeviceRanks]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def log2_ranks(self) -> np.ndarray:
        """log2(rank_estimate + 1) per device."""
        return np.array([d.rank.log2_estimate for d in self.devices])

    def mean_log2_rank(self) -> float:
        return float(np.mean(self.log2_ranks()))

    def histogram(self, bin_width: float = 1.0) -> dict[str, list]:
        """Counts of per-device log2 ranks on [0, k] in bins of the given width."""
        edges = np.arange(0.0, self.k + bin_width, bin_width)
        if edges[-1] < self.k:
            edges = np.append(edges, edges[-1] + bin_width)
        counts, edges = np.histogram(self.log2_ranks(), bins=edges)
        return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}

    def summary(self, grouping_bound: float | None = None) -> dict[str, Any]:
        """Mean log2 rank with the k marker and, if given, the H - 1 check against a bound."""
        result: dict[str, Any] = {
            "code": self.code,
            "k": self.k,
            "devices": len(self.devices),
            "mean_log2_rank": self.mean_log2_rank(),
            "max_log2_rank_upper": max(r.log2_upper for d in self.devices for r in d.ranks),
            "key_invariant": all(d.key_invariant for d in self.devices),
        }
        if grouping_bound is not None:
            result["grouping_bound"] = grouping_bound
            result["nist_ok"] = result["mean_log2_rank"] >= grouping_bound - 1
        return result

    def rows(self) -> list[tuple[int, int, float, float, float]]:
        """(device, key_index, log2 lower, log2 estimate, log2 upper)."""
        return [
            (d.device, j, r.log2_lower, r.log2_estimate, r.log2_upper)
            for d in self.devices
            for j, r in enumerate(d.ranks)
        ]


def keyrank_experiment(
    responses: DeviceResponses,
    bias: BiasVector,
    code: LinearBlockCode,
    key_count: int = DEFAULT_KEY_COUNT,
    seed: int = 0,
    bins: int = DEFAULT_BINS,
    method: str = AUTO,
    devices: Sequence[int] | None = None,
    workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> KeyRankExperiment:
    """
    Enroll key_count seeded keys on every device and rank each one.

    Key invariance per device and zero-probability true keys are reported as
    diagnostics, not failures.
    """
    part = make_partition(code, responses.n)
    keys = generate_keys(key_count, max(DEFAULT_KEY_BITS, part.k), seed)
    indices = range(responses.device_count) if devices is None else devices
    jobs = [(int(d), responses.bits[d]) for d in indices]

    results = ordered_map(
        partial(_rank_device, code, part, bias, keys, method, bins),
        jobs,
        workers=workers,
        progress_callback=progress_callback,
    )

    diagnostics: list[Diagnostic] = []
    for dev in results:
        if not dev.key_invariant:
            diagnostics.append(
                Diagnostic(
                    code="W500",
                    message="key rank differs between keys",
                    severity=Severity.ERROR,
                    location=f"device {dev.device}",
                )
            )
        if any(r.zero_probability for r in dev.ranks):
            diagnostics.append(
                Diagnostic(
                    code="W501",
                    message="response has zero probability under the Bit-Alias model",
                    location=f"device {dev.device}",
                )
            )
    return KeyRankExperiment(
        code=code.name,
        k=part.k,
        method=results[0].rank.method if results else method,
        seed=seed,
        key_count=key_count,
        bins=bins,
        devices=results,
        diagnostics=diagnostics,
    )
