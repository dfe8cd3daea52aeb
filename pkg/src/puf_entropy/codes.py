"""Linear binary block codes: repetition and narrow-sense BCH.

Vectors of length n_b are handled as integer bit sets, bit i = position i.
Message index m encodes message bit j as (m >> j) & 1.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapabilityError, ParameterError

# Largest block length for which all 2^n_b responses are enumerated.
EXACT_MAX_BLOCK_BITS = 24
# Largest redundancy n_b - k_b for which a coset-leader table is built.
MAX_LEADER_REDUNDANCY = 26

SUPPORTED_BCH = frozenset({(7, 4, 1), (15, 5, 3), (31, 6, 7), (63, 7, 15), (127, 8, 31)})

# CLI / config name -> constructor arguments
CODE_TABLE: dict[str, tuple[str, tuple[int, ...]]] = {
    "rep3": ("repetition", (3,)),
    "rep5": ("repetition", (5,)),
    "rep7": ("repetition", (7,)),
    "rep21": ("repetition", (21,)),
    "bch7_4_1": ("bch", (7, 4, 1)),
    "bch15_5_3": ("bch", (15, 5, 3)),
    "bch31_6_7": ("bch", (31, 6, 7)),
    "bch63_7_15": ("bch", (63, 7, 15)),
    "bch127_8_31": ("bch", (127, 8, 31)),
}
CODE_NAMES = tuple(CODE_TABLE)


def _row_reduce(rows: list[int], n: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form over GF(2); returns (rows, pivot columns)."""
    rows = list(rows)
    pivots: list[int] = []
    r = 0
    for col in range(n):
        if r == len(rows):
            break
        pivot = next((i for i in range(r, len(rows)) if (rows[i] >> col) & 1), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        for i in range(len(rows)):
            if i != r and (rows[i] >> col) & 1:
                rows[i] ^= rows[r]
        pivots.append(col)
        r += 1
    return rows[:r], pivots


def _mask_from_bits(bits) -> int:
    mask = 0
    for i, b in enumerate(bits):
        if int(b) & 1:
            mask |= 1 << i
    return mask


def _bits_from_mask(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class LinearBlockCode:
    """An (n_b, k_b, t) binary linear block code given by its generator matrix."""

    n_b: int
    k_b: int
    t: int
    generator: np.ndarray
    name: str
    codeword_masks: tuple[int, ...] = field(init=False, repr=False)
    unit_syndromes: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        generator = np.asarray(self.generator, dtype=np.uint8) & 1
        if generator.shape != (self.k_b, self.n_b):
            raise ParameterError(
                f"Generator shape {generator.shape} does not match ({self.k_b}, {self.n_b})"
            )
        object.__setattr__(self, "generator", generator)

        rows = [_mask_from_bits(row) for row in generator]
        reduced, pivots = _row_reduce(rows, self.n_b)
        if len(pivots) != self.k_b:
            raise ParameterError(f"Generator of {self.name} has rank {len(pivots)} < {self.k_b}")

        words = [0] * (1 << self.k_b)
        for m in range(1, 1 << self.k_b):
            low = (m & -m).bit_length() - 1
            words[m] = words[m & (m - 1)] ^ rows[low]
        object.__setattr__(self, "codeword_masks", tuple(words))

        # Syndrome = non-pivot coordinates after eliminating the pivot coordinates.
        pivot_row = {col: j for j, col in enumerate(pivots)}
        free_cols = [c for c in range(self.n_b) if c not in pivot_row]
        syndromes = []
        for i in range(self.n_b):
            v = 1 << i
            if i in pivot_row:
                v ^= reduced[pivot_row[i]]
            syndromes.append(
                sum(((v >> col) & 1) << m for m, col in enumerate(free_cols))
            )
        object.__setattr__(self, "unit_syndromes", tuple(syndromes))

        if self.n_b <= 31 and self.min_distance() < 2 * self.t + 1:
            raise ParameterError(
                f"{self.name}: minimum distance {self.min_distance()} < {2 * self.t + 1}"
            )

    @property
    def redundancy(self) -> int:
        return self.n_b - self.k_b

    def min_distance(self) -> int:
        return min(w.bit_count() for w in self.codeword_masks[1:])

    def syndrome(self, mask: int) -> int:
        s = 0
        for i in range(self.n_b):
            if (mask >> i) & 1:
                s ^= self.unit_syndromes[i]
        return s

    def syndromes(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized syndrome of int64 bit sets (n_b <= 62)."""
        xs = np.asarray(xs, dtype=np.int64)
        out = np.zeros(xs.shape, dtype=np.int64)
        for i, s in enumerate(self.unit_syndromes):
            out ^= np.where((xs >> i) & 1, np.int64(s), np.int64(0))
        return out

    def codeword_array(self) -> np.ndarray:
        """All codewords as int64 bit sets (n_b <= 62)."""
        if self.n_b > 62:
            raise CapabilityError(f"{self.name}: codewords do not fit a machine word")
        return np.array(self.codeword_masks, dtype=np.int64)


@dataclass(frozen=True)
class CosetLeaderSet:
    """One minimum-weight leader per syndrome, as int bit sets indexed by syndrome."""

    n_b: int
    leaders: np.ndarray

    def __len__(self) -> int:
        return len(self.leaders)

    def vectors(self) -> np.ndarray:
        return ((self.leaders[:, None] >> np.arange(self.n_b)) & 1).astype(np.uint8)


def make_repetition(n_b: int) -> LinearBlockCode:
    """Odd-length repetition code: W = {0...0, 1...1}, t = (n_b - 1) / 2."""
    if n_b < 3 or n_b % 2 == 0:
        raise ParameterError(f"Repetition length must be odd and >= 3, got {n_b}")
    return LinearBlockCode(
        n_b=n_b,
        k_b=1,
        t=(n_b - 1) // 2,
        generator=np.ones((1, n_b), dtype=np.uint8),
        name=f"({n_b})",
    )


@lru_cache(maxsize=None)
def make_bch(n_b: int, k_b: int, t: int) -> LinearBlockCode:
    """Narrow-sense binary BCH code over the default primitive polynomial of GF(2^m)."""
    if (n_b, k_b, t) not in SUPPORTED_BCH:
        raise ParameterError(f"Unsupported BCH parameters ({n_b},{k_b},{t})")
    import galois

    bch = galois.BCH(n_b, k_b)
    if bch.t != t:
        raise ParameterError(f"BCH({n_b},{k_b}) corrects {bch.t} errors, not {t}")
    generator = bch.G.view(np.ndarray).astype(np.uint8)
    return LinearBlockCode(n_b=n_b, k_b=k_b, t=t, generator=generator, name=f"({n_b},{k_b},{t})")


def code_by_name(name: str) -> LinearBlockCode:
    """Resolve a config/CLI code name such as "rep5" or "bch15_5_3"."""
    try:
        kind, args = CODE_TABLE[name]
    except KeyError:
        raise ParameterError(
            f"Unknown code '{name}' (expected one of {', '.join(CODE_NAMES)})"
        ) from None
    if kind == "repetition":
        return _repetition_cached(*args)
    return make_bch(*args)


@lru_cache(maxsize=None)
def _repetition_cached(n_b: int) -> LinearBlockCode:
    return make_repetition(n_b)


@lru_cache(maxsize=None)
def codewords(code: LinearBlockCode) -> np.ndarray:
    """All 2^k_b codewords as a read-only (2^k_b, n_b) 0/1 matrix in message-index order."""
    words = np.array(
        [_bits_from_mask(w, code.n_b) for w in code.codeword_masks], dtype=np.uint8
    )
    words.setflags(write=False)
    return words


def _check_leader_capability(code: LinearBlockCode, max_bits: int) -> None:
    if code.redundancy > MAX_LEADER_REDUNDANCY or code.n_b > max_bits:
        raise CapabilityError(
            f"{code.name}: coset-leader table needs 2^{code.n_b} enumeration "
            f"(limit n_b <= {max_bits}); use the grouping bound instead"
        )


def _popcount(xs: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(xs.shape, dtype=np.int64)
    for i in range(n):
        out += (xs >> i) & 1
    return out


@lru_cache(maxsize=16)
def _leader_table(code: LinearBlockCode, max_bits: int) -> CosetLeaderSet:
    _check_leader_capability(code, max_bits)
    n = code.n_b
    xs = np.arange(1 << n, dtype=np.int64)
    # weight first, then smallest bit set among equal weights
    keys = (_popcount(xs, n) << n) | xs
    best = np.full(1 << code.redundancy, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(best, code.syndromes(xs), keys)
    return CosetLeaderSet(n_b=n, leaders=best & ((1 << n) - 1))


def coset_leaders(
    code: LinearBlockCode, max_bits: int = EXACT_MAX_BLOCK_BITS
) -> CosetLeaderSet:
    """
    Minimum-weight coset leaders, one per syndrome.

    Ties resolve to the smallest integer bit set.

    Raises:
        CapabilityError: n_b above max_bits or n_b - k_b above MAX_LEADER_REDUNDANCY
    """
    return _leader_table(code, max_bits)


def message_bits(index: int, k_b: int) -> np.ndarray:
    return _bits_from_mask(index, k_b)


def message_index(message) -> int:
    return _mask_from_bits(message)


def encode(code: LinearBlockCode, message) -> np.ndarray:
    """message (k_b bits) times generator over GF(2)."""
    message = np.asarray(message, dtype=np.uint8).ravel()
    if message.size != code.k_b:
        raise ParameterError(f"{code.name}: message has {message.size} bits, expected {code.k_b}")
    return _bits_from_mask(code.codeword_masks[message_index(message)], code.n_b)
