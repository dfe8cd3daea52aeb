"""Grouping bound on the average conditional min-entropy of IND responses.

Biases (normalized to p_i >= 0.5) are quantized into bias groups. After
quantization the probability of a response depends only on how many bits are
flipped in each group relative to the all-ones best guess, so responses fall
into response groups described by a flip vector zeta. The response groups are
generated in non-increasing probability until 2^(n_b - k_b) responses are
covered; their probability mass bounds the sum over coset leaders from above.
"""

import csv
import io
import itertools
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from ..codes import LinearBlockCode
from ..dataset import BiasVector, normalize_bias
from ..errors import CapabilityError, ParameterError
from ..parallel import ordered_map
from .entropy import BlockPartition, _as_array, neg_log2_sum

MODES = ("highest", "lowest", "mean", "median")

_PRUNE_SLACK = 1e-9
# Largest response set expand_responses() will materialize.
_EXPAND_LIMIT = 1 << 20


@dataclass(frozen=True)
class BiasGroup:
    """Positions whose biases share the representative theta."""

    members: tuple[int, ...]
    theta: float

    @property
    def eta(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class BiasGroupSet:
    """Quantization of one block's biases into T groups."""

    theta_delta: float
    mode: str
    groups: tuple[BiasGroup, ...]

    @property
    def n_b(self) -> int:
        return sum(g.eta for g in self.groups)

    @property
    def etas(self) -> np.ndarray:
        return np.array([g.eta for g in self.groups], dtype=np.int64)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([g.theta for g in self.groups], dtype=np.float64)


def _representative(values: np.ndarray, mode: str) -> float:
    if mode == "highest":
        return float(values.max())
    if mode == "lowest":
        return float(values.min())
    if mode == "mean":
        return float(values.mean())
    return float(np.median(values))


def build_bias_groups(p_block, theta_delta: float, mode: str = "highest") -> BiasGroupSet:
    """
    Greedy sweep over the biases in descending order.

    A new group opens whenever the spread to the group's largest bias would
    exceed theta_delta. Groups come out in descending bias order, members in
    ascending position order.
    """
    p = _as_array(p_block)
    if mode not in MODES:
        raise ParameterError(f"Unknown representative mode '{mode}' (expected one of {MODES})")
    if theta_delta < 0:
        raise ParameterError(f"theta_delta must be non-negative, got {theta_delta}")
    if np.any(p < 0.5):
        raise ParameterError("Bias groups need normalized biases (all p_i >= 0.5)")

    order = sorted(range(p.size), key=lambda i: (-p[i], i))
    members: list[list[int]] = [[order[0]]]
    top = p[order[0]]
    for i in order[1:]:
        if top - p[i] <= theta_delta:
            members[-1].append(i)
        else:
            members.append([i])
            top = p[i]

    groups = tuple(
        BiasGroup(members=tuple(sorted(m)), theta=_representative(p[m], mode)) for m in members
    )
    return BiasGroupSet(theta_delta=theta_delta, mode=mode, groups=groups)


def flip_penalties(thetas: np.ndarray) -> np.ndarray:
    """log2(theta) - log2(1 - theta) per group; inf where theta == 1."""
    with np.errstate(divide="ignore"):
        return np.log2(thetas) - np.log2(1.0 - thetas)


def group_log_probs(groups: BiasGroupSet, Z) -> np.ndarray:
    """
    log2-probability of one response in each response group.

    sigma = sigma_0 + Z (log2(1 - theta) - log2(theta))^T with
    sigma_0 = eta . log2(theta). A flip in a group with theta == 1 gives -inf.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=np.int64))
    etas, thetas = groups.etas, groups.thetas
    if Z.shape[1] != etas.size:
        raise ParameterError(f"Flip vectors need {etas.size} columns, got {Z.shape[1]}")
    if np.any(Z < 0) or np.any(Z > etas):
        raise ParameterError("Flip counts must lie in [0, eta] per group")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_theta = np.log2(thetas)
        diff = np.log2(1.0 - thetas) - log_theta
        contrib = np.where(Z > 0, Z * diff, 0.0)
    base = float(np.dot(etas, log_theta))
    return base + contrib.sum(axis=1)


@dataclass(frozen=True)
class ResponseGroupTable:
    """Sorted prefix of response groups up to and including the cutoff row omega."""

    groups: BiasGroupSet
    Z: np.ndarray
    psi: tuple[int, ...]
    sigma: np.ndarray
    omega: int
    partial_count: int
    target: int
    exhausted: bool = False

    def taken(self) -> list[int]:
        """Responses used from each row."""
        return list(self.psi[: self.omega]) + [self.partial_count]

    def covered(self) -> int:
        return sum(self.taken())

    def bound(self) -> float:
        """-log2 of the probability mass of the covered responses."""
        return neg_log2_sum(
            math.log2(count) + float(s) for count, s in zip(self.taken(), self.sigma)
        )

    def to_csv(self, block: int | None = None) -> str:
        header = ["j"] + [f"zeta_{t}" for t in range(self.Z.shape[1])] + ["psi", "sigma", "taken"]
        if block is not None:
            header.insert(0, "block")
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for j, (row, count, s, took) in enumerate(zip(self.Z, self.psi, self.sigma, self.taken())):
            cells = [str(j)] + [str(int(z)) for z in row] + [str(count), repr(float(s)), str(took)]
            if block is not None:
                cells.insert(0, str(block))
            writer.writerow(cells)
        return buffer.getvalue()

    def expand_responses(self) -> list[int]:
        """
        Concrete responses (bit sets over block positions) behind the prefix.

        Flips are applied to the all-ones best guess; within a row, member
        combinations are taken in itertools order.
        """
        if self.covered() > _EXPAND_LIMIT:
            raise CapabilityError(f"Refusing to expand {self.covered()} responses")
        ones = (1 << self.groups.n_b) - 1
        responses: list[int] = []
        for row, took in zip(self.Z, self.taken()):
            per_group = [
                itertools.combinations(g.members, int(z)) for g, z in zip(self.groups.groups, row)
            ]
            for choice in itertools.islice(itertools.product(*per_group), took):
                flipped = 0
                for positions in choice:
                    for i in positions:
                        flipped |= 1 << i
                responses.append(ones ^ flipped)
        return responses


def _band_candidates(etas: np.ndarray, penalties: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """
    Flip vectors whose cost sum(zeta * penalty) may fall in [lo, hi).

    Recurses group by group (most expensive first), keeping only partial
    vectors that can still reach lo and have not passed hi. The result is a
    superset; callers filter on the exact log-probability.
    """
    T = etas.size
    finite = np.isfinite(penalties)
    caps = np.where(finite, etas * np.where(finite, penalties, 0.0), 0.0)
    order = [int(t) for t in np.argsort(-np.where(finite, penalties, -1.0), kind="stable")]
    order = [t for t in order if finite[t]]
    rest_after = [float(caps[order[s + 1 :]].sum()) for s in range(len(order))]

    cost = np.zeros(1)
    Z = np.zeros((1, T), dtype=np.int64)
    for s, t in enumerate(order):
        c = float(penalties[t])
        eta = int(etas[t])
        if c > 0:
            z_hi = np.minimum(np.floor((hi - cost) / c + _PRUNE_SLACK), eta)
            z_lo = np.maximum(np.ceil((lo - cost - rest_after[s]) / c - _PRUNE_SLACK), 0)
        else:
            reachable = (cost + rest_after[s] >= lo - _PRUNE_SLACK) & (cost < hi + _PRUNE_SLACK)
            z_hi = np.where(reachable, eta, -1)
            z_lo = np.zeros(cost.size)
        z_hi = z_hi.astype(np.int64)
        z_lo = z_lo.astype(np.int64)
        counts = np.maximum(z_hi - z_lo + 1, 0)
        total = int(counts.sum())
        if total == 0:
            return np.empty((0, T), dtype=np.int64)
        src = np.repeat(np.arange(cost.size), counts)
        starts = np.cumsum(counts) - counts
        z = z_lo[src] + (np.arange(total) - starts[src])
        cost = cost[src] + z * c
        Z = Z[src]
        Z[:, t] = z
    return Z


def enumerate_top_groups(groups: BiasGroupSet, target: int) -> ResponseGroupTable:
    """
    Generate response groups in non-increasing probability until target responses are covered.

    Works in cost bands [lo, hi) below the best guess. The band width starts at
    the smallest positive flip penalty and doubles whenever a band is empty.
    Rows of equal probability are ordered lexicographically by zeta.
    """
    etas, thetas = groups.etas, groups.thetas
    T = etas.size
    if not 1 <= target <= 1 << groups.n_b:
        raise ParameterError(f"Target {target} outside [1, 2^{groups.n_b}]")

    penalties = flip_penalties(thetas)
    finite = np.isfinite(penalties)
    max_cost = float(np.sum(etas[finite] * penalties[finite]))
    end = max_cost + _PRUNE_SLACK * max(1.0, max_cost)
    positive = penalties[finite & (penalties > 0)]
    width = float(positive.min()) if positive.size else 1.0
    base = float(group_log_probs(groups, np.zeros((1, T), dtype=np.int64))[0])
    comb_tables = [
        np.array([math.comb(int(e), z) for z in range(int(e) + 1)], dtype=object) for e in etas
    ]

    kept_Z: list[np.ndarray] = []
    kept_sigma: list[np.ndarray] = []
    kept_psi: list[int] = []
    covered = 0
    partial_count = 0
    exhausted = False
    lo = 0.0
    while True:
        if lo > end:
            exhausted = True
            break
        hi = lo + width
        Z = _band_candidates(etas, penalties, lo, hi)
        sigma = np.empty(0)
        if Z.shape[0]:
            sigma = group_log_probs(groups, Z)
            cost = base - sigma
            keep = (cost >= lo) & (cost < hi)
            Z, sigma = Z[keep], sigma[keep]
        if Z.shape[0] == 0:
            lo = hi
            width *= 2
            continue

        order = np.lexsort(tuple(Z[:, t] for t in reversed(range(T))) + (-sigma,))
        Z, sigma = Z[order], sigma[order]
        psi = np.ones(Z.shape[0], dtype=object)
        for t in range(T):
            psi = psi * comb_tables[t][Z[:, t]]
        cumulative = np.cumsum(psi) + covered
        reached = np.flatnonzero((cumulative >= target).astype(bool))
        if reached.size:
            cut = int(reached[0])
            kept_Z.append(Z[: cut + 1])
            kept_sigma.append(sigma[: cut + 1])
            kept_psi.extend(int(v) for v in psi[: cut + 1])
            before = covered if cut == 0 else int(cumulative[cut - 1])
            partial_count = target - before
            break
        kept_Z.append(Z)
        kept_sigma.append(sigma)
        kept_psi.extend(int(v) for v in psi)
        covered = int(cumulative[-1])
        lo = hi

    if exhausted:
        # zero-probability groups leave fewer reachable responses than target
        partial_count = kept_psi[-1]
    return ResponseGroupTable(
        groups=groups,
        Z=np.vstack(kept_Z),
        psi=tuple(kept_psi),
        sigma=np.concatenate(kept_sigma),
        omega=len(kept_psi) - 1,
        partial_count=partial_count,
        target=target,
        exhausted=exhausted,
    )


def grouping_table_block(
    n_b: int, k_b: int, p_block, theta_delta: float, mode: str = "highest"
) -> ResponseGroupTable:
    p = _as_array(p_block)
    if p.size != n_b:
        raise ParameterError(f"Block bias has {p.size} positions, expected {n_b}")
    groups = build_bias_groups(p, theta_delta, mode)
    return enumerate_top_groups(groups, 1 << (n_b - k_b))


def grouping_bound_block(
    n_b: int, k_b: int, p_block, theta_delta: float, mode: str = "highest"
) -> float:
    """
    Grouping bound for one block of normalized biases.

    mode="highest" gives a strict lower bound H^H; "lowest" gives the
    reference value H^L, which is not a bound.
    """
    return grouping_table_block(n_b, k_b, p_block, theta_delta, mode).bound()


@dataclass(frozen=True)
class GroupingBound:
    """Grouping bound summed over the blocks of a partition."""

    theta_delta: float
    mode: str
    total: float
    per_block: list[float]


def _block_bound(n_b: int, k_b: int, theta_delta: float, mode: str, p: np.ndarray) -> float:
    return grouping_bound_block(n_b, k_b, p, theta_delta, mode)


def grouping_bound_total(
    code: LinearBlockCode,
    bias: BiasVector,
    part: BlockPartition,
    theta_delta: float,
    mode: str = "highest",
    workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> GroupingBound:
    """Per-block grouping bounds, each block with its own bias groups."""
    normalized, _ = normalize_bias(bias)
    blocks = [b.p for b in part.blocks(normalized)]
    per_block = ordered_map(
        partial(_block_bound, code.n_b, code.k_b, theta_delta, mode),
        blocks,
        workers=workers,
        progress_callback=progress_callback,
    )
    return GroupingBound(
        theta_delta=theta_delta, mode=mode, total=math.fsum(per_block), per_block=per_block
    )


def quantization_error_bracket(
    code: LinearBlockCode, p_block, theta_delta: float
) -> tuple[float, float, float]:
    """(H^L, H^H, H^L - H^H); the difference bounds the quantization error."""
    normalized, _ = normalize_bias(BiasVector(p=_as_array(p_block)))
    h_low = grouping_bound_block(code.n_b, code.k_b, normalized.p, theta_delta, "lowest")
    h_high = grouping_bound_block(code.n_b, code.k_b, normalized.p, theta_delta, "highest")
    return h_low, h_high, max(0.0, h_low - h_high)
