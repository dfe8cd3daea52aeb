"""Assemble per-code entropy reports (one row of the estimator table)."""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from ..codes import LinearBlockCode
from ..dataset import BiasVector
from ..errors import CapabilityError, Diagnostic
from .entropy import (
    IID,
    IND,
    exact_cond_min_entropy_total,
    make_partition,
    min_entropy_iid,
    min_entropy_ind,
    nk_bound,
    nk_bound_blockwise,
)
from .grouping import grouping_bound_total

FULL_RESPONSE = "full response"


def _num(value: float | None) -> float | None:
    if value is None or math.isnan(value):
        return None
    return value


def theta_key(theta_delta: float) -> str:
    """Column key for a grouping column, e.g. 0.05 -> "0.05"."""
    return f"{theta_delta:g}"


@dataclass
class EntropyReport:
    """Estimator values for one code over the first n_used positions."""

    code: str
    n: int
    m: float
    m_tilde: float
    k: int | None = None
    l: float | None = None  # noqa: E741
    l_of_m_tilde: float | None = None
    l_tilde: float | None = None
    H_exact_iid: float | None = None
    H_exact_ind: float | None = None
    grouping: dict[str, float] = field(default_factory=dict)
    per_block: dict[str, list[float]] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """Full-precision values; NaN becomes null."""
        result: dict[str, Any] = {
            "code": self.code,
            "n": self.n,
            "m": self.m,
            "m_tilde": self.m_tilde,
            "k": self.k,
            "l": self.l,
            "l_of_m_tilde": self.l_of_m_tilde,
            "l_tilde": self.l_tilde,
            "exact_iid": _num(self.H_exact_iid),
            "exact_ind": _num(self.H_exact_ind),
            "grouping": {key: _num(v) for key, v in self.grouping.items()},
        }
        if self.per_block:
            result["per_block"] = self.per_block
        if self.diagnostics:
            result["warnings"] = [d.to_dict() for d in self.diagnostics]
        return result


def full_response_report(bias: BiasVector) -> EntropyReport:
    """Leading table row: m and m~ over all n positions, no code."""
    return EntropyReport(
        code=FULL_RESPONSE,
        n=bias.n,
        m=min_entropy_iid(bias.mean(), bias.n),
        m_tilde=min_entropy_ind(bias),
    )


def _exact_or_nan(
    code: LinearBlockCode, bias, part, model: str, workers, diagnostics: list[Diagnostic]
):
    try:
        return exact_cond_min_entropy_total(code, bias, part, model, workers=workers)
    except CapabilityError as e:
        diagnostics.append(
            Diagnostic(
                code="W400",
                message=f"exact {model} value unavailable: {e.message}",
                location=code.name,
            )
        )
        return None


def build_report(
    code: LinearBlockCode,
    bias: BiasVector,
    theta_deltas: Sequence[float] = (),
    mode: str = "highest",
    L: float = 0.0,
    exact: bool = True,
    workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> EntropyReport:
    """
    Compute every estimator for one code.

    Exact values that are infeasible for the code are reported as NaN with a
    W400 diagnostic instead of failing the report.
    """
    part = make_partition(code, bias.n)
    used = bias.slice(0, part.n_used)
    m = min_entropy_iid(used.mean(), part.n_used)
    m_tilde = min_entropy_ind(used)
    l_tilde, l_tilde_blocks = nk_bound_blockwise(bias, part)

    report = EntropyReport(
        code=code.name,
        n=part.n_used,
        m=m,
        m_tilde=m_tilde,
        k=part.k,
        l=nk_bound(m, part.k, part.n_used, L),
        l_of_m_tilde=nk_bound(m_tilde, part.k, part.n_used, L),
        l_tilde=l_tilde,
        H_exact_iid=math.nan,
        H_exact_ind=math.nan,
    )
    report.per_block["l_tilde"] = l_tilde_blocks

    if exact:
        for model in (IID, IND):
            result = _exact_or_nan(code, bias, part, model, workers, report.diagnostics)
            if result is None:
                continue
            if model == IID:
                report.H_exact_iid = result.total
            else:
                report.H_exact_ind = result.total
                report.per_block["exact_ind"] = result.per_block

    for theta_delta in theta_deltas:
        key = theta_key(theta_delta)
        bound = grouping_bound_total(
            code,
            bias,
            part,
            theta_delta,
            mode,
            workers=workers,
            progress_callback=progress_callback,
        )
        report.grouping[key] = bound.total
        report.per_block[f"grouping_{key}"] = bound.per_block
    return report


def build_table(
    codes: Sequence[LinearBlockCode],
    bias: BiasVector,
    theta_deltas: Sequence[float] = (0.05, 0.1),
    mode: str = "highest",
    L: float = 0.0,
    workers: int | None = None,
    progress_callback: Callable[[int, int], None] | None = None,
) -> list[EntropyReport]:
    """Full-response row followed by one row per code, in the given order."""
    rows = [full_response_report(bias)]
    for done, code in enumerate(codes, start=1):
        rows.append(build_report(code, bias, theta_deltas, mode, L, workers=workers))
        if progress_callback:
            progress_callback(done, len(codes))
    return rows
