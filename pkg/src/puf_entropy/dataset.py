"""Ring-oscillator dataset ingestion, response derivation and Bit-Alias estimation."""

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, Diagnostic, ParseError, ShapeError

DELIMITERS = ("whitespace", "comma")
REDUCTIONS = ("first", "majority")

# Bit-Alias heat maps lay 256 response bits out as 8 rows of 32 RO pairs.
DEFAULT_GRID_WIDTH = 32


@dataclass(frozen=True)
class FrequencyMatrix:
    """RO frequencies, rows = devices, columns = RO positions."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ShapeError("frequency matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ParseError("frequencies must be finite and strictly positive")
        object.__setattr__(self, "values", values)

    @property
    def device_count(self) -> int:
        return self.values.shape[0]

    @property
    def ro_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DeviceResponses:
    """Binary responses, rows = devices, columns = response positions."""

    bits: np.ndarray
    ties: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.size == 0:
            raise ShapeError("responses must be a non-empty 2-D array")
        if not np.all((bits == 0) | (bits == 1)):
            raise ParseError("response entries must be exactly 0 or 1")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    @property
    def n(self) -> int:
        return self.bits.shape[1]

    @property
    def device_count(self) -> int:
        return self.bits.shape[0]

    def tie_diagnostics(self) -> list[Diagnostic]:
        """One diagnostic per frequency tie that was resolved to bit 0."""
        return [
            Diagnostic(
                code="W301",
                message="frequency tie resolved to bit 0",
                location=f"device {device}, bit {position}",
            )
            for device, position in self.ties
        ]


@dataclass(frozen=True)
class BiasVector:
    """Per-position probability of a 1-bit.

    When derived from responses the exact counts are kept alongside, so
    p_i = counts_i / device_count can be recovered as a rational.
    """

    p: np.ndarray
    counts: np.ndarray | None = field(default=None, compare=False)
    device_count: int | None = field(default=None, compare=False)

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=np.float64))
        if p.ndim != 1 or p.size == 0:
            raise ShapeError("bias vector must be a non-empty 1-D sequence")
        if not np.all((p >= 0.0) & (p <= 1.0)):
            raise ParseError("bias values must lie in [0, 1]")
        object.__setattr__(self, "p", p)
        if self.counts is not None:
            object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))

    @classmethod
    def from_counts(cls, counts: Sequence[int] | np.ndarray, device_count: int) -> "BiasVector":
        counts = np.asarray(counts, dtype=np.int64)
        if device_count < 1:
            raise ShapeError("device_count must be at least 1")
        return cls(p=counts / device_count, counts=counts, device_count=device_count)

    @property
    def n(self) -> int:
        return self.p.size

    def __len__(self) -> int:
        return self.p.size

    def fractions(self) -> list[Fraction]:
        """Exact p_i values; falls back to the float values when no counts are stored."""
        if self.counts is None or self.device_count is None:
            return [Fraction(float(v)) for v in self.p]
        return [Fraction(int(c), self.device_count) for c in self.counts]

    def mean(self) -> float:
        """Mean bias, computed exactly from counts when available."""
        if self.counts is not None and self.device_count is not None:
            return float(Fraction(int(self.counts.sum()), self.device_count * self.n))
        return float(np.mean(self.p))

    def slice(self, start: int, stop: int) -> "BiasVector":
        counts = None if self.counts is None else self.counts[start:stop]
        return BiasVector(p=self.p[start:stop], counts=counts, device_count=self.device_count)


def _decode(data: bytes | str) -> str:
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        row = data.count(b"\n", 0, e.start) + 1
        raise ParseError(
            f"Input is not UTF-8 text: {e.reason}", location=f"row {row}, byte {e.start}"
        ) from None


def _split_line(line: str, delimiter: str) -> list[str]:
    if delimiter == "comma":
        return [token.strip() for token in line.split(",")]
    return line.split()


def parse_frequencies(
    data: bytes | str,
    delimiter: str = "whitespace",
    devices_in_rows: bool = True,
    header: bool = False,
) -> FrequencyMatrix:
    """
    Parse a plain-text numeric matrix of RO frequencies.

    Args:
        data: Raw file content
        delimiter: "whitespace" or "comma"
        devices_in_rows: True if each text row is one device
        header: Skip the first non-empty line

    Returns:
        FrequencyMatrix with devices as rows

    Raises:
        ParseError: Malformed token (1-based row and column) or non-UTF-8 bytes
        ShapeError: Empty input or ragged rows
    """
    if delimiter not in DELIMITERS:
        raise ConfigError(f"Unknown delimiter '{delimiter}' (expected one of {DELIMITERS})")
    data = _decode(data)

    rows: list[list[float]] = []
    width: int | None = None
    header_pending = header
    for line_no, line in enumerate(data.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if header_pending:
            header_pending = False
            continue
        tokens = _split_line(stripped, delimiter)
        row: list[float] = []
        for col_no, token in enumerate(tokens, start=1):
            try:
                value = float(token)
            except ValueError:
                raise ParseError(
                    f"Malformed numeric token '{token}'",
                    location=f"row {line_no}, column {col_no}",
                ) from None
            if not np.isfinite(value) or value <= 0:
                raise ParseError(
                    f"Frequency must be finite and positive, got '{token}'",
                    location=f"row {line_no}, column {col_no}",
                )
            row.append(value)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ShapeError(
                f"Ragged row: expected {width} values, found {len(row)}",
                location=f"row {line_no}",
            )
        rows.append(row)

    if not rows:
        raise ShapeError("No numeric rows in input")

    values = np.array(rows, dtype=np.float64)
    if not devices_in_rows:
        values = values.T
    return FrequencyMatrix(values=values)


def load_frequencies(path: Path | str, **kwargs: Any) -> FrequencyMatrix:
    """Read and parse a frequency file; keyword arguments go to parse_frequencies."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ShapeError(f"Cannot read dataset: {e}", location=str(path)) from None
    try:
        return parse_frequencies(raw, **kwargs)
    except (ParseError, ShapeError) as e:
        location = f"{path}: {e.location}" if e.location else str(path)
        raise type(e)(e.message, location=location) from None


def select_devices(freqs: FrequencyMatrix, indices: Sequence[int] | None) -> FrequencyMatrix:
    """Restrict the matrix to the given device indices, in the given order."""
    if indices is None:
        return freqs
    indices = list(indices)
    if not indices:
        raise ConfigError("Device subset is empty")
    bad = [i for i in indices if i < 0 or i >= freqs.device_count]
    if bad:
        raise ConfigError(
            f"Device indices out of range 0..{freqs.device_count - 1}: {bad[:5]}"
        )
    return FrequencyMatrix(values=freqs.values[indices])


def derive_responses(freqs: FrequencyMatrix) -> DeviceResponses:
    """Bit i = 1 iff RO 2i is faster than RO 2i+1; ties give 0 and are recorded."""
    if freqs.ro_count % 2:
        raise ShapeError(f"Exclusive pairing needs an even RO count, got {freqs.ro_count}")
    left = freqs.values[:, 0::2]
    right = freqs.values[:, 1::2]
    bits = (left > right).astype(np.uint8)
    ties = tuple((int(d), int(i)) for d, i in np.argwhere(left == right))
    return DeviceResponses(bits=bits, ties=ties)


def reduce_measurements(
    reads: Sequence[DeviceResponses], method: str = "first"
) -> DeviceResponses:
    """Combine repeated reads of the same devices: first read, or majority vote."""
    if method not in REDUCTIONS:
        raise ConfigError(f"Unknown reduction '{method}' (expected one of {REDUCTIONS})")
    if not reads:
        raise ShapeError("No measurements to reduce")
    shape = reads[0].bits.shape
    if any(r.bits.shape != shape for r in reads):
        raise ShapeError("All measurements must have the same devices and positions")
    if method == "first" or len(reads) == 1:
        return reads[0]
    ones = np.sum([r.bits for r in reads], axis=0, dtype=np.int64)
    # a split vote counts as 0, like a frequency tie
    bits = (2 * ones > len(reads)).astype(np.uint8)
    return DeviceResponses(bits=bits, ties=reads[0].ties)


def bit_alias(resp: DeviceResponses) -> BiasVector:
    """Relative frequency of a 1 at each position over all devices."""
    counts = resp.bits.sum(axis=0, dtype=np.int64)
    return BiasVector.from_counts(counts, resp.device_count)


def normalize_bias(bias: BiasVector) -> tuple[BiasVector, np.ndarray]:
    """
    Mirror every p_i < 0.5 to 1 - p_i.

    Returns:
        (normalized bias with all p_i >= 0.5, flip mask with 1 where mirrored)
    """
    mask = (bias.p < 0.5).astype(np.uint8)
    if bias.counts is not None and bias.device_count is not None:
        counts = np.maximum(bias.counts, bias.device_count - bias.counts)
        return BiasVector.from_counts(counts, bias.device_count), mask
    return BiasVector(p=np.maximum(bias.p, 1.0 - bias.p)), mask


def flip_mask_string(mask: np.ndarray) -> str:
    return "".join(str(int(b)) for b in mask)


def heatmap_grid(bias: BiasVector, width: int = DEFAULT_GRID_WIDTH) -> np.ndarray:
    """Lay p out row-major on a grid of the given width; missing cells are NaN."""
    if width < 1:
        raise ConfigError("Grid width must be positive")
    rows = -(-bias.n // width)
    grid = np.full(rows * width, np.nan)
    grid[: bias.n] = bias.p
    return grid.reshape(rows, width)


def bias_to_csv(bias: BiasVector, comments: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("index", "p"))
    writer.writerows((i, repr(float(v))) for i, v in enumerate(bias.p))
    return buffer.getvalue()


def bias_to_dict(bias: BiasVector) -> dict[str, Any]:
    result: dict[str, Any] = {"n": bias.n, "p": [float(v) for v in bias.p]}
    if bias.counts is not None:
        result["counts"] = [int(c) for c in bias.counts]
        result["device_count"] = bias.device_count
    return result


def parse_bias_csv(data: bytes | str) -> BiasVector:
    """Read an `index,p` CSV as written by bias_to_csv."""
    text = _decode(data)
    entries: dict[int, float] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [t.strip() for t in next(csv.reader([stripped]))]
        if parts[0].lower() == "index":
            continue
        if len(parts) != 2:
            raise ShapeError("Expected two columns 'index,p'", location=f"row {line_no}")
        try:
            entries[int(parts[0])] = float(parts[1])
        except ValueError:
            raise ParseError(
                f"Malformed bias row '{stripped}'", location=f"row {line_no}"
            ) from None
    if not entries:
        raise ShapeError("No bias rows in input")
    if sorted(entries) != list(range(len(entries))):
        raise ShapeError("Bias indices must be 0..n-1 without gaps")
    return BiasVector(p=np.array([entries[i] for i in range(len(entries))]))


def load_bias_csv(path: Path | str) -> BiasVector:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ShapeError(f"Cannot read bias file: {e}", location=str(path)) from None
    try:
        return parse_bias_csv(raw)
    except (ParseError, ShapeError) as e:
        location = f"{path}: {e.location}" if e.location else str(path)
        raise type(e)(e.message, location=location) from None
