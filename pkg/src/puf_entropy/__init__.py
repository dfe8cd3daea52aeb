"""Conditional min-entropy bounds and key-rank validation for PUF key storage."""

from importlib.metadata import version as _get_version

__version__ = _get_version("puf-entropy")

from .codes import LinearBlockCode, code_by_name, make_bch, make_repetition  # noqa: E402
from .dataset import BiasVector, bit_alias, derive_responses, parse_frequencies  # noqa: E402
from .errors import Diagnostic, PufEntropyError, Severity  # noqa: E402

__all__ = [
    "BiasVector",
    "Diagnostic",
    "LinearBlockCode",
    "PufEntropyError",
    "Severity",
    "__version__",
    "bit_alias",
    "code_by_name",
    "derive_responses",
    "make_bch",
    "make_repetition",
    "parse_frequencies",
]
