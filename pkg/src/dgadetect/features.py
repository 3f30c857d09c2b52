"""Lexical features of root labels: Shannon entropy and length."""

from __future__ import annotations

import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from .domain_model import ParsedDomain
from .errors import EmptyInput, NonPositiveBinWidth
from .labels import Label

DEFAULT_BIN_WIDTH = 0.25


def shannon_entropy(s: str) -> float:
    """Entropy in bits of the character distribution of ``s``."""
    n = len(s)
    if n == 0:
        raise EmptyInput("entropy of an empty string is undefined")
    h = 0.0
    for count in Counter(s).values():
        p = count / n
        h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class FeatureVector:
    entropy: float
    length: int

    def as_tuple(self) -> Tuple[float, float]:
        return (self.entropy, float(self.length))


def root_features(root: str) -> FeatureVector:
    return FeatureVector(shannon_entropy(root), len(root))


def extract_features(d: ParsedDomain) -> FeatureVector:
    # root only: the suffix must never bias the baseline
    return root_features(d.root)


@dataclass(frozen=True)
class HistogramBin:
    lo: float
    hi: float
    count_class0: int
    count_class1: int


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    bins: Tuple[HistogramBin, ...]

    def totals(self) -> Tuple[int, int]:
        return (
            sum(b.count_class0 for b in self.bins),
            sum(b.count_class1 for b in self.bins),
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("bin_lo,bin_hi,legit_count,dga_count\n")
        for b in self.bins:
            out.write(f"{b.lo:.2f},{b.hi:.2f},{b.count_class0},{b.count_class1}\n")
        return out.getvalue()


def _bin_index(value: float, width: float) -> int:
    idx = int(math.floor(value / width))
    # guard the float division against landing one bin off a boundary
    if value >= (idx + 1) * width:
        idx += 1
    elif value < idx * width:
        idx -= 1
    return idx


def entropy_histogram(
    records: Sequence[Tuple[FeatureVector, int]], bin_width: float = DEFAULT_BIN_WIDTH
) -> Histogram:
    """Per-class entropy counts in bins of ``bin_width`` bits starting at 0.

    Bins are [lo, hi); a value lying exactly on a boundary belongs to the
    bin above it, so the top bin always ends strictly above the maximum.
    """
    if not bin_width > 0:
        raise NonPositiveBinWidth(f"bin width must be positive, got {bin_width}")
    if not records:
        raise EmptyInput("no records to histogram")
    indexed = [(_bin_index(fv.entropy, bin_width), int(label)) for fv, label in records]
    n_bins = max(i for i, _ in indexed) + 1
    counts = [[0, 0] for _ in range(n_bins)]
    for i, label in indexed:
        counts[i][label] += 1
    bins = tuple(
        HistogramBin(k * bin_width, (k + 1) * bin_width, c0, c1)
        for k, (c0, c1) in enumerate(counts)
    )
    return Histogram(bin_width, bins)


def mean_entropy(roots: Iterable[str]) -> float:
    values: List[float] = [shannon_entropy(r) for r in roots]
    if not values:
        raise EmptyInput("no roots")
    return math.fsum(values) / len(values)


__all__ = [
    "Label",
    "FeatureVector",
    "Histogram",
    "HistogramBin",
    "shannon_entropy",
    "root_features",
    "extract_features",
    "entropy_histogram",
    "mean_entropy",
]
