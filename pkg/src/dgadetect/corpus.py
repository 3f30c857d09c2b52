"""Labeled dataset construction.

Real sources (Tranco ranking CSV, OSINT feeds) are consumed as line
streams. Synthetic sources are deterministic generators driven by
:class:`~dgadetect.prng.Prng`. ``balance_and_split`` turns any mix of them
into a balanced, stratified train/validation/test partition.
"""

from __future__ import annotations

import csv
import datetime
import io
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .domain_model import ParsedDomain, SuffixTable, parse, split_public_suffix, normalize
from .errors import (
    BadLengthRange,
    BadRatios,
    BadWord,
    DataError,
    InvalidDate,
    IoFailure,
    MalformedCsvLine,
    SingleClassInput,
    WordlistTooSmall,
)
from .labels import Label
from .prng import Prng

log = logging.getLogger(__name__)

LETTERS = "abcdefghijklmnopqrstuvwxyz"
ALNUM = LETTERS + "0123456789"
UNIFORM_SUFFIXES = ("com", "net", "org", "info", "biz")
NATURAL_SUFFIXES = ("com", "org", "com.br")
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class LabeledDomain:
    parsed: ParsedDomain
    label: Label
    family: str

    def __post_init__(self):
        if self.label not in (Label.LEGIT, Label.DGA):
            raise ValueError(f"bad label {self.label!r}")
        if not self.family:
            raise ValueError("family tag must be non-empty")

    @property
    def domain(self) -> str:
        return self.parsed.original


class IngestResult(list):
    """List of records that also remembers how many input lines were skipped."""

    def __init__(self, records=(), skipped: int = 0):
        super().__init__(records)
        self.skipped = skipped


@dataclass(frozen=True)
class DatasetSplit:
    train: List[LabeledDomain]
    validation: List[LabeledDomain]
    test: List[LabeledDomain]
    seed: int
    ratios: Tuple[float, float, float]

    def parts(self):
        return {"train": self.train, "val": self.validation, "test": self.test}


def _synthetic(root: str, suffix: str, label: Label, family: str) -> LabeledDomain:
    name = f"{root}.{suffix}"
    return LabeledDomain(ParsedDomain(name, "", root, suffix), label, family)


# -- real sources ---------------------------------------------------------

def ingest_tranco(
    lines: Iterable[str], limit: int, table: Optional[SuffixTable] = None
) -> IngestResult:
    """Read up to ``limit`` legitimate domains from "rank,domain" lines.

    Domains that do not parse are skipped and counted. A line without
    exactly one comma raises MalformedCsvLine.
    """
    out = IngestResult()
    if limit <= 0:
        return out
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        if line.count(",") != 1:
            raise MalformedCsvLine(f"line {lineno}: expected 'rank,domain', got {line!r}")
        _, domain = line.split(",")
        try:
            parsed = parse(domain, table)
        except DataError:
            out.skipped += 1
            continue
        out.append(LabeledDomain(parsed, Label.LEGIT, "tranco"))
        if len(out) >= limit:
            break
    if out.skipped:
        log.info("tranco: skipped %d unparseable domains", out.skipped)
    return out


def ingest_feed(
    lines: Iterable[str], family: str, table: Optional[SuffixTable] = None
) -> IngestResult:
    """Read malicious domains, one per line; lines starting with '#' are comments."""
    tag = family if family.startswith("feed:") else f"feed:{family}"
    out = IngestResult()
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            parsed = parse(line, table)
        except DataError:
            out.skipped += 1
            continue
        out.append(LabeledDomain(parsed, Label.DGA, tag))
    if out.skipped:
        log.info("%s: skipped %d unparseable lines", tag, out.skipped)
    return out


def read_lines(path) -> List[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


# -- synthetic generators -------------------------------------------------

def gen_uniform_dga(seed: int, count: int, min_len: int = 8, max_len: int = 20) -> List[LabeledDomain]:
    """High-entropy family: roots drawn uniformly from a-z0-9."""
    if not 1 <= min_len <= max_len <= 63:
        raise BadLengthRange(f"need 1 <= min_len <= max_len <= 63, got {min_len}, {max_len}")
    prng = Prng(seed)
    span = max_len - min_len + 1
    out = []
    for n in range(count):
        length = min_len + prng.below(span)
        chars = []
        for j in range(length):
            c = ALNUM[prng.below(36)]
            if j == 0 and c.isdigit():
                c = LETTERS[prng.below(26)]
            chars.append(c)
        out.append(_synthetic("".join(chars), UNIFORM_SUFFIXES[n % 5], Label.DGA, "uniform"))
    return out


def gen_arith_dga(seed_date: Tuple[int, int, int], count: int) -> List[LabeledDomain]:
    """Date-seeded family: every draw comes from one stream seeded by YYYYMMDD."""
    try:
        year, month, day = seed_date
        datetime.date(year, month, day)
    except (TypeError, ValueError) as exc:
        raise InvalidDate(f"invalid seed date {seed_date!r}") from exc
    prng = Prng(year * 10000 + month * 100 + day)
    out = []
    for _ in range(count):
        length = 12 + prng.next_u64() % 8
        root = "".join(LETTERS[prng.next_u64() % 26] for _ in range(length))
        out.append(_synthetic(root, "com", Label.DGA, "arith"))
    return out


def _check_wordlist(wordlist: Sequence[str]) -> List[str]:
    words = list(wordlist)
    if len(set(words)) < 2:
        raise WordlistTooSmall(f"need at least 2 distinct words, got {len(set(words))}")
    for w in words:
        if not (3 <= len(w) <= 10 and w.isascii() and w.isalpha() and w.islower()):
            raise BadWord(f"words must be 3-10 lowercase letters: {w!r}")
    return words


def gen_dict_dga(seed: int, wordlist: Sequence[str], count: int) -> List[LabeledDomain]:
    """Low-entropy evasion family: two dictionary words glued together."""
    words = _check_wordlist(wordlist)
    prng = Prng(seed)
    n = len(words)
    out = []
    for _ in range(count):
        root = words[prng.below(n)] + words[prng.below(n)]
        out.append(_synthetic(root, "net", Label.DGA, "dict"))
    return out


def gen_natural(seed: int, wordlist: Sequence[str], count: int) -> List[LabeledDomain]:
    """Offline stand-in for human-chosen names: one word (p=1/4) or two."""
    words = _check_wordlist(wordlist)
    prng = Prng(seed)
    n = len(words)
    out = []
    for i in range(count):
        single = prng.below(4) == 0
        root = words[prng.below(n)]
        if not single:
            root += words[prng.below(n)]
        out.append(_synthetic(root, NATURAL_SUFFIXES[i % 3], Label.LEGIT, "natural"))
    return out


@lru_cache(maxsize=1)
def _embedded_words() -> Tuple[str, ...]:
    text = resources.files("dgadetect").joinpath("data/words.txt").read_text("utf-8")
    return tuple(text.split())


def default_wordlist() -> List[str]:
    """The embedded 200-word English list."""
    return list(_embedded_words())


# -- balancing and splitting ----------------------------------------------

def dedupe(records: Iterable[LabeledDomain]) -> List[LabeledDomain]:
    seen = set()
    out = []
    for r in records:
        if r.parsed.original not in seen:
            seen.add(r.parsed.original)
            out.append(r)
    return out


def _check_ratios(ratios) -> Tuple[float, float, float]:
    try:
        r = tuple(float(x) for x in ratios)
    except (TypeError, ValueError) as exc:
        raise BadRatios(f"ratios must be three numbers: {ratios!r}") from exc
    if len(r) != 3 or any(not math.isfinite(x) or x < 0 for x in r):
        raise BadRatios(f"ratios must be three non-negative numbers: {ratios!r}")
    if abs(sum(r) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1, got {sum(r)}")
    return r


def balance_and_split(records: Iterable[LabeledDomain], ratios=DEFAULT_RATIOS, seed: int = 0) -> DatasetSplit:
    """Deduplicate, down-sample the majority class, shuffle once, then cut
    each class by ``ratios`` (remainders go to train)."""
    r = _check_ratios(ratios)
    unique = dedupe(records)
    by_class = {Label.LEGIT: [], Label.DGA: []}
    for rec in unique:
        by_class[rec.label].append(rec)
    if not by_class[Label.LEGIT] or not by_class[Label.DGA]:
        raise SingleClassInput("balancing needs records of both classes")

    prng = Prng(seed)
    size = min(len(v) for v in by_class.values())
    kept = []
    for label in (Label.LEGIT, Label.DGA):
        group = by_class[label]
        if len(group) > size:
            idx = list(range(len(group)))
            prng.shuffle(idx)
            group = [group[i] for i in sorted(idx[:size])]
        kept.extend(group)
    prng.shuffle(kept)

    n_val = int(math.floor(size * r[1] + 1e-9))
    n_test = int(math.floor(size * r[2] + 1e-9))
    n_train = size - n_val - n_test
    seen = {Label.LEGIT: 0, Label.DGA: 0}
    train, val, test = [], [], []
    for rec in kept:
        k = seen[rec.label]
        seen[rec.label] += 1
        if k < n_train:
            train.append(rec)
        elif k < n_train + n_val:
            val.append(rec)
        else:
            test.append(rec)
    return DatasetSplit(train, val, test, seed & 0xFFFFFFFFFFFFFFFF, r)


# -- dataset files ---------------------------------------------------------

DATASET_HEADER = ("domain", "label", "family")
SPLIT_FILES = {"train": "train.csv", "val": "val.csv", "test": "test.csv"}


def dataset_csv(records: Iterable[LabeledDomain]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_HEADER)
    for rec in records:
        w.writerow((rec.parsed.original, int(rec.label), rec.family))
    return buf.getvalue()


def write_dataset(records: Iterable[LabeledDomain], path) -> None:
    try:
        Path(path).write_text(dataset_csv(records), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_dataset(path, table: Optional[SuffixTable] = None) -> List[LabeledDomain]:
    rows = list(csv.reader(read_lines(path)))
    if not rows or tuple(rows[0]) != DATASET_HEADER:
        raise MalformedCsvLine(f"{path}: missing header {','.join(DATASET_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 3 or row[1] not in ("0", "1"):
            raise MalformedCsvLine(f"{path}:{lineno}: bad row {row!r}")
        parsed = split_public_suffix(normalize(row[0]), table)
        out.append(LabeledDomain(parsed, Label(int(row[1])), row[2]))
    return out


def write_split(split: DatasetSplit, directory) -> None:
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {d}: {exc}") from exc
    for name, records in split.parts().items():
        write_dataset(records, d / SPLIT_FILES[name])


def read_split(directory, table: Optional[SuffixTable] = None) -> DatasetSplit:
    d = Path(directory)
    parts = {name: read_dataset(d / fname, table) for name, fname in SPLIT_FILES.items()}
    total = sum(len(v) for v in parts.values()) or 1
    ratios = tuple(len(parts[k]) / total for k in ("train", "val", "test"))
    return DatasetSplit(parts["train"], parts["val"], parts["test"], 0, ratios)
