"""Domain normalization and public-suffix splitting.

Only the registrable root label reaches the feature extractors, so the
public suffix ("com", "co.uk", ...) never influences a classification.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import (
    EmptyInput,
    InvalidCharacter,
    IoFailure,
    MalformedRule,
    NoKnownSuffix,
    SingleLabel,
)

_SCHEME_RE = re.compile(r"^[a-z][a-z0-9+.\-]*://", re.IGNORECASE)
_PORT_RE = re.compile(r":[0-9]*$")
_LDH_LABEL_RE = re.compile(r"^[a-z0-9-]+$")
_IPV4_RE = re.compile(r"^[0-9]+(\.[0-9]+){3}$")
_LDH_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-.")


def normalize(raw: str) -> str:
    """Reduce a raw domain or URL to a lowercase host name.

    Strips surrounding whitespace, URL scheme, userinfo, path, query,
    fragment, port and a single trailing dot. Punycode labels are kept as
    they are.

    Raises:
        EmptyInput: nothing remains after stripping.
        InvalidCharacter: a character outside letters, digits, hyphen and
            dot, an empty label, or an IPv4 literal.
    """
    s = raw.strip()
    m = _SCHEME_RE.match(s)
    if m:
        s = s[m.end():]
    elif s.startswith("//"):
        s = s[2:]
    for sep in "/?#":
        cut = s.find(sep)
        if cut != -1:
            s = s[:cut]
    if m and "@" in s:
        s = s.rsplit("@", 1)[1]
    s = _PORT_RE.sub("", s)
    s = s.lower()
    if s.endswith("."):
        s = s[:-1]
    if not s:
        raise EmptyInput(f"no host name in {raw!r}")
    bad = [c for c in s if c not in _LDH_CHARS]
    if bad:
        raise InvalidCharacter(f"invalid character {bad[0]!r} in {raw!r}")
    if any(not label for label in s.split(".")):
        raise InvalidCharacter(f"empty label in {raw!r}")
    if _IPV4_RE.match(s):
        raise InvalidCharacter(f"IP literal hosts are not domain names: {raw!r}")
    return s


@dataclass(frozen=True)
class SuffixTable:
    """Immutable set of public-suffix rules.

    ``entries`` holds every rule as written in the source ("com", "*.ck",
    "!www.ck"); lookups go through the three derived sets.
    """

    entries: frozenset
    source_id: str

    def __post_init__(self):
        plain, wild, exc = set(), set(), set()
        for rule in self.entries:
            if rule.startswith("!"):
                exc.add(rule[1:])
            elif rule.startswith("*."):
                wild.add(rule[2:])
            else:
                plain.add(rule)
        object.__setattr__(self, "_plain", frozenset(plain))
        object.__setattr__(self, "_wild", frozenset(wild))
        object.__setattr__(self, "_exc", frozenset(exc))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, rule: str) -> bool:
        return rule in self.entries

    def suffix_length(self, labels: list) -> int:
        """Number of trailing labels forming the public suffix; 0 if none match."""
        n = len(labels)
        best = 0
        for k in range(1, n + 1):
            candidate = ".".join(labels[n - k:])
            if candidate in self._exc:
                # exception rule: the suffix is the rule minus its leftmost label
                return k - 1
            if candidate in self._plain:
                best = max(best, k)
            if k < n and candidate in self._wild:
                best = max(best, k + 1)
        return best


def _clean_rule(line: str, lineno: int) -> Optional[str]:
    line = line.strip()
    if not line or line.startswith("//"):
        return None
    rule = line.split()[0].lower()
    prefix = ""
    if rule.startswith("!"):
        prefix, rule = "!", rule[1:]
    labels = rule.split(".")
    out = []
    for i, label in enumerate(labels):
        if label == "*" and i == 0 and not prefix:
            out.append(label)
            continue
        if not label.isascii():
            try:
                label = label.encode("idna").decode("ascii")
            except UnicodeError as exc:
                raise MalformedRule(f"line {lineno}: cannot encode {line!r}") from exc
        if not _LDH_LABEL_RE.match(label):
            raise MalformedRule(f"line {lineno}: illegal rule {line!r}")
        out.append(label)
    return prefix + ".".join(out)


def parse_suffix_rules(lines: Iterable[str], source_id: str) -> SuffixTable:
    rules = set()
    for lineno, line in enumerate(lines, 1):
        rule = _clean_rule(line, lineno)
        if rule is not None:
            rules.add(rule)
    return SuffixTable(frozenset(rules), source_id)


def load_suffix_table(source: Union[str, Path, None] = None) -> SuffixTable:
    """Load a suffix table from a rule file, or the embedded snapshot when
    ``source`` is None.

    Raises:
        MalformedRule: a line with illegal characters.
        IoFailure: the file cannot be read.
    """
    if source is None:
        return default_suffix_table()
    try:
        data = Path(source).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read suffix file {source}: {exc}") from exc
    text = data.decode("utf-8", errors="strict")
    digest = hashlib.sha256(data).hexdigest()[:16]
    return parse_suffix_rules(text.splitlines(), f"file:{source}#sha256:{digest}")


@lru_cache(maxsize=1)
def default_suffix_table() -> SuffixTable:
    data = resources.files("dgadetect").joinpath("data/public_suffix.dat").read_bytes()
    digest = hashlib.sha256(data).hexdigest()[:16]
    return parse_suffix_rules(
        data.decode("utf-8").splitlines(), f"embedded:public_suffix.dat#sha256:{digest}"
    )


@dataclass(frozen=True)
class ParsedDomain:
    original: str
    subdomain: str
    root: str
    suffix: str

    @property
    def registrable(self) -> str:
        return f"{self.root}.{self.suffix}"

    @property
    def subdomain_labels(self) -> tuple:
        return tuple(self.subdomain.split(".")) if self.subdomain else ()

    def reassemble(self) -> str:
        parts = [self.subdomain] if self.subdomain else []
        return ".".join(parts + [self.root, self.suffix])


def split_public_suffix(name: str, table: Optional[SuffixTable] = None) -> ParsedDomain:
    """Split a normalized name into subdomain, root label and public suffix.

    The longest matching rule wins; the label just left of it is the root.

    Raises:
        SingleLabel: a bare label that is not itself a rule.
        NoKnownSuffix: no rule matches, or the name is only a suffix.
    """
    if table is None:
        table = default_suffix_table()
    labels = name.split(".")
    k = table.suffix_length(labels)
    if len(labels) == 1 and k == 0:
        raise SingleLabel(f"{name!r} has a single label")
    if k == 0:
        raise NoKnownSuffix(f"no public-suffix rule matches {name!r}")
    if k >= len(labels):
        raise NoKnownSuffix(f"{name!r} is a bare public suffix")
    root_idx = len(labels) - k - 1
    return ParsedDomain(
        original=name,
        subdomain=".".join(labels[:root_idx]),
        root=labels[root_idx],
        suffix=".".join(labels[root_idx + 1:]),
    )


def parse(raw: str, table: Optional[SuffixTable] = None) -> ParsedDomain:
    """normalize followed by split_public_suffix."""
    return split_public_suffix(normalize(raw), table)
