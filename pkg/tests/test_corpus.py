import pytest

from dgadetect.corpus import (
    LabeledDomain,
    balance_and_split,
    default_wordlist,
    gen_arith_dga,
    gen_dict_dga,
    gen_natural,
    gen_uniform_dga,
    ingest_feed,
    ingest_tranco,
    read_split,
    write_split,
)
from dgadetect.domain_model import ParsedDomain, parse_suffix_rules, split_public_suffix
from dgadetect.errors import (
    BadLengthRange,
    BadRatios,
    BadWord,
    InvalidDate,
    MalformedCsvLine,
    SingleClassInput,
    WordlistTooSmall,
)
from dgadetect.features import mean_entropy
from dgadetect.labels import Label


def roots(records):
    return [r.parsed.root for r in records]


def test_ingest_tranco():
    recs = ingest_tranco("1,google.com\n2,youtube.com".splitlines(), 2)
    assert roots(recs) == ["google", "youtube"]
    assert all(r.family == "tranco" and r.label == Label.LEGIT for r in recs)


def test_ingest_tranco_limit_and_skips():
    assert ingest_tranco(["1,google.com"], 0) == []
    recs = ingest_tranco(["1,google.com", "2,bad_name.com", "3,localhost", "4,x.org", "5,y.org"], 2)
    assert roots(recs) == ["google", "x"]
    assert recs.skipped == 2


@pytest.mark.parametrize("line", ["garbage", "1,a.com,extra"])
def test_ingest_tranco_malformed(line):
    with pytest.raises(MalformedCsvLine):
        ingest_tranco([line], 5)


def test_ingest_feed():
    recs = ingest_feed("abc123xyz.com\n# note\nqwrtpz.net".splitlines(), "osint")
    assert roots(recs) == ["abc123xyz", "qwrtpz"]
    assert all(r.family == "feed:osint" and r.label == Label.DGA for r in recs)
    assert ingest_feed([], "x") == []
    table = parse_suffix_rules(["comment"], "test")
    recs = ingest_feed(["#only", "only.a.comment", "not a domain"], "x", table)
    assert [r.domain for r in recs] == ["only.a.comment"]
    assert recs.skipped == 1


def test_uniform():
    a = gen_uniform_dga(1, 3, 20, 20)
    assert a == gen_uniform_dga(1, 3, 20, 20)
    assert [len(r) for r in roots(a)] == [20, 20, 20]
    assert [r.parsed.suffix for r in gen_uniform_dga(2, 7, 5, 9)] == [
        "com", "net", "org", "info", "biz", "com", "net"]
    for r in gen_uniform_dga(3, 500, 1, 63):
        assert r.parsed.root[0].isalpha()
        assert set(r.parsed.root) <= set("abcdefghijklmnopqrstuvwxyz0123456789")
        assert 1 <= len(r.parsed.root) <= 63
    assert mean_entropy(roots(gen_uniform_dga(1, 1000, 20, 20))) > 3.8


@pytest.mark.parametrize("lo, hi", [(0, 5), (6, 5), (1, 64)])
def test_uniform_bad_range(lo, hi):
    with pytest.raises(BadLengthRange):
        gen_uniform_dga(1, 1, lo, hi)


def test_arith():
    a = gen_arith_dga((2025, 11, 26), 2)
    assert a == gen_arith_dga((2025, 11, 26), 2)
    assert a != gen_arith_dga((2025, 11, 27), 2)
    assert gen_arith_dga((2025, 11, 26), 0) == []
    lengths = {len(r) for r in roots(gen_arith_dga((2024, 2, 29), 10000))}
    assert lengths <= set(range(12, 20))
    # brute force over 10,000 samples reaches every length in the range
    assert lengths == set(range(12, 20))
    with pytest.raises(InvalidDate):
        gen_arith_dga((2025, 2, 30), 1)


def test_dict():
    (r,) = gen_dict_dga(42, ["red", "blue"], 1)
    assert r.parsed.root in {"redred", "redblue", "bluered", "blueblue"}
    assert r.parsed.suffix == "net"
    assert gen_dict_dga(42, ["red", "blue"], 5) == gen_dict_dga(42, ["red", "blue"], 5)
    words = default_wordlist()
    assert mean_entropy(roots(gen_dict_dga(1, words, 1000))) < mean_entropy(
        roots(gen_uniform_dga(1, 1000, 20, 20)))
    with pytest.raises(WordlistTooSmall):
        gen_dict_dga(1, ["red"], 1)
    with pytest.raises(BadWord):
        gen_dict_dga(1, ["red", "Blue"], 1)
    with pytest.raises(BadWord):
        gen_dict_dga(1, ["red", "ab"], 1)


def test_natural():
    words = default_wordlist()
    recs = gen_natural(5, words, 1000)
    assert recs == gen_natural(5, words, 1000)
    assert all(r.label == Label.LEGIT and r.family == "natural" for r in recs)
    for r in recs:
        assert split_public_suffix(r.parsed.original) == r.parsed
    assert [r.parsed.suffix for r in recs[:4]] == ["com", "org", "com.br", "com"]
    singles = sum(r.parsed.root in words for r in recs)
    assert 180 < singles < 330
    assert 2.2 <= mean_entropy(roots(recs)) <= 3.6


def test_family_entropy_ordering():
    words = default_wordlist()
    uni = mean_entropy(roots(gen_uniform_dga(9, 1000, 20, 20)))
    assert uni > mean_entropy(roots(gen_dict_dga(9, words, 1000)))
    assert uni > mean_entropy(roots(gen_natural(9, words, 1000)))


def make(n, label, prefix):
    fam = "natural" if label == Label.LEGIT else "uniform"
    return [
        LabeledDomain(ParsedDomain(f"{prefix}{i}.com", "", f"{prefix}{i}", "com"), label, fam)
        for i in range(n)
    ]


def test_split_arithmetic():
    recs = make(50, Label.LEGIT, "a") + make(50, Label.DGA, "b")
    s = balance_and_split(recs, (0.8, 0.1, 0.1), 3)
    assert (len(s.train), len(s.validation), len(s.test)) == (80, 10, 10)
    for part in (s.train, s.validation, s.test):
        assert sum(r.label for r in part) * 2 == len(part)


def test_split_downsamples():
    recs = make(60, Label.LEGIT, "a") + make(40, Label.DGA, "b")
    s = balance_and_split(recs, (0.8, 0.1, 0.1), 3)
    allrecs = s.train + s.validation + s.test
    assert len(allrecs) == 80
    assert sum(r.label for r in allrecs) == 40


def test_split_deterministic_and_disjoint():
    recs = make(37, Label.LEGIT, "a") + make(52, Label.DGA, "b") + make(5, Label.DGA, "b")
    s1 = balance_and_split(recs, (0.7, 0.2, 0.1), 11)
    s2 = balance_and_split(recs, (0.7, 0.2, 0.1), 11)
    assert s1 == s2
    names = [r.domain for part in (s1.train, s1.validation, s1.test) for r in part]
    assert len(names) == len(set(names)) == 74
    for part in (s1.train, s1.validation, s1.test):
        n1 = sum(r.label for r in part)
        assert abs(n1 - (len(part) - n1)) <= 1
    assert balance_and_split(recs, (0.7, 0.2, 0.1), 12).train != s1.train


def test_split_dedupes_first_wins():
    dup = LabeledDomain(ParsedDomain("a0.com", "", "a0", "com"), Label.DGA, "uniform")
    recs = make(3, Label.LEGIT, "a") + [dup] + make(3, Label.DGA, "b")
    s = balance_and_split(recs, (1.0, 0.0, 0.0), 1)
    by_name = {r.domain: r for r in s.train}
    assert by_name["a0.com"].label == Label.LEGIT


def test_split_errors():
    with pytest.raises(SingleClassInput):
        balance_and_split(make(4, Label.LEGIT, "a"), (0.8, 0.1, 0.1), 1)
    recs = make(4, Label.LEGIT, "a") + make(4, Label.DGA, "b")
    for bad in [(0.5, 0.5, 0.5), (1.2, -0.1, -0.1), (0.5, 0.5)]:
        with pytest.raises(BadRatios):
            balance_and_split(recs, bad, 1)


def test_dataset_files_roundtrip(tmp_path):
    words = default_wordlist()
    recs = gen_natural(1, words, 40) + gen_dict_dga(2, words, 40)
    s = balance_and_split(recs, (0.8, 0.1, 0.1), 5)
    write_split(s, tmp_path)
    assert (tmp_path / "train.csv").read_text().splitlines()[0] == "domain,label,family"
    back = read_split(tmp_path)
    assert back.train == s.train and back.validation == s.validation and back.test == s.test
