"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` (lines are printed even
without ``-s``). Criteria 4, 5 and 7 share one end-to-end ``experiment``
run for seed 7; criterion 7 runs it a second time.
"""

import json
import math
import random
import string
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from dgadetect import cli
from dgadetect.baseline import ForestConfig, best_split, predict_scores, train_forest_arrays
from dgadetect.container import decode_model, encode_model, load_model, save_model
from dgadetect.corpus import gen_natural, gen_uniform_dga
from dgadetect.domain_model import default_suffix_table, parse
from dgadetect.errors import BadMagic, CorruptPayload, UnsupportedVersion
from dgadetect.evaluation import f1_score
from dgadetect.experiment import split_wordlist
from dgadetect.corpus import default_wordlist
from dgadetect.features import FeatureVector, mean_entropy, shannon_entropy
from dgadetect.neural import LstmModel, Tokenizer, backward, forward, loss_bce, tokenize

SEED = 7
ARTIFACTS = ("forest.dgam", "lstm.dgam", "report_forest.json", "report_lstm.json", "comparison.json",
             "dict_holdout.json", "lstm_history.json", "entropy_hist.csv", "config.json",
             "data/train.csv", "data/val.csv", "data/test.csv")


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


class Run:
    def __init__(self, out: Path):
        t0 = time.perf_counter()
        self.code = cli.run(["experiment", "--seed", str(SEED), "--out", str(out)])
        self.seconds = time.perf_counter() - t0
        self.out = out

    def json(self, name):
        return json.loads((self.out / name).read_text())


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    return Run(tmp_path_factory.mktemp("exp_a"))


# -- 1 ------------------------------------------------------------------------

def entropy_oracle(s):
    n = len(s)
    return -math.fsum((s.count(c) / n) * math.log(s.count(c) / n, 2) for c in sorted(set(s)))


def test_criterion_01_entropy(verdict):
    t0 = time.perf_counter()
    closed = {"aaaa": 0.0, "abcd": 2.0, "abab": 1.0}
    worst_closed = max(abs(shannon_entropy(s) - v) for s, v in closed.items())
    gen = random.Random(1)
    alphabet = string.ascii_lowercase + string.digits + "-"
    worst = 0.0
    for _ in range(1000):
        s = "".join(gen.choice(alphabet[: gen.randint(1, 37)]) for _ in range(gen.randint(1, 63)))
        worst = max(worst, abs(shannon_entropy(s) - entropy_oracle(s)))
    dt = time.perf_counter() - t0
    ok = worst_closed <= 1e-12 and worst <= 1e-9 and dt < 1.0
    verdict(1, ok, f"closed-form err {worst_closed:.1e}, oracle err {worst:.1e} over 1000, {dt:.3f}s")


# -- 2 ------------------------------------------------------------------------

def test_criterion_02_entropy_bands(verdict):
    t0 = time.perf_counter()
    uni = mean_entropy(r.parsed.root for r in gen_uniform_dga(SEED, 1000, 20, 20))
    natural_words, _ = split_wordlist(default_wordlist())
    nat_full = mean_entropy(r.parsed.root for r in gen_natural(SEED, default_wordlist(), 1000))
    nat_half = mean_entropy(r.parsed.root for r in gen_natural(SEED, natural_words, 1000))
    dt = time.perf_counter() - t0
    ok = uni > 3.8 and 2.2 <= nat_full <= 3.6 and 2.2 <= nat_half <= 3.6 and dt < 5.0
    verdict(2, ok, f"uniform(20) mean {uni:.3f} > 3.8; natural mean {nat_full:.3f} "
                   f"(experiment vocabulary {nat_half:.3f}) in [2.2, 3.6]; {dt:.2f}s")


# -- 3 ------------------------------------------------------------------------

def numeric_gradients(m, seq, y, eps=1e-5):
    out = {}
    for name, arr in m.params().items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            lp = loss_bce(forward(m, seq)[0], y)
            arr[idx] = old - eps
            lm = loss_bce(forward(m, seq)[0], y)
            arr[idx] = old
            g[idx] = (lp - lm) / (2 * eps)
        out[name] = g
    return out


def test_criterion_03_gradients(verdict):
    t0 = time.perf_counter()
    gen = np.random.default_rng(2024)
    tok = Tokenizer(max_len=6)
    letters = string.ascii_lowercase + string.digits + "-"
    worst = 0.0
    for _ in range(20):
        m = LstmModel.zeros(2, 3)
        for arr in m.params().values():
            arr[...] = gen.uniform(-1, 1, arr.shape)
        root = "".join(gen.choice(list(letters), int(gen.integers(1, 7))))
        seq = tokenize(root, tok)
        y = int(gen.integers(0, 2))
        p, cache = forward(m, seq)
        g = backward(m, seq, y, cache)
        for name, num in numeric_gradients(m, seq, y).items():
            a = getattr(g, name)
            rel = np.abs(a - num) / np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-8)
            worst = max(worst, float(rel.max()))
    dt = time.perf_counter() - t0
    verdict(3, worst < 1e-4 and dt < 30.0, f"max relative error {worst:.2e} over 20 models, {dt:.2f}s")


# -- 4, 5 ------------------------------------------------------------------------

def test_criterion_04_table_analogue(verdict, experiment):
    assert experiment.code == 0
    f, l = experiment.json("report_forest.json"), experiment.json("report_lstm.json")
    n = {k: sum(1 for _ in open(experiment.out / "data" / f"{k}.csv")) - 1 for k in ("train", "val", "test")}
    ok = (
        n == {"train": 8000, "val": 1000, "test": 1000}
        and l["accuracy"] >= 0.95
        and 0.80 <= f["accuracy"] <= 0.95
        and l["accuracy"] >= f["accuracy"] + 0.03
        and l["recall"] >= f["recall"]
        and experiment.seconds < 15 * 60
    )
    verdict(4, ok, f"sizes {n}; lstm acc {l['accuracy']:.4f} rec {l['recall']:.4f}; "
                   f"forest acc {f['accuracy']:.4f} rec {f['recall']:.4f}; {experiment.seconds:.0f}s")


def test_criterion_05_dictionary_dga(verdict, experiment):
    d = experiment.json("dict_holdout.json")
    gap = d["lstm_recall"] - d["forest_recall"]
    verdict(5, d["n"] == 500 and gap >= 0.05,
            f"n={d['n']}; lstm recall {d['lstm_recall']:.3f}, forest {d['forest_recall']:.3f}, gap {gap:.3f}")


# -- 6 ------------------------------------------------------------------------

def test_criterion_06_metric_identities(verdict):
    a, b = f1_score(0.965, 0.981), f1_score(0.821, 0.850)
    ok = abs(a - 0.973) <= 5e-4 and abs(b - 0.835) <= 5e-4
    verdict(6, ok, f"F1(0.965, 0.981) = {a:.5f}; F1(0.821, 0.850) = {b:.5f}")


# -- 7 ------------------------------------------------------------------------

def test_criterion_07_determinism(verdict, experiment, tmp_path):
    second = Run(tmp_path / "exp_b")
    differing = [name for name in ARTIFACTS
                 if (experiment.out / name).read_bytes() != (second.out / name).read_bytes()]
    verdict(7, second.code == 0 and not differing,
            f"{len(ARTIFACTS) - len(differing)}/{len(ARTIFACTS)} artifacts byte-identical"
            + (f"; differ: {differing}" if differing else ""))


# -- 8 ------------------------------------------------------------------------

def tree_vote(tree, x):
    node = 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
    return int(tree.n1[node] > tree.n0[node])


def gini(labels):
    n, ones = len(labels), sum(labels)
    return 1 - Fraction(ones, n) ** 2 - Fraction(n - ones, n) ** 2


def exhaustive_split(samples, feature):
    vals = sorted({fv.as_tuple()[feature] for fv, _ in samples})
    labels = [y for _, y in samples]
    best = None
    for a, b in zip(vals, vals[1:]):
        thr = (a + b) / 2.0
        left = [y for fv, y in samples if fv.as_tuple()[feature] <= thr]
        right = [y for fv, y in samples if fv.as_tuple()[feature] > thr]
        gain = gini(labels) - Fraction(len(left), len(labels)) * gini(left) \
            - Fraction(len(right), len(labels)) * gini(right)
        if gain > 0 and (best is None or gain > best[1]):
            best = (thr, gain)
    return best


def test_criterion_08_oracles(verdict):
    gen = np.random.default_rng(8)
    X = np.column_stack([gen.uniform(0, 4.5, 500), gen.integers(1, 30, 500)]).astype(np.float64)
    y = ((X[:, 0] > 3.2) ^ (gen.random(500) < 0.15)).astype(np.int64)
    model = train_forest_arrays(X, y, ForestConfig(25, 6, 8))
    Q = np.column_stack([gen.uniform(0, 5, 100), gen.integers(0, 35, 100)]).astype(np.float64)
    scores = predict_scores(model, Q)
    tally = np.array([sum(tree_vote(t, q) for t in model.trees) / len(model.trees) for q in Q])
    forest_ok = np.array_equal(scores, tally)

    pyrng = random.Random(8)
    split_bad = 0
    for trial in range(50):
        n = pyrng.randint(2, 20)
        samples = [(FeatureVector(round(pyrng.uniform(0, 5), 1), pyrng.randint(1, 8)), pyrng.randint(0, 1))
                   for _ in range(n)]
        feature = trial % 2
        want, got = exhaustive_split(samples, feature), best_split(samples, feature)
        same = (want is None and got is None) or (
            want is not None and got is not None and got[0] == want[0] and math.isclose(got[1], float(want[1]))
        )
        split_bad += not same
    verdict(8, forest_ok and split_bad == 0,
            f"forest vs tally on 100 inputs: {'equal' if forest_ok else 'DIFFER'}; "
            f"best_split mismatches {split_bad}/50")


# -- 9 ------------------------------------------------------------------------

def test_criterion_09_persistence(verdict, tmp_path):
    gen = np.random.default_rng(9)
    X = np.column_stack([gen.uniform(0, 4.5, 200), gen.integers(1, 25, 200)]).astype(np.float64)
    forest = train_forest_arrays(X, (X[:, 0] > 2.5).astype(np.int64), ForestConfig(5, 4, 9))
    lstm = LstmModel.init_uniform(4, 6, seed=9)
    save_model(forest, tmp_path / "f.dgam")
    save_model(lstm, tmp_path / "l.dgam")
    f2, l2 = load_model(tmp_path / "f.dgam"), load_model(tmp_path / "l.dgam")
    forest_ok = all(
        getattr(a, k).tobytes() == getattr(b, k).tobytes()
        for a, b in zip(forest.trees, f2.trees) for k in ("feature", "threshold", "left", "right", "n0", "n1")
    ) and len(f2.trees) == len(forest.trees)
    lstm_ok = all(getattr(lstm, k).tobytes() == getattr(l2, k).tobytes() for k in LstmModel.PARAM_NAMES)

    good = encode_model(lstm)
    cases = {
        "magic": (b"XXXX" + good[4:], BadMagic),
        "version": (good[:4] + b"\x02\x00" + good[6:], UnsupportedVersion),
        "length": (good[:-1], CorruptPayload),
    }
    raised = {}
    for name, (blob, err) in cases.items():
        try:
            decode_model(blob)
            raised[name] = False
        except err:
            raised[name] = True
    ok = forest_ok and lstm_ok and all(raised.values())
    verdict(9, ok, f"forest bit-exact {forest_ok}, lstm bit-exact {lstm_ok}, corruption errors {raised}")


# -- 10 ------------------------------------------------------------------------

def random_domain(gen, suffixes):
    ldh = string.ascii_lowercase + string.digits

    def label():
        n = gen.randint(1, 15)
        body = "".join(gen.choice(ldh + "-") for _ in range(n))
        return gen.choice(ldh) + body.strip("-") if n > 1 else gen.choice(ldh)

    subs = [label() for _ in range(gen.randint(0, 3))]
    return ".".join(subs + [label(), gen.choice(suffixes)])


def test_criterion_10_parsing(verdict):
    a, b = parse("www.google.com"), parse("example.co.uk")
    fixed = (a.root, a.suffix, a.subdomain, b.root, b.suffix, b.subdomain) == (
        "google", "com", "www", "example", "co.uk", "")
    table = default_suffix_table()
    # under "*.ck" a bare "x.ck" is itself a suffix, so wildcard parents are skipped
    suffixes = sorted(r for r in table.entries
                      if not r.startswith(("*", "!")) and f"*.{r}" not in table.entries)
    gen = random.Random(10)
    failures = 0
    for _ in range(1000):
        name = random_domain(gen, suffixes)
        try:
            ok = parse(name).reassemble() == name
        except Exception:
            ok = False
        failures += not ok
    verdict(10, fixed and failures == 0, f"fixed cases {'ok' if fixed else 'WRONG'}; "
                                         f"round-trip failures {failures}/1000")
