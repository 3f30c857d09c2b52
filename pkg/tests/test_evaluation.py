import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgadetect.errors import EmptyInput, EmptyMatrix
from dgadetect.evaluation import (
    ConfusionMatrix,
    EvalReport,
    compare,
    confusion,
    evaluate,
    f1_score,
    metrics,
)


def test_confusion_examples():
    assert confusion([(0.9, 1)], 0.5) == ConfusionMatrix(tp=1)
    assert confusion([(0.5, 1)], 0.5) == ConfusionMatrix(fn=1)
    assert confusion([(0.5, 0)], 0.5) == ConfusionMatrix(tn=1)
    assert confusion([(0.51, 0)], 0.5) == ConfusionMatrix(fp=1)
    with pytest.raises(EmptyInput):
        confusion([], 0.5)


def test_confusion_recount(rng):
    scores = rng.random(1000)
    labels = rng.integers(0, 2, 1000)
    cm = confusion(zip(scores, labels), 0.5)
    tp = fp = tn = fn = 0
    for s, y in zip(scores.tolist(), labels.tolist()):
        if s > 0.5 and y == 1:
            tp += 1
        elif s > 0.5:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    assert cm == ConfusionMatrix(tp, fp, tn, fn)
    assert cm.total == 1000


@pytest.mark.parametrize("p, r, f1", [(0.965, 0.981, 0.973), (0.821, 0.850, 0.835)])
def test_table_f1(p, r, f1):
    assert f1_score(p, r) == pytest.approx(f1, abs=5e-4)


def test_metrics_examples():
    perfect = metrics(ConfusionMatrix(tp=5, tn=7))
    assert (perfect.accuracy, perfect.precision, perfect.recall, perfect.f1) == (1.0, 1.0, 1.0, 1.0)
    none_positive = metrics(ConfusionMatrix(tn=4, fn=2))
    assert none_positive.precision == 0.0 and none_positive.recall == 0.0 and none_positive.f1 == 0.0
    assert none_positive.accuracy == pytest.approx(4 / 6)
    r = metrics(ConfusionMatrix(tp=3, fp=1, tn=4, fn=2))
    assert r.precision == 0.75 and r.recall == 0.6 and r.accuracy == 0.7
    assert r.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)
    with pytest.raises(EmptyMatrix):
        metrics(ConfusionMatrix())


def report(acc, p, r, f1):
    return EvalReport(acc, p, r, f1, ConfusionMatrix())


LSTM_ROW = report(0.972, 0.965, 0.981, 0.97)
STAT_ROW = report(0.884, 0.821, 0.850, 0.83)


def test_compare_table_rows():
    c = compare(LSTM_ROW, STAT_ROW)
    assert set(c.winners.values()) == {"a"}
    assert c.deltas["accuracy"] == pytest.approx(0.088, abs=1e-9)
    d = c.as_dict("lstm", "forest")
    assert d["winners"] == {k: "lstm" for k in ("accuracy", "precision", "recall", "f1")}


def test_compare_antisymmetric_and_ties():
    ab, ba = compare(LSTM_ROW, STAT_ROW), compare(STAT_ROW, LSTM_ROW)
    for k, v in ab.deltas.items():
        assert v == -ba.deltas[k]
    assert set(ba.winners.values()) == {"b"}
    same = compare(STAT_ROW, STAT_ROW)
    assert set(same.winners.values()) == {"tie"} and set(same.deltas.values()) == {0.0}


def test_report_json_roundtrip():
    r = evaluate([0.9, 0.2, 0.7, 0.4], [1, 0, 0, 1])
    text = r.to_json()
    assert "\n" not in text
    assert text.startswith('{"accuracy":0.5,"precision":0.5,"recall":0.5,"f1":0.5,')
    import json

    assert EvalReport.from_dict(json.loads(text)) == r


counts = st.integers(0, 500)


@given(counts, counts, counts, counts)
def test_metric_bounds(tp, fp, tn, fn):
    if tp + fp + tn + fn == 0:
        return
    r = metrics(ConfusionMatrix(tp, fp, tn, fn))
    for v in (r.accuracy, r.precision, r.recall, r.f1):
        assert 0.0 <= v <= 1.0
    if r.precision + r.recall > 0:
        assert min(r.precision, r.recall) - 1e-12 <= r.f1 <= max(r.precision, r.recall) + 1e-12
        assert math.isclose(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall))


@given(
    st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60),
    st.floats(0, 1),
    st.floats(0, 1),
)
def test_threshold_monotone(pairs, t1, t2):
    lo, hi = sorted((t1, t2))
    a, b = confusion(pairs, lo), confusion(pairs, hi)
    assert b.tn + b.fn >= a.tn + a.fn
    assert a.total == b.total == len(pairs)


def test_evaluate_accepts_arrays():
    r = evaluate(np.array([0.6, 0.4]), np.array([1, 0]))
    assert r.accuracy == 1.0
