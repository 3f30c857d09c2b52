"""End-to-end desk-scale comparison of the two models.

Builds a synthetic balanced corpus, trains the forest and the LSTM on the
same split, evaluates both on the held-out test split and on a separate
dictionary-DGA-only set, and writes every artifact to one directory. The
whole run is a pure function of the seed and the config.
"""

from __future__ import annotations

import datetime
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import baseline, neural
from .container import save_model
from .corpus import (
    LabeledDomain,
    balance_and_split,
    dedupe,
    default_wordlist,
    gen_arith_dga,
    gen_dict_dga,
    gen_natural,
    gen_uniform_dga,
    write_split,
)
from .errors import IoFailure
from .evaluation import EvalReport, compare, evaluate
from .features import entropy_histogram, extract_features
from .prng import Prng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    per_class: int = 5000
    uniform_count: int = 2000
    arith_count: int = 2000
    dict_count: int = 1000
    uniform_min_len: int = 12
    uniform_max_len: int = 24
    dict_holdout: int = 500
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    n_trees: int = 100
    max_depth: int = 8
    epochs: int = 20
    lr: float = 3e-3
    batch_size: int = 64
    optimizer: str = "adam"
    clip: float = 5.0
    d_emb: int = 16
    d_hid: int = 64
    bin_width: float = 0.25


def split_wordlist(words: Sequence[str]) -> Tuple[List[str], List[str]]:
    """Disjoint (natural, dictionary-DGA) vocabularies: even and odd positions.

    Sharing one vocabulary would make two-word natural names and dictionary
    DGAs literally the same strings.
    """
    return list(words[0::2]), list(words[1::2])


def _take_unique(records: List[LabeledDomain], n: int, what: str, exclude=frozenset()) -> List[LabeledDomain]:
    out = [r for r in dedupe(records) if r.parsed.original not in exclude][:n]
    if len(out) < n:
        raise ValueError(f"{what}: only {len(out)} unique records, need {n}")
    return out


def build_corpus(seed: int, cfg: ExperimentConfig = ExperimentConfig()):
    """Return (records, dict_holdout) for the given seed."""
    if cfg.uniform_count + cfg.arith_count + cfg.dict_count != cfg.per_class:
        raise ValueError("DGA family counts must add up to per_class")
    subseeds = Prng(seed)
    s_nat, s_uni, s_arith, s_dict, s_hold = (subseeds.next_u64() for _ in range(5))
    natural_words, dict_words = split_wordlist(default_wordlist())
    day = datetime.date(2020, 1, 1) + datetime.timedelta(days=s_arith % 3653)

    legit = _take_unique(gen_natural(s_nat, natural_words, 2 * cfg.per_class), cfg.per_class, "natural")
    dga = (
        _take_unique(gen_uniform_dga(s_uni, cfg.uniform_count, cfg.uniform_min_len, cfg.uniform_max_len),
                     cfg.uniform_count, "uniform")
        + _take_unique(gen_arith_dga((day.year, day.month, day.day), cfg.arith_count), cfg.arith_count, "arith")
        + _take_unique(gen_dict_dga(s_dict, dict_words, 2 * cfg.dict_count), cfg.dict_count, "dict")
    )
    records = legit + dga
    seen = frozenset(r.parsed.original for r in records)
    holdout = _take_unique(gen_dict_dga(s_hold, dict_words, 4 * cfg.dict_holdout), cfg.dict_holdout,
                           "dict holdout", exclude=seen)
    return records, holdout


def _features(records: Sequence[LabeledDomain]):
    X = np.array([extract_features(r.parsed).as_tuple() for r in records], dtype=np.float64).reshape(-1, 2)
    y = np.array([int(r.label) for r in records], dtype=np.int64)
    return X, y


def _recall(scores: np.ndarray) -> float:
    return float(np.mean(scores > 0.5))


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_experiment(seed: int, out_dir, cfg: ExperimentConfig = ExperimentConfig()) -> Dict[str, object]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc

    records, holdout = build_corpus(seed, cfg)
    split = balance_and_split(records, cfg.ratios, seed)
    write_split(split, out / "data")
    log.info("split sizes: train=%d val=%d test=%d", len(split.train), len(split.validation), len(split.test))

    X_train, y_train = _features(split.train)
    X_test, y_test = _features(split.test)
    X_hold, _ = _features(holdout)

    forest = baseline.train_forest_arrays(
        X_train, y_train, baseline.ForestConfig(cfg.n_trees, cfg.max_depth, seed)
    )
    save_model(forest, out / "forest.dgam", meta={"seed": seed})
    forest_report = evaluate(baseline.predict_scores(forest, X_test), y_test)

    tcfg = neural.TrainConfig(
        lr=cfg.lr, batch_size=cfg.batch_size, epochs=cfg.epochs, seed=seed,
        optimizer=cfg.optimizer, clip=cfg.clip, d_emb=cfg.d_emb, d_hid=cfg.d_hid,
    )
    trained = neural.train_lstm(split, tcfg)
    lstm = trained.model
    save_model(lstm, out / "lstm.dgam", meta={"seed": seed, "train_config": asdict(tcfg)})
    lstm_report = evaluate(neural.score_roots(lstm, [r.parsed.root for r in split.test]), y_test)

    hold_roots = [r.parsed.root for r in holdout]
    dict_recall = {
        "n": len(holdout),
        "forest_recall": _recall(baseline.predict_scores(forest, X_hold)),
        "lstm_recall": _recall(neural.score_roots(lstm, hold_roots)),
    }

    hist = entropy_histogram(
        [(extract_features(r.parsed), int(r.label)) for r in split.train + split.validation + split.test],
        cfg.bin_width,
    )
    (out / "entropy_hist.csv").write_text(hist.to_csv(), encoding="utf-8")

    comparison = compare(lstm_report, forest_report).as_dict("lstm", "forest")
    (out / "report_forest.json").write_text(forest_report.to_json() + "\n", encoding="utf-8")
    (out / "report_lstm.json").write_text(lstm_report.to_json() + "\n", encoding="utf-8")
    _dump(out / "comparison.json", comparison)
    _dump(out / "dict_holdout.json", dict_recall)
    _dump(out / "lstm_history.json", {"initial_loss": trained.initial_loss, "epochs": trained.history})
    _dump(out / "config.json", {"seed": seed, **asdict(cfg)})

    return {
        "forest": forest_report,
        "lstm": lstm_report,
        "comparison": comparison,
        "dict_holdout": dict_recall,
        "split": split,
    }


def load_reports(out_dir) -> Dict[str, EvalReport]:
    out = Path(out_dir)
    return {
        name: EvalReport.from_dict(json.loads((out / f"report_{name}.json").read_text()))
        for name in ("forest", "lstm")
    }
