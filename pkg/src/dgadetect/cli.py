"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 model-format error,
5 network error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
import urllib.error
import urllib.request
import zipfile
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import baseline, corpus, neural
from .container import load_model, save_model
from .domain_model import load_suffix_table, parse
from .errors import DataError, DgaError, IoFailure, NetworkError
from .evaluation import evaluate
from .experiment import ExperimentConfig, run_experiment, split_wordlist
from .features import DEFAULT_BIN_WIDTH, entropy_histogram, extract_features, shannon_entropy

log = logging.getLogger("dgadetect")

DEFAULT_TRANCO_URL = "https://tranco-list.eu/top-1m.csv.zip"


class UsageError(DgaError):
    exit_code = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _ratios(text: str):
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratios {text!r}")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios need three comma-separated values")
    return parts


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


# -- subcommands ------------------------------------------------------------

def _download(url: str) -> List[str]:
    try:
        with urllib.request.urlopen(url, timeout=60) as resp:
            data = resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise NetworkError(f"download failed: {exc}") from exc
    if data[:2] == b"PK":
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            data = zf.read(zf.namelist()[0])
    return data.decode("utf-8", errors="replace").splitlines()


def cmd_fetch_tranco(args, table) -> int:
    lines = corpus.read_lines(args.from_file) if args.from_file else _download(args.url)
    records = corpus.ingest_tranco(lines, args.limit, table)
    _write_text(args.out, "".join(f"{k},{r.domain}\n" for k, r in enumerate(records, 1)))
    log.info("wrote %d domains (%d skipped) to %s", len(records), records.skipped, args.out)
    return 0


def _wordlist(path) -> List[str]:
    return [w for line in corpus.read_lines(path) for w in line.split()]


def cmd_gen(args, table) -> int:
    natural_words, dict_words = split_wordlist(corpus.default_wordlist())
    fam = args.family
    if fam == "uniform":
        records = corpus.gen_uniform_dga(args.seed, args.count, args.min_len, args.max_len)
    elif fam == "arith":
        s = args.seed
        records = corpus.gen_arith_dga((s // 10000, s // 100 % 100, s % 100), args.count)
    elif fam == "dict":
        records = corpus.gen_dict_dga(args.seed, _wordlist(args.wordlist) if args.wordlist else dict_words, args.count)
    else:
        records = corpus.gen_natural(args.seed, _wordlist(args.wordlist) if args.wordlist else natural_words, args.count)
    if fam == "natural":
        # legitimate names use the Tranco layout so build-dataset --legit accepts them
        text = "".join(f"{k},{r.domain}\n" for k, r in enumerate(records, 1))
    else:
        text = "".join(f"{r.domain}\n" for r in records)
    _write_text(args.out, text)
    return 0


def cmd_build_dataset(args, table) -> int:
    records = list(corpus.ingest_tranco(corpus.read_lines(args.legit), args.limit, table))
    for path in args.dga:
        records.extend(corpus.ingest_feed(corpus.read_lines(path), Path(path).stem, table))
    split = corpus.balance_and_split(records, args.ratios, args.seed)
    corpus.write_split(split, args.out)
    log.info("train=%d val=%d test=%d", len(split.train), len(split.validation), len(split.test))
    return 0


def cmd_train(args, table) -> int:
    split = corpus.read_split(args.data, table)
    if args.model == "forest":
        X, y = _arrays(split.train)
        model = baseline.train_forest_arrays(X, y, baseline.ForestConfig(args.n_trees, args.max_depth, args.seed))
        save_model(model, args.out, meta={"seed": args.seed})
    else:
        cfg = neural.TrainConfig(
            lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed,
            optimizer=args.optimizer, clip=args.clip, d_emb=args.d_emb, d_hid=args.d_hid,
        )
        result = neural.train_lstm(split, cfg)
        save_model(result.model, args.out, meta={"seed": args.seed})
        for entry in result.history:
            log.info("epoch %(epoch)d train_loss=%(train_loss).5f", entry)
    return 0


def _arrays(records):
    X = np.array([extract_features(r.parsed).as_tuple() for r in records], dtype=np.float64).reshape(-1, 2)
    y = np.array([int(r.label) for r in records], dtype=np.int64)
    return X, y


def score_records(model, records) -> np.ndarray:
    if isinstance(model, baseline.ForestModel):
        return baseline.predict_scores(model, _arrays(records)[0])
    return neural.score_roots(model, [r.parsed.root for r in records])


def cmd_eval(args, table) -> int:
    model = load_model(args.model_file)
    split = corpus.read_split(args.data, table)
    records = split.parts()[args.split]
    if not records:
        raise DataError(f"split {args.split!r} is empty")
    report = evaluate(score_records(model, records), [int(r.label) for r in records])
    print(report.to_json())
    return 0


def _classify_one(model, raw: str, table) -> dict:
    parsed = parse(raw, table)
    if isinstance(model, baseline.ForestModel):
        score = baseline.predict_forest(model, extract_features(parsed))
    else:
        score = float(neural.score_roots(model, [parsed.root])[0])
    return {
        "domain": parsed.original,
        "root": parsed.root,
        "entropy": shannon_entropy(parsed.root),
        "score": score,
        "label": int(score > 0.5),
    }


def cmd_classify(args, table) -> int:
    model = load_model(args.model_file)
    if args.domain is not None:
        print(json.dumps(_classify_one(model, args.domain, table)))
        return 0
    status = 0
    for line in sys.stdin:
        raw = line.strip()
        if not raw:
            continue
        try:
            print(json.dumps(_classify_one(model, raw, table)))
        except DataError as exc:
            log.warning("skipping %r: %s", raw, exc)
            status = 3
    return status


def cmd_hist(args, table) -> int:
    split = corpus.read_split(args.data, table)
    records = split.train + split.validation + split.test
    hist = entropy_histogram([(extract_features(r.parsed), int(r.label)) for r in records], args.bin_width)
    _write_text(args.out, hist.to_csv())
    return 0


def cmd_experiment(args, table) -> int:
    overrides = {k: getattr(args, k) for k in ("epochs", "n_trees") if getattr(args, k) is not None}
    result = run_experiment(args.seed, args.out, ExperimentConfig(**overrides))
    print(json.dumps(result["comparison"], sort_keys=True))
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dgadetect", description="DGA domain classification toolkit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--suffix-list", metavar="FILE", help="public-suffix rule file (default: embedded snapshot)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fetch-tranco", help="download or import a Tranco ranking")
    s.add_argument("--out", required=True)
    s.add_argument("--limit", type=int, default=50000)
    s.add_argument("--url", default=DEFAULT_TRANCO_URL)
    s.add_argument("--from", dest="from_file", metavar="FILE", help="read a local Tranco CSV instead")
    s.set_defaults(func=cmd_fetch_tranco)

    s = sub.add_parser("gen", help="generate synthetic domains")
    s.add_argument("--family", required=True, choices=("uniform", "arith", "dict", "natural"))
    s.add_argument("--seed", required=True, type=_seed, help="for arith: the date as YYYYMMDD")
    s.add_argument("--count", required=True, type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--min-len", type=int, default=8)
    s.add_argument("--max-len", type=int, default=20)
    s.add_argument("--wordlist", metavar="FILE")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("build-dataset", help="balance and split labeled domains")
    s.add_argument("--legit", required=True, help="Tranco-format CSV")
    s.add_argument("--dga", required=True, nargs="+", help="feed files, one domain per line")
    s.add_argument("--seed", required=True, type=_seed)
    s.add_argument("--ratios", type=_ratios, default=corpus.DEFAULT_RATIOS)
    s.add_argument("--limit", type=int, default=10 ** 9)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_dataset)

    s = sub.add_parser("train", help="train a model on a dataset directory")
    s.add_argument("--model", required=True, choices=("forest", "lstm"))
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--n-trees", type=int, default=100)
    s.add_argument("--max-depth", type=int, default=8)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--batch-size", type=int, default=128)
    s.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    s.add_argument("--clip", type=float, default=5.0)
    s.add_argument("--d-emb", type=int, default=16)
    s.add_argument("--d-hid", type=int, default=64)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="print an evaluation report as JSON")
    s.add_argument("--model-file", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", choices=("train", "val", "test"), default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("classify", help="score domains, one JSON line each")
    s.add_argument("--model-file", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--domain")
    g.add_argument("--stdin", action="store_true")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("hist", help="export the per-class entropy histogram")
    s.add_argument("--data", required=True)
    s.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_hist)

    s = sub.add_parser("experiment", help="end-to-end desk-scale comparison")
    s.add_argument("--seed", required=True, type=_seed)
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--n-trees", type=int)
    s.set_defaults(func=cmd_experiment)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        table = load_suffix_table(args.suffix_list) if args.suffix_list else None
        return args.func(args, table)
    except DgaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
