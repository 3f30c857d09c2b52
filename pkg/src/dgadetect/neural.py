"""Character-level LSTM classifier trained from scratch.

Root label -> token ids -> embedding -> single-layer LSTM -> dense sigmoid.
Training minimises mean binary cross-entropy with backpropagation through
time; the recurrence itself lives in :mod:`dgadetect.kernels`.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .corpus import DatasetSplit, LabeledDomain
from .domain_model import SuffixTable, parse
from .errors import EmptyInput, SingleClassInput
from .prng import MASK64, Prng

log = logging.getLogger(__name__)

PAD = 0
OOV = 1
MAX_LEN = 63
ALPHABET: Tuple[str, ...] = tuple("abcdefghijklmnopqrstuvwxyz0123456789-")
VOCAB_SIZE = 2 + len(ALPHABET)
GATES = ("i", "f", "g", "o")
EPS_CLAMP = 1e-12


@dataclass(frozen=True)
class Tokenizer:
    max_len: int = MAX_LEN

    @property
    def alphabet(self) -> Dict[str, int]:
        table = {"<pad>": PAD, "<oov>": OOV}
        table.update({ch: 2 + k for k, ch in enumerate(ALPHABET)})
        return table

    @property
    def vocab_size(self) -> int:
        return VOCAB_SIZE

    def alphabet_hash(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in self.alphabet.items())
        return hashlib.sha256(text.encode()).hexdigest()

    def encode(self, root: str) -> np.ndarray:
        if not root:
            raise EmptyInput("cannot tokenize an empty root")
        chars = root[: self.max_len]
        ids = np.zeros(self.max_len, dtype=np.int64)
        off = self.max_len - len(chars)
        for k, ch in enumerate(chars):
            ids[off + k] = _CHAR_IDS.get(ch, OOV)
        return ids

    def encode_many(self, roots: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(roots), self.max_len), dtype=np.int64)
        for r, root in enumerate(roots):
            out[r] = self.encode(root)
        return out


_CHAR_IDS = {ch: 2 + k for k, ch in enumerate(ALPHABET)}


@dataclass(frozen=True)
class TokenSequence:
    ids: np.ndarray
    true_len: int


def tokenize(root: str, tok: Tokenizer = Tokenizer()) -> TokenSequence:
    """Map characters to ids (unknown -> OOV), keep the first ``max_len``
    characters and left-pad with PAD."""
    ids = tok.encode(root)
    return TokenSequence(ids, min(len(root), tok.max_len))


@dataclass
class LstmModel:
    """Parameters of the classifier. Gate blocks are stacked column-wise in
    the order i, f, g, o; ``W_i`` etc. are views into the stacked arrays."""

    E: np.ndarray       # (vocab, d_emb)
    W: np.ndarray       # (d_emb, 4 * d_hid)
    U: np.ndarray       # (d_hid, 4 * d_hid)
    b: np.ndarray       # (4 * d_hid,)
    w_out: np.ndarray   # (d_hid,)
    b_out: np.ndarray   # (1,)

    PARAM_NAMES = ("E", "W", "U", "b", "w_out", "b_out")

    @property
    def d_emb(self) -> int:
        return self.E.shape[1]

    @property
    def d_hid(self) -> int:
        return self.U.shape[0]

    def gate(self, kind: str, gate: str) -> np.ndarray:
        h = self.d_hid
        k = GATES.index(gate)
        arr = getattr(self, kind)
        return arr[..., k * h: (k + 1) * h]

    W_i = property(lambda self: self.gate("W", "i"))
    W_f = property(lambda self: self.gate("W", "f"))
    W_g = property(lambda self: self.gate("W", "g"))
    W_o = property(lambda self: self.gate("W", "o"))
    U_i = property(lambda self: self.gate("U", "i"))
    U_f = property(lambda self: self.gate("U", "f"))
    U_g = property(lambda self: self.gate("U", "g"))
    U_o = property(lambda self: self.gate("U", "o"))
    b_i = property(lambda self: self.gate("b", "i"))
    b_f = property(lambda self: self.gate("b", "f"))
    b_g = property(lambda self: self.gate("b", "g"))
    b_o = property(lambda self: self.gate("b", "o"))

    def params(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}

    def copy(self) -> "LstmModel":
        return LstmModel(**{k: v.copy() for k, v in self.params().items()})

    @classmethod
    def zeros(cls, d_emb: int, d_hid: int, vocab: int = VOCAB_SIZE) -> "LstmModel":
        return cls(
            np.zeros((vocab, d_emb)),
            np.zeros((d_emb, 4 * d_hid)),
            np.zeros((d_hid, 4 * d_hid)),
            np.zeros(4 * d_hid),
            np.zeros(d_hid),
            np.zeros(1),
        )

    @classmethod
    def init_uniform(cls, d_emb: int, d_hid: int, seed: int, scale: float = 0.08) -> "LstmModel":
        """Every parameter uniform in [-scale, scale) from one Prng stream,
        filled in the order E, W_i..W_o, U_i..U_o, b_i..b_o, w_out, b_out."""
        m = cls.zeros(d_emb, d_hid)
        prng = Prng(seed)

        def fill(arr):
            flat = arr.reshape(-1) if arr.flags.c_contiguous else None
            if flat is not None:
                for k in range(flat.size):
                    flat[k] = prng.uniform(-scale, scale)
            else:
                for idx in np.ndindex(arr.shape):
                    arr[idx] = prng.uniform(-scale, scale)

        fill(m.E)
        for kind in ("W", "U", "b"):
            for g in GATES:
                fill(m.gate(kind, g))
        fill(m.w_out)
        fill(m.b_out)
        return m

    def validate(self) -> None:
        d, h = self.d_emb, self.d_hid
        shapes = {
            "E": (VOCAB_SIZE, d),
            "W": (d, 4 * h),
            "U": (h, 4 * h),
            "b": (4 * h,),
            "w_out": (h,),
            "b_out": (1,),
        }
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if arr.shape != shape or arr.dtype != np.float64:
                raise ValueError(f"{name}: expected float64 {shape}, got {arr.dtype} {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite values")


Gradients = LstmModel


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class ForwardCache:
    ids: np.ndarray
    start: int
    acts: np.ndarray
    cs: np.ndarray
    hs: np.ndarray

    @property
    def h_last(self) -> np.ndarray:
        return self.hs[-1]


def _first_live(ids: np.ndarray) -> int:
    live = np.flatnonzero((ids != PAD).any(axis=0))
    if live.size == 0:
        raise EmptyInput("every sequence is empty")
    return int(live[0])


def forward_batch(model: LstmModel, ids: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
    """Probabilities for a (B, L) id matrix; leading all-PAD columns are skipped."""
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    start = _first_live(ids)
    acts, cs, hs = kernels.lstm_forward(model.E, model.W, model.U, model.b, ids, start)
    p = _sigmoid(hs[-1] @ model.w_out + model.b_out[0])
    return p, ForwardCache(ids, start, acts, cs, hs)


def forward(model: LstmModel, seq: TokenSequence) -> Tuple[float, ForwardCache]:
    p, cache = forward_batch(model, seq.ids.reshape(1, -1))
    return float(p[0]), cache


def loss_bce(p, y):
    """Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12]."""
    p = np.clip(p, EPS_CLAMP, 1.0 - EPS_CLAMP)
    return -(y * np.log(p) + (1 - y) * np.log(1.0 - p))


def loss_bce_grad(p, y):
    """d loss / d p (at the clamped probability)."""
    p = np.clip(p, EPS_CLAMP, 1.0 - EPS_CLAMP)
    return -y / p + (1 - y) / (1.0 - p)


def backward_batch(model: LstmModel, p: np.ndarray, y: np.ndarray, cache: ForwardCache) -> LstmModel:
    """Gradients of the mean loss over the batch."""
    y = np.asarray(y, dtype=np.float64)
    # sigmoid + cross-entropy: d loss / d logit = p - y
    dlogit = (p - y) / len(y)
    h_last = cache.h_last
    dh_last = np.ascontiguousarray(np.outer(dlogit, model.w_out))
    dE, dW, dU, db = kernels.lstm_backward(
        model.E, model.W, model.U, cache.ids, cache.start, cache.acts, cache.cs, cache.hs, dh_last
    )
    return LstmModel(dE, dW, dU, db, h_last.T @ dlogit, np.array([dlogit.sum()]))


def backward(model: LstmModel, seq: TokenSequence, y: int, cache: ForwardCache) -> LstmModel:
    p = _sigmoid(cache.h_last @ model.w_out + model.b_out[0])
    return backward_batch(model, p, np.array([y]), cache)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0
    optimizer: str = "adam"
    clip: float = 5.0
    d_emb: int = 16
    d_hid: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch size and epochs must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, model: LstmModel, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in model.params().items()}
        self.v = {k: np.zeros_like(v) for k, v in model.params().items()}
        self.t = 0

    def step(self, model: LstmModel, grads: LstmModel):
        c = self.cfg
        self.t += 1
        corr1 = 1.0 - c.beta1 ** self.t
        corr2 = 1.0 - c.beta2 ** self.t
        for name, param in model.params().items():
            g = getattr(grads, name)
            m, v = self.m[name], self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            param -= c.lr * (m / corr1) / (np.sqrt(v / corr2) + c.eps)


class _Sgd:
    def __init__(self, model, cfg):
        self.cfg = cfg

    def step(self, model, grads):
        for name, param in model.params().items():
            param -= self.cfg.lr * getattr(grads, name)


def clip_global_norm(grads: LstmModel, max_norm: float) -> float:
    norm = math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads.params().values()))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.params().values():
            g *= scale
    return norm


def predict_ids(model: LstmModel, ids: np.ndarray, batch: int = 512) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    out = np.empty(len(ids))
    # chunks of similar true length keep the skipped PAD prefix long
    order = np.argsort((ids != PAD).sum(axis=1), kind="stable")
    for s in range(0, len(ids), batch):
        rows = order[s: s + batch]
        out[rows], _ = forward_batch(model, ids[rows])
    return out


def _encode_records(records: Sequence[LabeledDomain], tok: Tokenizer):
    ids = tok.encode_many([r.parsed.root for r in records])
    y = np.array([int(r.label) for r in records], dtype=np.float64)
    return ids, y


def mean_loss(model: LstmModel, ids: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(loss_bce(predict_ids(model, ids), y)))


@dataclass
class TrainResult:
    model: LstmModel
    initial_loss: float
    history: List[Dict[str, float]] = field(default_factory=list)


def train_lstm(split: DatasetSplit, config: TrainConfig = TrainConfig(), tok: Tokenizer = Tokenizer()) -> TrainResult:
    """Mini-batch training; a pure function of (split, config)."""
    if not split.train:
        raise EmptyInput("empty training split")
    ids, y = _encode_records(split.train, tok)
    if y.min() == y.max():
        raise SingleClassInput("LSTM training needs both classes")
    val_ids, val_y = _encode_records(split.validation, tok) if split.validation else (None, None)

    seed = config.seed & MASK64
    model = LstmModel.init_uniform(config.d_emb, config.d_hid, seed)
    opt = _Adam(model, config) if config.optimizer == "adam" else _Sgd(model, config)
    shuffler = Prng(seed ^ 0xD1B54A32D192ED03)
    order = list(range(len(y)))
    result = TrainResult(model, mean_loss(model, ids, y))
    log.info("lstm: initial train loss %.4f", result.initial_loss)

    for epoch in range(1, config.epochs + 1):
        shuffler.shuffle(order)
        perm = np.array(order, dtype=np.int64)
        for s in range(0, len(perm), config.batch_size):
            batch = perm[s: s + config.batch_size]
            p, cache = forward_batch(model, ids[batch])
            grads = backward_batch(model, p, y[batch], cache)
            clip_global_norm(grads, config.clip)
            opt.step(model, grads)
        entry = {"epoch": epoch, "train_loss": mean_loss(model, ids, y)}
        if val_ids is not None:
            entry["val_accuracy"] = float(np.mean((predict_ids(model, val_ids) > 0.5) == (val_y > 0.5)))
        result.history.append(entry)
        log.info("lstm: epoch %d %s", epoch, entry)
    return result


def score_roots(model: LstmModel, roots: Sequence[str], tok: Tokenizer = Tokenizer()) -> np.ndarray:
    if not roots:
        return np.empty(0)
    return predict_ids(model, tok.encode_many(list(roots)))


def predict(model: LstmModel, tok: Tokenizer, domain: str, table: Optional[SuffixTable] = None) -> Tuple[float, int]:
    """Score a raw domain on its root label; DGA iff p > 0.5."""
    parsed = parse(domain, table)
    p = float(score_roots(model, [parsed.root], tok)[0])
    return p, int(p > 0.5)
