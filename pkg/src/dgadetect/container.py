"""Binary model container shared by both model kinds.

Layout (little-endian header, 16 bytes)::

    magic    4 bytes  b"DGAM"
    version  u16      1
    kind     u8       1 = forest, 2 = lstm
    reserved u8       0
    length   u64      payload byte length
    payload  UTF-8 JSON

Floats in the payload are 16-digit lowercase hex of their big-endian
IEEE-754 binary64 pattern, so a round trip is bit-exact.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .baseline import DecisionTree, ForestModel
from .errors import BadMagic, CorruptPayload, IoFailure, UnsupportedVersion
from .neural import GATES, LstmModel, Tokenizer

MAGIC = b"DGAM"
VERSION = 1
KIND_FOREST = 1
KIND_LSTM = 2
HEADER = struct.Struct("<4sHBBQ")

Model = Union[ForestModel, LstmModel]


def hex_floats(arr) -> list:
    raw = np.ascontiguousarray(arr, dtype=">f8").tobytes().hex()
    return [raw[k: k + 16] for k in range(0, len(raw), 16)]


def unhex_floats(items, shape=None) -> np.ndarray:
    if any(not isinstance(s, str) or len(s) != 16 for s in items):
        raise CorruptPayload("float fields must be 16-digit hex strings")
    try:
        arr = np.frombuffer(bytes.fromhex("".join(items)), dtype=">f8").astype(np.float64)
    except ValueError as exc:
        raise CorruptPayload(f"bad hex float: {exc}") from exc
    if shape is not None:
        try:
            arr = arr.reshape(shape)
        except ValueError as exc:
            raise CorruptPayload(f"array does not fit shape {shape}") from exc
    return arr


def _forest_payload(m: ForestModel) -> Dict[str, Any]:
    return {
        "kind": "forest",
        "n_trees": m.n_trees,
        "max_depth": m.max_depth,
        "seed": m.seed,
        "feature_names": list(m.feature_names),
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": hex_floats(t.threshold),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "n0": t.n0.tolist(),
                "n1": t.n1.tolist(),
            }
            for t in m.trees
        ],
    }


def _lstm_param_views(m: LstmModel) -> Dict[str, np.ndarray]:
    views = {"E": m.E}
    for kind in ("W", "U", "b"):
        for g in GATES:
            views[f"{kind}_{g}"] = m.gate(kind, g)
    views["w"] = m.w_out
    views["b"] = m.b_out
    return views


def _lstm_payload(m: LstmModel) -> Dict[str, Any]:
    tok = Tokenizer()
    params = {
        name: {"shape": list(arr.shape), "data": hex_floats(arr)}
        for name, arr in _lstm_param_views(m).items()
    }
    return {
        "kind": "lstm",
        "d_emb": m.d_emb,
        "d_hid": m.d_hid,
        "vocab_size": tok.vocab_size,
        "max_len": tok.max_len,
        "tokenizer_alphabet_sha256": tok.alphabet_hash(),
        "gate_order": "".join(GATES),
        "params": params,
    }


def encode_model(model: Model, meta: Optional[dict] = None) -> bytes:
    if isinstance(model, ForestModel):
        kind, payload = KIND_FOREST, _forest_payload(model)
    elif isinstance(model, LstmModel):
        kind, payload = KIND_LSTM, _lstm_payload(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if meta:
        payload["meta"] = meta
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HEADER.pack(MAGIC, VERSION, kind, 0, len(body)) + body


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def save_model(model: Model, path, meta: Optional[dict] = None) -> None:
    """Write the container atomically (temp file in the same directory, then rename)."""
    data = encode_model(model, meta)
    target = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.chmod(tmp, 0o666 & ~_umask())
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write model {path}: {exc}") from exc


def _decode_forest(p: dict) -> ForestModel:
    trees = []
    for t in p["trees"]:
        trees.append(
            DecisionTree(
                np.array(t["feature"], dtype=np.int64),
                unhex_floats(t["threshold"]),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["n0"], dtype=np.int64),
                np.array(t["n1"], dtype=np.int64),
            )
        )
    model = ForestModel(trees, int(p["n_trees"]), int(p["max_depth"]), int(p["seed"]),
                        tuple(p["feature_names"]))
    if model.feature_names != ("entropy", "length"):
        raise CorruptPayload(f"unexpected feature names {model.feature_names}")
    return model


def _decode_lstm(p: dict) -> LstmModel:
    tok = Tokenizer()
    if p.get("tokenizer_alphabet_sha256") != tok.alphabet_hash():
        raise CorruptPayload("tokenizer alphabet does not match this build")
    if p.get("gate_order") != "".join(GATES):
        raise CorruptPayload("unsupported gate order")
    d, h = int(p["d_emb"]), int(p["d_hid"])
    if d < 1 or h < 1:
        raise CorruptPayload("non-positive dimensions")
    m = LstmModel.zeros(d, h)
    for name, view in _lstm_param_views(m).items():
        entry = p["params"][name]
        arr = unhex_floats(entry["data"], tuple(entry["shape"]))
        if arr.shape != view.shape:
            raise CorruptPayload(f"{name}: shape {arr.shape} != {view.shape}")
        view[...] = arr
    return m


def decode_model(data: bytes) -> Tuple[Model, dict]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"not a model container (magic {data[:4]!r})")
    if len(data) < HEADER.size:
        raise CorruptPayload("truncated header")
    _, version, kind, reserved, length = HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersion(f"container version {version} (this build reads {VERSION})")
    if kind not in (KIND_FOREST, KIND_LSTM) or reserved != 0:
        raise CorruptPayload(f"bad kind/reserved bytes ({kind}, {reserved})")
    body = data[HEADER.size:]
    if len(body) != length:
        raise CorruptPayload(f"payload length {len(body)} != declared {length}")
    try:
        payload = json.loads(body.decode("utf-8"))
        expected = "forest" if kind == KIND_FOREST else "lstm"
        if payload.get("kind") != expected:
            raise CorruptPayload("payload kind disagrees with header")
        model = _decode_forest(payload) if kind == KIND_FOREST else _decode_lstm(payload)
        model.validate()
    except CorruptPayload:
        raise
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise CorruptPayload(f"invalid payload: {exc}") from exc
    return model, payload.get("meta", {})


def read_container(path) -> Tuple[Model, dict]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read model {path}: {exc}") from exc
    return decode_model(data)


def load_model(path) -> Model:
    """Load and validate a container written by :func:`save_model`."""
    return read_container(path)[0]
