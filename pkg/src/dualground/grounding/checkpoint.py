"""Byte-stable checkpoint files: a zip of ``.npy`` arrays plus config and vocabulary JSON."""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from ..numerics import named_parameters
from .model import GroundingParams, ModelConfig, Vocab, init_model

_STAMP = (2020, 1, 1, 0, 0, 0)


def _write(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_STAMP)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, payload)


def save_checkpoint(path, params: GroundingParams, cfg: ModelConfig, vocab: Vocab, extra: dict | None = None) -> None:
    with zipfile.ZipFile(path, "w") as zf:
        _write(zf, "config.json", json.dumps(cfg.to_dict(), sort_keys=True).encode())
        _write(zf, "vocab.json", json.dumps(vocab.words).encode())
        if extra:
            _write(zf, "extra.json", json.dumps(extra, sort_keys=True).encode())
        for name, t in named_parameters(params):
            buf = io.BytesIO()
            np.save(buf, t.data, allow_pickle=False)
            _write(zf, f"params/{name}.npy", buf.getvalue())


def load_checkpoint(path):
    """Returns ``(params, cfg, vocab)``."""
    with zipfile.ZipFile(path) as zf:
        cfg = ModelConfig(**json.loads(zf.read("config.json")))
        vocab = Vocab(json.loads(zf.read("vocab.json")))
        params = init_model(cfg, vocab)
        for name, t in named_parameters(params):
            arr = np.load(io.BytesIO(zf.read(f"params/{name}.npy")), allow_pickle=False)
            if arr.shape != t.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}: {arr.shape} vs {t.shape}")
            t.data[...] = arr
    return params, cfg, vocab
