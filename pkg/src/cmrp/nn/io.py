"""Model weight files: an ``.npz`` container holding named tensors plus a JSON metadata entry."""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
import torch

from .model import FEATURE_LAYOUT_VERSION, AttentionModel, FeatureNorm, ModelConfig, config_dict

META_KEY = "__meta__"


class WeightFileError(ValueError):
    pass


def save_model(model: AttentionModel, path, extra: dict | None = None) -> None:
    meta = config_dict(model)
    meta["dtype"] = str(next(model.parameters()).dtype).replace("torch.", "")
    if extra:
        meta["extra"] = extra
    arrays = {name: t.detach().cpu().numpy() for name, t in model.state_dict().items()}
    arrays[META_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def read_meta(path) -> dict:
    with np.load(path) as data:
        return json.loads(bytes(data[META_KEY]).decode())


def load_model(path) -> AttentionModel:
    with np.load(path) as data:
        if META_KEY not in data:
            raise WeightFileError(f"{path}: missing metadata entry")
        meta = json.loads(bytes(data[META_KEY]).decode())
        if meta.get("feature_layout_version") != FEATURE_LAYOUT_VERSION:
            raise WeightFileError(f"{path}: feature layout {meta.get('feature_layout_version')} unsupported")
        model = AttentionModel(ModelConfig(**meta["config"]), FeatureNorm(**meta["norm"]))
        if meta.get("dtype") == "float64":
            model = model.double()
        expected = model.state_dict()
        tensors = {}
        for name, ref in expected.items():
            if name not in data:
                raise WeightFileError(f"{path}: tensor {name!r} missing")
            arr = data[name]
            if tuple(arr.shape) != tuple(ref.shape):
                raise WeightFileError(
                    f"{path}: tensor {name!r} has shape {tuple(arr.shape)}, expected {tuple(ref.shape)}"
                )
            tensors[name] = torch.from_numpy(arr.copy())
        extra = set(data.files) - set(expected) - {META_KEY}
        if extra:
            raise WeightFileError(f"{path}: unexpected tensors {sorted(extra)}")
    model.load_state_dict(tensors)
    model.eval()
    return model
