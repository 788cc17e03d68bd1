"""Checkpoint persistence: configuration plus named parameter tensors.

Built on the archive container (docs/checkpoint_format.md): a text
header carrying the format version, the full model configuration, and an
ordered tensor manifest, followed by flat little-endian float64
payloads.  Save then load reproduces every parameter bit-exactly.
"""

import numpy as np

from . import container
from .config import RunConfig
from .data import MinMaxScaler
from .exceptions import DataError
from .model import FuzzformerModel

CHECKPOINT_FORMAT = 1


def save_checkpoint(path, model: FuzzformerModel, scaler=None, channel_names=None) -> None:
    meta = {
        "kind": "checkpoint",
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "channel_names": list(channel_names) if channel_names else [],
        "main_channel": 0,
    }
    arrays = [(name, tensor.data) for name, tensor in model.parameters()]
    if scaler is not None:
        arrays.append(("scaler.mins", scaler.mins))
        arrays.append(("scaler.maxs", scaler.maxs))
    container.write_archive(path, meta, arrays)


def load_checkpoint(path):
    """Returns (model, scaler or None, meta)."""
    meta, arrays = container.read_archive(path)
    if meta.get("kind") != "checkpoint":
        raise DataError(f"{path}: not a checkpoint archive (kind={meta.get('kind')!r})")
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
    config = RunConfig.from_dict(meta["config"])
    model = FuzzformerModel(config, np.random.default_rng(0))
    for name, tensor in model.parameters():
        if name not in arrays:
            raise DataError(f"{path}: checkpoint is missing tensor {name!r}")
        if arrays[name].shape != tensor.data.shape:
            raise DataError(
                f"{path}: tensor {name!r} has shape {arrays[name].shape}, "
                f"expected {tensor.data.shape}"
            )
        tensor.data[...] = arrays[name]
    scaler = None
    if "scaler.mins" in arrays:
        scaler = MinMaxScaler(arrays["scaler.mins"], arrays["scaler.maxs"])
    return model, scaler, meta
