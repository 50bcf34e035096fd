"""Versioned binary checkpoints for trained critics.

Layout (all integers little-endian):

    bytes 0..7    magic b"BNDNET01"
    bytes 8..11   uint32 header length L
    bytes 12..    UTF-8 JSON header of length L describing the encoding
                  and layer dimensions
    remainder     the parameter arrays in ``BoundNetwork.parameters()``
                  order, raw little-endian float64

Loads are bit-exact round trips of saves.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .critic import BoundNetwork, TaskEncoding
from .mlp import Mlp

MAGIC = b"BNDNET01"


def _layer_dims(net: Mlp) -> list[int]:
    return [net.in_dim] + [w.shape[1] for w in net.weights]


def save_network(net: BoundNetwork, path: str | Path) -> None:
    header = {
        "task": net.enc.task,
        "n_arms": net.enc.n_arms,
        "n_trials": net.enc.n_trials,
        "n_blocks": net.enc.n_blocks,
        "n_models": net.enc.n_models,
        "model": net.enc.model,
        "sub_dims": [_layer_dims(s) for s in net.sub_nets],
        "head_dims": _layer_dims(net.head),
        "activation": "relu-hidden/identity-out",
        "dtype": "<f8",
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for p in net.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_network(path: str | Path) -> BoundNetwork:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a critic checkpoint (magic {magic!r})")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()

    enc = TaskEncoding(
        task=header["task"],
        n_arms=header["n_arms"],
        n_trials=header["n_trials"],
        n_blocks=header["n_blocks"],
        n_models=header["n_models"],
        model=header["model"],
    )

    offset = 0

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.reshape(shape).copy()

    def read_mlp(dims: list[int]) -> Mlp:
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            weights.append(take((fan_in, fan_out)))
            biases.append(take((fan_out,)))
        return Mlp(weights=weights, biases=biases)

    sub_nets = [read_mlp(dims) for dims in header["sub_dims"]]
    head = read_mlp(header["head_dims"])
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing bytes")
    return BoundNetwork(enc=enc, sub_nets=sub_nets, head=head)
