"""Binary model files.

Layout (all integers little-endian):

    magic   "TNAD"              4 bytes
    version u32                 currently 1
    kind    u8                  0 = MPS, 1 = TTN
    L       u32                 number of (real) features
    N       u32                 physical dimension
    padding u32                 appended dummy features (TTN only, else 0)
    rescaler                    L x (min f64, max f64)
    topology                    MPS: L+1 bond extents (u32, includes the 1s)
                                TTN: node count u32, then per node
                                     parent i32 (-1 root) and parent-bond u32
    cores                       row-major f64 in topology order
    crc32   u32                 of everything above

Models are written canonicalized to a fixed convention (site 0 for MPS,
right-most leaf for TTN) so the center never needs to be stored; scoring
uses exactly the training-time rescaler embedded in the file.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .encoding import FeatureRescaler, LegendreFeatureMap
from .errors import DataError
from .mps import MpsModel
from .ttn import TtnModel

__all__ = ["save_model", "load_model", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"TNAD"
FORMAT_VERSION = 1
_KIND_MPS = 0
_KIND_TTN = 1


def save_model(path, model) -> None:
    """Serialize a trained model (with its fitted feature map) to ``path``."""
    if model.encoder is None or model.encoder.rescaler is None:
        raise DataError("model has no fitted feature map attached; cannot serialize")
    rescaler = model.encoder.rescaler

    if isinstance(model, MpsModel):
        kind, n_features = _KIND_MPS, model.n_sites
        padding = 0
        work = model.copy()
        work.canonicalize(0)
        cores = work.cores
    elif isinstance(model, TtnModel):
        kind, n_features = _KIND_TTN, model.n_features
        padding = model.padding
        work = model.copy()
        work.canonicalize(work.leaf_ids()[-1])
        cores = work.tensors
    else:
        raise DataError(f"unsupported model type {type(model).__name__}")

    if rescaler.n_features != n_features:
        raise DataError(
            f"rescaler covers {rescaler.n_features} features, model has {n_features}"
        )

    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IBIII", FORMAT_VERSION, kind, n_features, model.phys_dim, padding)
    for i in range(n_features):
        blob += struct.pack("<dd", rescaler.minimum[i], rescaler.maximum[i])

    if kind == _KIND_MPS:
        bonds = [1] + [c.shape[2] for c in cores]
        blob += struct.pack(f"<{len(bonds)}I", *bonds)
    else:
        blob += struct.pack("<I", work.n_nodes)
        for u in range(work.n_nodes):
            parent_bond = cores[u].shape[0] if work.parents[u] >= 0 else 0
            blob += struct.pack("<iI", work.parents[u], parent_bond)

    for core in cores:
        blob += np.ascontiguousarray(core, dtype="<f8").tobytes()

    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_model(path):
    """Load a model file; returns an :class:`MpsModel` or :class:`TtnModel`.

    The returned model carries a :class:`LegendreFeatureMap` built from the
    embedded rescaler, so it can score raw samples directly.
    """
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4:
        raise DataError(f"{path}: truncated model file")
    if raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: bad magic, not a model file")
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise DataError(f"{path}: checksum mismatch, file is corrupt")

    offset = len(MAGIC)
    version, kind, n_features, phys_dim, padding = struct.unpack_from("<IBIII", raw, offset)
    offset += struct.calcsize("<IBIII")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")

    minimum = np.empty(n_features)
    maximum = np.empty(n_features)
    for i in range(n_features):
        minimum[i], maximum[i] = struct.unpack_from("<dd", raw, offset)
        offset += 16
    encoder = LegendreFeatureMap(
        n_functions=phys_dim, rescaler=FeatureRescaler(minimum=minimum, maximum=maximum)
    )

    if kind == _KIND_MPS:
        bonds = struct.unpack_from(f"<{n_features + 1}I", raw, offset)
        offset += 4 * (n_features + 1)
        cores = []
        for i in range(n_features):
            shape = (bonds[i], phys_dim, bonds[i + 1])
            cores.append(_read_tensor(raw, offset, shape, path))
            offset += 8 * int(np.prod(shape))
        _expect_end(raw, offset, path)
        return MpsModel(cores, center=0, encoder=encoder)

    if kind == _KIND_TTN:
        (n_nodes,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        parents, parent_bond = [], []
        for _ in range(n_nodes):
            p, b = struct.unpack_from("<iI", raw, offset)
            offset += 8
            parents.append(p)
            parent_bond.append(b)
        children: list = [None] * n_nodes
        for u in range(n_nodes):
            if parents[u] >= 0:
                p = parents[u]
                children[p] = (children[p] or ()) + (u,)
        children = [tuple(c) if c else None for c in children]
        for u, c in enumerate(children):
            if c is not None and len(c) != 2:
                raise DataError(f"{path}: node {u} has {len(c)} children, expected 2")

        leaf_features: list = [None] * n_nodes
        leaf_ids = [u for u in range(n_nodes) if children[u] is None]
        for k, u in enumerate(leaf_ids):
            leaf_features[u] = (2 * k, 2 * k + 1)
        if 2 * len(leaf_ids) != n_features + padding:
            raise DataError(f"{path}: leaf count inconsistent with feature count")

        tensors = []
        for u in range(n_nodes):
            if children[u] is None:
                shape = (parent_bond[u] if parents[u] >= 0 else 1, phys_dim, phys_dim)
            elif parents[u] < 0:
                shape = (parent_bond[children[u][0]], parent_bond[children[u][1]])
            else:
                shape = (parent_bond[u], parent_bond[children[u][0]], parent_bond[children[u][1]])
            tensors.append(_read_tensor(raw, offset, shape, path))
            offset += 8 * int(np.prod(shape))
        _expect_end(raw, offset, path)
        return TtnModel(
            tensors, parents, children, leaf_features, n_features, padding,
            center=leaf_ids[-1], encoder=encoder,
        )

    raise DataError(f"{path}: unknown model kind {kind}")


def _read_tensor(raw: bytes, offset: int, shape: tuple, path) -> np.ndarray:
    n_bytes = 8 * int(np.prod(shape))
    if offset + n_bytes > len(raw) - 4:
        raise DataError(f"{path}: file too short for tensor of shape {shape}")
    flat = np.frombuffer(raw, dtype="<f8", count=int(np.prod(shape)), offset=offset)
    return flat.reshape(shape).astype(np.float64)


def _expect_end(raw: bytes, offset: int, path) -> None:
    if offset != len(raw) - 4:
        raise DataError(f"{path}: {len(raw) - 4 - offset} unexpected trailing bytes")
