"""
Checkpoint Files

Binary checkpoint format: the magic string "JCKPT1", a manifest (entry
count; per entry the name length and bytes, the rank and the extents), then
raw little-endian 32-bit floats for every entry in manifest order.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from core_math.params import ParameterStore
from jointcast_core.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"JCKPT1"
_U32 = struct.Struct("<I")


def encode_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    """Serialize named arrays into checkpoint bytes."""
    header = [MAGIC, _U32.pack(len(arrays))]
    for name, value in arrays.items():
        encoded = name.encode("utf-8")
        header.append(_U32.pack(len(encoded)))
        header.append(encoded)
        header.append(_U32.pack(value.ndim))
        header.extend(_U32.pack(extent) for extent in value.shape)
    body = [np.ascontiguousarray(value, dtype="<f4").tobytes() for value in arrays.values()]
    return b"".join(header + body)


def decode_arrays(payload: bytes) -> dict[str, np.ndarray]:
    """
    Parse checkpoint bytes into named float32 arrays.

    Raises:
        CheckpointError: On a bad magic string or truncated payload
    """
    if not payload.startswith(MAGIC):
        raise CheckpointError("Not a jointcast checkpoint (bad magic)")
    offset = len(MAGIC)
    try:
        (count,) = _U32.unpack_from(payload, offset)
        offset += _U32.size
        manifest: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(count):
            (name_len,) = _U32.unpack_from(payload, offset)
            offset += _U32.size
            name = payload[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = _U32.unpack_from(payload, offset)
            offset += _U32.size
            shape = struct.unpack_from(f"<{rank}I", payload, offset)
            offset += _U32.size * rank
            manifest.append((name, tuple(shape)))

        arrays: dict[str, np.ndarray] = {}
        for name, shape in manifest:
            size = int(np.prod(shape)) if shape else 1
            nbytes = 4 * size
            if offset + nbytes > len(payload):
                raise CheckpointError("Checkpoint payload is truncated", entry=name)
            arrays[name] = np.frombuffer(payload, dtype="<f4", count=size, offset=offset).reshape(
                shape
            )
            offset += nbytes
    except struct.error as e:
        raise CheckpointError(f"Checkpoint manifest is truncated: {e}") from e
    return arrays


def save_checkpoint(store: ParameterStore, path: str | Path) -> Path:
    """
    Write the store (parameters and optimizer moments) to a checkpoint file.

    Args:
        store: Store to serialize
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_arrays(store.state_arrays()))
    logger.info(f"Saved checkpoint with {len(store)} parameters to {path}")
    return path


def load_checkpoint(store: ParameterStore, path: str | Path) -> None:
    """
    Restore a store from a checkpoint file.

    Raises:
        CheckpointError: If the file is unreadable or incompatible with the store
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint: {e}", path=str(path)) from e
    store.load_state_arrays(decode_arrays(payload))
