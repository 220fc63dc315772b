"""
Reader for IDX files (the MNIST container format).

Images:  magic 0x00000803, count, rows, cols (big-endian uint32), then
         count * rows * cols unsigned pixel bytes.
Labels:  magic 0x00000801, count, then count unsigned label bytes.

Gzip-compressed files are detected by their magic bytes.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path
from typing import Union

import numpy as np

from divens.dataio.dataset import Dataset
from divens.errors import IdxFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"


def _read_bytes(path: Union[str, Path]) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == GZIP_MAGIC:
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise IdxFormatError(f"{path}: corrupt gzip stream ({exc})", path=str(path)) from None
    return raw


def _header(raw: bytes, path, magic: int, words: int) -> tuple[int, ...]:
    size = 4 * words
    if len(raw) < size:
        raise IdxFormatError(
            f"{path}: truncated header at byte offset {len(raw)}", path=str(path), offset=len(raw)
        )
    fields = struct.unpack(f">{words}I", raw[:size])
    if fields[0] != magic:
        raise IdxFormatError(
            f"{path}: bad magic number, expected {magic:#010x} found {fields[0]:#010x}",
            path=str(path),
            expected=magic,
            found=fields[0],
        )
    return fields[1:]


def _payload(raw: bytes, path, start: int, count: int) -> np.ndarray:
    end = start + count
    if len(raw) < end:
        raise IdxFormatError(
            f"{path}: truncated at byte offset {len(raw)}, expected {end} bytes",
            path=str(path),
            offset=len(raw),
            expected=end,
        )
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=start)


def read_idx_images(path: Union[str, Path]) -> np.ndarray:
    """Pixel bytes as an ``(n, rows * cols)`` uint8 array."""
    raw = _read_bytes(path)
    count, rows, cols = _header(raw, path, IMAGE_MAGIC, 4)
    pixels = _payload(raw, path, 16, count * rows * cols)
    return pixels.reshape(count, rows * cols)


def read_idx_labels(path: Union[str, Path]) -> np.ndarray:
    raw = _read_bytes(path)
    (count,) = _header(raw, path, LABEL_MAGIC, 2)
    return _payload(raw, path, 8, count)


def load_idx(
    images_path: Union[str, Path],
    labels_path: Union[str, Path],
    *,
    num_classes: int = 10,
    name: str = "mnist",
    split: str = "train",
) -> Dataset:
    """Pair an image file with its label file; pixels are scaled by 1/255."""
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(pixels) != len(labels):
        raise IdxFormatError(
            f"image count {len(pixels)} does not match label count {len(labels)}",
            expected=len(pixels),
            found=len(labels),
        )
    if labels.size and int(labels.max()) >= num_classes:
        raise IdxFormatError(
            f"label {int(labels.max())} out of range for {num_classes} classes",
            found=int(labels.max()),
        )
    return Dataset(
        features=pixels.astype(np.float64) / 255.0,
        labels=labels.astype(np.int64),
        num_classes=num_classes,
        name=name,
        split=split,
    )
