"""Paired-embedding datasets: EMBP persistence, synthetic generation, splits.

EMBP container layout (everything little-endian, no padding):

    magic   4 bytes   0x45 0x4D 0x42 0x50 ("EMBP")
    u16     version   (currently 1)
    u32     dim_img
    u32     dim_txt
    u64     count
    then `count` records, each:
        u64          id
        f32[dim_img] image embedding
        f32[dim_txt] text embedding

Embedding payloads are held in memory as float32 (the on-disk precision) so
that a write/read round trip is bit-exact; all numerical work elsewhere in
the toolkit upcasts to float64.

Randomness uses the Philox 4x64-10 counter-based bit generator
(``numpy.random.Philox``). The generator choice and the draw order below are
part of the format contract: a given seed must reproduce byte-identical
synthetic datasets anywhere. ``generate_synthetic`` draws, in order, the
mixing matrix, the raw image embeddings, and the text noise, all via
``Generator.standard_normal``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from embedfuse.errors import ConfigError, DataError, FormatError

__all__ = [
    "PairRecord",
    "PairedDataset",
    "SynthConfig",
    "write_pairs",
    "read_pairs",
    "generate_synthetic",
    "split_dataset",
]

MAGIC = b"EMBP"
VERSION = 1
_HEADER = struct.Struct("<4sHIIQ")  # magic, version, dim_img, dim_txt, count


@dataclass(frozen=True)
class PairRecord:
    """One corpus unit: an id plus an image embedding and a text embedding."""

    id: int
    image_embedding: np.ndarray
    text_embedding: np.ndarray


@dataclass(frozen=True)
class PairedDataset:
    """Ordered collection of pair records with fixed per-side dimensions.

    Order is significant (the dedup filter's greedy scan depends on it).
    Arrays are made read-only on construction; ids must be unique and all
    payload values finite.
    """

    ids: np.ndarray
    images: np.ndarray
    texts: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(self.ids, dtype="<u8")
        images = np.ascontiguousarray(self.images, dtype="<f4")
        texts = np.ascontiguousarray(self.texts, dtype="<f4")
        if ids.ndim != 1 or images.ndim != 2 or texts.ndim != 2:
            raise DataError(
                f"expected shapes (n,), (n, dim_img), (n, dim_txt); got "
                f"{ids.shape}, {images.shape}, {texts.shape}"
            )
        n = ids.shape[0]
        if images.shape[0] != n or texts.shape[0] != n:
            raise DataError("ids, images, and texts must have the same number of rows")
        if images.shape[1] < 1 or texts.shape[1] < 1:
            raise DataError("embedding dimensions must be at least 1")
        if not np.all(np.isfinite(images)) or not np.all(np.isfinite(texts)):
            raise DataError("embedding payload contains NaN or Inf")
        if np.unique(ids).shape[0] != n:
            raise DataError("duplicate record ids")
        for arr in (ids, images, texts):
            arr.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "texts", texts)

    @property
    def count(self) -> int:
        return int(self.ids.shape[0])

    @property
    def dim_img(self) -> int:
        return int(self.images.shape[1])

    @property
    def dim_txt(self) -> int:
        return int(self.texts.shape[1])

    def __len__(self) -> int:
        return self.count

    def record(self, i: int) -> PairRecord:
        return PairRecord(int(self.ids[i]), self.images[i], self.texts[i])

    def records(self) -> Iterator[PairRecord]:
        for i in range(self.count):
            yield self.record(i)

    def subset(self, indices) -> "PairedDataset":
        """New dataset holding the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.intp)
        return PairedDataset(self.ids[idx], self.images[idx], self.texts[idx])

    @classmethod
    def from_records(
        cls, records, dim_img: int, dim_txt: int
    ) -> "PairedDataset":
        """Build a dataset from PairRecords; dims must be given so that an
        empty record list still carries its dimensions."""
        ids = np.array([r.id for r in records], dtype="<u8")
        images = np.array(
            [r.image_embedding for r in records], dtype="<f4"
        ).reshape(len(ids), dim_img)
        texts = np.array(
            [r.text_embedding for r in records], dtype="<f4"
        ).reshape(len(ids), dim_txt)
        return cls(ids, images, texts)


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the deterministic synthetic pair generator."""

    count: int
    dim_img: int
    dim_txt: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if self.dim_img < 1 or self.dim_txt < 1:
            raise ConfigError("dim_img and dim_txt must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


def _record_dtype(dim_img: int, dim_txt: int) -> np.dtype:
    return np.dtype(
        [("id", "<u8"), ("img", "<f4", (dim_img,)), ("txt", "<f4", (dim_txt,))]
    )


def write_pairs(dataset: PairedDataset, destination) -> int:
    """Write a dataset as EMBP to a path or binary file object.

    Returns the number of bytes written. read_pairs reproduces the dataset
    bit-exactly.
    """
    header = _HEADER.pack(MAGIC, VERSION, dataset.dim_img, dataset.dim_txt, dataset.count)
    body = np.empty(dataset.count, dtype=_record_dtype(dataset.dim_img, dataset.dim_txt))
    body["id"] = dataset.ids
    body["img"] = dataset.images
    body["txt"] = dataset.texts
    payload = header + body.tobytes()
    if hasattr(destination, "write"):
        destination.write(payload)
    else:
        Path(destination).write_bytes(payload)
    return len(payload)


def read_pairs(source) -> PairedDataset:
    """Parse an EMBP byte stream from a path or binary file object.

    Validates magic, version, byte count, payload finiteness, and id
    uniqueness; raises FormatError or DataError accordingly.
    """
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(
            f"truncated header: expected at least {_HEADER.size} bytes, got {len(raw)}"
        )
    magic, version, dim_img, dim_txt, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")
    if dim_img < 1 or dim_txt < 1:
        raise FormatError(f"invalid dims {dim_img}x{dim_txt} in header")
    rec_dtype = _record_dtype(dim_img, dim_txt)
    expected = _HEADER.size + count * rec_dtype.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"byte count mismatch for {count} records: expected {expected} bytes, got {len(raw)}"
        )
    body = np.frombuffer(raw, dtype=rec_dtype, count=count, offset=_HEADER.size)
    return PairedDataset(
        body["id"].copy(), body["img"].copy(), body["txt"].copy()
    )


def generate_synthetic(config: SynthConfig) -> tuple[PairedDataset, np.ndarray]:
    """Deterministic synthetic corpus plus its ground-truth mixing matrix.

    Image embeddings are uniform on the unit sphere; each text embedding is
    the L2-normalized image of its image embedding under a fixed random
    linear map, plus Gaussian noise scaled by ``noise_sigma``. Ids run
    0..count-1. The returned matrix has shape (dim_txt, dim_img) in float64.
    """
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    mix = rng.standard_normal((config.dim_txt, config.dim_img))
    imgs = rng.standard_normal((config.count, config.dim_img))
    imgs /= np.linalg.norm(imgs, axis=1, keepdims=True)
    noise = rng.standard_normal((config.count, config.dim_txt))
    txts = imgs @ mix.T + config.noise_sigma * noise
    txts /= np.linalg.norm(txts, axis=1, keepdims=True)
    ids = np.arange(config.count, dtype="<u8")
    dataset = PairedDataset(ids, imgs.astype("<f4"), txts.astype("<f4"))
    return dataset, mix


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_dataset(
    dataset: PairedDataset, fractions: tuple[float, float, float], seed: int
) -> tuple[PairedDataset, PairedDataset, PairedDataset]:
    """Shuffle deterministically by seed and partition into train/val/test.

    Val and test sizes are round(count * fraction); any remainder lands in
    train. Splits keep the shuffled order. Fractions must be positive and
    sum to 1 within 1e-9.
    """
    if len(fractions) != 3:
        raise ConfigError("fractions must be a (train, val, test) triple")
    f_train, f_val, f_test = (float(f) for f in fractions)
    if f_train <= 0 or f_val <= 0 or f_test <= 0:
        raise ConfigError("every split fraction must be > 0")
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    perm = rng.permutation(dataset.count)
    n_val = _round_half_up(dataset.count * f_val)
    n_test = _round_half_up(dataset.count * f_test)
    n_train = dataset.count - n_val - n_test
    train = dataset.subset(perm[:n_train])
    val = dataset.subset(perm[n_train : n_train + n_val])
    test = dataset.subset(perm[n_train + n_val :])
    return train, val, test
