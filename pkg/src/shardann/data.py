"""Dataset container, fvecs/ivecs binary I/O, synthetic data, L2 distance.

File formats (little-endian throughout):

* fvecs: repeated records ``[int32 d][d x float32]``
* ivecs: repeated records ``[int32 d][d x int32]``

All records in one file must share the same ``d``.  Loading validates the
framing and reports the byte offset of the first malformed record.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .rng import TAG_GEN, stream


class DataFormatError(ValueError):
    """Malformed vector file or invalid dataset contents."""


@dataclass(frozen=True)
class Dataset:
    """An n x d batch of float32 vectors with global point ids.

    ``data`` is row-major and immutable after construction; ``ids`` defaults
    to the row index.  Query batches use the same container.
    """

    data: np.ndarray
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataFormatError(
                f"dataset must be a non-empty 2-D array, got shape {self.data.shape}"
            )
        if not np.isfinite(data).all():
            raise DataFormatError("dataset contains NaN or Inf values")
        ids = self.ids
        if ids is None:
            ids = np.arange(data.shape[0], dtype=np.int32)
        else:
            ids = np.ascontiguousarray(ids, dtype=np.int32)
            if ids.shape != (data.shape[0],):
                raise DataFormatError("ids must be one per row")
        data.flags.writeable = False
        ids.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def subset(self, rows: np.ndarray) -> "Dataset":
        """View of the selected rows, keeping their global ids."""
        return Dataset(self.data[rows], self.ids[rows])


def squared_l2(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance from every row of ``points`` to ``q``.

    This is the one distance primitive shared by the search kernel, the
    exact-kNN oracle, and the graph builders' rescoring passes, so ranking
    comparisons always happen on bit-identical float32 values.
    """
    diff = points - q
    np.square(diff, out=diff)
    return diff.sum(axis=-1)


def l2_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two vectors (float32 accumulation)."""
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(squared_l2(a[None, :], b)[0]))


# --- fvecs / ivecs ---

def _load_vecs(path, dtype: np.dtype) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        raise DataFormatError(f"{path}: empty file")
    if raw.size < 4:
        raise DataFormatError(f"{path}: truncated record at byte offset 0")
    d = int(raw[:4].view("<i4")[0])
    if d <= 0:
        raise DataFormatError(f"{path}: non-positive dimension {d} at byte offset 0")
    rec = 4 + 4 * d
    if raw.size % rec == 0:
        table = raw.view("<i4").reshape(-1, 1 + d)
        if (table[:, 0] == d).all():
            payload = np.ascontiguousarray(table[:, 1:])
            return payload.view(dtype).reshape(-1, d)
    # Slow path only to name the offending byte offset.
    offset = 0
    header = raw.view("<i4")
    while offset < raw.size:
        if raw.size - offset < 4:
            raise DataFormatError(f"{path}: truncated record at byte offset {offset}")
        di = int(header[offset // 4])
        if di != d:
            raise DataFormatError(
                f"{path}: inconsistent dimension {di} (expected {d}) at byte offset {offset}"
            )
        if raw.size - offset < 4 + 4 * di:
            raise DataFormatError(f"{path}: truncated record at byte offset {offset}")
        offset += 4 + 4 * di
    raise DataFormatError(f"{path}: malformed vector file")  # pragma: no cover


def load_fvecs(path) -> Dataset:
    """Load an fvecs file into a Dataset (ids = row index)."""
    return Dataset(_load_vecs(path, np.dtype("<f4")))


def load_ivecs(path) -> np.ndarray:
    """Load an ivecs file into an (n, d) int32 matrix."""
    return _load_vecs(path, np.dtype("<i4")).astype(np.int32, copy=False)


def _save_vecs(values: np.ndarray, path, dtype: np.dtype) -> None:
    values = np.ascontiguousarray(values, dtype=dtype)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise DataFormatError("cannot save an empty vector set (n >= 1, d >= 1 required)")
    n, d = values.shape
    out = np.empty((n, 1 + d), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = values.view("<i4")
    out.tofile(path)


def save_fvecs(dataset, path) -> None:
    """Write a Dataset (or float32 array) as fvecs, bit-exact round trip."""
    values = dataset.data if isinstance(dataset, Dataset) else np.asarray(dataset)
    _save_vecs(np.asarray(values, dtype=np.float32), path, np.dtype("<f4"))


def save_ivecs(values: np.ndarray, path) -> None:
    """Write an (n, d) int matrix as ivecs, bit-exact round trip."""
    _save_vecs(np.asarray(values, dtype=np.int32), path, np.dtype("<i4"))


# --- synthetic data ---

def gen_synthetic(n: int, d: int, n_clusters: int, spread: float, seed: int) -> Dataset:
    """Clustered Gaussian mixture: uniform centers in [0,1]^d, round-robin assignment.

    Point i = centers[i % n_clusters] + spread * N(0, I).  Deterministic for a
    fixed seed (splitmix64-derived PCG64 stream).
    """
    if n_clusters < 1 or n < n_clusters:
        raise ValueError(f"need n >= n_clusters >= 1, got n={n}, n_clusters={n_clusters}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not spread > 0:
        raise ValueError(f"spread must be > 0, got {spread}")
    rng = stream(seed, TAG_GEN)
    centers = rng.random((n_clusters, d), dtype=np.float32)
    noise = rng.standard_normal((n, d), dtype=np.float32)
    noise *= np.float32(spread)
    data = centers[np.arange(n) % n_clusters] + noise
    return Dataset(data)


def file_size_for(n: int, d: int) -> int:
    """Byte size of an fvecs/ivecs file holding n records of dimension d."""
    return n * (4 + 4 * d)
