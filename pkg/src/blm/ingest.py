"""Weight-tensor ingestion: NPY/raw/CSV parsing, manifests, exclusion rules.

A manifest names the tensors of a model and which of them to skip (bias and
normalization parameters are constant-initialized and excluded by default).
Everything downstream consumes flat float64 value streams.
"""
from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .benford import DigitHistogram, MlhScore, digit_histogram, jsd_benford, mlh
from .errors import EmptyInputError, IngestError, ManifestError, NpyFormatError

NPY_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCRS = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}
_FORMATS = ("npy", "raw-f32", "raw-f64", "csv")
DEFAULT_EXCLUDE_PATTERNS = ("bias", "bn", "norm")

# values per chunk when streaming raw files
_CHUNK = 1 << 20


def parse_npy(data: bytes) -> np.ndarray:
    """Parse an NPY v1.0 buffer holding a little-endian float tensor.

    Only ``<f4``/``<f8`` dtypes in C order are accepted; anything else is a
    format error, as is a payload whose length disagrees with the header.
    """
    if len(data) < 10 or data[:6] != NPY_MAGIC:
        raise NpyFormatError("bad magic: not an NPY file")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise NpyFormatError(f"unsupported NPY version {major}.{minor}")
    (header_len,) = struct.unpack("<H", data[8:10])
    if len(data) < 10 + header_len:
        raise NpyFormatError("truncated header")
    try:
        header = ast.literal_eval(data[10:10 + header_len].decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise NpyFormatError(f"unparseable header: {exc}") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise NpyFormatError("header must be a dict with descr/fortran_order/shape")
    descr = header["descr"]
    if descr not in _SUPPORTED_DESCRS:
        raise NpyFormatError(f"unsupported dtype {descr!r} (need <f4 or <f8)")
    if header["fortran_order"] is not False:
        raise NpyFormatError("fortran_order arrays are not supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(
        isinstance(s, int) and s >= 0 for s in shape
    ):
        raise NpyFormatError(f"invalid shape {shape!r}")
    dtype = _SUPPORTED_DESCRS[descr]
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = data[10 + header_len:]
    if len(payload) != count * dtype.itemsize:
        raise NpyFormatError(
            f"payload is {len(payload)} bytes, expected {count * dtype.itemsize}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape)


def write_npy(path: Union[str, Path], array: np.ndarray) -> None:
    """Write an NPY v1.0 file (little-endian float32/float64, C order)."""
    array = np.ascontiguousarray(array)
    if array.dtype not in (np.float32, np.float64):
        raise ValueError("only float32/float64 arrays are written")
    descr = "<f4" if array.dtype == np.float32 else "<f8"
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {array.shape}, }}"
    # pad with spaces so magic+version+len+header is 64-byte aligned, end with \n
    unpadded = len(NPY_MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(NPY_MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("ascii"))
        fh.write(array.tobytes())


@dataclass(frozen=True)
class TensorSource:
    name: str
    path: str
    format: str
    shape: Optional[tuple[int, ...]] = None
    exclude: bool = False

    def __post_init__(self) -> None:
        if self.format not in _FORMATS:
            raise ManifestError(f"unknown format {self.format!r} for {self.name!r}")
        if self.format.startswith("raw") and self.shape is None:
            raise ManifestError(f"raw tensor {self.name!r} needs an explicit shape")


@dataclass(frozen=True)
class ModelManifest:
    model_name: str
    tensors: tuple[TensorSource, ...]
    exclude_patterns: tuple[str, ...] = DEFAULT_EXCLUDE_PATTERNS

    def __post_init__(self) -> None:
        names = [t.name for t in self.tensors]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ManifestError(f"duplicate tensor names: {dupes}")

    def is_excluded(self, tensor: TensorSource) -> bool:
        if tensor.exclude:
            return True
        lname = tensor.name.lower()
        return any(pat.lower() in lname for pat in self.exclude_patterns)

    def included(self) -> list[TensorSource]:
        return [t for t in self.tensors if not self.is_excluded(t)]


def load_manifest(text: str) -> ModelManifest:
    """Parse and validate manifest JSON. Files are not opened here."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ManifestError("manifest must be a JSON object")
    if not isinstance(obj.get("model_name"), str):
        raise ManifestError("manifest needs a string 'model_name'")
    raw_tensors = obj.get("tensors")
    if not isinstance(raw_tensors, list) or not raw_tensors:
        raise ManifestError("manifest needs a non-empty 'tensors' list")
    patterns = obj.get("exclude_patterns", list(DEFAULT_EXCLUDE_PATTERNS))
    if not isinstance(patterns, list) or not all(isinstance(p, str) for p in patterns):
        raise ManifestError("'exclude_patterns' must be a list of strings")
    tensors = []
    for entry in raw_tensors:
        if not isinstance(entry, dict):
            raise ManifestError("each tensor entry must be an object")
        unknown = set(entry) - {"name", "path", "format", "shape", "exclude"}
        if unknown:
            raise ManifestError(f"unknown tensor keys: {sorted(unknown)}")
        for key in ("name", "path", "format"):
            if not isinstance(entry.get(key), str):
                raise ManifestError(f"tensor entry needs a string {key!r}")
        shape = entry.get("shape")
        if shape is not None:
            if not isinstance(shape, list) or not all(
                isinstance(s, int) and s >= 0 for s in shape
            ):
                raise ManifestError(f"invalid shape for {entry['name']!r}")
            shape = tuple(shape)
        exclude = entry.get("exclude", False)
        if not isinstance(exclude, bool):
            raise ManifestError(f"'exclude' must be boolean for {entry['name']!r}")
        tensors.append(
            TensorSource(entry["name"], entry["path"], entry["format"], shape, exclude)
        )
    return ModelManifest(obj["model_name"], tuple(tensors), tuple(patterns))


@dataclass(frozen=True)
class LayerReport:
    name: str
    n_values: int
    histogram: DigitHistogram
    mlh: float
    jsd: float


def _resolve(path: str, base_dir: Optional[Union[str, Path]]) -> Path:
    p = Path(path)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


def _iter_values(tensor: TensorSource,
                 base_dir: Optional[Union[str, Path]]) -> Iterator[np.ndarray]:
    """Yield flat float chunks of a tensor's values."""
    path = _resolve(tensor.path, base_dir)
    try:
        if tensor.format == "npy":
            yield parse_npy(path.read_bytes()).ravel()
        elif tensor.format == "csv":
            yield np.loadtxt(path, delimiter=",", dtype=np.float64).ravel()
        else:
            dtype = np.dtype("<f4") if tensor.format == "raw-f32" else np.dtype("<f8")
            expected = int(np.prod(tensor.shape, dtype=np.int64))
            if path.stat().st_size != expected * dtype.itemsize:
                raise IngestError(
                    f"{tensor.name}: raw file size does not match shape {tensor.shape}"
                )
            with open(path, "rb") as fh:
                remaining = expected
                while remaining > 0:
                    chunk = np.fromfile(fh, dtype=dtype, count=min(_CHUNK, remaining))
                    if chunk.size == 0:
                        raise IngestError(f"{tensor.name}: unexpected end of file")
                    remaining -= chunk.size
                    yield chunk
    except IngestError:
        raise
    except (OSError, ValueError, NpyFormatError) as exc:
        raise IngestError(f"{tensor.name}: {exc}") from exc


def tensor_histogram(tensor: TensorSource,
                     base_dir: Optional[Union[str, Path]] = None,
                     base: int = 10) -> DigitHistogram:
    hist = DigitHistogram(base, np.zeros(base, dtype=np.int64), 0)
    for chunk in _iter_values(tensor, base_dir):
        hist = hist.merge(digit_histogram(chunk, base))
    return hist


def model_histogram(manifest: ModelManifest,
                    base_dir: Optional[Union[str, Path]] = None,
                    base: int = 10) -> DigitHistogram:
    included = manifest.included()
    if not included:
        raise EmptyInputError("manifest has no included tensors")
    hist = DigitHistogram(base, np.zeros(base, dtype=np.int64), 0)
    for tensor in included:
        hist = hist.merge(tensor_histogram(tensor, base_dir, base))
    return hist


def model_mlh(manifest: ModelManifest,
              base_dir: Optional[Union[str, Path]] = None,
              base: int = 10) -> tuple[MlhScore, DigitHistogram]:
    """MLH over the concatenation of all included tensors' values."""
    hist = model_histogram(manifest, base_dir, base)
    if hist.total == 0:
        raise EmptyInputError("no usable values after exclusion")
    return mlh(hist), hist


def layerwise_report(manifest: ModelManifest,
                     base_dir: Optional[Union[str, Path]] = None,
                     base: int = 10) -> list[LayerReport]:
    """One report per included tensor, in manifest order."""
    included = manifest.included()
    if not included:
        raise EmptyInputError("manifest has no included tensors")
    reports = []
    for tensor in included:
        hist = tensor_histogram(tensor, base_dir, base)
        try:
            score = mlh(hist).value
        except EmptyInputError as exc:
            raise IngestError(f"{tensor.name}: {exc}") from exc
        reports.append(
            LayerReport(
                name=tensor.name,
                n_values=hist.total,
                histogram=hist,
                mlh=score,
                jsd=jsd_benford(hist),
            )
        )
    return reports
