"""Feature-file container for precomputed datasets.

A feature file starts with one ASCII header line

    EVIPFEAT v1 N P d_v d_t

followed by fixed-size little-endian records, one per sample: (P+1)*d_v
float32 visual values (cls token first, then patches row-major), then N
label bytes in {0, 1}. Text tokens live once in a companion file holding
N*d_t raw little-endian float32 values, since they are shared by every
sample. A JSON manifest ties the pieces together and carries what the
binary rows cannot: the task schema and the per-sample noise bookkeeping
(which samples were occluded and where, which label bits were flipped).

Labels inside the feature file are the ones a trainer is allowed to see,
i.e. post-flip for the train split. Clean labels are reconstructed from
the manifest's flip records on load, so evaluation never needs a second
file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .synth import Dataset, Split, TaskSpec, task_spec_from_dict, task_spec_to_dict

HEADER_MAGIC = "EVIPFEAT"
HEADER_VERSION = "v1"

MANIFEST_NAME = "manifest.json"
TEXT_NAME = "text.tokens"
SPLIT_NAMES = ("train", "val", "test")


def _record_dtype(n_attrs: int, n_patches: int, d_v: int) -> np.dtype:
    return np.dtype([("visual", "<f4", (n_patches + 1, d_v)),
                     ("labels", "u1", (n_attrs,))])


def write_feature_file(path: str | Path, visual: np.ndarray, labels: np.ndarray,
                       d_t: int) -> None:
    """visual: (S, P+1, d_v); labels: (S, N) in {0, 1}."""
    visual = np.asarray(visual)
    labels = np.asarray(labels)
    if visual.ndim != 3 or labels.ndim != 2 or visual.shape[0] != labels.shape[0]:
        raise DataError(
            f"expected (S, P+1, d_v) visual and (S, N) labels, got "
            f"{visual.shape} and {labels.shape}")
    count, tokens, d_v = visual.shape
    n_attrs = labels.shape[1]
    rec = _record_dtype(n_attrs, tokens - 1, d_v)
    rows = np.zeros(count, dtype=rec)
    rows["visual"] = visual.astype("<f4")
    rows["labels"] = labels.astype("u1")
    header = f"{HEADER_MAGIC} {HEADER_VERSION} {n_attrs} {tokens - 1} {d_v} {d_t}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(rows.tobytes())


def read_feature_file(path: str | Path):
    """Returns (visual (S, P+1, d_v) float64, labels (S, N) uint8, dims).

    dims is the header tuple (N, P, d_v, d_t).
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read feature file {path}: {e}") from e
    newline = blob.find(b"\n")
    if newline < 0:
        raise DataError(f"{path}: no header line")
    try:
        fields = blob[:newline].decode("ascii").split()
    except UnicodeDecodeError:
        raise DataError(f"{path}: header is not ASCII")
    if len(fields) != 6 or fields[0] != HEADER_MAGIC:
        raise DataError(f"{path}: malformed header {blob[:newline]!r}")
    if fields[1] != HEADER_VERSION:
        raise DataError(f"{path}: unsupported version {fields[1]!r}")
    try:
        n_attrs, n_patches, d_v, d_t = (int(f) for f in fields[2:])
    except ValueError:
        raise DataError(f"{path}: non-integer header dims {fields[2:]}")
    if min(n_attrs, n_patches, d_v, d_t) <= 0:
        raise DataError(f"{path}: header dims must be positive, got {fields[2:]}")
    payload = blob[newline + 1:]
    rec = _record_dtype(n_attrs, n_patches, d_v)
    if len(payload) % rec.itemsize != 0:
        raise DataError(
            f"{path}: payload of {len(payload)} bytes is not a whole number "
            f"of {rec.itemsize}-byte records")
    rows = np.frombuffer(payload, dtype=rec)
    labels = np.ascontiguousarray(rows["labels"])
    if not np.isin(labels, (0, 1)).all():
        raise DataError(f"{path}: labels must be 0 or 1")
    visual = rows["visual"].astype(np.float64)
    return visual, labels, (n_attrs, n_patches, d_v, d_t)


def write_text_file(path: str | Path, text_tokens: np.ndarray) -> None:
    np.asarray(text_tokens).astype("<f4").tofile(path)


def read_text_file(path: str | Path, n_attrs: int, d_t: int) -> np.ndarray:
    try:
        flat = np.fromfile(path, dtype="<f4")
    except OSError as e:
        raise DataError(f"cannot read text tokens {path}: {e}") from e
    if flat.size != n_attrs * d_t:
        raise DataError(
            f"{path}: expected {n_attrs}*{d_t} floats, found {flat.size}")
    return flat.reshape(n_attrs, d_t).astype(np.float64)


def save_dataset(dataset: Dataset, directory: str | Path) -> Path:
    """Write feature files, text companion, and the manifest. Returns the
    manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec = dataset.spec
    manifest: dict = {
        "format": f"{HEADER_MAGIC} {HEADER_VERSION}",
        "task": task_spec_to_dict(spec),
        "text_file": TEXT_NAME,
        "splits": {},
    }
    write_text_file(directory / TEXT_NAME, dataset.text_tokens)
    for name in SPLIT_NAMES:
        split = dataset.splits[name]
        filename = f"{name}.feat"
        write_feature_file(directory / filename, split.visual, split.labels,
                           spec.d_t)
        occluded = [[int(i), split.occluded_region[i]]
                    for i in np.nonzero(split.occluded)[0]]
        flipped = [[i, list(attrs)] for i, attrs in enumerate(split.flipped)
                   if attrs]
        manifest["splits"][name] = {
            "file": filename,
            "count": len(split),
            "occluded": occluded,
            "flipped": flipped,
        }
    manifest_path = directory / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def load_dataset(directory: str | Path) -> Dataset:
    """Rebuild a Dataset from disk; clean labels come from the manifest's
    flip records. Prototype vectors are not stored, so that field is empty."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as e:
        raise DataError(f"cannot read manifest {manifest_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DataError(f"manifest {manifest_path} is not valid JSON: {e}") from e
    for key in ("format", "task", "text_file", "splits"):
        if key not in manifest:
            raise DataError(f"manifest {manifest_path} is missing {key!r}")
    if manifest["format"] != f"{HEADER_MAGIC} {HEADER_VERSION}":
        raise DataError(f"unsupported dataset format {manifest['format']!r}")
    try:
        spec = task_spec_from_dict(manifest["task"])
    except Exception as e:
        raise DataError(f"manifest task schema is invalid: {e}") from e

    text_tokens = read_text_file(directory / manifest["text_file"],
                                 spec.n_attrs, spec.d_t)
    splits: dict[str, Split] = {}
    for name in SPLIT_NAMES:
        if name not in manifest["splits"]:
            raise DataError(f"manifest lists no {name!r} split")
        entry = manifest["splits"][name]
        visual, labels, dims = read_feature_file(directory / entry["file"])
        if dims != (spec.n_attrs, spec.n_patches, spec.d_v, spec.d_t):
            raise DataError(
                f"{entry['file']}: header dims {dims} do not match the "
                f"manifest task ({spec.n_attrs}, {spec.n_patches}, "
                f"{spec.d_v}, {spec.d_t})")
        count = visual.shape[0]
        if count != entry["count"]:
            raise DataError(
                f"{entry['file']}: {count} records but manifest says "
                f"{entry['count']}")
        occluded = np.zeros(count, dtype=bool)
        occluded_region: list = [None] * count
        for idx, region in entry["occluded"]:
            if not 0 <= idx < count:
                raise DataError(f"manifest occlusion index {idx} out of range")
            occluded[idx] = True
            occluded_region[idx] = region
        flipped: list = [()] * count
        clean = labels.copy()
        for idx, attrs in entry["flipped"]:
            if not 0 <= idx < count:
                raise DataError(f"manifest flip index {idx} out of range")
            for a in attrs:
                if not 0 <= a < spec.n_attrs:
                    raise DataError(f"manifest flip attribute {a} out of range")
                clean[idx, a] = 1 - clean[idx, a]
            flipped[idx] = tuple(attrs)
        splits[name] = Split(visual=visual, labels=labels, labels_clean=clean,
                             occluded=occluded, occluded_region=occluded_region,
                             flipped=flipped)
    return Dataset(spec=spec, text_tokens=text_tokens,
                   prototypes=np.zeros((spec.n_attrs, spec.d_v)), splits=splits)
