"""Text file formats: label embeddings, instances, region files and checkpoints.

Label embeddings::

    <label_id>\\t<v1> <v2> ... <vD>

Single-label instances::

    <id>\\t<label>\\t<f1> ... <fF>

Multi-label region files; an image header followed by its regions::

    img\\t<id>\\t<label1>,<label2>\\t<f1> ... <fF>
    reg\\t<region_id>\\t<f1> ... <fF>

Blank lines are ignored everywhere. Loaders reject malformed input with the
offending line number rather than repairing it.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .embedding import Dataset, EmbeddingModel, Instance, LabelTable
from .mining import MultiLabelImage
from .trainer import TrainState

CHECKPOINT_MAGIC = "SEMEMBED"
CHECKPOINT_VERSION = "v1"


class DataFormatError(ValueError):
    """Malformed or inconsistent input file."""


def _numbers(text: str, path, lineno: int) -> np.ndarray:
    try:
        vals = np.array([float(tok) for tok in text.split()], dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if vals.size == 0:
        raise DataFormatError(f"{path}:{lineno}: no numeric values")
    if not np.all(np.isfinite(vals)):
        raise DataFormatError(f"{path}:{lineno}: non-finite value")
    return vals


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if line.strip():
                yield lineno, line


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def load_label_embeddings(path, *, strict: bool = False) -> LabelTable:
    ids, vecs = [], []
    seen = {}
    dim = None
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise DataFormatError(f"{path}:{lineno}: expected '<label>\\t<values>'")
        lid = parts[0]
        if lid in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate label {lid!r} "
                                  f"(first on line {seen[lid]})")
        vec = _numbers(parts[1], path, lineno)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DataFormatError(f"{path}:{lineno}: expected {dim} values, found {vec.size}")
        if not np.any(vec):
            raise DataFormatError(f"{path}:{lineno}: zero vector for label {lid!r}")
        seen[lid] = lineno
        ids.append(lid)
        vecs.append(vec)
    if not ids:
        raise DataFormatError(f"{path}: no label embeddings")
    try:
        return LabelTable(ids, np.vstack(vecs), strict=strict)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def save_label_embeddings(table: LabelTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lid, vec in zip(table.ids, table.vectors):
            fh.write(f"{lid}\t{_fmt(vec)}\n")


def _is_region_file(path) -> bool:
    for _, line in _lines(path):
        return line.split("\t", 1)[0] in ("img", "reg")
    return False


def load_dataset(path) -> Dataset:
    insts = []
    dim = None
    for lineno, line in _lines(path):
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0] or not parts[1]:
            raise DataFormatError(f"{path}:{lineno}: expected '<id>\\t<label>\\t<features>'")
        feats = _numbers(parts[2], path, lineno)
        if dim is None:
            dim = feats.size
        elif feats.size != dim:
            raise DataFormatError(f"{path}:{lineno}: expected {dim} features, found {feats.size}")
        insts.append(Instance(parts[0], feats, parts[1]))
    if not insts:
        raise DataFormatError(f"{path}: no instances")
    return Dataset(insts)


def load_multilabel_images(path) -> list:
    images = []
    current = None
    dim = None

    def check(feats, lineno):
        nonlocal dim
        if dim is None:
            dim = feats.size
        elif feats.size != dim:
            raise DataFormatError(f"{path}:{lineno}: expected {dim} features, found {feats.size}")

    for lineno, line in _lines(path):
        parts = line.split("\t")
        marker = parts[0]
        if marker == "img":
            if len(parts) != 4 or not parts[1]:
                raise DataFormatError(f"{path}:{lineno}: expected "
                                      "'img\\t<id>\\t<labels>\\t<features>'")
            labels = [lab for lab in parts[2].split(",") if lab]
            if not labels:
                raise DataFormatError(f"{path}:{lineno}: image {parts[1]!r} has no labels")
            feats = _numbers(parts[3], path, lineno)
            check(feats, lineno)
            current = {"id": parts[1], "labels": labels, "features": feats, "regions": []}
            images.append(current)
        elif marker == "reg":
            if current is None:
                raise DataFormatError(f"{path}:{lineno}: region line before any image header")
            if len(parts) != 3 or not parts[1]:
                raise DataFormatError(f"{path}:{lineno}: expected 'reg\\t<id>\\t<features>'")
            feats = _numbers(parts[2], path, lineno)
            check(feats, lineno)
            current["regions"].append((parts[1], feats))
        else:
            raise DataFormatError(f"{path}:{lineno}: unknown marker {marker!r}")
    if not images:
        raise DataFormatError(f"{path}: no images")
    return [MultiLabelImage(d["id"], d["features"], d["labels"], d["regions"]) for d in images]


def load_instances(path):
    """A :class:`Dataset`, or a list of :class:`MultiLabelImage` for region files."""
    if _is_region_file(path):
        return load_multilabel_images(path)
    return load_dataset(path)


def save_dataset(dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in dataset:
            fh.write(f"{inst.id}\t{inst.label}\t{_fmt(inst.features)}\n")


def save_multilabel_images(images, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for img in images:
            fh.write(f"img\t{img.id}\t{','.join(img.labels)}\t{_fmt(img.image_features)}\n")
            for rid, feats in img.regions:
                fh.write(f"reg\t{rid}\t{_fmt(feats)}\n")


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(state: TrainState, path) -> None:
    """Write weights, velocity and epoch with 17 significant digits."""
    D, F = state.model.shape
    out = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}", f"{D} {F}"]
    for mat in (state.model.weights, state.velocity):
        out.extend(" ".join(f"{v:.17g}" for v in row) for row in mat)
    out.append(str(int(state.epoch)))
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(out) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_checkpoint(path) -> TrainState:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty checkpoint")
    header = lines[0].split()
    if len(header) != 2 or header[0] != CHECKPOINT_MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint (header {lines[0]!r})")
    if header[1] != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {header[1]!r}, "
                              f"expected {CHECKPOINT_VERSION!r}")
    try:
        D, F = (int(t) for t in lines[1].split())
    except (IndexError, ValueError):
        raise DataFormatError(f"{path}: missing or malformed dimension line") from None
    if D < 1 or F < 1:
        raise DataFormatError(f"{path}: invalid dimensions {D} x {F}")
    tokens = " ".join(lines[2:]).split()
    n = D * F
    sections = [("weight", n), ("velocity", n), ("epoch", 1)]
    pos = 0
    values = []
    for name, count in sections:
        chunk = tokens[pos:pos + count]
        if len(chunk) < count:
            raise DataFormatError(f"{path}: truncated {name} section: expected {count} "
                                  f"values, found {len(chunk)}")
        values.append(chunk)
        pos += count
    if pos != len(tokens):
        raise DataFormatError(f"{path}: {len(tokens) - pos} trailing value(s)")
    try:
        W = np.array([float(t) for t in values[0]]).reshape(D, F)
        V = np.array([float(t) for t in values[1]]).reshape(D, F)
        epoch = int(values[2][0])
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    return TrainState(EmbeddingModel(W), V, epoch)
