"""Feature files, embedding files and results tables.

Feature files are comma-separated with a header ``id,label,f0,...,f{d-1}``.
Floats are written with 17 significant digits so a save/load round trip is
lossless.
"""

import csv
import io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import DuplicateId, ParseError
from .retrieval import FeatureDataset


def fmt(x):
    return format(float(x), ".17g")


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_float(token, line, column, path):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(line, f"column {column!r}: {token!r} is not a number", path) from None
    if not math.isfinite(value):
        raise ParseError(line, f"column {column!r}: non-finite value {token!r}", path)
    return value


def _parse_label(token, line, path):
    try:
        value = int(token)
    except ValueError:
        raise ParseError(line, f"label {token!r} is not an integer", path) from None
    if value < 0:
        raise ParseError(line, f"label {value} is negative", path)
    return value


def parse_features(text, path=None, role="public"):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty file", path) from None
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "id" or header[1] != "label":
        raise ParseError(1, "header must start with 'id,label' and name at least one feature", path)
    width = len(header)

    ids, labels, rows, seen = [], [], [], {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise ParseError(lineno, f"expected {width} columns, found {len(row)}", path)
        rid = row[0].strip()
        if not rid:
            raise ParseError(lineno, "empty id", path)
        if rid in seen:
            raise DuplicateId(rid, line=lineno, path=path)
        seen[rid] = lineno
        labels.append(_parse_label(row[1].strip(), lineno, path))
        rows.append([_parse_float(tok.strip(), lineno, header[j + 2], path) for j, tok in enumerate(row[2:])])
        ids.append(rid)
    if not rows:
        raise ParseError(2, "no data rows", path)
    return FeatureDataset(ids, np.array(rows), np.array(labels), role=role)


def load_features(path, role="public"):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(0, f"cannot read file: {exc.strerror}", str(path)) from None
    return parse_features(text, path=str(path), role=role)


def format_matrix_table(ids, labels, matrix, prefix="f"):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label"] + [f"{prefix}{j}" for j in range(matrix.shape[1])])
    for rid, lab, row in zip(ids, labels, matrix):
        writer.writerow([rid, int(lab)] + [fmt(v) for v in row])
    return buf.getvalue()


def save_features(dataset, path):
    atomic_write_text(path, format_matrix_table(dataset.ids, dataset.labels, dataset.features))


def save_embedding(path, ids, labels, matrix, metadata=None):
    """Embedding table with ``e0..e{k-1}`` columns and an optional ``#`` header."""
    text = format_metadata(metadata or {}) + format_matrix_table(ids, labels, matrix, prefix="e")
    atomic_write_text(path, text)


def format_metadata(metadata):
    return "".join(f"# {key}: {value}\n" for key, value in metadata.items())


RESULT_COLUMNS = ("epsilon", "mean_recall", "std_recall", "trials", "delta_sensitivity", "noise_stddev")


def format_results(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in rows:
        writer.writerow([
            fmt(r.epsilon), fmt(r.mean_recall), fmt(r.std_recall), int(r.trials),
            fmt(r.delta_sensitivity), fmt(r.noise_stddev),
        ])
    return buf.getvalue()


def write_results(path, rows, metadata):
    atomic_write_text(path, format_metadata(metadata) + format_results(rows))


def read_results(path):
    """Parse a results file into ``(metadata, rows)``; rows are dicts of floats."""
    metadata, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            metadata[key] = value
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    rows = [{k: float(v) for k, v in row.items()} for row in reader]
    return metadata, rows
