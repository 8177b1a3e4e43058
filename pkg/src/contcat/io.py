"""Score files, per-item scaling, JSON artifacts and run manifests."""

import csv
import hashlib
import json
import math
import os
import tempfile
import warnings
import dataclasses
from dataclasses import dataclass

import jsonschema
import numpy as np

from .calibration import CalibrationArtifact, ItemParams, NormalizationTransform
from .evaluation import EvalReport
from .matrix import ScoreMatrix
from .ranker import RankingResult

CALIBRATION_FORMAT = "contcat.calibration"
RESULT_FORMAT = "contcat.ranking"
REPORT_FORMAT = "contcat.report"
SCHEMA_VERSION = 1
SCORE_HEADER = ("model_id", "item_id", "score")


class ScoreFileError(ValueError):
    pass


class ArtifactError(ValueError):
    pass


@dataclass(frozen=True)
class RawScores:
    """Model x item scores without the [0, 1] range check (NaN = missing)."""

    models: tuple
    items: tuple
    scores: np.ndarray


def _read_records(path):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScoreFileError(f"{path}: empty score file")
        if tuple(h.strip() for h in header) != SCORE_HEADER:
            raise ScoreFileError(f"{path}:1: header must be {','.join(SCORE_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ScoreFileError(f"{path}:{line}: expected 3 fields, got {len(row)}")
            model, item, raw = (c.strip() for c in row)
            if not model or not item:
                raise ScoreFileError(f"{path}:{line}: empty model_id or item_id")
            try:
                score = float(raw)
            except ValueError:
                raise ScoreFileError(f"{path}:{line}: score {raw!r} is not a number") from None
            if not math.isfinite(score):
                raise ScoreFileError(f"{path}:{line}: score {raw!r} is not finite")
            records.append((line, model, item, score))
    if not records:
        raise ScoreFileError(f"{path}: empty score file")
    return records


def load_raw_scores(path, aggregate_duplicates=False):
    """Parse a long-format ``model_id,item_id,score`` file without range checks."""
    cells = {}
    for line, model, item, score in _read_records(path):
        key = (model, item)
        if key in cells and not aggregate_duplicates:
            raise ScoreFileError(
                f"{path}:{line}: duplicate score for ({model}, {item}); "
                "use aggregate_duplicates to average repeats"
            )
        cells.setdefault(key, []).append(score)
    models = tuple(dict.fromkeys(m for m, _ in cells))
    items = tuple(dict.fromkeys(i for _, i in cells))
    row = {m: j for j, m in enumerate(models)}
    col = {i: n for n, i in enumerate(items)}
    arr = np.full((len(models), len(items)), np.nan)
    for (m, i), values in cells.items():
        arr[row[m], col[i]] = math.fsum(values) / len(values)
    return RawScores(models, items, arr)


def load_scores(path, aggregate_duplicates=False, clamp=False, scale_per_item=False):
    """Read a score file into a :class:`ScoreMatrix`.

    Repeated ``(model, item)`` rows are averaged when ``aggregate_duplicates``
    (several sampling temperatures per model), otherwise rejected. Scores
    outside [0, 1] are clamped when ``clamp``, otherwise rejected with their
    line number. With ``scale_per_item`` raw scores are rescaled per item
    before the range check.
    """
    raw = load_raw_scores(path, aggregate_duplicates)
    if scale_per_item:
        return per_item_scale(raw)
    arr = raw.scores
    bad = ~np.isnan(arr) & ((arr < 0) | (arr > 1))
    if bad.any():
        if not clamp:
            j, i = (int(x[0]) for x in np.nonzero(bad))
            line = _line_of(path, raw.models[j], raw.items[i])
            raise ScoreFileError(
                f"{path}:{line}: score {arr[j, i]!r} for ({raw.models[j]}, {raw.items[i]}) "
                "outside [0, 1]"
            )
        arr = np.where(bad, np.clip(arr, 0.0, 1.0), arr)
    return ScoreMatrix(raw.models, raw.items, arr)


def _line_of(path, model, item):
    for line, m, i, _ in _read_records(path):
        if (m, i) == (model, item):
            return line
    return "?"


def per_item_scale(matrix):
    """Rescale each item column linearly so its observed min/max become 0/1.

    Columns with fewer than two distinct values become 0.5 with a warning.
    """
    arr = np.array(matrix.scores, dtype=float)
    out = np.full_like(arr, np.nan)
    constant = []
    for i in range(arr.shape[1]):
        col = arr[:, i]
        mask = ~np.isnan(col)
        if not mask.any():
            continue
        lo, hi = col[mask].min(), col[mask].max()
        if hi > lo:
            out[mask, i] = np.clip((col[mask] - lo) / (hi - lo), 0.0, 1.0)
        else:
            out[mask, i] = 0.5
            constant.append(matrix.items[i])
    if constant:
        warnings.warn(
            f"{len(constant)} item(s) have a constant score and were set to 0.5 "
            f"(first: {constant[0]!r})",
            stacklevel=2,
        )
    return ScoreMatrix(tuple(matrix.models), tuple(matrix.items), out)


def write_scores(matrix, path):
    lines = [",".join(SCORE_HEADER)]
    for j, m in enumerate(matrix.models):
        for i, item in enumerate(matrix.items):
            y = matrix.scores[j, i]
            if not np.isnan(y):
                lines.append(f"{m},{item},{float(y)!r}")
    atomic_write(path, "\n".join(lines) + "\n")


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path):
    atomic_write(path, json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


_NUMBER = {"type": "number"}

CALIBRATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format", "version", "k", "a", "transform", "items", "metadata"],
    "properties": {
        "format": {"const": CALIBRATION_FORMAT},
        "version": {"type": "integer"},
        "k": {"type": "number", "exclusiveMinimum": 0},
        "a": {"type": "number", "exclusiveMinimum": 0},
        "transform": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lo", "hi", "epsilon"],
            "properties": {
                "lo": _NUMBER,
                "hi": _NUMBER,
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
            },
        },
        "items": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "b", "active", "correlation", "k"],
                "properties": {
                    "id": {"type": "string"},
                    "b": _NUMBER,
                    "active": {"type": "boolean"},
                    "correlation": {"type": "number", "minimum": -1, "maximum": 1},
                    "k": {"anyOf": [{"type": "null"}, {"type": "number", "exclusiveMinimum": 0}]},
                },
            },
        },
        "metadata": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dataset": {"type": ["string", "null"]},
                "metric": {"type": ["string", "null"]},
                "n_models": {"type": "integer", "minimum": 0},
                "n_items": {"type": "integer", "minimum": 0},
                "created": {"type": ["string", "null"]},
            },
        },
    },
}


def _validate(doc, schema, path, fmt):
    if isinstance(doc, dict) and doc.get("format") == fmt and doc.get("version") != SCHEMA_VERSION:
        raise ArtifactError(
            f"{path}: version mismatch: file has {doc.get('version')!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=str)
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ArtifactError(f"{path}: schema violation at {where}: {err.message}")


def calibration_to_dict(artifact):
    return {
        "format": CALIBRATION_FORMAT,
        "version": SCHEMA_VERSION,
        "k": artifact.k,
        "a": artifact.a,
        "transform": {
            "lo": artifact.transform.lo,
            "hi": artifact.transform.hi,
            "epsilon": artifact.transform.epsilon,
        },
        "items": [
            {"id": it.id, "b": it.b, "active": it.active, "correlation": it.correlation, "k": it.k}
            for it in artifact.items
        ],
        "metadata": dict(artifact.metadata),
    }


def calibration_from_dict(doc, path="<memory>"):
    _validate(doc, CALIBRATION_SCHEMA, path, CALIBRATION_FORMAT)
    try:
        return CalibrationArtifact(
            items=tuple(ItemParams(**it) for it in doc["items"]),
            k=doc["k"],
            a=doc["a"],
            transform=NormalizationTransform(**doc["transform"]),
            metadata=dict(doc["metadata"]),
        )
    except ValueError as exc:
        raise ArtifactError(f"{path}: {exc}") from None


def save_calibration(artifact, path):
    dump_json(calibration_to_dict(artifact), path)


def load_calibration(path):
    return calibration_from_dict(_load_json(path), path)


def config_to_dict(config):
    """JSON-safe echo of a :class:`RankerConfig`; an unlimited budget becomes null."""
    doc = dataclasses.asdict(config)
    if math.isinf(doc["budget"]):
        doc["budget"] = None
    return doc


def save_result(result, path, config=None):
    doc = {"format": RESULT_FORMAT, "version": SCHEMA_VERSION, **result.to_dict()}
    if config is not None:
        doc["config"] = config if isinstance(config, dict) else config_to_dict(config)
    dump_json(doc, path)


def load_result(path):
    doc = _load_json(path)
    if not isinstance(doc, dict) or doc.get("format") != RESULT_FORMAT:
        raise ArtifactError(f"{path}: not a ranking result file")
    if doc.get("version") != SCHEMA_VERSION:
        raise ArtifactError(f"{path}: version mismatch: {doc.get('version')!r}")
    try:
        return RankingResult.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"{path}: malformed ranking result: {exc}") from None


def save_report(report: EvalReport, path):
    dump_json({"format": REPORT_FORMAT, "version": SCHEMA_VERSION, **report.to_dict()}, path)


def load_costs(path):
    """Read ``model_id,cost_per_item`` rows; models absent from the file cost 1.0."""
    costs = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["model_id", "cost_per_item"]:
            raise ScoreFileError(f"{path}:1: header must be model_id,cost_per_item")
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != 2:
                raise ScoreFileError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                cost = float(row[1])
            except ValueError:
                raise ScoreFileError(f"{path}:{line}: cost {row[1]!r} is not a number") from None
            if not (math.isfinite(cost) and cost > 0):
                raise ScoreFileError(f"{path}:{line}: cost must be finite and > 0")
            costs[row[0].strip()] = cost
    return costs


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class StreamOracle:
    """Line protocol oracle for live scoring.

    Each request is one JSON line ``{"model_id": ..., "item_id": ...}`` on
    ``out``; the reply is one line on ``inp`` holding either a bare number or
    ``{"score": <number>}`` in [0, 1].
    """

    def __init__(self, inp, out):
        self.inp = inp
        self.out = out
        self.n_requests = 0

    def respond(self, model_id, item_id):
        self.out.write(json.dumps({"model_id": model_id, "item_id": item_id}) + "\n")
        self.out.flush()
        self.n_requests += 1
        line = self.inp.readline()
        where = f"<stdin>:{self.n_requests}"
        if not line:
            raise ScoreFileError(f"{where}: input closed before score for ({model_id}, {item_id})")
        try:
            value = json.loads(line)
        except json.JSONDecodeError:
            raise ScoreFileError(f"{where}: unparsable score line {line.strip()!r}") from None
        if isinstance(value, dict):
            value = value.get("score")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScoreFileError(f"{where}: score must be a number, got {line.strip()!r}")
        if not 0.0 <= value <= 1.0:
            raise ScoreFileError(f"{where}: score {value!r} outside [0, 1]")
        return float(value)
