"""On-disk formats: models (JSON), manifests, feature tables and reports (CSV).

Writers are deterministic: floats go out in shortest round-trip form, CSV
uses commas and ``\\n`` line endings, JSON is indented with a fixed key order.
Readers reject missing fields instead of defaulting them.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .classifier import LinearModel, LabeledSample, MulticlassModel, TrainConfig
from .errors import MalformedFile, MalformedRow, MissingColumn, VersionMismatch
from .features import ChannelHistogram, FeatureScheme, FeatureVector
from .synth import DefectProfile, SiteProfile

FORMAT_VERSION = 1


def fmt_float(x) -> str:
    return repr(float(x))


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_csv(path, required):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MalformedFile(f"{path}: empty CSV file")
        for col in required:
            if col not in reader.fieldnames:
                raise MissingColumn(col, path)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(row[c] is None for c in required):
                raise MalformedRow(lineno, "wrong number of fields", path)
            rows.append((lineno, row))
        return reader.fieldnames, rows


def _convert(conv, value, lineno, col, path):
    try:
        return conv(value)
    except (TypeError, ValueError):
        raise MalformedRow(lineno, f"bad {col} value {value!r}", path) from None


# --- manifest --------------------------------------------------------------

MANIFEST_COLUMNS = ("file", "region_index", "x0", "y0", "width", "height", "site", "label")


@dataclass(frozen=True)
class ManifestRecord:
    file: str
    region_index: int
    x0: int
    y0: int
    width: int
    height: int
    site: str
    label: str

    @property
    def bounding_box(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.width, self.height)


def manifest_text(records) -> str:
    return _csv_text(MANIFEST_COLUMNS, [
        (r.file, r.region_index, r.x0, r.y0, r.width, r.height, r.site, r.label)
        for r in records])


def write_manifest(records, path) -> None:
    _write_text(path, manifest_text(records))


def read_manifest(path) -> list[ManifestRecord]:
    _, rows = _read_csv(path, MANIFEST_COLUMNS)
    out = []
    for lineno, row in rows:
        ints = {c: _convert(int, row[c], lineno, c, path)
                for c in ("region_index", "x0", "y0", "width", "height")}
        for c in ("file", "site", "label"):
            if not row[c]:
                raise MalformedRow(lineno, f"empty {c}", path)
        out.append(ManifestRecord(row["file"], site=row["site"], label=row["label"], **ints))
    return out


# --- feature tables ----------------------------------------------------------

@dataclass(frozen=True)
class FeatureRecord:
    features: FeatureVector
    label: str
    site: str

    @property
    def bean_id(self) -> str:
        return self.features.bean_id

    def sample(self, by: str = "label") -> LabeledSample:
        return LabeledSample(self.features, self.site if by == "site" else self.label)


def write_features(records, path) -> None:
    records = list(records)
    dim = records[0].features.scheme.dimension if records else 0
    header = ["bean_id", "scheme", "label", "site"] + [f"v{k}" for k in range(dim)]
    rows = [[r.bean_id, r.features.scheme.name, r.label, r.site]
            + [fmt_float(v) for v in r.features.values] for r in records]
    _write_text(path, _csv_text(header, rows))


def read_features(path) -> list[FeatureRecord]:
    fields, rows = _read_csv(path, ("bean_id", "scheme", "label", "site", "v0"))
    value_cols = [f for f in fields if f.startswith("v") and f[1:].isdigit()]
    value_cols.sort(key=lambda f: int(f[1:]))
    out = []
    for lineno, row in rows:
        scheme = _convert(FeatureScheme.parse, row["scheme"], lineno, "scheme", path)
        cols = [f"v{k}" for k in range(scheme.dimension)]
        if value_cols[:len(cols)] != cols:
            raise MissingColumn(f"v{len(value_cols)}", path)
        values = [_convert(float, row[c], lineno, c, path) for c in cols]
        fv = _convert(lambda v: FeatureVector(scheme, v, row["bean_id"]), values,
                      lineno, "values", path)
        out.append(FeatureRecord(fv, row["label"], row["site"]))
    return out


def write_histogram(hists, path) -> None:
    rows = []
    for h in hists:
        freq = h.frequencies()
        name = h.channel.name.lower()
        rows += [(name, v, int(h.counts[v]), fmt_float(freq[v])) for v in range(len(h.counts))]
    _write_text(path, _csv_text(("channel", "value", "count", "frequency"), rows))


def read_histogram(path) -> list[ChannelHistogram]:
    from .imaging import Channel

    _, rows = _read_csv(path, ("channel", "value", "count"))
    counts: dict[Channel, np.ndarray] = {}
    for lineno, row in rows:
        ch = _convert(Channel.parse, row["channel"], lineno, "channel", path)
        v = _convert(int, row["value"], lineno, "value", path)
        if not 0 <= v <= 255:
            raise MalformedRow(lineno, f"value {v} outside [0, 255]", path)
        counts.setdefault(ch, np.zeros(256, dtype=np.int64))[v] = \
            _convert(int, row["count"], lineno, "count", path)
    return [ChannelHistogram(ch, c) for ch, c in counts.items()]


# --- reports -----------------------------------------------------------------

REPORT_COLUMNS = ("ratio", "repeat", "seed", "train_size", "test_size", "pq", "pd", "accuracy")
SWEEP_COLUMNS = ("ratio", "accuracy", "train_size", "test_size", "seed")


def write_report(runs, path) -> None:
    """``runs`` yields (ratio or None, repeat, seed, train_size, test_size, EvaluationReport)."""
    rows = [("" if ratio is None else fmt_float(ratio), rep, seed, n_train, n_test,
             rep_.pq, rep_.pd, fmt_float(rep_.accuracy))
            for ratio, rep, seed, n_train, n_test, rep_ in runs]
    _write_text(path, _csv_text(REPORT_COLUMNS, rows))


def write_sweep(result, path) -> None:
    rows = [(fmt_float(r.ratio), fmt_float(r.accuracy), r.train_size, r.test_size, r.seed)
            for r in result.rows]
    _write_text(path, _csv_text(SWEEP_COLUMNS, rows))


def read_sweep(path) -> list[tuple[float, float]]:
    _, rows = _read_csv(path, ("ratio", "accuracy"))
    return [(_convert(float, row["ratio"], n, "ratio", path),
             _convert(float, row["accuracy"], n, "accuracy", path)) for n, row in rows]


def write_confusion(cm, path) -> None:
    rows = [[cls] + [int(v) for v in cm.counts[i]] for i, cls in enumerate(cm.classes)]
    _write_text(path, _csv_text(["true"] + list(cm.classes), rows))


def read_confusion(path):
    from .evaluation import ConfusionMatrix

    with open(path, encoding="utf-8", newline="") as fh:
        table = list(csv.reader(fh))
    if not table or len(table[0]) < 3:
        raise MalformedFile(f"{path}: confusion matrix needs a header of predicted labels")
    classes = table[0][1:]
    if [row[0] for row in table[1:]] != classes:
        raise MalformedFile(f"{path}: row labels must match the header labels")
    counts = [[_convert(int, v, n, "count", path) for v in row[1:]]
              for n, row in enumerate(table[1:], start=2)]
    return ConfusionMatrix(tuple(classes), counts)


# --- models -------------------------------------------------------------------

def _model_payload(m: LinearModel) -> dict:
    cfg = m.train_config
    return {
        "scheme": m.scheme.name,
        "weights": [float(v) for v in m.weights],
        "bias": m.bias,
        "standardization": {"shift": [float(v) for v in m.shift],
                            "scale": [float(v) for v in m.scale]},
        "label_map": {"-1": m.label_map[0], "+1": m.label_map[1]},
        "train_config": None if cfg is None else {
            "c": cfg.c, "tolerance": cfg.tolerance, "max_epochs": cfg.max_epochs,
            "seed": cfg.seed},
        "training_fingerprint": dict(m.class_counts or {}),
    }


def model_to_json(model) -> str:
    if isinstance(model, MulticlassModel):
        doc = {"format_version": FORMAT_VERSION, "kind": "MulticlassModel",
               "scheme": model.scheme.name, "classes": list(model.classes),
               "pairwise": {f"{a}|{b}": _model_payload(m)
                            for (a, b), m in model.pairwise.items()}}
    else:
        doc = {"format_version": FORMAT_VERSION, "kind": "Model", **_model_payload(model)}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def save_model(model, path) -> None:
    _write_text(path, model_to_json(model))


def _field(doc, key, where):
    if not isinstance(doc, dict) or key not in doc:
        raise MalformedFile(f"{where}: missing field {key!r}")
    return doc[key]


def _model_from_payload(doc, where) -> LinearModel:
    try:
        scheme = FeatureScheme.parse(_field(doc, "scheme", where))
        std = _field(doc, "standardization", where)
        labels = _field(doc, "label_map", where)
        cfg_doc = _field(doc, "train_config", where)
        cfg = None if cfg_doc is None else TrainConfig(
            float(_field(cfg_doc, "c", where)), float(_field(cfg_doc, "tolerance", where)),
            int(_field(cfg_doc, "max_epochs", where)), int(_field(cfg_doc, "seed", where)))
        return LinearModel(
            scheme,
            _field(doc, "weights", where),
            float(_field(doc, "bias", where)),
            _field(std, "shift", where),
            _field(std, "scale", where),
            (_field(labels, "-1", where), _field(labels, "+1", where)),
            cfg,
            {str(k): int(v) for k, v in _field(doc, "training_fingerprint", where).items()},
        )
    except MalformedFile:
        raise
    except (TypeError, ValueError, AttributeError) as exc:
        raise MalformedFile(f"{where}: {exc}") from None


def model_from_json(text: str, path="<model>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    version = _field(doc, "format_version", path)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format_version {version} is not supported "
                              f"(expected {FORMAT_VERSION})")
    kind = _field(doc, "kind", path)
    if kind == "Model":
        return _model_from_payload(doc, path)
    if kind == "MulticlassModel":
        pairwise = {}
        for key, sub in _field(doc, "pairwise", path).items():
            a, sep, b = key.partition("|")
            if not sep:
                raise MalformedFile(f"{path}: pairwise key {key!r} is not 'siteA|siteB'")
            pairwise[(a, b)] = _model_from_payload(sub, f"{path}: pairwise[{key}]")
        try:
            return MulticlassModel(tuple(_field(doc, "classes", path)), pairwise,
                                   FeatureScheme.parse(_field(doc, "scheme", path)))
        except ValueError as exc:
            raise MalformedFile(f"{path}: {exc}") from None
    raise MalformedFile(f"{path}: unknown model kind {kind!r}")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read(), os.fspath(path))


# --- profiles -----------------------------------------------------------------

def _site_from(doc, where) -> SiteProfile:
    try:
        axes = _field(doc, "bean_axes", where)
        return SiteProfile(str(_field(doc, "site_id", where)),
                           tuple(float(v) for v in _field(doc, "channel_means", where)),
                           tuple(float(v) for v in _field(doc, "channel_stds", where)),
                           tuple(tuple(float(v) for v in a) for a in axes))
    except (TypeError, ValueError) as exc:
        raise MalformedFile(f"{where}: {exc}") from None


def _defect_from(doc, where) -> DefectProfile:
    try:
        return DefectProfile(
            tuple(int(v) for v in _field(doc, "mode_count_range", where)),
            tuple(tuple(float(v) for v in r) for r in _field(doc, "mode_mean_range", where)),
            tuple(float(v) for v in _field(doc, "mode_std_range", where)),
            bool(_field(doc, "per_bean_seed_mix", where)),
            tuple(tuple(float(v) for v in a) for a in _field(doc, "bean_axes", where)),
            float(_field(doc, "min_mode_separation", where)))
    except (TypeError, ValueError) as exc:
        raise MalformedFile(f"{where}: {exc}") from None


def profiles_from_json(text: str, path="<profiles>"):
    """Returns (site profiles by name, defect profiles by name)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    version = _field(doc, "format_version", path)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format_version {version} is not supported")
    sites = {name: _site_from(d, f"{path}: sites.{name}")
             for name, d in _field(doc, "sites", path).items()}
    defects = {name: _defect_from(d, f"{path}: defects.{name}")
               for name, d in _field(doc, "defects", path).items()}
    return sites, defects


def load_profiles(path=None):
    if path is None:
        text = resources.files("beanscope").joinpath("data/profiles.json").read_text("utf-8")
        return profiles_from_json(text, "beanscope/data/profiles.json")
    with open(path, encoding="utf-8") as fh:
        return profiles_from_json(fh.read(), os.fspath(path))


def profiles_to_json(sites: dict, defects: dict) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "Profile",
        "sites": {name: {"site_id": s.site_id, "channel_means": list(s.channel_means),
                         "channel_stds": list(s.channel_stds),
                         "bean_axes": [list(a) for a in s.bean_axes]}
                  for name, s in sites.items()},
        "defects": {name: {"mode_count_range": list(d.mode_count_range),
                           "mode_mean_range": [list(r) for r in d.mode_mean_range],
                           "mode_std_range": list(d.mode_std_range),
                           "per_bean_seed_mix": d.per_bean_seed_mix,
                           "bean_axes": [list(a) for a in d.bean_axes],
                           "min_mode_separation": d.min_mode_separation}
                    for name, d in defects.items()},
    }
    return json.dumps(doc, indent=2) + "\n"
