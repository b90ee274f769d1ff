"""On-disk formats: binary portable pixmaps, packed network weights, CSV
tables, and the JSON run configuration.

All CSV files carry a header row, use UTF-8, and print floats with 17
significant digits so values round-trip bit-exactly. Identifiers are
restricted to [A-Za-z0-9_.-], which keeps every table quoting-free.
"""

from __future__ import annotations

import csv
import io as _io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import AnnotationRecord, FeatureBank, LossTable
from .exceptions import ConfigError, DataError
from .featnet import AvgPool, Conv, FeatNet, NetConfig, Relu, default_layers
from .losses import LayerSpec, LossConfig, Normalization
from .scoring import PairReport
from .stylizer import OptimizeConfig, SweepResult, SweepRow
from .tensors import Image
from .validation import check_identifier

WEIGHTS_MAGIC = b"FNW1"


def format_float(x: float) -> str:
    """17 significant digits: enough to reconstruct the exact double."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# portable pixmaps (binary P6 / P5, maxval 255)


def _parse_ppm_header(blob: bytes, path: str):
    """Return (channels, width, height, payload offset); raise with offsets."""
    if len(blob) < 2 or blob[0:1] != b"P" or blob[1:2] not in (b"5", b"6"):
        raise DataError(f"{path}: not a binary pixmap (expected magic P5 or P6 at byte 0)")
    channels = 3 if blob[1:2] == b"6" else 1
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(blob):
            raise DataError(f"{path}: header ended prematurely at byte {pos}")
        ch = blob[pos:pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in b"\r\n":
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(blob) and blob[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(blob[start:pos]))
        else:
            raise DataError(f"{path}: unexpected header byte {blob[pos]:#04x} at byte {pos}")
    if pos >= len(blob) or blob[pos:pos + 1] not in b" \t\r\n":
        raise DataError(f"{path}: missing whitespace after maxval at byte {pos}")
    pos += 1
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise DataError(f"{path}: non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise DataError(f"{path}: unsupported maxval {maxval} (only 255)")
    return channels, width, height, pos


def read_image(path) -> Image:
    """Read a binary P6 (RGB) or P5 (gray) pixmap; bytes map to v / 255."""
    path = str(path)
    blob = Path(path).read_bytes()
    channels, width, height, pos = _parse_ppm_header(blob, path)
    need = width * height * channels
    payload = blob[pos:pos + need]
    if len(payload) < need:
        raise DataError(
            f"{path}: pixel payload truncated at byte {pos + len(payload)} "
            f"(need {need} bytes from byte {pos})")
    arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return Image(arr.reshape(height, width, channels))


def write_image(img: Image, path) -> None:
    """Write a pixmap; values quantize by round-half-up to 0..255."""
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + f"\n{img.width} {img.height}\n255\n".encode("ascii")
    q = np.floor(img.data * 255.0 + 0.5)
    payload = np.clip(q, 0.0, 255.0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# packed weights


def write_weights(net: FeatNet, path) -> None:
    """Serialize conv parameters: magic, layer count, then per conv layer
    its (in, out, kernel) triple, weights in (out, in, ky, kx) order, and
    biases. Everything little-endian; floats are raw doubles."""
    conv_indices = [i for i, l in enumerate(net.layers) if isinstance(l, Conv)]
    out = bytearray()
    out += WEIGHTS_MAGIC
    out += struct.pack("<I", len(conv_indices))
    for idx in conv_indices:
        layer = net.layers[idx]
        w, b = net.params[idx]
        out += struct.pack("<III", layer.in_ch, layer.out_ch, layer.kernel)
        out += np.ascontiguousarray(w, dtype="<f8").tobytes()
        out += np.ascontiguousarray(b, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def read_weights(path, cfg: NetConfig) -> FeatNet:
    """Load weights saved by :func:`write_weights` into ``cfg``'s architecture."""
    path = str(path)
    blob = Path(path).read_bytes()
    if blob[:4] != WEIGHTS_MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r} at byte 0 (expected {WEIGHTS_MAGIC!r})")
    if len(blob) < 8:
        raise DataError(f"{path}: truncated before layer count at byte {len(blob)}")
    (count,) = struct.unpack_from("<I", blob, 4)
    conv_indices = [i for i, l in enumerate(cfg.layers) if isinstance(l, Conv)]
    if count != len(conv_indices):
        raise DataError(
            f"{path}: file holds {count} conv layers, architecture has {len(conv_indices)}")
    pos = 8
    params = {}
    for which, idx in enumerate(conv_indices):
        layer = cfg.layers[idx]
        if pos + 12 > len(blob):
            raise DataError(f"{path}: truncated in layer {which} header at byte {pos}")
        in_ch, out_ch, kernel = struct.unpack_from("<III", blob, pos)
        if (in_ch, out_ch, kernel) != (layer.in_ch, layer.out_ch, layer.kernel):
            raise DataError(
                f"{path}: conv layer {which} is {in_ch}x{out_ch} k={kernel}, architecture "
                f"expects {layer.in_ch}x{layer.out_ch} k={layer.kernel}")
        pos += 12
        wn = out_ch * in_ch * kernel * kernel
        need = (wn + out_ch) * 8
        if pos + need > len(blob):
            raise DataError(f"{path}: truncated in layer {which} parameters at byte {len(blob)}")
        w = np.frombuffer(blob, dtype="<f8", count=wn, offset=pos).reshape(
            out_ch, in_ch, kernel, kernel).copy()
        pos += wn * 8
        b = np.frombuffer(blob, dtype="<f8", count=out_ch, offset=pos).copy()
        pos += out_ch * 8
        params[idx] = (w, b)
    return FeatNet(cfg.layers, params)


# ---------------------------------------------------------------------------
# CSV tables


@dataclass(frozen=True)
class ReportRow:
    """One report line: a per-tap measurement or the per-pair totals row."""

    content_id: str
    style_id: str
    tap: str
    classic: float
    sup: float
    inf: float
    balanced: float


REPORT_HEADER = ["content_id", "style_id", "tap", "classic", "sup", "inf", "balanced"]
TOTAL_TAP = "total"


def report_rows(content_id: str, style_id: str, report: PairReport,
                cfg: LossConfig) -> list[ReportRow]:
    """Flatten a PairReport into per-tap rows plus the weighted totals row.

    The totals row re-weights sup and inf the same way the classic and
    balanced totals are weighted, so its bound columns still bracket its
    classic column; the per-layer ratio identity does not apply to it.
    """
    rows = [ReportRow(content_id, style_id, r.tap, r.classic, r.sup, r.inf, r.balanced)
            for r in report.layers]
    sup_total = sum(s.weight * r.sup for s, r in zip(cfg.style_layers, report.layers))
    inf_total = sum(s.weight * r.inf for s, r in zip(cfg.style_layers, report.layers))
    rows.append(ReportRow(content_id, style_id, TOTAL_TAP,
                          report.classic_style, sup_total, inf_total,
                          report.balanced_style))
    return rows


def write_report_csv(path, rows: Sequence[ReportRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for r in rows:
            check_identifier(r.content_id, "content_id")
            check_identifier(r.style_id, "style_id")
            check_identifier(r.tap, "tap")
            w.writerow([r.content_id, r.style_id, r.tap,
                        format_float(r.classic), format_float(r.sup),
                        format_float(r.inf), format_float(r.balanced)])


def _open_rows(path, expected_header: list[str]):
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: not UTF-8 text ({e})") from e
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise DataError(f"{path}: empty file, expected a header row")
    if rows[0] != expected_header:
        raise DataError(f"{path}: header {rows[0]!r} != expected {expected_header!r}")
    return path, rows


def _parse_float(token: str, path: str, line: int, col: str) -> float:
    try:
        return float(token)
    except ValueError as e:
        raise DataError(f"{path}: line {line}: column {col}: bad float {token!r}") from e


def read_report_csv(path) -> list[ReportRow]:
    path, rows = _open_rows(path, REPORT_HEADER)
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != len(REPORT_HEADER):
            raise DataError(f"{path}: line {ln}: expected {len(REPORT_HEADER)} fields, "
                            f"got {len(row)}")
        cid, sid, tap = row[0], row[1], row[2]
        for what, val in (("content_id", cid), ("style_id", sid), ("tap", tap)):
            check_identifier(val, what, f"{path}: line {ln}")
        vals = [_parse_float(row[i], path, ln, REPORT_HEADER[i]) for i in range(3, 7)]
        out.append(ReportRow(cid, sid, tap, *vals))
    return out


SWEEP_HEADER = ["style_id", "content_id", "classic_style", "balanced_style", "content", "steps"]


def write_sweep_csv(path, result: SweepResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in result.rows:
            check_identifier(r.style_id, "style_id")
            check_identifier(r.content_id, "content_id")
            w.writerow([r.style_id, r.content_id, format_float(r.classic_style),
                        format_float(r.balanced_style), format_float(r.content),
                        str(r.steps)])


def read_sweep_csv(path) -> SweepResult:
    path, rows = _open_rows(path, SWEEP_HEADER)
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != len(SWEEP_HEADER):
            raise DataError(f"{path}: line {ln}: expected {len(SWEEP_HEADER)} fields, "
                            f"got {len(row)}")
        try:
            steps = int(row[5])
        except ValueError as e:
            raise DataError(f"{path}: line {ln}: bad step count {row[5]!r}") from e
        out.append(SweepRow(
            style_id=check_identifier(row[0], "style_id", f"{path}: line {ln}"),
            content_id=check_identifier(row[1], "content_id", f"{path}: line {ln}"),
            classic_style=_parse_float(row[2], path, ln, "classic_style"),
            balanced_style=_parse_float(row[3], path, ln, "balanced_style"),
            content=_parse_float(row[4], path, ln, "content"),
            steps=steps,
        ))
    return SweepResult(tuple(out))


TRAJECTORY_HEADER = ["step", "total"]


def write_trajectory_csv(path, totals: Sequence[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for i, v in enumerate(totals):
            w.writerow([str(i), format_float(v)])


ANNOTATION_HEADER = ["id", "score"]


def read_annotations(path) -> list[AnnotationRecord]:
    path, rows = _open_rows(path, ANNOTATION_HEADER)
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataError(f"{path}: line {ln}: expected 2 fields, got {len(row)}")
        rid = check_identifier(row[0], "id", f"{path}: line {ln}")
        try:
            score = int(row[1])
        except ValueError:
            score = None
        if score not in (-1, 0, 1):
            raise DataError(f"{path}: line {ln}: score must be -1, 0, or 1, got {row[1]!r}")
        out.append(AnnotationRecord(rid, score))
    return out


def write_annotations(path, records: Sequence[AnnotationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ANNOTATION_HEADER)
        for rec in records:
            check_identifier(rec.id, "id")
            w.writerow([rec.id, str(rec.score)])


def read_feature_bank(path) -> FeatureBank:
    """Bank CSV: header id,artist,v0..v{d-1}; every row carries d floats."""
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: not UTF-8 text ({e})") from e
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise DataError(f"{path}: empty file, expected a header row")
    header = rows[0]
    if len(header) < 3 or header[:2] != ["id", "artist"]:
        raise DataError(f"{path}: header must start with id,artist,v0,..., got {header!r}")
    dim = len(header) - 2
    for j in range(dim):
        if header[2 + j] != f"v{j}":
            raise DataError(f"{path}: vector column {2 + j} must be named v{j}, "
                            f"got {header[2 + j]!r}")
    ids, artists, vectors = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != 2 + dim:
            raise DataError(f"{path}: line {ln}: expected {2 + dim} fields, got {len(row)}")
        ids.append(check_identifier(row[0], "id", f"{path}: line {ln}"))
        artists.append(check_identifier(row[1], "artist", f"{path}: line {ln}"))
        vectors.append([_parse_float(row[2 + j], path, ln, f"v{j}") for j in range(dim)])
    if not ids:
        raise DataError(f"{path}: bank has no data rows")
    return FeatureBank(tuple(ids), tuple(artists), np.asarray(vectors, dtype=np.float64))


def write_feature_bank(path, bank: FeatureBank) -> None:
    dim = bank.vectors.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "artist"] + [f"v{j}" for j in range(dim)])
        for i in range(len(bank)):
            check_identifier(bank.ids[i], "id")
            check_identifier(bank.artists[i], "artist")
            w.writerow([bank.ids[i], bank.artists[i]] +
                       [format_float(v) for v in bank.vectors[i]])


def loss_table_from_reports(rows: Sequence[ReportRow], column: str = "balanced") -> LossTable:
    """Pivot report rows into a per-sample table for correlation analysis.

    Sample id is "{content_id}__{style_id}"; one column per tap (the totals
    row becomes the "total" column). ``column`` picks which measured value
    fills the table: classic, sup, inf, or balanced.
    """
    if column not in ("classic", "sup", "inf", "balanced"):
        raise DataError(f"unknown report column {column!r}")
    samples: dict[str, dict[str, float]] = {}
    for r in rows:
        sid = f"{r.content_id}__{r.style_id}"
        samples.setdefault(sid, {})[r.tap] = getattr(r, column)
    ids = sorted(samples)
    taps: list[str] = []
    for cells in samples.values():
        for tap in cells:
            if tap not in taps:
                taps.append(tap)
    ordered = [t for t in taps if t != TOTAL_TAP] + ([TOTAL_TAP] if TOTAL_TAP in taps else [])
    values = []
    for sid in ids:
        cells = samples[sid]
        missing = [t for t in ordered if t not in cells]
        if missing:
            raise DataError(f"sample {sid} lacks rows for taps {missing}")
        values.append([cells[t] for t in ordered])
    return LossTable(tuple(ids), tuple(ordered), np.asarray(values, dtype=np.float64))


# ---------------------------------------------------------------------------
# JSON run configuration


@dataclass(frozen=True)
class RunConfig:
    """Bundle of network, loss, and optimizer settings plus named paths."""

    net: NetConfig = field(default_factory=NetConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optimize: OptimizeConfig = field(default_factory=OptimizeConfig)
    paths: dict = field(default_factory=dict)


def _reject_unknown(obj: dict, allowed: Sequence[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: must be an object")
    unknown = [k for k in obj if k not in allowed]
    if unknown:
        raise DataError(f"{where}: unknown keys {sorted(unknown)} "
                        f"(allowed: {sorted(allowed)})")


def _layers_from_json(spec, where: str):
    layers = []
    for i, entry in enumerate(spec):
        if not isinstance(entry, list) or not entry or not isinstance(entry[0], str):
            raise DataError(f"{where}: layer {i} must be a [kind, ...] list, got {entry!r}")
        kind = entry[0]
        if kind == "conv":
            if len(entry) != 4:
                raise DataError(f"{where}: layer {i}: conv needs [\"conv\", in, out, kernel]")
            layers.append(Conv(int(entry[1]), int(entry[2]), int(entry[3])))
        elif kind == "relu":
            if len(entry) == 1:
                layers.append(Relu())
            elif len(entry) == 2 and isinstance(entry[1], str):
                layers.append(Relu(entry[1]))
            else:
                raise DataError(f"{where}: layer {i}: relu takes an optional tap name")
        elif kind == "pool":
            if len(entry) != 1:
                raise DataError(f"{where}: layer {i}: pool takes no arguments")
            layers.append(AvgPool())
        else:
            raise DataError(f"{where}: layer {i}: unknown kind {kind!r}")
    return tuple(layers)


def run_config_from_dict(doc: dict, where: str = "config") -> RunConfig:
    """Build a RunConfig from parsed JSON, rejecting unknown keys anywhere."""
    if not isinstance(doc, dict):
        raise DataError(f"{where}: top level must be an object")
    _reject_unknown(doc, ["net", "loss", "optimize", "paths"], where)

    net_doc = doc.get("net", {})
    _reject_unknown(net_doc, ["seed", "architecture", "weights_file", "in_channels"],
                    f"{where}.net")
    in_channels = int(net_doc.get("in_channels", 3))
    if "architecture" in net_doc:
        layers = _layers_from_json(net_doc["architecture"], f"{where}.net.architecture")
    else:
        layers = default_layers(in_channels)
    net = NetConfig(layers=layers, seed=int(net_doc.get("seed", 0)),
                    weights_file=net_doc.get("weights_file"), in_channels=in_channels)

    loss_doc = doc.get("loss", {})
    _reject_unknown(loss_doc, ["style_layers", "content_layer", "beta", "normalization"],
                    f"{where}.loss")
    kwargs = {}
    if "style_layers" in loss_doc:
        specs = []
        for i, entry in enumerate(loss_doc["style_layers"]):
            if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)):
                raise DataError(f"{where}.loss.style_layers[{i}] must be [tap, weight]")
            specs.append(LayerSpec(entry[0], float(entry[1])))
        kwargs["style_layers"] = tuple(specs)
    if "content_layer" in loss_doc:
        kwargs["content_layer"] = str(loss_doc["content_layer"])
    if "beta" in loss_doc:
        kwargs["beta"] = float(loss_doc["beta"])
    if "normalization" in loss_doc:
        try:
            kwargs["normalization"] = Normalization(loss_doc["normalization"])
        except ValueError as e:
            raise DataError(f"{where}.loss.normalization: {e}") from e
    loss = LossConfig(**kwargs)

    opt_doc = doc.get("optimize", {})
    _reject_unknown(opt_doc, ["steps", "step_size", "seed", "init", "loss_kind", "auto_beta"],
                    f"{where}.optimize")
    okw = {}
    for key in ("steps", "seed"):
        if key in opt_doc:
            okw[key] = int(opt_doc[key])
    if "step_size" in opt_doc:
        okw["step_size"] = float(opt_doc["step_size"])
    for key in ("init", "loss_kind"):
        if key in opt_doc:
            okw[key] = str(opt_doc[key])
    if "auto_beta" in opt_doc:
        if not isinstance(opt_doc["auto_beta"], bool):
            raise DataError(f"{where}.optimize.auto_beta must be true or false")
        okw["auto_beta"] = opt_doc["auto_beta"]
    try:
        optimize = OptimizeConfig(loss=loss, **okw)
    except ValueError as e:
        raise DataError(f"{where}.optimize: {e}") from e

    paths = doc.get("paths", {})
    if not isinstance(paths, dict) or not all(isinstance(v, str) for v in paths.values()):
        raise DataError(f"{where}.paths must map names to path strings")

    cfg = RunConfig(net=net, loss=loss, optimize=optimize, paths=dict(paths))
    _check_taps_exist(cfg)
    return cfg


def _check_taps_exist(cfg: RunConfig) -> None:
    available = {l.tap for l in cfg.net.layers if isinstance(l, Relu) and l.tap}
    wanted = {s.tap for s in cfg.loss.style_layers} | {cfg.loss.content_layer}
    missing = sorted(wanted - available)
    if missing:
        raise ConfigError(f"loss references taps {missing} absent from the architecture "
                          f"(available: {sorted(available)})")


def load_run_config(path) -> RunConfig:
    path = str(path)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from e
    return run_config_from_dict(doc, where=path)
