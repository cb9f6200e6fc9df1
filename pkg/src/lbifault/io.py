"""Line-oriented text formats for every artifact, plus plot-data emission.

Tabular files (profiles, truth lists, sweep tables, plot data) start with
``# key: <json>`` header lines followed by a delimiter-separated table whose
first row names the columns.  Cluster shapes, compensation vectors and
detection results are single JSON documents.  Floats are written with
``repr``, the shortest decimal string that parses back to the same double,
so every numeric field round-trips bit-exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .detect import ClusterShape, CompensationVector
from .evaluate import ContingencyTable, SweepResult
from .model import EventList, FiberProfile, ModelError

FORMAT_VERSION = 1
DEFAULT_DELIMITER = ","


class FormatError(ValueError):
    """Malformed, truncated or wrong-version artifact file."""

    def __init__(self, path, line, msg):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {msg}")


def _num(x) -> str:
    return repr(float(x))


def _write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="\n" keeps bytes identical across platforms
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_table(path, header: dict, columns: list[str], rows, delimiter: str):
    lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in header.items()]
    lines.append(delimiter.join(columns))
    lines.extend(delimiter.join(r) for r in rows)
    _write_text(path, "\n".join(lines) + "\n")


def _read_table(path, kind: str, delimiter: str):
    """Header dict, column names, and ``(line_number, fields)`` rows."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(path, 0, f"cannot read file ({exc.strerror})") from exc
    header, columns, rows = {}, None, []
    for no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if columns is not None:
                raise FormatError(path, no, "header line after the column row")
            key, sep, val = line[1:].partition(":")
            if not sep:
                raise FormatError(path, no, f"header line without 'key: value': {line!r}")
            try:
                header[key.strip()] = json.loads(val)
            except json.JSONDecodeError as exc:
                raise FormatError(path, no, f"bad header value for {key.strip()!r}: {exc.msg}") from exc
            continue
        fields = line.split(delimiter)
        if columns is None:
            columns = fields
            continue
        if len(fields) != len(columns):
            raise FormatError(path, no, f"expected {len(columns)} fields, got {len(fields)}")
        rows.append((no, fields))
    _check_header(path, header, kind)
    if columns is None:
        raise FormatError(path, 0, "truncated file: no column row")
    return header, columns, rows


def _check_header(path, header: dict, kind: str):
    ver = header.get("format_version")
    if ver is None:
        raise FormatError(path, 0, "missing format_version")
    if ver != FORMAT_VERSION:
        raise FormatError(path, 0, f"unsupported format_version {ver!r} (expected {FORMAT_VERSION})")
    if header.get("kind") != kind:
        raise FormatError(path, 0, f"expected a {kind} file, found {header.get('kind')!r}")


def _parse_float(path, no, s):
    try:
        return float(s)
    except ValueError:
        raise FormatError(path, no, f"not a number: {s!r}") from None


def _parse_int(path, no, s):
    try:
        return int(s)
    except ValueError:
        raise FormatError(path, no, f"not an integer: {s!r}") from None


# profiles ------------------------------------------------------------------

def write_profile(path, profile: FiberProfile, delimiter: str = DEFAULT_DELIMITER):
    header = {"format_version": FORMAT_VERSION, "kind": "profile", "N": profile.n,
              "meta": profile.meta}
    rows = ([str(i), _num(v)] for i, v in enumerate(profile.samples, start=1))
    _write_table(path, header, ["index", "value_db"], rows, delimiter)


def read_profile(path, delimiter: str = DEFAULT_DELIMITER) -> FiberProfile:
    header, _, rows = _read_table(path, "profile", delimiter)
    n = header.get("N")
    if not isinstance(n, int) or n < 2:
        raise FormatError(path, 0, f"bad N in header: {n!r}")
    values = np.empty(n)
    for expect, (no, (idx, val)) in enumerate(rows, start=1):
        i = _parse_int(path, no, idx)
        if i != expect:
            raise FormatError(path, no, f"missing index {expect} (row has index {i})")
        if i > n:
            raise FormatError(path, no, f"row {i} beyond declared N={n}")
        values[i - 1] = _parse_float(path, no, val)
    if len(rows) < n:
        raise FormatError(path, 0, f"N declared {n} but {len(rows)} rows: missing index {len(rows) + 1}")
    try:
        return FiberProfile(values, header.get("meta") or {})
    except ModelError as exc:
        raise FormatError(path, 0, str(exc)) from exc


# truth / event lists -------------------------------------------------------

def write_events(path, events: EventList, delimiter: str = DEFAULT_DELIMITER, meta=None):
    header = {"format_version": FORMAT_VERSION, "kind": "events", "count": len(events),
              "meta": meta or {}}
    rows = ([str(p), _num(m)] for p, m in events)
    _write_table(path, header, ["position", "magnitude_db"], rows, delimiter)


def read_events(path, delimiter: str = DEFAULT_DELIMITER) -> EventList:
    header, _, rows = _read_table(path, "events", delimiter)
    count = header.get("count")
    if count != len(rows):
        raise FormatError(path, 0, f"count declared {count} but {len(rows)} rows")
    pos = [_parse_int(path, no, p) for no, (p, _) in rows]
    mag = [_parse_float(path, no, m) for no, (_, m) in rows]
    try:
        return EventList(np.array(pos, dtype=np.int64), np.array(mag))
    except ModelError as exc:
        raise FormatError(path, 0, str(exc)) from exc


write_truth = write_events
read_truth = read_events


# JSON documents ------------------------------------------------------------

def write_json(path, doc: dict):
    _write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _read_json(path, kind: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(path, 0, f"cannot read file ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, f"invalid JSON: {exc.msg} (column {exc.colno})") from exc
    if not isinstance(doc, dict):
        raise FormatError(path, 1, "top level must be an object")
    _check_header(path, doc, kind)
    return doc


def _taps_from(path, doc) -> np.ndarray:
    taps = doc.get("taps")
    if not isinstance(taps, list) or not all(isinstance(t, (int, float)) for t in taps):
        raise FormatError(path, 0, "taps must be a list of numbers")
    return np.array(taps, dtype=np.float64)


def write_cluster_shape(path, shape: ClusterShape):
    write_json(path, {"format_version": FORMAT_VERSION, "kind": "cluster_shape",
                       "alpha": shape.alpha, "split_len": shape.split_len,
                       "taps": [float(t) for t in shape.taps], "extraction": shape.extraction})


def read_cluster_shape(path) -> ClusterShape:
    doc = _read_json(path, "cluster_shape")
    try:
        return ClusterShape(_taps_from(path, doc), int(doc["alpha"]), int(doc["split_len"]),
                            doc.get("extraction") or {})
    except (KeyError, ModelError) as exc:
        raise FormatError(path, 0, f"bad cluster shape: {exc}") from exc


def write_compensation(path, comp: CompensationVector, extraction: dict | None = None):
    write_json(path, {"format_version": FORMAT_VERSION, "kind": "compensation",
                       "alpha": comp.alpha, "split_len": comp.split_len,
                       "taps": [float(t) for t in comp.taps], "extraction": extraction or {}})


def read_compensation(path) -> CompensationVector:
    doc = _read_json(path, "compensation")
    try:
        return CompensationVector(_taps_from(path, doc), int(doc["alpha"]), int(doc["split_len"]))
    except (KeyError, ModelError) as exc:
        raise FormatError(path, 0, f"bad compensation vector: {exc}") from exc


def write_result(path, *, solver: dict, events: EventList, mode: str = "raw",
                 table: ContingencyTable | None = None, mcc: float | None = None,
                 timing: float | None = None, source: str | None = None):
    """Detection result. ``mode`` is ``raw``, ``compensated`` or ``ls-deconv``."""
    doc = {"format_version": FORMAT_VERSION, "kind": "result", "solver": solver,
           "mode": mode, "compensated": mode != "raw",
           "events": [[int(p), float(m)] for p, m in events]}
    if source is not None:
        doc["source"] = source
    if table is not None:
        doc["contingency"] = {"tp": table.tp, "fp": table.fp, "fn": table.fn, "tn": table.tn}
        doc["mcc"] = float(mcc)
    if timing is not None:
        doc["timing_s"] = float(timing)
    write_json(path, doc)


def read_result(path) -> dict:
    doc = _read_json(path, "result")
    ev = doc.get("events")
    if not isinstance(ev, list) or any(not isinstance(e, list) or len(e) != 2 for e in ev):
        raise FormatError(path, 0, "events must be a list of [position, magnitude] pairs")
    try:
        doc["events"] = EventList.from_pairs([(int(p), float(m)) for p, m in ev])
    except ModelError as exc:
        raise FormatError(path, 0, str(exc)) from exc
    if "contingency" in doc:
        doc["contingency"] = ContingencyTable(**doc["contingency"])
    return doc


# sweep tables --------------------------------------------------------------

def _sweep_columns(res: SweepResult):
    cols = [res.axis_name]
    for m in res.methods:
        cols += [f"mcc_mean_{m}", f"mcc_std_{m}"]
    rows = []
    for i, x in enumerate(res.axis):
        r = [str(int(x))]
        for m in res.methods:
            r += [_num(res.mcc_mean[m][i]), _num(res.mcc_std[m][i])]
        rows.append(r)
    return cols, rows


def write_sweep_table(path, res: SweepResult, delimiter: str = DEFAULT_DELIMITER, meta=None,
                      _kind: str = "sweep"):
    """One row per axis point: the axis value, then mean and std MCC per method."""
    cols, rows = _sweep_columns(res)
    header = {"format_version": FORMAT_VERSION, "kind": _kind, "methods": res.methods,
              "meta": meta or {}}
    _write_table(path, header, cols, rows, delimiter)


def read_sweep_table(path, delimiter: str = DEFAULT_DELIMITER) -> SweepResult:
    header, cols, rows = _read_table(path, "sweep", delimiter)
    methods = header.get("methods")
    if not isinstance(methods, list):
        raise FormatError(path, 0, "missing methods list")
    expect = [cols[0]] + [f"mcc_{s}_{m}" for m in methods for s in ("mean", "std")]
    if cols != expect:
        raise FormatError(path, 0, f"columns {cols} do not match methods {methods}")
    res = SweepResult(cols[0], [], methods)
    for m in methods:
        res.mcc_mean[m], res.mcc_std[m] = [], []
    for no, f in rows:
        res.axis.append(_parse_int(path, no, f[0]))
        for j, m in enumerate(methods):
            res.mcc_mean[m].append(_parse_float(path, no, f[1 + 2 * j]))
            res.mcc_std[m].append(_parse_float(path, no, f[2 + 2 * j]))
    return res


# plot data -----------------------------------------------------------------

PLOT_KINDS = ("estimate-overlay", "mcc-vs-iterations", "mcc-vs-coefficients", "histogram")


def emit_plot_data(kind: str, inputs, path, delimiter: str = DEFAULT_DELIMITER):
    """Write the series behind one figure type as a delimited table.

    ``inputs`` per kind:

    * ``estimate-overlay``: dict of name -> per-candidate array (length N each),
      typically ``truth``, ``raw`` and ``compensated``.
    * ``mcc-vs-iterations`` / ``mcc-vs-coefficients``: a ``SweepResult``.
    * ``histogram``: dict of method -> ``{event_count: runs}``.
    """
    if kind not in PLOT_KINDS:
        raise ModelError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    header = {"format_version": FORMAT_VERSION, "kind": f"plot:{kind}"}
    if kind == "estimate-overlay":
        if not inputs:
            raise ModelError("estimate-overlay needs at least one series")
        names = list(inputs)
        series = [np.asarray(inputs[k], dtype=np.float64) for k in names]
        n = series[0].size
        if n == 0 or any(s.size != n for s in series):
            raise ModelError("overlay series must be non-empty and equally long")
        rows = ([str(i + 1)] + [_num(s[i]) for s in series] for i in range(n))
        _write_table(path, header, ["index"] + names, rows, delimiter)
    elif kind in ("mcc-vs-iterations", "mcc-vs-coefficients"):
        if inputs is None or not inputs.axis:
            raise ModelError("empty sweep")
        want = "iterations" if kind == "mcc-vs-iterations" else "coefficients"
        if inputs.axis_name != want:
            raise ModelError(f"{kind} needs a sweep over {want}, got {inputs.axis_name}")
        write_sweep_table(path, inputs, delimiter, _kind=f"plot:{kind}")
    else:
        if not inputs or not any(inputs.values()):
            raise ModelError("empty histogram")
        methods = list(inputs)
        counts = sorted({int(c) for h in inputs.values() for c in h})
        rows = ([str(c)] + [str(int(inputs[m].get(c, 0))) for m in methods] for c in counts)
        _write_table(path, header, ["events"] + methods, rows, delimiter)


def read_plot_data(path, delimiter: str = DEFAULT_DELIMITER):
    """Header and rows of a plot-data file (values left as strings)."""
    text = Path(path).read_text(encoding="utf-8")
    kind = None
    for line in text.splitlines():
        if line.startswith("# kind:"):
            kind = json.loads(line.partition(":")[2])
            break
    if not kind or not kind.startswith("plot:"):
        raise FormatError(path, 0, "not a plot-data file")
    header, cols, rows = _read_table(path, kind, delimiter)
    return header, cols, [f for _, f in rows]


def list_profiles(directory) -> list[tuple[Path, Path | None]]:
    """``(profile, truth)`` path pairs in a testbench directory, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(directory, 0, "not a directory")
    out = []
    for p in sorted(directory.glob("profile_*.csv")):
        t = p.with_name(p.name.replace("profile_", "truth_", 1))
        out.append((p, t if t.exists() else None))
    return out


def atomic_write_bytes(path, data: bytes):
    """Write via a temporary file and rename; used by the compensation cache."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)
