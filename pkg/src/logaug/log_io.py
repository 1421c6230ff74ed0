"""Event-log ingestion and serialization: XES 1.0, mapped CSV, canonical JSON.

All readers accept bytes, a binary file object, or a path; gzip input is
detected transparently from the magic bytes. Writers produce deterministic
bytes for a fixed log (gzip streams are written with a zeroed mtime).
"""

from __future__ import annotations

import csv
import gzip
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from xml.etree import ElementTree

from .log_model import (
    CATEGORICAL,
    LIFECYCLE_COMPLETE,
    NUMERIC,
    Event,
    EventLog,
    make_log,
    make_trace,
)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

_XES_CASE_KEY = "concept:name"
_XES_ACTIVITY_KEY = "concept:name"
_XES_RESOURCE_KEY = "org:resource"
_XES_TIME_KEY = "time:timestamp"
_XES_LIFECYCLE_KEY = "lifecycle:transition"


class LogParseError(ValueError):
    """Raised when an input stream cannot be turned into an EventLog."""


class MappingError(ValueError):
    """Raised when a CSV column-mapping config is unusable."""


@dataclass
class CsvMapping:
    """Column mapping for CSV ingestion/export.

    ``timestamp_format`` is a strptime format string; parsed naive timestamps
    are taken as UTC. ``attributes`` maps extra column names to "numeric" or
    "categorical".
    """

    case: str
    activity: str
    timestamp: str
    timestamp_format: str = "%Y-%m-%d %H:%M:%S"
    resource: str | None = None
    lifecycle: str | None = None
    attributes: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "CsvMapping":
        for required in ("case", "activity", "timestamp"):
            if required not in raw:
                raise MappingError(f"CSV mapping misses required key {required!r}")
        attrs = dict(raw.get("attributes", {}))
        for name, kind in attrs.items():
            if kind not in (NUMERIC, CATEGORICAL):
                raise MappingError(f"attribute {name!r} has unknown type {kind!r}")
        return cls(
            case=raw["case"],
            activity=raw["activity"],
            timestamp=raw["timestamp"],
            timestamp_format=raw.get("timestamp_format", "%Y-%m-%d %H:%M:%S"),
            resource=raw.get("resource"),
            lifecycle=raw.get("lifecycle"),
            attributes=attrs,
        )

    def to_dict(self) -> dict:
        out = {
            "case": self.case,
            "activity": self.activity,
            "timestamp": self.timestamp,
            "timestamp_format": self.timestamp_format,
            "attributes": dict(self.attributes),
        }
        if self.resource is not None:
            out["resource"] = self.resource
        if self.lifecycle is not None:
            out["lifecycle"] = self.lifecycle
        return out


def _as_bytes(source) -> bytes:
    if isinstance(source, bytes):
        data = source
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
    else:
        with open(source, "rb") as handle:
            data = handle.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def parse_timestamp_ms(text: str) -> int:
    """ISO-8601 timestamp -> integer ms since the Unix epoch (UTC).

    Accepts a trailing Z and naive timestamps (assumed UTC). Exact integer
    arithmetic, no float rounding.
    """
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError as exc:
        raise LogParseError(f"cannot parse timestamp {text!r}: {exc}") from exc
    return _datetime_to_ms(stamp)


def _datetime_to_ms(stamp: datetime) -> int:
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    delta = stamp - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def format_timestamp(ms: int) -> str:
    stamp = _EPOCH + timedelta(milliseconds=ms)
    return stamp.strftime("%Y-%m-%dT%H:%M:%S.") + f"{stamp.microsecond // 1000:03d}+00:00"


# --- XES ---

def parse_xes(source) -> EventLog:
    """Parse an XES 1.0 stream into an EventLog.

    Standard extension keys map to the model fields; every other event
    attribute is kept, typed numeric for <int>/<float> elements (when
    consistently so) and categorical otherwise. Events inside each trace are
    re-sorted by timestamp; lifecycle defaults to "complete".
    """
    data = _as_bytes(source)
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        raise LogParseError(f"malformed XES XML at line {exc.position[0]}: {exc}") from exc
    tag = root.tag.split("}")[-1]
    if tag != "log":
        raise LogParseError(f"root element is <{tag}>, expected <log>")

    traces = []
    attr_numeric = {}
    for index, trace_el in enumerate(_children(root, "trace")):
        case_id = None
        for child in trace_el:
            if _local(child.tag) in ("string", "int", "float", "date", "boolean", "id"):
                if child.get("key") == _XES_CASE_KEY:
                    case_id = child.get("value")
        if case_id is None:
            case_id = f"trace-{index}"
        events = []
        for event_el in _children(trace_el, "event"):
            events.append(_parse_xes_event(event_el, case_id, attr_numeric))
        traces.append(make_trace(case_id, events))

    schema = {
        name: (NUMERIC if is_num else CATEGORICAL)
        for name, is_num in sorted(attr_numeric.items())
    }
    return _coerce_schema(make_log(traces, schema))


def _local(tag: str) -> str:
    return tag.split("}")[-1]


def _children(element, local_name):
    for child in element:
        if _local(child.tag) == local_name:
            yield child


def _parse_xes_event(event_el, case_id, attr_numeric) -> Event:
    activity = None
    resource = None
    timestamp = None
    lifecycle = LIFECYCLE_COMPLETE
    attributes = {}
    for child in event_el:
        kind = _local(child.tag)
        key = child.get("key")
        value = child.get("value")
        if key is None:
            continue
        if key == _XES_ACTIVITY_KEY:
            activity = value
        elif key == _XES_RESOURCE_KEY:
            resource = value
        elif key == _XES_TIME_KEY:
            timestamp = parse_timestamp_ms(value)
        elif key == _XES_LIFECYCLE_KEY:
            lifecycle = (value or LIFECYCLE_COMPLETE).lower()
        else:
            if kind in ("int", "float"):
                attributes[key] = float(value)
                attr_numeric[key] = attr_numeric.get(key, True)
            else:
                attributes[key] = value
                attr_numeric[key] = False
    if timestamp is None:
        raise LogParseError(f"event without timestamp in case {case_id!r}")
    if activity is None:
        raise LogParseError(f"event without activity in case {case_id!r}")
    return Event(
        case_id=case_id,
        activity=activity,
        timestamp_ms=timestamp,
        resource=resource,
        lifecycle=lifecycle,
        attributes=attributes,
    )


def _coerce_schema(log: EventLog) -> EventLog:
    # An attribute seen as <float> in one event and <string> in another must
    # collapse to categorical, with all its values stringified.
    mixed = {
        name
        for name, kind in log.attribute_schema.items()
        if kind == CATEGORICAL
        and any(
            isinstance(e.attributes.get(name), float) for t in log for e in t
        )
    }
    if not mixed:
        return log
    traces = []
    for trace in log:
        events = []
        for event in trace:
            attrs = {
                name: (_num_to_str(v) if name in mixed else v)
                for name, v in event.attributes.items()
            }
            events.append(
                Event(
                    case_id=event.case_id,
                    activity=event.activity,
                    timestamp_ms=event.timestamp_ms,
                    resource=event.resource,
                    lifecycle=event.lifecycle,
                    attributes=attrs,
                )
            )
        traces.append(make_trace(trace.case_id, events))
    return make_log(traces, dict(log.attribute_schema))


def _num_to_str(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_xes(log: EventLog, compress: bool = False) -> bytes:
    """Serialize an EventLog to XES bytes (optionally gzip, mtime zeroed)."""
    root = ElementTree.Element("log", {"xes.version": "1.0"})
    for trace in log:
        trace_el = ElementTree.SubElement(root, "trace")
        _xes_attr(trace_el, "string", _XES_CASE_KEY, trace.case_id)
        for event in trace:
            event_el = ElementTree.SubElement(trace_el, "event")
            _xes_attr(event_el, "string", _XES_ACTIVITY_KEY, event.activity)
            _xes_attr(event_el, "date", _XES_TIME_KEY, format_timestamp(event.timestamp_ms))
            _xes_attr(event_el, "string", _XES_LIFECYCLE_KEY, event.lifecycle)
            if event.resource is not None:
                _xes_attr(event_el, "string", _XES_RESOURCE_KEY, event.resource)
            for name, value in event.attributes.items():
                if log.attribute_schema.get(name) == NUMERIC:
                    _xes_attr(event_el, "float", name, repr(float(value)))
                else:
                    _xes_attr(event_el, "string", name, str(value))
    body = ElementTree.tostring(root, encoding="utf-8", xml_declaration=True)
    if compress:
        return gzip.compress(body, mtime=0)
    return body


def _xes_attr(parent, kind, key, value):
    ElementTree.SubElement(parent, kind, {"key": key, "value": value})


# --- CSV ---

def parse_csv(source, mapping: CsvMapping) -> EventLog:
    """Parse a mapped CSV stream into an EventLog.

    Rows are grouped by the case column and time-ordered within each trace;
    numeric attribute columns must parse as float on every non-empty row.
    """
    if isinstance(mapping, dict):
        mapping = CsvMapping.from_dict(mapping)
    text = _as_bytes(source).decode("utf-8-sig")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise LogParseError("CSV input has no header row")
    needed = [mapping.case, mapping.activity, mapping.timestamp]
    needed += [c for c in (mapping.resource, mapping.lifecycle) if c]
    needed += list(mapping.attributes)
    missing = [c for c in needed if c not in reader.fieldnames]
    if missing:
        raise MappingError(f"CSV is missing mapped columns: {missing}")

    by_case = {}
    for row_number, row in enumerate(reader, start=2):
        raw_time = row[mapping.timestamp]
        try:
            stamp = datetime.strptime(raw_time, mapping.timestamp_format)
        except ValueError as exc:
            raise LogParseError(
                f"row {row_number}: cannot parse timestamp {raw_time!r} "
                f"with format {mapping.timestamp_format!r}"
            ) from exc
        attributes = {}
        for name, kind in mapping.attributes.items():
            raw = row.get(name, "")
            if raw is None or raw == "":
                continue
            if kind == NUMERIC:
                try:
                    attributes[name] = float(raw)
                except ValueError as exc:
                    raise LogParseError(
                        f"row {row_number}: attribute {name!r} value {raw!r} is not numeric"
                    ) from exc
            else:
                attributes[name] = raw
        case_id = row[mapping.case]
        resource = row.get(mapping.resource) if mapping.resource else None
        lifecycle = LIFECYCLE_COMPLETE
        if mapping.lifecycle:
            raw_life = row.get(mapping.lifecycle)
            if raw_life:
                lifecycle = raw_life.lower()
        by_case.setdefault(case_id, []).append(
            Event(
                case_id=case_id,
                activity=row[mapping.activity],
                timestamp_ms=_datetime_to_ms(stamp),
                resource=resource or None,
                lifecycle=lifecycle,
                attributes=attributes,
            )
        )
    traces = [make_trace(case_id, events) for case_id, events in by_case.items()]
    schema = {name: kind for name, kind in sorted(mapping.attributes.items())}
    return make_log(traces, schema)


def write_csv(log: EventLog, mapping: CsvMapping) -> bytes:
    """Serialize an EventLog to CSV bytes using the same column mapping
    vocabulary as ingestion."""
    if isinstance(mapping, dict):
        mapping = CsvMapping.from_dict(mapping)
    buffer = io.StringIO()
    columns = [mapping.case, mapping.activity, mapping.timestamp]
    if mapping.resource:
        columns.append(mapping.resource)
    if mapping.lifecycle:
        columns.append(mapping.lifecycle)
    columns += list(mapping.attributes)
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for trace in log:
        for event in trace:
            stamp = _EPOCH + timedelta(milliseconds=event.timestamp_ms)
            row = {
                mapping.case: event.case_id,
                mapping.activity: event.activity,
                mapping.timestamp: stamp.strftime(mapping.timestamp_format),
            }
            if mapping.resource:
                row[mapping.resource] = event.resource or ""
            if mapping.lifecycle:
                row[mapping.lifecycle] = event.lifecycle
            for name in mapping.attributes:
                value = event.attributes.get(name, "")
                row[name] = value
            writer.writerow(row)
    return buffer.getvalue().encode("utf-8")


# --- canonical JSON ---

def log_to_json(log: EventLog) -> bytes:
    """Canonical JSON encoding of an EventLog (debugging / byte-compare)."""
    payload = {
        "attribute_schema": dict(sorted(log.attribute_schema.items())),
        "traces": [
            {
                "case_id": trace.case_id,
                "events": [
                    {
                        "activity": e.activity,
                        "timestamp_ms": e.timestamp_ms,
                        "resource": e.resource,
                        "lifecycle": e.lifecycle,
                        "attributes": e.attributes,
                    }
                    for e in trace
                ],
            }
            for trace in log
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def log_from_json(source) -> EventLog:
    payload = json.loads(_as_bytes(source))
    traces = []
    for raw_trace in payload["traces"]:
        events = [
            Event(
                case_id=raw_trace["case_id"],
                activity=raw["activity"],
                timestamp_ms=raw["timestamp_ms"],
                resource=raw["resource"],
                lifecycle=raw["lifecycle"],
                attributes=raw["attributes"],
            )
            for raw in raw_trace["events"]
        ]
        traces.append(make_trace(raw_trace["case_id"], events))
    return make_log(traces, payload["attribute_schema"])


def load_log(path, mapping: CsvMapping | None = None) -> EventLog:
    """Load a log from a path, picking the parser from the extension
    (.xes / .xes.gz / .csv / .json)."""
    name = str(path)
    lowered = name[:-3] if name.endswith(".gz") else name
    if lowered.endswith(".xes"):
        return parse_xes(path)
    if lowered.endswith(".csv"):
        if mapping is None:
            raise MappingError(f"CSV input {name!r} needs a column mapping")
        return parse_csv(path, mapping)
    if lowered.endswith(".json"):
        return log_from_json(path)
    raise MappingError(f"cannot infer log format from extension of {name!r}")
