"""File formats: dataset CSVs, count matrices, attribution output, reports.

Every CSV starts with one comment line ``# skattr-meta {json}`` embedding at
least the seed and a config hash, so any output can be traced back to its
inputs and re-runs can be compared byte for byte. Dates are ISO-8601 and
money is integer cents in files, except attribution output which is the
USD decimal its consumers expect. CSVs are RFC-4180 with header rows.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections.abc import Iterable, Mapping, Sequence
from datetime import date, datetime
from pathlib import Path

from .errors import ConfigError, CsvFormatError, ReferentialError
from .metrics import AttributionReport, WindowPoint
from .model import FLAG, PURCHASE, SESSION, CampaignKey, Event, UserRecord, organic_key, usd
from .postback import CountMatrix
from .schema import VALUE_RANGE

META_PREFIX = "# skattr-meta "

USER_FIELDS = ("id", "registration_date", "alpha", "group")
EVENT_FIELDS = ("user_id", "timestamp", "kind", "amount_cents", "flag_index")
COUNT_FIELDS = ("group", "week", "conversion_value", "alpha", "count")
ATTR_FIELDS = ("group", "week", "alpha", "attributed_usd")


def config_hash(params: object) -> str:
    """Short stable hash of any JSON-serializable parameter bundle."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _write_csv(path: Path, meta: Mapping, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(META_PREFIX + json.dumps(dict(meta), sort_keys=True, default=str) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path, expected_header: Sequence[str]) -> tuple[dict, list[tuple[int, list[str]]]]:
    """Returns (meta, [(line_number, row), ...])."""
    if not path.exists():
        raise ConfigError(f"input file {path} does not exist")
    meta: dict = {}
    rows: list[tuple[int, list[str]]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        line_no = 1
        if first.startswith(META_PREFIX):
            try:
                meta = json.loads(first[len(META_PREFIX):])
            except json.JSONDecodeError as exc:
                raise CsvFormatError(f"{path}:1: bad meta line: {exc}") from exc
            header_line = fh.readline()
            line_no = 2
        else:
            header_line = first
        header = next(csv.reader([header_line])) if header_line else []
        if header != list(expected_header):
            raise CsvFormatError(
                f"{path}:{line_no}: expected header {','.join(expected_header)}, "
                f"got {','.join(header)}"
            )
        for row in csv.reader(fh):
            line_no += 1
            if row:
                rows.append((line_no, row))
    return meta, rows


def _parse_int(text: str, path: Path, line: int, field: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise CsvFormatError(f"{path}:{line}: {field} must be an integer, got {text!r}") from exc


def save_users(path: str | Path, users: Sequence[UserRecord], meta: Mapping) -> None:
    rows = [
        (u.id, u.registration_date.isoformat(), u.origin.alpha, u.group)
        for u in sorted(users, key=lambda u: u.id)
    ]
    _write_csv(Path(path), meta, USER_FIELDS, rows)


def save_events(path: str | Path, users: Sequence[UserRecord], meta: Mapping) -> None:
    rows = []
    for u in sorted(users, key=lambda u: u.id):
        for e in u.events:
            rows.append(
                (
                    u.id,
                    e.timestamp.isoformat(),
                    e.kind,
                    e.amount if e.amount is not None else "",
                    e.flag_index if e.flag_index is not None else "",
                )
            )
    _write_csv(Path(path), meta, EVENT_FIELDS, rows)


def load_users(
    user_csv: str | Path,
    events_csv: str | Path | None = None,
    organic_alpha: int | None = None,
) -> tuple[list[UserRecord], dict]:
    """Load and validate the user table, attaching events when given.

    The organic sentinel comes from the argument or the file meta; rows with
    alpha beyond the sentinel are rejected (the combined id space is bounded
    by it). An empty or missing events file yields zero-revenue users.
    """
    upath = Path(user_csv)
    meta, rows = _read_csv(upath, USER_FIELDS)
    if organic_alpha is None:
        organic_alpha = meta.get("organic_alpha")
    raw: dict[int, tuple[date, int, str]] = {}
    for line, row in rows:
        if len(row) != len(USER_FIELDS):
            raise CsvFormatError(f"{upath}:{line}: expected {len(USER_FIELDS)} columns")
        uid = _parse_int(row[0], upath, line, "id")
        try:
            reg = date.fromisoformat(row[1])
        except ValueError as exc:
            raise CsvFormatError(f"{upath}:{line}: bad registration_date {row[1]!r}") from exc
        alpha = _parse_int(row[2], upath, line, "alpha")
        if alpha < 0:
            raise CsvFormatError(f"{upath}:{line}: alpha must be >= 0")
        if organic_alpha is not None and alpha > organic_alpha:
            raise ReferentialError(
                f"{upath}:{line}: alpha {alpha} exceeds the organic sentinel {organic_alpha}"
            )
        if not row[3]:
            raise CsvFormatError(f"{upath}:{line}: group must be non-empty")
        if uid in raw:
            raise CsvFormatError(f"{upath}:{line}: duplicate user id {uid}")
        raw[uid] = (reg, alpha, row[3])

    events: dict[int, list[Event]] = {uid: [] for uid in raw}
    if events_csv is not None and Path(events_csv).exists():
        epath = Path(events_csv)
        _, erows = _read_csv(epath, EVENT_FIELDS)
        for line, row in erows:
            if len(row) != len(EVENT_FIELDS):
                raise CsvFormatError(f"{epath}:{line}: expected {len(EVENT_FIELDS)} columns")
            uid = _parse_int(row[0], epath, line, "user_id")
            if uid not in raw:
                raise ReferentialError(f"{epath}:{line}: event references unknown user {uid}")
            try:
                ts = datetime.fromisoformat(row[1])
            except ValueError as exc:
                raise CsvFormatError(f"{epath}:{line}: bad timestamp {row[1]!r}") from exc
            kind = row[2]
            if kind not in (SESSION, PURCHASE, FLAG):
                raise CsvFormatError(f"{epath}:{line}: unknown event kind {kind!r}")
            amount = _parse_int(row[3], epath, line, "amount_cents") if row[3] else None
            flag_index = _parse_int(row[4], epath, line, "flag_index") if row[4] else None
            try:
                events[uid].append(Event(ts, kind, amount=amount, flag_index=flag_index))
            except ConfigError as exc:
                raise CsvFormatError(f"{epath}:{line}: {exc}") from exc

    users: list[UserRecord] = []
    for uid in sorted(raw):
        reg, alpha, group = raw[uid]
        origin = organic_key(alpha) if alpha == organic_alpha else CampaignKey(alpha)
        try:
            users.append(
                UserRecord(
                    id=uid,
                    registration_date=reg,
                    origin=origin,
                    events=tuple(events[uid]),
                    group=group,
                )
            )
        except ConfigError as exc:
            raise CsvFormatError(f"{upath}: user {uid}: {exc}") from exc
    return users, meta


def save_dataset(out_dir: str | Path, users: Sequence[UserRecord], meta: Mapping) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "users": out / "users.csv",
        "events": out / "events.csv",
        "meta": out / "meta.json",
    }
    save_users(paths["users"], users, meta)
    save_events(paths["events"], users, meta)
    with open(paths["meta"], "w", encoding="utf-8") as fh:
        json.dump(dict(meta), fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return paths


def save_counts(
    path: str | Path,
    matrices: Mapping[tuple[str, str], CountMatrix],
    meta: Mapping,
) -> None:
    """Write count matrices; suppressed cells are empty, the null row explicit."""
    first = next(iter(matrices.values()), None)
    full_meta = dict(meta)
    if first is not None:
        # The matrices are the source of truth for structural metadata.
        full_meta["columns"] = [k.alpha for k in first.columns]
        org = [k.alpha for k in first.columns if k.organic]
        if org:
            full_meta["organic_alpha"] = org[0]
        full_meta["privacy_applied"] = first.privacy_applied
    rows = []
    for (group, week) in sorted(matrices):
        m = matrices[(group, week)]
        for v in range(VALUE_RANGE):
            suppressed = v in m.suppressed
            for j, key in enumerate(m.columns):
                count = m.rows[v][j]
                if suppressed:
                    rows.append((group, week, v, key.alpha, ""))
                elif count:
                    rows.append((group, week, v, key.alpha, count))
        if m.null_row is not None:
            for j, key in enumerate(m.columns):
                rows.append((group, week, "null", key.alpha, m.null_row[j]))
    _write_csv(Path(path), full_meta, COUNT_FIELDS, rows)


def load_counts(path: str | Path) -> tuple[dict[tuple[str, str], CountMatrix], dict]:
    cpath = Path(path)
    meta, rows = _read_csv(cpath, COUNT_FIELDS)
    if "columns" not in meta:
        raise CsvFormatError(f"{cpath}: meta line lacks the column list")
    organic_alpha = meta.get("organic_alpha")
    columns = tuple(
        organic_key(a) if a == organic_alpha else CampaignKey(a) for a in meta["columns"]
    )
    col_index = {k.alpha: j for j, k in enumerate(columns)}
    privacy_applied = bool(meta.get("privacy_applied", False))

    grids: dict[tuple[str, str], list[list[int]]] = {}
    nulls: dict[tuple[str, str], list[int]] = {}
    suppressed: dict[tuple[str, str], set[int]] = {}
    for line, row in rows:
        if len(row) != len(COUNT_FIELDS):
            raise CsvFormatError(f"{cpath}:{line}: expected {len(COUNT_FIELDS)} columns")
        group, week, v_text, alpha_text, count_text = row
        alpha = _parse_int(alpha_text, cpath, line, "alpha")
        if alpha not in col_index:
            raise ReferentialError(f"{cpath}:{line}: alpha {alpha} not in declared columns")
        cell = (group, week)
        if cell not in grids:
            grids[cell] = [[0] * len(columns) for _ in range(VALUE_RANGE)]
            nulls[cell] = [0] * len(columns)
            suppressed[cell] = set()
        if v_text == "null":
            if not privacy_applied:
                raise CsvFormatError(f"{cpath}:{line}: null row in a pre-privacy file")
            nulls[cell][col_index[alpha]] = _parse_int(count_text, cpath, line, "count")
            continue
        v = _parse_int(v_text, cpath, line, "conversion_value")
        if not 0 <= v < VALUE_RANGE:
            raise CsvFormatError(f"{cpath}:{line}: conversion_value out of range")
        if count_text == "":
            suppressed[cell].add(v)
        else:
            grids[cell][v][col_index[alpha]] = _parse_int(count_text, cpath, line, "count")

    matrices: dict[tuple[str, str], CountMatrix] = {}
    for cell in sorted(grids):
        group, week = cell
        for v in suppressed[cell]:
            if any(grids[cell][v]):
                raise CsvFormatError(
                    f"{cpath}: ({group}, {week}) value {v} mixes counts and suppression"
                )
        matrices[cell] = CountMatrix(
            group=group,
            week=week,
            columns=columns,
            rows=tuple(tuple(r) for r in grids[cell]),
            suppressed=frozenset(suppressed[cell]),
            null_row=tuple(nulls[cell]) if privacy_applied else None,
            privacy_applied=privacy_applied,
        )
    return matrices, meta


def save_attribution(
    path: str | Path,
    attributed: Mapping[tuple[str, str, CampaignKey], int],
    meta: Mapping,
) -> None:
    """Write `group,week,alpha,attributed_usd` rows (cents already rounded)."""
    rows = [
        (group, week, key.alpha, usd(cents))
        for (group, week, key), cents in sorted(
            attributed.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].alpha)
        )
    ]
    _write_csv(Path(path), meta, ATTR_FIELDS, rows)


def parse_usd(text: str) -> int:
    """Parse a USD decimal string into exact cents."""
    neg = text.startswith("-")
    body = text[1:] if neg else text
    if "." in body:
        dollars, _, cents = body.partition(".")
        if len(cents) != 2 or not (dollars + cents).isdigit():
            raise CsvFormatError(f"bad USD amount {text!r}")
        value = int(dollars) * 100 + int(cents)
    else:
        if not body.isdigit():
            raise CsvFormatError(f"bad USD amount {text!r}")
        value = int(body) * 100
    return -value if neg else value


def load_attribution(path: str | Path) -> tuple[dict[tuple[str, str, int], int], dict]:
    apath = Path(path)
    meta, rows = _read_csv(apath, ATTR_FIELDS)
    out: dict[tuple[str, str, int], int] = {}
    for line, row in rows:
        if len(row) != len(ATTR_FIELDS):
            raise CsvFormatError(f"{apath}:{line}: expected {len(ATTR_FIELDS)} columns")
        group, week, alpha_text, amount = row
        alpha = _parse_int(alpha_text, apath, line, "alpha")
        out[(group, week, alpha)] = parse_usd(amount)
    return out, meta


def report_to_dict(report: AttributionReport) -> dict:
    return {
        "metadata": report.metadata,
        "cells": [
            {
                "schema": c.schema,
                "p": c.p,
                "mode": c.mode,
                "lambda": c.lam,
                "level": c.level,
                "weekly_errors_usd": {w: e / 100.0 for w, e in c.weekly_errors},
                "aggregate_error_usd": c.aggregate_error / 100.0,
                "normalized_score": c.normalized_score,
            }
            for c in report.cells
        ],
        "window_curve": None
        if report.window_curve is None
        else [
            {"lo_day": w.lo_day, "hi_day": w.hi_day, "error_usd": w.error / 100.0}
            for w in report.window_curve
        ],
    }


def save_report(path: str | Path, report: AttributionReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_grid_csv(path: str | Path, report: AttributionReport) -> None:
    header = ("schema", "p", "mode", "lambda", "level", "aggregate_error_usd", "normalized_score")
    rows = [
        (
            c.schema,
            c.p,
            c.mode,
            "" if c.lam is None else f"{c.lam:g}",
            c.level,
            repr(c.aggregate_error / 100.0),
            "" if c.normalized_score is None else repr(c.normalized_score),
        )
        for c in report.cells
    ]
    meta = {"seed": report.metadata.get("seed"), "config_hash": report.metadata.get("config_hash")}
    _write_csv(Path(path), meta, header, rows)


def save_window_csv(path: str | Path, points: Sequence[WindowPoint], meta: Mapping) -> None:
    rows = [(f"{w.lo_day}-{w.hi_day}", repr(w.error / 100.0)) for w in points]
    _write_csv(Path(path), meta, ("window", "error_usd"), rows)
