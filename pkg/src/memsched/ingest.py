"""Study-log ingestion: parse session-level CSV exports, collapse sessions
into one review event each, filter sparse users and items, and persist the
canonical log as line-delimited JSON."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .estimate import ReviewSequence

FORMAT_NAME = "memsched-log"
FORMAT_VERSION = 1
SECONDS_PER_DAY = 86400.0

REQUIRED_COLUMNS = (
    "p_recall", "timestamp", "delta", "user_id", "lexeme_id",
    "history_seen", "history_correct", "session_seen", "session_correct",
)


@dataclass(frozen=True)
class RawSessionRow:
    p_recall: float
    timestamp: float  # seconds
    delta: float  # seconds since the previous session of this pair
    user_id: str
    item_id: str
    history_seen: int
    history_correct: int
    session_seen: int
    session_correct: int

    def __post_init__(self):
        if not 0.0 <= self.p_recall <= 1.0:
            raise ValueError("p_recall outside [0, 1]")
        if min(self.history_seen, self.history_correct,
               self.session_seen, self.session_correct) < 0:
            raise ValueError("negative count")
        if self.session_correct > self.session_seen:
            raise ValueError("session_correct exceeds session_seen")


@dataclass
class RowError:
    line: int
    message: str


@dataclass
class CanonicalLog:
    """Collapsed, filtered review log: one ReviewSequence per (user, item)
    pair, times in days on the pair's own clock."""

    sequences: list[ReviewSequence] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def __len__(self):
        return sum(len(s) for s in self.sequences)


def parse_csv(path) -> tuple[list[RawSessionRow], list[RowError]]:
    """Typed rows plus a per-line error report; malformed rows are skipped,
    a missing required column is fatal."""
    rows: list[RawSessionRow] = []
    errors: list[RowError] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"missing required columns: {missing}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(RawSessionRow(
                    p_recall=float(rec["p_recall"]),
                    timestamp=float(rec["timestamp"]),
                    delta=float(rec["delta"]),
                    user_id=rec["user_id"],
                    item_id=rec["lexeme_id"],
                    history_seen=int(rec["history_seen"]),
                    history_correct=int(rec["history_correct"]),
                    session_seen=int(rec["session_seen"]),
                    session_correct=int(rec["session_correct"]),
                ))
            except (ValueError, TypeError, KeyError) as exc:
                errors.append(RowError(line=lineno, message=str(exc)))
    return rows, errors


def collapse_and_filter(rows: Iterable[RawSessionRow],
                        min_user_events: int = 30,
                        min_item_events: int = 30,
                        coalesce_window: float = 0.0) -> CanonicalLog:
    """One event per (user, item) session; binary success iff every recall
    in the session succeeded; drop users and items with too few events.

    Sessions are identified by timestamp per pair; timestamps closer than
    coalesce_window seconds merge into one session. The user/item filters
    interact, so they run to a fixed point (making the operation idempotent).
    """
    by_pair: dict[tuple[str, str], list[RawSessionRow]] = {}
    for row in rows:
        by_pair.setdefault((row.user_id, row.item_id), []).append(row)

    pairs: dict[tuple[str, str], list[tuple[float, int, float]]] = {}
    for key, items in by_pair.items():
        items.sort(key=lambda r: r.timestamp)
        sessions: list[list[RawSessionRow]] = []
        for row in items:
            if sessions and row.timestamp - sessions[-1][-1].timestamp \
                    <= coalesce_window:
                sessions[-1].append(row)
            else:
                sessions.append([row])
        origin = items[0].timestamp - max(items[0].delta, 1.0)
        events = []
        for sess in sessions:
            seen = sum(r.session_seen for r in sess)
            correct = sum(r.session_correct for r in sess)
            p = correct / seen if seen else float(np.mean(
                [r.p_recall for r in sess]))
            t = (sess[0].timestamp - origin) / SECONDS_PER_DAY
            events.append((t, int(p == 1.0), p))
        pairs[key] = events

    # fixed-point filtering: dropping a user can starve an item and back
    while True:
        user_counts: dict[str, int] = {}
        item_counts: dict[str, int] = {}
        for (user, item), events in pairs.items():
            user_counts[user] = user_counts.get(user, 0) + len(events)
            item_counts[item] = item_counts.get(item, 0) + len(events)
        keep = {k: ev for k, ev in pairs.items()
                if user_counts[k[0]] >= min_user_events
                and item_counts[k[1]] >= min_item_events}
        if len(keep) == len(pairs):
            break
        pairs = keep

    sequences = []
    for (user, item) in sorted(pairs):
        events = pairs[(user, item)]
        t = np.array([e[0] for e in events])
        sequences.append(ReviewSequence(
            user=user, item=item, t=t,
            r=np.array([e[1] for e in events]),
            p=np.array([e[2] for e in events]),
            t0=0.0, t_end=float(t[-1])))
    return CanonicalLog(sequences=sequences)


def persist(log: CanonicalLog, path) -> None:
    """Line-delimited canonical format: one schema header line, then one
    event per line."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": FORMAT_NAME,
                             "version": log.version,
                             "events": len(log)}) + "\n")
        for seq in log.sequences:
            for k in range(len(seq)):
                fh.write(json.dumps({
                    "user": seq.user, "item": seq.item,
                    "t": seq.t[k], "r": int(seq.r[k]), "p": seq.p[k],
                }) + "\n")


def load(path) -> CanonicalLog:
    with open(path) as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad header line: {exc}") from exc
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"unrecognized format {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported format version {header.get('version')!r}, "
                f"expected {FORMAT_VERSION}")
        expected = header.get("events", 0)

        groups: dict[tuple[str, str], list[dict]] = {}
        count = 0
        while True:
            offset = fh.tell()
            line = fh.readline()
            if not line:
                break
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(
                    f"corrupt record at byte offset {offset}: {exc}") from exc
            groups.setdefault((rec["user"], rec["item"]), []).append(rec)
            count += 1
        if count != expected:
            raise ValueError(
                f"truncated log: header promises {expected} events, found "
                f"{count} (file ends at byte offset {fh.tell()})")

    sequences = []
    for (user, item) in sorted(groups):
        recs = groups[(user, item)]
        t = np.array([r["t"] for r in recs])
        sequences.append(ReviewSequence(
            user=user, item=item, t=t,
            r=np.array([r["r"] for r in recs]),
            p=np.array([r["p"] for r in recs]),
            t0=0.0, t_end=float(t[-1])))
    return CanonicalLog(sequences=sequences)
