"""Durable, queryable telemetry persistence.

One append-only text log per station at ``<data_dir>/<station>.log``; each
line is ``<received_at>|<encoded frame>`` using the telemetry wire grammar.
Indexes (per-station order, seen-seq set) live in memory and are rebuilt by
replaying the logs at startup.  Replay is tolerant: an interior line that
fails to decode is skipped with a warning, a final partial line (torn last
write) is silently dropped.
"""

from __future__ import annotations

import bisect
import logging
import os
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .telemetry import FrameError, TelemetryFrame, decode_frame, encode_frame, validate_station_id

log = logging.getLogger(__name__)


class AppendResult(Enum):
    APPENDED = "APPENDED"
    DUPLICATE = "DUPLICATE"


class StorageFailure(Exception):
    """I/O failure while appending; distinct from a duplicate."""


class UnknownStation(LookupError):
    """No record was ever stored for this station."""


@dataclass(frozen=True)
class StationRecord:
    """A persisted frame plus the server-side receive time (unix seconds)."""

    frame: TelemetryFrame
    received_at: int

    def __post_init__(self):
        if self.received_at < 0:
            raise ValueError(f"received_at must be >= 0, got {self.received_at}")


def _sort_key(record: StationRecord):
    return (record.frame.timestamp, record.frame.seq)


class _StationLog:
    def __init__(self, path: Path):
        self.path = path
        self.records: list[StationRecord] = []  # sorted by (timestamp, seq)
        self.seqs: set[int] = set()
        self.last_received_at = 0
        self.handle = None

    def index(self, record: StationRecord) -> None:
        bisect.insort(self.records, record, key=_sort_key)
        self.seqs.add(record.frame.seq)
        self.last_received_at = max(self.last_received_at, record.received_at)


class TelemetryStore:
    """Append-only station telemetry store with (station, seq) dedup.

    Thread-safe: appends are serialized, queries see only fully appended
    records.  ``fsync=True`` forces an fsync per append for power-loss
    durability; the default flushes to the OS, which survives a process
    restart.
    """

    def __init__(self, data_dir: str | os.PathLike, fsync: bool = False):
        self._dir = Path(data_dir)
        self._fsync = fsync
        self._lock = threading.RLock()
        self._stations: dict[str, _StationLog] = {}
        self._dir.mkdir(parents=True, exist_ok=True)
        self._replay()

    # -- startup -----------------------------------------------------------

    def _replay(self) -> None:
        for path in sorted(self._dir.glob("*.log")):
            station = path.stem
            try:
                validate_station_id(station)
            except FrameError:
                log.warning("ignoring log with invalid station name: %s", path)
                continue
            self._replay_file(station, path)

    def _replay_file(self, station: str, path: Path) -> None:
        raw = path.read_bytes()
        lines = raw.split(b"\n")
        # The final split element is either '' (file ends with \n) or a torn
        # last write; both are dropped, silently.
        lines.pop()
        stlog = _StationLog(path)
        for lineno, line in enumerate(lines, start=1):
            record = self._parse_line(station, line, path, lineno)
            if record is None:
                continue
            if record.frame.seq in stlog.seqs:
                log.warning("%s:%d: duplicate seq %d, keeping first", path, lineno, record.frame.seq)
                continue
            stlog.index(record)
        if stlog.records:
            self._stations[station] = stlog

    @staticmethod
    def _parse_line(station: str, line: bytes, path: Path, lineno: int) -> StationRecord | None:
        try:
            text = line.decode("ascii")
            received_s, _, frame_s = text.partition("|")
            if not received_s.isdigit():
                raise ValueError(f"bad received_at {received_s!r}")
            frame = decode_frame(frame_s)
            if frame.station != station:
                raise ValueError(f"frame for {frame.station!r} in log of {station!r}")
            return StationRecord(frame, int(received_s))
        except (UnicodeDecodeError, ValueError) as exc:
            log.warning("%s:%d: skipping undecodable line: %s", path, lineno, exc)
            return None

    # -- operations ---------------------------------------------------------

    def append(self, frame: TelemetryFrame, received_at: int) -> AppendResult:
        """Durably append unless (station, seq) was already stored."""
        record = StationRecord(frame, received_at)
        with self._lock:
            stlog = self._stations.get(frame.station)
            if stlog is None:
                stlog = _StationLog(self._dir / f"{frame.station}.log")
            elif frame.seq in stlog.seqs:
                return AppendResult.DUPLICATE
            line = f"{received_at}|{encode_frame(frame)}\n".encode("ascii")
            try:
                if stlog.handle is None:
                    stlog.handle = open(stlog.path, "ab")
                stlog.handle.write(line)
                stlog.handle.flush()
                if self._fsync:
                    os.fsync(stlog.handle.fileno())
            except OSError as exc:
                raise StorageFailure(f"append to {stlog.path} failed: {exc}") from exc
            stlog.index(record)
            self._stations[frame.station] = stlog
            return AppendResult.APPENDED

    def query_range(self, station: str, ts_from: int, ts_to: int, limit: int = 1000) -> list[StationRecord]:
        """Records with ts_from <= timestamp <= ts_to, by (timestamp, seq), up to limit."""
        if ts_from > ts_to:
            raise ValueError(f"empty range: from {ts_from} > to {ts_to}")
        if limit < 1:
            raise ValueError(f"limit must be >= 1, got {limit}")
        with self._lock:
            stlog = self._require(station)
            records = stlog.records
            lo = bisect.bisect_left(records, ts_from, key=lambda r: r.frame.timestamp)
            hi = bisect.bisect_right(records, ts_to, key=lambda r: r.frame.timestamp)
            return records[lo:hi][:limit]

    def latest(self, station: str) -> StationRecord:
        """The record maximal by (timestamp, seq)."""
        with self._lock:
            return self._require(station).records[-1]

    def list_stations(self) -> list[tuple[str, int]]:
        """(station, last received_at) for every station ever appended, sorted by id."""
        with self._lock:
            return [(sid, self._stations[sid].last_received_at) for sid in sorted(self._stations)]

    def _require(self, station: str) -> _StationLog:
        stlog = self._stations.get(station)
        if stlog is None:
            raise UnknownStation(station)
        return stlog

    def close(self) -> None:
        with self._lock:
            for stlog in self._stations.values():
                if stlog.handle is not None:
                    stlog.handle.close()
                    stlog.handle = None

    def __enter__(self) -> "TelemetryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
