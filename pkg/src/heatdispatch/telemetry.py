"""Telemetry domain types and the text wire grammar.

A station report travels as one ASCII line:

    <station>;<seq>;<timestamp>;<t1>,...,<t8>;<p1>,...,<p8>;<mode>

Temperatures are decimal with exactly one fractional digit (optional
leading ``-``), pumps are ``0``/``1``, mode is ``AUTO``/``MANUAL``/``OFF``.
No whitespace anywhere.  The grammar is this project's own convention,
chosen so every component interoperates bit-exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

CHANNELS = 8
TEMP_MIN_TENTHS = -500   # -50.0 C
TEMP_MAX_TENTHS = 1500   # 150.0 C
SEQ_MAX = 2**32 - 1
TIMESTAMP_MAX = 2**64 - 1

_STATION_RE = re.compile(r"[A-Za-z0-9_-]{1,32}\Z")
_UINT_RE = re.compile(r"[0-9]+\Z")
_TENTHS_RE = re.compile(r"-?[0-9]+\.[0-9]\Z")


class FrameError(ValueError):
    """Telemetry decode/validation failure; names the offending field."""

    def __init__(self, field: str, message: str, index: int | None = None):
        self.field = field
        self.index = index
        where = field if index is None else f"{field}[{index}]"
        super().__init__(f"{where}: {message}")


class MalformedSyntax(FrameError):
    """Structurally bad input: wrong field count, bad separators, non-digits."""


class OutOfRange(FrameError):
    """Syntactically fine but outside the allowed value set."""


class OperatingMode(Enum):
    AUTO = "AUTO"
    MANUAL = "MANUAL"
    OFF = "OFF"

    def __str__(self) -> str:
        return self.value


def format_tenths(tenths: int) -> str:
    """Render tenths-of-degree as decimal with exactly one fractional digit."""
    sign = "-" if tenths < 0 else ""
    whole, frac = divmod(abs(tenths), 10)
    return f"{sign}{whole}.{frac}"


def parse_tenths(text: str, field: str = "temperature", index: int | None = None) -> int:
    """Parse a one-fractional-digit decimal into tenths; range is NOT checked."""
    if not _TENTHS_RE.match(text):
        raise MalformedSyntax(field, f"bad temperature literal {text!r}", index)
    negative = text.startswith("-")
    whole, frac = text.lstrip("-").split(".")
    tenths = int(whole) * 10 + int(frac)
    return -tenths if negative else tenths


@dataclass(frozen=True, order=True)
class Temperature:
    """A temperature in tenths of a degree Celsius (20.5 C is tenths=205)."""

    tenths: int

    def __post_init__(self):
        if not TEMP_MIN_TENTHS <= self.tenths <= TEMP_MAX_TENTHS:
            raise OutOfRange(
                "temperature",
                f"{format_tenths(self.tenths)} outside "
                f"[{format_tenths(TEMP_MIN_TENTHS)}, {format_tenths(TEMP_MAX_TENTHS)}]",
            )

    @classmethod
    def from_celsius(cls, celsius: float) -> "Temperature":
        return cls(round(celsius * 10))

    @classmethod
    def parse(cls, text: str, field: str = "temperature", index: int | None = None) -> "Temperature":
        tenths = parse_tenths(text, field, index)
        if not TEMP_MIN_TENTHS <= tenths <= TEMP_MAX_TENTHS:
            raise OutOfRange(field, f"{text} outside temperature bounds", index)
        return cls(tenths)

    @property
    def celsius(self) -> float:
        return self.tenths / 10.0

    def __str__(self) -> str:
        return format_tenths(self.tenths)


def validate_station_id(station: str) -> str:
    """Station ids are 1-32 chars of [A-Za-z0-9_-]; comparison is case-sensitive."""
    if not isinstance(station, str) or not _STATION_RE.match(station):
        raise OutOfRange("station", f"bad station id {station!r}")
    return station


# Pump states are plain bools: exactly two states, on (True) and off (False).


@dataclass(frozen=True)
class TelemetryFrame:
    """One station report: 8 temperatures, 8 pump states, mode, seq, timestamp."""

    station: str
    seq: int
    timestamp: int
    temps: tuple[Temperature, ...]
    pumps: tuple[bool, ...]
    mode: OperatingMode

    def __post_init__(self):
        validate_station_id(self.station)
        if not 0 <= self.seq <= SEQ_MAX:
            raise OutOfRange("seq", f"{self.seq} outside unsigned 32-bit range")
        if not 0 <= self.timestamp <= TIMESTAMP_MAX:
            raise OutOfRange("timestamp", f"{self.timestamp} outside unsigned 64-bit range")
        object.__setattr__(self, "temps", tuple(self.temps))
        object.__setattr__(self, "pumps", tuple(bool(p) for p in self.pumps))
        if len(self.temps) != CHANNELS:
            raise MalformedSyntax("temps", f"expected {CHANNELS} temperatures, got {len(self.temps)}")
        if len(self.pumps) != CHANNELS:
            raise MalformedSyntax("pumps", f"expected {CHANNELS} pump states, got {len(self.pumps)}")
        for i, t in enumerate(self.temps):
            if not isinstance(t, Temperature):
                raise MalformedSyntax("temps", f"not a Temperature: {t!r}", i)
        if not isinstance(self.mode, OperatingMode):
            raise OutOfRange("mode", f"bad mode {self.mode!r}")


def encode_frame(frame: TelemetryFrame) -> str:
    """Encode a valid frame to its canonical wire string (deterministic, ASCII)."""
    return ";".join(
        (
            frame.station,
            str(frame.seq),
            str(frame.timestamp),
            ",".join(str(t) for t in frame.temps),
            ",".join("1" if p else "0" for p in frame.pumps),
            frame.mode.value,
        )
    )


def _parse_uint(text: str, field: str, maximum: int) -> int:
    if not _UINT_RE.match(text):
        raise MalformedSyntax(field, f"not an unsigned decimal: {text!r}")
    value = int(text)
    if value > maximum:
        raise OutOfRange(field, f"{value} exceeds {maximum}")
    return value


def decode_frame(text: str) -> TelemetryFrame:
    """Parse a wire string; raises MalformedSyntax or OutOfRange, never partial.

    Accepts redundant leading zeros in numeric fields; the decoded frame
    re-encodes to the canonical form of the input.
    """
    sections = text.split(";")
    if len(sections) != 6:
        raise MalformedSyntax("frame", f"expected 6 ;-sections, got {len(sections)}")
    station_s, seq_s, ts_s, temps_s, pumps_s, mode_s = sections

    station = validate_station_id(station_s)
    seq = _parse_uint(seq_s, "seq", SEQ_MAX)
    timestamp = _parse_uint(ts_s, "timestamp", TIMESTAMP_MAX)

    temp_parts = temps_s.split(",")
    if len(temp_parts) != CHANNELS:
        raise MalformedSyntax("temps", f"expected {CHANNELS} temperatures, got {len(temp_parts)}")
    temps = tuple(Temperature.parse(p, "temps", i) for i, p in enumerate(temp_parts))

    pump_parts = pumps_s.split(",")
    if len(pump_parts) != CHANNELS:
        raise MalformedSyntax("pumps", f"expected {CHANNELS} pump states, got {len(pump_parts)}")
    pumps = []
    for i, p in enumerate(pump_parts):
        if p == "0":
            pumps.append(False)
        elif p == "1":
            pumps.append(True)
        else:
            raise MalformedSyntax("pumps", f"bad pump state {p!r}", i)

    try:
        mode = OperatingMode(mode_s)
    except ValueError:
        raise OutOfRange("mode", f"bad mode token {mode_s!r}") from None

    return TelemetryFrame(station, seq, timestamp, temps, tuple(pumps), mode)
