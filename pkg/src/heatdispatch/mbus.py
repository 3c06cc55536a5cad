"""M-Bus long-frame codec for the local link between gateway and heat meter.

Long frame layout (start 0x68, doubled length byte, arithmetic checksum,
stop 0x16):

    0x68 L L 0x68 C A CI <user data ...> CS 0x16

with L = 3 + len(user data) and CS = sum(C, A, CI, user data) mod 256.
Link-level acknowledgement is the single byte 0xE5.  Instead of DIF/VIF
record chains the meter answers with a fixed 8-byte reading payload under
CI 0x72: energy (u32 LE, Wh), flow and return temperature (i16 LE, tenths
of a degree C each).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .telemetry import Temperature

ACK = 0xE5
FRAME_START = 0x68
FRAME_STOP = 0x16
MAX_USER_DATA = 252

# C/CI values used on the simulated link
C_REQUEST = 0x5B      # gateway asks the meter for its current reading
C_RESPONSE = 0x08     # meter answers
CI_REQUEST = 0x51
CI_METER_READING = 0x72

_READING_STRUCT = struct.Struct("<Ihh")

ENERGY_MAX = 2**32 - 1


class MbusError(ValueError):
    """Frame parse failure; `offset` is the byte position that broke the parse."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class BadStart(MbusError):
    pass


class LengthMismatch(MbusError):
    pass


class BadChecksum(MbusError):
    pass


class BadStop(MbusError):
    pass


class Truncated(MbusError):
    pass


class WrongLength(ValueError):
    """Meter payload is not exactly 8 bytes."""


@dataclass(frozen=True)
class MbusFrame:
    c_field: int
    a_field: int
    ci_field: int
    user_data: bytes = b""

    def __post_init__(self):
        for name in ("c_field", "a_field", "ci_field"):
            value = getattr(self, name)
            if not 0 <= value <= 0xFF:
                raise ValueError(f"{name} not a byte: {value}")
        object.__setattr__(self, "user_data", bytes(self.user_data))
        if len(self.user_data) > MAX_USER_DATA:
            raise ValueError(f"user_data too long: {len(self.user_data)} > {MAX_USER_DATA}")


def checksum(data: bytes) -> int:
    """Arithmetic checksum: sum of all bytes modulo 256."""
    return sum(data) & 0xFF


def build_long_frame(frame: MbusFrame) -> bytes:
    body = bytes((frame.c_field, frame.a_field, frame.ci_field)) + frame.user_data
    length = len(body)  # 3 + len(user_data), <= 255 by MbusFrame invariant
    return bytes((FRAME_START, length, length, FRAME_START)) + body + bytes((checksum(body), FRAME_STOP))


def parse_long_frame(data: bytes) -> MbusFrame:
    """Parse bytes produced by build_long_frame; rejects any corruption.

    Raises BadStart, LengthMismatch, BadChecksum, BadStop or Truncated,
    each carrying the offending byte offset.
    """
    data = bytes(data)
    if len(data) == 0:
        raise Truncated("empty input", 0)
    if data[0] != FRAME_START:
        raise BadStart(f"expected 0x{FRAME_START:02X}, got 0x{data[0]:02X}", 0)
    if len(data) < 4:
        raise Truncated("header cut short", len(data))
    if data[1] != data[2]:
        raise LengthMismatch(f"length bytes disagree: 0x{data[1]:02X} != 0x{data[2]:02X}", 2)
    length = data[1]
    if length < 3:
        raise LengthMismatch(f"declared length {length} cannot hold C, A, CI", 1)
    if data[3] != FRAME_START:
        raise BadStart(f"expected 0x{FRAME_START:02X}, got 0x{data[3]:02X}", 3)
    total = length + 6  # 4 header + body + checksum + stop
    if len(data) < total:
        raise Truncated(f"need {total} bytes, got {len(data)}", len(data))
    if len(data) > total:
        raise LengthMismatch(f"{len(data) - total} trailing bytes after frame", total)
    body = data[4 : 4 + length]
    cs = data[4 + length]
    if cs != checksum(body):
        raise BadChecksum(f"expected 0x{checksum(body):02X}, got 0x{cs:02X}", 4 + length)
    if data[5 + length] != FRAME_STOP:
        raise BadStop(f"expected 0x{FRAME_STOP:02X}, got 0x{data[5 + length]:02X}", 5 + length)
    return MbusFrame(body[0], body[1], body[2], body[3:])


@dataclass(frozen=True)
class MeterReading:
    """Heat-flow meter record: accumulated energy plus flow/return temperature."""

    energy_wh: int
    flow_temp: Temperature
    return_temp: Temperature

    def __post_init__(self):
        if not 0 <= self.energy_wh <= ENERGY_MAX:
            raise ValueError(f"energy_wh outside unsigned 32-bit range: {self.energy_wh}")


def encode_meter_payload(reading: MeterReading) -> bytes:
    return _READING_STRUCT.pack(
        reading.energy_wh, reading.flow_temp.tenths, reading.return_temp.tenths
    )


def decode_meter_payload(data: bytes) -> MeterReading:
    """Inverse of encode_meter_payload; raises WrongLength or telemetry.OutOfRange."""
    data = bytes(data)
    if len(data) != _READING_STRUCT.size:
        raise WrongLength(f"expected {_READING_STRUCT.size} bytes, got {len(data)}")
    energy, flow_tenths, return_tenths = _READING_STRUCT.unpack(data)
    return MeterReading(energy, Temperature(flow_tenths), Temperature(return_tenths))
