"""Shared test helpers: frame factories and randomized generators."""

from __future__ import annotations

import random
import string

from heatdispatch.mbus import MbusFrame
from heatdispatch.telemetry import (
    CHANNELS,
    SEQ_MAX,
    TIMESTAMP_MAX,
    OperatingMode,
    TelemetryFrame,
    Temperature,
)

STATION_ALPHABET = string.ascii_letters + string.digits + "_-"


def make_frame(
    station: str = "ST01",
    seq: int = 1,
    timestamp: int = 1700000000,
    temps=None,
    pumps=None,
    mode: OperatingMode = OperatingMode.AUTO,
) -> TelemetryFrame:
    if temps is None:
        temps = tuple(Temperature(200) for _ in range(CHANNELS))
    if pumps is None:
        pumps = (False,) * CHANNELS
    return TelemetryFrame(station, seq, timestamp, tuple(temps), tuple(pumps), mode)


def random_station_id(rng: random.Random) -> str:
    return "".join(rng.choice(STATION_ALPHABET) for _ in range(rng.randint(1, 32)))


def random_frame(rng: random.Random, station: str | None = None) -> TelemetryFrame:
    return TelemetryFrame(
        station=station if station is not None else random_station_id(rng),
        seq=rng.randint(0, SEQ_MAX),
        timestamp=rng.randint(0, TIMESTAMP_MAX),
        temps=tuple(Temperature(rng.randint(-500, 1500)) for _ in range(CHANNELS)),
        pumps=tuple(rng.random() < 0.5 for _ in range(CHANNELS)),
        mode=rng.choice(list(OperatingMode)),
    )


def random_mbus_frame(rng: random.Random, max_data: int = 32) -> MbusFrame:
    return MbusFrame(
        c_field=rng.randint(0, 255),
        a_field=rng.randint(0, 255),
        ci_field=rng.randint(0, 255),
        user_data=bytes(rng.randint(0, 255) for _ in range(rng.randint(0, max_data))),
    )
