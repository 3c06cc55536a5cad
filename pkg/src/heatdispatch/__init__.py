"""heatdispatch: heat-supply dispatch platform.

Simulated heat stations push telemetry over HTTP GET to an ingest service
that persists and serves it; dispatchers queue commands (mode, pump,
setpoint) that stations pick up through a polling command channel.
"""

from .telemetry import (
    OperatingMode,
    TelemetryFrame,
    Temperature,
    decode_frame,
    encode_frame,
)

__version__ = "0.1.0"

__all__ = [
    "OperatingMode",
    "TelemetryFrame",
    "Temperature",
    "decode_frame",
    "encode_frame",
    "__version__",
]
