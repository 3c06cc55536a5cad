"""Dispatcher-to-station command queue with a delivery lifecycle.

A command is born PENDING, handed to its station exactly once by a poll
(PENDING -> DELIVERED), confirmed by the station (DELIVERED -> ACKED), and
expires from PENDING or DELIVERED once its ttl has passed.  States only
ever move forward.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, replace
from enum import Enum

from .telemetry import CHANNELS, OperatingMode, Temperature


class CommandState(Enum):
    PENDING = "PENDING"
    DELIVERED = "DELIVERED"
    ACKED = "ACKED"
    EXPIRED = "EXPIRED"


@dataclass(frozen=True)
class SetMode:
    mode: OperatingMode


@dataclass(frozen=True)
class SetPump:
    index: int
    on: bool

    def __post_init__(self):
        if not 0 <= self.index < CHANNELS:
            raise ValueError(f"pump index {self.index} outside 0..{CHANNELS - 1}")


@dataclass(frozen=True)
class SetSetpoint:
    index: int
    value: Temperature

    def __post_init__(self):
        if not 0 <= self.index < CHANNELS:
            raise ValueError(f"setpoint index {self.index} outside 0..{CHANNELS - 1}")


CommandKind = SetMode | SetPump | SetSetpoint


@dataclass
class Command:
    id: int
    station: str
    kind: CommandKind
    created_at: int
    ttl_s: int
    state: CommandState = CommandState.PENDING


class UnknownCommand(LookupError):
    pass


class InvalidTransition(Exception):
    """Ack attempted on a command that is not DELIVERED; carries its state."""

    def __init__(self, state: CommandState):
        self.state = state
        super().__init__(f"command is {state.value}, not DELIVERED")


class CommandQueue:
    """Thread-safe queue; poll selection is atomic, ids are globally serial."""

    def __init__(self, clock=time.time, default_ttl_s: int = 300):
        self._clock = clock
        self._default_ttl_s = default_ttl_s
        self._lock = threading.Lock()
        self._commands: dict[int, Command] = {}
        self._next_id = 1

    def enqueue(self, station: str, kind: CommandKind, ttl_s: int | None = None) -> Command:
        with self._lock:
            command = Command(
                id=self._next_id,
                station=station,
                kind=kind,
                created_at=int(self._clock()),
                ttl_s=self._default_ttl_s if ttl_s is None else ttl_s,
            )
            self._next_id += 1
            self._commands[command.id] = command
            return replace(command)

    def poll(self, station: str) -> list[Command]:
        """Atomically deliver all pending, non-expired commands, in id order.

        Each returned command has been marked DELIVERED; a command id appears
        in at most one poll response ever.  Unknown stations get an empty
        list (stations may poll before their first telemetry).
        """
        with self._lock:
            self._sweep_expired()
            delivered = []
            for command in sorted(self._commands.values(), key=lambda c: c.id):
                if command.station == station and command.state is CommandState.PENDING:
                    command.state = CommandState.DELIVERED
                    delivered.append(replace(command))
            return delivered

    def ack(self, station: str, command_id: int) -> Command:
        """DELIVERED -> ACKED; raises UnknownCommand or InvalidTransition."""
        with self._lock:
            self._sweep_expired()
            command = self._commands.get(command_id)
            if command is None or command.station != station:
                raise UnknownCommand(command_id)
            if command.state is not CommandState.DELIVERED:
                raise InvalidTransition(command.state)
            command.state = CommandState.ACKED
            return replace(command)

    def get(self, command_id: int) -> Command:
        with self._lock:
            self._sweep_expired()
            command = self._commands.get(command_id)
            if command is None:
                raise UnknownCommand(command_id)
            return replace(command)

    def for_station(self, station: str) -> list[Command]:
        """Read-only snapshot of every command for a station, in id order."""
        with self._lock:
            self._sweep_expired()
            return [
                replace(c)
                for c in sorted(self._commands.values(), key=lambda c: c.id)
                if c.station == station
            ]

    def pending_count(self, station: str) -> int:
        with self._lock:
            self._sweep_expired()
            return sum(
                1
                for c in self._commands.values()
                if c.station == station and c.state is CommandState.PENDING
            )

    def _sweep_expired(self) -> None:
        # Lazy expiry: a command stays deliverable through created_at + ttl_s
        # inclusive and expires strictly after.
        now = self._clock()
        for command in self._commands.values():
            if command.state in (CommandState.PENDING, CommandState.DELIVERED):
                if now > command.created_at + command.ttl_s:
                    command.state = CommandState.EXPIRED
