"""Heat-station fleet simulator.

Each station runs a small plant model (8 temperature channels, 8 pumps,
first-order approach toward setpoint or ambient), reads its heat meter
over a simulated M-Bus link, pushes telemetry to the ingest service
through a lossy transport model, and polls the service for dispatcher
commands.

Two execution modes share the same Station logic:

  * real time - one push thread and one poll thread per station, mirroring
    a device with a UI loop and a background worker;
  * fast forward (SimClock) - a single-threaded event scheduler, which is
    what makes fleet runs bit-for-bit reproducible under a fixed seed.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import random
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace

from .clock import SimClock, SystemClock
from .mbus import (
    C_REQUEST,
    C_RESPONSE,
    CI_METER_READING,
    CI_REQUEST,
    MbusError,
    MbusFrame,
    MeterReading,
    build_long_frame,
    decode_meter_payload,
    encode_meter_payload,
    parse_long_frame,
)
from .telemetry import (
    CHANNELS,
    OperatingMode,
    TelemetryFrame,
    Temperature,
    encode_frame,
    validate_station_id,
)

log = logging.getLogger(__name__)

TEMP_MIN_C = -50.0
TEMP_MAX_C = 150.0

# Wh credited to the heat meter per second of one running pump.
ENERGY_RATE_WH_PER_PUMP_SECOND = 5.0


class ConfigError(ValueError):
    pass


class LinkError(Exception):
    """The meter link produced an unparseable frame."""


# -- transport model ---------------------------------------------------------


@dataclass(frozen=True)
class LinkProfile:
    name: str
    bitrate: float          # bits per second
    latency_s: float        # one-way
    drop_probability: float

    def __post_init__(self):
        if self.bitrate <= 0:
            raise ConfigError(f"bitrate must be > 0, got {self.bitrate}")
        if self.latency_s < 0:
            raise ConfigError(f"latency must be >= 0, got {self.latency_s}")
        if not 0 <= self.drop_probability < 1:
            raise ConfigError(f"drop probability must be in [0, 1), got {self.drop_probability}")


# The dial-up rate is the one number the transport classes pin down
# (56 kbit/s); the other presets are plausible stand-ins for their class.
LINK_PRESETS = {
    "dialup": LinkProfile("dialup", 56_000, 0.5, 0.02),
    "radio": LinkProfile("radio", 9_600, 0.3, 0.05),
    "gprs": LinkProfile("gprs", 40_000, 0.7, 0.03),
    "broadband": LinkProfile("broadband", 10_000_000, 0.02, 0.001),
    "perfect": LinkProfile("perfect", 1e9, 0.0, 0.0),  # ideal link for tests/benchmarks
}


@dataclass(frozen=True)
class Delivered:
    duration: float


@dataclass(frozen=True)
class Dropped:
    pass


def simulate_transfer(payload_bytes: int, profile: LinkProfile, rng: random.Random) -> Delivered | Dropped:
    """One transfer attempt: lost with drop_probability, else latency + serialization."""
    if payload_bytes < 0:
        raise ValueError(f"payload_bytes must be >= 0, got {payload_bytes}")
    if rng.random() < profile.drop_probability:
        return Dropped()
    return Delivered(profile.latency_s + (payload_bytes * 8) / profile.bitrate)


# -- plant model ---------------------------------------------------------------


def _default_setpoints() -> tuple[Temperature, ...]:
    return (Temperature(550),) * CHANNELS


@dataclass(frozen=True)
class StationConfig:
    id: str
    push_period: float = 1.0
    poll_period: float = 5.0
    link: LinkProfile = LINK_PRESETS["dialup"]
    ambient: Temperature = Temperature(150)
    setpoints: tuple[Temperature, ...] = field(default_factory=_default_setpoints)
    rate_k: float = 0.05           # per-second first-order constant
    hysteresis_c: float = 1.0
    initial_mode: OperatingMode = OperatingMode.AUTO
    seed: int = 0

    def __post_init__(self):
        validate_station_id(self.id)
        if self.push_period <= 0 or self.poll_period <= 0:
            raise ConfigError("push_period and poll_period must be > 0")
        if self.rate_k <= 0:
            raise ConfigError("rate_k must be > 0")
        if self.hysteresis_c <= 0:
            raise ConfigError("hysteresis must be > 0")
        object.__setattr__(self, "setpoints", tuple(self.setpoints))
        if len(self.setpoints) != CHANNELS:
            raise ConfigError(f"expected {CHANNELS} setpoints, got {len(self.setpoints)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")


@dataclass(frozen=True)
class PlantState:
    """Plant state; temperatures are kept unquantized between steps.

    Quantizing the state to tenths every step makes the trajectory stall a
    rounding-width short of the setpoint, so rounding happens only where
    values leave the plant: telemetry frames and meter readings.
    """

    temps_c: tuple[float, ...]
    pumps: tuple[bool, ...]
    mode: OperatingMode
    seq: int            # next sequence number to send, >= 1
    sim_time: float

    @classmethod
    def initial(cls, config: StationConfig) -> "PlantState":
        return cls(
            temps_c=(config.ambient.celsius,) * CHANNELS,
            pumps=(False,) * CHANNELS,
            mode=config.initial_mode,
            seq=1,
            sim_time=0.0,
        )

    def temperatures(self) -> tuple[Temperature, ...]:
        return tuple(Temperature.from_celsius(t) for t in self.temps_c)


def step_plant(state: PlantState, config: StationConfig, dt: float) -> PlantState:
    """Advance the plant by dt seconds.

    AUTO thermostats each pump first (on below setpoint - hysteresis, off
    above setpoint + hysteresis, otherwise unchanged); MANUAL leaves pumps
    to commands; OFF forces every pump off.  Each channel then relaxes
    toward its target (setpoint when pumped, ambient otherwise) with the
    first-order constant rate_k, forward-Euler integrated.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if state.mode is OperatingMode.OFF:
        pumps = (False,) * CHANNELS
    elif state.mode is OperatingMode.AUTO:
        pumps = tuple(
            True
            if state.temps_c[i] < config.setpoints[i].celsius - config.hysteresis_c
            else False
            if state.temps_c[i] > config.setpoints[i].celsius + config.hysteresis_c
            else state.pumps[i]
            for i in range(CHANNELS)
        )
    else:
        pumps = state.pumps
    temps = tuple(
        min(
            TEMP_MAX_C,
            max(
                TEMP_MIN_C,
                state.temps_c[i]
                + config.rate_k
                * ((config.setpoints[i].celsius if pumps[i] else config.ambient.celsius) - state.temps_c[i])
                * dt,
            ),
        )
        for i in range(CHANNELS)
    )
    return replace(state, temps_c=temps, pumps=pumps, sim_time=state.sim_time + dt)


# -- meter link ------------------------------------------------------------------


class MeterLink:
    """In-memory M-Bus channel between a station gateway and its heat meter.

    Every exchange builds and parses real frames in both directions.  The
    meter credits energy for pump running time between exchanges.  The
    corrupt_* hooks let tests damage bytes on the wire.
    """

    def __init__(
        self,
        address: int = 0,
        energy_rate: float = ENERGY_RATE_WH_PER_PUMP_SECOND,
        corrupt_request=None,
        corrupt_reply=None,
    ):
        self.address = address & 0xFF
        self.energy_rate = energy_rate
        self.corrupt_request = corrupt_request
        self.corrupt_reply = corrupt_reply
        self._energy_wh = 0.0
        self._last_time = 0.0

    def exchange(self, state: PlantState) -> MeterReading:
        """Request/response across the link; raises LinkError on a bad frame."""
        request = build_long_frame(MbusFrame(C_REQUEST, self.address, CI_REQUEST))
        if self.corrupt_request is not None:
            request = self.corrupt_request(request)
        reply = self._meter_respond(request, state)
        if self.corrupt_reply is not None:
            reply = self.corrupt_reply(reply)
        try:
            frame = parse_long_frame(reply)
            return decode_meter_payload(frame.user_data)
        except (MbusError, ValueError) as exc:
            raise LinkError(f"meter reply rejected: {exc}") from exc

    def _meter_respond(self, raw: bytes, state: PlantState) -> bytes:
        try:
            request = parse_long_frame(raw)
        except MbusError as exc:
            raise LinkError(f"meter rejected request: {exc}") from exc
        if request.c_field != C_REQUEST or request.a_field != self.address:
            raise LinkError(
                f"meter ignored frame C=0x{request.c_field:02X} A={request.a_field}"
            )
        elapsed = max(0.0, state.sim_time - self._last_time)
        self._last_time = state.sim_time
        self._energy_wh += elapsed * sum(state.pumps) * self.energy_rate
        reading = MeterReading(
            int(self._energy_wh) % 2**32,
            Temperature.from_celsius(state.temps_c[0]),
            Temperature.from_celsius(state.temps_c[1]),
        )
        response = MbusFrame(C_RESPONSE, self.address, CI_METER_READING, encode_meter_payload(reading))
        return build_long_frame(response)


# -- HTTP client -------------------------------------------------------------------


class HttpClient:
    """Minimal GET client; network failures come back as None, never raise."""

    def __init__(self, base_url: str, timeout_s: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def get(self, path: str, params: dict[str, str]) -> tuple[int, str] | None:
        url = f"{self.base_url}{path}?{urllib.parse.urlencode(params)}"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout_s) as response:
                return response.status, response.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            body = exc.read().decode("utf-8", errors="replace")
            return exc.code, body
        except (urllib.error.URLError, OSError, ValueError) as exc:
            log.warning("GET %s failed: %s", url, exc)
            return None


# -- station -------------------------------------------------------------------------


@dataclass
class StationStats:
    station: str
    sent: int = 0
    acked: int = 0
    dropped: int = 0
    delivered_frames: list[TelemetryFrame] = field(default_factory=list)


class Station:
    """One simulated station: plant, meter link, transport, command handling.

    The push path and the poll path are the two activities; callers
    serialize them (scheduler or per-station lock).
    """

    def __init__(self, config: StationConfig, server_url: str, client: HttpClient | None = None, index: int = 0):
        self.config = config
        self.index = index
        self.client = client or HttpClient(server_url)
        self.rng = random.Random(config.seed)
        self.state = PlantState.initial(config)
        self.meter = MeterLink(address=index)
        self.stats = StationStats(config.id)
        self.in_flight: TelemetryFrame | None = None
        self.lock = threading.Lock()

    # push path ---------------------------------------------------------------

    def push_tick(self, now: float) -> tuple[str, float] | None:
        """Advance the plant one period and start a send attempt.

        Returns (payload, transfer delay) when a transfer is under way;
        None when the attempt was dropped on the link or a previous send
        is still in flight (the frame is retried next period, same seq).
        """
        self.state = step_plant(self.state, self.config, self.config.push_period)
        try:
            self.meter.exchange(self.state)
        except LinkError as exc:
            log.warning("%s: meter exchange failed: %s", self.config.id, exc)
        if self.in_flight is not None:
            return None
        frame = TelemetryFrame(
            station=self.config.id,
            seq=self.state.seq,
            timestamp=int(now),
            temps=self.state.temperatures(),
            pumps=self.state.pumps,
            mode=self.state.mode,
        )
        payload = encode_frame(frame)
        outcome = simulate_transfer(len(payload), self.config.link, self.rng)
        if isinstance(outcome, Dropped):
            self.stats.dropped += 1
            return None
        self.in_flight = frame
        return payload, outcome.duration

    def complete_push(self, payload: str) -> bool:
        """Deliver the in-flight frame; advance seq only on a 200 response."""
        frame, self.in_flight = self.in_flight, None
        result = self.client.get("/zapis_danni", {"data": payload})
        if result is None or result[0] != 200:
            log.warning("%s: push of seq %d failed, will retry", self.config.id, frame.seq)
            return False
        self.state = replace(self.state, seq=self.state.seq + 1)
        self.stats.sent += 1
        self.stats.delivered_frames.append(frame)
        return True

    # poll path -----------------------------------------------------------------

    def poll_tick(self, now: float) -> int:
        """Fetch pending commands, apply them in id order, ack each one."""
        result = self.client.get("/commands/poll", {"station": self.config.id})
        if result is None or result[0] != 200:
            return 0
        try:
            delivered = json.loads(result[1])
        except json.JSONDecodeError:
            log.warning("%s: unparseable poll response", self.config.id)
            return 0
        applied = 0
        for item in delivered:
            if not isinstance(item, dict) or "id" not in item:
                log.warning("%s: malformed command entry %r", self.config.id, item)
                continue
            try:
                self.apply_command(item)
                applied += 1
            except (KeyError, IndexError, ValueError, TypeError) as exc:
                log.warning("%s: bad command %r: %s", self.config.id, item, exc)
            # delivered commands are acked whether or not they were applicable
            ack = self.client.get(
                "/commands/ack", {"station": self.config.id, "id": str(item["id"])}
            )
            if ack is not None and ack[0] == 200:
                self.stats.acked += 1
        return applied

    def apply_command(self, item: dict) -> None:
        kind = item["kind"]
        if kind == "SETMODE":
            self.state = replace(self.state, mode=OperatingMode(item["mode"]))
        elif kind == "SETPUMP":
            if self.state.mode is OperatingMode.MANUAL:
                index = int(item["index"])
                pumps = list(self.state.pumps)
                pumps[index] = bool(int(item["value"]))
                self.state = replace(self.state, pumps=tuple(pumps))
        elif kind == "SETSETPOINT":
            index = int(item["index"])
            setpoints = list(self.config.setpoints)
            setpoints[index] = Temperature.parse(str(item["value"]))
            self.config = replace(self.config, setpoints=tuple(setpoints))
        else:
            raise ValueError(f"unknown command kind {kind!r}")


# -- runners -----------------------------------------------------------------------


@dataclass
class FleetResult:
    stations: dict[str, StationStats]


def run_station(
    config: StationConfig,
    server_url: str,
    clock=None,
    stop_event: threading.Event | None = None,
    duration: float | None = None,
    client: HttpClient | None = None,
    index: int = 0,
) -> StationStats:
    """Run one station in real time until stop_event is set (or duration passes).

    The push loop runs in the calling thread, the poll loop in a background
    thread; both serialize on the station lock.  Transient network failures
    are logged and absorbed, never fatal.
    """
    clock = clock or SystemClock()
    stop = stop_event or threading.Event()
    station = Station(config, server_url, client=client, index=index)
    t0 = clock.now()
    deadline = t0 + duration if duration is not None else None

    def wait_until(target: float) -> bool:
        remaining = target - clock.now()
        if remaining > 0:
            stop.wait(remaining)
        return not stop.is_set()

    def poll_loop():
        k = 1
        while not stop.is_set():
            if not wait_until(t0 + k * config.poll_period):
                return
            with station.lock:
                station.poll_tick(clock.now())
            k += 1

    poller = threading.Thread(target=poll_loop, name=f"{config.id}-poll", daemon=True)
    poller.start()
    k = 1
    while not stop.is_set():
        if deadline is not None and t0 + k * config.push_period > deadline:
            stop.set()
            break
        if not wait_until(t0 + k * config.push_period):
            break
        with station.lock:
            started = station.push_tick(clock.now())
        if started is not None:
            payload, delay = started
            clock.sleep(delay)
            with station.lock:
                station.complete_push(payload)
        k += 1
    stop.set()
    poller.join()
    return station.stats


_PRIO_SCRIPT = -2
_PRIO_SEND = -1
_PRIO_POLL = 0
_PRIO_PUSH = 1


def run_fleet(
    configs: list[StationConfig],
    server_url: str,
    clock=None,
    duration: float = 60.0,
    script: list[tuple[float, object]] | None = None,
) -> FleetResult:
    """Run a fleet against one service for `duration` seconds of clock time.

    With a SimClock this is a deterministic single-threaded event loop
    (poll before push at equal times, so a frame built at time T reflects
    every command acked at T); otherwise one real-time thread per station.
    `script` entries are (offset from start, zero-arg callable) hooks
    executed at simulated times, for scenario tests.
    """
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate station ids: {sorted(ids)}")
    clock = clock or SystemClock()
    if isinstance(clock, SimClock):
        return _run_fleet_simulated(configs, server_url, clock, duration, script or [])
    if script:
        raise ConfigError("script hooks require a simulated clock")
    return _run_fleet_realtime(configs, server_url, clock, duration)


def _run_fleet_realtime(configs, server_url, clock, duration) -> FleetResult:
    stop = threading.Event()
    results: dict[str, StationStats] = {}

    def runner(config: StationConfig, index: int):
        results[config.id] = run_station(
            config, server_url, clock=clock, stop_event=stop, index=index
        )

    threads = [
        threading.Thread(target=runner, args=(config, i), name=f"{config.id}-push")
        for i, config in enumerate(configs)
    ]
    for thread in threads:
        thread.start()
    stop.wait(duration)
    stop.set()
    for thread in threads:
        thread.join()
    return FleetResult(results)


def _run_fleet_simulated(configs, server_url, clock: SimClock, duration, script) -> FleetResult:
    stations = [Station(config, server_url, index=i) for i, config in enumerate(configs)]
    t0 = clock.now()
    end = t0 + duration
    heap: list = []
    counter = itertools.count()

    def schedule(when: float, priority: int, action) -> None:
        heapq.heappush(heap, (when, priority, next(counter), action))

    def make_push(station: Station):
        def push(now: float, k: int = 1):
            started = station.push_tick(now)
            if started is not None:
                payload, delay = started
                schedule(now + delay, _PRIO_SEND, lambda t: station.complete_push(payload))
            nxt = t0 + (k + 1) * station.config.push_period
            if nxt <= end:
                schedule(nxt, _PRIO_PUSH, lambda t, k=k + 1: push(t, k))
        return push

    def make_poll(station: Station):
        def poll(now: float, k: int = 1):
            station.poll_tick(now)
            nxt = t0 + (k + 1) * station.config.poll_period
            if nxt <= end:
                schedule(nxt, _PRIO_POLL, lambda t, k=k + 1: poll(t, k))
        return poll

    for offset, hook in script:
        schedule(t0 + offset, _PRIO_SCRIPT, lambda t, hook=hook: hook())
    for station in stations:
        first_poll = t0 + station.config.poll_period
        if first_poll <= end:
            schedule(first_poll, _PRIO_POLL, make_poll(station))
        first_push = t0 + station.config.push_period
        if first_push <= end:
            schedule(first_push, _PRIO_PUSH, make_push(station))

    while heap:
        when, _prio, _tie, action = heapq.heappop(heap)
        clock.advance_to(when)
        action(when)

    return FleetResult({station.config.id: station.stats for station in stations})
