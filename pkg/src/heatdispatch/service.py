"""HTTP ingest/dispatch service.

Device-facing endpoints are GET-only with query parameters; the operator
enqueue accepts GET and POST.  Routes:

    GET      /zapis_danni?data=<url-encoded payload>      record telemetry
    GET      /danni?station=&from=&to=&limit=             range query (JSON)
    GET      /latest?station=                             newest record (JSON)
    GET|POST /commands/enqueue?station=&kind=&...         queue a command
    GET      /commands/poll?station=                      deliver pending commands
    GET      /commands/ack?station=&id=                   confirm execution
    GET      /commands/status?station=[&id=]              read-only command states
    GET      /stations                                    fleet overview (JSON)

Plain-text bodies are ``OK``, ``DUP`` or ``ERR <token>``; everything else
is JSON.  A duplicate telemetry push answers 200 ``DUP`` so a
retransmitting station advances instead of looping.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from . import store as store_mod
from .commands import (
    Command,
    CommandQueue,
    InvalidTransition,
    SetMode,
    SetPump,
    SetSetpoint,
    UnknownCommand,
)
from .telemetry import (
    CHANNELS,
    TIMESTAMP_MAX,
    FrameError,
    OperatingMode,
    Temperature,
    decode_frame,
    validate_station_id,
)

log = logging.getLogger(__name__)

DEFAULT_QUERY_LIMIT = 1000


@dataclass
class Response:
    status: int
    content_type: str
    body: str


def _text(status: int, body: str) -> Response:
    return Response(status, "text/plain; charset=utf-8", body)


def _json(payload) -> Response:
    return Response(200, "application/json; charset=utf-8", json.dumps(payload))


class _HttpError(Exception):
    def __init__(self, status: int, body: str):
        self.response = _text(status, body)
        super().__init__(body)


def record_json(record: store_mod.StationRecord) -> dict:
    frame = record.frame
    return {
        "station": frame.station,
        "seq": frame.seq,
        "timestamp": frame.timestamp,
        "received_at": record.received_at,
        "temps": [str(t) for t in frame.temps],
        "pumps": [1 if p else 0 for p in frame.pumps],
        "mode": frame.mode.value,
    }


def command_json(command: Command) -> dict:
    payload = {
        "id": command.id,
        "station": command.station,
        "state": command.state.value,
        "created_at": command.created_at,
    }
    kind = command.kind
    if isinstance(kind, SetMode):
        payload["kind"] = "SETMODE"
        payload["mode"] = kind.mode.value
    elif isinstance(kind, SetPump):
        payload["kind"] = "SETPUMP"
        payload["index"] = kind.index
        payload["value"] = 1 if kind.on else 0
    else:
        payload["kind"] = "SETSETPOINT"
        payload["index"] = kind.index
        payload["value"] = str(kind.value)
    return payload


class DispatchApp:
    """Request handling, independent of the HTTP transport.

    The clock is injectable so receive times and command expiry are
    deterministic under a simulated clock.
    """

    def __init__(
        self,
        store: store_mod.TelemetryStore,
        clock=time.time,
        command_ttl_s: int = 300,
        auth_token: str | None = None,
    ):
        self.store = store
        self.clock = clock
        self.auth_token = auth_token
        self.commands = CommandQueue(clock=clock, default_ttl_s=command_ttl_s)
        self._routes = {
            "/zapis_danni": (("GET",), self._record),
            "/danni": (("GET",), self._query),
            "/latest": (("GET",), self._latest),
            "/commands/enqueue": (("GET", "POST"), self._enqueue),
            "/commands/poll": (("GET",), self._poll),
            "/commands/ack": (("GET",), self._ack),
            "/commands/status": (("GET",), self._status),
            "/stations": (("GET",), self._stations),
        }

    def handle(self, method: str, path: str, params: dict[str, str], headers=None) -> Response:
        """Dispatch one request; never raises, every outcome is a Response."""
        try:
            if self.auth_token is not None:
                token = headers.get("X-Auth-Token") if headers is not None else None
                if token != self.auth_token:
                    return _text(401, "ERR AUTH")
            route = self._routes.get(path)
            if route is None:
                return _text(404, "ERR NOT_FOUND")
            methods, handler = route
            if method not in methods:
                return _text(405, "ERR METHOD")
            return handler(params)
        except _HttpError as exc:
            return exc.response
        except Exception:
            log.exception("unhandled error on %s %s", method, path)
            return _text(500, "ERR INTERNAL")

    # -- parameter helpers ---------------------------------------------------

    @staticmethod
    def _require(params: dict[str, str], name: str) -> str:
        value = params.get(name)
        if value is None:
            raise _HttpError(400, f"ERR {name}")
        return value

    @staticmethod
    def _uint(params: dict[str, str], name: str, default: int | None = None) -> int:
        value = params.get(name)
        if value is None:
            if default is None:
                raise _HttpError(400, f"ERR {name}")
            return default
        if not value.isascii() or not value.isdigit():
            raise _HttpError(400, f"ERR {name}")
        return int(value)

    def _station_param(self, params: dict[str, str]) -> str:
        value = self._require(params, "station")
        try:
            return validate_station_id(value)
        except FrameError:
            raise _HttpError(400, "ERR station") from None

    # -- handlers --------------------------------------------------------------

    def _record(self, params: dict[str, str]) -> Response:
        raw = self._require(params, "data")
        try:
            frame = decode_frame(raw)
        except FrameError as exc:
            return _text(400, f"ERR {exc.field}")
        try:
            result = self.store.append(frame, int(self.clock()))
        except store_mod.StorageFailure:
            log.exception("storage failure for %s", frame.station)
            return _text(500, "ERR STORAGE")
        return _text(200, "OK" if result is store_mod.AppendResult.APPENDED else "DUP")

    def _query(self, params: dict[str, str]) -> Response:
        station = self._station_param(params)
        ts_from = self._uint(params, "from", 0)
        ts_to = self._uint(params, "to", TIMESTAMP_MAX)
        limit = self._uint(params, "limit", DEFAULT_QUERY_LIMIT)
        if ts_from > ts_to:
            return _text(400, "ERR range")
        if limit < 1:
            return _text(400, "ERR limit")
        try:
            records = self.store.query_range(station, ts_from, ts_to, limit)
        except store_mod.UnknownStation:
            return _text(404, "ERR UNKNOWN_STATION")
        return _json([record_json(r) for r in records])

    def _latest(self, params: dict[str, str]) -> Response:
        station = self._station_param(params)
        try:
            record = self.store.latest(station)
        except store_mod.UnknownStation:
            return _text(404, "ERR UNKNOWN_STATION")
        return _json(record_json(record))

    def _enqueue(self, params: dict[str, str]) -> Response:
        station = self._station_param(params)
        kind_token = self._require(params, "kind")
        if kind_token == "SETMODE":
            try:
                kind = SetMode(OperatingMode(self._require(params, "mode")))
            except ValueError:
                return _text(400, "ERR mode")
        elif kind_token == "SETPUMP":
            index = self._uint(params, "index")
            if index >= CHANNELS:
                return _text(400, "ERR index")
            value = self._require(params, "value")
            if value not in ("0", "1"):
                return _text(400, "ERR value")
            kind = SetPump(index, value == "1")
        elif kind_token == "SETSETPOINT":
            index = self._uint(params, "index")
            if index >= CHANNELS:
                return _text(400, "ERR index")
            try:
                kind = SetSetpoint(index, Temperature.parse(self._require(params, "value")))
            except FrameError:
                return _text(400, "ERR value")
        else:
            return _text(400, "ERR kind")
        command = self.commands.enqueue(station, kind)
        return _json({"id": command.id, "state": command.state.value})

    def _poll(self, params: dict[str, str]) -> Response:
        station = self._station_param(params)
        return _json([command_json(c) for c in self.commands.poll(station)])

    def _ack(self, params: dict[str, str]) -> Response:
        station = self._station_param(params)
        command_id = self._uint(params, "id")
        try:
            self.commands.ack(station, command_id)
        except UnknownCommand:
            return _text(404, "ERR UNKNOWN_COMMAND")
        except InvalidTransition as exc:
            return _text(409, f"ERR STATE {exc.state.value}")
        return _text(200, "OK")

    def _status(self, params: dict[str, str]) -> Response:
        station = self._station_param(params)
        commands = self.commands.for_station(station)
        if "id" in params:
            command_id = self._uint(params, "id")
            commands = [c for c in commands if c.id == command_id]
        return _json([command_json(c) for c in commands])

    def _stations(self, params: dict[str, str]) -> Response:
        listing = [
            {
                "station": station,
                "last_received_at": last_received_at,
                "pending_commands": self.commands.pending_count(station),
            }
            for station, last_received_at in self.store.list_stations()
        ]
        return _json(listing)


# -- HTTP transport -------------------------------------------------------------


class _RequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        split = urlsplit(self.path)
        params = {k: v[0] for k, v in parse_qs(split.query, keep_blank_values=True).items()}
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            ctype = (self.headers.get("Content-Type") or "").split(";")[0].strip()
            if length and ctype == "application/x-www-form-urlencoded":
                body = self.rfile.read(length).decode("utf-8", errors="replace")
                params.update(
                    {k: v[0] for k, v in parse_qs(body, keep_blank_values=True).items()}
                )
        response = self.server.app.handle(method, split.path, params, self.headers)
        payload = response.body.encode("utf-8")
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(payload)))
        # the dashboard is a static bundle on another origin
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)


class DispatchHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], app: DispatchApp):
        super().__init__(address, _RequestHandler)
        self.app = app


def make_server(app: DispatchApp, host: str, port: int) -> DispatchHTTPServer:
    return DispatchHTTPServer((host, port), app)


# -- configuration ----------------------------------------------------------------


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8008"
    data_dir: str = "data"
    command_ttl_s: int = 300
    auth_token: str | None = None


def parse_config(text: str) -> ServiceConfig:
    """Parse key=value lines; blank lines and # comments are ignored."""
    config = ServiceConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = key.strip(), value.strip()
        if key == "listen":
            config.listen = value
        elif key == "data_dir":
            config.data_dir = value
        elif key == "command_ttl_s":
            if not value.isdigit():
                raise ValueError(f"line {lineno}: command_ttl_s must be an integer")
            config.command_ttl_s = int(value)
        elif key == "auth_token":
            config.auth_token = value or None
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return config


def load_config(path) -> ServiceConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port = listen.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"listen must be host:port, got {listen!r}")
    return host, int(port)


def build_app(config: ServiceConfig, clock=time.time) -> DispatchApp:
    telemetry_store = store_mod.TelemetryStore(config.data_dir)
    return DispatchApp(
        telemetry_store,
        clock=clock,
        command_ttl_s=config.command_ttl_s,
        auth_token=config.auth_token,
    )
