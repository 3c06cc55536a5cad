import json
import random
import string
import threading
import urllib.error
import urllib.parse
import urllib.request

import pytest

from heatdispatch.clock import SimClock
from heatdispatch.service import (
    DispatchApp,
    ServiceConfig,
    make_server,
    parse_config,
    parse_listen,
)
from heatdispatch.store import StorageFailure, TelemetryStore
from heatdispatch.telemetry import Temperature, decode_frame, encode_frame

from helpers import make_frame

FULL_SPAN = {"from": "0", "to": str(2**64 - 1)}


@pytest.fixture
def clock():
    return SimClock(5000.0)


@pytest.fixture
def app(tmp_path, clock):
    store = TelemetryStore(tmp_path / "data")
    app = DispatchApp(store, clock=clock.now, command_ttl_s=300)
    yield app
    store.close()


def get(app, path, **params):
    return app.handle("GET", path, {k: str(v) for k, v in params.items()})


def test_record_ok_then_query(app):
    frame = make_frame(timestamp=4000)
    response = get(app, "/zapis_danni", data=encode_frame(frame))
    assert (response.status, response.body) == (200, "OK")
    listing = json.loads(get(app, "/danni", station="ST01", **FULL_SPAN).body)
    assert len(listing) == 1
    row = listing[0]
    assert row["station"] == "ST01"
    assert row["seq"] == 1
    assert row["timestamp"] == 4000
    assert row["received_at"] == 5000
    assert row["temps"] == ["20.0"] * 8
    assert row["pumps"] == [0] * 8
    assert row["mode"] == "AUTO"


def test_record_duplicate(app):
    payload = encode_frame(make_frame())
    assert get(app, "/zapis_danni", data=payload).body == "OK"
    response = get(app, "/zapis_danni", data=payload)
    assert (response.status, response.body) == (200, "DUP")


def test_record_bad_payload_names_field(app):
    bad = "ST01;1;1;20.0,20.0;0,0,0,0,0,0,0,0;AUTO"
    response = get(app, "/zapis_danni", data=bad)
    assert (response.status, response.body) == (400, "ERR temps")


def test_record_missing_data_param(app):
    response = get(app, "/zapis_danni")
    assert (response.status, response.body) == (400, "ERR data")


def test_record_storage_failure(app, monkeypatch):
    def explode(frame, received_at):
        raise StorageFailure("disk gone")

    monkeypatch.setattr(app.store, "append", explode)
    response = get(app, "/zapis_danni", data=encode_frame(make_frame()))
    assert (response.status, response.body) == (500, "ERR STORAGE")


def test_query_order_and_fields(app, clock):
    for i in range(1, 4):
        clock.sleep(1)
        frame = make_frame(seq=i, timestamp=4000 + i)
        get(app, "/zapis_danni", data=encode_frame(frame))
    listing = json.loads(get(app, "/danni", station="ST01", **FULL_SPAN).body)
    assert [row["seq"] for row in listing] == [1, 2, 3]
    assert [row["received_at"] for row in listing] == [5001, 5002, 5003]


def test_query_unknown_station(app):
    response = get(app, "/danni", station="GHOST", **FULL_SPAN)
    assert (response.status, response.body) == (404, "ERR UNKNOWN_STATION")


@pytest.mark.parametrize(
    "params,body",
    [
        ({"station": "ST01", "from": "9", "to": "5"}, "ERR range"),
        ({"station": "ST01", "from": "x", "to": "5"}, "ERR from"),
        ({"station": "ST01", "from": "1", "to": "1e9"}, "ERR to"),
        ({"station": "ST01", "limit": "0"}, "ERR limit"),
        ({"station": "ST01", "limit": "-3"}, "ERR limit"),
        ({"station": "bad id!"}, "ERR station"),
        ({}, "ERR station"),
    ],
)
def test_query_param_validation(app, params, body):
    get(app, "/zapis_danni", data=encode_frame(make_frame()))
    response = app.handle("GET", "/danni", params)
    assert (response.status, response.body) == (400, body)


def test_query_body_matches_store(app):
    rng = random.Random(11)
    for i in range(1, 30):
        frame = make_frame(
            seq=i,
            timestamp=rng.randint(0, 100),
            temps=[Temperature(rng.randint(-500, 1500)) for _ in range(8)],
            pumps=tuple(rng.random() < 0.5 for _ in range(8)),
        )
        get(app, "/zapis_danni", data=encode_frame(frame))
    listing = json.loads(get(app, "/danni", station="ST01", **FULL_SPAN).body)
    direct = app.store.query_range("ST01", 0, 2**64 - 1, 1000)
    assert len(listing) == len(direct)
    for row, record in zip(listing, direct):
        rebuilt = decode_frame(
            ";".join(
                (
                    row["station"],
                    str(row["seq"]),
                    str(row["timestamp"]),
                    ",".join(row["temps"]),
                    ",".join(str(p) for p in row["pumps"]),
                    row["mode"],
                )
            )
        )
        assert rebuilt == record.frame
        assert row["received_at"] == record.received_at


def test_latest(app):
    for ts in (4001, 4003, 4002):
        frame = make_frame(seq=ts - 4000, timestamp=ts)
        get(app, "/zapis_danni", data=encode_frame(frame))
    row = json.loads(get(app, "/latest", station="ST01").body)
    assert row["timestamp"] == 4003
    assert get(app, "/latest", station="GHOST").status == 404


def test_enqueue_setmode(app):
    response = get(app, "/commands/enqueue", station="ST01", kind="SETMODE", mode="MANUAL")
    assert response.status == 200
    assert json.loads(response.body) == {"id": 1, "state": "PENDING"}


def test_enqueue_ids_increase(app):
    first = json.loads(get(app, "/commands/enqueue", station="S", kind="SETMODE", mode="OFF").body)
    second = json.loads(get(app, "/commands/enqueue", station="S", kind="SETMODE", mode="AUTO").body)
    assert second["id"] > first["id"]


@pytest.mark.parametrize(
    "params,body",
    [
        ({"station": "ST01", "kind": "SETPUMP", "index": "9", "value": "1"}, "ERR index"),
        ({"station": "ST01", "kind": "SETPUMP", "index": "x", "value": "1"}, "ERR index"),
        ({"station": "ST01", "kind": "SETPUMP", "index": "0", "value": "2"}, "ERR value"),
        ({"station": "ST01", "kind": "SETMODE", "mode": "halt"}, "ERR mode"),
        ({"station": "ST01", "kind": "SETMODE", "mode": "manual"}, "ERR mode"),
        ({"station": "ST01", "kind": "SETMODE"}, "ERR mode"),
        ({"station": "ST01", "kind": "REBOOT"}, "ERR kind"),
        ({"station": "ST01"}, "ERR kind"),
        ({"station": "ST01", "kind": "SETSETPOINT", "index": "0", "value": "200.0"}, "ERR value"),
        ({"station": "ST01", "kind": "SETSETPOINT", "index": "0", "value": "20"}, "ERR value"),
        ({"station": "ST01", "kind": "SETSETPOINT", "index": "8", "value": "20.0"}, "ERR index"),
    ],
)
def test_enqueue_validation(app, params, body):
    response = app.handle("GET", "/commands/enqueue", params)
    assert (response.status, response.body) == (400, body)


def test_poll_and_ack_flow(app):
    get(app, "/commands/enqueue", station="ST01", kind="SETMODE", mode="MANUAL")
    get(app, "/commands/enqueue", station="ST01", kind="SETPUMP", index="0", value="1")
    delivered = json.loads(get(app, "/commands/poll", station="ST01").body)
    assert [c["id"] for c in delivered] == [1, 2]
    assert delivered[0]["kind"] == "SETMODE"
    assert delivered[0]["mode"] == "MANUAL"
    assert delivered[1]["kind"] == "SETPUMP"
    assert delivered[1]["index"] == 0
    assert delivered[1]["value"] == 1
    assert json.loads(get(app, "/commands/poll", station="ST01").body) == []
    assert get(app, "/commands/ack", station="ST01", id="1").body == "OK"
    response = get(app, "/commands/ack", station="ST01", id="1")
    assert (response.status, response.body) == (409, "ERR STATE ACKED")
    assert get(app, "/commands/ack", station="ST01", id="99").status == 404
    response = get(app, "/commands/ack", station="ST02", id="2")
    assert response.status == 404


def test_poll_expires_stale_commands(app, clock):
    get(app, "/commands/enqueue", station="ST01", kind="SETMODE", mode="OFF")
    clock.sleep(301)
    assert json.loads(get(app, "/commands/poll", station="ST01").body) == []
    status = json.loads(get(app, "/commands/status", station="ST01").body)
    assert [c["state"] for c in status] == ["EXPIRED"]


def test_poll_unknown_station_is_empty(app):
    response = get(app, "/commands/poll", station="NEW")
    assert (response.status, response.body) == (200, "[]")


def test_command_status_view(app):
    get(app, "/commands/enqueue", station="ST01", kind="SETSETPOINT", index="2", value="60.0")
    status = json.loads(get(app, "/commands/status", station="ST01").body)
    assert status == [
        {
            "id": 1,
            "station": "ST01",
            "state": "PENDING",
            "created_at": 5000,
            "kind": "SETSETPOINT",
            "index": 2,
            "value": "60.0",
        }
    ]
    by_id = json.loads(get(app, "/commands/status", station="ST01", id="1").body)
    assert by_id == status
    assert json.loads(get(app, "/commands/status", station="ST01", id="9").body) == []


def test_stations_listing(app):
    assert json.loads(get(app, "/stations").body) == []
    get(app, "/zapis_danni", data=encode_frame(make_frame(station="ST02")))
    get(app, "/zapis_danni", data=encode_frame(make_frame(station="ST01")))
    get(app, "/commands/enqueue", station="ST02", kind="SETMODE", mode="OFF")
    listing = json.loads(get(app, "/stations").body)
    assert [row["station"] for row in listing] == ["ST01", "ST02"]
    assert [row["pending_commands"] for row in listing] == [0, 1]
    assert all(row["last_received_at"] == 5000 for row in listing)


def test_unknown_route_and_method(app):
    assert app.handle("GET", "/nope", {}).status == 404
    assert app.handle("POST", "/zapis_danni", {"data": "x"}).status == 405


def test_auth_token(tmp_path, clock):
    store = TelemetryStore(tmp_path / "auth-data")
    app = DispatchApp(store, clock=clock.now, auth_token="sekrit")
    try:
        denied = app.handle("GET", "/stations", {}, headers={})
        assert (denied.status, denied.body) == (401, "ERR AUTH")
        allowed = app.handle("GET", "/stations", {}, headers={"X-Auth-Token": "sekrit"})
        assert allowed.status == 200
    finally:
        store.close()


def test_error_totality_fuzz(app):
    rng = random.Random(99)
    paths = ["/zapis_danni", "/danni", "/latest", "/commands/enqueue", "/commands/poll",
             "/commands/ack", "/commands/status", "/stations", "/", "/bogus"]
    names = ["data", "station", "from", "to", "limit", "kind", "mode", "index", "value", "id", "junk"]
    alphabet = string.printable
    for _ in range(2000):
        path = rng.choice(paths)
        params = {
            rng.choice(names): "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
            for _ in range(rng.randint(0, 4))
        }
        response = app.handle(rng.choice(["GET", "POST"]), path, params)
        assert response.status in (200, 400, 404, 405, 409, 500)
        assert response.status != 500  # nothing here can legitimately blow up


# -- real transport ------------------------------------------------------------


@pytest.fixture
def live(tmp_path, clock):
    store = TelemetryStore(tmp_path / "live-data")
    app = DispatchApp(store, clock=clock.now)
    server = make_server(app, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", app
    server.shutdown()
    server.server_close()
    store.close()


def http_get(base, path, params):
    url = f"{base}{path}?{urllib.parse.urlencode(params)}"
    try:
        with urllib.request.urlopen(url, timeout=10) as response:
            return response.status, response.read().decode()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode()


def test_http_round_trip(live):
    base, app = live
    frame = make_frame(timestamp=4999)
    status, body = http_get(base, "/zapis_danni", {"data": encode_frame(frame)})
    assert (status, body) == (200, "OK")
    status, body = http_get(base, "/danni", {"station": "ST01", **FULL_SPAN})
    assert status == 200
    assert json.loads(body)[0]["timestamp"] == 4999
    status, body = http_get(base, "/latest", {"station": "GHOST"})
    assert (status, body) == (404, "ERR UNKNOWN_STATION")


def test_http_post_enqueue_form_body(live):
    base, app = live
    data = urllib.parse.urlencode(
        {"station": "ST01", "kind": "SETPUMP", "index": "3", "value": "1"}
    ).encode()
    request = urllib.request.Request(
        f"{base}/commands/enqueue",
        data=data,
        headers={"Content-Type": "application/x-www-form-urlencoded"},
    )
    with urllib.request.urlopen(request, timeout=10) as response:
        assert response.status == 200
        payload = json.loads(response.read().decode())
    assert payload == {"id": 1, "state": "PENDING"}
    status, body = http_get(base, "/commands/poll", {"station": "ST01"})
    assert [c["index"] for c in json.loads(body)] == [3]


def test_http_url_encoded_payload_with_reserved_chars(live):
    base, _ = live
    frame = make_frame(station="A_B-1")
    status, body = http_get(base, "/zapis_danni", {"data": encode_frame(frame)})
    assert (status, body) == (200, "OK")


# -- configuration -----------------------------------------------------------


def test_parse_config():
    config = parse_config(
        """
        # service settings
        listen = 0.0.0.0:9099
        data_dir = /tmp/hd-data

        command_ttl_s = 120
        auth_token =
        """
    )
    assert config == ServiceConfig("0.0.0.0:9099", "/tmp/hd-data", 120, None)


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ValueError):
        parse_config("listne = 1:2")
    with pytest.raises(ValueError):
        parse_config("just words")
    with pytest.raises(ValueError):
        parse_config("command_ttl_s = soon")


def test_parse_listen():
    assert parse_listen("127.0.0.1:8008") == ("127.0.0.1", 8008)
    with pytest.raises(ValueError):
        parse_listen("no-port")
