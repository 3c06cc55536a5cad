"""Command-line interface: serve, simulate, send-one, inspect-frame."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .clock import SimClock, SystemClock
from .mbus import ACK, CI_METER_READING, MbusError, decode_meter_payload, parse_long_frame
from .service import ServiceConfig, build_app, load_config, make_server, parse_listen
from .simulator import (
    LINK_PRESETS,
    ConfigError,
    HttpClient,
    StationConfig,
    run_fleet,
)

log = logging.getLogger(__name__)


def _cmd_serve(args) -> int:
    config = load_config(args.config) if args.config else ServiceConfig()
    if args.listen:
        config.listen = args.listen
    if args.data_dir:
        config.data_dir = args.data_dir
    host, port = parse_listen(config.listen)
    app = build_app(config, clock=time.time)
    server = make_server(app, host, port)
    log.info("listening on %s:%d, data dir %s", host, server.server_address[1], config.data_dir)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        log.info("shutting down")
    finally:
        server.server_close()
        app.store.close()
    return 0


def _cmd_simulate(args) -> int:
    profile = LINK_PRESETS.get(args.profile)
    if profile is None:
        print(f"unknown profile {args.profile!r}; choose from {', '.join(sorted(LINK_PRESETS))}", file=sys.stderr)
        return 2
    configs = [
        StationConfig(
            id=f"ST{i + 1:02d}",
            push_period=args.push_period,
            poll_period=args.poll_period,
            link=profile,
            seed=(args.seed + i) % 2**64,
        )
        for i in range(args.stations)
    ]
    clock = SimClock() if args.fast_forward else SystemClock()
    try:
        result = run_fleet(configs, args.server, clock=clock, duration=args.duration)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for station_id in sorted(result.stations):
        stats = result.stations[station_id]
        print(f"{station_id}: sent={stats.sent} acked={stats.acked} dropped={stats.dropped}")
    return 0


def _cmd_send_one(args) -> int:
    client = HttpClient(args.server)
    result = client.get("/zapis_danni", {"data": args.data})
    if result is None:
        print("no response from server", file=sys.stderr)
        return 1
    status, body = result
    print(f"{status} {body}")
    return 0 if status == 200 else 1


def _cmd_inspect_frame(args) -> int:
    try:
        raw = bytes.fromhex(args.hex.replace(" ", ""))
    except ValueError:
        print(f"not a hex string: {args.hex!r}", file=sys.stderr)
        return 2
    if raw == bytes((ACK,)):
        print(f"single-byte acknowledgement 0x{ACK:2X}")
        return 0
    try:
        frame = parse_long_frame(raw)
    except MbusError as exc:
        print(f"invalid frame: {exc}", file=sys.stderr)
        return 1
    print(f"frame:     {raw.hex(' ').upper()}")
    print(f"length:    {len(frame.user_data) + 3} (user data {len(frame.user_data)} bytes)")
    print(f"c_field:   0x{frame.c_field:02X}")
    print(f"a_field:   0x{frame.a_field:02X} ({frame.a_field})")
    print(f"ci_field:  0x{frame.ci_field:02X}")
    data_hex = frame.user_data.hex(" ").upper() if frame.user_data else "(empty)"
    print(f"user_data: {data_hex}")
    if frame.ci_field == CI_METER_READING and len(frame.user_data) == 8:
        try:
            reading = decode_meter_payload(frame.user_data)
            print(
                f"reading:   energy={reading.energy_wh} Wh"
                f" flow={reading.flow_temp} C return={reading.return_temp} C"
            )
        except ValueError as exc:
            print(f"reading:   undecodable ({exc})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatdispatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the ingest/dispatch service")
    serve.add_argument("--config", help="key=value config file (listen, data_dir, command_ttl_s, auth_token)")
    serve.add_argument("--listen", help="host:port override")
    serve.add_argument("--data-dir", help="data directory override")
    serve.set_defaults(func=_cmd_serve)

    simulate = sub.add_parser("simulate", help="run a station fleet against a server")
    simulate.add_argument("--server", required=True, help="service base URL, e.g. http://127.0.0.1:8008")
    simulate.add_argument("--stations", type=int, default=1)
    simulate.add_argument("--profile", default="dialup", help=f"link preset: {', '.join(sorted(LINK_PRESETS))}")
    simulate.add_argument("--push-period", type=float, default=1.0)
    simulate.add_argument("--poll-period", type=float, default=5.0)
    simulate.add_argument("--duration", type=float, default=60.0)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--fast-forward", action="store_true", help="simulated clock, runs at full speed")
    simulate.set_defaults(func=_cmd_simulate)

    send_one = sub.add_parser("send-one", help="push a single telemetry payload")
    send_one.add_argument("--server", required=True)
    send_one.add_argument("--data", required=True, help="wire-format payload string")
    send_one.set_defaults(func=_cmd_send_one)

    inspect = sub.add_parser("inspect-frame", help="parse and dump an M-Bus frame given as hex")
    inspect.add_argument("hex")
    inspect.set_defaults(func=_cmd_inspect_frame)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
