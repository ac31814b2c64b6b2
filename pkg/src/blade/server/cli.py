"""blade-node: run a standalone node over real HTTP.

The registry backend is the local reference ledger persisted as an event
journal; point several nodes at a shared journal path (or run them inside
one process) to federate locally.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
from pathlib import Path

from blade.registry import Registry
from blade.server.config import NodeConfig
from blade.server.httpd import NodeHTTPServer
from blade.server.keystore import load_or_create
from blade.server.node import BladeNode
from blade.transport import HttpTransport


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blade-node", description="Run a federated-services node."
    )
    parser.add_argument("--config", help="JSON config file to load")
    parser.add_argument("--port", type=int, help="listen port (0 = ephemeral)")
    parser.add_argument("--data-dir", help="state directory")
    parser.add_argument("--public-url", help="base URL peers should use")
    parser.add_argument("--journal", help="registry event journal path")
    parser.add_argument(
        "--register",
        metavar="NAME",
        help="register this username in the registry at startup",
    )
    parser.add_argument(
        "--admin-password",
        help="set the admin password (overrides the config hash)",
    )
    parser.add_argument("--ui-dir", help="directory of web UI assets for /ui/")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )

    config = NodeConfig.from_file(args.config) if args.config else NodeConfig()
    if args.port is not None:
        config.listen_port = args.port
    if args.data_dir:
        config.data_dir = args.data_dir
    if args.public_url:
        config.public_url = args.public_url
    if args.journal:
        config.journal_path = args.journal
    if args.admin_password:
        config.set_admin_password(args.admin_password)

    if config.data_dir:
        Path(config.data_dir).mkdir(parents=True, exist_ok=True)
    keystore_path = config.keystore_path or (
        f"{config.data_dir}/keys.json" if config.data_dir else None
    )
    if keystore_path:
        identity_key, delegate_key = load_or_create(keystore_path)
    else:
        identity_key = delegate_key = None

    registry = Registry(config.journal_path)
    node = BladeNode(
        config=config,
        registry=registry,
        transport=HttpTransport(),
        identity_key=identity_key,
        delegate_key=delegate_key,
    )
    server = NodeHTTPServer(node, ui_dir=args.ui_dir)
    base_url = server.start()
    if config.public_url in ("", "http://127.0.0.1:0"):
        config.public_url = base_url
    print(f"node {node.address.text} listening on {base_url}")

    if args.register:
        record = node.register(args.register)
        print(f"registered {record.name!r} -> {record.url}")

    stop = {"flag": False}

    def shutdown(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, shutdown)
    signal.signal(signal.SIGTERM, shutdown)
    try:
        while not stop["flag"]:
            signal.pause()
    except (KeyboardInterrupt, AttributeError):
        pass
    finally:
        server.stop()
        registry.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
