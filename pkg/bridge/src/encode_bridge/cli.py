"""Serve a sentence-transformer model behind the encode protocol."""

from __future__ import annotations

import argparse
import sys

from .config import BridgeConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="encode-bridge")
    sub = parser.add_subparsers(dest="command", required=True)
    serve = sub.add_parser("serve", help="run the encode server")
    serve.add_argument("--model", required=True, help="model id or local path")
    serve.add_argument("--device", default="cpu")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8480)
    serve.add_argument("--batch-size", type=int, default=64)
    serve.add_argument("--max-batch", type=int, default=1024)
    serve.add_argument("--expected-dim", type=int, default=None)
    serve.add_argument(
        "--role-prefix",
        action="append",
        default=[],
        metavar="ROLE=PREFIX",
        help="e.g. --role-prefix 'query=query: ' (repeatable)",
    )
    return parser


def parse_prefixes(pairs: list[str]) -> dict[str, str]:
    prefixes = {}
    for pair in pairs:
        role, sep, prefix = pair.partition("=")
        if not sep:
            raise ValueError(f"--role-prefix must look like ROLE=PREFIX, got {pair!r}")
        prefixes[role.strip()] = prefix
    return prefixes


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = BridgeConfig(
            model=args.model,
            device=args.device,
            batch_size=args.batch_size,
            max_batch=args.max_batch,
            role_prefixes=parse_prefixes(args.role_prefix),
            expected_dim=args.expected_dim,
        )
    except ValueError as exc:
        print(f"encode-bridge: {exc}", file=sys.stderr)
        return 1

    import uvicorn

    from .app import create_app

    try:
        app = create_app(config)
    except RuntimeError as exc:
        print(f"encode-bridge: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
