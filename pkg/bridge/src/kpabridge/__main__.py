"""Run the bridge with uvicorn: ``python -m kpabridge [--port N]``."""

from __future__ import annotations

import argparse
import os

import uvicorn

from .app import create_app
from .models import StubModels


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="kpa-bridge", description="Model bridge service (stub mode).")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument(
        "--port", type=int, default=int(os.environ.get("KPA_BRIDGE_PORT", "8787"))
    )
    parser.add_argument("--embed-dim", type=int, default=64, help="stub embedding dimension")
    parser.add_argument("--generate-timeout", type=float, default=30.0)
    args = parser.parse_args(argv)

    app = create_app(models=StubModels(dim=args.embed_dim), generate_timeout=args.generate_timeout)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
