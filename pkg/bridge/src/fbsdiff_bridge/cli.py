import argparse
import sys

from .backbones import load_backbone
from .server import BridgeServer


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fbsdiff-bridge",
        description="Serve a latent-diffusion backbone over the fbsdiff wire protocol.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=7860)
    parser.add_argument("--model", default="tiny",
                        help="tiny[:SEED] or sd15:PATH (default tiny)")
    parser.add_argument("--deterministic", action=argparse.BooleanOptionalAction,
                        default=True, help="pin all stochastic kernels (default on)")
    ns = parser.parse_args(argv)
    try:
        backbone = load_backbone(ns.model)
    except Exception as exc:  # model load failure aborts startup
        print(f"fbsdiff-bridge: cannot load model {ns.model!r}: {exc}", file=sys.stderr)
        return 1
    server = BridgeServer(backbone, host=ns.host, port=ns.port,
                          deterministic=ns.deterministic)
    print(f"fbsdiff-bridge: serving {ns.model} on {server.host}:{server.port} "
          f"(deterministic={ns.deterministic})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
