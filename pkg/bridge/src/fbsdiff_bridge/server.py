"""Threaded socket server answering wire-protocol requests with a backbone.

One request is in flight per connection; the server holds any number of
connections, each processed serially by its own thread. Prompt embeddings are
cached per distinct prompt under a lock shared by all connections.
"""

from __future__ import annotations

import socketserver
import threading

import numpy as np

from . import protocol
from .backbones import load_backbone


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        bridge: BridgeServer = self.server.bridge
        try:
            protocol.read_handshake(self.rfile)
        except (ConnectionError, OSError):
            return  # bad hello: drop without echo
        try:
            protocol.write_handshake_echo(self.wfile)
            while True:
                try:
                    request = protocol.read_request(self.rfile)
                except EOFError:
                    return
                except protocol.FrameError as exc:
                    protocol.write_error(self.wfile, str(exc))
                    if exc.fatal:
                        return
                    continue
                try:
                    result = bridge.answer(*request)
                except ValueError as exc:
                    protocol.write_error(self.wfile, str(exc))
                    continue
                protocol.write_ok(self.wfile, result)
        except (ConnectionError, OSError):
            return


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class BridgeServer:
    """Owns the backbone, the embedding cache, and the listening socket."""

    def __init__(self, backbone, host: str = "127.0.0.1", port: int = 0,
                 deterministic: bool = True):
        self.backbone = backbone
        self.deterministic = deterministic
        if deterministic:
            backbone.pin_determinism()
        self._embeddings: dict[str, np.ndarray] = {}
        self._cache_lock = threading.Lock()
        self._tcp = _TCPServer((host, port), _Handler)
        self._tcp.bridge = self
        self.host, self.port = self._tcp.server_address

    def embedding(self, text: str) -> np.ndarray:
        with self._cache_lock:
            cached = self._embeddings.get(text)
            if cached is None:
                cached = self._embeddings[text] = self.backbone.embed(text)
            return cached

    def answer(self, opcode, timestep, text, shape, payload) -> np.ndarray:
        arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
        if not np.isfinite(arr).all():
            raise ValueError("payload contains non-finite values")
        if opcode == protocol.OP_EPS:
            emb = self.embedding(text) if text is not None else None
            return self.backbone.eps(arr, timestep, emb)
        if opcode == protocol.OP_ENCODE:
            return self.backbone.encode(arr)
        return self.backbone.decode(arr)

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    def start(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def shutdown(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc_info):
        self.shutdown()


def serve(address: str, model: str, deterministic: bool = True) -> None:
    """Run a bridge at HOST:PORT until interrupted."""
    host, _, port = address.partition(":")
    server = BridgeServer(load_backbone(model), host=host or "127.0.0.1",
                          port=int(port or 0), deterministic=deterministic)
    print(f"fbsdiff-bridge: serving {model} on {server.host}:{server.port} "
          f"(deterministic={deterministic})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
