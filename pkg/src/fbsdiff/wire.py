"""Client side of the binary wire protocol for remote denoiser and codec
backends. All integers and floats are little-endian.

Handshake: the client sends magic b"FBSD" + u16 protocol version (=1) and the
server echoes the same six bytes.

Request frame:
    opcode      u8   (1 = EPS, 2 = ENCODE, 3 = DECODE)
    timestep    u32  (EPS only)
    cond-kind   u8   (0 = null, 1 = text)
    text-length u32 + UTF-8 bytes   (only when cond-kind = 1)
    shape       u32 c, u32 h, u32 w
    payload     c * h * w IEEE-754 32-bit floats

Response frame:
    status      u8   (0 = ok, 1 = error)
    on ok:      shape-prefixed float payload as above
    on error:   u32 length + UTF-8 message
"""

from __future__ import annotations

import os
import socket
import struct
import threading

import numpy as np

from .errors import BackendError

MAGIC = b"FBSD"
PROTOCOL_VERSION = 1
OP_EPS, OP_ENCODE, OP_DECODE = 1, 2, 3

TIMEOUT_ENV = "FBSDIFF_REMOTE_TIMEOUT_MS"
DEFAULT_TIMEOUT_MS = 60_000

# Sanity caps so a corrupt response cannot trigger a huge allocation.
MAX_ELEMENTS = 1 << 26
MAX_MESSAGE = 1 << 20


def default_timeout_ms() -> int:
    raw = os.environ.get(TIMEOUT_ENV)
    if raw is None:
        return DEFAULT_TIMEOUT_MS
    try:
        ms = int(raw)
        if ms <= 0:
            raise ValueError
    except ValueError:
        raise BackendError(f"{TIMEOUT_ENV} must be a positive integer, got {raw!r}") from None
    return ms


def pack_request(opcode: int, array: np.ndarray, timestep: int | None = None,
                 text: str | None = None) -> bytes:
    """Serialize one request frame; `array` must have shape (c, h, w)."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim != 3:
        raise BackendError(f"wire payload must be (c, h, w), got shape {arr.shape}")
    parts = [struct.pack("<B", opcode)]
    if opcode == OP_EPS:
        if timestep is None:
            raise BackendError("EPS request requires a timestep")
        parts.append(struct.pack("<I", timestep))
    if text is None:
        parts.append(struct.pack("<B", 0))
    else:
        raw = text.encode("utf-8")
        parts.append(struct.pack("<BI", 1, len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<III", *arr.shape))
    parts.append(arr.tobytes())
    return b"".join(parts)


class ServerReportedError(BackendError):
    """The server answered with a well-formed error frame; the connection is
    still in sync and remains usable."""


def recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            chunk = sock.recv(n - len(buf))
        except (OSError, socket.timeout) as exc:
            raise BackendError(f"remote read failed: {exc}") from exc
        if not chunk:
            raise BackendError("remote connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def read_response(sock: socket.socket) -> np.ndarray:
    """Parse one response frame; returns a float32 (c, h, w) array or raises
    BackendError carrying the server's message."""
    (status,) = struct.unpack("<B", recv_exact(sock, 1))
    if status == 0:
        c, h, w = struct.unpack("<III", recv_exact(sock, 12))
        n = c * h * w
        if not 0 < n <= MAX_ELEMENTS:
            raise BackendError(f"remote sent implausible payload shape ({c}, {h}, {w})")
        data = recv_exact(sock, 4 * n)
        return np.frombuffer(data, dtype="<f4").reshape(c, h, w).copy()
    if status == 1:
        (length,) = struct.unpack("<I", recv_exact(sock, 4))
        if length > MAX_MESSAGE:
            raise BackendError(f"remote error message implausibly long ({length} bytes)")
        msg = recv_exact(sock, length).decode("utf-8", errors="replace")
        raise ServerReportedError(f"remote backend error: {msg}")
    raise BackendError(f"remote sent unknown response status {status}")


class RemoteConnection:
    """One protocol connection with at most one request in flight.

    Connects lazily on the first request. Handles may move between threads;
    a lock serializes concurrent callers onto the single connection.
    """

    def __init__(self, host: str, port: int, timeout_ms: int | None = None):
        self.host = host
        self.port = int(port)
        self.timeout_ms = default_timeout_ms() if timeout_ms is None else int(timeout_ms)
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def _connect(self) -> socket.socket:
        try:
            sock = socket.create_connection((self.host, self.port),
                                            timeout=self.timeout_ms / 1000.0)
        except OSError as exc:
            raise BackendError(f"cannot connect to {self.address}: {exc}") from exc
        hello = MAGIC + struct.pack("<H", PROTOCOL_VERSION)
        try:
            sock.sendall(hello)
            echo = recv_exact(sock, len(hello))
        except BackendError:
            sock.close()
            raise
        if echo != hello:
            sock.close()
            raise BackendError(f"handshake mismatch from {self.address}: {echo!r}")
        return sock

    def request(self, opcode: int, array: np.ndarray, timestep: int | None = None,
                text: str | None = None) -> np.ndarray:
        frame = pack_request(opcode, array, timestep=timestep, text=text)
        with self._lock:
            if self._sock is None:
                self._sock = self._connect()
            try:
                self._sock.sendall(frame)
                return read_response(self._sock)
            except ServerReportedError:
                raise
            except (BackendError, OSError) as exc:
                # Stream state is unknown after a transport or framing
                # failure; drop the socket so the next request reconnects.
                self._close_locked()
                if isinstance(exc, BackendError):
                    raise
                raise BackendError(f"remote send failed: {exc}") from exc

    def _close_locked(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def close(self) -> None:
        with self._lock:
            self._close_locked()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
