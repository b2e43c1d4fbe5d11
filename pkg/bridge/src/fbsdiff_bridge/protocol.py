"""Server-side framing for the bridge wire protocol (little-endian).

Handshake: the client sends b"FBSD" + u16 version; the server echoes the same
six bytes and then answers request frames until the peer disconnects.

Request frames carry: opcode u8 (1=EPS, 2=ENCODE, 3=DECODE), timestep u32
(EPS only), cond-kind u8 (0=null, 1=text with u32 length + UTF-8), shape
u32 c,h,w, and c*h*w float32 values. Responses carry status u8 (0=ok with a
shape-prefixed float payload, 1=error with u32 length + UTF-8 message).

Malformed frames get a status-1 reply; the connection stays open whenever the
stream position is still well defined. Frames whose declared sizes are
implausible (or whose remaining length is ambiguous) also get a status-1
reply, after which the server drops the connection rather than guess.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"FBSD"
PROTOCOL_VERSION = 1
OP_EPS, OP_ENCODE, OP_DECODE = 1, 2, 3

MAX_TEXT_BYTES = 1 << 20
MAX_ELEMENTS = 1 << 26


class FrameError(Exception):
    """Reject a request; `fatal` marks the stream as unrecoverable."""

    def __init__(self, message: str, fatal: bool = False):
        super().__init__(message)
        self.fatal = fatal


def read_exact(rfile, n: int) -> bytes:
    buf = rfile.read(n)
    if buf is None or len(buf) < n:
        raise ConnectionError("peer closed mid-frame")
    return buf


def read_handshake(rfile) -> None:
    hello = read_exact(rfile, 6)
    if hello[:4] != MAGIC:
        raise ConnectionError(f"bad magic {hello[:4]!r}")
    (version,) = struct.unpack("<H", hello[4:6])
    if version != PROTOCOL_VERSION:
        raise ConnectionError(f"unsupported protocol version {version}")


def write_handshake_echo(wfile) -> None:
    wfile.write(MAGIC + struct.pack("<H", PROTOCOL_VERSION))
    wfile.flush()


def read_request(rfile):
    """Parse one request; returns (opcode, timestep, text, shape, payload bytes).

    Raises FrameError for protocol violations and ConnectionError on EOF at a
    frame boundary (clean disconnect) or mid-frame.
    """
    head = rfile.read(1)
    if not head:
        raise EOFError  # clean end of session
    (opcode,) = struct.unpack("<B", head)
    if opcode not in (OP_EPS, OP_ENCODE, OP_DECODE):
        # only the opcode byte was consumed, so the stream stays aligned if
        # the peer sent a bare byte; otherwise it will surface more errors
        raise FrameError(f"unknown opcode {opcode}")
    timestep = None
    if opcode == OP_EPS:
        (timestep,) = struct.unpack("<I", read_exact(rfile, 4))
    (kind,) = struct.unpack("<B", read_exact(rfile, 1))
    text = None
    if kind == 1:
        (tlen,) = struct.unpack("<I", read_exact(rfile, 4))
        if tlen > MAX_TEXT_BYTES:
            raise FrameError(f"text length {tlen} exceeds cap", fatal=True)
        text = read_exact(rfile, tlen).decode("utf-8", errors="replace")
    elif kind != 0:
        raise FrameError(f"unknown cond-kind {kind}", fatal=True)
    c, h, w = struct.unpack("<III", read_exact(rfile, 12))
    n = c * h * w
    if n > MAX_ELEMENTS:
        raise FrameError(f"shape ({c}, {h}, {w}) exceeds element cap", fatal=True)
    if n == 0:
        raise FrameError(f"shape ({c}, {h}, {w}) has a zero dimension")
    payload = read_exact(rfile, 4 * n)
    return opcode, timestep, text, (c, h, w), payload


def write_ok(wfile, array) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    wfile.write(struct.pack("<BIII", 0, *arr.shape))
    wfile.write(arr.tobytes())
    wfile.flush()


def write_error(wfile, message: str) -> None:
    raw = message.encode("utf-8")
    wfile.write(struct.pack("<BI", 1, len(raw)) + raw)
    wfile.flush()
