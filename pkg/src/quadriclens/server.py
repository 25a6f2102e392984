"""Length-prefixed binary protocol serving scene state, events, and frames.

One frame on the wire is

    u32le payload_length | u8 kind | payload bytes

with payload_length counting the kind byte plus the body. All integers are
little-endian; floats are IEEE-754 binary64. Message kinds:

    1 HELLO          u32 protocol version. Sent by the client first; the
                     engine answers with its own version and closes on a
                     mismatch.
    2 SCENE_SNAPSHOT UTF-8 scene document. An empty body is a request.
    3 EVENT          u64 timestamp_ms, u8 device (0 primary, 1 secondary),
                     f64 px py pz qw qx qy qz, u16 button bitmask
                     (bit i = BUTTON_FLAGS[i]).
    4 ACK            u32 event sequence number, u32 state version.
    5 FRAME          u32 sequence, u32 width, u32 height, RGBA8 pixels
                     row-major from the top-left. An empty body requests a
                     render of the current state.
    6 HOVER          u8 present, u32 lens id, u8 handle kind
                     (0 origin, 1 k1_pos, 2 k1_neg, 3 k2_pos, 4 k2_neg).

The engine processes one client at a time; events apply strictly in arrival
order, so a client's event stream replayed from a log reproduces the same
scene.
"""

from __future__ import annotations

import socket
import struct

from .context import image_to_u8
from .lens import HANDLE_KINDS
from .session import (
    BUTTON_FLAGS,
    DEVICES,
    EventError,
    InteractionEvent,
    SessionState,
    apply_event,
    render_scene,
    serialize_scene,
)

PROTOCOL_VERSION = 1

MSG_HELLO = 1
MSG_SCENE_SNAPSHOT = 2
MSG_EVENT = 3
MSG_ACK = 4
MSG_FRAME = 5
MSG_HOVER = 6

MAX_MESSAGE_BYTES = 64 * 1024 * 1024

_EVENT_STRUCT = struct.Struct("<QB7dH")
_ACK_STRUCT = struct.Struct("<II")
_FRAME_HEAD_STRUCT = struct.Struct("<III")
_HELLO_STRUCT = struct.Struct("<I")
_HOVER_STRUCT = struct.Struct("<BIB")


class ProtocolError(RuntimeError):
    """Malformed or oversized wire message."""


def encode_message(kind: int, payload: bytes = b"") -> bytes:
    if not 0 <= kind <= 255:
        raise ProtocolError(f"message kind {kind} out of range")
    return struct.pack("<I", len(payload) + 1) + bytes([kind]) + payload


def encode_event(event: InteractionEvent) -> bytes:
    flags = 0
    for i, name in enumerate(BUTTON_FLAGS):
        if name in event.buttons:
            flags |= 1 << i
    return _EVENT_STRUCT.pack(
        event.timestamp,
        DEVICES.index(event.device),
        *event.position,
        *event.orientation,
        flags,
    )


def decode_event(payload: bytes) -> InteractionEvent:
    if len(payload) != _EVENT_STRUCT.size:
        raise ProtocolError(
            f"EVENT payload must be {_EVENT_STRUCT.size} bytes, got {len(payload)}"
        )
    ts, device, px, py, pz, qw, qx, qy, qz, flags = _EVENT_STRUCT.unpack(payload)
    if device >= len(DEVICES):
        raise ProtocolError(f"unknown device code {device}")
    if flags >> len(BUTTON_FLAGS):
        raise ProtocolError(f"unknown button bits in 0x{flags:04x}")
    buttons = frozenset(
        name for i, name in enumerate(BUTTON_FLAGS) if flags & (1 << i)
    )
    return InteractionEvent(
        timestamp=ts,
        device=DEVICES[device],
        position=(px, py, pz),
        orientation=(qw, qx, qy, qz),
        buttons=buttons,
    )


def encode_hover(state: SessionState) -> bytes:
    hover = state.hover
    if hover is None:
        return _HOVER_STRUCT.pack(0, 0, 0)
    return _HOVER_STRUCT.pack(1, hover.lens_id, HANDLE_KINDS.index(hover.kind))


def read_exact(sock: socket.socket, n: int) -> bytes | None:
    """n bytes from the socket, or None on a clean EOF at a frame boundary."""
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            if got == 0:
                return None
            raise ProtocolError("connection closed mid-message")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_message(sock: socket.socket) -> tuple[int, bytes] | None:
    head = read_exact(sock, 4)
    if head is None:
        return None
    (length,) = struct.unpack("<I", head)
    if length < 1:
        raise ProtocolError("message length must cover the kind byte")
    if length > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"message of {length} bytes exceeds the limit")
    body = read_exact(sock, length)
    if body is None or len(body) != length:
        raise ProtocolError("connection closed mid-message")
    return body[0], body[1:]


def send_message(sock: socket.socket, kind: int, payload: bytes = b"") -> None:
    sock.sendall(encode_message(kind, payload))


class EngineServer:
    """Serves one workbench client over a local TCP socket."""

    def __init__(self, state: SessionState, host: str = "127.0.0.1", port: int = 0):
        self.state = state
        self.state_version = 0
        self.event_seq = 0
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(1)

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def close(self) -> None:
        self._listener.close()

    def serve_once(self) -> SessionState:
        """Accept one client, process its messages until it disconnects."""
        conn, _ = self._listener.accept()
        try:
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            while True:
                msg = read_message(conn)
                if msg is None:
                    break
                kind, payload = msg
                if not self._handle(conn, kind, payload):
                    break
        finally:
            conn.close()
        return self.state

    def _handle(self, conn, kind: int, payload: bytes) -> bool:
        if kind == MSG_HELLO:
            if len(payload) != _HELLO_STRUCT.size:
                raise ProtocolError("HELLO payload must be 4 bytes")
            (version,) = _HELLO_STRUCT.unpack(payload)
            send_message(conn, MSG_HELLO, _HELLO_STRUCT.pack(PROTOCOL_VERSION))
            return version == PROTOCOL_VERSION
        if kind == MSG_SCENE_SNAPSHOT:
            if payload:
                raise ProtocolError("only the engine sends scene documents")
            doc = serialize_scene(self.state).encode("utf-8")
            send_message(conn, MSG_SCENE_SNAPSHOT, doc)
            return True
        if kind == MSG_EVENT:
            event = decode_event(payload)
            self.event_seq += 1
            try:
                self.state = apply_event(self.state, event)
                self.state_version += 1
            except EventError:
                pass  # rejected event: acknowledge without a version bump
            send_message(conn, MSG_ACK, _ACK_STRUCT.pack(self.event_seq, self.state_version))
            send_message(conn, MSG_HOVER, encode_hover(self.state))
            return True
        if kind == MSG_FRAME:
            if payload:
                raise ProtocolError("only the engine sends frame payloads")
            image, _ = render_scene(self.state)
            rgba = image_to_u8(image)
            head = _FRAME_HEAD_STRUCT.pack(
                self.state_version, rgba.shape[1], rgba.shape[0]
            )
            send_message(conn, MSG_FRAME, head + rgba.tobytes())
            return True
        raise ProtocolError(f"unknown message kind {kind}")
