"""Out-of-process world generators over a local socket.

Wire format (all integers big-endian u32):

    request:  b"PXWG" | header_len | header JSON | png_len | PNG (current view)
    response: b"PXWG" | header_len | header JSON | frame_count x (png_len | PNG)

The request header carries the action (frame_count, width, height,
heading_change, distance, vertical) plus the engine's dead-reckoned frame
poses; a learned generator is free to ignore the poses.  Frames travel as
8-bit PNG, so the transport is bit-exact in the quantised domain.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading

from .errors import GeneratorError
from .explore import WorldGenerator
from .imageio import decode_png, encode_png

MAGIC = b"PXWG"


def _send_block(sock, payload: bytes):
    sock.sendall(struct.pack(">I", len(payload)) + payload)


def _recv_exact(sock, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise GeneratorError("generator connection closed mid-message")
        buf += chunk
    return buf


def _recv_block(sock) -> bytes:
    (n,) = struct.unpack(">I", _recv_exact(sock, 4))
    return _recv_exact(sock, n)


def _write_message(sock, header: dict, payloads):
    sock.sendall(MAGIC)
    _send_block(sock, json.dumps(header).encode())
    for p in payloads:
        _send_block(sock, p)


def _read_header(sock) -> dict:
    magic = _recv_exact(sock, 4)
    if magic != MAGIC:
        raise GeneratorError(f"bad magic {magic!r}")
    return json.loads(_recv_block(sock).decode())


class ExternalGenerator(WorldGenerator):
    """Client side: forwards each step to a generator service."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, timeout: float = 30.0):
        self.host = host
        self.port = port
        self.timeout = timeout

    def generate(self, view, config, poses):
        header = {
            "frame_count": config.frame_count,
            "width": int(view.shape[1]),
            "height": int(view.shape[0]),
            "heading_change": config.heading_change,
            "distance": config.distance,
            "vertical": config.vertical,
            "poses": [p.to_json() for p in poses],
        }
        with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
            _write_message(sock, header, [encode_png(view)])
            resp = _read_header(sock)
            if "error" in resp:
                raise GeneratorError(f"generator service error: {resp['error']}")
            frames = [decode_png(_recv_block(sock)) for _ in range(resp["frame_count"])]
        if resp.get("width") != header["width"] or resp.get("height") != header["height"]:
            raise GeneratorError("generator service changed frame dimensions")
        return frames

    def describe(self):
        return {"kind": "external", "host": self.host, "port": self.port}


class _GeneratorHandler(socketserver.BaseRequestHandler):
    def handle(self):
        from .explore import ExplorationConfig
        from .world import Pose

        sock = self.request
        header = _read_header(sock)
        view = decode_png(_recv_block(sock))
        try:
            config = ExplorationConfig(header["heading_change"], header["distance"],
                                       header["frame_count"], header.get("vertical", 0.0))
            poses = [Pose.from_json(p) for p in header["poses"]]
            frames = self.server.generator.generate(view, config, poses)
        except Exception as exc:
            _write_message(sock, {"error": str(exc)}, [])
            return
        resp = {"frame_count": len(frames), "width": int(view.shape[1]),
                "height": int(view.shape[0])}
        _write_message(sock, resp, [encode_png(f) for f in frames])


class GeneratorServer(socketserver.ThreadingTCPServer):
    """Serve any WorldGenerator over the wire protocol (used to plug a real
    generator service into tests and demos)."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, generator: WorldGenerator, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _GeneratorHandler)
        self.generator = generator

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread
