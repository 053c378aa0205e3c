"""HTTP service exposing the editor backend.

Endpoints (all under /api/v1):
  GET  /health           -> {"status": "ok", "model_id": ...}
  POST /edit             -> decoder previews at network resolution; accepts a
                            raw PNG body or multipart/form-data with a file part
  POST /export           -> full-resolution PNG; JSON body {"image": base64 PNG,
                            "wb": preset} or {"image": ..., "temperature": kelvin}

Errors are JSON {"code", "message"} with a matching HTTP status. The network
is shared read-only across request threads.
"""

from __future__ import annotations

import base64
import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .imgio import decode_png, encode_png
from .pipeline import EditRequest, edit_wb, resize_for_net, _run_decoders


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def _parse_multipart(body: bytes, content_type: str) -> bytes:
    """Extract the first file part from a multipart/form-data body."""
    for piece in content_type.split(";"):
        piece = piece.strip()
        if piece.startswith("boundary="):
            boundary = piece[len("boundary="):].strip('"')
            break
    else:
        raise ServiceError(400, "bad_request", "multipart body without boundary")
    sep = b"--" + boundary.encode()
    for part in body.split(sep):
        if b"\r\n\r\n" not in part:
            continue
        headers, payload = part.split(b"\r\n\r\n", 1)
        if b"content-disposition" in headers.lower():
            return payload.rstrip(b"\r\n-")
    raise ServiceError(400, "bad_request", "no file part in multipart body")


class WbRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    # -- plumbing -------------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _send(self, status: int, content_type: str, payload: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, obj) -> None:
        self._send(status, "application/json", json.dumps(obj).encode())

    def _fail(self, err: ServiceError) -> None:
        self._send_json(err.status, {"code": err.code, "message": str(err)})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        if length <= 0:
            raise ServiceError(400, "bad_request", "empty request body")
        return self.rfile.read(length)

    # -- routes ---------------------------------------------------------------

    def do_GET(self):
        if self.path == "/api/v1/health":
            self._send_json(200, {"status": "ok", "model_id": self.server.model_id})
        else:
            self._fail(ServiceError(404, "not_found", f"unknown path {self.path}"))

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_POST(self):
        try:
            if self.path == "/api/v1/edit":
                self._handle_edit()
            elif self.path == "/api/v1/export":
                self._handle_export()
            else:
                raise ServiceError(404, "not_found", f"unknown path {self.path}")
        except ServiceError as err:
            self._fail(err)
        except Exception as err:  # surface anything else as a structured error
            self._fail(ServiceError(500, "internal_error", f"{type(err).__name__}: {err}"))

    def _decode_image(self, data: bytes) -> np.ndarray:
        try:
            return decode_png(data)
        except Exception as err:
            raise ServiceError(400, "decode_error", f"could not decode image: {err}")

    def _handle_edit(self):
        body = self._read_body()
        ctype = self.headers.get("Content-Type", "")
        if ctype.startswith("multipart/form-data"):
            body = _parse_multipart(body, ctype)
        image = self._decode_image(body)
        try:
            resized = resize_for_net(image, multiple=max(16, self.server.net.config.size_multiple))
        except ValueError as err:
            raise ServiceError(400, "bad_image", str(err))
        previews = _run_decoders(self.server.net, resized,
                                 list(self.server.net.config.decoder_ids))
        payload = {name: base64.b64encode(encode_png(img)).decode("ascii")
                   for name, img in previews.items()}
        payload["width"] = int(resized.shape[1])
        payload["height"] = int(resized.shape[0])
        self._send_json(200, payload)

    def _handle_export(self):
        try:
            req = json.loads(self._read_body())
        except json.JSONDecodeError as err:
            raise ServiceError(400, "bad_request", f"invalid JSON: {err}")
        if "image" not in req:
            raise ServiceError(400, "bad_request", "missing 'image' field")
        image = self._decode_image(base64.b64decode(req["image"]))
        if "temperature" in req:
            target = req["temperature"]
        elif "wb" in req:
            target = str(req["wb"])
        else:
            raise ServiceError(400, "bad_request", "need 'wb' or 'temperature'")
        try:
            result = edit_wb(self.server.net, EditRequest(image=image, target=target))
        except (KeyError, ValueError) as err:
            raise ServiceError(400, "bad_target", str(err))
        self._send(200, "image/png", encode_png(result.output))


def make_server(net, model_id: str, host: str = "127.0.0.1", port: int = 8765,
                verbose: bool = False) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), WbRequestHandler)
    server.net = net
    server.model_id = model_id
    server.verbose = verbose
    return server


def serve(net, model_id: str, host: str = "127.0.0.1", port: int = 8765) -> None:
    server = make_server(net, model_id, host, port, verbose=True)
    print(f"serving on http://{host}:{port} (model {model_id})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
