"""HTTP+JSON transport for :class:`MockServer`.

    GET  /getwritings/{token}      -> [{"nick", "number", "title", "content", "date"}]
    POST /submit/{token}/{run}     <- [{"nick", "decision", "score"}]
                                   -> {"status": "ok", "round": r}

Errors come back as ``{"error": message}`` with a 4xx status.
"""
from __future__ import annotations

import json
import logging
import threading
import time
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote

from .server import MockServer, ProtocolError

log = logging.getLogger(__name__)


class ServerUnreachable(ConnectionError):
    pass


def make_handler(server: MockServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

        def _send(self, status: int, payload) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _parts(self) -> list[str]:
            return [unquote(p) for p in self.path.split("?", 1)[0].strip("/").split("/")]

        def do_GET(self):
            parts = self._parts()
            try:
                if len(parts) == 2 and parts[0] == "getwritings":
                    self._send(200, server.get_writings(parts[1]))
                else:
                    self._send(404, {"error": f"no route for GET {self.path}"})
            except ProtocolError as exc:
                self._send(exc.status, {"error": str(exc)})

        def do_POST(self):
            parts = self._parts()
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if len(parts) != 3 or parts[0] != "submit":
                self._send(404, {"error": f"no route for POST {self.path}"})
                return
            try:
                run = int(parts[2])
            except ValueError:
                self._send(404, {"error": f"unknown run {parts[2]!r}"})
                return
            try:
                body = json.loads(raw or b"null")
            except json.JSONDecodeError:
                self._send(400, {"error": "request body is not JSON"})
                return
            try:
                self._send(200, server.submit(parts[1], run, body))
            except ProtocolError as exc:
                self._send(exc.status, {"error": str(exc)})

    return Handler


def start_http_server(server: MockServer, host: str = "127.0.0.1", port: int = 0):
    """Serve in a daemon thread; returns (httpd, base_url)."""
    httpd = ThreadingHTTPServer((host, port), make_handler(server))
    httpd.daemon_threads = True
    thread = threading.Thread(target=httpd.serve_forever, name="mock-server", daemon=True)
    thread.start()
    h, p = httpd.server_address[:2]
    return httpd, f"http://{h}:{p}"


def stop_http_server(httpd) -> None:
    httpd.shutdown()
    httpd.server_close()


class LocalConnection:
    """In-process connection to a :class:`MockServer` (no sockets)."""

    def __init__(self, server: MockServer, token: str):
        self.server = server
        self.token = token

    def get_writings(self) -> list[dict]:
        return self.server.get_writings(self.token)

    def submit(self, run: int, decisions: list[dict]) -> dict:
        return self.server.submit(self.token, run, decisions)


class HttpConnection:
    """Client side of the HTTP transport with bounded exponential backoff."""

    def __init__(self, base_url: str, token: str, retries: int = 6, backoff: float = 0.1, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout

    def _call(self, method: str, path: str, payload=None):
        data = json.dumps(payload).encode("utf-8") if payload is not None else None
        req = urllib.request.Request(self.base_url + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read())

    def _with_retry(self, fn):
        delay = self.backoff
        for attempt in range(self.retries + 1):
            try:
                return fn()
            except urllib.error.HTTPError as exc:
                try:
                    msg = json.loads(exc.read()).get("error", str(exc))
                except (ValueError, AttributeError):
                    msg = str(exc)
                raise ProtocolError(msg, status=exc.code) from None
            except (urllib.error.URLError, ConnectionError, TimeoutError) as exc:
                if attempt == self.retries:
                    raise ServerUnreachable(f"server {self.base_url} unreachable: {exc}") from exc
                log.warning("server unreachable (%s); retrying in %.2fs", exc, delay)
                time.sleep(delay)
                delay *= 2

    def get_writings(self) -> list[dict]:
        return self._with_retry(lambda: self._call("GET", f"/getwritings/{self.token}"))

    def submit(self, run: int, decisions: list[dict]) -> dict:
        return self._with_retry(lambda: self._call("POST", f"/submit/{self.token}/{run}", decisions))
