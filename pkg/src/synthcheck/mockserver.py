"""HTTP server wrapping a mock model, speaking the backend wire contract."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .mock import MockModelConfig


class MockBackendServer:
    """Localhost server exposing /v1/complete and /v1/score_options for one mock model."""

    def __init__(self, config: MockModelConfig, host: str = "127.0.0.1", port: int = 0):
        self.config = config
        handler = _make_handler(config)
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockBackendServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockBackendServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.shutdown()


def _make_handler(config: MockModelConfig):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # keep test output quiet
            pass

        def _reply(self, status: int, obj: dict) -> None:
            data = json.dumps(obj).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self) -> None:
            length = int(self.headers.get("Content-Length", "0"))
            try:
                payload = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                self._reply(400, {"error": "request body is not valid JSON"})
                return
            if self.path == "/v1/complete":
                self._complete(payload)
            elif self.path == "/v1/score_options":
                self._score(payload)
            else:
                self._reply(404, {"error": f"unknown path {self.path}"})

        def _complete(self, payload: dict) -> None:
            prompt = payload.get("prompt")
            max_tokens = payload.get("max_tokens")
            top_p = payload.get("top_p", 1.0)
            if not isinstance(prompt, str) or not isinstance(max_tokens, int) or max_tokens < 1:
                self._reply(400, {"error": "need string prompt and positive integer max_tokens"})
                return
            if not (isinstance(top_p, (int, float)) and 0.0 < top_p <= 1.0):
                self._reply(400, {"error": "top_p must be in (0, 1]"})
                return
            seed = payload.get("seed")
            text = config.complete(prompt, max_tokens, seed if isinstance(seed, int) else None)
            self._reply(200, {"text": text})

        def _score(self, payload: dict) -> None:
            prompt = payload.get("prompt")
            options = payload.get("options")
            if not isinstance(prompt, str) or not isinstance(options, list) or not options:
                self._reply(400, {"error": "need string prompt and non-empty options list"})
                return
            if len(set(options)) != len(options):
                self._reply(400, {"error": "options must be distinct"})
                return
            self._reply(200, {"logprobs": config.score_options(prompt, options)})

    return Handler
