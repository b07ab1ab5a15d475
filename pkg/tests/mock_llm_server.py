"""Scripted chat-completion server speaking both wire dialects."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class MockLLMServer:
    """Replies from ``script`` in order (status, body text); the last entry repeats.

    With ``latch`` set, every request blocks until ``release()`` so tests can
    observe how many requests are in flight at once.
    """

    def __init__(self, script=((200, "ok"),), latch: bool = False):
        self.script = list(script)
        self.requests: list[dict] = []
        self.headers: list[dict] = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        self._gate = threading.Event()
        if not latch:
            self._gate.set()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *a):
                pass

            def do_POST(self):  # noqa: N802
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                with outer._lock:
                    outer.requests.append({"path": self.path, "json": json.loads(body)})
                    outer.headers.append(dict(self.headers))
                    idx = min(len(outer.requests) - 1, len(outer.script) - 1)
                    outer.in_flight += 1
                    outer.max_in_flight = max(outer.max_in_flight, outer.in_flight)
                outer._gate.wait(10)
                status, text = outer.script[idx]
                if status == 200:
                    if self.path.endswith(":generateContent"):
                        payload = {
                            "candidates": [{"content": {"parts": [{"text": text}]}}],
                            "usageMetadata": {"promptTokenCount": 11, "candidatesTokenCount": 3},
                        }
                    else:
                        payload = {
                            "choices": [{"message": {"role": "assistant", "content": text}}],
                            "usage": {"prompt_tokens": 11, "completion_tokens": 3},
                        }
                    data = json.dumps(payload).encode()
                else:
                    data = json.dumps({"error": text}).encode()
                with outer._lock:
                    outer.in_flight -= 1
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.httpd.daemon_threads = True
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"
        self._thread = threading.Thread(target=self.httpd.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True)

    def release(self) -> None:
        self._gate.set()

    def __enter__(self) -> MockLLMServer:
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._gate.set()
        self.httpd.shutdown()
        self.httpd.server_close()
