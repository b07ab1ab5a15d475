"""Minimal Chromium DevTools protocol driver: launch, connect, command, await events."""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
import os
import re
import shutil
import signal
import subprocess
import tempfile
from typing import Any, Callable, Sequence

import websockets

logger = logging.getLogger(__name__)

BROWSER_ENV = "WEBMEASURE_BROWSER"
CANDIDATES = ("chromium", "chromium-browser", "google-chrome", "google-chrome-stable", "chrome", "msedge")

_LISTENING = re.compile(r"DevTools listening on (ws://\S+)")


class BrowserLaunchError(RuntimeError):
    """The browser could not be started; an environment problem, not a site failure."""


class CDPError(RuntimeError):
    def __init__(self, method: str, error: dict):
        self.method = method
        self.error = error
        super().__init__(f"{method}: {error.get('message', error)}")


def find_browser(explicit: str | None = None) -> str | None:
    for candidate in (explicit, os.environ.get(BROWSER_ENV)):
        if candidate:
            return candidate if os.path.exists(candidate) else shutil.which(candidate)
    for name in CANDIDATES:
        path = shutil.which(name)
        if path:
            return path
    return None


class Browser:
    """One browser process with its own throwaway profile directory."""

    def __init__(
        self,
        executable: str,
        *,
        headful: bool = True,
        window: tuple[int, int] = (1366, 768),
        extra_args: Sequence[str] = (),
        launch_timeout: float = 30.0,
    ):
        self.executable = executable
        self.headful = headful
        self.window = window
        self.extra_args = tuple(extra_args)
        self.launch_timeout = launch_timeout
        self.profile: str | None = None
        self.proc: asyncio.subprocess.Process | None = None
        self.ws_url: str | None = None

    def args(self) -> list[str]:
        args = [
            self.executable,
            "--remote-debugging-port=0",
            f"--user-data-dir={self.profile}",
            "--no-first-run",
            "--no-default-browser-check",
            "--disable-background-networking",
            "--disable-sync",
            "--disable-extensions",
            "--disable-component-update",
            "--metrics-recording-only",
            "--password-store=basic",
            f"--window-size={self.window[0]},{self.window[1]}",
        ]
        if not self.headful:
            args.append("--headless")
        args.extend(self.extra_args)
        args.append("about:blank")
        return args

    async def start(self) -> str:
        self.profile = tempfile.mkdtemp(prefix="webmeasure-profile-")
        try:
            self.proc = await asyncio.create_subprocess_exec(
                *self.args(),
                stdin=subprocess.DEVNULL,
                stdout=subprocess.DEVNULL,
                stderr=subprocess.PIPE,
                start_new_session=True,
            )
        except OSError as exc:
            self._cleanup_profile()
            raise BrowserLaunchError(f"cannot execute {self.executable}: {exc}") from exc
        try:
            self.ws_url = await asyncio.wait_for(self._read_ws_url(), self.launch_timeout)
        except (asyncio.TimeoutError, BrowserLaunchError) as exc:
            await self.close()
            if isinstance(exc, BrowserLaunchError):
                raise
            raise BrowserLaunchError(f"{self.executable} did not expose a DevTools endpoint") from None
        # Keep draining stderr so the browser never blocks on a full pipe.
        self._drain = asyncio.ensure_future(self._drain_stderr())
        return self.ws_url

    async def _read_ws_url(self) -> str:
        assert self.proc and self.proc.stderr
        tail: list[str] = []
        while True:
            line = await self.proc.stderr.readline()
            if not line:
                raise BrowserLaunchError(
                    f"{self.executable} exited before DevTools was ready: {' | '.join(tail[-5:])}"
                )
            text = line.decode(errors="replace").strip()
            tail.append(text)
            m = _LISTENING.search(text)
            if m:
                return m.group(1)

    async def _drain_stderr(self) -> None:
        assert self.proc and self.proc.stderr
        try:
            while await self.proc.stderr.readline():
                pass
        except Exception:
            pass

    async def close(self) -> None:
        proc = self.proc
        if proc is not None and proc.returncode is None:
            try:
                os.killpg(proc.pid, signal.SIGTERM)
            except ProcessLookupError:
                pass
            try:
                await asyncio.wait_for(proc.wait(), 5)
            except asyncio.TimeoutError:
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
                await proc.wait()
        drain = getattr(self, "_drain", None)
        if drain is not None:
            drain.cancel()
        self._cleanup_profile()

    def _cleanup_profile(self) -> None:
        if self.profile:
            shutil.rmtree(self.profile, ignore_errors=True)
            self.profile = None


class Connection:
    """A browser-level websocket carrying flattened target sessions."""

    def __init__(self, ws):
        self.ws = ws
        self._ids = itertools.count(1)
        self._pending: dict[int, asyncio.Future] = {}
        self._waiters: list[tuple[str, str | None, Callable[[dict], bool], asyncio.Future]] = []
        self._listeners: list[Callable[[str, str | None, dict], None]] = []
        self._reader = asyncio.ensure_future(self._read_loop())

    @classmethod
    async def connect(cls, ws_url: str) -> Connection:
        ws = await websockets.connect(ws_url, max_size=None, ping_interval=None)
        return cls(ws)

    async def _read_loop(self) -> None:
        try:
            async for raw in self.ws:
                msg = json.loads(raw)
                if "id" in msg:
                    fut = self._pending.pop(msg["id"], None)
                    if fut and not fut.done():
                        fut.set_result(msg)
                    continue
                method, session, params = msg.get("method"), msg.get("sessionId"), msg.get("params", {})
                for listener in list(self._listeners):
                    listener(method, session, params)
                for waiter in list(self._waiters):
                    name, sess, pred, fut = waiter
                    if name == method and (sess is None or sess == session) and not fut.done() and pred(params):
                        fut.set_result(params)
                        self._waiters.remove(waiter)
        except websockets.ConnectionClosed:
            pass
        finally:
            for fut in self._pending.values():
                if not fut.done():
                    fut.set_exception(ConnectionError("DevTools connection closed"))
            for *_, fut in self._waiters:
                if not fut.done():
                    fut.set_exception(ConnectionError("DevTools connection closed"))

    async def send(self, method: str, params: dict | None = None, session: str | None = None) -> dict:
        msg_id = next(self._ids)
        payload: dict[str, Any] = {"id": msg_id, "method": method, "params": params or {}}
        if session:
            payload["sessionId"] = session
        fut = asyncio.get_running_loop().create_future()
        self._pending[msg_id] = fut
        await self.ws.send(json.dumps(payload))
        reply = await fut
        if "error" in reply:
            raise CDPError(method, reply["error"])
        return reply.get("result", {})

    def expect(self, method: str, session: str | None = None, predicate: Callable[[dict], bool] = lambda p: True):
        """Register interest in an event before triggering it; await the returned future."""
        fut = asyncio.get_running_loop().create_future()
        self._waiters.append((method, session, predicate, fut))
        return fut

    def on(self, listener: Callable[[str, str | None, dict], None]) -> None:
        self._listeners.append(listener)

    async def close(self) -> None:
        self._reader.cancel()
        try:
            await self.ws.close()
        except Exception:
            pass
