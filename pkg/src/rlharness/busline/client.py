"""Client endpoint for the broker.

One :class:`BusClient` is one TCP connection. It can register node names,
serve services under them, call services on other nodes, publish, and
subscribe. Calls and publishes are safe from any thread.

Frames from the broker arrive in order on one connection, so an EVENT
published by a node before it replies to a call is always delivered to
local subscriptions before that call returns.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable

from ..errors import BusError, HarnessError
from .broker import parse_address
from .frames import FrameError, IncompleteFrameError, decode_frame, encode_frame

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 10.0
SUBSCRIPTION_BUFFER = 64

ServiceHandler = Callable[[Any], dict]


class _Pending:
    __slots__ = ("event", "reply")

    def __init__(self) -> None:
        self.event = threading.Event()
        self.reply: dict | None = None


class Subscription:
    """Bounded per-subscription buffer; the oldest messages are dropped first."""

    def __init__(self, client: "BusClient", topic: str, maxlen: int = SUBSCRIPTION_BUFFER):
        self.topic = topic
        self._client = client
        self._buf: deque = deque(maxlen=maxlen)
        self._cond = threading.Condition()
        self._latest: Any = None
        self.received = 0
        self.dropped = 0
        self.closed = False

    def _push(self, payload: Any) -> None:
        with self._cond:
            if len(self._buf) == self._buf.maxlen:
                self.dropped += 1
            self._buf.append(payload)
            self._latest = payload
            self.received += 1
            self._cond.notify_all()

    def _mark_closed(self) -> None:
        with self._cond:
            self.closed = True
            self._cond.notify_all()

    def latest(self) -> Any:
        """Most recent payload, or None before the first one."""
        with self._cond:
            return self._latest

    def clear(self) -> None:
        with self._cond:
            self._buf.clear()
            self._latest = None

    def get(self, timeout: float | None = None) -> Any:
        """Wait for and pop the oldest buffered payload."""
        with self._cond:
            if not self._cond.wait_for(lambda: self._buf or self.closed, timeout):
                raise BusError("TIMEOUT", f"no message on {self.topic} within {timeout}s")
            if self._buf:
                return self._buf.popleft()
            raise BusError("CLOSED", f"subscription to {self.topic} closed")

    def pending(self) -> int:
        with self._cond:
            return len(self._buf)

    def close(self) -> None:
        self._client._detach(self)
        self._mark_closed()


class BusClient:
    def __init__(
        self,
        address: str | tuple[str, int],
        timeout: float = DEFAULT_TIMEOUT,
        workers: int = 4,
    ):
        if isinstance(address, str):
            address = parse_address(address)
        self.address = address
        self.timeout = timeout
        try:
            self._sock = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise BusError("BUS_DOWN", f"cannot reach broker at {address[0]}:{address[1]}: {exc}") from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._ids = itertools.count(1)
        self._pending: dict[int, _Pending] = {}
        self._services: dict[tuple[str, str], ServiceHandler] = {}
        self._subs: dict[str, list[Subscription]] = {}
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="bus-svc")
        self._inflight = 0
        self._idle = threading.Condition(self._state_lock)
        self.closed = False
        self._reader = threading.Thread(target=self._read_loop, name="bus-reader", daemon=True)
        self._reader.start()

    # -- sending ----------------------------------------------------------

    def _send(self, body: dict) -> None:
        data = encode_frame(body)
        with self._send_lock:
            if self.closed:
                raise BusError("BUS_DOWN", "connection to broker is closed")
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise BusError("BUS_DOWN", f"send failed: {exc}") from exc

    def _request(self, body: dict, timeout: float | None) -> dict:
        req_id = next(self._ids)
        pending = _Pending()
        with self._state_lock:
            self._pending[req_id] = pending
        try:
            self._send({**body, "id": req_id})
            wait = self.timeout if timeout is None else timeout
            if not pending.event.wait(wait):
                raise BusError("TIMEOUT", f"{body['op']} {body.get('node', '')}/{body.get('service', '')} "
                               f"got no reply within {wait}s")
        finally:
            with self._state_lock:
                self._pending.pop(req_id, None)
        reply = pending.reply
        assert reply is not None
        if reply.get("op") == "ERROR":
            raise BusError(reply.get("code", "ERROR"), reply.get("message", ""))
        return reply

    # -- public API -------------------------------------------------------

    def register(self, name: str, timeout: float | None = None) -> None:
        self._request({"op": "REGISTER", "name": name}, timeout)

    def lookup(self, name: str, timeout: float | None = None) -> bool:
        return bool(self._request({"op": "LOOKUP", "name": name}, timeout).get("found"))

    def list_nodes(self, timeout: float | None = None) -> list[str]:
        return list(self._request({"op": "LIST"}, timeout).get("names", []))

    def ping(self, timeout: float | None = None) -> None:
        self._request({"op": "PING"}, timeout)

    def call(self, node: str, service: str, payload: Any = None, timeout: float | None = None) -> Any:
        reply = self._request(
            {"op": "CALL", "node": node, "service": service, "payload": {} if payload is None else payload},
            timeout,
        )
        return reply.get("payload")

    def serve(self, node: str, service: str, handler: ServiceHandler) -> None:
        """Route CALLs for ``node/service`` to ``handler(payload) -> reply``.

        Raising a :class:`HarnessError` in the handler produces an ERROR
        reply carrying its code.
        """
        self._services[(node, service)] = handler

    def publish(self, topic: str, payload: Any) -> None:
        self._send({"op": "PUBLISH", "topic": topic, "payload": payload})

    def subscribe(self, topic: str, maxlen: int = SUBSCRIPTION_BUFFER, timeout: float | None = None) -> Subscription:
        sub = Subscription(self, topic, maxlen)
        with self._state_lock:
            self._subs.setdefault(topic, []).append(sub)
        try:
            self._request({"op": "SUBSCRIBE", "topic": topic}, timeout)
        except BusError:
            self._detach(sub)
            raise
        return sub

    def _detach(self, sub: Subscription) -> None:
        with self._state_lock:
            subs = self._subs.get(sub.topic, [])
            if sub in subs:
                subs.remove(sub)

    def drain(self, timeout: float = 5.0) -> bool:
        """Wait until every service handler has sent its reply."""
        with self._idle:
            return self._idle.wait_for(lambda: self._inflight == 0, timeout)

    def close(self) -> None:
        if self.closed:
            return
        try:
            self._send({"op": "BYE"})
        except BusError:
            pass
        self._shutdown()

    def __enter__(self) -> "BusClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- receiving --------------------------------------------------------

    def _shutdown(self) -> None:
        with self._send_lock:
            if self.closed:
                return
            self.closed = True
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()
        with self._state_lock:
            pending = list(self._pending.values())
            subs = [s for group in self._subs.values() for s in group]
        for p in pending:
            p.reply = {"op": "ERROR", "code": "BUS_DOWN", "message": "connection to broker lost"}
            p.event.set()
        for sub in subs:
            sub._mark_closed()
        self._pool.shutdown(wait=False)

    def _read_loop(self) -> None:
        stream = self._sock.makefile("rb")
        try:
            while True:
                body = decode_frame(stream)
                self._handle(body)
        except IncompleteFrameError:
            pass
        except (FrameError, OSError, ValueError) as exc:
            if not self.closed:
                log.warning("bus connection failed: %s", exc)
        finally:
            self._shutdown()

    def _handle(self, body: dict) -> None:
        op = body.get("op")
        if op == "EVENT":
            with self._state_lock:
                subs = list(self._subs.get(body.get("topic"), ()))
            for sub in subs:
                sub._push(body.get("payload"))
        elif op == "CALL":
            with self._state_lock:
                self._inflight += 1
            try:
                self._pool.submit(self._serve_call, body)
            except RuntimeError:
                self._finish_call()
        elif op == "PING":
            reply = {"op": "PONG"}
            if "id" in body:
                reply["id"] = body["id"]
            try:
                self._send(reply)
            except BusError:
                pass
        elif "id" in body:
            with self._state_lock:
                pending = self._pending.get(body["id"])
            if pending is not None:
                pending.reply = body
                pending.event.set()
        elif op == "ERROR":
            log.warning("broker error: %s %s", body.get("code"), body.get("message"))

    def _serve_call(self, body: dict) -> None:
        try:
            handler = self._services.get((body.get("node"), body.get("service")))
            if handler is None:
                reply = {
                    "op": "ERROR",
                    "code": "NO_SUCH_SERVICE",
                    "message": f"{body.get('node')}/{body.get('service')} is not served",
                }
            else:
                try:
                    reply = {"op": "REPLY", "payload": handler(body.get("payload"))}
                except HarnessError as exc:
                    reply = {"op": "ERROR", "code": exc.code, "message": exc.message}
                except Exception as exc:  # noqa: BLE001 - surfaced to the caller
                    log.exception("service %s/%s failed", body.get("node"), body.get("service"))
                    reply = {"op": "ERROR", "code": "SERVICE_ERROR", "message": repr(exc)}
            reply["id"] = body.get("id")
            try:
                self._send(reply)
            except BusError:
                pass
        finally:
            self._finish_call()

    def _finish_call(self) -> None:
        with self._idle:
            self._inflight -= 1
            self._idle.notify_all()
