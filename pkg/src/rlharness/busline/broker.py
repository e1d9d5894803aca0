"""Central broker: naming, liveness, request/reply routing and topic fan-out.

Each connection gets a reader thread and a writer thread with an unbounded
outbound queue, so a slow subscriber never stalls a publisher. All registry
mutations happen under one lock, which gives registry state a single total
order.
"""

from __future__ import annotations

import itertools
import logging
import queue
import socket
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field

from .frames import (
    OPS,
    EncodingError,
    FrameError,
    IncompleteFrameError,
    ProtocolError,
    decode_frame,
    encode_frame,
    valid_name,
)

log = logging.getLogger(__name__)

DEFAULT_LIVENESS_SECS = 6.0
MISSED_PINGS_LIMIT = 3


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


@dataclass(eq=False)
class _Connection:
    conn_id: int
    sock: socket.socket
    peer: str
    outq: "queue.Queue[bytes | None]" = field(default_factory=queue.Queue)
    names: set = field(default_factory=set)
    topics: set = field(default_factory=set)
    missed: int = 0
    open: bool = True
    forward_ids: itertools.count = field(default_factory=lambda: itertools.count(1))

    def send(self, body: dict) -> None:
        if self.open:
            self.outq.put(encode_frame(body))

    def send_raw(self, data: bytes) -> None:
        if self.open:
            self.outq.put(data)


class Broker:
    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        liveness_secs: float = DEFAULT_LIVENESS_SECS,
    ):
        self.liveness_secs = liveness_secs
        self._listen = (host, port)
        self._lock = threading.RLock()
        self._conns: dict[int, _Connection] = {}
        self._registry: dict[str, _Connection] = {}
        self._topics: dict[str, set[_Connection]] = defaultdict(set)
        # (server connection, forwarded id) -> (caller connection, caller id)
        self._pending: dict[tuple[_Connection, int], tuple[_Connection, object]] = {}
        self._ids = itertools.count(1)
        self._server: socket.socket | None = None
        self._stopped = threading.Event()
        self.events: list[dict] = []
        self.address: tuple[str, int] | None = None

    # -- lifecycle -------------------------------------------------------

    def start(self) -> tuple[str, int]:
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind(self._listen)
        srv.listen(64)
        self._server = srv
        self.address = srv.getsockname()[:2]
        threading.Thread(target=self._accept_loop, name="broker-accept", daemon=True).start()
        threading.Thread(target=self._liveness_loop, name="broker-liveness", daemon=True).start()
        log.info("broker listening on %s:%d", *self.address)
        return self.address

    @property
    def address_text(self) -> str:
        assert self.address is not None, "broker not started"
        return f"{self.address[0]}:{self.address[1]}"

    def close(self) -> None:
        self._stopped.set()
        if self._server is not None:
            try:
                self._server.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._conns.values())
        for conn in conns:
            self._drop(conn, "broker shutdown")

    def __enter__(self) -> "Broker":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def wait(self) -> None:
        self._stopped.wait()

    # -- introspection (test oracles) -------------------------------------

    def registry_snapshot(self) -> dict[str, int]:
        with self._lock:
            return {name: conn.conn_id for name, conn in self._registry.items()}

    def subscriber_counts(self) -> dict[str, int]:
        with self._lock:
            return {topic: len(subs) for topic, subs in self._topics.items() if subs}

    # -- threads ----------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._server is not None
        while not self._stopped.is_set():
            try:
                sock, peer = self._server.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(next(self._ids), sock, f"{peer[0]}:{peer[1]}")
            with self._lock:
                self._conns[conn.conn_id] = conn
                self._log_event("open", conn)
            threading.Thread(
                target=self._reader, args=(conn,), name=f"broker-r{conn.conn_id}", daemon=True
            ).start()
            threading.Thread(
                target=self._writer, args=(conn,), name=f"broker-w{conn.conn_id}", daemon=True
            ).start()

    def _reader(self, conn: _Connection) -> None:
        stream = conn.sock.makefile("rb")
        reason = "closed by peer"
        try:
            while conn.open:
                try:
                    body = decode_frame(stream)
                except IncompleteFrameError as exc:
                    reason = "closed by peer" if exc.received == 0 else "truncated frame"
                    return
                except ProtocolError as exc:
                    reason = f"protocol error: {exc}"
                    conn.send({"op": "ERROR", "code": "PROTOCOL_ERROR", "message": str(exc)})
                    return
                conn.missed = 0
                if self._dispatch(conn, body) == "BYE":
                    reason = "bye"
                    return
        except (OSError, ValueError):
            reason = "connection reset"
        finally:
            self._drop(conn, reason)

    def _writer(self, conn: _Connection) -> None:
        try:
            while True:
                data = conn.outq.get()
                if data is None:
                    break
                conn.sock.sendall(data)
        except OSError:
            pass
        finally:
            try:
                conn.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.sock.close()
            self._drop(conn, "write failed")

    def _liveness_loop(self) -> None:
        interval = self.liveness_secs / MISSED_PINGS_LIMIT
        ping = encode_frame({"op": "PING"})
        while not self._stopped.wait(interval):
            with self._lock:
                conns = list(self._conns.values())
            for conn in conns:
                if conn.missed >= MISSED_PINGS_LIMIT:
                    self._drop(conn, "liveness timeout")
                else:
                    conn.missed += 1
                    conn.send_raw(ping)

    # -- protocol ---------------------------------------------------------

    def _dispatch(self, conn: _Connection, body: dict) -> str:
        op = body.get("op")
        if op not in OPS:
            conn.send(_error(body.get("id"), "BAD_OP", f"unknown op {op!r}"))
            return "ERROR"
        handler = getattr(self, f"_on_{op.lower()}", None)
        if handler is None:
            conn.send(_error(body.get("id"), "BAD_OP", f"op {op} not accepted by broker"))
        else:
            try:
                handler(conn, body)
            except EncodingError as exc:
                conn.send(_error(body.get("id"), "BAD_REQUEST", str(exc)))
        return op

    def _on_register(self, conn: _Connection, body: dict) -> None:
        name = body.get("name")
        with self._lock:
            if not valid_name(name):
                conn.send(_error(body.get("id"), "BAD_NAME", f"invalid node name {name!r}"))
                return
            if name in self._registry:
                self._log_event("reject", conn, name=name, reason="DUPLICATE_NODE")
                conn.send(_error(body.get("id"), "DUPLICATE_NODE", f"node {name} already registered"))
                return
            self._registry[name] = conn
            conn.names.add(name)
            self._log_event("register", conn, name=name)
            conn.send(_with_id({"op": "REGISTERED", "name": name}, body))

    def _on_lookup(self, conn: _Connection, body: dict) -> None:
        name = body.get("name")
        with self._lock:
            found = name in self._registry
        conn.send(_with_id({"op": "LOOKUP_REPLY", "name": name, "found": found}, body))

    def _on_list(self, conn: _Connection, body: dict) -> None:
        with self._lock:
            names = sorted(self._registry)
        conn.send(_with_id({"op": "LIST_REPLY", "names": names}, body))

    def _on_call(self, conn: _Connection, body: dict) -> None:
        call_id = body.get("id")
        node, service = body.get("node"), body.get("service")
        if call_id is None or not isinstance(service, str) or not service:
            conn.send(_error(call_id, "BAD_REQUEST", "CALL needs id, node and service"))
            return
        with self._lock:
            server = self._registry.get(node)
            if server is None:
                conn.send(_error(call_id, "NO_SUCH_SERVICE", f"no node {node!r} for {node}/{service}"))
                return
            fwd = next(server.forward_ids)
            self._pending[(server, fwd)] = (conn, call_id)
            server.send(
                {"op": "CALL", "id": fwd, "node": node, "service": service, "payload": body.get("payload")}
            )

    def _on_reply(self, conn: _Connection, body: dict) -> None:
        with self._lock:
            route = self._pending.pop((conn, body.get("id")), None)
        if route is None:
            return
        caller, caller_id = route
        caller.send({**body, "id": caller_id})

    def _on_error(self, conn: _Connection, body: dict) -> None:
        # errors from a serving node are replies to a forwarded call
        self._on_reply(conn, body)

    def _on_subscribe(self, conn: _Connection, body: dict) -> None:
        topic = body.get("topic")
        with self._lock:
            if not valid_name(topic):
                conn.send(_error(body.get("id"), "BAD_NAME", f"invalid topic {topic!r}"))
                return
            self._topics[topic].add(conn)
            conn.topics.add(topic)
            # ack enqueued under the lock so it precedes every EVENT for this topic
            conn.send(_with_id({"op": "SUBSCRIBED", "topic": topic}, body))

    def _on_publish(self, conn: _Connection, body: dict) -> None:
        topic = body.get("topic")
        with self._lock:
            subs = self._topics.get(topic)
            if not subs:
                return
            data = encode_frame({"op": "EVENT", "topic": topic, "payload": body.get("payload")})
            for sub in subs:
                sub.send_raw(data)

    def _on_ping(self, conn: _Connection, body: dict) -> None:
        conn.send(_with_id({"op": "PONG"}, body))

    def _on_pong(self, conn: _Connection, body: dict) -> None:
        pass

    def _on_bye(self, conn: _Connection, body: dict) -> None:
        pass

    # -- teardown ---------------------------------------------------------

    def _drop(self, conn: _Connection, reason: str) -> None:
        with self._lock:
            if not conn.open:
                return
            conn.open = False
            self._conns.pop(conn.conn_id, None)
            for name in conn.names:
                if self._registry.get(name) is conn:
                    del self._registry[name]
            for topic in conn.topics:
                self._topics[topic].discard(conn)
            orphaned = []
            for key, (caller, caller_id) in list(self._pending.items()):
                server, _ = key
                if server is conn:
                    orphaned.append((caller, caller_id))
                    del self._pending[key]
                elif caller is conn:
                    del self._pending[key]
            self._log_event("close", conn, reason=reason)
        for caller, caller_id in orphaned:
            names = ",".join(sorted(conn.names))
            caller.send(_error(caller_id, "PEER_GONE", f"node {names} disconnected during call"))
        conn.outq.put(None)
        log.debug("connection %d (%s) closed: %s", conn.conn_id, conn.peer, reason)

    def _log_event(self, kind: str, conn: _Connection, **extra) -> None:
        self.events.append(
            {"t": time.monotonic(), "event": kind, "conn": conn.conn_id, "names": sorted(conn.names), **extra}
        )


def _with_id(reply: dict, request: dict) -> dict:
    if "id" in request:
        reply["id"] = request["id"]
    return reply


def _error(req_id, code: str, message: str) -> dict:
    body = {"op": "ERROR", "code": code, "message": message}
    if req_id is not None:
        body["id"] = req_id
    return body


__all__ = ["Broker", "parse_address", "DEFAULT_LIVENESS_SECS", "FrameError"]
