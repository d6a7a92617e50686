"""Line-delimited JSON telemetry over a local TCP socket.

Server -> client messages: hello, state, samples, psd, bins, summary, link,
energy, loss, ack, error. Client -> server: command, tap, hello. One JSON
object per line, UTF-8. The simulation thread broadcasts and polls inbound
messages at timestep boundaries; socket I/O runs on daemon threads so a slow
or vanished client never stalls the simulation.
"""

from __future__ import annotations

import json
import queue
import socket
import threading


class _Client:
    _next_id = 0

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.outbox: queue.Queue = queue.Queue(maxsize=2000)
        self.alive = True
        _Client._next_id += 1
        self.id = _Client._next_id


class TelemetryServer:
    def __init__(self, port: int = 0, host: str = "127.0.0.1", snapshot_fn=None):
        self.host = host
        self._requested_port = port
        self.snapshot_fn = snapshot_fn
        self._clients: dict[int, _Client] = {}
        self._lock = threading.Lock()
        self._inbound: queue.Queue = queue.Queue()
        self._listener: socket.socket | None = None
        self._stopping = False
        self.port: int | None = None

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> int:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self._requested_port))
        self._listener.listen(8)
        self.port = self._listener.getsockname()[1]
        threading.Thread(target=self._accept_loop, daemon=True).start()
        return self.port

    def stop(self) -> None:
        self._stopping = True
        if self._listener:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            clients = list(self._clients.values())
        for c in clients:
            self._drop(c)

    def _accept_loop(self) -> None:
        while not self._stopping:
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            client = _Client(sock)
            with self._lock:
                self._clients[client.id] = client
            threading.Thread(target=self._reader, args=(client,), daemon=True).start()
            threading.Thread(target=self._writer, args=(client,), daemon=True).start()
            if self.snapshot_fn:
                self.send(client.id, self.snapshot_fn())

    def _drop(self, client: _Client) -> None:
        client.alive = False
        try:
            client.sock.close()
        except OSError:
            pass
        with self._lock:
            self._clients.pop(client.id, None)

    # -- socket threads -------------------------------------------------------

    def _reader(self, client: _Client) -> None:
        buf = b""
        while client.alive:
            try:
                chunk = client.sock.recv(4096)
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    msg = json.loads(line)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except ValueError as exc:
                    self.send(client.id, {"type": "error", "message": f"malformed message: {exc}"})
                    continue
                self._inbound.put((client.id, msg))
        self._drop(client)

    def _writer(self, client: _Client) -> None:
        while client.alive:
            try:
                msg = client.outbox.get(timeout=0.5)
            except queue.Empty:
                continue
            try:
                client.sock.sendall((json.dumps(msg) + "\n").encode())
            except OSError:
                break
        self._drop(client)

    # -- simulation-side API ----------------------------------------------------

    def broadcast(self, msg: dict) -> None:
        with self._lock:
            clients = list(self._clients.values())
        for client in clients:
            try:
                client.outbox.put_nowait(msg)
            except queue.Full:
                pass  # display stream: dropping is better than stalling

    def send(self, client_id: int, msg: dict) -> None:
        with self._lock:
            client = self._clients.get(client_id)
        if client:
            try:
                client.outbox.put_nowait(msg)
            except queue.Full:
                pass

    def drain_inbound(self) -> list:
        out = []
        while True:
            try:
                out.append(self._inbound.get_nowait())
            except queue.Empty:
                return out

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)
