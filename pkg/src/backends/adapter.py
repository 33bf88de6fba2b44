"""
Client side of the external model adapter protocol
Line-delimited JSON over a TCP socket or the stdio pipes of a spawned process
"""

import json
import logging
import queue
import shlex
import socket
import subprocess
import threading
from abc import ABC, abstractmethod
from typing import Any, Dict, Iterator, List, Optional

from pydantic import BaseModel, Field, ValidationError

from core.exceptions import BackendError
from utils.config import Config

logger = logging.getLogger(__name__)


# Reply models

class DetectionPayload(BaseModel):
    box: List[int] = Field(min_length=4, max_length=4)
    conf: float = Field(ge=0.0, le=1.0)
    cls: int = 0


class DetectReply(BaseModel):
    detections: List[DetectionPayload]


class SegmentReply(BaseModel):
    masks: List[str]


class VideoRecord(BaseModel):
    frame: int = Field(ge=0)
    obj: int
    mask: str


class AdapterTransport(ABC):
    @abstractmethod
    def send_line(self, line: str) -> None:
        ...

    @abstractmethod
    def read_line(self) -> str:
        ...

    @abstractmethod
    def close(self) -> None:
        ...


class SocketTransport(AdapterTransport):
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise BackendError(f"Adapter at {host}:{port} is unreachable: {e}") from e
        self.stream = self.sock.makefile("rwb")

    def send_line(self, line: str) -> None:
        self.stream.write(line.encode("utf-8") + b"\n")
        self.stream.flush()

    def read_line(self) -> str:
        return self.stream.readline().decode("utf-8")

    def close(self) -> None:
        try:
            self.stream.close()
        finally:
            self.sock.close()


class PipeTransport(AdapterTransport):
    """Spawned adapter process; replies are pumped from its stdout by a reader thread"""

    def __init__(self, command: List[str], timeout: float):
        try:
            self.process = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
            )
        except OSError as e:
            raise BackendError(f"Could not start adapter process {command}: {e}") from e
        self.timeout = timeout
        self.lines: "queue.Queue[str]" = queue.Queue()
        self.reader = threading.Thread(target=self._pump, name="adapter-stdout", daemon=True)
        self.reader.start()

    def _pump(self) -> None:
        for line in self.process.stdout:
            self.lines.put(line)
        self.lines.put("")

    def send_line(self, line: str) -> None:
        self.process.stdin.write(line + "\n")
        self.process.stdin.flush()

    def read_line(self) -> str:
        try:
            line = self.lines.get(timeout=self.timeout)
        except queue.Empty:
            # stale replies must never reach a later request
            self.process.kill()
            raise TimeoutError(f"no reply within {self.timeout:g} s") from None
        if not line:
            self.lines.put("")
        return line

    def close(self) -> None:
        if self.process.stdin:
            try:
                self.process.stdin.close()
            except OSError:
                pass
        try:
            self.process.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.process.kill()


class AdapterClient:
    """One connection to an adapter; requests are serialised"""

    def __init__(self, transport: AdapterTransport, address: str = ""):
        self.transport = transport
        self.address = address
        self._lock = threading.Lock()

    @classmethod
    def connect(cls, address: str, timeout: Optional[float] = None) -> "AdapterClient":
        """Open tcp://HOST:PORT, HOST:PORT or stdio:COMMAND"""
        timeout = Config.ADAPTER_TIMEOUT if timeout is None else timeout
        if address.startswith("stdio:"):
            command = shlex.split(address[len("stdio:"):])
            if not command:
                raise BackendError("stdio adapter address has no command")
            transport: AdapterTransport = PipeTransport(command, timeout)
        else:
            target = address[len("tcp://"):] if address.startswith("tcp://") else address
            host, _, port = target.rpartition(":")
            if not host or not port.isdigit():
                raise BackendError(f"Cannot parse adapter address '{address}'")
            transport = SocketTransport(host, int(port), timeout)
        logger.info(f"Connected to adapter at {address}")
        return cls(transport, address)

    def _send(self, payload: Dict[str, Any]) -> None:
        try:
            self.transport.send_line(json.dumps(payload))
        except (OSError, ValueError) as e:
            raise BackendError(f"Adapter {self.address} is unreachable: {e}") from e

    def _receive(self, op: str) -> Dict[str, Any]:
        try:
            line = self.transport.read_line()
        except OSError as e:
            raise BackendError(f"Adapter {self.address} failed during '{op}': {e}") from e
        if not line:
            raise BackendError(f"Adapter {self.address} closed the connection during '{op}'")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as e:
            raise BackendError(f"Adapter {self.address} sent malformed JSON for '{op}': {e}") from e
        if not isinstance(reply, dict):
            raise BackendError(f"Adapter {self.address} sent a non-object reply for '{op}'")
        if "error" in reply:
            raise BackendError(f"Adapter {self.address} rejected '{op}': {reply['error']}")
        return reply

    def request(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        op = payload.get("op", "?")
        with self._lock:
            self._send(payload)
            return self._receive(op)

    def stream(self, payload: Dict[str, Any]) -> Iterator[Dict[str, Any]]:
        """Send one request and yield records until the adapter sends {"done": true}"""
        op = payload.get("op", "?")
        with self._lock:
            self._send(payload)
            records = []
            while True:
                reply = self._receive(op)
                if reply.get("done"):
                    break
                records.append(reply)
        yield from records

    def close(self) -> None:
        self.transport.close()


def parse_reply(model: type, reply: Dict[str, Any], op: str) -> Any:
    """Validate a reply against its wire model, mapping violations to BackendError"""
    try:
        return model.model_validate(reply)
    except ValidationError as e:
        raise BackendError(f"Protocol violation in '{op}' reply: {e}") from e


_clients: Dict[str, AdapterClient] = {}
_clients_lock = threading.Lock()


def shared_client(address: Optional[str], timeout: Optional[float] = None) -> AdapterClient:
    """Reuse one connection per adapter address within the process"""
    if not address:
        raise BackendError("External backend selected but no adapter address configured")
    with _clients_lock:
        if address not in _clients:
            _clients[address] = AdapterClient.connect(address, timeout)
        return _clients[address]


def close_shared_clients() -> None:
    with _clients_lock:
        for client in _clients.values():
            try:
                client.close()
            except Exception as e:
                logger.warning(f"Error closing adapter {client.address}: {e}")
        _clients.clear()
