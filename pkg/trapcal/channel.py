"""
Ordered, reliable duplex message streams between client and server.

Messages are plain dicts with a `kind` key. `QueueChannel` connects two
ends inside one process; `SocketChannel` carries one JSON object per line
over TCP.
"""
import json
import logging
import queue
import socket
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Tuple

logger = logging.getLogger(__name__)

Message = Dict[str, Any]

MESSAGE_KINDS = frozenset(('prepare', 'entangle', 'measure', 'outcome', 'finish', 'keys'))

DEFAULT_TIMEOUT = 30.0


class ChannelError(IOError):
    pass


def check_message(message: Message) -> Message:
    if not isinstance(message, dict):
        raise ChannelError('Message is not an object: {0!r}'.format(message))
    kind = message.get('kind')
    if kind not in MESSAGE_KINDS:
        raise ChannelError('Unknown message kind: {0!r}'.format(kind))
    return message


def parse_address(address: str) -> Tuple[str, int]:
    host, sep, port = address.rpartition(':')
    if not sep or not port.isdigit():
        raise ValueError('Address must look like host:port, got {0}'.format(address))
    return host or '127.0.0.1', int(port)


class Channel(ABC):

    @abstractmethod
    def send(self, message: Message) -> None:
        pass

    @abstractmethod
    def receive(self, timeout: Optional[float] = DEFAULT_TIMEOUT) -> Message:
        pass

    def expect(self, kind: str, timeout: Optional[float] = DEFAULT_TIMEOUT) -> Message:
        message = self.receive(timeout)
        if message['kind'] != kind:
            raise ChannelError('Expected {0} message, got {1}'.format(kind, message['kind']))
        return message

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class QueueChannel(Channel):

    def __init__(self, inbox: 'queue.Queue[Message]', outbox: 'queue.Queue[Message]'):
        self.inbox = inbox
        self.outbox = outbox

    @classmethod
    def pair(cls) -> Tuple['QueueChannel', 'QueueChannel']:
        "(client_end, server_end)"
        a: 'queue.Queue[Message]' = queue.Queue()
        b: 'queue.Queue[Message]' = queue.Queue()
        return cls(a, b), cls(b, a)

    def send(self, message: Message) -> None:
        self.outbox.put(check_message(message))

    def receive(self, timeout: Optional[float] = DEFAULT_TIMEOUT) -> Message:
        try:
            return self.inbox.get(timeout=timeout)
        except queue.Empty:
            raise ChannelError('No message within {0}s'.format(timeout)) from None


class SocketChannel(Channel):

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buffer = bytearray()

    @classmethod
    def connect(cls, address: str, timeout: float = DEFAULT_TIMEOUT, retries: int = 0,
                delay: float = 0.1) -> 'SocketChannel':
        "Retries refused connections while the peer is still starting to listen"

        for attempt in range(retries + 1):
            try:
                sock = socket.create_connection(parse_address(address), timeout=timeout)
                break
            except ConnectionRefusedError:
                if attempt == retries:
                    raise ChannelError('Connection to {0} refused'.format(address)) from None
                time.sleep(delay)
            except OSError as e:
                raise ChannelError('Could not connect to {0}: {1}'.format(address, e)) from e
        logger.info('Connected to %s', address)
        return cls(sock)

    @classmethod
    def listen(cls, address: str, timeout: Optional[float] = None) -> 'SocketChannel':
        "Accepts exactly one peer"

        try:
            with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
                server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
                server.bind(parse_address(address))
                server.listen(1)
                server.settimeout(timeout)
                logger.info('Listening on %s', address)
                sock, peer = server.accept()
        except OSError as e:
            raise ChannelError('Could not accept on {0}: {1}'.format(address, e)) from e
        logger.info('Accepted connection from %s:%d', *peer)
        return cls(sock)

    def send(self, message: Message) -> None:
        body = (json.dumps(check_message(message), sort_keys=True) + '\n').encode('utf-8')
        try:
            self.sock.sendall(body)
        except OSError as e:
            raise ChannelError('Send failed: {0}'.format(e)) from e

    def receive(self, timeout: Optional[float] = DEFAULT_TIMEOUT) -> Message:
        self.sock.settimeout(timeout)
        while b'\n' not in self.buffer:
            try:
                chunk = self.sock.recv(4096)
            except socket.timeout:
                raise ChannelError('No message within {0}s'.format(timeout)) from None
            except OSError as e:
                raise ChannelError('Receive failed: {0}'.format(e)) from e
            if not chunk:
                raise ChannelError('Connection closed by peer')
            self.buffer.extend(chunk)

        line, _, rest = bytes(self.buffer).partition(b'\n')
        self.buffer = bytearray(rest)
        try:
            message = json.loads(line.decode('utf-8'))
        except ValueError as e:
            raise ChannelError('Malformed frame: {0}'.format(e)) from e
        return check_message(message)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass
