import socket
import threading

import pytest

from trapcal.channel import ChannelError, QueueChannel, SocketChannel, check_message, parse_address


def test_queue_pair():
    client, server = QueueChannel.pair()

    client.send({'kind': 'prepare', 'round': 0})
    server.send({'kind': 'entangle', 'round': 0})

    assert server.receive()['kind'] == 'prepare'
    assert client.expect('entangle')['round'] == 0


def test_queue_timeout():
    client, _ = QueueChannel.pair()

    with pytest.raises(ChannelError):
        client.receive(timeout=0.01)


def test_unexpected_kind():
    client, server = QueueChannel.pair()
    client.send({'kind': 'finish'})

    with pytest.raises(ChannelError):
        server.expect('measure')


@pytest.mark.parametrize('message', [{'kind': 'hello'}, {}, ['prepare']])
def test_unknown_messages_are_rejected(message):
    with pytest.raises(ChannelError):
        check_message(message)


def test_parse_address():
    assert parse_address('localhost:7787') == ('localhost', 7787)
    assert parse_address(':7787') == ('127.0.0.1', 7787)
    with pytest.raises(ValueError):
        parse_address('localhost')


def test_socket_round_trip(free_address):
    received = []

    def serve():
        with SocketChannel.listen(free_address, timeout=5) as channel:
            received.append(channel.receive(timeout=5))
            received.append(channel.receive(timeout=5))
            channel.send({'kind': 'outcome', 'round': 0, 'vertex': 1, 'b': 1})

    thread = threading.Thread(target=serve)
    thread.start()

    with SocketChannel.connect(free_address, timeout=5, retries=50) as channel:
        channel.send({'kind': 'measure', 'round': 0, 'vertex': 1, 'delta_k': 3})
        channel.send({'kind': 'finish', 'verdict': 'accept', 'key_rounds': 0})
        reply = channel.receive(timeout=5)
    thread.join()

    assert received[0] == {'kind': 'measure', 'round': 0, 'vertex': 1, 'delta_k': 3}
    assert received[1]['verdict'] == 'accept'
    assert reply['b'] == 1


def test_malformed_frame(free_address):
    errors = []

    def serve():
        with SocketChannel.listen(free_address, timeout=5) as channel:
            try:
                channel.receive(timeout=5)
            except ChannelError as e:
                errors.append(e)

    thread = threading.Thread(target=serve)
    thread.start()

    with SocketChannel.connect(free_address, timeout=5, retries=50) as channel:
        channel.sock.sendall(b'{not json\n')
    thread.join()

    assert len(errors) == 1


def test_closed_connection(free_address):
    errors = []

    def serve():
        with SocketChannel.listen(free_address, timeout=5) as channel:
            try:
                channel.receive(timeout=5)
            except ChannelError as e:
                errors.append(e)

    thread = threading.Thread(target=serve)
    thread.start()

    channel = SocketChannel.connect(free_address, timeout=5, retries=50)
    channel.sock.shutdown(socket.SHUT_RDWR)
    channel.close()
    thread.join()

    assert 'closed' in str(errors[0])


def test_connection_refused(free_address):
    with pytest.raises(ChannelError):
        SocketChannel.connect(free_address, timeout=1, retries=1, delay=0.01)
