import socket

import pytest

from trapcal.graphs import build_diamond_kite


@pytest.fixture
def kite():
    return build_diamond_kite()


@pytest.fixture
def free_address():
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(('127.0.0.1', 0))
        port = sock.getsockname()[1]
    return '127.0.0.1:{0}'.format(port)


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long statistical runs')
