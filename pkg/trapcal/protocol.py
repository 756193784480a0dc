"""
Client and server of the robust verifiable blind computation protocol.

The client interleaves `d` computation rounds with test rounds at random
positions, delegates each round blindly, counts failed test rounds and either
aborts or outputs the majority of the computation results. The server picks a
gate ordering from its plan for every round. Once the client has decided,
the secrets of the test rounds can be released so the server can decrypt its
trap outcomes and bin them into trap statistics.
"""
import logging
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as scipy_stats

from .channel import Channel, ChannelError, QueueChannel, SocketChannel
from .config import ProtocolConfig
from .device import Device, InlineLink, MemoryLink, Preparation, QuantumLink, RoundSession, ZAttack
from .estimator import TrapStatistic
from .graphs import Graph, VertexColoring
from .mbqc import Angle, MeasurementPattern, corrected_angle
from .noise import NoiseModel
from .planner import OrderingPlan

logger = logging.getLogger(__name__)

ACCEPT = 'accept'
ABORT = 'abort'


class ProtocolStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class QubitSecrets:
    theta: Angle
    r: int
    a: int

    @classmethod
    def sample(cls, rng: np.random.Generator) -> 'QubitSecrets':
        theta, r, a = rng.integers((8, 2, 2))
        return cls(Angle(int(theta)), int(r), int(a))


class RoundKind(Enum):
    COMPUTATION = 'computation'
    TEST = 'test'


@dataclass(frozen=True)
class TestRoundSpec:
    __test__ = False

    color: int
    traps: FrozenSet[int]
    dummies: FrozenSet[int]
    angles: Mapping[int, Angle]


def delta_angle(phi_corrected: Angle, secrets: QubitSecrets, flip_bit: int) -> Angle:
    """
    (-1)^a phi' + theta + (r + flip) pi, where flip is the parity of the
    neighbors' a bits.
    """
    return (phi_corrected.flipped(secrets.a) + secrets.theta).shifted(secrets.r ^ flip_bit)


def flip_bits(graph: Graph, secrets: Mapping[int, QubitSecrets]) -> Dict[int, int]:
    flips = {}
    for v in graph.vertices:
        c = 0
        for w in graph.neighbors(v):
            c ^= secrets[w].a
        flips[v] = c
    return flips


def sample_test_round(graph: Graph, coloring: VertexColoring, rng: np.random.Generator) -> TestRoundSpec:
    if not coloring.is_proper(graph):
        raise ValueError('Test rounds need a proper coloring')
    color = int(rng.integers(coloring.k))
    traps = frozenset(coloring.classes()[color])
    dummies = frozenset(w for v in traps for w in graph.neighbors(v))
    angles = {v: Angle(0) if v in traps else Angle.random(rng) for v in graph.vertices}
    return TestRoundSpec(color, traps, dummies, angles)


def majority_vote(bits: Sequence[int]) -> int:
    "Ties go to 0"
    if not len(bits):
        raise ValueError('Majority vote of an empty sequence')
    ones = sum(1 for b in bits if b)
    return int(2 * ones > len(bits))


@dataclass
class RoundRecord:
    round_index: int
    kind: RoundKind
    secrets: Dict[int, QubitSecrets]
    test: Optional[TestRoundSpec] = None
    ordering_id: Optional[str] = None
    deltas: Dict[int, Angle] = field(default_factory=dict)
    outcomes: Dict[int, int] = field(default_factory=dict)
    results: Dict[int, int] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        if self.test is None:
            raise ProtocolStateError('Round {0} is not a test round'.format(self.round_index))
        return any(self.results[v] for v in self.test.traps)


@dataclass(frozen=True)
class ProtocolOutcome:
    verdict: str
    result: Optional[int]
    failed_tests: int
    test_rounds: int
    computation_results: Tuple[int, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.verdict == ACCEPT


def decide(failed_tests: int, test_rounds: int, w: int, computation_results: Sequence[int]) -> ProtocolOutcome:
    if failed_tests > w:
        return ProtocolOutcome(ABORT, None, failed_tests, test_rounds, tuple(computation_results))
    result = majority_vote(computation_results) if computation_results else None
    return ProtocolOutcome(ACCEPT, result, failed_tests, test_rounds, tuple(computation_results))


@dataclass
class ClientLog:
    records: List[RoundRecord] = field(default_factory=list)
    outcome: Optional[ProtocolOutcome] = None


class Client:

    def __init__(self, config: ProtocolConfig, pattern: MeasurementPattern, coloring: VertexColoring,
                 channel: Channel, link: QuantumLink, rng: Optional[np.random.Generator] = None):
        graph = pattern.graph
        if config.d and graph.vertex_count > config.dense_cap:
            raise ValueError('Computation rounds on {0} qubits exceed the dense backend limit of {1}'.format(
                graph.vertex_count, config.dense_cap))
        if not coloring.is_proper(graph):
            raise ValueError('Coloring is not proper for the pattern graph')

        self.config = config
        self.pattern = pattern
        self.graph = graph
        self.coloring = coloring
        self.channel = channel
        self.link = link
        self.rng = rng if rng is not None else np.random.default_rng([config.seed, 0])
        self.log = ClientLog()

    def schedule(self) -> List[RoundKind]:
        computation = set(int(i) for i in self.rng.choice(self.config.N, size=self.config.d, replace=False))
        return [RoundKind.COMPUTATION if i in computation else RoundKind.TEST for i in range(self.config.N)]

    def run(self, release: bool = True) -> ProtocolOutcome:
        for index, kind in enumerate(self.schedule()):
            self.log.records.append(self.run_round(index, kind))

        tests = [r for r in self.log.records if r.kind is RoundKind.TEST]
        failed = sum(1 for r in tests if r.failed)
        results = [r.results[self.pattern.result_vertex] for r in self.log.records
                   if r.kind is RoundKind.COMPUTATION]
        outcome = decide(failed, len(tests), self.config.w, results)
        self.log.outcome = outcome

        if outcome.accepted:
            logger.info('Accept: %d of %d test rounds failed, result %s', failed, len(tests), outcome.result)
        else:
            logger.critical('Abort: %d of %d test rounds failed (tolerance %d)', failed, len(tests), self.config.w)

        payload = release_keys(self.log) if release else []
        self.channel.send({'kind': 'finish', 'verdict': outcome.verdict, 'key_rounds': len(payload)})
        for message in payload:
            self.channel.send(message)
        return outcome

    def run_round(self, index: int, kind: RoundKind) -> RoundRecord:
        graph = self.graph
        secrets = {v: QubitSecrets.sample(self.rng) for v in graph.vertices}
        test = sample_test_round(graph, self.coloring, self.rng) if kind is RoundKind.TEST else None
        record = RoundRecord(index, kind, secrets, test)

        for v in graph.vertices:
            dummy = test is not None and v in test.dummies
            descriptor = self.link.send(Preparation(v, secrets[v].theta, secrets[v].a, dummy))
            self.channel.send({'kind': 'prepare', 'round': index, 'vertex': v, 'state_descriptor': descriptor})

        message = self.channel.expect('entangle')
        _check_round(message, index)
        record.ordering_id = message['ordering_id']

        flips = flip_bits(graph, secrets)
        order = self.pattern.measurement_order() if test is None else tuple(graph.vertices)
        for v in order:
            if test is None:
                phi = corrected_angle(self.pattern.angles[v], *self.pattern.signals(v, record.results))
            else:
                phi = test.angles[v]
            delta = delta_angle(phi, secrets[v], flips[v])
            record.deltas[v] = delta
            self.channel.send({'kind': 'measure', 'round': index, 'vertex': v, 'delta_k': delta.k})

            message = self.channel.expect('outcome')
            _check_round(message, index)
            if message['vertex'] != v:
                raise ChannelError('Outcome for vertex {0} while measuring {1}'.format(message['vertex'], v))
            record.outcomes[v] = int(message['b'])
            record.results[v] = record.outcomes[v] ^ secrets[v].r

        logger.debug('Round %d (%s) done with ordering %s', index, kind.value, record.ordering_id)
        return record


def _check_round(message: Mapping, index: int) -> None:
    if message.get('round') != index:
        raise ChannelError('Message for round {0} during round {1}'.format(message.get('round'), index))


def release_keys(log: ClientLog) -> List[Dict]:
    "Secrets of the test rounds, one `keys` message per round"

    if log.outcome is None:
        raise ProtocolStateError('Keys can only be released once the protocol has finished')

    payload = []
    for record in log.records:
        if record.kind is not RoundKind.TEST:
            continue
        payload.append({
            'kind': 'keys',
            'round': record.round_index,
            'color': record.test.color,
            'traps': sorted(record.test.traps),
            'secrets': [[v, s.theta.k, s.r, s.a] for v, s in sorted(record.secrets.items())],
        })
    return payload


@dataclass
class ServerRecord:
    round_index: int
    ordering_id: str
    deltas: Dict[int, Angle] = field(default_factory=dict)
    outcomes: Dict[int, int] = field(default_factory=dict)
    color: Optional[int] = None
    decrypted: Optional[Dict[int, int]] = None


@dataclass(frozen=True)
class DecryptedTestRound:
    round_index: int
    ordering_id: str
    color: int
    trap_outcomes: Mapping[int, int]

    @property
    def failed(self) -> bool:
        return any(self.trap_outcomes.values())


@dataclass
class ServerLog:
    records: List[ServerRecord] = field(default_factory=list)
    verdict: Optional[str] = None
    key_payload: List[Dict] = field(default_factory=list)
    decrypted: List[DecryptedTestRound] = field(default_factory=list)


def apply_key_release(records: Sequence[ServerRecord], payload: Iterable[Mapping]) -> List[DecryptedTestRound]:
    by_round = {r.round_index: r for r in records}
    decrypted = []
    for message in payload:
        record = by_round.get(message['round'])
        if record is None:
            raise ProtocolStateError('Keys for unknown round {0}'.format(message['round']))
        r_bits = {int(v): int(r) for v, _, r, _ in message['secrets']}
        outcomes = {int(v): record.outcomes[int(v)] ^ r_bits[int(v)] for v in message['traps']}
        record.color = int(message['color'])
        record.decrypted = outcomes
        decrypted.append(DecryptedTestRound(record.round_index, record.ordering_id, record.color, outcomes))
    return decrypted


def bin_trap_statistics(rounds: Iterable[DecryptedTestRound]) -> List[TrapStatistic]:
    shots: Counter = Counter()
    failures: Counter = Counter()
    for test_round in rounds:
        for v, s in test_round.trap_outcomes.items():
            shots[(test_round.ordering_id, v)] += 1
            failures[(test_round.ordering_id, v)] += s
    return [TrapStatistic(oid, v, shots[(oid, v)], failures[(oid, v)]) for oid, v in sorted(shots)]


class Server:

    def __init__(self, graph: Graph, plan: OrderingPlan, device: Device, channel: Channel, link: QuantumLink,
                 rng: np.random.Generator):
        if not plan.orderings:
            raise ValueError('Server plan has no orderings')
        self.graph = graph
        self.plan = plan
        self.device = device
        self.channel = channel
        self.link = link
        self.rng = rng
        self.log = ServerLog()

    def serve(self) -> ServerLog:
        pending: Dict[int, Preparation] = {}
        session: Optional[RoundSession] = None
        record: Optional[ServerRecord] = None

        while True:
            message = self.channel.receive()
            kind = message['kind']

            if kind == 'prepare':
                if record is not None and message['round'] == record.round_index:
                    raise ProtocolStateError('Round {0} is already entangled'.format(record.round_index))
                pending[int(message['vertex'])] = self.link.receive(message['state_descriptor'])
                if len(pending) == self.graph.vertex_count:
                    ordering = self.plan.orderings[int(self.rng.integers(len(self.plan.orderings)))]
                    session = self.device.entangle(message['round'], pending, ordering)
                    record = ServerRecord(message['round'], ordering.ordering_id)
                    self.log.records.append(record)
                    pending = {}
                    self.channel.send({'kind': 'entangle', 'round': record.round_index,
                                       'ordering_id': ordering.ordering_id})

            elif kind == 'measure':
                if session is None or message['round'] != record.round_index:
                    raise ProtocolStateError('Measurement for round {0} before entangling it'.format(
                        message['round']))
                v = int(message['vertex'])
                delta = Angle(int(message['delta_k']))
                b = session.measure(v, delta)
                record.deltas[v] = delta
                record.outcomes[v] = b
                self.channel.send({'kind': 'outcome', 'round': record.round_index, 'vertex': v, 'b': b})

            elif kind == 'finish':
                self.log.verdict = message['verdict']
                for _ in range(int(message['key_rounds'])):
                    self.log.key_payload.append(self.channel.expect('keys'))
                if self.log.key_payload:
                    self.log.decrypted = apply_key_release(self.log.records, self.log.key_payload)
                logger.info('Server saw verdict %s and %d released test rounds', self.log.verdict,
                            len(self.log.decrypted))
                return self.log

            else:
                raise ProtocolStateError('Unexpected {0} message on the server'.format(kind))


@dataclass
class RunResult:
    outcome: ProtocolOutcome
    client: ClientLog
    server: ServerLog

    @property
    def statistics(self) -> List[TrapStatistic]:
        return bin_trap_statistics(self.server.decrypted)


def make_server(config: ProtocolConfig, graph: Graph, plan: OrderingPlan, noise: NoiseModel, channel: Channel,
                link: QuantumLink, attack: Optional[ZAttack] = None) -> Server:
    device = Device(graph, noise, np.random.default_rng([config.seed, 2]), config.dense_cap, attack)
    return Server(graph, plan, device, channel, link, np.random.default_rng([config.seed, 1]))


def _check_inputs(pattern: MeasurementPattern, plan: OrderingPlan, coloring: VertexColoring) -> None:
    for ordering in plan.orderings:
        ordering.validate(pattern.graph)
    if len(coloring.color_of) != pattern.graph.vertex_count:
        raise ValueError('Coloring does not match the pattern graph')


def _serve_in_thread(server_factory, errors: List[BaseException]) -> Tuple[threading.Thread, List[ServerLog]]:
    logs: List[ServerLog] = []

    def target():
        try:
            server = server_factory()
            try:
                logs.append(server.serve())
            finally:
                server.channel.close()
        except BaseException as e:
            errors.append(e)

    thread = threading.Thread(target=target, name='rvbqc-server', daemon=True)
    thread.start()
    return thread, logs


def run_rvbqc(config: ProtocolConfig, pattern: MeasurementPattern, coloring: VertexColoring, plan: OrderingPlan,
              noise: NoiseModel, attack: Optional[ZAttack] = None, release: bool = True) -> RunResult:
    "Client and server in one process over a queue channel"

    _check_inputs(pattern, plan, coloring)
    client_end, server_end = QueueChannel.pair()
    link = MemoryLink()
    errors: List[BaseException] = []
    thread, logs = _serve_in_thread(
        lambda: make_server(config, pattern.graph, plan, noise, server_end, link, attack), errors)

    client = Client(config, pattern, coloring, client_end, link)
    try:
        outcome = client.run(release)
    except ChannelError:
        if errors:
            raise errors[0]
        raise
    thread.join()
    if errors:
        raise errors[0]
    return RunResult(outcome, client.log, logs[0])


def run_rvbqc_tcp(config: ProtocolConfig, pattern: MeasurementPattern, coloring: VertexColoring,
                  plan: OrderingPlan, noise: NoiseModel, address: str, attack: Optional[ZAttack] = None,
                  release: bool = True) -> RunResult:
    "Both roles in one process, talking over a local TCP connection"

    _check_inputs(pattern, plan, coloring)
    errors: List[BaseException] = []
    thread, logs = _serve_in_thread(
        lambda: make_server(config, pattern.graph, plan, noise, SocketChannel.listen(address), InlineLink(), attack),
        errors)

    with SocketChannel.connect(address, retries=50) as channel:
        client = Client(config, pattern, coloring, channel, InlineLink())
        try:
            outcome = client.run(release)
        except ChannelError:
            if errors:
                raise errors[0]
            raise
    thread.join()
    if errors:
        raise errors[0]
    return RunResult(outcome, client.log, logs[0])


def z_attack_detection_rate(coloring: VertexColoring) -> float:
    "Chance that one test round traps the attacked vertex"
    return 1.0 / coloring.k


def z_attack_abort_probability(coloring: VertexColoring, config: ProtocolConfig) -> float:
    "P(more than w of the N - d test rounds trap the attacked vertex)"
    return float(scipy_stats.binom.sf(config.w, config.N - config.d, z_attack_detection_rate(coloring)))
