from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .graphs import Edge, canonical_edge
from .mbqc import DEFAULT_DENSE_CAP
from .noise import GaussianSpec, NoiseMode

CALIBRATION = 'calibration'
PROTOCOL = 'protocol'

NOISE_KINDS = ('uniform', 'gaussian', 'file', 'entries', 'faulty_edge')


def load_document(path) -> Dict[str, Any]:
    "YAML or JSON file (JSON is read as YAML)"

    with open(path, 'r') as fh:
        document = yaml.load(fh, Loader=yaml.SafeLoader)
    if not isinstance(document, dict):
        raise ValueError('Expected a mapping in {0}'.format(path))
    return document


@dataclass(frozen=True)
class ProtocolConfig:
    N: int
    d: int
    w: int
    seed: int = 0
    dense_cap: int = DEFAULT_DENSE_CAP

    def __post_init__(self):
        if min(self.N, self.d, self.w) < 0:
            raise ValueError('Round counts must be non-negative: N={0}, d={1}, w={2}'.format(self.N, self.d, self.w))
        if not self.d < self.N:
            raise ValueError('Need fewer computation rounds than rounds, got d={0}, N={1}'.format(self.d, self.N))
        if not self.w < self.N - self.d:
            raise ValueError('Tolerated failures w={0} must be below the {1} test rounds'.format(
                self.w, self.N - self.d))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], seed: int = 0) -> 'ProtocolConfig':
        try:
            return cls(
                N=int(data['N']),
                d=int(data['d']),
                w=int(data['w']),
                seed=int(data.get('seed', seed)),
                dense_cap=int(data.get('dense_cap', DEFAULT_DENSE_CAP)),
            )
        except KeyError as e:
            raise ValueError('Protocol block is missing {0}'.format(e)) from None


def _edge(value) -> Edge:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValueError('Invalid edge: {0!r}'.format(value))
    return canonical_edge(int(value[0]), int(value[1]))


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    p: Optional[float] = None
    gaussian: Optional[GaussianSpec] = None
    path: Optional[Path] = None
    document: Optional[Dict[str, Any]] = None
    mode: NoiseMode = NoiseMode.PER_QUBIT
    support: Dict[Edge, Tuple[int, ...]] = field(default_factory=dict)
    faulty_edge: Optional[Edge] = None
    faulty_p: Dict[int, float] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_directory: Path = Path('.')) -> 'NoiseSpec':
        kinds = [kind for kind in NOISE_KINDS if kind in data]
        if len(kinds) != 1:
            raise ValueError('Noise needs exactly one of {0}, got {1}'.format(', '.join(NOISE_KINDS), kinds or 'none'))
        kind = kinds[0]

        mode = NoiseMode(data.get('mode', NoiseMode.PER_QUBIT.value))
        support = {_edge(item['edge']): tuple(int(q) for q in item['qubits']) for item in data.get('support', [])}
        if support and kind != 'uniform':
            raise ValueError('Cross-talk support can only be combined with uniform noise')

        if kind == 'uniform':
            return cls(kind, p=float(data['uniform']), mode=mode, support=support)
        if kind == 'gaussian':
            gaussian = data['gaussian']
            return cls(kind, gaussian=GaussianSpec(float(gaussian['mean']), float(gaussian['std'])))
        if kind == 'file':
            return cls(kind, path=Path(base_directory) / data['file'])
        if kind == 'entries':
            document = {key: data[key] for key in ('mode', 'entries', 'seed', 'gaussian') if key in data}
            return cls(kind, document=document)

        faulty = data['faulty_edge']
        edge = _edge(faulty['edge'])
        return cls(kind, faulty_edge=edge, faulty_p={int(q): float(p) for q, p in faulty['p'].items()})

    def with_std(self, std: float) -> 'NoiseSpec':
        if self.kind != 'gaussian':
            raise ValueError('A noise spread sweep needs gaussian noise, not {0}'.format(self.kind))
        return NoiseSpec(self.kind, gaussian=GaussianSpec(self.gaussian.mean, std))


@dataclass(frozen=True)
class Comparison:
    trap: int
    with_id: str
    without_id: str


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    graph: Dict[str, Any]
    noise: NoiseSpec
    title: Optional[str] = None
    template: Optional[str] = None
    shots: Tuple[int, ...] = (10000,)
    noise_stds: Tuple[float, ...] = ()
    mode: str = CALIBRATION
    param_mode: NoiseMode = NoiseMode.PER_QUBIT
    exact_bias: bool = False
    seed: int = 0
    protocol: Optional[ProtocolConfig] = None
    pattern: Optional[Dict[str, Any]] = None
    orderings: Dict[str, Tuple[Edge, ...]] = field(default_factory=dict)
    comparisons: Tuple[Comparison, ...] = ()
    bootstrap_resamples: Optional[int] = None
    histogram_bins: Optional[int] = None

    def __post_init__(self):
        if self.mode not in (CALIBRATION, PROTOCOL):
            raise ValueError('Unknown experiment mode: {0}'.format(self.mode))
        if not self.shots:
            raise ValueError('Experiment {0} lists no shot budget'.format(self.name))
        for shots in self.shots:
            if shots < 1:
                raise ValueError('Number of shots must be positive, got {0}'.format(shots))
        if self.mode == PROTOCOL and self.protocol is None:
            raise ValueError('Protocol experiments need a protocol block with N, d and w')
        for std in self.noise_stds:
            if std < 0:
                raise ValueError('Noise spread must be non-negative, got {0}'.format(std))
        if self.noise_stds and self.noise.kind != 'gaussian':
            raise ValueError('noise_stds needs gaussian noise')
        for comparison in self.comparisons:
            for ordering_id in (comparison.with_id, comparison.without_id):
                if ordering_id not in self.orderings:
                    raise ValueError('Comparison refers to unknown ordering {0}'.format(ordering_id))

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_directory: Path = Path('.')) -> 'ExperimentSpec':
        for key in ('name', 'graph', 'noise'):
            if key not in data:
                raise ValueError('Experiment is missing "{0}"'.format(key))

        seed = int(data.get('seed', 0))
        shots = data.get('shots', [10000])
        if not isinstance(shots, list):
            shots = [shots]

        protocol = None
        if 'protocol' in data:
            protocol = ProtocolConfig.from_dict(data['protocol'], seed)
        elif 'N' in data:
            protocol = ProtocolConfig.from_dict(data, seed)

        graph = data['graph']
        if isinstance(graph, str):
            graph = {'file': graph}

        return cls(
            name=str(data['name']),
            title=data.get('title'),
            template=data.get('template'),
            graph=graph,
            noise=NoiseSpec.from_dict(data['noise'], base_directory),
            shots=tuple(int(s) for s in shots),
            noise_stds=tuple(float(s) for s in data.get('noise_stds', [])),
            mode=str(data.get('mode', CALIBRATION)),
            param_mode=NoiseMode(data.get('param_mode', NoiseMode.PER_QUBIT.value)),
            exact_bias=bool(data.get('exact_bias', False)),
            seed=seed,
            protocol=protocol,
            pattern=data.get('pattern'),
            orderings={str(k): tuple(_edge(e) for e in v) for k, v in data.get('orderings', {}).items()},
            comparisons=tuple(Comparison(int(c['trap']), str(c['with']), str(c['without']))
                              for c in data.get('comparisons', [])),
            bootstrap_resamples=data.get('bootstrap_resamples'),
            histogram_bins=data.get('histogram_bins'),
        )

    @property
    def spreads(self) -> List[Optional[float]]:
        "Noise spreads to run; None means the noise spec as given"
        return list(self.noise_stds) or [None]
