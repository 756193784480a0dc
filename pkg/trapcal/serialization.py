import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from .circuit import GateOrdering
from .config import load_document
from .estimator import EstimateReport, HistogramBin, TrapStatistic
from .graphs import Graph, build_cluster_state, build_diamond_kite, build_path, canonical_edge
from .mbqc import MeasurementPattern, build_grid_pattern, build_line_pattern
from .noise import GaussianSpec, NoiseMode, NoiseModel, ParamKey, is_qubit_key, lambda_from_p
from .planner import OrderingPlan
from .protocol import ClientLog, ServerLog

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 9

TRAP_STAT_COLUMNS = ['ordering_id', 'trap_vertex', 'shots', 'failures']
ESTIMATE_COLUMNS = ['param_edge_u', 'param_edge_v', 'param_qubit', 'lambda_hat', 'lambda_true', 'diff',
                    'abs_diff_x100', 'rows', 'stderr']
HISTOGRAM_COLUMNS = ['bin_left', 'bin_right', 'count', 'shots', 'noise_std']


def serialize_float(value: Optional[float], digits: int = FLOAT_DIGITS) -> str:
    if value is None:
        return ''
    return '{0:.{1}g}'.format(value, digits)


def deserialize_graph(data: Dict[str, Any], base_directory: Path = Path('.')) -> Graph:
    if 'file' in data:
        return deserialize_graph(load_document(Path(base_directory) / data['file']))
    if 'lattice' in data:
        return build_cluster_state(int(data['lattice']['width']), int(data['lattice']['height']))
    if 'path' in data:
        return build_path(int(data['path']))
    if data.get('builtin') == 'diamond_kite':
        return build_diamond_kite()
    if 'vertices' in data:
        labels = data.get('labels')
        return Graph(
            int(data['vertices']),
            tuple((int(u), int(v)) for u, v in data.get('edges', [])),
            tuple(str(label) for label in labels) if labels is not None else None,
        )
    raise ValueError('Invalid graph: ' + str(data))


def serialize_graph(graph: Graph) -> Dict[str, Any]:
    ser_graph: Dict[str, Any] = {
        'vertices': graph.vertex_count,
        'edges': [list(edge) for edge in graph.edges],
    }
    if graph.labels is not None:
        ser_graph['labels'] = list(graph.labels)
    return ser_graph


def serialize_noise(model: NoiseModel) -> Dict[str, Any]:
    entries = []
    for key in model.parameter_keys():
        if is_qubit_key(key):
            edge, qubit = key
            entry = {'edge': list(edge), 'qubit': qubit}
        else:
            entry = {'edge': list(key)}
        if model.probs is not None:
            entry['p'] = model.probs[key]
        entry['lambda'] = model.lam(key)
        entries.append(entry)

    ser_noise: Dict[str, Any] = {'mode': model.mode.value, 'entries': entries}
    if model.seed is not None:
        ser_noise['seed'] = model.seed
    if model.gaussian is not None:
        ser_noise['gaussian'] = {'mean': model.gaussian.mean, 'std': model.gaussian.std}
    return ser_noise


def deserialize_noise(data: Dict[str, Any], graph: Graph) -> NoiseModel:
    mode = NoiseMode(data.get('mode', NoiseMode.PER_QUBIT.value))
    lambdas: Dict[ParamKey, float] = {}
    probs: Dict[ParamKey, float] = {}
    support: Dict = {edge: set(edge) for edge in graph.edges}

    for entry in data['entries']:
        edge = canonical_edge(*entry['edge'])
        if edge not in support:
            raise ValueError('Noise entry for unknown edge {0}'.format(edge))
        if mode is NoiseMode.PER_QUBIT:
            if 'qubit' not in entry:
                raise ValueError('per_qubit noise entry without a qubit: {0}'.format(entry))
            key = (edge, int(entry['qubit']))
            support[edge].add(int(entry['qubit']))
        else:
            key = edge

        if 'lambda' in entry:
            lambdas[key] = float(entry['lambda'])
        elif 'p' in entry:
            lambdas[key] = lambda_from_p(float(entry['p']))
        else:
            raise ValueError('Noise entry needs p or lambda: {0}'.format(entry))
        if 'p' in entry:
            probs[key] = float(entry['p'])

    gaussian = data.get('gaussian')
    return NoiseModel(
        mode=mode,
        support={edge: frozenset(nu) for edge, nu in support.items()},
        lambdas=lambdas,
        probs=probs if len(probs) == len(lambdas) else None,
        seed=data.get('seed'),
        gaussian=GaussianSpec(float(gaussian['mean']), float(gaussian['std'])) if gaussian else None,
    )


def serialize_param(key: ParamKey) -> Any:
    if is_qubit_key(key):
        edge, qubit = key
        return [list(edge), qubit]
    return list(key)


def deserialize_param(value: Any) -> ParamKey:
    if isinstance(value[0], list):
        return (canonical_edge(*value[0]), int(value[1]))
    return canonical_edge(*value)


def serialize_ordering(ordering: GateOrdering) -> Dict[str, Any]:
    return {'id': ordering.ordering_id, 'edges': [list(edge) for edge in ordering.sequence]}


def deserialize_ordering(data: Dict[str, Any]) -> GateOrdering:
    return GateOrdering(tuple(canonical_edge(*edge) for edge in data['edges']), str(data['id']))


def serialize_plan(plan: OrderingPlan) -> Dict[str, Any]:
    return {
        'mode': plan.mode.value,
        'orderings': [serialize_ordering(o) for o in plan.orderings],
        'equations': [
            {
                'param': serialize_param(eq.param),
                'trap': eq.trap,
                'with': eq.with_id,
                'without': eq.without_id,
                'kind': eq.kind.value,
            }
            for eq in plan.equations
        ],
        'unidentifiable': [serialize_param(key) for key in plan.unidentifiable],
        'stats': plan.stats(),
    }


def deserialize_pattern(data: Dict[str, Any], base_directory: Path = Path('.')) -> MeasurementPattern:
    if 'line' in data:
        return build_line_pattern(int(data['line']['length']), data['line'].get('angles'))
    if 'grid' in data:
        grid = data['grid']
        return build_grid_pattern(int(grid['width']), int(grid['height']), grid.get('angles'))
    if 'graph' in data:
        graph = deserialize_graph(data['graph'], base_directory)
        return MeasurementPattern(
            graph,
            {v: int(k) for v, k in enumerate(data['angles'])},
            {int(v): int(target) for v, target in data.get('flow', [])},
            frozenset(int(v) for v in data.get('inputs', [])),
            frozenset(int(v) for v in data.get('outputs', [])),
        )
    raise ValueError('Invalid pattern: ' + str(data))


def serialize_pattern(pattern: MeasurementPattern) -> Dict[str, Any]:
    return {
        'graph': serialize_graph(pattern.graph),
        'angles': [pattern.angles[v].k for v in pattern.graph.vertices],
        'flow': [[v, target] for v, target in sorted(pattern.flow.items())],
        'inputs': sorted(pattern.inputs),
        'outputs': sorted(pattern.outputs),
    }


def write_json(path: Path, document: Any) -> None:
    with open(path, 'w') as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write('\n')


def write_trap_statistics(path: Path, stats: Iterable[TrapStatistic]) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAP_STAT_COLUMNS)
        for stat in stats:
            writer.writerow([stat.ordering_id, stat.trap, stat.shots, stat.failures])


def read_trap_statistics(path: Path) -> List[TrapStatistic]:
    with open(path, 'r', newline='') as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRAP_STAT_COLUMNS:
            raise ValueError('Unexpected trap statistic columns in {0}: {1}'.format(path, reader.fieldnames))
        return [
            TrapStatistic(row['ordering_id'], int(row['trap_vertex']), int(row['shots']), int(row['failures']))
            for row in reader
        ]


def write_estimates(path: Path, report: EstimateReport, digits: int = FLOAT_DIGITS) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(ESTIMATE_COLUMNS)
        for entry in report.entries:
            if is_qubit_key(entry.key):
                (u, v), qubit = entry.key
            else:
                (u, v), qubit = entry.key, ''
            writer.writerow([
                u, v, qubit,
                serialize_float(entry.lambda_hat, digits),
                serialize_float(entry.lambda_true, digits),
                serialize_float(entry.diff, digits),
                serialize_float(entry.abs_diff_x100, digits),
                entry.rows,
                serialize_float(entry.stderr, digits),
            ])


def write_histogram(path: Path, bins: Sequence[HistogramBin], shots: int, noise_std: Optional[float],
                    digits: int = FLOAT_DIGITS) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_COLUMNS)
        for b in bins:
            writer.writerow([
                serialize_float(b.left, digits),
                serialize_float(b.right, digits),
                b.count,
                shots,
                serialize_float(noise_std, digits),
            ])


def serialize_round_records(client: ClientLog, server: Optional[ServerLog] = None) -> List[Dict[str, Any]]:
    "One entry per round; trap outcomes decrypted by the server appear only after key release"

    server_records = {r.round_index: r for r in server.records} if server is not None else {}
    records = []
    for record in client.records:
        ser_record: Dict[str, Any] = {
            'round': record.round_index,
            'kind': record.kind.value,
            'ordering_id': record.ordering_id,
            'deltas': [record.deltas[v].k for v in sorted(record.deltas)],
            'outcomes': [record.outcomes[v] for v in sorted(record.outcomes)],
        }
        if record.test is not None:
            ser_record['color'] = record.test.color
            ser_record['traps'] = sorted(record.test.traps)
            ser_record['failed'] = record.failed
        server_record = server_records.get(record.round_index)
        if server_record is not None and server_record.decrypted is not None:
            ser_record['decrypted'] = {int(v): s for v, s in sorted(server_record.decrypted.items())}
        records.append(ser_record)
    return records
