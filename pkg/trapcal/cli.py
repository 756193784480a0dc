import dataclasses
import functools
import logging
import os.path
import shutil
from pathlib import Path

import click
import coloredlogs
import yaml
from tabulate import tabulate

from .channel import ChannelError, SocketChannel
from .config import CALIBRATION, PROTOCOL, ExperimentSpec, load_document
from .db import TrapcalDB
from .device import InlineLink, ZAttack
from .estimator import (build_design_matrix, error_report, solve_log_least_squares)
from .noise import NoiseMode, format_key
from .planner import build_plan
from .protocol import Client, ProtocolStateError, bin_trap_statistics, make_server
from .report import (build_noise_model, default_coloring, load_pattern, plan_for, run_experiment)
from .serialization import (deserialize_graph, read_trap_statistics, serialize_float, serialize_plan,
                            serialize_round_records, write_estimates, write_json, write_trap_statistics)

logger = logging.getLogger(__name__)

# ordering counts quoted for the 12x12 cluster state, shown next to our own
REFERENCE_ORDERING_COUNTS = (16, 28)

ABORT_EXIT_CODE = 2


def domain_errors(func):
    "Reports validation, protocol and transport failures as click errors (exit code 1)"

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValueError, ProtocolStateError, ChannelError) as e:
            raise click.ClickException(str(e)) from e

    return wrapper


def load_spec(spec_file: str) -> ExperimentSpec:
    return ExperimentSpec.from_dict(load_document(spec_file), Path(spec_file).parent)


def echo_verdict(outcome) -> None:
    if outcome.accepted:
        click.echo(click.style('Accept: {0} of {1} test rounds failed, result {2}'.format(
            outcome.failed_tests, outcome.test_rounds, outcome.result), fg='green'))
    else:
        click.echo(click.style('Abort: {0} of {1} test rounds failed'.format(
            outcome.failed_tests, outcome.test_rounds), fg='red'))


@click.group()
@click.option('--log-level', '-l', type=str, default='INFO')
def trapcal(log_level):
    coloredlogs.install(level=log_level, fmt='%(asctime)s %(levelname)s %(message)s')


@trapcal.command()
@click.option('--directory', '-d', type=str, default='.')
def init(directory):
    "Initialize new trapcal workspace"

    target_config = os.path.join(directory, 'trapcal.yaml')

    if os.path.exists(target_config):
        click.echo(click.style('Already initialized (trapcal.yaml exists), aborting.', fg='red'))
        return

    initial_config = os.path.join(os.path.dirname(__file__), 'data', 'trapcal.initial.yaml')
    shutil.copyfile(initial_config, target_config)

    trapcal_db = TrapcalDB(directory)

    click.echo(click.style('Successfully initialized in {0}.'.format(trapcal_db.data_directory.absolute()), fg='green'))


@trapcal.command()
@click.argument('graph_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--param-mode', type=click.Choice([m.value for m in NoiseMode]), default=NoiseMode.PER_QUBIT.value)
@click.option('--output', '-o', type=click.Path(dir_okay=False), default=None)
@domain_errors
def plan(graph_file, param_mode, output):
    "Build the gate-ordering plan for a graph"

    graph = deserialize_graph(load_document(graph_file), Path(graph_file).parent)
    ordering_plan = build_plan(graph, NoiseMode(param_mode))

    if output is not None:
        write_json(Path(output), serialize_plan(ordering_plan))
        logger.info('Plan written to %s', output)

    stats = ordering_plan.stats()
    covered = len(ordering_plan.covered_keys())
    total = covered + stats['unidentifiable']
    print(tabulate(sorted(stats.items()), headers=['Plan', 'Value']))
    print('Reference ordering counts: {0}'.format(', '.join(str(c) for c in REFERENCE_ORDERING_COUNTS)))

    if stats['unidentifiable']:
        click.echo(click.style('Covered {0} of {1} parameters, missing: {2}'.format(
            covered, total, ', '.join(format_key(key, graph) for key in ordering_plan.unidentifiable)), fg='red'))
    else:
        click.echo(click.style('Covered all {0} parameters.'.format(total), fg='green'))


@trapcal.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--seed', type=int, default=None)
@click.option('--shots', type=int, multiple=True)
@click.option('--mode', type=click.Choice([CALIBRATION, PROTOCOL]), default=None)
@click.option('--exact-bias', is_flag=True, default=False)
@click.option('--out-dir', type=click.Path(file_okay=False), default=None)
@click.pass_context
@domain_errors
def experiment(ctx, spec_file, seed, shots, mode, exact_bias, out_dir):
    "Run a single experiment spec file"

    spec = load_spec(spec_file)
    overrides = {}
    if seed is not None:
        overrides['seed'] = seed
    if shots:
        overrides['shots'] = tuple(shots)
    if mode is not None:
        overrides['mode'] = mode
    if exact_bias:
        overrides['exact_bias'] = True
    spec = dataclasses.replace(spec, **overrides)

    output_directory = Path(out_dir) if out_dir is not None else Path(spec_file).parent / 'results' / spec.name
    result = run_experiment(spec, output_directory, data_directory=Path(spec_file).parent)

    for run in result.runs:
        summary = run.report.summary()
        click.echo('[{0}{1}]'.format(run.tag, '' if run.noise_std is None else ' std={0}'.format(run.noise_std)))
        click.echo('mean diff: {0}'.format(serialize_float(summary['mean_diff'], 6)))
        click.echo('std diff: {0}'.format(serialize_float(summary['std_diff'], 6)))
        click.echo('rejected rows: {0}'.format(summary['dropped_rows']))

    if result.comparisons:
        table = [[c.trap, c.with_id, c.without_id, serialize_float(c.bias_with, 7),
                  serialize_float(c.bias_without, 7), serialize_float(c.ratio, 6)]
                 for c in result.comparisons]
        print(tabulate(table, headers=['Trap', 'With', 'Without', 'Bias with', 'Bias without', 'Ratio']))

    if result.protocol is not None:
        echo_verdict(result.protocol)
        if not result.protocol.accepted:
            ctx.exit(ABORT_EXIT_CODE)


@trapcal.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--transport', type=click.Choice(['inprocess', 'tcp']), default='inprocess')
@click.option('--role', type=click.Choice(['both', 'client', 'server']), default='both')
@click.option('--listen', type=str, default=None, help='host:port the server accepts on')
@click.option('--connect', type=str, default=None, help='host:port the client connects to')
@click.option('--attack', type=int, default=None, help='Vertex a deviating server applies Z to')
@click.option('--seed', type=int, default=None)
@click.option('--out-dir', type=click.Path(file_okay=False), default=None)
@click.pass_context
@domain_errors
def protocol(ctx, spec_file, transport, role, listen, connect, attack, seed, out_dir):
    "Run the delegated protocol for a spec file"

    spec = dataclasses.replace(load_spec(spec_file), mode=PROTOCOL)
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed, protocol=dataclasses.replace(spec.protocol, seed=seed))
    config = spec.protocol
    z_attack = ZAttack(attack) if attack is not None else None
    base = Path(spec_file).parent
    output_directory = Path(out_dir) if out_dir is not None else base / 'results' / spec.name

    if role == 'both':
        if transport == 'tcp':
            address = listen or connect
            if address is None:
                raise click.UsageError('tcp transport needs --listen or --connect')
        else:
            address = None
        outcome = run_experiment(spec, output_directory, data_directory=base, attack=z_attack,
                                 address=address).protocol

    elif transport != 'tcp':
        raise click.UsageError('Split roles need the tcp transport')

    else:
        graph = deserialize_graph(spec.graph, base)
        truth = build_noise_model(spec.noise, graph, spec.seed)
        ordering_plan = plan_for(graph, spec.param_mode, truth)
        output_directory.mkdir(parents=True, exist_ok=True)

        if role == 'server':
            if listen is None:
                raise click.UsageError('The server role needs --listen')
            server = make_server(config, graph, ordering_plan, truth, SocketChannel.listen(listen), InlineLink(),
                                 z_attack)
            with server.channel:
                log = server.serve()
            stats = bin_trap_statistics(log.decrypted)
            write_trap_statistics(output_directory / 'stats_protocol.csv', stats)
            click.echo('Server finished {0} rounds, verdict {1}, {2} decrypted test rounds.'.format(
                len(log.records), log.verdict, len(log.decrypted)))
            return

        if connect is None:
            raise click.UsageError('The client role needs --connect')
        pattern = load_pattern(spec, graph, base)
        with SocketChannel.connect(connect, retries=50) as channel:
            client = Client(config, pattern, default_coloring(graph), channel, InlineLink())
            outcome = client.run()
        with open(output_directory / 'records.yaml', 'w') as fh:
            yaml.dump({'records': serialize_round_records(client.log)}, stream=fh)

    echo_verdict(outcome)
    if not outcome.accepted:
        ctx.exit(ABORT_EXIT_CODE)


@trapcal.command()
@click.argument('graph_file', type=click.Path(exists=True, dir_okay=False))
@click.argument('stats_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--param-mode', type=click.Choice([m.value for m in NoiseMode]), default=NoiseMode.PER_QUBIT.value)
@click.option('--output', '-o', type=click.Path(dir_okay=False), default=None)
@domain_errors
def estimate(graph_file, stats_file, param_mode, output):
    "Re-run the estimator on a trap statistics CSV"

    graph = deserialize_graph(load_document(graph_file), Path(graph_file).parent)
    ordering_plan = build_plan(graph, NoiseMode(param_mode))
    matrix = build_design_matrix(ordering_plan, read_trap_statistics(Path(stats_file)), graph)
    solution = solve_log_least_squares(matrix)

    null_keys = set(solution.null_keys)
    estimates = {key: lam for key, lam in solution.lambdas.items() if key not in null_keys}
    report = error_report(estimates, rows=matrix.rows_per_key(), residual_norm=solution.residual_norm,
                          shots=int(matrix.shots.sum()), dropped_rows=matrix.dropped_rows)

    if output is not None:
        write_estimates(Path(output), report)

    table = [[format_key(e.key, graph), serialize_float(e.lambda_hat, 9), e.rows] for e in report.entries]
    print(tabulate(table, headers=['Parameter', 'Lambda', 'Rows']))
    click.echo('rejected rows: {0}'.format(matrix.dropped_rows))


@trapcal.command()
@click.option('--keyword', '-k', type=str, default=None)
@domain_errors
def run(keyword):
    "Run all experiments of the workspace and output overview table"

    trapcal_db = TrapcalDB()
    settings = trapcal_db.get_settings()

    results = {}

    for spec in trapcal_db.get_all_experiments():
        if keyword is not None and keyword not in spec.name:
            continue

        results[spec.name] = run_experiment(spec, trapcal_db.get_results_directory(spec.name), settings,
                                            trapcal_db.data_directory)

    table = []
    for name, result in results.items():
        verdict = result.protocol.verdict if result.protocol is not None else None
        for run_summary in result.runs:
            summary = run_summary.report.summary()
            table.append([
                name,
                run_summary.tag,
                run_summary.noise_std,
                summary['parameters'],
                serialize_float(summary['mean_diff'], 4),
                serialize_float(summary['std_diff'], 4),
                serialize_float(summary['max_abs_diff_x100'], 4),
                verdict,
            ])
    print(tabulate(table, headers=['Experiment', 'Run', 'Noise std', 'Parameters', 'Mean diff', 'Std diff',
                                   'Max |diff| x100', 'Verdict']))


if __name__ == '__main__':
    trapcal()
