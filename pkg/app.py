"""
Main command-line application
Commands for decomposition, seminorms, local and global extension, and
the variational oracles
"""

import logging
import sys
from functools import wraps

import click
import numpy as np

import config
import storage
from assembly_service import extend as run_extend
from decomposition_service import build_decomposition, check_good_geometry
from errors import ExtensionError, InvalidInputError, ToleranceNotMetError
from geometry import AffineJet, Point2, Square, bounding_square
from jet_service import keystone_field
from local_service import local_extend
from oracle_service import GridProblem, grid_problem_for, min_besov_1d, min_energy_2d
from seminorm_service import set_seminorm
from trace1d_service import Samples1D, besov_seminorm_quadrature, extend_Tb, full_norm_terms

logger = logging.getLogger(__name__)


def handle_errors(f):
    """Map toolkit errors to exit codes with a one-line diagnostic"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ToleranceNotMetError as e:
            best = '' if e.best_estimate is None else f' (best estimate {e.best_estimate:.6g})'
            click.echo(f'error: {e}{best}', err=True)
            sys.exit(e.exit_code)
        except ExtensionError as e:
            click.echo(f'error: {e}', err=True)
            sys.exit(e.exit_code)
    return decorated_function


def banner(title, lines):
    click.echo(f"\n{'=' * 60}")
    click.echo(title)
    click.echo('=' * 60)
    for key, value in lines:
        click.echo(f'{key}: {value}')
    click.echo(f"{'=' * 60}\n")


def sample_rows(F, box, n):
    t = np.linspace(0.0, 1.0, n)
    gx, gy = np.meshgrid(box.lo[0] + t * box.side, box.lo[1] + t * box.side)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    v, g, _ = F.evaluate(pts)
    return [(x, y, val, dx, dy) for (x, y), val, (dx, dy) in zip(pts, v, g)]


FIELD_HEADER = ['x', 'y', 'value', 'gx', 'gy']


# ============================================================================
# Command group
# ============================================================================

@click.group()
@click.option('--config', 'config_path', type=click.Path(), default=None, help='JSON config file')
@click.option('--p', type=float, default=None, help='Sobolev exponent (2 < p < inf)')
@click.option('--c1', type=float, default=None)
@click.option('--c2', type=float, default=None)
@click.option('--c3', type=float, default=None)
@click.option('--c4', type=float, default=None)
@click.option('--angles', 'angle_count', type=int, default=None, help='directions searched by the set seminorm')
@click.option('--oracle-grid', type=int, default=None, help='oracle nodes per side')
@click.option('--seed', type=int, default=None)
@click.option('--log-level', default=config.LOG_LEVEL, show_default=True)
@click.pass_context
@handle_errors
def cli(ctx, config_path, p, c1, c2, c3, c4, angle_count, oracle_grid, seed, log_level):
    """Bounded linear extension of data on finite planar sets"""
    logging.basicConfig(level=log_level.upper(), format=config.LOG_FORMAT)
    ctx.obj = config.load_config(config_path, p=p, c1=c1, c2=c2, c3=c3, c4=c4, angle_count=angle_count,
                                 oracle_grid=oracle_grid, seed=seed)


def _p(cfg, p):
    return cfg.p if p is None else p


# ============================================================================
# Geometry
# ============================================================================

@cli.command()
@click.argument('instance', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None, help='decomposition JSON')
@click.option('--plot', type=click.Path(), default=None, help='PNG picture of the leaves')
@click.option('--report/--no-report', default=False, help='include the geometry report')
@click.pass_obj
@handle_errors
def decompose(cfg, instance, out, plot, report):
    """Build the CZ decomposition of an instance"""
    points, _, p = storage.load_instance(instance)
    decomp = build_decomposition(points, _p(cfg, p), cfg.c1, cfg.angle_count, cfg.angle_tolerance)
    data = decomp.to_dict()
    if report:
        data['geometry'] = check_good_geometry(decomp, cfg)
    if out:
        storage.write_json(out, data)
    if plot:
        import plotting
        plotting.plot_decomposition(decomp, plot)
    summary = decomp.summary()
    banner('DECOMPOSITION', [(k, summary[k]) for k in ('leaves', 'keystones', 'min_side', 'max_side',
                                                        'balance_splits', 'longest_path')])


@cli.command('set-seminorm')
@click.argument('instance', type=click.Path(exists=True))
@click.option('--profile/--no-profile', default=False, help='include the per-angle profile')
@click.option('--out', type=click.Path(), default=None)
@click.pass_obj
@handle_errors
def set_seminorm_command(cfg, instance, profile, out):
    """Besov seminorm estimate of a point set"""
    points, _, p = storage.load_instance(instance)
    estimate = set_seminorm(points, _p(cfg, p), cfg.angle_count, cfg.angle_tolerance)
    if out:
        storage.write_json(out, estimate.to_dict(with_profile=profile))
    banner('SET SEMINORM', [('value', f'{estimate.value:.10g}'), ('angle', f'{estimate.angle:.6f}'),
                            ('graph', estimate.graph_ok)])


# ============================================================================
# One variable
# ============================================================================

@cli.command()
@click.argument('instance', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None)
@click.option('--quadrature/--no-quadrature', default=False, help='also integrate the extension')
@click.pass_obj
@handle_errors
def trace1d(cfg, instance, out, quadrature):
    """Trace norm of 1D samples {"xs": [...], "values": [...]}"""
    data = storage.load_json(instance)
    if 'xs' not in data:
        raise InvalidInputError(f'{instance}: missing field "xs"')
    order = np.argsort(np.asarray(data['xs'], dtype=float))
    xs = np.asarray(data['xs'], dtype=float)[order]
    gs = np.asarray(data.get('values', [0.0] * len(xs)), dtype=float)[order]
    s = Samples1D.of(xs, gs, float(data.get('p', cfg.p)))
    norm = full_norm_terms(s)
    result = norm.to_dict(full=True)
    lines = [('Mp', f'{norm.Mp:.10g}'), ('full norm p', f'{norm.full_p:.10g}'), ('functionals', norm.count)]
    if quadrature and s.n >= 2:
        value = besov_seminorm_quadrature(extend_Tb(s, cutoff=False), s.p, cfg.besov_tol)
        result['quadrature_seminorm'] = value
        lines.append(('quadrature seminorm', f'{value:.10g}'))
    if out:
        storage.write_json(out, result)
    banner('TRACE NORM', lines)


# ============================================================================
# Extension
# ============================================================================

@cli.command('local-extend')
@click.argument('problem', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None)
@click.option('--csv', 'csv_path', type=click.Path(), default=None, help='sampled field')
@click.option('--grid', type=int, default=64, show_default=True)
@click.pass_obj
@handle_errors
def local_extend_command(cfg, problem, out, csv_path, grid):
    """Local extension on {square, points, values, x0, L0, p}"""
    data = storage.load_json(problem)
    points, values, p = storage.parse_instance(data, problem)
    try:
        Q = Square.from_dict(data['square'])
        x0 = Point2.from_dict(data['x0'])
        L0 = AffineJet.from_dict(data['L0']) if 'L0' in data else AffineJet(x0, 0.0, (0.0, 0.0))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f'{problem}: malformed field {e}')
    solution = local_extend(Q, points, x0, values, L0, _p(cfg, p), flatness=cfg.c4, angles=cfg.angle_count,
                            angle_tolerance=cfg.angle_tolerance)
    if out:
        storage.write_json(out, solution.to_dict())
    if csv_path:
        storage.write_csv(csv_path, FIELD_HEADER, sample_rows(solution.field, Q, grid))
    banner('LOCAL EXTENSION', [('Mhat_p', f'{solution.Mhat_p:.10g}'), ('functionals', solution.count)])


@cli.command()
@click.argument('instance', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None)
@click.pass_obj
@handle_errors
def jets(cfg, instance, out):
    """Keystone jets of an instance"""
    points, values, p = storage.load_instance(instance)
    decomp = build_decomposition(points, _p(cfg, p), cfg.c1, cfg.angle_count, cfg.angle_tolerance)
    field = keystone_field(decomp, values, _p(cfg, p), cfg)
    if out:
        storage.write_json(out, field.to_dict())
    banner('KEYSTONE JETS', [(f'keystone {mu}', f'value {L.value:.6g}, gradient ({L.grad[0]:.6g}, {L.grad[1]:.6g})')
                             for mu, L in sorted(field.entries.items())])


@cli.command()
@click.argument('instance', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None, help='M_p, functional report and summary')
@click.option('--csv', 'csv_path', type=click.Path(), default=None, help='sampled field')
@click.option('--grid', type=int, default=64, show_default=True)
@click.pass_obj
@handle_errors
def extend(cfg, instance, out, csv_path, grid):
    """Extend the data of an instance to the plane"""
    points, values, p = storage.load_instance(instance)
    result = run_extend(values, points, _p(cfg, p), cfg)
    if out:
        storage.write_json(out, result.to_dict())
    if csv_path:
        storage.write_csv(csv_path, FIELD_HEADER, sample_rows(result.field, bounding_square(points), grid))
    banner('EXTENSION', [('points', len(points)), ('M_p', f'{result.M_p:.10g}'), ('M', f'{result.M:.10g}'),
                         ('functionals', result.functional_count)])


@cli.command('eval')
@click.argument('instance', type=click.Path(exists=True))
@click.argument('csv_path', type=click.Path())
@click.option('--grid', type=int, default=64, show_default=True)
@click.option('--scale', type=float, default=1.5, show_default=True, help='sample box relative to the data')
@click.pass_obj
@handle_errors
def eval_command(cfg, instance, csv_path, grid, scale):
    """Sample the extension of an instance on a grid"""
    points, values, p = storage.load_instance(instance)
    result = run_extend(values, points, _p(cfg, p), cfg)
    storage.write_csv(csv_path, FIELD_HEADER, sample_rows(result.field, bounding_square(points, scale), grid))
    click.echo(f'{grid * grid} samples written to {csv_path}')


# ============================================================================
# Oracles
# ============================================================================

@cli.command()
@click.argument('problem', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None)
@click.option('--csv', 'csv_path', type=click.Path(), default=None, help='grid minimiser')
@click.pass_obj
@handle_errors
def oracle(cfg, problem, out, csv_path):
    """Run an oracle: a grid problem, {"kind": "besov1d", ...} or an instance"""
    data = storage.load_json(problem)
    if data.get('kind') == 'besov1d':
        value = min_besov_1d(data['xs'], data['values'], float(data.get('p', cfg.p)),
                             int(data.get('n', cfg.oracle_grid)))
        result = {'kind': 'besov1d', 'oracle_root': value}
    else:
        if 'box' in data:
            prob = GridProblem.from_dict(data)
        else:
            points, values, p = storage.parse_instance(data, problem)
            prob = grid_problem_for(points, values, _p(cfg, p), cfg.oracle_grid)
        value, grid_field = min_energy_2d(prob, cfg.oracle_tol, cfg.oracle_max_iter)
        result = {'kind': 'grid', 'oracle_root': value, 'problem': prob.to_dict()}
        if csv_path:
            ys, xs = grid_field.axes
            rows = [(x, y, grid_field.values[j, i]) for j, y in enumerate(ys) for i, x in enumerate(xs)]
            storage.write_csv(csv_path, ['x', 'y', 'value'], rows)
    if out:
        storage.write_json(out, result)
    banner('ORACLE', [('kind', result['kind']), ('optimum', f"{result['oracle_root']:.10g}")])


@cli.command()
@click.argument('instance', type=click.Path(exists=True))
@click.option('--out', type=click.Path(), default=None)
@click.pass_obj
@handle_errors
def compare(cfg, instance, out):
    """Extension norm against the grid oracle on the same instance"""
    points, values, p = storage.load_instance(instance)
    p = _p(cfg, p)
    result = run_extend(values, points, p, cfg)
    optimum, _ = min_energy_2d(grid_problem_for(points, values, p, cfg.oracle_grid),
                               cfg.oracle_tol, cfg.oracle_max_iter)
    ratio = result.M / optimum if optimum > 0 else float('inf') if result.M > 0 else 1.0
    report = {'M_p_root': result.M, 'oracle_root': optimum, 'ratio': ratio}
    if out:
        storage.write_json(out, report)
    banner('COMPARISON', [(k, f'{v:.10g}') for k, v in report.items()])


def main():
    cli(obj=None)


if __name__ == '__main__':
    main()
