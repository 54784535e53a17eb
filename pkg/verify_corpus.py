"""
Verify the extension on seeded random instances
Interpolation, linearity, constant-path jets and the functional budget
"""

import logging
import sys

import numpy as np

import config
from assembly_service import extend
from errors import ExtensionError

logger = logging.getLogger(__name__)

FUNCTIONAL_BUDGET = 50


def random_instance(rng, n):
    points = rng.uniform(-0.5, 0.5, size=(n, 2))
    values = rng.normal(size=n)
    return points, values


def check_instance(points, values, cfg, rng):
    """Return a list of failure messages for one instance"""
    failures = []
    n = len(points)
    result = extend(values, points, cfg.p, cfg)

    got = result.field.value(points)
    scale = max(1.0, float(np.max(np.abs(values))))
    worst = float(np.max(np.abs(got - values))) if n else 0.0
    if worst > 1e-7 * scale:
        failures.append(f'interpolation error {worst:.3g}')

    other = rng.normal(size=n)
    samples = rng.uniform(-0.75, 0.75, size=(25, 2))
    combined = extend(2.0 * values - 3.0 * other, points, cfg.p, cfg).field.value(samples)
    expected = 2.0 * result.field.value(samples) - 3.0 * extend(other, points, cfg.p, cfg).field.value(samples)
    gap = float(np.max(np.abs(combined - expected)))
    if gap > 1e-7 * max(1.0, float(np.max(np.abs(expected)))):
        failures.append(f'linearity error {gap:.3g}')

    if result.decomposition is not None and result.assembly is not None:
        L = result.assembly.jets
        for nu, x in enumerate(result.decomposition.x_nu):
            jet = result.field.jet(x)
            if abs(jet.value - L[nu].value) > 1e-6 * max(1.0, abs(L[nu].value)):
                failures.append(f'constant-path value mismatch at leaf {nu}')
                break

    if result.functional_count > FUNCTIONAL_BUDGET * max(n, 1) ** 2:
        failures.append(f'{result.functional_count} functionals for {n} points')
    return failures


def verify(count=10, max_points=12, seed=None, p=None):
    cfg = config.load_config(p=p)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    failed = 0
    for k in range(count):
        n = int(rng.integers(1, max_points + 1))
        points, values = random_instance(rng, n)
        try:
            failures = check_instance(points, values, cfg, rng)
        except ExtensionError as e:
            failures = [f'{type(e).__name__}: {e}']
        status = 'ok' if not failures else '; '.join(failures)
        print(f'instance {k:3d} (N={n:2d}): {status}')
        failed += bool(failures)
    print(f"\n{'=' * 60}")
    print(f'{count - failed} of {count} instances passed at p = {cfg.p:g}')
    print(f"{'=' * 60}\n")
    return failed


if __name__ == '__main__':
    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 10
    p = float(sys.argv[2]) if len(sys.argv) > 2 else None
    sys.exit(1 if verify(count, p=p) else 0)
