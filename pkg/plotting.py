"""
Plotting helpers
Decomposition pictures: leaf outlines, keystones and data sites
"""

import logging

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from matplotlib.collections import PatchCollection
from matplotlib.patches import Rectangle

from geometry import points_array

logger = logging.getLogger(__name__)


def _rectangles(squares):
    return [Rectangle(tuple(Q.lo), Q.side, Q.side) for Q in squares]


def plot_decomposition(decomp, path, window=None, dpi=150):
    """
    Draw the leaves of a decomposition with keystones shaded

    Args:
        decomp: CZDecomposition
        path: output image file
        window: Square to zoom to, defaults to the root
        dpi: resolution
    """
    window = window or decomp.root
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.add_collection(PatchCollection(_rectangles(decomp.leaves), facecolor='none',
                                      edgecolor='0.4', linewidth=0.4))
    keystones = [decomp.leaves[k] for k in decomp.keystones]
    ax.add_collection(PatchCollection(_rectangles(keystones), facecolor='tab:orange', alpha=0.35,
                                      edgecolor='tab:orange', linewidth=0.6))
    if len(decomp.points):
        ax.plot(decomp.points[:, 0], decomp.points[:, 1], 'k.', markersize=3, label='E')
    reps = points_array(decomp.x_sharp)
    if len(reps):
        ax.plot(reps[:, 0], reps[:, 1], 'x', color='tab:red', markersize=4, label='keystone points')
    ax.set_xlim(window.lo[0], window.hi[0])
    ax.set_ylim(window.lo[1], window.hi[1])
    ax.set_aspect('equal')
    ax.set_title(f'{decomp.K} leaves, {len(decomp.keystones)} keystones')
    ax.legend(loc='upper right', fontsize='small')
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    logger.info('decomposition plot written to %s', path)
