"""Decision-boundary grid export for 2-D tasks.

For each requested (sigma, rho) the parent is perturbed once and evaluated
over a regular lattice spanning the data bounding box padded by 10%. Each
cell yields a CSV of (x, y, class, confidence) and an 8-bit PGM image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .errors import TaskMismatchError
from .mutation import apply, compose, derive_seed, sample_mask, sample_noise
from .network import Network, forward, softmax

# Spawn-key namespace for boundary-cell perturbations.
_BOUNDARY_NS = 4

DEFAULT_RESOLUTION = 200


@dataclass(frozen=True)
class BoundaryGrid:
    xs: np.ndarray  # lattice x coordinates, ascending
    ys: np.ndarray  # lattice y coordinates, ascending
    classes: np.ndarray  # (res, res) int, row i = ys[i]
    confidence: np.ndarray  # (res, res) max softmax probability


def lattice_bounds(data: Dataset, pad: float = 0.1) -> tuple[float, float, float, float]:
    """Bounding box of the samples padded by `pad` of each side length."""
    lo = data.inputs.min(axis=0)
    hi = data.inputs.max(axis=0)
    span = hi - lo
    return (
        float(lo[0] - pad * span[0]),
        float(hi[0] + pad * span[0]),
        float(lo[1] - pad * span[1]),
        float(hi[1] + pad * span[1]),
    )


def evaluate_grid(
    net: Network,
    bounds: tuple[float, float, float, float],
    resolution: int = DEFAULT_RESOLUTION,
) -> BoundaryGrid:
    if net.spec.input_dim != 2:
        raise TaskMismatchError(
            f"boundary grids need a 2-D input task, network takes {net.spec.input_dim}"
        )
    x0, x1, y0, y1 = bounds
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    probs = softmax(forward(net, points))
    classes = probs.argmax(axis=1).reshape(resolution, resolution)
    confidence = probs.max(axis=1).reshape(resolution, resolution)
    return BoundaryGrid(xs, ys, classes, confidence)


def perturbed_network(parent: Network, sigma: float, rho: float, seed: int) -> Network:
    """One sampled mutation of the parent; sigma == 0 returns the parent."""
    if sigma == 0.0:
        return parent
    w = parent.params.w
    mask = sample_mask(w, rho, derive_seed(seed, _BOUNDARY_NS, 0))
    noise = sample_noise(w, 0.0, sigma, derive_seed(seed, _BOUNDARY_NS, 1))
    return Network(parent.spec, apply(parent.params, compose(noise, mask), +1))


def write_grid_csv(grid: BoundaryGrid, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "class", "confidence"])
        for i, y in enumerate(grid.ys):
            for j, x in enumerate(grid.xs):
                writer.writerow(
                    [repr(float(x)), repr(float(y)), int(grid.classes[i, j]),
                     repr(float(grid.confidence[i, j]))]
                )


def write_grid_pgm(grid: BoundaryGrid, path: str | Path) -> None:
    """Binary PGM; class 0 maps to black, the highest class to white.

    Rows run top to bottom in image convention, so the first pixel row is
    the largest y.
    """
    res = grid.classes.shape[0]
    top_class = max(int(grid.classes.max()), 1)
    pixels = np.round(grid.classes[::-1] * (255.0 / top_class)).astype(np.uint8)
    header = f"P5\n{res} {res}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())


def cell_tag(sigma: float, rho: float) -> str:
    return f"sigma{sigma:g}_rho{rho:g}"


def export_boundary_cells(
    parent: Network,
    data: Dataset,
    sigma_grid: list[float],
    rho_grid: list[float],
    out_dir: str | Path,
    master_seed: int,
    resolution: int = DEFAULT_RESOLUTION,
) -> list[Path]:
    """Write one CSV and one PGM per (sigma, rho) cell; returns the paths."""
    if data.inputs.shape[1] != 2:
        raise TaskMismatchError(
            f"boundary export needs 2-D data, got {data.inputs.shape[1]} features"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bounds = lattice_bounds(data)
    written = []
    for ci, sigma in enumerate(sigma_grid):
        for cj, rho in enumerate(rho_grid):
            cell_seed = derive_seed(master_seed, ci * len(rho_grid) + cj)
            net = perturbed_network(parent, sigma, rho, cell_seed)
            grid = evaluate_grid(net, bounds, resolution)
            csv_path = out_dir / f"boundary_{cell_tag(sigma, rho)}.csv"
            pgm_path = out_dir / f"boundary_{cell_tag(sigma, rho)}.pgm"
            write_grid_csv(grid, csv_path)
            write_grid_pgm(grid, pgm_path)
            written.extend([csv_path, pgm_path])
    return written
