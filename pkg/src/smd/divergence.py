"""Output-divergence probes between parent and mutated children, and the
grid search picking (sigma, rho) that maximizes child accuracy inside a
KL budget.

MSE compares raw logits; KL compares softmax distributions (relative
entropy of unnormalized outputs is not well defined), direction
KL(parent || child).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .errors import ConfigurationError, ShapeError
from .metrics import accuracy
from .mutation import MutationParams, derive_seed, spawn_mutations
from .network import EPS_PROB, Network, forward, softmax

# Spawn-key namespace for per-cell search randomness.
_CELL_NS = 2

SWEEP_COLUMNS = ("sigma", "rho", "mean_kl", "mean_mse", "mean_child_acc", "n_children")


@dataclass(frozen=True)
class DivergenceReport:
    mse: float
    kl: float
    probe_size: int
    child_accuracy: float


@dataclass
class GridSearchConfig:
    sigma_grid: tuple[float, ...]
    rho_grid: tuple[float, ...]
    kl_target: float = 0.05
    kl_tolerance: float = 0.5  # relative band half-width around the target
    samples_per_cell: int = 4
    probe_size: int = 1000

    def __post_init__(self):
        self.sigma_grid = tuple(float(s) for s in self.sigma_grid)
        self.rho_grid = tuple(float(r) for r in self.rho_grid)
        if not self.sigma_grid or not self.rho_grid:
            raise ConfigurationError("sigma_grid and rho_grid must be nonempty")
        if any(s <= 0 for s in self.sigma_grid):
            raise ConfigurationError("sigma grid values must be positive")
        if any(not 0.0 <= r < 1.0 for r in self.rho_grid):
            raise ConfigurationError("rho grid values must lie in [0, 1)")
        if list(self.sigma_grid) != sorted(set(self.sigma_grid)):
            raise ConfigurationError("sigma_grid must be strictly ascending")
        if list(self.rho_grid) != sorted(set(self.rho_grid)):
            raise ConfigurationError("rho_grid must be strictly ascending")
        if self.kl_target <= 0 or self.kl_tolerance <= 0:
            raise ConfigurationError("kl_target and kl_tolerance must be positive")
        if self.samples_per_cell < 1 or self.probe_size < 1:
            raise ConfigurationError("samples_per_cell and probe_size must be positive")


@dataclass(frozen=True)
class CellResult:
    sigma: float
    rho: float
    mean_kl: float
    mean_mse: float
    mean_child_acc: float
    n_children: int


@dataclass(frozen=True)
class GridSearchOutcome:
    sigma: float
    rho: float
    report: DivergenceReport
    in_band: bool
    cells: tuple[CellResult, ...]


def _check_same_spec(parent: Network, child: Network) -> None:
    if parent.spec.layer_sizes != child.spec.layer_sizes or (
        parent.spec.hidden_activation != child.spec.hidden_activation
    ):
        raise ShapeError("parent and child architectures differ")


def mse_from_logits(parent_logits: np.ndarray, child_logits: np.ndarray) -> float:
    """Sum of squared logit differences per sample, averaged over samples."""
    diff = np.asarray(parent_logits) - np.asarray(child_logits)
    return float((diff**2).sum(axis=1).mean())


def kl_from_logits(parent_logits: np.ndarray, child_logits: np.ndarray) -> float:
    """Mean KL(parent || child) between clamped, renormalized softmaxes."""
    p = np.clip(softmax(parent_logits), EPS_PROB, None)
    q = np.clip(softmax(child_logits), EPS_PROB, None)
    p = p / p.sum(axis=1, keepdims=True)
    q = q / q.sum(axis=1, keepdims=True)
    kl = (p * np.log(p / q)).sum(axis=1).mean()
    return max(float(kl), 0.0)


def output_mse(parent: Network, child: Network, probe: Dataset) -> float:
    """Mean squared difference of raw logits over the probe set."""
    _check_same_spec(parent, child)
    return mse_from_logits(forward(parent, probe.inputs), forward(child, probe.inputs))


def output_kl(parent: Network, child: Network, probe: Dataset) -> float:
    """Mean relative entropy between parent and child output distributions."""
    _check_same_spec(parent, child)
    return kl_from_logits(forward(parent, probe.inputs), forward(child, probe.inputs))


def _search_spawn_params(sigma: float, rho: float, samples_per_cell: int) -> MutationParams:
    # Mirrored pairs when the cell size allows it, never anti-random
    # complements: a complement child mutates the (1 - rho) fraction, which
    # would mix near-dense children into sparse cells and destroy the
    # monotone KL-vs-rho trend the sweep exists to measure.
    mirrored = samples_per_cell % 2 == 0
    return MutationParams(sigma=sigma, rho=rho, mirrored=mirrored, anti_random=False)


def sweep_cells(
    parent: Network,
    probe: Dataset,
    sigma_grid: tuple[float, ...],
    rho_grid: tuple[float, ...],
    samples_per_cell: int,
    master_seed: int,
) -> list[CellResult]:
    """Evaluate every (sigma, rho) cell: mean KL/MSE/accuracy of fresh children.

    Cell randomness derives from (master_seed, cell index, child index), so
    cells may be evaluated in any order or concurrently without changing
    the outcome.
    """
    parent_logits = forward(parent, probe.inputs)
    cells = []
    for ci, sigma in enumerate(sigma_grid):
        for cj, rho in enumerate(rho_grid):
            cell_index = ci * len(rho_grid) + cj
            cell_seed = derive_seed(master_seed, _CELL_NS, cell_index)
            params = _search_spawn_params(sigma, rho, samples_per_cell)
            children = spawn_mutations(parent.params, params, samples_per_cell, cell_seed)
            kls, mses, accs = [], [], []
            for child in children:
                child_logits = forward(Network(parent.spec, child.params), probe.inputs)
                kls.append(kl_from_logits(parent_logits, child_logits))
                mses.append(mse_from_logits(parent_logits, child_logits))
                accs.append(accuracy(softmax(child_logits), probe.labels))
            cells.append(
                CellResult(
                    sigma=sigma,
                    rho=rho,
                    mean_kl=float(np.mean(kls)),
                    mean_mse=float(np.mean(mses)),
                    mean_child_acc=float(np.mean(accs)),
                    n_children=len(children),
                )
            )
    return cells


def select_cell(
    cells: list[CellResult], kl_target: float, kl_tolerance: float
) -> tuple[CellResult, bool]:
    """Selection rule: among cells with mean KL inside kl_target * (1 +-
    kl_tolerance), the one with the best mean child accuracy; if the band
    is empty, the cell with mean KL closest to the target, flagged False.
    Ties prefer larger sigma, then larger rho.
    """
    if not cells:
        raise ConfigurationError("no cells to select from")
    lo = kl_target * (1 - kl_tolerance)
    hi = kl_target * (1 + kl_tolerance)
    in_band = [c for c in cells if lo <= c.mean_kl <= hi]
    if in_band:
        return max(in_band, key=lambda c: (c.mean_child_acc, c.sigma, c.rho)), True
    return max(cells, key=lambda c: (-abs(c.mean_kl - kl_target), c.sigma, c.rho)), False


def grid_search(
    parent: Network, probe: Dataset, cfg: GridSearchConfig, master_seed: int
) -> GridSearchOutcome:
    """Sweep the grid and apply the selection rule; see select_cell."""
    probe = _cap_probe(probe, cfg.probe_size)
    cells = sweep_cells(
        parent, probe, cfg.sigma_grid, cfg.rho_grid, cfg.samples_per_cell, master_seed
    )
    best, flag = select_cell(cells, cfg.kl_target, cfg.kl_tolerance)
    report = DivergenceReport(
        mse=best.mean_mse,
        kl=best.mean_kl,
        probe_size=probe.n,
        child_accuracy=best.mean_child_acc,
    )
    return GridSearchOutcome(best.sigma, best.rho, report, flag, tuple(cells))


def kl_accuracy_curve(
    parent: Network,
    probe: Dataset,
    sigma_grid: tuple[float, ...],
    rho_grid: tuple[float, ...],
    master_seed: int,
    samples_per_cell: int = 4,
) -> list[CellResult]:
    """Full sweep table for ablation plots, sorted by (rho, sigma)."""
    cells = sweep_cells(parent, probe, tuple(sigma_grid), tuple(rho_grid), samples_per_cell, master_seed)
    return sorted(cells, key=lambda c: (c.rho, c.sigma))


def _cap_probe(probe: Dataset, probe_size: int) -> Dataset:
    if probe.n <= probe_size:
        return probe
    return Dataset(probe.inputs[:probe_size], probe.labels[:probe_size], probe.class_count)


def write_sweep_csv(cells: list[CellResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for c in cells:
            writer.writerow(
                [repr(c.sigma), repr(c.rho), repr(c.mean_kl), repr(c.mean_mse),
                 repr(c.mean_child_acc), c.n_children]
            )
