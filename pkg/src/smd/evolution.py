"""One-or-more-generation evolutionary loop: spawn a mutated population,
score fitness on validation data, select top-k, and combine the winners by
weight averaging and softmax ensembling.

Model selection touches only the validation set; the test set is read
exactly once, when the final report metrics are computed.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .errors import ConfigurationError, ShapeError, StateError
from .metrics import MetricTriple, metric_triple
from .mutation import Child, MutationParams, derive_seed, spawn_mutations
from .network import Network, ParamVector, forward, nll_loss, softmax
from .divergence import kl_from_logits

COMBINE_MODES = ("ensemble", "weight_average", "both")

# Spawn-key namespace separating per-generation randomness.
_GENERATION_NS = 3

EVAL_CSV_COLUMNS = (
    "sigma", "rho", "subspace_mode", "mirrored", "anti_random",
    "pop_size", "top_k", "generations", "seed",
    "parent_acc", "parent_nll", "parent_ece",
    "avg_acc", "avg_nll", "avg_ece",
    "ens_acc", "ens_nll", "ens_ece",
    "delta_acc", "mean_kl_children", "mean_kl_selected",
)

ABLATION_CSV_COLUMNS = ("sigma", "rho", "mode", "seed", "mean_kl", "avg_acc", "ens_acc")


@dataclass
class GenerationConfig:
    mutation: MutationParams
    pop_size: int = 16
    top_k: int = 8
    combine: str = "both"
    generations: int = 1

    def __post_init__(self):
        if self.pop_size < 1:
            raise ConfigurationError("pop_size must be positive")
        if not 1 <= self.top_k <= self.pop_size:
            raise ConfigurationError(
                f"top_k must lie in [1, pop_size], got {self.top_k} with pop {self.pop_size}"
            )
        if self.combine not in COMBINE_MODES:
            raise ConfigurationError(f"combine must be one of {COMBINE_MODES}")
        if self.generations < 1:
            raise ConfigurationError("generations must be >= 1")


@dataclass
class Population:
    parent: Network
    children: list[Child]
    fitness: np.ndarray | None = None
    val_nll: np.ndarray | None = None


@dataclass
class EvalReport:
    parent_metrics: MetricTriple
    averaged_metrics: MetricTriple
    ensemble_metrics: MetricTriple
    per_child: list[dict]
    selected_indices: list[int]
    mean_kl_children: float
    mean_kl_selected: float
    ensemble_val_accuracy: float
    config: dict
    seed: int

    @property
    def delta_acc(self) -> float:
        return self.ensemble_metrics.accuracy - self.parent_metrics.accuracy

    def to_json_dict(self) -> dict:
        return {
            "parent": self.parent_metrics.as_dict(),
            "averaged": self.averaged_metrics.as_dict(),
            "ensemble": self.ensemble_metrics.as_dict(),
            "per_child": self.per_child,
            "selected": self.selected_indices,
            "delta_acc": self.delta_acc,
            "mean_kl_children": self.mean_kl_children,
            "mean_kl_selected": self.mean_kl_selected,
            "ensemble_val_accuracy": self.ensemble_val_accuracy,
            "config": self.config,
            "seed": self.seed,
        }

    def to_csv_row(self) -> list:
        mut = self.config["mutation"]
        return [
            mut["sigma"], mut["rho"], mut["subspace_mode"], mut["mirrored"],
            mut["anti_random"], self.config["pop_size"], self.config["top_k"],
            self.config["generations"], self.seed,
            self.parent_metrics.accuracy, self.parent_metrics.nll, self.parent_metrics.ece,
            self.averaged_metrics.accuracy, self.averaged_metrics.nll, self.averaged_metrics.ece,
            self.ensemble_metrics.accuracy, self.ensemble_metrics.nll, self.ensemble_metrics.ece,
            self.delta_acc, self.mean_kl_children, self.mean_kl_selected,
        ]

    def summary_line(self) -> str:
        """One line shaped like the standard report table column order."""
        mut = self.config["mutation"]
        return (
            f"Acc {100 * self.parent_metrics.accuracy:.2f} | "
            f"NLL {self.parent_metrics.nll:.4f} | "
            f"ECE {self.parent_metrics.ece:.4f} | "
            f"eAcc {100 * self.ensemble_metrics.accuracy:.2f} | "
            f"eNLL {self.ensemble_metrics.nll:.4f} | "
            f"eECE {self.ensemble_metrics.ece:.4f} | "
            f"dAcc {100 * self.delta_acc:+.2f} | "
            f"sigma {mut['sigma']:g} | rho {mut['rho']:g} | "
            f"KL {self.mean_kl_children:.4f}"
        )


def spawn_population(
    parent: Network, params: MutationParams, pop_size: int, master_seed: int
) -> Population:
    return Population(parent, spawn_mutations(parent.params, params, pop_size, master_seed))


def evaluate_fitness(pop: Population, val: Dataset, workers: int = 1) -> np.ndarray:
    """Validation accuracy per child (the parent is never scored).

    Also records per-child validation NLL for selection tie-breaks. With
    workers > 1 children are scored on a thread pool; each child's
    computation is self-contained, so results match the serial run.
    """
    if val.n < 1:
        raise ConfigurationError("validation set is empty")

    def score(i: int) -> tuple[float, float]:
        probs = softmax(forward(Network(pop.parent.spec, pop.children[i].params), val.inputs))
        correct = float((probs.argmax(axis=1) == val.labels).mean())
        return correct, nll_loss(probs, val.labels)

    indices = range(len(pop.children))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(score, indices))
    else:
        scored = [score(i) for i in indices]

    pop.fitness = np.array([s[0] for s in scored])
    pop.val_nll = np.array([s[1] for s in scored])
    return pop.fitness


def select_top_k(pop: Population, k: int) -> list[int]:
    """Indices of the k fittest children.

    Ties break by lower validation NLL, then by lower child index, so the
    selection is deterministic.
    """
    if pop.fitness is None:
        raise StateError("fitness has not been evaluated")
    n = len(pop.children)
    if not 1 <= k <= n:
        raise ConfigurationError(f"k must lie in [1, {n}], got {k}")
    nll = pop.val_nll if pop.val_nll is not None else np.zeros(n)
    order = sorted(range(n), key=lambda i: (-pop.fitness[i], nll[i], i))
    return order[:k]


def average_weights(candidates: list[ParamVector]) -> ParamVector:
    """Coordinatewise arithmetic mean of the candidate genomes."""
    if not candidates:
        raise ConfigurationError("cannot average an empty candidate list")
    lengths = {c.w for c in candidates}
    if len(lengths) != 1:
        raise ShapeError(f"candidate genomes disagree in length: {sorted(lengths)}")
    return ParamVector(np.mean(np.stack([c.values for c in candidates]), axis=0))


def ensemble_predict(candidates: list[Network], inputs: np.ndarray) -> np.ndarray:
    """Unweighted mean of member softmax outputs."""
    if not candidates:
        raise ConfigurationError("cannot ensemble an empty member list")
    spec = candidates[0].spec
    for net in candidates[1:]:
        if net.spec.layer_sizes != spec.layer_sizes or (
            net.spec.hidden_activation != spec.hidden_activation
        ):
            raise ShapeError("ensemble members must share one architecture")
    probs = [softmax(forward(net, inputs)) for net in candidates]
    return np.mean(np.stack(probs), axis=0)


def run_generation(
    parent: Network,
    cfg: GenerationConfig,
    val: Dataset,
    test: Dataset,
    master_seed: int,
    workers: int = 1,
) -> EvalReport:
    """Spawn, score, select, combine; report metrics on the test set.

    With generations > 1 the averaged model becomes the next parent; the
    report describes the final generation (its parent is the chained
    model). Per-child KL to the parent is probed on the validation set.
    """
    current = parent
    for gen in range(cfg.generations):
        gen_seed = derive_seed(master_seed, _GENERATION_NS, gen)
        pop = spawn_population(current, cfg.mutation, cfg.pop_size, gen_seed)
        evaluate_fitness(pop, val, workers)
        selected = select_top_k(pop, cfg.top_k)
        averaged = average_weights([pop.children[i].params for i in selected])
        if gen < cfg.generations - 1:
            current = Network(current.spec, averaged)

    parent_val_logits = forward(current, val.inputs)
    per_child = []
    child_kls = []
    for i, child in enumerate(pop.children):
        child_logits = forward(Network(current.spec, child.params), val.inputs)
        kl = kl_from_logits(parent_val_logits, child_logits)
        child_kls.append(kl)
        per_child.append(
            {
                "index": i,
                "group": child.group,
                "role": child.role,
                "seed": child.seed,
                "mask_seed": child.mask_seed,
                "fitness": float(pop.fitness[i]),
                "val_nll": float(pop.val_nll[i]),
                "kl_to_parent": kl,
            }
        )

    member_nets = [Network(current.spec, pop.children[i].params) for i in selected]
    ensemble_val_acc = float(
        (ensemble_predict(member_nets, val.inputs).argmax(axis=1) == val.labels).mean()
    )

    # Test data is read from here on only.
    parent_metrics = metric_triple(softmax(forward(current, test.inputs)), test.labels)
    averaged_metrics = metric_triple(
        softmax(forward(Network(current.spec, averaged), test.inputs)), test.labels
    )
    ensemble_metrics = metric_triple(ensemble_predict(member_nets, test.inputs), test.labels)

    config_echo = {
        "pop_size": cfg.pop_size,
        "top_k": cfg.top_k,
        "combine": cfg.combine,
        "generations": cfg.generations,
        "mutation": asdict(cfg.mutation),
    }
    return EvalReport(
        parent_metrics=parent_metrics,
        averaged_metrics=averaged_metrics,
        ensemble_metrics=ensemble_metrics,
        per_child=per_child,
        selected_indices=list(selected),
        mean_kl_children=float(np.mean(child_kls)),
        mean_kl_selected=float(np.mean([child_kls[i] for i in selected])),
        ensemble_val_accuracy=ensemble_val_acc,
        config=config_echo,
        seed=master_seed,
    )


def run_ablation(
    parent: Network,
    sigma_grid: list[float],
    rho_grid: list[float],
    modes: list[str],
    val: Dataset,
    test: Dataset,
    seeds: list[int],
    pop_size: int = 16,
    top_k: int = 4,
    workers: int = 1,
) -> list[dict]:
    """Full factorial sweep over (sigma, rho, subspace mode, seed).

    Each sweep point runs one generation; rows carry both the averaged
    model's and the ensemble's test accuracy plus the mean child KL.
    """
    if not sigma_grid or not rho_grid or not modes or not seeds:
        raise ConfigurationError("ablation grids, modes, and seeds must be nonempty")
    rows = []
    for sigma in sigma_grid:
        for rho in rho_grid:
            for mode in modes:
                for seed in seeds:
                    cfg = GenerationConfig(
                        mutation=MutationParams(sigma=sigma, rho=rho, subspace_mode=mode),
                        pop_size=pop_size,
                        top_k=top_k,
                        combine="both",
                        generations=1,
                    )
                    report = run_generation(parent, cfg, val, test, seed, workers)
                    rows.append(
                        {
                            "sigma": sigma,
                            "rho": rho,
                            "mode": mode,
                            "seed": seed,
                            "mean_kl": report.mean_kl_children,
                            "avg_acc": report.averaged_metrics.accuracy,
                            "ens_acc": report.ensemble_metrics.accuracy,
                        }
                    )
    return rows


def datasets_disjoint(a: Dataset, b: Dataset) -> bool:
    """True when no sample row of `a` appears in `b` (exact float match)."""
    rows_a = {row.tobytes() for row in a.inputs}
    return all(row.tobytes() not in rows_a for row in b.inputs)


def write_eval_csv(reports: list[EvalReport], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVAL_CSV_COLUMNS)
        for report in reports:
            writer.writerow([_csv_cell(v) for v in report.to_csv_row()])


def write_ablation_csv(rows: list[dict], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ABLATION_CSV_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in ABLATION_CSV_COLUMNS])


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
