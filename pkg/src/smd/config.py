"""JSON run-configuration parsing for the command-line harness.

All randomness is seeded from config fields; nothing reads system entropy.
Section schemas are strict: unknown keys are configuration errors so typos
fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .datasets import Dataset, SplitSpec, load_csv, make_spirals, split
from .divergence import GridSearchConfig
from .errors import ConfigurationError
from .evolution import GenerationConfig
from .mutation import MutationParams
from .network import NetworkSpec
from .training import TrainConfig

_TASK_KEYS = {
    "dataset", "n_train", "n_eval", "noise_std", "turns",
    "train_seed", "eval_seed", "split_seed", "eval_fractions",
    "train_csv", "eval_csv", "val_csv", "test_csv",
}
_MODEL_KEYS = {"layer_sizes", "hidden_activation", "seed", "train", "checkpoint"}
_MUTATION_KEYS = {
    "sigma", "rho", "mu", "subspace_mode", "mirrored", "anti_random",
    "search", "search_result",
}
_SEARCH_KEYS = {
    "sigma_grid", "rho_grid", "kl_target", "kl_tolerance",
    "samples_per_cell", "probe_size", "seed",
}
_EVOLUTION_KEYS = {"pop_size", "top_k", "combine", "generations", "master_seed"}
_BOUNDARY_KEYS = {"sigma_grid", "rho_grid", "resolution", "seed"}
_ABLATION_KEYS = {"sigma_grid", "rho_grid", "modes", "seeds", "pop_size", "top_k"}
_OUTPUT_KEYS = {"dir", "formats"}


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    return cfg


def _section(cfg: dict, name: str, allowed: set[str], required: bool = True) -> dict:
    section = cfg.get(name)
    if section is None:
        if required:
            raise ConfigurationError(f"config is missing the '{name}' section")
        return {}
    if not isinstance(section, dict):
        raise ConfigurationError(f"'{name}' section must be an object")
    unknown = set(section) - allowed - {"_comment"}
    if unknown:
        raise ConfigurationError(f"'{name}' section has unknown keys: {sorted(unknown)}")
    return section


def build_task_data(cfg: dict) -> tuple[Dataset, Dataset, Dataset]:
    """Materialize (train, validation, test) datasets from the task section."""
    task = _section(cfg, "task", _TASK_KEYS)
    kind = task.get("dataset", "spirals")
    if kind == "spirals":
        train = make_spirals(
            n=int(task.get("n_train", 2500)),
            noise_std=float(task.get("noise_std", 0.05)),
            turns=float(task.get("turns", 1.75)),
            seed=int(task.get("train_seed", 1)),
        )
        eval_pool = make_spirals(
            n=int(task.get("n_eval", 1000)),
            noise_std=float(task.get("noise_std", 0.05)),
            turns=float(task.get("turns", 1.75)),
            seed=int(task.get("eval_seed", 2)),
        )
        fractions = tuple(task.get("eval_fractions", (0.5, 0.5)))
        if len(fractions) != 2:
            raise ConfigurationError("eval_fractions must have exactly two entries")
        val, test = split(eval_pool, SplitSpec(fractions, int(task.get("split_seed", 3))))
        return train, val, test
    if kind == "csv":
        if "train_csv" not in task:
            raise ConfigurationError("csv task needs 'train_csv'")
        train = load_csv(task["train_csv"])
        if "val_csv" in task or "test_csv" in task:
            if not ("val_csv" in task and "test_csv" in task):
                raise ConfigurationError("csv task needs both 'val_csv' and 'test_csv'")
            val = load_csv(task["val_csv"], class_count=train.class_count)
            test = load_csv(task["test_csv"], class_count=train.class_count)
            return train, val, test
        if "eval_csv" not in task:
            raise ConfigurationError("csv task needs 'eval_csv' or val_csv/test_csv")
        eval_pool = load_csv(task["eval_csv"], class_count=train.class_count)
        fractions = tuple(task.get("eval_fractions", (0.5, 0.5)))
        val, test = split(eval_pool, SplitSpec(fractions, int(task.get("split_seed", 3))))
        return train, val, test
    raise ConfigurationError(f"unknown dataset kind {kind!r}")


def build_model_section(cfg: dict) -> dict:
    model = _section(cfg, "model", _MODEL_KEYS)
    has_train = "train" in model
    has_ckpt = "checkpoint" in model
    if has_train == has_ckpt:
        raise ConfigurationError("model section needs exactly one of 'train' or 'checkpoint'")
    return model


def build_network_spec(model: dict) -> NetworkSpec:
    if "layer_sizes" not in model:
        raise ConfigurationError("model section needs 'layer_sizes' to train from scratch")
    return NetworkSpec(
        layer_sizes=tuple(model["layer_sizes"]),
        hidden_activation=model.get("hidden_activation", "relu"),
        seed=int(model.get("seed", 0)),
    )


def build_train_config(model: dict) -> TrainConfig:
    train = model.get("train")
    if not isinstance(train, dict):
        raise ConfigurationError("model 'train' must be an object")
    try:
        return TrainConfig(**train)
    except TypeError as exc:
        raise ConfigurationError(f"bad train config: {exc}") from exc


def mutation_mode(cfg: dict) -> str:
    """Which of the three mutation forms the config uses."""
    mutation = _section(cfg, "mutation", _MUTATION_KEYS)
    forms = [
        "explicit" if "sigma" in mutation or "rho" in mutation else None,
        "search" if "search" in mutation else None,
        "search_result" if "search_result" in mutation else None,
    ]
    present = [f for f in forms if f]
    if len(present) != 1:
        raise ConfigurationError(
            "mutation section needs exactly one of explicit (sigma, rho), "
            "'search', or 'search_result'"
        )
    return present[0]


def build_mutation_params(cfg: dict) -> MutationParams:
    mutation = _section(cfg, "mutation", _MUTATION_KEYS)
    if "sigma" not in mutation or "rho" not in mutation:
        raise ConfigurationError("explicit mutation needs both 'sigma' and 'rho'")
    return MutationParams(
        sigma=float(mutation["sigma"]),
        rho=float(mutation["rho"]),
        mu=float(mutation.get("mu", 0.0)),
        subspace_mode=mutation.get("subspace_mode", "dynamic"),
        mirrored=bool(mutation.get("mirrored", True)),
        anti_random=bool(mutation.get("anti_random", False)),
    )


def build_search_config(cfg: dict) -> tuple[GridSearchConfig, int]:
    mutation = _section(cfg, "mutation", _MUTATION_KEYS)
    search = mutation.get("search")
    if not isinstance(search, dict):
        raise ConfigurationError("mutation 'search' must be an object")
    unknown = set(search) - _SEARCH_KEYS
    if unknown:
        raise ConfigurationError(f"search directive has unknown keys: {sorted(unknown)}")
    if "sigma_grid" not in search or "rho_grid" not in search:
        raise ConfigurationError("search directive needs 'sigma_grid' and 'rho_grid'")
    seed = int(search.get("seed", 0))
    kwargs = {k: v for k, v in search.items() if k != "seed"}
    return GridSearchConfig(**kwargs), seed


def build_generation_config(cfg: dict, mutation: MutationParams) -> tuple[GenerationConfig, int]:
    evolution = _section(cfg, "evolution", _EVOLUTION_KEYS)
    gen_cfg = GenerationConfig(
        mutation=mutation,
        pop_size=int(evolution.get("pop_size", 16)),
        top_k=int(evolution.get("top_k", 8)),
        combine=evolution.get("combine", "both"),
        generations=int(evolution.get("generations", 1)),
    )
    return gen_cfg, int(evolution.get("master_seed", 0))


def boundary_section(cfg: dict) -> dict:
    section = _section(cfg, "boundary", _BOUNDARY_KEYS)
    if "sigma_grid" not in section or "rho_grid" not in section:
        raise ConfigurationError("boundary section needs 'sigma_grid' and 'rho_grid'")
    return section


def ablation_section(cfg: dict) -> dict:
    section = _section(cfg, "ablation", _ABLATION_KEYS)
    for key in ("sigma_grid", "rho_grid", "seeds"):
        if key not in section:
            raise ConfigurationError(f"ablation section needs '{key}'")
    modes = section.get("modes", ["dynamic"])
    if any(m not in ("static", "dynamic") for m in modes):
        raise ConfigurationError(f"ablation modes must be static/dynamic, got {modes}")
    return section


def resolve_out_dir(cfg: dict, cli_out: str | None) -> Path:
    """Output directory priority: SMD_OUT env, then --out, then config."""
    output = _section(cfg, "output", _OUTPUT_KEYS, required=False)
    env = os.environ.get("SMD_OUT")
    chosen = env or cli_out or output.get("dir", "out")
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path
