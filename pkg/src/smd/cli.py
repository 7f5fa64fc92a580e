"""Command-line harness: train, search, evolve, boundary, ablate.

Every command is a pure function of its JSON config (all seeds included),
so reruns produce byte-identical artifacts. Exit codes: 0 success,
2 configuration error, 3 training divergence, 4 search found no in-band
cell, 5 validation/test overlap, 6 task/command mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as cfgmod
from .boundary import export_boundary_cells
from .checkpoint import load_checkpoint, save_checkpoint
from .divergence import grid_search, write_sweep_csv
from .errors import (
    CheckpointError,
    ConfigurationError,
    DataHygieneError,
    ParseError,
    TaskMismatchError,
    TrainingDivergenceError,
)
from .evolution import (
    datasets_disjoint,
    run_ablation,
    run_generation,
    write_ablation_csv,
    write_eval_csv,
)
from .metrics import accuracy
from .mutation import MutationParams, derive_seed, mask_to_rle, sample_mask
from .network import Network, forward, init_network, softmax
from .training import train_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_OUT_OF_BAND = 4
EXIT_HYGIENE = 5
EXIT_TASK_MISMATCH = 6

# Spawn-key namespace for --repeats reruns.
_REPEAT_NS = 5


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def cmd_train(cfg: dict, out_dir: Path, args: argparse.Namespace) -> int:
    train, val, _ = cfgmod.build_task_data(cfg)
    model = cfgmod.build_model_section(cfg)
    if "checkpoint" in model:
        raise ConfigurationError("train command needs a 'train' model section, not a checkpoint")
    spec = cfgmod.build_network_spec(model)
    train_cfg = cfgmod.build_train_config(model)

    net = init_network(spec)
    history: list[dict] = []
    trained = train_model(net, train, train_cfg, history)
    val_acc = accuracy(softmax(forward(trained, val.inputs)), val.labels)

    ckpt_path = out_dir / "model.ckpt"
    save_checkpoint(trained, ckpt_path)
    with (out_dir / "training_log.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,train_acc\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['loss']!r},{row['accuracy']!r}\n")
    _write_json(
        out_dir / "train_summary.json",
        {
            "checkpoint": ckpt_path.name,
            "epochs": train_cfg.epochs,
            "final_train_loss": history[-1]["loss"] if history else None,
            "final_train_accuracy": history[-1]["accuracy"] if history else None,
            "val_accuracy": val_acc,
        },
    )
    print(f"checkpoint {ckpt_path} | val accuracy {val_acc:.4f}")
    return EXIT_OK


def _load_parent(cfg: dict) -> Network:
    model = cfgmod.build_model_section(cfg)
    if "checkpoint" not in model:
        raise ConfigurationError("this command needs model.checkpoint pointing at a trained model")
    path = Path(model["checkpoint"])
    if not path.is_file():
        raise ConfigurationError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


def cmd_search(cfg: dict, out_dir: Path, args: argparse.Namespace) -> int:
    _, val, _ = cfgmod.build_task_data(cfg)
    parent = _load_parent(cfg)
    if cfgmod.mutation_mode(cfg) != "search":
        raise ConfigurationError("search command needs a mutation 'search' directive")
    search_cfg, seed = cfgmod.build_search_config(cfg)

    outcome = grid_search(parent, val, search_cfg, seed)
    _write_json(
        out_dir / "search_result.json",
        {
            "sigma": outcome.sigma,
            "rho": outcome.rho,
            "mean_kl": outcome.report.kl,
            "mean_mse": outcome.report.mse,
            "child_accuracy": outcome.report.child_accuracy,
            "probe_size": outcome.report.probe_size,
            "in_band": outcome.in_band,
            "kl_target": search_cfg.kl_target,
            "kl_tolerance": search_cfg.kl_tolerance,
            "seed": seed,
        },
    )
    rows = sorted(outcome.cells, key=lambda c: (c.rho, c.sigma))
    write_sweep_csv(rows, out_dir / "sweep.csv")
    print(
        f"sigma {outcome.sigma:g} | rho {outcome.rho:g} | mean KL {outcome.report.kl:.4f}"
        f" | in_band {outcome.in_band}"
    )
    return EXIT_OK if outcome.in_band else EXIT_OUT_OF_BAND


def _resolve_mutation(cfg: dict, parent, val) -> MutationParams:
    mode = cfgmod.mutation_mode(cfg)
    if mode == "explicit":
        return cfgmod.build_mutation_params(cfg)
    if mode == "search_result":
        mutation = cfg["mutation"]
        path = Path(mutation["search_result"])
        if not path.is_file():
            raise ConfigurationError(f"search result not found: {path}")
        try:
            found = json.loads(path.read_text(encoding="utf-8"))
            return MutationParams(sigma=float(found["sigma"]), rho=float(found["rho"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ConfigurationError(f"{path}: not a search result artifact ({exc})") from exc
    search_cfg, seed = cfgmod.build_search_config(cfg)
    outcome = grid_search(parent, val, search_cfg, seed)
    return MutationParams(sigma=outcome.sigma, rho=outcome.rho)


def cmd_evolve(cfg: dict, out_dir: Path, args: argparse.Namespace) -> int:
    _, val, test = cfgmod.build_task_data(cfg)
    if not datasets_disjoint(val, test):
        raise DataHygieneError("validation and test sets share samples")
    parent = _load_parent(cfg)
    mutation = _resolve_mutation(cfg, parent, val)
    gen_cfg, master_seed = cfgmod.build_generation_config(cfg, mutation)

    repeats = max(1, args.repeats)
    reports = []
    for r in range(repeats):
        seed_r = master_seed if repeats == 1 else derive_seed(master_seed, _REPEAT_NS, r)
        reports.append(run_generation(parent, gen_cfg, val, test, seed_r, args.workers))
    # Best-of-R selection peeks only at validation-side accuracy.
    best_idx = max(range(repeats), key=lambda r: (reports[r].ensemble_val_accuracy, -r))
    best = reports[best_idx]

    payload = best.to_json_dict()
    if repeats > 1:
        payload["repeats"] = [
            {"seed": rep.seed, "ensemble_val_accuracy": rep.ensemble_val_accuracy}
            for rep in reports
        ]
        payload["best_repeat"] = best_idx
    _write_json(out_dir / "eval_report.json", payload)
    write_eval_csv([best], out_dir / "eval_report.csv")

    if args.dump_masks:
        w = parent.params.w
        lines = [
            f"{c['index']} group={c['group']} role={c['role']} "
            + mask_to_rle(sample_mask(w, mutation.rho, c["mask_seed"]))
            for c in best.per_child
        ]
        (out_dir / "masks.rle.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    print(best.summary_line())
    return EXIT_OK


def cmd_boundary(cfg: dict, out_dir: Path, args: argparse.Namespace) -> int:
    train, _, _ = cfgmod.build_task_data(cfg)
    parent = _load_parent(cfg)
    if parent.spec.input_dim != 2:
        raise TaskMismatchError(
            f"boundary command needs a 2-D input task, model takes {parent.spec.input_dim}"
        )
    section = cfgmod.boundary_section(cfg)
    written = export_boundary_cells(
        parent,
        train,
        [float(s) for s in section["sigma_grid"]],
        [float(r) for r in section["rho_grid"]],
        out_dir,
        master_seed=int(section.get("seed", 0)),
        resolution=int(section.get("resolution", 200)),
    )
    print(f"wrote {len(written)} boundary files to {out_dir}")
    return EXIT_OK


def cmd_ablate(cfg: dict, out_dir: Path, args: argparse.Namespace) -> int:
    _, val, test = cfgmod.build_task_data(cfg)
    if not datasets_disjoint(val, test):
        raise DataHygieneError("validation and test sets share samples")
    parent = _load_parent(cfg)
    section = cfgmod.ablation_section(cfg)
    rows = run_ablation(
        parent,
        [float(s) for s in section["sigma_grid"]],
        [float(r) for r in section["rho_grid"]],
        list(section.get("modes", ["dynamic"])),
        val,
        test,
        [int(s) for s in section["seeds"]],
        pop_size=int(section.get("pop_size", 16)),
        top_k=int(section.get("top_k", 4)),
        workers=args.workers,
    )
    write_ablation_csv(rows, out_dir / "ablation.csv")
    print(f"wrote {len(rows)} ablation rows to {out_dir / 'ablation.csv'}")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "search": cmd_search,
    "evolve": cmd_evolve,
    "boundary": cmd_boundary,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smd", description="Evolutionary fine-tuning with sparse masked mutations"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--workers", type=int, default=1, help="worker pool size")
        p.add_argument("--repeats", type=int, default=1, help="best-of-R evolve runs")
        p.add_argument("--out", default=None, help="output directory (SMD_OUT overrides)")
        p.add_argument(
            "--dump-masks", action="store_true", help="write per-child masks as RLE text"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        out_dir = cfgmod.resolve_out_dir(cfg, args.out)
        return _COMMANDS[args.command](cfg, out_dir, args)
    except (ConfigurationError, ParseError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except DataHygieneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYGIENE
    except TaskMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TASK_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
