"""Command-line interface: featurize / train / predict / bench.

Configuration merges three layers, later winning: dataclass defaults, a
JSON config file (--config), then explicit flags. The resolved config is
echoed as JSON next to every output for provenance. When no angle cutoff
is specified it defaults to the square root of the edge cutoff; the
--paper-mode flag enforces that tie explicitly and refuses a conflicting
--angle-cutoff.

Exit codes: 0 success, 1 user/data error, 2 internal invariant failure.
Set DSGNN_LOG=debug|info|... for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

from .bench import BenchScenario, emit_report, run_sweep
from .crystal import parse_dataset_jsonl, parse_poscar
from .errors import (
    ConfigError,
    DivergedError,
    GenerationFailedError,
    InternalError,
    UserInputError,
)
from .featurize import featurize_graph, featurized_to_dict
from .graph import CutoffConfig, build_graph, graph_stats, graph_to_dict
from .model import ModelConfig, load_model, predict, save_model, train
from .nn import OptimConfig

logger = logging.getLogger("dsgnn")

_MODEL_KEYS = {
    "hidden_dim", "num_blocks", "n_rbf", "n_sbf", "angle_reduction",
    "edge_cutoff", "angle_cutoff", "max_neighbors", "use_angles", "seed",
}
_OPTIM_KEYS = {
    "learning_rate", "batch_size", "epochs", "warmup_fraction",
    "peak_multiplier", "beta1", "beta2", "eps", "seed",
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsgnn",
        description="Crystal property prediction with dual-scale cutoff graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    feat = sub.add_parser("featurize", help="build a graph and its basis features")
    feat.add_argument("--input", required=True, help="POSCAR structure file")
    feat.add_argument("--out", required=True, help="output JSON path")
    _add_geometry_flags(feat)
    feat.add_argument("--n-rbf", type=int, default=None)
    feat.add_argument("--n-sbf", type=int, default=None)

    tr = sub.add_parser("train", help="train a model on a JSON-lines dataset")
    tr.add_argument("--config", default=None, help="JSON config file")
    tr.add_argument("--data", required=True, help="training JSONL")
    tr.add_argument("--valid", default=None, help="validation JSONL")
    tr.add_argument("--test", default=None, help="test JSONL")
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.add_argument("--resume", default=None, help="checkpoint to continue from")
    _add_geometry_flags(tr)
    tr.add_argument("--n-rbf", type=int, default=None)
    tr.add_argument("--n-sbf", type=int, default=None)
    tr.add_argument("--hidden-dim", type=int, default=None)
    tr.add_argument("--blocks", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--lr", type=float, default=None)

    pr = sub.add_parser("predict", help="predict properties for structures")
    pr.add_argument("--model", required=True, help="checkpoint path")
    pr.add_argument("--input", required=True, nargs="+", help="POSCAR file(s)")
    pr.add_argument("--config", default=None,
                    help="expected config; refused if it mismatches the checkpoint")

    be = sub.add_parser("bench", help="dual- vs single-cutoff sweep")
    be.add_argument("--scenario", default=None, help="scenario JSON (defaults apply)")
    be.add_argument("--out", required=True, help="output directory")

    return parser


def _add_geometry_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edge-cutoff", type=float, default=None)
    p.add_argument("--angle-cutoff", type=float, default=None)
    p.add_argument("--paper-mode", action="store_true",
                   help="tie the angle cutoff to sqrt(edge cutoff)")
    p.add_argument("--no-angles", action="store_true",
                   help="drop angle features entirely")
    p.add_argument("--seed", type=int, default=None)


def _merge_config(args) -> dict:
    merged: dict = {}
    path = getattr(args, "config", None)
    if path:
        with open(path, "r", encoding="utf-8") as handle:
            loaded = json.load(handle)
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        unknown = set(loaded) - _MODEL_KEYS - _OPTIM_KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        merged.update(loaded)

    for key, attr in [
        ("edge_cutoff", "edge_cutoff"),
        ("angle_cutoff", "angle_cutoff"),
        ("seed", "seed"),
        ("hidden_dim", "hidden_dim"),
        ("num_blocks", "blocks"),
        ("n_rbf", "n_rbf"),
        ("n_sbf", "n_sbf"),
        ("epochs", "epochs"),
        ("batch_size", "batch_size"),
        ("learning_rate", "lr"),
    ]:
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    if getattr(args, "no_angles", False):
        merged["use_angles"] = False

    edge = float(merged.get("edge_cutoff", CutoffConfig().edge_cutoff))
    if getattr(args, "paper_mode", False):
        tied = math.sqrt(edge)
        explicit = merged.get("angle_cutoff")
        if explicit is not None and abs(explicit - tied) > 1e-9:
            raise ConfigError(
                f"--paper-mode requires angle_cutoff sqrt({edge:g}) = {tied:.6g}, "
                f"but {explicit:g} was given"
            )
        merged["angle_cutoff"] = tied
    elif "angle_cutoff" not in merged:
        merged["angle_cutoff"] = math.sqrt(edge)
    return merged


def _split_configs(merged: dict) -> tuple[ModelConfig, OptimConfig]:
    model = ModelConfig.from_dict({k: v for k, v in merged.items() if k in _MODEL_KEYS})
    optim_kwargs = {k: v for k, v in merged.items() if k in _OPTIM_KEYS}
    return model, OptimConfig(**optim_kwargs)


def _echo_config(path: Path, model: ModelConfig, optim: OptimConfig) -> None:
    doc = dict(model.to_dict())
    for key, value in vars(optim).items():
        if key != "seed":
            doc[key] = value
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_featurize(args) -> int:
    if not Path(args.input).exists():
        raise UserInputError(f"input file not found: {args.input}")
    merged = _merge_config(args)
    model_config, _ = _split_configs(merged)
    crystal = parse_poscar(Path(args.input).read_text(encoding="utf-8"))
    graph = build_graph(crystal, model_config.cutoffs,
                        include_angles=model_config.use_angles)
    feat = featurize_graph(graph, model_config.basis)
    doc = graph_to_dict(graph)
    doc["features"] = featurized_to_dict(feat)
    Path(args.out).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    stats = graph_stats(graph)
    print(f"N={stats['num_atoms']} M_avg={stats['m_avg']:.4g} "
          f"K_avg={stats['k_avg']:.4g} num_angles={stats['num_angles']}")
    return 0


def cmd_train(args) -> int:
    merged = _merge_config(args)
    model_config, optim_config = _split_configs(merged)

    state = None
    start_epoch = 0
    if args.resume:
        state, meta = load_model(args.resume)
        start_epoch = int(meta.get("epoch", 0))
        overridden = {k: v for k, v in merged.items()
                      if k in _MODEL_KEYS and state.config.to_dict().get(k) != v}
        if overridden:
            raise ConfigError(
                f"--resume model config conflicts with requested {sorted(overridden)}"
            )
        model_config = state.config
        if start_epoch >= optim_config.epochs:
            raise ConfigError(
                f"checkpoint already at epoch {start_epoch}; raise --epochs "
                f"beyond it to resume"
            )
        logger.info("resuming from %s at epoch %d", args.resume, start_epoch)

    dataset = parse_dataset_jsonl(args.data)
    valid = parse_dataset_jsonl(args.valid) if args.valid else None
    test = parse_dataset_jsonl(args.test) if args.test else None

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _echo_config(out.with_suffix(out.suffix + ".config.json"), model_config, optim_config)

    state, report = train(dataset, model_config, optim_config, valid=valid, test=test,
                          log=print, start_epoch=start_epoch, state=state)

    save_model(state, out, epoch=report.epochs_run)
    report_path = out.with_suffix(out.suffix + ".report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    csv_path = out.with_suffix(out.suffix + ".report.csv")
    rows = report.csv_rows()
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    from . import reporting

    reporting.save_training_curve(report, out.with_suffix(out.suffix + ".curve.png"))
    print(f"checkpoint: {out}  best_epoch={report.best_epoch} "
          f"train_mae={report.train_mae[-1]:.6f}")
    return 0


def cmd_predict(args) -> int:
    state, meta = load_model(args.model)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            expected = ModelConfig.from_dict(json.load(handle))
        if expected.hash() != meta.get("config_hash"):
            raise ConfigError(
                f"checkpoint {args.model} was trained with a different config "
                f"(e.g. hidden_dim={state.config.hidden_dim}); "
                f"hash {meta.get('config_hash')} != expected {expected.hash()}"
            )
    for path in args.input:
        if not Path(path).exists():
            raise UserInputError(f"input file not found: {path}")
        crystal = parse_poscar(Path(path).read_text(encoding="utf-8"))
        value = predict(crystal, state)
        name = crystal.id or Path(path).stem
        print(f"{name}\t{value:.10g}")
    return 0


def cmd_bench(args) -> int:
    if args.scenario:
        with open(args.scenario, "r", encoding="utf-8") as handle:
            scenario = BenchScenario.from_dict(json.load(handle))
    else:
        scenario = BenchScenario()
    records = run_sweep(scenario, log=logger.info)
    summary = emit_report(records, args.out, scenario)
    top = summary["at_edge_cutoff"]
    print(f"records: {len(records)} -> {args.out}/records.csv")
    print(f"angle ratio single/dual at C_e={top['edge_cutoff']:g}: "
          f"{top['angle_ratio_single_over_dual']:.2f}")
    print(f"median inference ms dual={top['median_inference_ms']['dual']:.3f} "
          f"single={top['median_inference_ms']['single']:.3f}")
    growth = summary["angle_growth"]
    fmt = lambda e: "n/a" if e is None else f"{e:.3f}"
    print(f"angle growth exponents: dual={fmt(growth['dual']['exponent'])} "
          f"single={fmt(growth['single']['exponent'])}")
    return 0


_COMMANDS = {
    "featurize": cmd_featurize,
    "train": cmd_train,
    "predict": cmd_predict,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    level = os.environ.get("DSGNN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UserInputError, DivergedError, GenerationFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
