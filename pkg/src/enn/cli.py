"""Command-line entry point: ``enn <command> ...``.

Failures exit nonzero with a one-line JSON error on stderr:
2 for usage and configuration errors, 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import DATASETS, ConfigError, ExperimentConfig, load_config, parse_config
from .datasets import (gen_bdt_tables, gen_logic, gen_orientation, gen_rectangles, gen_tsp_maps, load_mnist,
                       save_dataset, tsp_train, bdt_train)
from .experiments import (CONFIG_FILE, EVALUATORS, ExperimentError, run_attack, run_eval, run_report, run_scaling,
                          run_train, write_manifest)
from .model import ModelFormatError
from .presets import PRESETS


class UsageError(Exception):
    pass


def _fail(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)
    return code


def _config(args, model_path: str | None = None) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif model_path and (Path(model_path).parent / CONFIG_FILE).is_file():
        p = Path(model_path).parent / CONFIG_FILE
        cfg = parse_config(p.read_text(), str(p))
    else:
        raise UsageError("no --config given and no experiment.cfg next to the model")
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed, n = args.seed, args.n
    files = []
    if args.name == "rectangles":
        train, test = gen_rectangles(n or 50_000, args.n_test or 10_000, seed)
        files += [*_saved(train, out, "train"), *_saved(test, out, "test")]
    elif args.name == "orientation":
        sets = gen_orientation(seed)
        for name in ("train", "lines", "diagonals", "boxes"):
            files += _saved(getattr(sets, name), out, name)
        np.save(out / "shapes.npy", sets.shapes)
        files.append(out / "shapes.npy")
    elif args.name == "logic":
        files += _saved(gen_logic(), out, "train")
    elif args.name == "tsp":
        files += _saved(tsp_train(), out, "train")
        np.save(out / "maps.npy", np.stack([m.coords for m in gen_tsp_maps(n or 5000, seed)]))
        files.append(out / "maps.npy")
    elif args.name == "bdt":
        files += _saved(bdt_train(), out, "train")
        np.save(out / "tables.npy", np.stack([t.labels for t in gen_bdt_tables(n or 5000, seed)]))
        files.append(out / "tables.npy")
    elif args.name == "mnist":
        train, test = load_mnist()
        files += [*_saved(train, out, "train"), *_saved(test, out, "test")]
    write_manifest(out, "gen-data", seed, None, files, {"dataset": args.name})
    print(json.dumps({"dataset": args.name, "files": len(files)}))
    return 0


def _saved(ds, out: Path, name: str):
    manifest = save_dataset(ds, out, name)
    return [out / f"{name}.X.npy", out / f"{name}.y.npy", manifest]


def cmd_train(args) -> int:
    cfg = _config(args)
    report = run_train(cfg, args.out, args.jobs)
    print(json.dumps({"experiment": cfg.name, "seed": cfg.seed, "errors": report["errors"]}, sort_keys=True))
    return 0


def _evaluations(values, cfg: ExperimentConfig):
    names = []
    for v in values or cfg.evaluations:
        names += [p for p in v.replace(",", " ").split() if p]
    for n in names:
        if n not in EVALUATORS:
            raise UsageError(f"unknown evaluation {n!r}; valid evaluations: {', '.join(EVALUATORS)}")
    if not names:
        raise UsageError("no evaluation requested")
    return names


def cmd_eval(args) -> int:
    cfg = _config(args, args.model)
    report = run_eval(args.model, cfg, _evaluations(args.evaluation, cfg), args.out, args.seed)
    print(json.dumps(report["evaluations"], sort_keys=True, default=str))
    return 0


def cmd_lesion(args) -> int:
    cfg = _config(args, args.model)
    if args.layer is not None:
        from .config import set_value

        cfg = parse_config(set_value(cfg.text, "evaluation", "lesion_layer", args.layer))
    report = run_eval(args.model, cfg, ["lesion"], args.out, args.seed)
    print(json.dumps(report["evaluations"]["lesion"], sort_keys=True))
    return 0


def cmd_attack(args) -> int:
    models = {}
    for i, spec in enumerate(args.model):
        name, _, path = spec.rpartition("=")
        models[name or f"m{i}"] = path
    cfg = _config(args, next(iter(models.values())))
    summary = run_attack(models, cfg, args.out, args.seed)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    report = run_report(args.dir)
    print(json.dumps({"runs": len(report["runs"])}))
    return 0


def cmd_scaling(args) -> int:
    cfg = _config(args)
    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else None
    summary = run_scaling(cfg, args.out, sizes, args.repeats, args.jobs, args.gdn)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_presets(args) -> int:
    if args.write:
        out = Path(args.write)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(PRESETS.items()):
            (out / f"{name}.cfg").write_text(text)
    for name in sorted(PRESETS):
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="enn", description="Essence neural network experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, out=True, jobs=False):
        if config:
            sp.add_argument("--config", help="config file or preset name")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        if jobs:
            sp.add_argument("--jobs", type=int, default=1, help="worker cap")

    g = sub.add_parser("gen-data", help="generate and save a dataset")
    g.add_argument("name", choices=DATASETS)
    g.add_argument("--n", type=int, help="training images, TSP maps or BDT tables")
    g.add_argument("--n-test", type=int, help="test images (rectangles)")
    common(g, config=False)
    g.set_defaults(func=cmd_gen_data, seed=0)

    t = sub.add_parser("train", help="train a model from a config")
    common(t, jobs=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved model")
    e.add_argument("--model", required=True)
    e.add_argument("--evaluation", action="append", help=f"one of {', '.join(EVALUATORS)}; repeatable")
    common(e)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("attack", help="FGSM self and transfer attacks between models")
    a.add_argument("--model", action="append", required=True, help="NAME=PATH; repeatable")
    common(a)
    a.set_defaults(func=cmd_attack)

    le = sub.add_parser("lesion", help="sequential lesion study")
    le.add_argument("--model", required=True)
    le.add_argument("--layer", help="layer index or role name")
    common(le)
    le.set_defaults(func=cmd_lesion)

    r = sub.add_parser("report", help="aggregate every run below a directory")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("scaling", help="training-set-size study")
    s.add_argument("--sizes", help="comma-separated ascending sizes")
    s.add_argument("--repeats", type=int)
    s.add_argument("--gdn", action=argparse.BooleanOptionalAction, default=None, help="also train GDNs")
    common(s, jobs=True)
    s.set_defaults(func=cmd_scaling)

    pr = sub.add_parser("presets", help="list built-in configs")
    pr.add_argument("--write", help="directory to write the configs to")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "config", None) is None and args.command in ("train", "scaling"):
        return _fail("usage", f"{args.command} needs --config (a file or one of: {', '.join(sorted(PRESETS))})", 2)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", str(exc), 2, line=exc.line, source=exc.source)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except (ExperimentError, ModelFormatError, FileNotFoundError, ValueError, RuntimeError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
