"""Experiment runner: data from a config, training, evaluations, and
deterministic artifacts with manifests.

Every run directory holds a ``manifest.json`` listing each file it wrote
with its sha256.  Wall-clock times live only in ``timings.json`` so every
other file is reproducible byte for byte from the seed.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import firing_matrix, lesion_study, weight_stats, write_matrix_csv, write_pgm
from .config import ExperimentConfig
from .conv import CennModel, train_cenn
from .datasets import (LabeledDataset, balanced_subsample, bdt_train, decode_tsp, encode_tsp, gen_bdt_tables, gen_logic,
                       gen_orientation, gen_rectangles, gen_tsp_maps, load_mnist, truth_table_inputs, tsp_train)
from .deliberation import deliberate_classify, deliberation_policy
from .gdn import seed_with_noise, train_gdn
from .model import SYMBOLIC, ModelFormatError, Network, classify, loads_document, network_from_document, serialize
from .robustness import (boundary_distance, epsilon_grid, fgsm_epsilon_min, noise_curve)
from .tasks import (calibrate_orientation_threshold, cart_build, nearest_neighbor_route, network_policy,
                    oracle_bdt_step, oracle_orientation, oracle_tsp_step, rollout_bdt, rollout_tsp)
from .train import EnnModel, count_support_vectors, train_enn

MODEL_FILE = "model.json"
CONFIG_FILE = "experiment.cfg"


class ExperimentError(RuntimeError):
    pass


# -- data ---------------------------------------------------------------------

@dataclass
class ExperimentData:
    train: LabeledDataset
    tests: dict = field(default_factory=dict)  # split name -> LabeledDataset
    instances: list = field(default_factory=list)  # TSP maps or BDT tables


def load_data(cfg: ExperimentConfig) -> ExperimentData:
    d = cfg.data
    data_seed = d.get("data_seed", 0)
    if cfg.dataset == "logic":
        ds = gen_logic()
        return ExperimentData(ds, {"train": ds})
    if cfg.dataset == "orientation":
        sets = gen_orientation(data_seed, d.get("per_shape", 50))
        return ExperimentData(sets.train, {"lines": sets.lines, "diagonals": sets.diagonals, "boxes": sets.boxes})
    if cfg.dataset == "tsp":
        return ExperimentData(tsp_train(), {}, gen_tsp_maps(d.get("n_test", 5000), data_seed))
    if cfg.dataset == "bdt":
        return ExperimentData(bdt_train(), {}, gen_bdt_tables(d.get("n_test", 5000), data_seed))
    if cfg.dataset == "rectangles":
        n_train = d.get("n_train", 2 * d["per_class"] if "per_class" in d else 50_000)
        train, test = gen_rectangles(n_train, d.get("n_test", 10_000), data_seed)
        return ExperimentData(train, {"test": test})
    if cfg.dataset == "mnist":
        train, test = load_mnist()
        if "per_class" in d:
            train = balanced_subsample(train, d["per_class"], d.get("data_seed", cfg.seed))
        if "test_per_class" in d:
            test = balanced_subsample(test, d["test_per_class"], data_seed)
        return ExperimentData(train, {"test": test})
    raise ExperimentError(f"unknown dataset {cfg.dataset!r}")


def eval_split(data: ExperimentData) -> LabeledDataset:
    """The split used by image-level evaluations."""
    for name in ("test", "diagonals", "train"):
        if name in data.tests:
            return data.tests[name]
    return data.train


# -- models -------------------------------------------------------------------

def train_model(cfg: ExperimentConfig, data: ExperimentData, jobs: int = 1):
    X, y, names = data.train.X, data.train.y, data.train.class_names
    K = len(names)
    if cfg.trainer == "enn":
        return train_enn(X, y, cfg.enn, cfg.seed, names, jobs=jobs, n_classes=K)
    if cfg.trainer == "cenn":
        return train_cenn(X, y, cfg.conv, cfg.enn, cfg.seed, pad=cfg.conv_pad, jobs=jobs)
    gcfg = cfg.gdn
    init = None
    if cfg.gdn_init == "enn" or cfg.gdn_match_enn:
        enn = train_enn(X, y, cfg.enn, cfg.seed, names, jobs=jobs, n_classes=K)
        gcfg = type(gcfg)(tuple(enn.network.widths[:-1]), gcfg.batch_size, gcfg.epochs, gcfg.adam, gcfg.seed,
                          gcfg.output_activation, gcfg.cv_folds)
        if cfg.gdn_init == "enn":
            init = seed_with_noise(enn, cfg.gdn_noise_fraction, cfg.seed, gcfg.output_activation)
    gcfg = type(gcfg)(gcfg.hidden_widths, gcfg.batch_size, gcfg.epochs, gcfg.adam, cfg.seed,
                      gcfg.output_activation, gcfg.cv_folds)
    net, history = train_gdn(X, y, gcfg, names, init=init, n_classes=K)
    return net


def model_bytes(model) -> bytes:
    if isinstance(model, (EnnModel, CennModel)):
        return model.to_bytes()
    return serialize(model, {"kind": "gdn"})


def load_model(data: bytes):
    doc = loads_document(data)
    if isinstance(doc, dict) and doc.get("format") == "cenn":
        return CennModel.from_bytes(data)
    net, meta = network_from_document(doc)
    if meta.get("kind") == "enn":
        return EnnModel.from_bytes(data)
    if meta.get("kind") not in (None, "gdn"):
        raise ModelFormatError(f"unknown model kind {meta.get('kind')!r}", "$.metadata.kind")
    return net


def network_of(model) -> Network:
    if isinstance(model, CennModel):
        raise ExperimentError("this evaluation needs a fully connected network, not a convolutional ENN")
    return getattr(model, "network", model)


def is_symbolic(model) -> bool:
    return any(layer.activation == SYMBOLIC for layer in network_of(model).layers)


def policy_for(model, cfg: ExperimentConfig):
    if isinstance(model, EnnModel) and cfg.deliberation is not None:
        return deliberation_policy(model, cfg.deliberation)
    return network_policy(network_of(model))


def decide(model, cfg: ExperimentConfig, x, mask) -> int:
    if isinstance(model, EnnModel) and cfg.deliberation is not None:
        return deliberate_classify(model, x, mask, cfg.deliberation).label
    return classify(network_of(model), x, mask)[0]


# -- output helpers -----------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_rows(path: Path, rows: list, fieldnames=None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return path


def read_rows(path: Path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import numba
    import scipy
    import skimage

    return {"artifact": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "scikit-image": skimage.__version__}


def write_manifest(out: Path, command: str, seed, config_sha: str | None, files, extra=None) -> Path:
    out = Path(out)
    entries, timing = {}, []
    for f in files:
        f = Path(f)
        name = f.relative_to(out).as_posix()
        # wall-clock files change on every run, so they are listed but not hashed
        if f.name.startswith("timings."):
            timing.append(name)
        else:
            entries[name] = sha256_file(f)
    doc = {"command": command, "seed": seed, "config_sha256": config_sha, "versions": versions(),
           "files": dict(sorted(entries.items())), "timing_files": sorted(timing)}
    if extra:
        doc.update(extra)
    return write_json(out / "manifest.json", doc)


# -- evaluations ----------------------------------------------------------------

def _n(cfg, key, default):
    return int(cfg.evaluation.get(key, default))


def eval_error(model, cfg, data, out: Path, seed: int):
    rows = []
    for name, ds in [("train", data.train)] + [(k, v) for k, v in data.tests.items() if k != "train"]:
        rows.append({"split": name, "n": len(ds), "error": float(np.mean(model.predict(ds.X) != ds.y))})
    summary = {"errors": {r["split"]: r["error"] for r in rows}}
    if not isinstance(model, CennModel) and is_symbolic(model):
        acts = network_of(model).forward(data.train.X).activations
        summary["symbolic_outputs_ok"] = bool(all(np.isin(a, (0.0, 0.5, 1.0)).all() for a in acts))
    return summary, [write_rows(out / "error.csv", rows)]


def _random_tsp_states(maps, n: int, seed: int):
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(n):
        inst = maps[int(rng.integers(len(maps)))]
        current = int(rng.integers(10))
        others = np.delete(np.arange(10), current)
        k = int(rng.integers(0, 9))
        gone = np.zeros(10, dtype=bool)
        gone[rng.choice(others, k, replace=False)] = True
        states.append((inst, current, gone))
    return states


def eval_oracle(model, cfg, data, out: Path, seed: int):
    """Agreement between the network and the decision oracles."""
    rows = []
    if cfg.dataset == "orientation":
        tau = calibrate_orientation_threshold(data.train.X, data.train.y)
        for name, ds in [("train", data.train), *data.tests.items()]:
            pred = model.predict(ds.X)
            oracle = np.array([oracle_orientation(x, tau) for x in ds.X])
            rows.append({"set": name, "n": len(ds), "disagreements": int((pred != oracle).sum())})
        extra = {"threshold": tau}
    elif cfg.dataset == "tsp":
        states = _random_tsp_states(data.instances, _n(cfg, "n_instances", 1000), seed)
        bad = 0
        for inst, current, gone in states:
            x = encode_tsp(inst.distances, current, gone)
            M, c = decode_tsp(x)
            mask = ~gone
            mask[current] = False
            bad += decide(model, cfg, x, mask) != oracle_tsp_step(M, c)
        rows.append({"set": "tsp_steps", "n": len(states), "disagreements": int(bad)})
        extra = {}
    elif cfg.dataset == "bdt":
        T = truth_table_inputs()
        tables = [t for t in data.instances if len(set(t.labels.tolist())) > 1][: _n(cfg, "n_instances", 1000)]
        bad = sum(decide(model, cfg, t.labels.astype(np.float64), np.ones(10, dtype=bool)) != oracle_bdt_step(T, t.labels)
                  for t in tables)
        rows.append({"set": "bdt_roots", "n": len(tables), "disagreements": int(bad)})
        extra = {}
    else:
        raise ExperimentError(f"no decision oracle for dataset {cfg.dataset!r}")
    summary = {"disagreements": {r["set"]: r["disagreements"] for r in rows},
               "total_disagreements": int(sum(r["disagreements"] for r in rows)), **extra}
    return summary, [write_rows(out / "oracle.csv", rows)]


def eval_tsp(model, cfg, data, out: Path, seed: int):
    if cfg.dataset != "tsp":
        raise ExperimentError("the tsp evaluation needs the tsp dataset")
    policy = policy_for(model, cfg)
    rows = []
    for i, inst in enumerate(data.instances):
        net_len = rollout_tsp(policy, inst).length
        ref = nearest_neighbor_route(inst).length
        rows.append({"id": i, "network": net_len, "oracle": ref, "delta": net_len - ref})
    deltas = np.array([r["delta"] for r in rows])
    summary = {"n": len(rows), "mean_delta": float(deltas.mean()), "max_abs_delta": float(np.abs(deltas).max()),
               "mismatched_routes": int((np.abs(deltas) > 1e-9).sum())}
    return summary, [write_rows(out / "tsp.csv", rows)]


def eval_bdt(model, cfg, data, out: Path, seed: int):
    if cfg.dataset != "bdt":
        raise ExperimentError("the bdt evaluation needs the bdt dataset")
    policy = policy_for(model, cfg)
    rows = []
    for i, t in enumerate(data.instances):
        net_depth = rollout_bdt(policy, t.labels).avg_depth
        ref = cart_build(t.labels).avg_depth
        rows.append({"id": i, "network": net_depth, "oracle": ref, "delta": net_depth - ref})
    deltas = np.array([r["delta"] for r in rows])
    summary = {"n": len(rows), "mean_delta": float(deltas.mean()), "worse": int((deltas > 1e-12).sum()),
               "better": int((deltas < -1e-12).sum())}
    return summary, [write_rows(out / "bdt.csv", rows)]


def _image_subset(cfg, data):
    ds = eval_split(data)
    n = min(_n(cfg, "n_images", 1000), len(ds))
    return ds.X[:n].astype(np.float64), ds.y[:n]


def eval_noise(model, cfg, data, out: Path, seed: int):
    X, y = _image_subset(cfg, data)
    sigmas = cfg.evaluation.get("sigmas", (0.0, 0.1, 0.2, 0.5, 1.0))
    curve = noise_curve(model, X, y, sigmas, _n(cfg, "repeats", 20), seed, bool(cfg.evaluation.get("clip", False)))
    rows = [{"sigma": s, "error": e, "std": d} for s, e, d in zip(curve.sigmas, curve.errors, curve.spread)]
    return {"sigmas": list(curve.sigmas), "errors": list(curve.errors)}, [write_rows(out / "noise.csv", rows)]


def _grid(cfg):
    e = cfg.evaluation
    return epsilon_grid(e.get("eps_min", 0.001), e.get("eps_max", 1.0), e.get("eps_factor", 1.05))


def eval_fgsm(model, cfg, data, out: Path, seed: int):
    """Self-attacks on the evaluation images the model classifies correctly."""
    X, y = _image_subset(cfg, data)
    net = network_of(model)
    ok = np.flatnonzero(net.predict(X) == y)
    grid = _grid(cfg)
    clip = bool(cfg.evaluation.get("clip", False))
    rows = [{"id": int(i), "eps_min": fgsm_epsilon_min(net, net, X[i], int(y[i]), grid, clip=clip).eps_min}
            for i in ok]
    eps = np.array([r["eps_min"] for r in rows])
    return {"n": len(rows), "median_eps_min": float(np.median(eps)) if len(eps) else float("nan")}, \
        [write_rows(out / "fgsm.csv", rows, ["id", "eps_min"])]


def eval_boundary(model, cfg, data, out: Path, seed: int):
    """White-noise boundary distances from correctly classified images."""
    X, y = _image_subset(cfg, data)
    n_img = min(_n(cfg, "n_boundary_images", 100), len(X))
    pred = model.predict(X[:n_img])
    rows = []
    for i in np.flatnonzero(pred == y[:n_img]):
        for j, p in enumerate(boundary_distance(model, X[i], None, _n(cfg, "n_targets", 20), seed + int(i))):
            rows.append({"id": int(i), "target": j, "t_star": p.t_star, "l1_distance": p.l1_distance})
    d = np.array([r["l1_distance"] for r in rows])
    return {"n_probes": len(rows), "median_l1_distance": float(np.median(d)) if len(d) else float("nan")}, \
        [write_rows(out / "boundary.csv", rows, ["id", "target", "t_star", "l1_distance"])]


def _lesion_layer(model, cfg):
    layer = cfg.evaluation.get("lesion_layer", "1")
    return int(layer) if layer.isdigit() else layer


def eval_lesion(model, cfg, data, out: Path, seed: int):
    ds = eval_split(data)
    curve = lesion_study(model, ds.X, ds.y, _lesion_layer(model, cfg))
    K = curve.accuracy.shape[1]
    rows = [{"deleted": k, "neuron": (int(curve.order[k - 1]) if k else -1), "overall": curve.overall[k],
             **{f"class_{c}": curve.accuracy[k, c] for c in range(K)}} for k in range(len(curve.overall))]
    summary = {"collapse_indices": curve.collapse_indices().tolist(), "collapse_variance": curve.collapse_variance(),
               "baseline_accuracy": float(curve.overall[0])}
    return summary, [write_rows(out / "lesion.csv", rows)]


def eval_firing(model, cfg, data, out: Path, seed: int):
    ds = eval_split(data)
    fm = firing_matrix(model, ds.X, _n(cfg, "n_stimuli", 350), seed)
    files = [write_matrix_csv(out / "firing.csv", fm.matrix),
             write_rows(out / "firing_rows.csv", [{"row": r, "layer": int(l), "neuron": int(n)} for r, (l, n) in
                                                   enumerate(zip(fm.layer_of_row, fm.order))]),
             write_pgm(out / "firing.pgm", fm.matrix, 2)]
    return {"population_sparseness": fm.sparseness.tolist(), "shape": list(fm.matrix.shape)}, files


def eval_weights(model, cfg, data, out: Path, seed: int):
    stats = weight_stats(model)
    rows = [{"layer": k, "excess_kurtosis": s.excess_kurtosis, "sparsity": s.sparsity, "degenerate": s.degenerate}
            for k, s in enumerate(stats)]
    return {"excess_kurtosis": [s.excess_kurtosis for s in stats], "sparsity": [s.sparsity for s in stats]}, \
        [write_rows(out / "weights.csv", rows)]


EVALUATORS = {"error": eval_error, "oracle": eval_oracle, "tsp": eval_tsp, "bdt": eval_bdt, "noise": eval_noise,
              "fgsm": eval_fgsm, "boundary": eval_boundary, "lesion": eval_lesion, "firing": eval_firing,
              "weights": eval_weights}


# -- top-level runs -------------------------------------------------------------

def run_train(cfg: ExperimentConfig, out, jobs: int = 1) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    data = load_data(cfg)
    model = train_model(cfg, data, jobs)
    train_time = time.perf_counter() - t0
    model_path = out / MODEL_FILE
    model_path.write_bytes(model_bytes(model))
    (out / CONFIG_FILE).write_text(cfg.text)
    summary, _ = eval_error(model, cfg, data, out, cfg.seed)
    report = {"experiment": cfg.name, "seed": cfg.seed, "config_sha256": cfg.sha256, "trainer": cfg.trainer,
              "dataset": cfg.dataset, "model_sha256": sha256_file(model_path), **summary}
    if isinstance(model, (EnnModel, CennModel)):
        enn = model if isinstance(model, EnnModel) else model.enn
        report["widths"] = enn.network.widths
        report["training"] = enn.report
    else:
        report["widths"] = model.widths
    files = [model_path, out / CONFIG_FILE, out / "error.csv", write_json(out / "report.json", report),
             write_json(out / "timings.json", {"train_seconds": train_time})]
    write_manifest(out, "train", cfg.seed, cfg.sha256, files)
    return report


def run_eval(model_path, cfg: ExperimentConfig, evaluations, out, seed: int | None = None) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    model = load_model(Path(model_path).read_bytes())
    data = load_data(cfg)
    results, files, timings = {}, [], {}
    for name in evaluations:
        if name not in EVALUATORS:
            raise ExperimentError(f"unknown evaluation {name!r}; valid evaluations: {', '.join(EVALUATORS)}")
        t0 = time.perf_counter()
        results[name], written = EVALUATORS[name](model, cfg, data, out, seed)
        timings[name] = time.perf_counter() - t0
        files += written
    report = {"experiment": cfg.name, "seed": seed, "config_sha256": cfg.sha256,
              "model_sha256": sha256_file(model_path), "evaluations": results}
    files += [write_json(out / "report.json", report), write_json(out / "timings.json", timings)]
    write_manifest(out, "eval", seed, cfg.sha256, files, {"model": Path(model_path).name})
    return report


def run_attack(models: dict, cfg: ExperimentConfig, out, seed: int | None = None) -> dict:
    """FGSM transfer table: every model attacks every other model."""
    from .robustness import attack_error, transfer_table

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    loaded = {name: load_model(Path(p).read_bytes()) for name, p in models.items()}
    nets = {name: network_of(m) for name, m in loaded.items()}
    data = load_data(cfg)
    X, y = _image_subset(cfg, data)
    rows = transfer_table(nets, nets, X, y, _grid(cfg))
    cols = ["id", "victim"] + [f"eps_min_designer_{n}" for n in nets]
    summary = {}
    for v in nets:
        for d in nets:
            eps = np.array([r[f"eps_min_designer_{d}"] for r in rows if r["victim"] == v])
            summary[f"median_eps_min[{d}->{v}]"] = float(np.median(eps)) if len(eps) else float("nan")
    for d in nets:
        eps_d = summary[f"median_eps_min[{d}->{d}]"]
        if math.isfinite(eps_d):
            for v in nets:
                summary[f"error_at_median[{d}->{v}]"] = attack_error(nets[d], nets[v], X, y, eps_d)
    files = [write_rows(out / "attack.csv", rows, cols), write_json(out / "report.json", summary)]
    write_manifest(out, "attack", seed, cfg.sha256, files,
                   {"models": {n: sha256_file(p) for n, p in sorted(models.items())}})
    return summary


def run_scaling(cfg: ExperimentConfig, out, sizes=None, repeats=None, jobs: int = 1, with_gdn=None) -> dict:
    """ENN (and optionally GDN) trained on balanced subsamples of each size."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = tuple(sizes or cfg.evaluation.get("sizes", (500, 2000, 8000)))
    if list(sizes) != sorted(sizes):
        raise ExperimentError("sizes must be ascending")
    repeats = int(repeats or cfg.evaluation.get("scaling_repeats", 5))
    with_gdn = bool(cfg.evaluation.get("scaling_gdn", True) if with_gdn is None else with_gdn)
    if cfg.dataset != "mnist":
        raise ExperimentError("the scaling study runs on mnist")
    full_train, test = load_mnist()
    K = full_train.n_classes
    rows, timings = [], []
    for size in sizes:
        for r in range(repeats):
            seed = cfg.seed + r
            sub = balanced_subsample(full_train, size // K, seed)
            t0 = time.perf_counter()
            enn = train_enn(sub.X, sub.y, cfg.enn, seed, sub.class_names, jobs=jobs, n_classes=K)
            timings.append({"size": size, "repeat": r, "model": "enn", "seconds": time.perf_counter() - t0})
            rows.append({"size": size, "repeat": r, "seed": seed, "model": "enn",
                         "test_error": enn.error_rate(test.X, test.y),
                         "support_vectors": count_support_vectors(enn), "neurons": int(sum(enn.network.widths))})
            if with_gdn:
                from .gdn import GdnConfig

                g = cfg.gdn or GdnConfig()
                gcfg = GdnConfig(tuple(enn.network.widths[:-1]), g.batch_size, g.epochs, g.adam, seed,
                                 g.output_activation, g.cv_folds)
                t0 = time.perf_counter()
                net, _ = train_gdn(sub.X, sub.y, gcfg, sub.class_names, n_classes=K)
                timings.append({"size": size, "repeat": r, "model": "gdn", "seconds": time.perf_counter() - t0})
                rows.append({"size": size, "repeat": r, "seed": seed, "model": "gdn",
                             "test_error": net.error_rate(test.X, test.y), "support_vectors": "",
                             "neurons": int(sum(net.widths))})
    csv_path = write_rows(out / "scaling.csv", rows, ["size", "repeat", "seed", "model", "test_error",
                                                      "support_vectors", "neurons"])
    summary = scaling_summary(read_rows(csv_path))
    files = [csv_path, write_json(out / "report.json", summary),
             write_rows(out / "timings.csv", timings, ["size", "repeat", "model", "seconds"])]
    write_manifest(out, "scaling", cfg.seed, cfg.sha256, files)
    return summary


def scaling_summary(rows: list) -> dict:
    """Aggregates recomputed from raw scaling rows."""
    enn = [r for r in rows if r["model"] == "enn"]
    sizes = sorted({int(r["size"]) for r in enn})
    err = {s: float(np.mean([float(r["test_error"]) for r in enn if int(r["size"]) == s])) for s in sizes}
    sv = {s: float(np.mean([float(r["support_vectors"]) for r in enn if int(r["size"]) == s])) for s in sizes}
    neurons = {s: float(np.mean([float(r["neurons"]) for r in enn if int(r["size"]) == s])) for s in sizes}
    nvals = np.array(list(neurons.values()))
    out = {"sizes": sizes, "enn_mean_error": err, "enn_support_vectors": sv, "enn_neurons": neurons,
           "error_monotone_decreasing": bool(all(err[a] > err[b] for a, b in zip(sizes, sizes[1:]))),
           "support_vector_growth_sublinear": bool(all(sv[b] / sv[a] < b / a for a, b in zip(sizes, sizes[1:]))),
           "neuron_count_variation": float((nvals.max() - nvals.min()) / nvals.mean()) if len(nvals) else 0.0}
    gdn = [r for r in rows if r["model"] == "gdn"]
    if gdn:
        out["gdn_mean_error"] = {s: float(np.mean([float(r["test_error"]) for r in gdn if int(r["size"]) == s]))
                                 for s in sizes}
    return out


AGGREGATORS = {
    "tsp.csv": lambda rows: {"mean_delta": float(np.mean([float(r["delta"]) for r in rows]))},
    "bdt.csv": lambda rows: {"mean_delta": float(np.mean([float(r["delta"]) for r in rows]))},
    "fgsm.csv": lambda rows: {"median_eps_min": float(np.median([float(r["eps_min"]) for r in rows]))},
    "boundary.csv": lambda rows: {"median_l1_distance": float(np.median([float(r["l1_distance"]) for r in rows]))},
    "error.csv": lambda rows: {r["split"]: float(r["error"]) for r in rows},
    "scaling.csv": scaling_summary,
}


def run_report(directory) -> dict:
    """Aggregate tables rebuilt from the raw CSVs of every run below
    ``directory``."""
    directory = Path(directory)
    runs = {}
    for manifest in sorted(directory.rglob("manifest.json")):
        run_dir = manifest.parent
        if run_dir == directory:
            continue
        doc = json.loads(manifest.read_text())
        entry = {"command": doc.get("command"), "seed": doc.get("seed"), "config_sha256": doc.get("config_sha256")}
        for name in sorted(doc.get("files", {})):
            if name in AGGREGATORS:
                rows = read_rows(run_dir / name)
                entry[name.removesuffix(".csv")] = AGGREGATORS[name](rows) if rows else {}
        runs[run_dir.relative_to(directory).as_posix()] = entry
    report = {"runs": runs}
    lines = ["# Experiment report", ""]
    for name, entry in runs.items():
        lines.append(f"## {name}")
        lines.append(f"- command: {entry['command']}, seed: {entry['seed']}")
        for key, val in entry.items():
            if key in ("command", "seed", "config_sha256"):
                continue
            lines.append(f"- {key}: {json.dumps(_jsonable(val), sort_keys=True)}")
        lines.append("")
    files = [write_json(directory / "report.json", report)]
    md = directory / "report.md"
    md.write_text("\n".join(lines))
    files.append(md)
    write_manifest(directory, "report", None, None, files)
    return report
