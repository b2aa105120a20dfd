"""Experiment configuration files.

INI-style text with an explicit ``schema_version``.  Every key is checked
against a schema; violations raise :class:`ConfigError` carrying the line
number of the offending entry.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .conv import ConvSpec
from .deliberation import DeliberationConfig
from .gdn import AdamConfig, GdnConfig
from .train import EnnHyperparams, SgdConfig

SCHEMA_VERSION = 1
DATASETS = ("rectangles", "orientation", "logic", "tsp", "bdt", "mnist")
TRAINERS = ("enn", "gdn", "cenn")
EVALUATIONS = ("error", "oracle", "tsp", "bdt", "noise", "fgsm", "boundary", "lesion", "firing", "weights")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


# -- value parsers ------------------------------------------------------------

def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _float(v: str) -> float:
    x = float(v)
    if math.isnan(x):
        raise ValueError("nan is not allowed")
    return x


def _int(v: str) -> int:
    return int(v.strip())


def _ints(v: str) -> tuple:
    return tuple(int(p) for p in v.replace(",", " ").split())


def _floats(v: str) -> tuple:
    return tuple(_float(p) for p in v.replace(",", " ").split())


def _names(v: str) -> tuple:
    return tuple(p for p in v.replace(",", " ").split())


def _choice(*allowed):
    def parse(v: str) -> str:
        v = v.strip()
        if v not in allowed:
            raise ValueError(f"must be one of {', '.join(allowed)}; got {v!r}")
        return v
    return parse


def _optional_float(v: str):
    return None if v.strip().lower() in ("", "none", "auto") else _float(v)


def _conv_layers(v: str) -> tuple:
    """``"6:5x5, 16:5x5"`` -> ((6, (5, 5)), (16, (5, 5)))."""
    out = []
    for part in v.split(","):
        m = re.fullmatch(r"\s*(\d+)\s*:\s*(\d+)\s*x\s*(\d+)\s*", part)
        if not m:
            raise ValueError(f"conv layer {part.strip()!r} is not FILTERS:HxW")
        out.append((int(m[1]), (int(m[2]), int(m[3]))))
    return tuple(out)


SCHEMA = {
    "experiment": {
        "schema_version": _int, "name": str, "dataset": _choice(*DATASETS), "trainer": _choice(*TRAINERS),
        "seed": _int, "evaluations": _names,
    },
    "dataset": {
        "n_train": _int, "n_test": _int, "per_class": _int, "test_per_class": _int, "data_seed": _int,
        "per_shape": _int,
    },
    "enn": {
        "target_subconcepts": _int, "svm_cost": _float, "differentia_multiplier": _float,
        "subconcept_multiplier_max": _float, "margin_fraction": _float, "error_tolerance": _float,
        "error_tolerance_unit": _choice("rate", "count"), "concept_init": _choice("direct", "svm"),
        "concept_activation": _choice("softmax", "sigmoid"), "prune": _bool,
        "subconcept_inputs": _choice("all", "associated"), "class_weight": _choice("none", "balanced"),
        "symbolic_tolerance": _float, "svm_tol": _float,
        "sgd_learning_rate": _float, "sgd_batch_size": _int, "sgd_epochs": _int, "sgd_train_multiplier": _bool,
        "sgd_validation_fraction": _float, "sgd_patience": _int,
    },
    "gdn": {
        "hidden_widths": str, "batch_size": _int, "epochs": _int, "alpha": _float, "beta1": _float,
        "beta2": _float, "eps": _float, "output_activation": _choice("softmax", "sigmoid"),
        "init": _choice("random", "enn"), "noise_fraction": _float,
    },
    "conv": {
        "layers": _conv_layers, "windows_per_class": _int, "cost": _float, "multiplier": _float,
        "fit_on": _choice("centroids", "members"), "pad": _int,
    },
    "deliberation": {
        "enabled": _bool, "trigger_ratio": _float, "max_steps": _int, "bias_step": _optional_float,
        "level_tolerance": _float,
    },
    "evaluation": {
        "n_instances": _int, "n_images": _int, "n_boundary_images": _int, "n_targets": _int, "sigmas": _floats, "repeats": _int,
        "n_stimuli": _int, "eps_min": _float, "eps_max": _float, "eps_factor": _float, "clip": _bool,
        "lesion_layer": str, "sizes": _ints, "scaling_repeats": _int, "scaling_gdn": _bool,
    },
}
REQUIRED = {"experiment": ("schema_version", "name", "dataset", "trainer", "seed")}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: str
    trainer: str
    seed: int
    evaluations: tuple = ()
    data: dict = field(default_factory=dict)
    enn: EnnHyperparams | None = None
    gdn: GdnConfig | None = None
    gdn_init: str = "random"
    gdn_noise_fraction: float = 0.0
    gdn_match_enn: bool = False
    conv: tuple = ()
    conv_pad: int | None = None
    deliberation: DeliberationConfig | None = None
    evaluation: dict = field(default_factory=dict)
    text: str = ""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        text = set_value(self.text, "experiment", "seed", str(int(seed)))
        return parse_config(text)


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` (sections map under key None)."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m[1].strip()
            out.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            out.setdefault((section, m[1].strip().lower()), n)
    return out


def set_value(text: str, section: str, key: str, value: str) -> str:
    """Return ``text`` with ``key`` in ``section`` set to ``value``."""
    lines = text.splitlines()
    current, insert_at = None, None
    for i, line in enumerate(lines):
        s = line.strip()
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            if current == section and insert_at is None:
                insert_at = i
            current = m[1].strip()
            continue
        m = re.match(r"([^=:#;]+?)\s*[=:]", s)
        if m and current == section and m[1].strip().lower() == key:
            lines[i] = f"{key} = {value}"
            return "\n".join(lines) + "\n"
    if current == section and insert_at is None:
        insert_at = len(lines)
    if insert_at is None:
        lines += ["", f"[{section}]"]
        insert_at = len(lines)
    lines.insert(insert_at, f"{key} = {value}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from exc
    lines = _line_index(text)
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; valid sections: {', '.join(SCHEMA)}",
                              lines.get((section, None)), source)
        values[section] = {}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]; valid keys: "
                                  f"{', '.join(SCHEMA[section])}", line, source)
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}", line, source) from exc
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigError(f"missing required key {key!r} in [{section}]",
                                  lines.get((section, None)), source)
    exp = values["experiment"]
    if exp["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {exp['schema_version']} (expected {SCHEMA_VERSION})",
                          lines.get(("experiment", "schema_version")), source)
    for ev in exp.get("evaluations", ()):
        if ev not in EVALUATIONS:
            raise ConfigError(f"unknown evaluation {ev!r}; valid evaluations: {', '.join(EVALUATIONS)}",
                              lines.get(("experiment", "evaluations")), source)

    def build(section, fn):
        try:
            return fn(values.get(section, {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {exc}", lines.get((section, None)), source) from exc

    enn = build("enn", _enn) if "enn" in values or exp["trainer"] in ("enn", "cenn") else None
    g = values.get("gdn", {})
    gdn = build("gdn", _gdn) if "gdn" in values or exp["trainer"] == "gdn" else None
    if exp["trainer"] in ("enn", "cenn") and enn is None:
        raise ConfigError("an [enn] section is required", None, source)
    if (g.get("init") == "enn" or g.get("hidden_widths", "").strip() == "match") and enn is None:
        raise ConfigError("gdn settings that refer to an ENN need an [enn] section",
                          lines.get(("gdn", None)), source)
    conv = ()
    c = values.get("conv", {})
    if exp["trainer"] == "cenn":
        if "layers" not in c:
            raise ConfigError("trainer cenn needs [conv] layers", lines.get(("conv", None)), source)
        conv = tuple(ConvSpec(n, k, c.get("multiplier", 2.0), c.get("windows_per_class", 100), c.get("cost", 1.0),
                              c.get("fit_on", "centroids")) for n, k in c["layers"])
    d = values.get("deliberation", {})
    delib = None
    if d.get("enabled", bool(d)):
        delib = build("deliberation", lambda v: DeliberationConfig(
            **{k: x for k, x in v.items() if k != "enabled"}))
    return ExperimentConfig(
        name=exp["name"], dataset=exp["dataset"], trainer=exp["trainer"], seed=exp["seed"],
        evaluations=exp.get("evaluations", ()), data=values.get("dataset", {}), enn=enn, gdn=gdn,
        gdn_init=g.get("init", "random"), gdn_noise_fraction=g.get("noise_fraction", 0.0),
        gdn_match_enn=g.get("hidden_widths", "").strip() == "match",
        conv=conv, conv_pad=c.get("pad"), deliberation=delib, evaluation=values.get("evaluation", {}), text=text)


def _enn(v: dict) -> EnnHyperparams:
    v = dict(v)
    sgd = {k[4:]: v.pop(k) for k in list(v) if k.startswith("sgd_")}
    if "target_subconcepts" not in v:
        raise ValueError("target_subconcepts is required")
    return EnnHyperparams(final_sgd=SgdConfig(**sgd), **v)


def _gdn(v: dict) -> GdnConfig:
    v = {k: x for k, x in v.items() if k not in ("init", "noise_fraction")}
    adam = AdamConfig(**{k: v.pop(k) for k in ("alpha", "beta1", "beta2", "eps") if k in v})
    widths = v.pop("hidden_widths", "4,4").strip()
    hidden = () if widths == "match" else _ints(widths)
    if widths != "match" and not hidden:
        raise ValueError("hidden_widths is empty")
    return GdnConfig(hidden_widths=hidden or (1,), adam=adam, **v)


def load_config(path_or_name: str) -> ExperimentConfig:
    """Read a config file, or a built-in preset when no such file exists."""
    from .presets import PRESETS

    p = Path(path_or_name)
    if p.is_file():
        return parse_config(p.read_text(), str(p))
    if path_or_name in PRESETS:
        return parse_config(PRESETS[path_or_name], f"<preset {path_or_name}>")
    raise ConfigError(f"no config file or preset named {path_or_name!r}; presets: {', '.join(sorted(PRESETS))}")
