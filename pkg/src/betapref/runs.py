"""Experiment configuration and persisted run records.

A configuration is one JSON document. Missing fields take their defaults and
the fully resolved document is what gets written next to a run, so a run can
be replayed from its own ``config.json`` and seed.
"""

import copy
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beta import BetaParams
from .errors import StructuralError
from .model import TrainConfig, TrainTrace, World

CONFIG_SCHEMA = 1
METRICS_SCHEMA = 1

DEFAULT_CONFIG = {
    "schema_version": CONFIG_SCHEMA,
    "run_id": None,
    "world": {
        "dim": 16,
        "margin_scale": 2.0,
        "n_values": [1, 2, 4, 8, 16],
        "standard_seed": 0,
        "n_objectives": 2,
    },
    "train": {
        "objective": "icrm",
        "lambda": 0.1,
        "prior": [1.0, 1.0],
        "steps": 2000,
        "batch_size": 64,
        "learning_rate": 0.01,
        "momentum": 0.9,
        "max_grad_norm": 5.0,
    },
    "eval": {
        "n_demos": 16,
        "n_values": [1, 2, 4, 8, 16, 32],
        "pareto_n_values": [1, 4, 16],
        "mix_ratios": [0.0, 0.25, 0.5, 0.75, 1.0],
        "n_seeds": 4,
        "count": 2000,
        "bandit_steps": 200,
        "bandit_batch_size": 256,
        "bandit_learning_rate": 0.1,
    },
}

_INT_FIELDS = {"dim", "standard_seed", "n_objectives", "steps", "batch_size", "n_demos", "n_seeds",
               "count", "bandit_steps", "bandit_batch_size", "schema_version"}
_INT_LIST_FIELDS = {"n_values", "pareto_n_values"}
_REAL_LIST_FIELDS = {"mix_ratios", "prior"}


class ConfigError(ValueError):
    """The configuration document is malformed; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field {field!r}: {message}")
        self.field = field


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(path: str, key: str, value, default):
    if key in _INT_FIELDS:
        if not _is_int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
    elif key in _INT_LIST_FIELDS:
        if not isinstance(value, list) or not value or not all(_is_int(v) and v >= 1 for v in value):
            raise ConfigError(path, "expected a nonempty list of positive integers")
    elif key in _REAL_LIST_FIELDS:
        if not isinstance(value, list) or not value or not all(_is_real(v) for v in value):
            raise ConfigError(path, "expected a nonempty list of numbers")
    elif key == "lambda":
        values = value if isinstance(value, list) else [value]
        if not values or not all(_is_real(v) and v >= 0 for v in values):
            raise ConfigError(path, "expected a number >= 0 or a list of them")
    elif key == "objective":
        if value not in ("icrm", "bt"):
            raise ConfigError(path, f"expected 'icrm' or 'bt', got {value!r}")
    elif key == "run_id":
        if value is not None and (not isinstance(value, str) or not value or "/" in value):
            raise ConfigError(path, "expected a nonempty name without '/'")
    elif key == "max_grad_norm":
        if value is not None and not (_is_real(value) and value > 0):
            raise ConfigError(path, "expected a positive number or null")
    elif isinstance(default, float) and not _is_real(value):
        raise ConfigError(path, f"expected a number, got {value!r}")


def _merge(doc: dict, default: dict, prefix: str) -> dict:
    out = {}
    for key in doc:
        if key not in default:
            raise ConfigError(prefix + key, "unknown field")
    for key, dval in default.items():
        path = prefix + key
        if key not in doc:
            out[key] = copy.deepcopy(dval)
        elif isinstance(dval, dict):
            if not isinstance(doc[key], dict):
                raise ConfigError(path, "expected an object")
            out[key] = _merge(doc[key], dval, path + ".")
        else:
            _check_value(path, key, doc[key], dval)
            out[key] = copy.deepcopy(doc[key])
    return out


def resolve_config(doc: dict | None = None) -> dict:
    """Fill defaults into ``doc`` and validate it.

    Raises:
        ConfigError: unknown field, wrong type or unsupported schema version.
    """
    doc = {} if doc is None else doc
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    cfg = _merge(doc, DEFAULT_CONFIG, "")
    if cfg["schema_version"] != CONFIG_SCHEMA:
        raise ConfigError("schema_version", f"unsupported version {cfg['schema_version']}")
    if len(cfg["train"]["prior"]) != 2 or min(cfg["train"]["prior"]) <= 0:
        raise ConfigError("train.prior", "expected two positive shapes [alpha0, beta0]")
    if any(not 0.0 <= r <= 1.0 for r in cfg["eval"]["mix_ratios"]):
        raise ConfigError("eval.mix_ratios", "ratios must lie in [0, 1]")
    for key in ("steps", "batch_size"):
        if cfg["train"][key] < 1:
            raise ConfigError(f"train.{key}", "must be >= 1")
    if cfg["world"]["dim"] < 2:
        raise ConfigError("world.dim", "must be >= 2")
    return cfg


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError("<file>", f"cannot read {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON ({exc})") from exc
    return resolve_config(doc)


def lambdas(cfg: dict) -> list:
    lam = cfg["train"]["lambda"]
    return [float(v) for v in lam] if isinstance(lam, list) else [float(lam)]


def world_from_config(cfg: dict) -> World:
    w = cfg["world"]
    return World(w["dim"], float(w["margin_scale"]), tuple(w["n_values"]), w["standard_seed"], w["n_objectives"])


def train_config_from(cfg: dict, lam: float, seed: int) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        objective=t["objective"],
        lambda_base=float(lam),
        prior=BetaParams(*t["prior"]),
        steps=t["steps"],
        batch_size=t["batch_size"],
        learning_rate=float(t["learning_rate"]),
        momentum=float(t["momentum"]),
        max_grad_norm=None if t["max_grad_norm"] is None else float(t["max_grad_norm"]),
        seed=int(seed),
    )


def default_run_id(cfg: dict, lam: float, seed: int) -> str:
    base = cfg["run_id"] or cfg["train"]["objective"]
    return f"{base}-lambda{lam:g}-seed{seed}"


# Run records.


@dataclass
class RunRecord:
    config: dict
    trace: TrainTrace
    metrics: dict
    seed: int
    schema_version: int


def read_trace_csv(path) -> TrainTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TrainTrace.HEADER:
        raise StructuralError(f"{path}: expected header {','.join(TrainTrace.HEADER)}")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 4)
    return TrainTrace(data[:, 0].astype(int), data[:, 1], data[:, 2], data[:, 3])


def load_run_record(run_dir) -> RunRecord:
    """Load a run directory written by ``betapref train``.

    Raises:
        StructuralError: missing files or an unknown metrics schema version.
    """
    run_dir = Path(run_dir)
    try:
        metrics = json.loads((run_dir / "metrics.json").read_text())
        config = json.loads((run_dir / "config.json").read_text())
    except FileNotFoundError as exc:
        raise StructuralError(f"{run_dir} is not a run directory: {exc}") from exc
    version = metrics.get("schema_version")
    if version != METRICS_SCHEMA:
        raise StructuralError(f"{run_dir}: unsupported metrics schema_version {version!r}")
    trace_path = run_dir / "trace.csv"
    trace = read_trace_csv(trace_path) if trace_path.exists() else TrainTrace(*(np.empty(0),) * 4)
    return RunRecord(config, trace, metrics, int(metrics["seed"]), version)
