"""Experiment configuration: TOML text in, validated frozen config out.

Schema (every key optional except ``experiment``)::

    experiment = "commuting"        # gen | commuting | compare | image
    seed = 0                        # 64-bit run seed
    seeds = [0, 1, 2]               # compare: one run per seed (default: 8 seeds from `seed`)
    m = 50                          # number of measurements
    K = 2                           # neurons (image default 4)
    activation = "tanh"             # tanh | tanh_pos | sigmoid | smoothed_clipped_relu
    activation_clamped = false      # tanh only: clamp below at 0
    lr = [1e-1, 1e-2]               # SNN learning rates / flow step sizes, one run each
    n_steps = 100000
    noise_std = 0.01
    phi_psi_source = "svd_of_target"   # or "random_orthogonal"
    gradient_mode = "analytic"      # or "finite_difference"
    scheme = "euler"                # commuting: euler | rk4
    output_dir = "runs/commuting"
    record_stride = 100
    image = "glyph_ring_10.pgm"     # image: bundled glyph name or a path
    snapshot_steps = [0, 500, 5000]
    init_scale = 1e-4               # near-zero init for the general setting
    init_jitter = 1e-6
    models = ["snn", "linear", "depth3"]
    kind = "gaussian"               # gen: gaussian | commuting
    ensemble = "runs/gen/ensemble_seed{seed}.npz"   # compare/image: reuse ensembles written by `gen`

    [dims]
    d1 = 10
    d2 = 10
    d = 10                          # inner width of U_k, V_k
    inner_dim = 6                   # rank of the synthetic ground truth

    [baselines]
    linear_lr = [1e-3]
    linear_n_steps = 5000
    depth3_lr = [1e-2]
    depth3_n_steps = 50000
"""

import dataclasses
import hashlib
import json
import re
import sys

from .activations import CATALOGUE
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("gen", "commuting", "compare", "image")
MODELS = ("snn", "linear", "depth3")
GRADIENT_MODES = ("finite_difference", "analytic")
SCHEMES = ("euler", "rk4")
PHI_PSI_SOURCES = ("svd_of_target", "random_orthogonal")
KINDS = ("gaussian", "commuting")
DEFAULT_IMAGE = "glyph_ring_10.pgm"

_DEFAULTS = {
    "gen": {"lr": (1e-2,), "n_steps": 1, "noise_std": 0.0, "record_stride": 1},
    "commuting": {"lr": (1e-1, 1e-2, 1e-3, 1e-4), "n_steps": 100_000, "noise_std": 1e-2, "record_stride": 100},
    "compare": {"lr": (1e-2,), "n_steps": 5000, "noise_std": 0.0, "record_stride": 50},
    "image": {"lr": (1e-2,), "n_steps": 5000, "noise_std": 0.0, "record_stride": 50},
}


@dataclasses.dataclass(frozen=True)
class Dims:
    d1: int = 10
    d2: int = 10
    d: int = 10
    inner_dim: int = 6


@dataclasses.dataclass(frozen=True)
class Baselines:
    linear_lr: tuple = (1e-3,)
    linear_n_steps: int = 5000
    depth3_lr: tuple = (1e-2,)
    depth3_n_steps: int = 50_000


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    seeds: tuple | None = None
    dims: Dims = Dims()
    m: int = 50
    K: int | None = None
    activation: str = "tanh"
    activation_clamped: bool = False
    lr: tuple | None = None
    n_steps: int | None = None
    noise_std: float | None = None
    phi_psi_source: str = "svd_of_target"
    gradient_mode: str = "analytic"
    scheme: str = "euler"
    output_dir: str = ""
    record_stride: int | None = None
    image: str = DEFAULT_IMAGE
    snapshot_steps: tuple | None = None
    init_scale: float = 1e-4
    init_jitter: float = 1e-6
    models: tuple | None = None
    kind: str = "gaussian"
    ensemble: str = ""
    baselines: Baselines = Baselines()

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        """sha256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kw):
        return validate(dataclasses.replace(self, **kw))


_TOP_TYPES = {
    "experiment": str,
    "seed": int,
    "seeds": "ints",
    "dims": dict,
    "m": int,
    "K": int,
    "activation": str,
    "activation_clamped": bool,
    "lr": "floats",
    "n_steps": int,
    "noise_std": float,
    "phi_psi_source": str,
    "gradient_mode": str,
    "scheme": str,
    "output_dir": str,
    "record_stride": int,
    "image": str,
    "snapshot_steps": "ints",
    "init_scale": float,
    "init_jitter": float,
    "models": "strs",
    "kind": str,
    "ensemble": str,
    "baselines": dict,
}
_DIMS_TYPES = {"d1": int, "d2": int, "d": int, "inner_dim": int}
_BASELINE_TYPES = {"linear_lr": "floats", "linear_n_steps": int, "depth3_lr": "floats", "depth3_n_steps": int}


def _coerce(field, value, kind):
    if kind == "floats":
        value = [value] if isinstance(value, (int, float)) and not isinstance(value, bool) else value
        if not isinstance(value, list):
            raise ConfigError(f"{field} must be a number or a list of numbers", field=field)
        return tuple(_coerce(field, v, float) for v in value)
    if kind == "ints":
        if not isinstance(value, list):
            raise ConfigError(f"{field} must be a list of integers", field=field)
        return tuple(_coerce(field, v, int) for v in value)
    if kind == "strs":
        if not isinstance(value, list):
            raise ConfigError(f"{field} must be a list of strings", field=field)
        return tuple(_coerce(field, v, str) for v in value)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if (kind is int and isinstance(value, bool)) or not isinstance(value, kind):
        raise ConfigError(f"{field} must be of type {kind.__name__}, got {type(value).__name__}", field=field)
    return value


def _table(raw, types, prefix=""):
    out = {}
    for key, value in raw.items():
        name = prefix + key
        if key not in types:
            raise ConfigError(f"unknown key {name!r}", field=name)
        if types[key] is dict:
            out[key] = value
            if not isinstance(value, dict):
                raise ConfigError(f"{name} must be a table", field=name)
        else:
            out[key] = _coerce(name, value, types[key])
    return out


def _decode_line(exc):
    line = getattr(exc, "lineno", None)
    if line is None:
        found = re.search(r"line (\d+)", str(exc))
        line = int(found.group(1)) if found else None
    return line


def parse_config(text):
    """Parse and validate TOML config text; missing keys take per-experiment defaults."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = _decode_line(exc)
        raise ConfigError(f"config parse error: {exc}", line=line) from None
    fields = _table(raw, _TOP_TYPES)
    if "experiment" not in fields:
        raise ConfigError("missing required key 'experiment'", field="experiment")
    exp = fields["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}", field="experiment")
    if "dims" in fields:
        fields["dims"] = Dims(**_table(fields["dims"], _DIMS_TYPES, "dims."))
    if "baselines" in fields:
        fields["baselines"] = Baselines(**_table(fields["baselines"], _BASELINE_TYPES, "baselines."))
    return validate(ExperimentConfig(**fields))


def load_config(path):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from None
    return parse_config(text)


def _fill_defaults(cfg):
    exp = cfg.experiment
    fill = {k: v for k, v in _DEFAULTS[exp].items() if getattr(cfg, k) is None}
    if cfg.seeds is None:
        fill["seeds"] = tuple(cfg.seed + i for i in range(8)) if exp == "compare" else (cfg.seed,)
    if not cfg.output_dir:
        fill["output_dir"] = f"runs/{exp}"
    if cfg.models is None:
        fill["models"] = ("snn", "linear", "depth3") if exp == "compare" else ("snn", "linear")
    if cfg.K is None:
        fill["K"] = 4 if exp == "image" else 2
    cfg = dataclasses.replace(cfg, **fill)
    if cfg.snapshot_steps is None:
        n = cfg.n_steps
        steps = tuple(sorted({0, n // 10, n // 2, n})) if exp == "image" else ()
        cfg = dataclasses.replace(cfg, snapshot_steps=steps)
    return cfg


def _need(cond, field, message):
    if not cond:
        raise ConfigError(f"{field}: {message}", field=field)


def validate(cfg):
    """Fill defaults and check ranges; raises ``ConfigError`` naming the offending field."""
    cfg = _fill_defaults(cfg)
    _need(cfg.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
    for f in ("d1", "d2", "d", "inner_dim"):
        _need(getattr(cfg.dims, f) >= 1, f"dims.{f}", "must be positive")
    for f in ("m", "K", "n_steps", "record_stride"):
        _need(getattr(cfg, f) >= 1, f, "must be positive")
    for s in (cfg.seed, *cfg.seeds):
        _need(0 <= s < 2**64, "seed", "must fit in 64 unsigned bits")
    _need(len(cfg.seeds) > 0, "seeds", "needs at least one seed")
    _need(len(cfg.models) > 0, "models", "needs at least one model")
    _need(len(cfg.lr) > 0, "lr", "needs at least one learning rate")
    _need(all(v > 0 for v in cfg.lr), "lr", "learning rates must be positive")
    _need(cfg.noise_std >= 0, "noise_std", "must be non-negative")
    _need(cfg.init_scale > 0 and cfg.init_jitter >= 0, "init_scale", "scale must be positive, jitter non-negative")
    _need(cfg.activation in CATALOGUE, "activation", f"must be one of {sorted(CATALOGUE)}")
    _need(cfg.gradient_mode in GRADIENT_MODES, "gradient_mode", f"must be one of {GRADIENT_MODES}")
    _need(cfg.scheme in SCHEMES, "scheme", f"must be one of {SCHEMES}")
    _need(cfg.phi_psi_source in PHI_PSI_SOURCES, "phi_psi_source", f"must be one of {PHI_PSI_SOURCES}")
    _need(cfg.kind in KINDS, "kind", f"must be one of {KINDS}")
    _need(all(mm in MODELS for mm in cfg.models), "models", f"entries must be among {MODELS}")
    _need(all(0 <= s <= cfg.n_steps for s in cfg.snapshot_steps), "snapshot_steps", "must lie in [0, n_steps]")
    b = cfg.baselines
    _need(len(b.linear_lr) > 0 and all(v > 0 for v in b.linear_lr), "baselines.linear_lr", "needs positive rates")
    _need(len(b.depth3_lr) > 0 and all(v > 0 for v in b.depth3_lr), "baselines.depth3_lr", "needs positive rates")
    _need(b.linear_n_steps >= 1 and b.depth3_n_steps >= 1, "baselines", "step counts must be positive")
    if cfg.experiment == "commuting" or (cfg.experiment == "gen" and cfg.kind == "commuting"):
        _need(cfg.dims.d1 <= cfg.dims.d2, "dims.d1", "commuting ensembles need d1 <= d2")
        _need(cfg.m >= cfg.dims.d1, "m", "commuting ensembles need m >= d1")
    if cfg.experiment == "commuting":
        _need(cfg.dims.d >= cfg.dims.d2, "dims.d", "spectral init needs d >= d2")
    return cfg


@dataclasses.dataclass(frozen=True)
class SweepCell:
    model: str
    lr: float
    seed: int
    n_steps: int

    @property
    def tag(self):
        return f"{self.model}_lr{self.lr:g}_seed{self.seed}"


def sweep_plan(cfg):
    """Independent (model, lr, seed) runs implied by ``cfg``."""
    cells = []
    models = ("snn",) if cfg.experiment == "commuting" else cfg.models
    for seed in cfg.seeds:
        for model in models:
            if model == "snn":
                rates, steps = cfg.lr, cfg.n_steps
            elif model == "linear":
                rates, steps = cfg.baselines.linear_lr, cfg.baselines.linear_n_steps
            else:
                rates, steps = cfg.baselines.depth3_lr, cfg.baselines.depth3_n_steps
            cells.extend(SweepCell(model, lr, seed, steps) for lr in rates)
    return cells
