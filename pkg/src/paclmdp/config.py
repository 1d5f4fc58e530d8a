"""Experiment configuration: typed keys, a key=value file format, presets.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
Unset sizing and evaluation keys resolve to per-domain defaults via
:func:`resolve`.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass
class ExperimentConfig:
    domain: str = "pendulum"
    method: str = "pac"  # pac | zlearning
    approx: str = "rbf"  # rbf | mlp
    iterations: int = 200_000
    seed: int = 0
    alpha1: float = 0.1
    alpha2: float = 0.1
    beta: float = 0.05
    decay_tau: float = 0.0  # 0 disables 1/(1+i/tau) rate decay
    critic_c: float = 0.0  # 0 means auto: the volume of the data bounding box
    rbf_counts: tuple = ()
    mlp_hidden: tuple = (200, 200, 50)
    out_act: str = ""  # "" resolves per domain
    gradient_mode: str = "full"  # full | semi
    cost_mode: str = ""  # "" resolves per domain
    dataset_size: int = 100_000
    sample_box_scale: float = 1.0
    reset_steps: int = 200
    eval_window_s: float = 0.0  # 0 resolves per domain
    eval_starts: int = 40
    checkpoints: int = 50
    action_clamp: float = 0.0  # 0 means unclamped
    alpha2_normalize: bool = True
    data: str = "simulator"  # "simulator" or a trajectory CSV path
    folds: int = 0  # >= 2 enables k-fold replay evaluation
    out: str = "run_out"
    trace_interval: int = 0  # > 0 emits trace rows every that many iterations

    def __post_init__(self):
        if self.method not in ("pac", "zlearning"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.approx not in ("rbf", "mlp"):
            raise ValueError(f"unknown approximator {self.approx!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        for key in ("alpha1", "alpha2", "beta"):
            if getattr(self, key) <= 0.0:
                raise ValueError(f"{key} must be positive")
        if self.eval_window_s < 0.0:
            raise ValueError("eval_window_s must be positive (0 = domain default)")
        if self.gradient_mode not in ("full", "semi"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")


# Per-domain fallbacks for keys left at their unset markers.
_DOMAIN_DEFAULTS = {
    "car_on_hill": {
        "out_act": "tanh",
        "cost_mode": "offset",
        "rbf_counts": (20, 20),
        "eval_window_s": 10.0,
    },
    "pendulum": {
        "out_act": "softplus",
        "cost_mode": "offset",
        "rbf_counts": (20, 20),
        "eval_window_s": 10.0,
    },
    "merge": {
        "out_act": "softplus",
        "cost_mode": "clamp",
        "rbf_counts": (8, 8, 8, 8),
        "eval_window_s": 30.0,
    },
}

# Calibrated training presets (domain, approx) -> overrides.
_PRESETS = {
    ("car_on_hill", "rbf"): {"alpha1": 0.05, "alpha2": 0.3, "beta": 0.03,
                             "decay_tau": 50_000.0, "action_clamp": 10.0},
    ("pendulum", "rbf"): {"alpha1": 0.05, "alpha2": 0.3, "beta": 0.03,
                          "decay_tau": 50_000.0, "action_clamp": 10.0},
    ("merge", "rbf"): {"alpha1": 0.05, "alpha2": 0.3, "beta": 0.01,
                       "decay_tau": 50_000.0, "action_clamp": 8.0,
                       "dataset_size": 200_000, "reset_steps": 120},
    ("car_on_hill", "mlp"): {"alpha1": 0.05, "alpha2": 0.1, "beta": 0.03,
                             "decay_tau": 50_000.0, "action_clamp": 10.0},
    ("pendulum", "mlp"): {"alpha1": 0.05, "alpha2": 0.1, "beta": 0.03,
                          "decay_tau": 50_000.0, "action_clamp": 10.0},
    ("merge", "mlp"): {"alpha1": 0.05, "alpha2": 0.1, "beta": 0.01,
                       "decay_tau": 50_000.0, "action_clamp": 8.0,
                       "dataset_size": 200_000, "reset_steps": 120},
}


def resolve(config: ExperimentConfig) -> ExperimentConfig:
    """Fill domain-dependent defaults for keys left at their unset markers."""
    if config.domain not in _DOMAIN_DEFAULTS:
        raise ValueError(f"unknown domain {config.domain!r}")
    out = {}
    for key, value in _DOMAIN_DEFAULTS[config.domain].items():
        current = getattr(config, key)
        if current == "" or current == () or current == 0.0:
            out[key] = value
    return replace(config, **out) if out else config


def defaults_for(domain: str, method: str = "pac", approx: str = "rbf") -> ExperimentConfig:
    """Calibrated starting configuration for a domain/approximator pair."""
    overrides = _PRESETS.get((domain, approx), {})
    return resolve(ExperimentConfig(domain=domain, method=method, approx=approx, **overrides))


def _parse_value(name: str, kind, raw: str):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        return tuple(int(v) for v in raw.split(",") if v.strip()) if raw else ()
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines into a configuration."""
    kinds = {f.name: type(f.default) for f in fields(ExperimentConfig)}
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {line_no}: expected key = value")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in kinds:
            raise ValueError(f"line {line_no}: unknown key {key!r}")
        values[key] = _parse_value(key, kinds[key], raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(config: ExperimentConfig) -> str:
    """Render a configuration as the key=value text format (parses back equal)."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            rendered = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"
