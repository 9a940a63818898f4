"""Flat ``section.key = value`` experiment configuration files.

Absent keys take their defaults, unknown keys are rejected. ``dump_config``
writes every key so that ``parse_config(dump_config(c)) == c``.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from mbac.admission import Dispersion, Scheme
from mbac.errors import ConfigError
from mbac.experiment import ExperimentConfig
from mbac.traffic import EmissionModel


def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(key, "a real number", text) from None


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(key, "an integer", text) from None


def _bool(key, text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(key, "true or false", text)


def _enum(cls):
    def parse(key, text):
        try:
            return cls[text.strip().upper()]
        except KeyError:
            names = ", ".join(m.name for m in cls)
            raise ConfigError(key, f"one of {names}", text) from None
    return parse


def _scheme(key, text):
    try:
        return Scheme.parse(text)
    except ConfigError as exc:
        raise ConfigError(key, exc.expected, text) from None


def _items(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _tags(key, text):
    tags = tuple(_items(text))
    if not tags:
        raise ConfigError(key, "a comma-separated list of tags", text)
    return tags


def _schemes(key, text):
    return tuple(_scheme(key, t) for t in _items(text))


def _rules(key, text):
    rules = []
    for item in _items(text):
        tag, sep, name = item.partition(":")
        if not sep or not tag.strip():
            raise ConfigError(key, "comma-separated tag:SCHEME pairs", item)
        rules.append((tag.strip(), _scheme(key, name)))
    return tuple(rules)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Scheme):
        return value.label
    if hasattr(value, "name") and hasattr(value, "value"):
        return value.name
    if isinstance(value, tuple):
        parts = []
        for v in value:
            if isinstance(v, tuple):
                parts.append(f"{v[0]}:{_fmt(v[1])}")
            else:
                parts.append(_fmt(v))
        return ", ".join(parts)
    return str(value)


# key -> (sub-config attribute or None for top level, field name, parser)
KEYS = {
    "traffic.mean_interarrival": ("traffic", "mean_interarrival", _float),
    "traffic.lifetime_min_mean": ("traffic", "lifetime_min_mean", _float),
    "traffic.lifetime_max_mean": ("traffic", "lifetime_max_mean", _float),
    "traffic.avg_rate": ("traffic", "avg_rate", _float),
    "traffic.peak_rate": ("traffic", "peak_rate", _float),
    "traffic.emission_model": ("traffic", "emission_model", _enum(EmissionModel)),
    "traffic.on_mean": ("traffic", "on_mean", _float),
    "traffic.source_tags": ("traffic", "source_tags", _tags),
    "link.capacity": ("link", "capacity", _float),
    "link.tbf_rate": ("link", "tbf_rate", _float),
    "link.tbf_burst": ("link", "tbf_burst", _float),
    "link.tbf_limit": ("link", "tbf_limit", _float),
    "link.mtu": ("link", "mtu", _int),
    "sampler.sample_period": ("sampler", "sample_period", _float),
    "sampler.window_samples": ("sampler", "window_samples", _int),
    "admission.schemes": (None, "schemes", _schemes),
    "admission.theta": (None, "theta", _float),
    "geb.epsilon": ("geb", "epsilon", _float),
    "geb.dispersion_mode": ("geb", "dispersion_mode", _enum(Dispersion)),
    "ewma.beta": (None, "beta", _float),
    "policy.rules": (None, "policy_rules", _rules),
    "experiment.tick_dt": (None, "tick_dt", _float),
    "experiment.horizon": (None, "horizon", _float),
    "experiment.warmup_discard": (None, "warmup_discard", _float),
    "experiment.runs": (None, "runs", _int),
    "experiment.base_seed": (None, "base_seed", _int),
    "experiment.coupled_mode": (None, "coupled_mode", _bool),
    "experiment.authoritative_scheme": (None, "authoritative_scheme", _scheme),
    "experiment.gains_target": (None, "gains_target", _scheme),
    "experiment.ma_window": (None, "ma_window", _int),
}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}", "'section.key = value'", raw.strip())
        if key not in KEYS:
            raise ConfigError(key, "a known key (see `mbac validate-config --list`)")
        if key in values:
            raise ConfigError(key, "a single assignment")
        values[key] = KEYS[key][2](key, value)
    return build_config(values)


def build_config(values: dict) -> ExperimentConfig:
    top = {}
    nested: dict[str, dict] = {}
    for key, value in values.items():
        section, name, _ = KEYS[key]
        if section is None:
            top[name] = value
        else:
            nested.setdefault(section, {})[name] = value
    base = ExperimentConfig()
    for section, changes in nested.items():
        top[section] = replace(getattr(base, section), **changes)
    config = replace(base, **top)
    config.validate()
    return config


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(str(path), "an existing config file") from None
    return parse_config_text(text)


def config_values(config: ExperimentConfig) -> dict:
    out = {}
    for key, (section, name, _) in KEYS.items():
        holder = config if section is None else getattr(config, section)
        out[key] = getattr(holder, name)
    return out


def dump_config(config: ExperimentConfig) -> str:
    lines = [f"{key} = {_fmt(value)}" for key, value in config_values(config).items()]
    return "\n".join(lines) + "\n"

