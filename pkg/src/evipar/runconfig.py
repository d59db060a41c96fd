"""Run configuration files.

INI-style text, one ``key = value`` per line, four sections:

* ``[model]`` - architecture switches plus the training seed;
* ``[curriculum]`` - schedule knobs and objective toggles;
* ``[optimizer]`` - SGD hyperparameters and batch size;
* ``[data]`` - where the dataset lives.

Every key has a default, so the empty file is a valid config. Unknown
sections or keys are rejected by name rather than silently ignored, since
a typoed knob that falls back to its default is the worst kind of failed
experiment.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .curriculum import CurriculumSchedule
from .errors import ConfigError
from .trainer import TrainerConfig


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


_SCHEMA: dict[str, dict[str, type]] = {
    "model": {
        "dim": int, "blocks": int, "heads": int, "ffn_multiplier": int,
        "shared_evidence": _parse_bool, "use_raer": _parse_bool,
        "use_spm": _parse_bool, "seed": int,
    },
    "curriculum": {
        "warmup_epochs": int, "total_epochs": int, "q0": float,
        "c_lo": float, "c_hi": float, "sigma": float,
        "lambda_max": float, "lambda_awr": float,
        "use_edl": _parse_bool, "use_cl": _parse_bool,
        "use_awr": _parse_bool, "renormalize": _parse_bool,
    },
    "optimizer": {
        "lr": float, "weight_decay": float, "momentum": float,
        "batch_size": int,
    },
    "data": {"path": str},
}

_DEFAULTS: dict[str, dict] = {
    "model": {"dim": 64, "blocks": 1, "heads": 4, "ffn_multiplier": 4,
              "shared_evidence": True, "use_raer": True, "use_spm": True,
              "seed": 0},
    "curriculum": {"warmup_epochs": 12, "total_epochs": 24, "q0": 0.5,
                   "c_lo": 0.2, "c_hi": 0.6, "sigma": 0.15,
                   "lambda_max": 1.0, "lambda_awr": 0.1,
                   "use_edl": True, "use_cl": True, "use_awr": True,
                   "renormalize": False},
    "optimizer": {"lr": 6e-3, "weight_decay": 5e-4, "momentum": 0.9,
                  "batch_size": 48},
    "data": {"path": None},
}


@dataclass
class RunConfig:
    values: dict[str, dict]

    @property
    def data_path(self) -> str | None:
        return self.values["data"]["path"]

    @property
    def seed(self) -> int:
        return self.values["model"]["seed"]

    def model_overrides(self) -> dict:
        m = self.values["model"]
        return {k: m[k] for k in ("dim", "blocks", "heads", "ffn_multiplier",
                                  "shared_evidence", "use_raer", "use_spm")}

    def schedule(self) -> CurriculumSchedule:
        c = self.values["curriculum"]
        try:
            return CurriculumSchedule(
                warmup_epochs=c["warmup_epochs"], total_epochs=c["total_epochs"],
                q0=c["q0"], c_lo=c["c_lo"], c_hi=c["c_hi"], sigma=c["sigma"],
                lambda_max=c["lambda_max"], lambda_awr=c["lambda_awr"])
        except ValueError as e:
            raise ConfigError(f"[curriculum] {e}") from e

    def trainer_config(self) -> TrainerConfig:
        o = self.values["optimizer"]
        c = self.values["curriculum"]
        try:
            return TrainerConfig(
                lr=o["lr"], weight_decay=o["weight_decay"],
                momentum=o["momentum"], batch_size=o["batch_size"],
                use_edl=c["use_edl"], use_cl=c["use_cl"], use_awr=c["use_awr"],
                renormalize=c["renormalize"])
        except ValueError as e:
            raise ConfigError(f"[optimizer] {e}") from e

    def to_dict(self) -> dict:
        return {section: dict(keys) for section, keys in self.values.items()}


def default_run_config() -> RunConfig:
    return RunConfig(values={s: dict(d) for s, d in _DEFAULTS.items()})


def parse_run_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Read a config file and fold in optional {(section, key): value}
    overrides (used for command-line ablation switches)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"config {path} does not parse: {e}") from e

    config = default_run_config()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; expected one of "
                f"{sorted(_SCHEMA)}")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown key {key!r} in [{section}]; expected one of "
                    f"{sorted(_SCHEMA[section])}")
            convert = _SCHEMA[section][key]
            try:
                config.values[section][key] = convert(raw)
            except ValueError as e:
                raise ConfigError(
                    f"bad value for {key!r} in [{section}]: {e}") from e
    for (section, key), value in (overrides or {}).items():
        config.values[section][key] = value
    # construct eagerly so range errors surface at parse time; zero total
    # epochs is the documented "save the init and stop" case, which never
    # builds a schedule at all
    if config.values["curriculum"]["total_epochs"] != 0:
        config.schedule()
    config.trainer_config()
    return config
