"""Flat INI configuration with one section per subsystem, plus command-line
overrides (`--set section.key=value`). Defaults live on the dataclasses; a
config file and overrides change only the keys they mention."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from typing import get_args, get_origin

from .gcn import ModelConfig
from .pipeline import EvalConfig, InferConfig, TrainConfig
from .synth import NoiseConfig, SynthConfig


@dataclass(frozen=True)
class Config:
    synth: SynthConfig
    detector: NoiseConfig
    model: ModelConfig
    train: TrainConfig
    infer: InferConfig
    eval: EvalConfig


_SECTIONS = {
    "synth": "synth",
    "detector": "detector",
    "model": "model",
    "train": "train",
    "infer": "infer",
    "eval": "eval",
}


def default_config() -> Config:
    return Config(
        synth=SynthConfig(),
        detector=NoiseConfig(),
        model=ModelConfig(),
        train=TrainConfig(),
        infer=InferConfig(),
        eval=EvalConfig(),
    )


def _coerce(raw: str, default):
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        elems = [x for x in raw.replace(" ", "").split(",") if x]
        elem_type = type(default[0]) if default else int
        return tuple(elem_type(x) for x in elems)
    return raw


def _set_key(section_cfg, key: str, raw: str):
    for f in fields(section_cfg):
        if f.name == key:
            return replace(section_cfg, **{key: _coerce(raw, getattr(section_cfg, key))})
    raise KeyError(f"unknown config key {key!r} in section [{type(section_cfg).__name__}]")


def load_config(path: str | None) -> Config:
    cfg = default_config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    for section in parser.sections():
        if section not in _SECTIONS:
            raise KeyError(f"unknown config section [{section}]")
        sub = getattr(cfg, _SECTIONS[section])
        for key, raw in parser.items(section):
            sub = _set_key(sub, key, raw)
        cfg = replace(cfg, **{_SECTIONS[section]: sub})
    return cfg


def apply_overrides(cfg: Config, overrides: list[str]) -> Config:
    """Each override is section.key=value; later entries win."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in _SECTIONS:
            raise KeyError(f"unknown config section {section!r}")
        sub = _set_key(getattr(cfg, _SECTIONS[section]), key, raw)
        cfg = replace(cfg, **{_SECTIONS[section]: sub})
    return cfg
