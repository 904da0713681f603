"""Experiment configuration.

Config files are INI-style: ``[section]`` headers followed by ``key = value``
lines. Sections and keys mirror the dataclasses below and every key is
optional. Overrides use ``section.key=value``.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from .errors import ConfigError

LOSSES = ("triplet", "contrastive", "margin", "multisimilarity", "proxynca")
MINERS = ("random", "semihard", "softhard", "distance")
TARGETS = ("teacher", "hard")


@dataclass
class DataConfig:
    source: str = "synthetic"  # synthetic | csv
    path: str = ""
    num_classes: int = 40
    per_class: int = 30
    dim: int = 64
    intra_spread: float = 1.0
    inter_spread: float = 8.0
    hard_fraction: float = 0.2
    signal_dim: int = 16
    nuisance_spread: float = 3.0
    noise_ratio: float = 0.0
    train_fraction: float = 0.5


@dataclass
class ModelConfig:
    hidden: tuple = (256,)
    embed_dim: int = 128


@dataclass
class LossConfig:
    kind: str = "triplet"
    margin: float = 0.2
    contrastive_margin: float = 1.0
    beta: float = 1.2
    ms_alpha: float = 2.0
    ms_beta: float = 50.0
    ms_base: float = 0.5


@dataclass
class MinerConfig:
    kind: str = "semihard"
    margin: float = 0.2
    clip: float = 0.5


@dataclass
class LsdSection:
    enabled: bool = True
    tau: float = 1.0
    lam: float = 30000.0
    metric: str = "dot"
    targets: str = "teacher"  # teacher | hard (ablation)


@dataclass
class OptimConfig:
    lr: float = 1e-3
    weight_decay: float = 4e-4
    proxy_lr: float = 1e-2


@dataclass
class TrainConfig:
    epochs: int = 50
    classes_per_batch: int = 8
    samples_per_class: int = 4
    steps_per_epoch: int = 0  # 0: one pass worth of samples
    eval_every_epoch: bool = True
    seed: int = 0


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    miner: MinerConfig = field(default_factory=MinerConfig)
    lsd: LsdSection = field(default_factory=LsdSection)
    optim: OptimConfig = field(default_factory=OptimConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self):
        d, lo, m, l, o, t = self.data, self.loss, self.miner, self.lsd, self.optim, self.train
        checks = [
            (d.source in ("synthetic", "csv"), f"data.source must be synthetic or csv, got {d.source!r}"),
            (d.source != "csv" or d.path, "data.path is required when data.source = csv"),
            (0 <= d.noise_ratio < 1, "data.noise_ratio must lie in [0, 1)"),
            (0 < d.train_fraction < 1, "data.train_fraction must lie in (0, 1)"),
            (0 <= d.hard_fraction < 1, "data.hard_fraction must lie in [0, 1)"),
            (d.dim >= 2, "data.dim must be >= 2"),
            (1 <= d.signal_dim <= d.dim, "data.signal_dim must lie in [1, data.dim]"),
            (self.model.embed_dim >= 2, "model.embed_dim must be >= 2"),
            (all(h >= 1 for h in self.model.hidden), "model.hidden sizes must be >= 1"),
            (lo.kind in LOSSES, f"loss.kind must be one of {LOSSES}"),
            (m.kind in MINERS, f"miner.kind must be one of {MINERS}"),
            (m.margin > 0 and m.clip > 0, "miner.margin and miner.clip must be > 0"),
            (l.tau > 0, "lsd.tau must be > 0"),
            (l.lam >= 0, "lsd.lam must be >= 0"),
            (l.metric in ("dot", "euclidean"), "lsd.metric must be dot or euclidean"),
            (l.targets in TARGETS, f"lsd.targets must be one of {TARGETS}"),
            (o.lr > 0 and o.weight_decay >= 0, "optim.lr must be > 0, weight_decay >= 0"),
            (t.epochs >= 1, "train.epochs must be >= 1"),
            (t.classes_per_batch >= 2 and t.samples_per_class >= 2, "batch needs >= 2 classes x >= 2 samples"),
            (t.steps_per_epoch >= 0, "train.steps_per_epoch must be >= 0"),
            (0 <= t.seed < 2**64, "train.seed must be an unsigned 64-bit integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    # -- text round trip -------------------------------------------------

    def to_text(self):
        cp = configparser.ConfigParser()
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            cp[f.name] = {k.name: _fmt(getattr(section, k.name)) for k in dataclasses.fields(section)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text, overrides=()):
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        cfg = cls()
        for section in cp.sections():
            for key, value in cp[section].items():
                cfg.set(f"{section}.{key}", value)
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, value = item.split("=", 1)
            cfg.set(key.strip(), value.strip())
        return cfg.validate()

    @classmethod
    def load(cls, path=None, overrides=()):
        text = ""
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, overrides)

    def set(self, dotted, value):
        if "." not in dotted:
            raise ConfigError(f"key {dotted!r} must be section.key")
        section_name, key = dotted.split(".", 1)
        section = getattr(self, section_name, None)
        if section is None or not dataclasses.is_dataclass(section):
            raise ConfigError(f"unknown config section {section_name!r}")
        fields = {f.name: f for f in dataclasses.fields(section)}
        if key not in fields:
            raise ConfigError(f"unknown key {dotted!r}")
        setattr(section, key, _parse(value, type(getattr(section, key)), dotted))
        return self

    def with_overrides(self, **dotted):
        """Copy with ``section__key=value`` keyword overrides applied."""
        cfg = ExperimentConfig.from_text(self.to_text())
        for k, v in dotted.items():
            cfg.set(k.replace("__", "."), v if isinstance(v, str) else _fmt(v))
        return cfg.validate()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(value, kind, key):
    if not isinstance(value, str):
        value = _fmt(value)
    try:
        if kind is bool:
            low = value.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                raise ValueError(value)
            return low in ("true", "1", "yes", "on")
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        if kind is tuple:
            return tuple(int(x) for x in value.split(",") if x.strip())
        return value.strip()
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {key}") from None
