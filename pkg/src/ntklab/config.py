"""Experiment configuration: an INI-style file with sections, every key
overridable from the command line (flags win)."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .data import Dataset, load_csv, synthetic
from .ntk import LambdaConvention, Method


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


DEFAULT_WIDTHS = [256, 1024, 4096, 16384]
DEFAULT_SEEDS = [0, 1, 2, 3, 4]


@dataclass
class ExperimentConfig:
    # dataset: either a CSV path or synthetic parameters
    csv_path: str | None = None
    label_column: int = -1
    positive_class: str | None = None
    regression: bool = False
    n: int = 50
    d: int = 10
    data_seed: int = 0
    # run
    methods: list[Method] = field(default_factory=lambda: [Method.GD, Method.HB, Method.NAG])
    widths: list[int] = field(default_factory=lambda: list(DEFAULT_WIDTHS))
    seeds: list[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    iterations: int = 500
    stride: int = 10
    lambda_convention: LambdaConvention = LambdaConvention.TABLE1
    threshold_frac: float = 1e-3
    # output
    outdir: str = "runs"

    def validate(self):
        if not self.widths or not self.seeds:
            raise ConfigError("widths and seeds must be nonempty")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not self.methods:
            raise ConfigError("method set is empty")

    def load_dataset(self) -> Dataset:
        if self.csv_path:
            return load_csv(
                self.csv_path,
                label_column=self.label_column,
                positive_class=self.positive_class,
                regression=self.regression,
            )
        return synthetic(self.n, self.d, self.data_seed)


def _parse_list(raw: str, cast):
    return [cast(v) for v in raw.replace(",", " ").split()]


def read_config(path: str | Path) -> ExperimentConfig:
    """Parse a sectioned key = value config file."""
    cp = configparser.ConfigParser()
    read = cp.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = ExperimentConfig()
    try:
        if cp.has_section("dataset"):
            ds = cp["dataset"]
            cfg.csv_path = ds.get("path", cfg.csv_path)
            cfg.label_column = ds.getint("label_column", cfg.label_column)
            cfg.positive_class = ds.get("positive_class", cfg.positive_class)
            cfg.regression = ds.getboolean("regression", cfg.regression)
            cfg.n = ds.getint("n", cfg.n)
            cfg.d = ds.getint("d", cfg.d)
            cfg.data_seed = ds.getint("seed", cfg.data_seed)
        if cp.has_section("run"):
            run = cp["run"]
            if "methods" in run:
                cfg.methods = [Method(v.lower()) for v in _parse_list(run["methods"], str)]
            if "widths" in run:
                cfg.widths = _parse_list(run["widths"], int)
            if "seeds" in run:
                cfg.seeds = _parse_list(run["seeds"], int)
            cfg.iterations = run.getint("iterations", cfg.iterations)
            cfg.stride = run.getint("stride", cfg.stride)
            if "lambda_convention" in run:
                cfg.lambda_convention = LambdaConvention(run["lambda_convention"].lower())
            cfg.threshold_frac = run.getfloat("threshold_frac", cfg.threshold_frac)
        if cp.has_section("output"):
            cfg.outdir = cp["output"].get("dir", cfg.outdir)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg
