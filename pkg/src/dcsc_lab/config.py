"""Experiment configuration files.

Grammar (INI, keys are case-sensitive)::

    [network]
    M = 16            ; spatial positions
    d = 4             ; columns per trial
    zeta_0 = 0.05     ; worst patch 2-norm of the input noise
    L = 2             ; optional, must match the number of layer sections
    delta = 0.05      ; optional, failure level for admissible sparsity
    density = 1.0     ; optional, keep-probability when drawing the deepest support

    [layer.1]
    m = 8             ; atom length
    n = 2             ; atoms per position
    S = 3             ; stripe sparsity budget
    x_min = 0.5
    x_max = 1.0
    s = 1             ; optional stride (default 1 at layer 1, n_{l-1} after)
    dict = a1.csv     ; optional local dictionary file, relative to the config
    draws = 20        ; optional: keep the least coherent of this many Gaussian draws

    [experiment]      ; optional defaults, overridden by CLI flags
    trials = 1000
    seed = 7
    workers = 1

    [sweep]           ; optional; comma lists, expanded as a Cartesian product
    zeta_0 = 0, 0.05, 0.1
    layer.1.S = 1, 2, 3
"""
from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

from .conv_dict import LocalDictionary
from .errors import InfeasibleConfig, InvalidSpec, IOFailure
from .generator import LayerSpec, NetworkSpec

LAYER_INT_KEYS = {"m", "n", "S", "s"}
LAYER_FLOAT_KEYS = {"x_min", "x_max"}
NETWORK_INT_KEYS = {"M", "d"}
NETWORK_FLOAT_KEYS = {"zeta_0", "density"}


@dataclass(frozen=True)
class LocalSource:
    """Where a layer's local dictionary comes from."""

    path: Path | None = None
    draws: int = 1


@dataclass
class ExperimentConfig:
    spec: NetworkSpec
    num_trials: int = 1
    root_seed: int = 0
    sweep: dict[str, list] | None = None
    output_path: Path | None = None
    workers: int = 1
    delta: float = 0.05
    sources: tuple[LocalSource, ...] = ()
    # explicit local dictionaries by layer index, bypassing ``sources``
    local_overrides: dict[int, LocalDictionary] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_trials < 1:
            raise InfeasibleConfig("num_trials must be >= 1")
        if not 0 < self.delta < 1:
            raise InfeasibleConfig("delta must lie in (0, 1)")
        if self.workers < 1:
            raise InfeasibleConfig("workers must be >= 1")
        if not self.sources:
            self.sources = tuple(LocalSource() for _ in self.spec.layers)

    def source(self, l: int) -> LocalSource:
        return self.sources[l - 1] if l <= len(self.sources) else LocalSource()


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    return cp


def _num(key, raw, ints, floats, where):
    try:
        if key in ints:
            return int(raw)
        if key in floats:
            return float(raw)
    except ValueError as exc:
        raise InvalidSpec(f"{where}: bad value {raw!r} for {key}") from exc
    raise InvalidSpec(f"{where}: unknown key {key!r}")


def parse_config_text(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidSpec(str(exc)) from exc
    if "network" not in cp:
        raise InvalidSpec("missing [network] section")
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    net = cp["network"]
    M = _num("M", net.get("M"), NETWORK_INT_KEYS, set(), "[network]")
    d = _num("d", net.get("d", "1"), NETWORK_INT_KEYS, set(), "[network]")
    zeta_0 = float(net.get("zeta_0", "0"))
    delta = float(net.get("delta", "0.05"))
    density = float(net.get("density", "1.0"))

    layer_ids = sorted(int(s.split(".", 1)[1]) for s in cp.sections() if s.startswith("layer."))
    if layer_ids != list(range(1, len(layer_ids) + 1)) or not layer_ids:
        raise InvalidSpec(f"layer sections must be numbered 1..L, got {layer_ids}")
    if "L" in net and int(net["L"]) != len(layer_ids):
        raise InvalidSpec(f"L={net['L']} but {len(layer_ids)} layer sections given")

    layers, sources = [], []
    for l in layer_ids:
        sec = cp[f"layer.{l}"]
        vals = {}
        for key in ("m", "n", "S", "s", "x_min", "x_max"):
            if key in sec:
                vals[key] = _num(key, sec[key], LAYER_INT_KEYS, LAYER_FLOAT_KEYS, f"[layer.{l}]")
        missing = {"m", "n", "S", "x_min", "x_max"} - vals.keys()
        if missing:
            raise InvalidSpec(f"[layer.{l}] missing {sorted(missing)}")
        unknown = set(sec) - {"m", "n", "S", "s", "x_min", "x_max", "dict", "draws"}
        if unknown:
            raise InvalidSpec(f"[layer.{l}] unknown keys {sorted(unknown)}")
        layers.append(LayerSpec(**vals))
        path = sec.get("dict")
        sources.append(LocalSource(base_dir / path if path else None, int(sec.get("draws", "1"))))

    spec = NetworkSpec(M=M, d=d, layers=tuple(layers), zeta_0=zeta_0, density=density)

    exp = cp["experiment"] if "experiment" in cp else {}
    sweep = None
    if "sweep" in cp:
        sweep = {}
        for key, raw in cp["sweep"].items():
            sweep[key] = [v.strip() for v in raw.split(",") if v.strip()]
        _check_sweep_keys(sweep, len(layers))
    return ExperimentConfig(
        spec=spec,
        num_trials=int(exp.get("trials", 1)),
        root_seed=int(exp.get("seed", 0)),
        workers=int(exp.get("workers", 1)),
        sweep=sweep,
        delta=delta,
        sources=tuple(sources),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    return parse_config_text(text, base_dir=path.parent)


def _check_sweep_keys(sweep, L):
    for key in sweep:
        if key in ("zeta_0", "delta", "d", "M", "density"):
            continue
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "layer" and parts[1].isdigit() and 1 <= int(parts[1]) <= L:
            if parts[2] in LAYER_INT_KEYS | LAYER_FLOAT_KEYS:
                continue
        raise InvalidSpec(f"[sweep] unknown key {key!r}")


@dataclass(frozen=True)
class SweepPoint:
    index: int
    label: dict
    spec: NetworkSpec
    delta: float


def apply_overrides(spec: NetworkSpec, overrides: dict) -> tuple[NetworkSpec, float | None]:
    """Return a copy of ``spec`` with ``overrides`` (sweep-style keys) applied."""
    net = {}
    delta = None
    layers = list(spec.layers)
    for key, raw in overrides.items():
        if key == "delta":
            delta = float(raw)
        elif key in NETWORK_INT_KEYS | NETWORK_FLOAT_KEYS:
            net[key] = _num(key, raw, NETWORK_INT_KEYS, NETWORK_FLOAT_KEYS, "[sweep]")
        else:
            _, l, field_name = key.split(".")
            l = int(l)
            value = _num(field_name, raw, LAYER_INT_KEYS, LAYER_FLOAT_KEYS, "[sweep]")
            layers[l - 1] = replace(layers[l - 1], **{field_name: value})
    return replace(spec, layers=tuple(layers), **net), delta


def sweep_points(config: ExperimentConfig) -> list[SweepPoint]:
    if not config.sweep:
        return [SweepPoint(0, {}, config.spec, config.delta)]
    keys = list(config.sweep)
    points = []
    for i, combo in enumerate(itertools.product(*(config.sweep[k] for k in keys))):
        label = dict(zip(keys, combo))
        spec, delta = apply_overrides(config.spec, label)
        points.append(SweepPoint(i, label, spec, config.delta if delta is None else delta))
    return points
