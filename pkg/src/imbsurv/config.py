"""Run configuration: TOML (or the same schema as JSON) to typed objects.

See the README for the full grammar. Every validation failure raises
:class:`ConfigError` whose ``key`` is the dotted path of the offending entry.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ._rng import check_seed
from .data import DEFAULT_MISSING, HorizonSpec
from .errors import ConfigError
from .models import FitConfig
from .sampling import SamplerStage

MANIFEST_SCHEMA = "v1"

_TOP = {"seed", "data", "preprocess", "screen", "samplers", "models", "evaluation", "output"}
_SECTIONS = {
    "data": {"path", "kind", "features", "label_source", "label_column", "missing_tokens",
             "horizon_years", "cutoff_inclusive"},
    "preprocess": {"merge_threshold", "filters"},
    "screen": {"alpha", "apply"},
    "evaluation": {"k", "threshold", "aggregation", "resample_before_cv", "samplers", "models"},
    "output": {"dir"},
}
_STAGE_KEYS = {"kind", "k", "max_iter", "target_ratio", "mode", "strict_unanimous"}


@dataclass
class RangeFilter:
    column: str
    lo: float
    hi: float


@dataclass
class RunConfig:
    seed: int
    data_path: Path
    kind: str = "categorical"
    features: Optional[list[str]] = None
    label_source: str = "survival_months"
    label_column: str = "label"
    missing_tokens: frozenset = DEFAULT_MISSING
    horizon: HorizonSpec = field(default_factory=lambda: HorizonSpec(1))
    cutoff_inclusive: bool = False
    merge_threshold: Optional[float] = 0.02
    filters: list[RangeFilter] = field(default_factory=list)
    alpha: float = 0.05
    apply_screen: bool = False
    samplers: dict[str, list[SamplerStage]] = field(default_factory=dict)
    models: dict[str, FitConfig] = field(default_factory=dict)
    k: int = 5
    threshold: float = 0.5
    aggregation: str = "mean"
    resample_before_cv: bool = False
    eval_samplers: Optional[list[str]] = None
    eval_models: Optional[list[str]] = None
    output_dir: Path = Path("out")
    raw: dict = field(default_factory=dict)

    def sampler(self, name: str, key: str = "sampler") -> list[SamplerStage]:
        if name not in self.samplers:
            raise ConfigError(f"unknown sampler {name!r}", key=key)
        return self.samplers[name]

    def model(self, name: str, key: str = "model") -> FitConfig:
        if name not in self.models:
            raise ConfigError(f"unknown model {name!r}", key=key)
        return self.models[name]

    def echo(self) -> dict:
        """The raw config with the data path made absolute."""
        d = json.loads(json.dumps(self.raw))
        d.setdefault("data", {})["path"] = str(self.data_path)
        return d


def _check_keys(d: dict, allowed: set, prefix: str):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key {prefix}{key!r}", key=f"{prefix}{key}")


def _get(d: dict, key: str, typ, prefix: str, default: Any = None):
    if key not in d:
        return default
    v = d[key]
    ok = isinstance(v, typ) and not (isinstance(v, bool) and typ in (int, float, (int, float)))
    if not ok:
        raise ConfigError(f"{prefix}{key} has the wrong type ({type(v).__name__})", key=f"{prefix}{key}")
    return v


def read_config_file(path) -> tuple[dict, Path]:
    """Parse TOML or JSON. A manifest written by a previous run is accepted
    too; its embedded config is used."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", key="config") from None
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}", key="config") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table/object", key="config")
    if raw.get("manifest") == MANIFEST_SCHEMA and "config" in raw:
        raw = raw["config"]
    return raw, path.resolve().parent


def parse_config(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    _check_keys(raw, _TOP, "")
    if "seed" not in raw:
        raise ConfigError("seed is required", key="seed")
    seed = raw["seed"]
    try:
        check_seed(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key="seed") from None

    sections = {}
    for name, allowed in _SECTIONS.items():
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"{name} must be a table", key=name)
        _check_keys(sec, allowed, f"{name}.")
        sections[name] = sec

    data = sections["data"]
    path = _get(data, "path", str, "data.")
    if path is None:
        raise ConfigError("data.path is required", key="data.path")
    data_path = Path(path)
    if not data_path.is_absolute():
        data_path = (base_dir / data_path).resolve()
    kind = _get(data, "kind", str, "data.", "categorical")
    if kind not in ("categorical", "numeric"):
        raise ConfigError("data.kind must be 'categorical' or 'numeric'", key="data.kind")
    features = _get(data, "features", list, "data.")
    if features is not None and not all(isinstance(f, str) for f in features):
        raise ConfigError("data.features must be a list of names", key="data.features")
    years = _get(data, "horizon_years", int, "data.", 1)
    try:
        horizon = HorizonSpec(years)
    except ValueError as exc:
        raise ConfigError(str(exc), key="data.horizon_years") from None

    pre = sections["preprocess"]
    merge = pre.get("merge_threshold", 0.02)
    if merge is not None and (isinstance(merge, bool) or not isinstance(merge, (int, float)) or not 0 < merge < 1):
        raise ConfigError("preprocess.merge_threshold must lie in (0, 1)", key="preprocess.merge_threshold")
    filters = []
    for i, f in enumerate(_get(pre, "filters", list, "preprocess.", [])):
        key = f"preprocess.filters[{i}]"
        if not isinstance(f, dict) or set(f) != {"column", "lo", "hi"}:
            raise ConfigError(f"{key} needs exactly column, lo, hi", key=key)
        filters.append(RangeFilter(str(f["column"]), float(f["lo"]), float(f["hi"])))

    samplers = {}
    raw_samplers = raw.get("samplers", {})
    if not isinstance(raw_samplers, dict):
        raise ConfigError("samplers must be a table", key="samplers")
    for name, stages in raw_samplers.items():
        if not isinstance(stages, list):
            raise ConfigError(f"samplers.{name} must be a list of stages", key=f"samplers.{name}")
        parsed = []
        for i, st in enumerate(stages):
            key = f"samplers.{name}[{i}]"
            if not isinstance(st, dict):
                raise ConfigError(f"{key} must be a table", key=key)
            _check_keys(st, _STAGE_KEYS, f"{key}.")
            try:
                parsed.append(SamplerStage(**st))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}", key=key) from None
        samplers[name] = parsed

    models = {}
    raw_models = raw.get("models", {})
    if not isinstance(raw_models, dict):
        raise ConfigError("models must be a table", key="models")
    for name, m in raw_models.items():
        if not isinstance(m, dict):
            raise ConfigError(f"models.{name} must be a table", key=f"models.{name}")
        m = dict(m)
        m.setdefault("seed", seed)
        try:
            models[name] = FitConfig.from_dict(m)
        except ConfigError as exc:
            raise ConfigError(f"models.{name}: {exc}", key=f"models.{name}.{exc.key}") from None
        except TypeError as exc:
            raise ConfigError(f"models.{name}: {exc}", key=f"models.{name}") from None

    ev = sections["evaluation"]
    eval_samplers = _get(ev, "samplers", list, "evaluation.")
    eval_models = _get(ev, "models", list, "evaluation.")
    for name in eval_samplers or []:
        if name not in samplers:
            raise ConfigError(f"evaluation.samplers references unknown sampler {name!r}", key="evaluation.samplers")
    for name in eval_models or []:
        if name not in models:
            raise ConfigError(f"evaluation.models references unknown model {name!r}", key="evaluation.models")
    k = _get(ev, "k", int, "evaluation.", 5)
    if k < 2:
        raise ConfigError("evaluation.k must be >= 2", key="evaluation.k")
    threshold = float(_get(ev, "threshold", (int, float), "evaluation.", 0.5))
    if not 0 <= threshold <= 1:
        raise ConfigError("evaluation.threshold must lie in [0, 1]", key="evaluation.threshold")
    aggregation = _get(ev, "aggregation", str, "evaluation.", "mean")
    if aggregation not in ("mean", "pooled"):
        raise ConfigError("evaluation.aggregation must be 'mean' or 'pooled'", key="evaluation.aggregation")

    scr = sections["screen"]
    out_dir = Path(_get(sections["output"], "dir", str, "output.", "out"))
    if not out_dir.is_absolute():
        out_dir = base_dir / out_dir

    return RunConfig(
        seed=int(seed),
        data_path=data_path,
        kind=kind,
        features=features,
        label_source=_get(data, "label_source", str, "data.", "survival_months"),
        label_column=_get(data, "label_column", str, "data.", "label"),
        missing_tokens=frozenset(_get(data, "missing_tokens", list, "data.", sorted(DEFAULT_MISSING))),
        horizon=horizon,
        cutoff_inclusive=_get(data, "cutoff_inclusive", bool, "data.", False),
        merge_threshold=merge,
        filters=filters,
        alpha=float(_get(scr, "alpha", (int, float), "screen.", 0.05)),
        apply_screen=_get(scr, "apply", bool, "screen.", False),
        samplers=samplers,
        models=models,
        k=k,
        threshold=threshold,
        aggregation=aggregation,
        resample_before_cv=_get(ev, "resample_before_cv", bool, "evaluation.", False),
        eval_samplers=eval_samplers,
        eval_models=eval_models,
        output_dir=out_dir,
        raw=raw,
    )


def load_config(path) -> RunConfig:
    raw, base = read_config_file(path)
    return parse_config(raw, base)
