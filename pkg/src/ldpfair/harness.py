"""Experiment orchestration over mechanisms, allocation schemes and budgets.

One *run* is a fresh train/test split. Within a run the NonDP model and
every (mechanism, allocation, epsilon) cell are trained with the same
hyperparameters and evaluated on the same unperturbed test matrix.

Random streams are derived from the root seed by name rather than by
position: the split depends on ``(seed, run)``, sanitization on ``(seed,
run, mechanism, attribute)``. Two consequences: adding a mechanism to the
config does not change any other mechanism's results, and all budgets of
one mechanism share their noise draws, which makes the epsilon curves
smooth.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .budget import AllocationScheme, allocate
from .fairness import METRIC_NAMES, FairnessReport, fairness_report
from .mechanisms import MechanismKind
from .model import CLASSIFIER_NAME, Hyperparameters, predict, predict_proba, train, utility_metrics
from .pipeline import EncodedMatrix, encode_plain, sanitize_training
from .schema import Dataset, DatasetSchema, load_csv, load_schema_config, train_test_split
from .seeding import derived_rng, mix_seed
from .synthetic import make_synthetic

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0, 20.0, 50.0)
UTILITY_NAMES = ("acc", "f1", "auc", "recall")
ALL_METRICS = METRIC_NAMES + UTILITY_NAMES
NONDP = "NonDP"
NA = "NA"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str | None = None
    schema: str | None = None
    synthetic: Mapping[str, Any] | None = None
    mechanisms: tuple[MechanismKind, ...] = tuple(MechanismKind)
    allocations: tuple[AllocationScheme, ...] = (AllocationScheme.UNIFORM, AllocationScheme.K_BASED)
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    runs: int = 20
    seed: int = 0
    train_fraction: float = 0.8
    dynamic_ds: tuple[int, int] | None = None
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    output: str = "results"
    curves: bool = False

    def __post_init__(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of 'dataset' (with 'schema') or 'synthetic'")
        if self.dataset is not None and self.schema is None:
            raise ConfigError("'dataset' needs a 'schema'")
        object.__setattr__(self, "mechanisms", tuple(MechanismKind.parse(m) for m in self.mechanisms))
        object.__setattr__(self, "allocations", tuple(AllocationScheme.parse(a) for a in self.allocations))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if not self.mechanisms or not self.allocations or not self.epsilons:
            raise ConfigError("mechanisms, allocations and epsilons must be non-empty")
        if any(not (e > 0 and math.isfinite(e)) for e in self.epsilons):
            raise ConfigError(f"epsilons must be positive and finite: {self.epsilons}")
        if len(set(self.epsilons)) != len(self.epsilons):
            raise ConfigError("duplicate epsilon values")
        if int(self.runs) != self.runs or self.runs < 1:
            raise ConfigError(f"runs must be a positive integer, got {self.runs}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.dynamic_ds is not None:
            lo, hi = self.dynamic_ds
            if not 1 <= lo <= hi:
                raise ConfigError(f"dynamic_ds needs 1 <= min <= max, got {self.dynamic_ds}")

    def cells(self):
        for mech in self.mechanisms:
            for scheme in self.allocations:
                for eps in self.epsilons:
                    yield mech, scheme, eps


def _resolve(base: Path, p):
    if p is None:
        return None
    p = Path(p)
    return str(p if p.is_absolute() else base / p)


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read a YAML experiment config; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    with path.open(encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f for f in ExperimentConfig.__dataclass_fields__} | {"classifier"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    base = path.parent
    kwargs = dict(raw)
    kwargs["dataset"] = _resolve(base, raw.get("dataset"))
    kwargs["schema"] = _resolve(base, raw.get("schema"))
    if "output" in raw and raw["output"] is not None:
        kwargs["output"] = _resolve(base, raw["output"])
    if "classifier" in kwargs:
        kwargs["hyper"] = Hyperparameters(**(kwargs.pop("classifier") or {}))
    dyn = kwargs.get("dynamic_ds")
    if isinstance(dyn, Mapping):
        kwargs["dynamic_ds"] = (int(dyn.get("min", 2)), int(dyn.get("max", 6)))
    elif dyn is not None:
        kwargs["dynamic_ds"] = tuple(int(x) for x in dyn)
    for key in ("mechanisms", "allocations", "epsilons"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.synthetic is not None:
        return make_synthetic(**dict(cfg.synthetic))
    d = load_csv(cfg.dataset, load_schema_config(cfg.schema))
    if d.dropped:
        logger.warning("dropped %d rows with empty or out-of-domain cells", d.dropped)
    return d


def validate(cfg: ExperimentConfig, d: Dataset | None = None) -> Dataset:
    """Load the data and check that the config can run on it."""
    d = d if d is not None else load_dataset(cfg)
    if cfg.dynamic_ds is not None and len(d.schema.sensitive) < cfg.dynamic_ds[1]:
        raise ConfigError(
            f"dynamic_ds max={cfg.dynamic_ds[1]} but the schema only declares "
            f"{len(d.schema.sensitive)} sensitive attributes"
        )
    n_train = math.floor(cfg.train_fraction * d.n)
    if n_train < 2 or d.n - n_train < 1:
        raise ConfigError(f"dataset with n={d.n} is too small for train_fraction={cfg.train_fraction}")
    return d


def draw_attribute_subset(
    schema: DatasetSchema, rng: np.random.Generator, min_size: int = 2, max_size: int = 6
) -> list[str]:
    """Random sensitive subset of uniform size in ``[min, min(max, available)]`` that keeps the protected attribute."""
    available = list(schema.sensitive)
    if len(available) < min_size:
        raise ValueError(f"need at least {min_size} sensitive attributes, schema has {len(available)}")
    size = int(rng.integers(min_size, min(max_size, len(available)) + 1))
    others = [a for a in available if a != schema.protected]
    picked = set(rng.choice(len(others), size=size - 1, replace=False).tolist())
    chosen = {schema.protected} | {others[i] for i in picked}
    return [a for a in available if a in chosen]


@dataclass(frozen=True)
class MetricsRow:
    run: int
    mechanism: str
    allocation: str
    epsilon: float | None
    d_s: int
    sensitive: tuple[str, ...]
    fairness: FairnessReport
    utility: Any

    def metrics(self) -> dict[str, float]:
        return {**self.fairness.as_row(), **self.utility.as_row()}


def _evaluate(train_mat: EncodedMatrix, test_mat: EncodedMatrix, hyper: Hyperparameters):
    params = train(train_mat.features, train_mat.labels, hyper)
    proba = predict_proba(params, test_mat.features)
    pred = predict(params, test_mat.features)
    return (
        fairness_report(pred, test_mat.labels, test_mat.group),
        utility_metrics(pred, proba, test_mat.labels),
    )


def run_single(cfg: ExperimentConfig, d: Dataset, run: int) -> list[MetricsRow]:
    """NonDP row followed by one row per cell, for split number ``run``."""
    train_set, test_set = train_test_split(d, cfg.train_fraction, mix_seed(cfg.seed, "split", run))
    test_mat = encode_plain(test_set)
    fair, util = _evaluate(encode_plain(train_set), test_mat, cfg.hyper)
    rows = [MetricsRow(run, NONDP, NONDP, None, 0, (), fair, util)]

    for mech, scheme, eps in cfg.cells():
        schema = train_set.schema
        if cfg.dynamic_ds is not None:
            sub_rng = derived_rng(cfg.seed, "subset", run, mech.value, scheme.value, eps)
            schema = schema.with_sensitive(draw_attribute_subset(schema, sub_rng, *cfg.dynamic_ds))
        cell_train = Dataset(schema, train_set.codes)
        alloc = allocate(scheme, eps, [schema.domain(a) for a in schema.sensitive])
        seed = mix_seed(cfg.seed, "sanitize", run, mech.value)
        train_mat = sanitize_training(cell_train, alloc, mech, seed)
        fair, util = _evaluate(train_mat, test_mat, cfg.hyper)
        rows.append(MetricsRow(run, mech.value, scheme.value, eps, len(schema.sensitive), schema.sensitive, fair, util))
    logger.info("run %d done (%d rows)", run, len(rows))
    return rows


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, dataset: Dataset | None = None) -> list[MetricsRow]:
    d = validate(cfg, dataset)
    if jobs <= 1 or cfg.runs == 1:
        per_run = [run_single(cfg, d, r) for r in range(cfg.runs)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_run = list(pool.map(run_single, [cfg] * cfg.runs, [d] * cfg.runs, range(cfg.runs)))
    return [row for rows in per_run for row in rows]


# --- aggregation and output --------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return NONDP
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return NA if math.isnan(x) else repr(x)
    return str(x)


ROW_FIELDS = ("run", "mechanism", "allocation", "epsilon", "d_s", "sensitive") + ALL_METRICS + ("classifier",)


def write_rows(rows: Iterable[MetricsRow], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ROW_FIELDS)
        for r in rows:
            metrics = r.metrics()
            writer.writerow(
                [r.run, r.mechanism, r.allocation, _fmt(r.epsilon), r.d_s, "|".join(r.sensitive)]
                + [_fmt(metrics[m]) for m in ALL_METRICS]
                + [CLASSIFIER_NAME]
            )


@dataclass(frozen=True)
class SummaryRow:
    mechanism: str
    allocation: str
    epsilon: float | None
    metric: str
    mean: float
    sd: float
    count: int
    excluded: int


def aggregate(rows: Sequence[MetricsRow]) -> list[SummaryRow]:
    """Mean and sample standard deviation per (mechanism, allocation, epsilon, metric).

    Undefined values are left out and counted in ``excluded``; a group with
    a single defined value has ``sd == 0``.
    """
    if not rows:
        raise ValueError("nothing to aggregate")
    groups: dict[tuple, list[MetricsRow]] = defaultdict(list)
    for r in rows:
        groups[(r.mechanism, r.allocation, r.epsilon)].append(r)
    out = []
    for (mech, alloc, eps), members in groups.items():
        for metric in ALL_METRICS:
            values = [float(m.metrics()[metric]) for m in members]
            defined = [v for v in values if not math.isnan(v)]
            if defined:
                mean = math.fsum(defined) / len(defined)
                sd = statistics.stdev(defined) if len(defined) > 1 else 0.0
            else:
                mean = sd = math.nan
            out.append(SummaryRow(mech, alloc, eps, metric, mean, sd, len(defined), len(values) - len(defined)))
    return out


def write_summary(summary: Iterable[SummaryRow], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("mechanism", "allocation", "epsilon", "metric", "mean", "sd", "count", "excluded"))
        for s in summary:
            writer.writerow((s.mechanism, s.allocation, _fmt(s.epsilon), s.metric, _fmt(s.mean), _fmt(s.sd), s.count, s.excluded))


def curve_tables(summary: Sequence[SummaryRow]) -> dict[str, list[list[str]]]:
    """Per metric: one line per epsilon, one column per mechanism/allocation series plus NonDP."""
    tables = {}
    series = sorted({(s.mechanism, s.allocation) for s in summary if s.epsilon is not None})
    epsilons = sorted({s.epsilon for s in summary if s.epsilon is not None})
    for metric in ALL_METRICS:
        lookup = {(s.mechanism, s.allocation, s.epsilon): s.mean for s in summary if s.metric == metric}
        nondp = lookup.get((NONDP, NONDP, None), math.nan)
        header = ["epsilon", NONDP] + [f"{m}/{a}" for m, a in series]
        body = [[_fmt(e), _fmt(nondp)] + [_fmt(lookup.get((m, a, e), math.nan)) for m, a in series] for e in epsilons]
        tables[metric] = [header] + body
    return tables


def write_outputs(cfg: ExperimentConfig, rows: Sequence[MetricsRow], out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"rows": out_dir / "metrics.csv", "summary": out_dir / "summary.csv", "meta": out_dir / "experiment.json"}
    write_rows(rows, paths["rows"])
    summary = aggregate(rows)
    write_summary(summary, paths["summary"])
    meta = {
        "classifier": CLASSIFIER_NAME,
        "hyperparameters": asdict(cfg.hyper),
        "mechanisms": [m.value for m in cfg.mechanisms],
        "allocations": [a.value for a in cfg.allocations],
        "epsilons": list(cfg.epsilons),
        "runs": cfg.runs,
        "seed": cfg.seed,
        "train_fraction": cfg.train_fraction,
        "dynamic_ds": list(cfg.dynamic_ds) if cfg.dynamic_ds else None,
    }
    paths["meta"].write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    if cfg.curves:
        for metric, table in curve_tables(summary).items():
            p = out_dir / f"curve_{metric}.csv"
            with p.open("w", newline="", encoding="utf-8") as fh:
                csv.writer(fh, lineterminator="\n").writerows(table)
            paths[f"curve_{metric}"] = p
    return paths
