"""Categorical dataset representation, CSV ingestion and splitting."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

logger = logging.getLogger(__name__)


class SchemaError(ValueError):
    """Raised when a schema description or a data file violates the schema contract."""


@dataclass(frozen=True)
class CategoricalDomain:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        if len(self.values) < 2:
            raise SchemaError(f"attribute {self.name!r} needs at least 2 values, got {len(self.values)}")
        if len(set(self.values)) != len(self.values):
            raise SchemaError(f"attribute {self.name!r} has duplicate values")

    @property
    def k(self) -> int:
        return len(self.values)

    def index(self, label: str) -> int:
        return self.values.index(label)


@dataclass(frozen=True)
class DatasetSchema:
    """Attribute domains plus the privacy/fairness roles of each attribute.

    ``sensitive`` attributes are sanitized under LDP, ``protected`` is the
    single attribute fairness is measured against (always sensitive), and
    ``target`` is the binary label. Everything else is non-sensitive.
    """

    attributes: tuple[CategoricalDomain, ...]
    sensitive: tuple[str, ...]
    protected: str
    target: str
    privileged_value: str
    positive_label: str
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "sensitive", tuple(self.sensitive))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names")
        for s in self.sensitive:
            if s not in names:
                raise SchemaError(f"sensitive attribute {s!r} is not declared")
        if len(set(self.sensitive)) != len(self.sensitive):
            raise SchemaError("duplicate sensitive attributes")
        if self.protected not in self.sensitive:
            raise SchemaError(f"protected attribute {self.protected!r} must be sensitive")
        if self.target not in names:
            raise SchemaError(f"target {self.target!r} is not declared")
        if self.target in self.sensitive:
            raise SchemaError("target cannot be sensitive")
        target = self.domain(self.target)
        if target.k != 2:
            raise SchemaError(f"target {self.target!r} must be binary, has k={target.k}")
        if self.positive_label not in target.values:
            raise SchemaError(f"positive_label {self.positive_label!r} not in target domain")
        if self.privileged_value not in self.domain(self.protected).values:
            raise SchemaError(f"privileged_value {self.privileged_value!r} not in protected domain")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def non_sensitive(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if n not in self.sensitive and n != self.target)

    @property
    def features(self) -> tuple[str, ...]:
        """Attributes fed to the classifier, in declaration order (target excluded)."""
        return tuple(n for n in self.names if n != self.target)

    def domain(self, name: str) -> CategoricalDomain:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    def position(self, name: str) -> int:
        return self.names.index(name)

    def with_sensitive(self, sensitive: Sequence[str]) -> DatasetSchema:
        """Copy of the schema with a different sensitive set (protected must stay in it)."""
        return DatasetSchema(
            attributes=self.attributes,
            sensitive=tuple(sensitive),
            protected=self.protected,
            target=self.target,
            privileged_value=self.privileged_value,
            positive_label=self.positive_label,
            name=self.name,
        )


@dataclass(frozen=True)
class Dataset:
    schema: DatasetSchema
    codes: np.ndarray
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int64, copy=True)
        if codes.ndim != 2 or codes.shape[1] != len(self.schema.attributes):
            raise SchemaError(
                f"codes must have shape (n, {len(self.schema.attributes)}), got {codes.shape}"
            )
        if codes.shape[0] == 0:
            raise SchemaError("dataset is empty")
        ks = np.array([a.k for a in self.schema.attributes])
        if (codes < 0).any() or (codes >= ks).any():
            raise SchemaError("category index out of range")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.schema.position(name)]

    def labels(self) -> np.ndarray:
        """Binary target vector, 1 for ``positive_label``."""
        target = self.schema.domain(self.schema.target)
        return (self.column(self.schema.target) == target.index(self.schema.positive_label)).astype(np.int8)

    def take(self, idx: np.ndarray) -> Dataset:
        return Dataset(self.schema, self.codes[idx])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.codes, other.codes)

    __hash__ = None


def group_indicator(d: Dataset) -> np.ndarray:
    """1 where the row's protected attribute equals the privileged value, else 0."""
    dom = d.schema.domain(d.schema.protected)
    return (d.column(d.schema.protected) == dom.index(d.schema.privileged_value)).astype(np.int8)


def train_test_split(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint partition with ``floor(train_fraction * n)`` training rows."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n_train = math.floor(train_fraction * d.n)
    if n_train < 1 or d.n - n_train < 1:
        raise ValueError(f"dataset with n={d.n} is too small to split at {train_fraction}")
    perm = np.random.default_rng(seed).permutation(d.n)
    return d.take(np.sort(perm[:n_train])), d.take(np.sort(perm[n_train:]))


# --- schema config -----------------------------------------------------------


def _natural_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


@dataclass
class _AttrSpec:
    name: str
    values: list[str] | None
    recode: dict[str, str]


def _parse_config(cfg: Mapping[str, Any]) -> tuple[dict[str, Any], list[_AttrSpec]]:
    for key in ("attributes", "sensitive", "protected", "target", "privileged_value", "positive_label"):
        if key not in cfg:
            raise SchemaError(f"schema config is missing {key!r}")
    specs = []
    for entry in cfg["attributes"]:
        if isinstance(entry, str):
            specs.append(_AttrSpec(entry, None, {}))
            continue
        values = entry.get("values")
        recode = {str(k): str(v) for k, v in (entry.get("recode") or {}).items()}
        specs.append(_AttrSpec(str(entry["name"]), None if values is None else [str(v) for v in values], recode))
    roles = {
        "name": str(cfg.get("name", "dataset")),
        "sensitive": [str(s) for s in cfg["sensitive"]],
        "protected": str(cfg["protected"]),
        "target": str(cfg["target"]),
        "privileged_value": str(cfg["privileged_value"]),
        "positive_label": str(cfg["positive_label"]),
    }
    return roles, specs


def load_schema_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"schema config not found: {path}")
    with path.open(encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise SchemaError(f"{path}: schema config must be a mapping")
    return cfg


def load_csv(path: str | Path, schema_config: Mapping[str, Any] | str | Path) -> Dataset:
    """Read a categorical CSV into a :class:`Dataset`.

    Category indices follow the order declared in the schema config. An
    attribute without declared ``values`` takes its observed values in natural
    sort order, so the mapping never depends on row order. Rows with an empty
    cell or a value outside a declared domain are dropped; the count is kept
    on ``Dataset.dropped``.
    """
    if not isinstance(schema_config, Mapping):
        schema_config = load_schema_config(schema_config)
    roles, specs = _parse_config(schema_config)
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        wanted = [s.name for s in specs]
        missing = [w for w in wanted if w not in header]
        if missing:
            raise SchemaError(f"{path}: header lacks declared attributes {missing}")
        cols = [header.index(w) for w in wanted]
        raw_rows = []
        dropped = 0
        for line in reader:
            if not line:
                continue
            if len(line) != len(header):
                dropped += 1
                continue
            cells = [line[c].strip() for c in cols]
            cells = [s.recode.get(c, c) for s, c in zip(specs, cells)]
            if any(c == "" for c in cells):
                dropped += 1
                continue
            if any(s.values is not None and c not in s.values for s, c in zip(specs, cells)):
                dropped += 1
                continue
            raw_rows.append(cells)

    domains = []
    for j, s in enumerate(specs):
        values = s.values
        if values is None:
            values = sorted({row[j] for row in raw_rows}, key=_natural_key)
        domains.append(CategoricalDomain(s.name, tuple(values)))

    schema = DatasetSchema(attributes=tuple(domains), **roles)
    lookup = [{v: i for i, v in enumerate(dom.values)} for dom in domains]
    codes = np.array([[lookup[j][c] for j, c in enumerate(row)] for row in raw_rows], dtype=np.int64)
    if codes.size == 0:
        raise SchemaError(f"{path}: no valid rows")
    if dropped:
        logger.info("%s: dropped %d invalid rows, kept %d", path, dropped, len(raw_rows))
    return Dataset(schema, codes, dropped=dropped)


def write_csv(d: Dataset, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(d.schema.names)
        domains = d.schema.attributes
        for row in d.codes:
            writer.writerow([dom.values[c] for dom, c in zip(domains, row)])


def schema_to_config(schema: DatasetSchema) -> dict[str, Any]:
    """Inverse of the config parser: every domain is written out explicitly."""
    return {
        "name": schema.name,
        "attributes": [{"name": a.name, "values": list(a.values)} for a in schema.attributes],
        "sensitive": list(schema.sensitive),
        "protected": schema.protected,
        "target": schema.target,
        "privileged_value": schema.privileged_value,
        "positive_label": schema.positive_label,
    }
