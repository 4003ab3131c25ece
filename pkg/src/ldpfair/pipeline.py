"""Sanitize training data and build the homogeneous binary feature matrix.

Every attribute, whatever mechanism touched it, ends up as a block of ``k_j``
binary columns: one-hot for plain and GRR-perturbed values, an indicator of
the supported values for everything else. Train and test matrices therefore
share one column layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .budget import PrivacyAllocation
from .mechanisms import (
    BitsReport,
    HashReport,
    HistogramReport,
    Mechanism,
    MechanismKind,
    Report,
    SubsetReport,
    ValueReport,
    lh_support,
    make_mechanism,
    one_hot,
    the_support,
)
from .schema import Dataset, DatasetSchema, group_indicator
from .seeding import derived_rng


@dataclass(frozen=True)
class EncodedMatrix:
    features: np.ndarray
    labels: np.ndarray
    column_map: tuple[tuple[str, str], ...]
    group: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def block(self, attribute: str) -> np.ndarray:
        cols = [i for i, (a, _) in enumerate(self.column_map) if a == attribute]
        return self.features[:, cols]


def column_map(schema: DatasetSchema) -> tuple[tuple[str, str], ...]:
    return tuple((name, value) for name in schema.features for value in schema.domain(name).values)


def encode_report(r: Report, k: int, theta: float | None = None) -> np.ndarray:
    """Length-``k`` 0/1 vector of the values a single report supports."""
    if (theta is not None) != isinstance(r, HistogramReport):
        raise ValueError("theta must be given exactly when encoding a histogram report")
    out = np.zeros(k, dtype=np.uint8)
    if isinstance(r, ValueReport):
        if not 0 <= r.value < k:
            raise ValueError(f"reported value {r.value} outside [0, {k})")
        out[r.value] = 1
    elif isinstance(r, HashReport):
        if not 0 <= r.z < r.g:
            raise ValueError(f"hash report z={r.z} outside [0, {r.g})")
        out[list(lh_support(r, k))] = 1
    elif isinstance(r, BitsReport):
        if len(r.bits) != k:
            raise ValueError(f"bit report has length {len(r.bits)}, expected {k}")
        out[:] = r.bits
    elif isinstance(r, SubsetReport):
        if any(not 0 <= i < k for i in r.items):
            raise ValueError(f"subset report has items outside [0, {k})")
        out[list(r.items)] = 1
    elif isinstance(r, HistogramReport):
        if len(r.values) != k:
            raise ValueError(f"histogram report has length {len(r.values)}, expected {k}")
        out[list(the_support(r, theta))] = 1
    else:
        raise TypeError(f"not a report: {r!r}")
    return out


def encode_plain(d: Dataset) -> EncodedMatrix:
    """One-hot encoding of every feature attribute, no randomness."""
    blocks = [one_hot(d.column(name), d.schema.domain(name).k) for name in d.schema.features]
    return EncodedMatrix(
        features=np.hstack(blocks),
        labels=d.labels(),
        column_map=column_map(d.schema),
        group=group_indicator(d),
    )


def build_mechanisms(
    d: Dataset, alloc: PrivacyAllocation, kind: MechanismKind | str
) -> dict[str, Mechanism]:
    """One mechanism per sensitive attribute, configured with that attribute's budget."""
    sensitive = set(d.schema.sensitive)
    if set(alloc.attributes) != sensitive or len(alloc.attributes) != len(sensitive):
        raise ValueError(
            f"allocation covers {sorted(alloc.attributes)} but the sensitive set is {sorted(sensitive)}"
        )
    return {name: make_mechanism(kind, d.schema.domain(name).k, eps) for name, eps in alloc.per_attribute}


def sanitize_training(
    d: Dataset,
    alloc: PrivacyAllocation,
    kind: MechanismKind | str,
    rng: np.random.Generator | int,
) -> EncodedMatrix:
    """Perturb each sensitive column under its budget and encode the reports.

    ``rng`` may be a generator, consumed attribute by attribute in schema
    order, or an integer seed, from which each attribute gets an independent
    stream keyed by its name.

    Labels and the group vector are copied from the original data: fairness
    is evaluated against true group membership.
    """
    mechanisms = build_mechanisms(d, alloc, kind)
    blocks = []
    for name in d.schema.features:
        values = d.column(name)
        mech = mechanisms.get(name)
        if mech is None:
            blocks.append(one_hot(values, d.schema.domain(name).k))
            continue
        stream = rng if isinstance(rng, np.random.Generator) else derived_rng(rng, name)
        reports = mech.perturb_many(values, stream)
        blocks.append(mech.support_many(reports))
    return EncodedMatrix(
        features=np.hstack(blocks),
        labels=d.labels(),
        column_map=column_map(d.schema),
        group=group_indicator(d),
    )


def write_sparse(matrix: EncodedMatrix, path: str | Path) -> Path:
    """Dump the features as ``row col 1`` triplets plus a column-map sidecar.

    Returns the sidecar path (``<stem>.columns.csv`` next to ``path``).
    """
    path = Path(path)
    rows, cols = np.nonzero(matrix.features)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# {matrix.n} {matrix.m}\n")
        for r, c in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{r} {c} 1\n")
    sidecar = path.with_name(path.stem + ".columns.csv")
    with sidecar.open("w", encoding="utf-8") as fh:
        fh.write("column,attribute,category\n")
        for i, (attr, cat) in enumerate(matrix.column_map):
            fh.write(f"{i},{attr},{cat}\n")
    return sidecar


def read_sparse(path: str | Path) -> tuple[np.ndarray, tuple[tuple[str, str], ...]]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        n, m = int(header[1]), int(header[2])
        features = np.zeros((n, m), dtype=np.uint8)
        for line in fh:
            r, c, _ = line.split()
            features[int(r), int(c)] = 1
    sidecar = path.with_name(path.stem + ".columns.csv")
    with sidecar.open(encoding="utf-8") as fh:
        next(fh)
        cmap = tuple(tuple(line.rstrip("\n").split(",", 2)[1:]) for line in fh)
    return features, cmap
