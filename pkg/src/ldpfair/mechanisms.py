"""Client-side epsilon-LDP frequency-oracle mechanisms.

Every mechanism exposes a single-report API (``perturb``), a vectorised API
over a column of values (``perturb_many``), and ``support_many`` which maps a
batch of reports to the length-k indicator of the values each report
supports. The support indicator is what the training pipeline uses as
features; it is computed from the reports alone.

Randomness always comes from an explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Union

import numpy as np
from scipy.optimize import minimize_scalar

OLH_MIN_CAP = 2**16


class MechanismKind(str, Enum):
    GRR = "GRR"
    BLH = "BLH"
    OLH = "OLH"
    RAPPOR = "RAPPOR"
    OUE = "OUE"
    SS = "SS"
    THE = "THE"

    @classmethod
    def parse(cls, name: str) -> MechanismKind:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ValueError(f"unknown mechanism {name!r}; expected one of {[m.value for m in cls]}") from None


class UnsupportedKindError(ValueError):
    pass


# --- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class ValueReport:
    value: int


@dataclass(frozen=True)
class HashReport:
    seed: int
    g: int
    z: int


@dataclass(frozen=True)
class BitsReport:
    bits: tuple[int, ...]


@dataclass(frozen=True)
class SubsetReport:
    items: frozenset[int]


@dataclass(frozen=True)
class HistogramReport:
    values: tuple[float, ...]


Report = Union[ValueReport, HashReport, BitsReport, SubsetReport, HistogramReport]


# --- helpers -----------------------------------------------------------------


def round_half_up(x: float) -> int:
    """Nearest integer with ties going up (2.5 -> 3)."""
    return math.floor(x + 0.5)


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if math.isnan(epsilon) or epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return epsilon


def _check_k(k: int) -> int:
    if int(k) != k or k < 2:
        raise ValueError(f"domain size k must be an integer >= 2, got {k}")
    return int(k)


def _check_values(values, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    if values.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if values.size and (values.min() < 0 or values.max() >= k):
        raise ValueError(f"values must lie in [0, {k})")
    return values


def _exp_neg(epsilon: float) -> float:
    # e^-eps is the numerically safe building block: 0.0 at eps=inf.
    return math.exp(-epsilon)


def one_hot(values: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(values), k), dtype=np.uint8)
    out[np.arange(len(values)), values] = 1
    return out


# --- seeded hashing ----------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def hash_values(seed, values, g: int) -> np.ndarray:
    """Seeded hash of category indices into ``[0, g)``.

    ``seed`` and ``values`` broadcast against each other. Each seed selects
    one member of the family; outputs are deterministic in ``(seed, value)``.
    """
    seed = np.asarray(seed, dtype=np.uint64)
    values = np.asarray(values, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _splitmix64(_splitmix64(seed) ^ (values * _M2 + np.uint64(1)))
    return (h % np.uint64(g)).astype(np.int64)


def lh_support(report: HashReport, k: int) -> frozenset[int]:
    """Values of ``[0, k)`` that hash to the reported bucket."""
    hashed = hash_values(report.seed, np.arange(k), report.g)
    return frozenset(int(u) for u in np.flatnonzero(hashed == report.z))


# --- mechanisms --------------------------------------------------------------


class Mechanism:
    """Base class; subclasses fix the channel and the report representation."""

    kind: ClassVar[MechanismKind]

    def __init__(self, k: int, epsilon: float):
        self.k = _check_k(k)
        self.epsilon = _check_epsilon(epsilon)

    @property
    def retention_probability(self) -> float:
        """Probability that the true value lies in the support of its report."""
        raise NotImplementedError

    def perturb_many(self, values, rng: np.random.Generator):
        raise NotImplementedError

    def support_many(self, batch) -> np.ndarray:
        raise NotImplementedError

    def perturb(self, v: int, rng: np.random.Generator) -> Report:
        return self._unbatch(self.perturb_many(np.array([v]), rng))

    def _unbatch(self, batch) -> Report:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(k={self.k}, epsilon={self.epsilon:g})"


class GRR(Mechanism):
    kind = MechanismKind.GRR

    def __init__(self, k, epsilon):
        super().__init__(k, epsilon)
        e = _exp_neg(self.epsilon)
        # p = e^eps / (e^eps + k - 1), q = 1 / (e^eps + k - 1)
        self.p = 1.0 / (1.0 + (self.k - 1) * e)
        self.q = e / (1.0 + (self.k - 1) * e)

    @property
    def retention_probability(self):
        return self.p

    def perturb_many(self, values, rng):
        values = _check_values(values, self.k)
        n = len(values)
        keep = rng.random(n) < self.p
        other = rng.integers(0, self.k - 1, size=n)
        other += other >= values
        return np.where(keep, values, other)

    def support_many(self, batch):
        return one_hot(np.asarray(batch), self.k)

    def _unbatch(self, batch):
        return ValueReport(int(batch[0]))


class LocalHashing(Mechanism):
    """GRR applied to a randomly seeded hash of the value into ``[0, g)``."""

    def __init__(self, k, epsilon, g: int):
        super().__init__(k, epsilon)
        if g < 2:
            raise ValueError(f"hash range g must be >= 2, got {g}")
        self.g = int(g)
        e = _exp_neg(self.epsilon)
        self.p = 1.0 / (1.0 + (self.g - 1) * e)
        self.q = e / (1.0 + (self.g - 1) * e)

    @property
    def retention_probability(self):
        return self.p

    def perturb_many(self, values, rng):
        return _hash_and_randomize(_check_values(values, self.k), self.g, self.p, rng)

    def support_many(self, batch):
        seeds, z = batch
        hashed = hash_values(seeds[:, None], np.arange(self.k)[None, :], self.g)
        return (hashed == np.asarray(z)[:, None]).astype(np.uint8)

    def _unbatch(self, batch):
        seeds, z = batch
        return HashReport(int(seeds[0]), self.g, int(z[0]))


def _hash_and_randomize(values, g, p, rng):
    n = len(values)
    seeds = rng.integers(0, 2**64, size=n, dtype=np.uint64)
    b = hash_values(seeds, values, g)
    keep = rng.random(n) < p
    shift = 1 + rng.integers(0, g - 1, size=n)
    return seeds, np.where(keep, b, (b + shift) % g)


class BLH(LocalHashing):
    kind = MechanismKind.BLH

    def __init__(self, k, epsilon):
        super().__init__(k, epsilon, g=2)


def olh_hash_range(epsilon: float, k: int) -> int:
    """``round(e^eps + 1)``, capped at ``max(k, 2**16)``."""
    cap = max(int(k), OLH_MIN_CAP)
    if epsilon >= math.log(cap):
        return cap
    return min(cap, round_half_up(math.exp(epsilon) + 1.0))


class OLH(LocalHashing):
    kind = MechanismKind.OLH

    def __init__(self, k, epsilon):
        epsilon = _check_epsilon(epsilon)
        super().__init__(k, epsilon, g=olh_hash_range(epsilon, k))


class UnaryEncoding(Mechanism):
    """Independent bit flips of the one-hot vector: 1-bits stay with p, 0-bits turn on with q."""

    p: float
    q: float

    @property
    def retention_probability(self):
        return self.p

    def perturb_many(self, values, rng):
        values = _check_values(values, self.k)
        u = rng.random((len(values), self.k))
        ones = one_hot(values, self.k).astype(bool)
        return np.where(ones, u < self.p, u < self.q).astype(np.uint8)

    def support_many(self, batch):
        return np.asarray(batch, dtype=np.uint8)

    def _unbatch(self, batch):
        return BitsReport(tuple(int(b) for b in batch[0]))


class RAPPOR(UnaryEncoding):
    kind = MechanismKind.RAPPOR

    def __init__(self, k, epsilon):
        super().__init__(k, epsilon)
        e = _exp_neg(self.epsilon / 2)
        self.p = 1.0 / (1.0 + e)
        self.q = e / (1.0 + e)


class OUE(UnaryEncoding):
    kind = MechanismKind.OUE

    def __init__(self, k, epsilon):
        super().__init__(k, epsilon)
        e = _exp_neg(self.epsilon)
        self.p = 0.5
        self.q = e / (1.0 + e)


def subset_size(k: int, epsilon: float) -> int:
    """``round(k / (e^eps + 1))`` clamped to ``[1, k - 1]``."""
    raw = round_half_up(k * _exp_neg(epsilon) / (1.0 + _exp_neg(epsilon)))
    return min(max(raw, 1), k - 1)


class SS(Mechanism):
    kind = MechanismKind.SS

    def __init__(self, k, epsilon):
        super().__init__(k, epsilon)
        self.omega = subset_size(self.k, self.epsilon)
        e = _exp_neg(self.epsilon)
        # p = w e^eps / (w e^eps + k - w)
        self.p = self.omega / (self.omega + (self.k - self.omega) * e)

    @property
    def retention_probability(self):
        return self.p

    def perturb_many(self, values, rng):
        values = _check_values(values, self.k)
        n = len(values)
        rows = np.arange(n)
        include = rng.random(n) < self.p
        # A uniformly random ordering of the other k-1 values per row: sort
        # random keys with the true value pushed to the end.
        keys = rng.random((n, self.k))
        keys[rows, values] = 2.0
        order = np.argsort(keys, axis=1, kind="stable")
        n_others = np.where(include, self.omega - 1, self.omega)
        taken = np.arange(self.k)[None, :] < n_others[:, None]
        out = np.zeros((n, self.k), dtype=np.uint8)
        out[np.repeat(rows, self.k)[taken.ravel()], order[taken]] = 1
        out[rows[include], values[include]] = 1
        return out

    def support_many(self, batch):
        return np.asarray(batch, dtype=np.uint8)

    def _unbatch(self, batch):
        return SubsetReport(frozenset(int(i) for i in np.flatnonzero(batch[0])))


def the_objective(theta, epsilon: float):
    """Variance objective of thresholded histogram encoding.

    Algebraically equal to
    ``(2 e^(eps*theta/2) - 1) / (1 + e^(eps*(theta - 1/2)) - 2 e^(eps*theta/2))**2``;
    evaluated after dividing through by ``e^(eps*theta)`` so that large
    epsilon does not overflow.
    """
    theta = np.asarray(theta, dtype=float)
    inv_a = np.exp(-epsilon * theta / 2)
    num = 2 * inv_a - inv_a**2
    den = inv_a - 2 + np.exp(epsilon * (theta - 1) / 2)
    return num / den**2


def optimize_theta(epsilon: float) -> float:
    """Threshold in (0.5, 1) minimising :func:`the_objective` for ``epsilon``."""
    epsilon = _check_epsilon(epsilon)
    if math.isinf(epsilon):
        raise ValueError("threshold optimisation needs a finite epsilon")
    res = minimize_scalar(
        lambda t: float(the_objective(t, epsilon)),
        bounds=(0.5, 1.0),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


def laplace_noise(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """Laplace(0, scale) samples by inverting the CDF of one uniform draw each."""
    # Uniform on the open interval (0, 1), so the log never sees 0.
    u = (rng.integers(0, 2**53, size=size).astype(float) + 0.5) / 2.0**53
    return np.where(u < 0.5, scale * np.log(2 * u), -scale * np.log(2 * (1 - u)))


class THE(Mechanism):
    """Histogram encoding with Laplace noise (L1 sensitivity 2), thresholded at ``theta``."""

    kind = MechanismKind.THE

    def __init__(self, k, epsilon, theta: float | None = None):
        super().__init__(k, epsilon)
        self.scale = 2.0 / self.epsilon
        self._theta = None if theta is None else _check_theta(theta)

    @property
    def theta(self) -> float:
        if self._theta is None:
            # Any threshold in (0.5, 1) separates a noiseless one-hot vector.
            self._theta = 0.75 if math.isinf(self.epsilon) else optimize_theta(self.epsilon)
        return self._theta

    @property
    def retention_probability(self):
        # Pr[1 + Lap(b) > theta] = 1 - F(theta - 1), theta - 1 < 0
        if self.scale == 0:
            return 1.0
        return 1.0 - 0.5 * math.exp((self.theta - 1) / self.scale)

    def perturb_many(self, values, rng):
        values = _check_values(values, self.k)
        return one_hot(values, self.k) + laplace_noise(self.scale, (len(values), self.k), rng)

    def support_many(self, batch):
        return (np.asarray(batch) > self.theta).astype(np.uint8)

    def _unbatch(self, batch):
        return HistogramReport(tuple(float(x) for x in batch[0]))


def _check_theta(theta: float) -> float:
    if not 0.5 < theta < 1.0:
        raise ValueError(f"theta must lie in (0.5, 1), got {theta}")
    return float(theta)


def the_support(report: HistogramReport, theta: float) -> frozenset[int]:
    theta = _check_theta(theta)
    return frozenset(i for i, x in enumerate(report.values) if x > theta)


MECHANISMS: dict[MechanismKind, type[Mechanism]] = {
    MechanismKind.GRR: GRR,
    MechanismKind.BLH: BLH,
    MechanismKind.OLH: OLH,
    MechanismKind.RAPPOR: RAPPOR,
    MechanismKind.OUE: OUE,
    MechanismKind.SS: SS,
    MechanismKind.THE: THE,
}


def make_mechanism(kind: MechanismKind | str, k: int, epsilon: float) -> Mechanism:
    return MECHANISMS[MechanismKind.parse(kind)](k, epsilon)


# Single-report functional API.


def grr_perturb(v: int, k: int, epsilon: float, rng) -> ValueReport:
    return GRR(k, epsilon).perturb(v, rng)


def _hash_report(v: int, g: int, epsilon: float, rng) -> HashReport:
    if v < 0:
        raise ValueError(f"value index must be non-negative, got {v}")
    p = 1.0 / (1.0 + (g - 1) * _exp_neg(epsilon))
    seeds, z = _hash_and_randomize(np.array([v]), g, p, rng)
    return HashReport(int(seeds[0]), g, int(z[0]))


def blh_perturb(v: int, epsilon: float, rng) -> HashReport:
    return _hash_report(v, 2, _check_epsilon(epsilon), rng)


def olh_perturb(v: int, epsilon: float, rng, k: int = 0) -> HashReport:
    """OLH report; ``k`` only matters when it raises the hash-range cap above 2**16."""
    epsilon = _check_epsilon(epsilon)
    return _hash_report(v, olh_hash_range(epsilon, k), epsilon, rng)


def rappor_perturb(v: int, k: int, epsilon: float, rng) -> BitsReport:
    return RAPPOR(k, epsilon).perturb(v, rng)


def oue_perturb(v: int, k: int, epsilon: float, rng) -> BitsReport:
    return OUE(k, epsilon).perturb(v, rng)


def ss_perturb(v: int, k: int, epsilon: float, rng) -> SubsetReport:
    return SS(k, epsilon).perturb(v, rng)


def the_perturb(v: int, k: int, epsilon: float, rng) -> HistogramReport:
    return THE(k, epsilon).perturb(v, rng)


# --- exact channels ----------------------------------------------------------


@dataclass(frozen=True)
class ChannelMatrix:
    """Output distribution of a mechanism: ``entries[v, j] = Pr[output j | input v]``."""

    mechanism: MechanismKind
    epsilon: float
    k: int
    outputs: tuple
    entries: np.ndarray

    def max_privacy_ratio(self) -> float:
        """Largest ``Pr[z | v1] / Pr[z | v2]`` over outputs and input pairs."""
        hi = self.entries.max(axis=0)
        lo = self.entries.min(axis=0)
        live = hi > 0
        if np.any(lo[live] == 0):
            return math.inf
        return float(np.max(hi[live] / lo[live]))


MAX_ENUMERABLE_BITS = 12


def channel_matrix(kind: MechanismKind | str, k: int, epsilon: float) -> ChannelMatrix:
    """Enumerate the exact channel of GRR, RAPPOR, OUE or SS from closed-form probabilities."""
    kind = MechanismKind.parse(kind)
    k = _check_k(k)
    epsilon = _check_epsilon(epsilon)
    ee = math.exp(epsilon)

    if kind is MechanismKind.GRR:
        p, q = ee / (ee + k - 1), 1 / (ee + k - 1)
        outputs = tuple(range(k))
        entries = np.full((k, k), q)
        np.fill_diagonal(entries, p)

    elif kind in (MechanismKind.RAPPOR, MechanismKind.OUE):
        if k > MAX_ENUMERABLE_BITS:
            raise ValueError(f"bit-vector channel not enumerable for k={k} > {MAX_ENUMERABLE_BITS}")
        if kind is MechanismKind.RAPPOR:
            h = math.exp(epsilon / 2)
            p, q = h / (h + 1), 1 / (h + 1)
        else:
            p, q = 0.5, 1 / (ee + 1)
        outputs = tuple(itertools.product((0, 1), repeat=k))
        entries = np.empty((k, len(outputs)))
        for v in range(k):
            for j, z in enumerate(outputs):
                prob = 1.0
                for i, bit in enumerate(z):
                    on = p if i == v else q
                    prob *= on if bit else 1 - on
                entries[v, j] = prob

    elif kind is MechanismKind.SS:
        w = subset_size(k, epsilon)
        p = w * ee / (w * ee + k - w)
        outputs = tuple(itertools.combinations(range(k), w))
        with_v = math.comb(k - 1, w - 1)
        without_v = math.comb(k - 1, w)
        entries = np.empty((k, len(outputs)))
        for v in range(k):
            for j, subset in enumerate(outputs):
                entries[v, j] = p / with_v if v in subset else (1 - p) / without_v

    else:
        raise UnsupportedKindError(f"{kind.value} has no enumerable output space")

    return ChannelMatrix(kind, epsilon, k, outputs, entries)
