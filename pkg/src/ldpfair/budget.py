"""Splitting a total privacy budget across independently sanitized attributes.

Each sensitive attribute is perturbed by its own mechanism with budget
``eps_j``; under sequential composition the joint release is
``sum(eps_j)``-LDP, so both schemes below make the parts sum to the total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .schema import CategoricalDomain


class AllocationScheme(str, Enum):
    UNIFORM = "uniform"
    K_BASED = "k-based"

    @classmethod
    def parse(cls, name) -> AllocationScheme:
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        if key == "kbased":
            key = "k-based"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown allocation scheme {name!r}; expected 'uniform' or 'k-based'") from None


@dataclass(frozen=True)
class PrivacyAllocation:
    scheme: AllocationScheme
    total_epsilon: float
    per_attribute: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.per_attribute:
            raise ValueError("allocation covers no attributes")
        if any(e <= 0 for _, e in self.per_attribute):
            raise ValueError("every per-attribute budget must be positive")
        spent = math.fsum(e for _, e in self.per_attribute)
        if not math.isclose(spent, self.total_epsilon, rel_tol=1e-9):
            raise ValueError(f"budgets sum to {spent}, not {self.total_epsilon}")

    def __getitem__(self, name: str) -> float:
        for attr, eps in self.per_attribute:
            if attr == name:
                return eps
        raise KeyError(name)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.per_attribute)

    def as_dict(self) -> dict[str, float]:
        return dict(self.per_attribute)


def _validate(epsilon: float, attrs: Sequence[CategoricalDomain]) -> float:
    epsilon = float(epsilon)
    if not epsilon > 0 or math.isinf(epsilon):
        raise ValueError(f"total epsilon must be positive and finite, got {epsilon}")
    if not attrs:
        raise ValueError("need at least one attribute to allocate over")
    return epsilon


def allocate_uniform(epsilon: float, attrs: Sequence[CategoricalDomain]) -> PrivacyAllocation:
    epsilon = _validate(epsilon, attrs)
    share = epsilon / len(attrs)
    return PrivacyAllocation(AllocationScheme.UNIFORM, epsilon, tuple((a.name, share) for a in attrs))


def allocate_kbased(epsilon: float, attrs: Sequence[CategoricalDomain]) -> PrivacyAllocation:
    """Budget proportional to domain size: ``eps_j = eps * k_j / sum_i k_i``."""
    epsilon = _validate(epsilon, attrs)
    total_k = sum(a.k for a in attrs)
    return PrivacyAllocation(
        AllocationScheme.K_BASED, epsilon, tuple((a.name, epsilon * a.k / total_k) for a in attrs)
    )


def allocate(scheme: AllocationScheme | str, epsilon: float, attrs: Sequence[CategoricalDomain]) -> PrivacyAllocation:
    scheme = AllocationScheme.parse(scheme)
    if scheme is AllocationScheme.UNIFORM:
        return allocate_uniform(epsilon, attrs)
    return allocate_kbased(epsilon, attrs)
