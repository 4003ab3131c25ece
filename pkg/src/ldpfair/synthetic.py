"""Licence-free synthetic census-like data with an induced gender bias.

The default shape mirrors the Adult sensitive set (gender k=2, race k=5,
native-country k=41, age k=74) plus three non-sensitive attributes. The
label depends on gender directly and through gender-correlated occupation
and working hours, so an unconstrained classifier shows a disparate impact
well below 1.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .schema import CategoricalDomain, Dataset, DatasetSchema, schema_to_config, write_csv

GENDERS = ("Male", "Female")
RACES = ("White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other")
EDUCATION = ("Preschool", "Primary", "HS-grad", "Some-college", "Assoc", "Bachelors", "Masters", "Doctorate")
OCCUPATIONS = ("Service", "Clerical", "Sales", "Craft", "Professional", "Managerial")
HOURS = ("<20", "20-34", "35-40", "41-50", ">50")


def synthetic_schema(n_countries: int = 41, age_min: int = 17, age_max: int = 90) -> DatasetSchema:
    countries = ("United-States",) + tuple(f"Country-{i:02d}" for i in range(1, n_countries))
    attributes = (
        CategoricalDomain("age", tuple(str(a) for a in range(age_min, age_max + 1))),
        CategoricalDomain("education", EDUCATION),
        CategoricalDomain("occupation", OCCUPATIONS),
        CategoricalDomain("race", RACES),
        CategoricalDomain("gender", GENDERS),
        CategoricalDomain("hours-per-week", HOURS),
        CategoricalDomain("native-country", countries),
        CategoricalDomain("income", ("<=50K", ">50K")),
    )
    return DatasetSchema(
        attributes=attributes,
        sensitive=("gender", "race", "native-country", "age"),
        protected="gender",
        target="income",
        privileged_value="Male",
        positive_label=">50K",
        name="synthetic-adult",
    )


def _categorical(rng, probs, size):
    probs = np.asarray(probs, dtype=float)
    return rng.choice(len(probs), size=size, p=probs / probs.sum())


def make_synthetic(
    n: int = 10_000,
    seed: int = 0,
    gender_effect: float = 0.3,
    proxy_strength: float = 0.6,
    base_logit: float = -0.2,
    n_countries: int = 41,
) -> Dataset:
    """Draw ``n`` rows; ``gender_effect`` is the direct log-odds bonus of the privileged group."""
    rng = np.random.default_rng(seed)
    schema = synthetic_schema(n_countries=n_countries)
    k_age = schema.domain("age").k

    male = rng.random(n) < 0.67
    race = _categorical(rng, [0.85, 0.09, 0.03, 0.01, 0.02], n)
    country = np.where(rng.random(n) < 0.9, 0, rng.integers(1, n_countries, size=n))
    age = np.clip(np.rint(rng.normal(21, 13, size=n)), 0, k_age - 1).astype(np.int64)
    education = _categorical(rng, [0.02, 0.08, 0.32, 0.22, 0.08, 0.17, 0.08, 0.03], n)

    # Occupation and hours lean towards the well-paid end for the privileged group.
    occ_tilt = np.linspace(-1, 1, len(OCCUPATIONS))
    occ_logits = np.outer(np.where(male, proxy_strength, -proxy_strength), occ_tilt) * 0.6
    occ_logits += 0.4 * np.outer((education - 3.5) / 3.5, occ_tilt)
    occupation = _sample_rows(rng, occ_logits)
    hours_tilt = np.linspace(-1, 1, len(HOURS))
    hours = _sample_rows(rng, np.outer(np.where(male, proxy_strength, -proxy_strength), hours_tilt) * 0.8)

    age_years = age + 17
    age_effect = -2.2 * ((np.minimum(age_years, 70) - 48) / 25) ** 2
    logit = (
        base_logit
        + gender_effect * male
        + 0.3 * (race == 0)
        - 0.2 * (country != 0)
        + age_effect
        + 0.45 * (education - 3)
        + 0.35 * occ_tilt[occupation] * 2
        + 0.3 * hours_tilt[hours] * 2
    )
    income = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(np.int64)

    columns = {
        "age": age,
        "education": education,
        "occupation": occupation,
        "race": race,
        "gender": np.where(male, 0, 1),
        "hours-per-week": hours,
        "native-country": country,
        "income": income,
    }
    codes = np.column_stack([columns[name] for name in schema.names])
    return Dataset(schema, codes)


def _sample_rows(rng, logits):
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    cdf = np.cumsum(probs / probs.sum(axis=1, keepdims=True), axis=1)
    u = rng.random(len(logits))[:, None]
    return np.minimum((u > cdf).sum(axis=1), logits.shape[1] - 1)


def write_synthetic(directory: str | Path, n: int = 10_000, seed: int = 0, **kwargs) -> tuple[Path, Path]:
    """Write ``synthetic.csv`` and ``synthetic_schema.yaml`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    d = make_synthetic(n=n, seed=seed, **kwargs)
    data_path = directory / "synthetic.csv"
    schema_path = directory / "synthetic_schema.yaml"
    write_csv(d, data_path)
    with schema_path.open("w", encoding="utf-8") as fh:
        yaml.safe_dump(schema_to_config(d.schema), fh, sort_keys=False)
    return data_path, schema_path
