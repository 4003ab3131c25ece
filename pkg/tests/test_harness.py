import csv
import math
import statistics
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from ldpfair import harness
from ldpfair.fairness import FairnessReport
from ldpfair.harness import (
    NA,
    ConfigError,
    ExperimentConfig,
    MetricsRow,
    aggregate,
    draw_attribute_subset,
    load_config,
    run_experiment,
    write_outputs,
)
from ldpfair.model import Hyperparameters, UtilityReport
from ldpfair.synthetic import synthetic_schema

FAST = Hyperparameters(epochs=25)


def small_config(**kw):
    base = dict(
        synthetic={"n": 500, "seed": 1},
        mechanisms=("GRR",),
        allocations=("uniform",),
        epsilons=(1.0, 2.0, 4.0),
        runs=2,
        seed=5,
        hyper=FAST,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_row_count():
    rows = run_experiment(small_config())
    assert len(rows) == 2 * (1 + 3) == 8
    assert [r.mechanism for r in rows].count("NonDP") == 2
    nondp = [r for r in rows if r.epsilon is None]
    assert all(r.allocation == "NonDP" and r.d_s == 0 for r in nondp)


def test_row_count_formula_multiple_cells():
    cfg = small_config(mechanisms=("GRR", "SS"), allocations=("uniform", "k-based"), epsilons=(1.0, 8.0), runs=1)
    assert len(run_experiment(cfg)) == 1 * (1 + 2 * 2 * 2)


def test_outputs_are_byte_identical(tmp_path):
    cfg = small_config(mechanisms=("OLH", "THE"), curves=True)
    a = write_outputs(cfg, run_experiment(cfg), tmp_path / "a")
    b = write_outputs(cfg, run_experiment(cfg), tmp_path / "b")
    assert set(a) == set(b)
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes(), key


def test_parallel_matches_serial():
    cfg = small_config(runs=3)
    serial = run_experiment(cfg, jobs=1)
    parallel = run_experiment(cfg, jobs=2)
    assert serial == parallel


def test_adding_a_mechanism_leaves_others_unchanged():
    one = run_experiment(small_config(mechanisms=("OUE",)))
    two = run_experiment(small_config(mechanisms=("GRR", "OUE")))
    assert [r for r in one if r.mechanism == "OUE"] == [r for r in two if r.mechanism == "OUE"]


def test_same_test_matrix_and_hyperparameters_everywhere(monkeypatch):
    seen = []
    original = harness._evaluate

    def spy(train_mat, test_mat, hyper):
        seen.append((test_mat.features.copy(), test_mat.labels.copy(), test_mat.group.copy(), hyper))
        return original(train_mat, test_mat, hyper)

    monkeypatch.setattr(harness, "_evaluate", spy)
    run_experiment(small_config(runs=1, mechanisms=("GRR", "THE")))
    assert len(seen) == 1 + 2 * 3
    ref = seen[0]
    for feats, labels, group, hyper in seen[1:]:
        assert np.array_equal(feats, ref[0])
        assert np.array_equal(labels, ref[1]) and np.array_equal(group, ref[2])
        assert hyper == ref[3] == FAST


def test_large_budget_rows_match_nondp_utility():
    cfg = small_config(synthetic={"n": 2000, "seed": 2}, epsilons=(50.0 * 4,), runs=1, hyper=Hyperparameters())
    nondp, cell = run_experiment(cfg)
    for name in ("acc", "f1", "auc", "recall"):
        assert getattr(cell.utility, name) == pytest.approx(getattr(nondp.utility, name), abs=0.02)


# --- attribute subsets -------------------------------------------------------


def test_subset_forced_when_two_available():
    schema = synthetic_schema().with_sensitive(["gender", "race"])
    r = np.random.default_rng(0)
    for _ in range(50):
        assert draw_attribute_subset(schema, r) == ["gender", "race"]


def six_sensitive_schema():
    return synthetic_schema().with_sensitive(
        ["age", "education", "occupation", "race", "gender", "native-country"]
    )


def test_subset_always_keeps_protected_and_has_uniform_size():
    schema = six_sensitive_schema()
    r = np.random.default_rng(1)
    sizes = Counter()
    for _ in range(10_000):
        subset = draw_attribute_subset(schema, r)
        assert "gender" in subset
        assert len(set(subset)) == len(subset)
        assert set(subset) <= set(schema.sensitive)
        sizes[len(subset)] += 1
    assert sorted(sizes) == [2, 3, 4, 5, 6]
    assert stats.chisquare([sizes[s] for s in range(2, 7)]).pvalue > 1e-3


def test_subset_rejects_too_few():
    schema = synthetic_schema().with_sensitive(["gender"])
    with pytest.raises(ValueError):
        draw_attribute_subset(schema, np.random.default_rng(0))


def test_dynamic_rows_record_subset():
    cfg = small_config(dynamic_ds=(2, 4), runs=1, epsilons=(1.0, 2.0, 4.0, 8.0))
    rows = run_experiment(cfg)
    for r in rows[1:]:
        assert 2 <= r.d_s <= 4 and r.d_s == len(r.sensitive)
        assert "gender" in r.sensitive


def test_dynamic_max_above_available_is_rejected():
    with pytest.raises(ConfigError):
        run_experiment(small_config(dynamic_ds=(2, 6)))


# --- aggregation -------------------------------------------------------------


def fake_row(run, value, mech="GRR", eps=1.0):
    fair = FairnessReport(di=value, spd=value, eod=value, oad=value)
    util = UtilityReport(acc=value, f1=value, auc=value, recall=value)
    return MetricsRow(run, mech, "uniform", eps, 4, ("a",), fair, util)


def test_aggregate_single_run():
    (s, *_) = aggregate([fake_row(0, 0.3)])
    assert (s.mean, s.sd, s.count, s.excluded) == (0.3, 0.0, 1, 0)


def test_aggregate_two_runs():
    out = aggregate([fake_row(0, 0.3), fake_row(1, 0.6)])
    assert out[0].mean == pytest.approx(0.45, abs=1e-15)
    assert out[0].sd == pytest.approx(statistics.stdev([0.3, 0.6]))


def test_aggregate_twenty_rows_against_independent_sums():
    r = np.random.default_rng(4)
    values = r.normal(size=20)
    summary = aggregate([fake_row(i, float(v)) for i, v in enumerate(values)])
    mean = sum(float(v) for v in values) / 20
    sd = math.sqrt(sum((float(v) - mean) ** 2 for v in values) / 19)
    for s in summary:
        assert abs(s.mean - mean) < 1e-12
        assert abs(s.sd - sd) < 1e-12
        assert np.isclose(s.sd, values.std(ddof=1), rtol=0, atol=1e-12)


def test_aggregate_excludes_undefined():
    out = aggregate([fake_row(0, math.nan), fake_row(1, 0.5), fake_row(2, 0.7)])
    assert out[0].count == 2 and out[0].excluded == 1
    assert out[0].mean == pytest.approx(0.6)
    (s, *_) = aggregate([fake_row(0, math.nan)])
    assert math.isnan(s.mean) and s.excluded == 1


def test_aggregate_groups_by_cell():
    rows = [fake_row(0, 0.1, eps=1.0), fake_row(0, 0.9, eps=2.0), fake_row(0, 0.5, mech="SS")]
    keys = {(s.mechanism, s.epsilon) for s in aggregate(rows)}
    assert keys == {("GRR", 1.0), ("GRR", 2.0), ("SS", 1.0)}


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_undefined_serialized_as_na(tmp_path):
    cfg = small_config(runs=1)
    rows = [fake_row(0, math.nan), fake_row(0, 0.25, eps=2.0)]
    paths = write_outputs(cfg, rows, tmp_path)
    with paths["rows"].open() as fh:
        table = list(csv.DictReader(fh))
    assert table[0]["DI"] == NA and table[0]["recall"] == NA
    assert table[1]["DI"] == "0.25"
    assert table[0]["classifier"] == "logistic-regression"
    summary = paths["summary"].read_text()
    assert ",NA,NA,0,1" in summary


def test_nondp_epsilon_token(tmp_path):
    cfg = small_config(runs=1, epsilons=(1.0,))
    paths = write_outputs(cfg, run_experiment(cfg), tmp_path)
    with paths["rows"].open() as fh:
        first = next(csv.DictReader(fh))
    assert first["epsilon"] == "NonDP" and first["mechanism"] == "NonDP"


# --- config ------------------------------------------------------------------


def test_load_config_resolves_paths(tmp_path):
    (tmp_path / "c.yaml").write_text(
        "dataset: data.csv\nschema: s.yaml\nmechanisms: [grr, ss]\nallocations: [k_based]\n"
        "epsilons: [1, 2]\nruns: 3\nclassifier: {epochs: 10}\ndynamic_ds: {min: 2, max: 3}\n"
    )
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.dataset == str(tmp_path / "data.csv")
    assert [m.value for m in cfg.mechanisms] == ["GRR", "SS"]
    assert cfg.allocations[0].value == "k-based"
    assert cfg.hyper.epochs == 10 and cfg.dynamic_ds == (2, 3)


@pytest.mark.parametrize(
    "body",
    [
        "synthetic: {n: 100}\nbogus: 1\n",
        "synthetic: {n: 100}\nepsilons: [0, 1]\n",
        "synthetic: {n: 100}\nepsilons: [1, 1]\n",
        "synthetic: {n: 100}\nruns: 0\n",
        "synthetic: {n: 100}\nmechanisms: [HRR]\n",
        "dataset: x.csv\n",
        "synthetic: {n: 100}\ndynamic_ds: [3, 2]\n",
        "synthetic: {n: 100}\ntrain_fraction: 1.5\n",
        "- just\n- a list\n",
    ],
)
def test_config_errors(tmp_path, body):
    (tmp_path / "c.yaml").write_text(body)
    with pytest.raises(ValueError):
        load_config(tmp_path / "c.yaml")


def test_shipped_configs_load():
    from pathlib import Path

    for p in sorted(Path(__file__).parent.parent.joinpath("configs").glob("experiment_*.yaml")):
        assert isinstance(load_config(p), ExperimentConfig)
