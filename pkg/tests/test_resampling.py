import io

import numpy as np
import pytest

from kgarrote.bench import generate, make_design
from kgarrote.data import build_distance_stack, standardize_dataset
from kgarrote.errors import NumericalError
from kgarrote.kernel import estimate_smoothing, kernel_matrix, variance_components
from kgarrote.path import PathConfig, solve_path
from kgarrote.resampling import (
    ReplicateRecord,
    ResamplePlan,
    SelectionReport,
    _permutation_replicate,
    _pick,
    bootstrap_select,
    export_report,
    permutation_select,
)

from conftest import seeded_rng


def step_one_active(dataset, kind, plan, config):
    stack = build_distance_stack(dataset, kind)
    fit = estimate_smoothing(stack, dataset.y)
    path = solve_path(stack, dataset.y, fit.alpha, fit.smoothing, config)
    active, scales, _ = _pick(path, stack, dataset.y, fit.smoothing, plan)
    return active, scales, fit


def test_plan_validation():
    with pytest.raises(ValueError):
        ResamplePlan(mode="jackknife", replicates=5, seed=1)
    with pytest.raises(ValueError):
        ResamplePlan(mode="bootstrap", replicates=0, seed=1)
    with pytest.raises(ValueError):
        ResamplePlan(mode="bootstrap", replicates=5, seed=1, threshold=0.0)
    with pytest.raises(ValueError):
        ResamplePlan(mode="bootstrap", replicates=5, seed=1, selection="window")
    with pytest.raises(ValueError):
        ResamplePlan(mode="bootstrap", replicates=5, seed=1, selection="best")
    with pytest.raises(ValueError):
        bootstrap_select(
            None, "gaussian", ResamplePlan(mode="permutation", replicates=2, seed=1)
        )
    with pytest.raises(ValueError):
        permutation_select(
            None, "gaussian", ResamplePlan(mode="bootstrap", replicates=2, seed=1)
        )


def test_permuting_zero_residuals_reproduces_the_base_selection():
    # with no noise to shuffle, every replicate sees the original response
    ds, _, _ = generate(make_design("example-2", n=40), seeded_rng(960))
    plan = ResamplePlan(mode="permutation", replicates=3, seed=5)
    config = PathConfig(grid_size=15)
    active, scales, fit = step_one_active(ds, "gaussian", plan, config)
    refit = variance_components(kernel_matrix(build_distance_stack(ds, "gaussian"), scales), ds.y)
    args = (0, 123, ds, "gaussian", config, plan, ds.y, np.zeros(ds.n), refit.alpha, refit.smoothing)
    rec = _permutation_replicate(args)
    assert not rec.failed
    ref = _permutation_replicate((1, 456, ds, "gaussian", config, plan, ds.y, np.zeros(ds.n), refit.alpha, refit.smoothing))
    assert rec.active == ref.active  # seed cannot matter when residuals vanish


class _IdentityRng:
    def permutation(self, n):
        return np.arange(n)


def test_identity_permutation_reproduces_step_one(monkeypatch):
    ds, _, _ = generate(make_design("example-2", n=40), seeded_rng(961))
    plan = ResamplePlan(mode="permutation", replicates=2, seed=9, threshold=0.5)
    config = PathConfig(grid_size=15)
    monkeypatch.setattr(np.random, "default_rng", lambda seed=None: _IdentityRng())
    report = permutation_select(ds, "gaussian", plan, config)
    # every replicate then reruns the identical synthetic response
    refit_active = report.records[0].active
    assert all(rec.active == refit_active for rec in report.records)
    assert np.all(np.isin(report.freq, [0.0, 1.0]))


def test_bootstrap_single_replicate_has_binary_frequencies():
    ds, _, _ = generate(make_design("example-2", n=48), seeded_rng(962))
    plan = ResamplePlan(mode="bootstrap", replicates=1, seed=77)
    report = bootstrap_select(ds, "gaussian", plan)
    assert report.replicates == 1
    assert set(np.unique(report.freq)) <= {0.0, 1.0}
    assert report.counts.sum() == sum(len(r.active) for r in report.records)


def test_bootstrap_on_pure_noise_rarely_stabilizes_anything():
    # no structure to find: most runs select nothing consistently
    empty_chosen = 0
    max_freqs = []
    for s in range(10):
        rng = seeded_rng(41, s)
        ds = standardize_dataset(rng.standard_normal(40), rng.standard_normal((40, 5)))
        plan = ResamplePlan(mode="bootstrap", replicates=100, seed=1000 + s)
        report = bootstrap_select(ds, "gaussian", plan, PathConfig(grid_size=15))
        max_freqs.append(float(report.freq.max()))
        empty_chosen += report.chosen.size == 0
    assert empty_chosen >= 7
    assert np.mean(max_freqs) < 0.6


def test_bootstrap_with_screening_separates_signal_from_decoys():
    design = make_design("sca-synthetic", n=200, p=120, a=8)
    ds, _, truth = generate(design, seeded_rng(61))
    plan = ResamplePlan(
        mode="bootstrap",
        replicates=40,
        seed=606,
        subsample=120,
        threshold=0.8,
        screen_keep=60,
        selection="window",
        window=8,
    )
    report = bootstrap_select(ds, "linear-polynomial", plan)
    truth = list(truth)
    decoys = [j for j in range(ds.p) if j not in truth]
    assert report.freq[truth].min() > report.freq[decoys].max()
    assert set(report.chosen.tolist()) == set(truth)


def test_permutation_keeps_real_predictors_and_drops_noise():
    ds, _, truth = generate(make_design("example-2", n=48), seeded_rng(71))
    plan = ResamplePlan(mode="permutation", replicates=40, seed=707)
    report = permutation_select(ds, "gaussian", plan, PathConfig(grid_size=25))
    assert set(truth) <= set(report.chosen.tolist())
    decoys = [j for j in range(ds.p) if j not in truth]
    assert report.freq[decoys].max() < plan.threshold


def test_permutation_aborts_when_nothing_selected_on_real_data():
    rng = seeded_rng(81, 1)
    ds = standardize_dataset(rng.standard_normal(30), rng.standard_normal((30, 4)))
    plan = ResamplePlan(mode="permutation", replicates=5, seed=2)
    with pytest.raises(NumericalError, match="null initial model"):
        permutation_select(ds, "gaussian", plan, PathConfig(grid_size=15))


def test_reports_do_not_depend_on_worker_count():
    ds, _, _ = generate(make_design("example-2", n=48), seeded_rng(42))
    plan = ResamplePlan(mode="bootstrap", replicates=6, seed=99)
    config = PathConfig(grid_size=15)
    serial = bootstrap_select(ds, "gaussian", plan, config, jobs=1)
    parallel = bootstrap_select(ds, "gaussian", plan, config, jobs=2)
    assert np.array_equal(serial.counts, parallel.counts)
    assert [r.active for r in serial.records] == [r.active for r in parallel.records]


def test_excess_replicate_failures_abort(monkeypatch):
    ds, _, _ = generate(make_design("example-2", n=40), seeded_rng(963))
    plan = ResamplePlan(mode="bootstrap", replicates=4, seed=3)

    def exploding(args):
        i = args[0]
        if i % 2 == 0:
            return ReplicateRecord(i, (), False, True, "NumericalError: boom")
        return ReplicateRecord(i, (0,), True, False)

    monkeypatch.setattr("kgarrote.resampling._bootstrap_replicate", exploding)
    with pytest.raises(NumericalError, match="replicates failed"):
        bootstrap_select(ds, "gaussian", plan)


def test_tolerated_failures_count_as_empty(monkeypatch):
    ds, _, _ = generate(make_design("example-2", n=40), seeded_rng(964))
    plan = ResamplePlan(
        mode="bootstrap", replicates=4, seed=3, max_failure_fraction=0.5, threshold=0.5
    )

    def halting(args):
        i = args[0]
        if i == 0:
            return ReplicateRecord(i, (), False, True, "NumericalError: boom")
        return ReplicateRecord(i, (1, 2), True, False)

    monkeypatch.setattr("kgarrote.resampling._bootstrap_replicate", halting)
    report = bootstrap_select(ds, "gaussian", plan)
    assert report.failures == 1
    assert report.counts[1] == 3
    assert report.freq[1] == pytest.approx(0.75)  # failures still divide the count
    assert report.chosen.tolist() == [1, 2]


def test_export_report_schema():
    records = (
        ReplicateRecord(0, (0, 2), True, False),
        ReplicateRecord(1, (0,), True, False),
        ReplicateRecord(2, (), False, True, "NumericalError: x"),
    )
    report = SelectionReport(
        counts=np.array([2, 0, 1]),
        freq=np.array([2 / 3, 0.0, 1 / 3]),
        chosen=np.array([0]),
        threshold=0.6,
        replicates=3,
        failures=1,
        records=records,
    )
    buf = io.StringIO()
    export_report(report, buf, names=["a", "b", "c"])
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "predictor,name,count,freq,chosen"
    assert lines[1].split(",") == ["0", "a", "2", repr(2 / 3), "1"]
    assert lines[4] == ""
    assert lines[5] == "replicate,failed,converged,active,message"
    assert lines[6].split(",") == ["0", "0", "1", "0;2", ""]
    assert lines[8].split(",")[1] == "1"
