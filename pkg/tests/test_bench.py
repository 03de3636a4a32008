import io

import numpy as np
import pytest

from kgarrote.bench import (
    DESIGN_NAMES,
    export_summary,
    format_summary,
    generate,
    make_design,
    run_experiment,
    _nonadditive_signal,
)
from kgarrote.errors import DataError

from conftest import seeded_rng


def test_design_catalog_and_defaults():
    assert set(DESIGN_NAMES) == {
        "example-1",
        "example-2",
        "example-3",
        "zhao-yu",
        "sca-synthetic",
    }
    d = make_design("example-1", n=100)
    assert (d.p, d.a, d.signal_var, d.true_scale) == (11, 5, 10.0, 2.0)
    assert make_design("example-2", n=50).p == 10
    assert make_design("example-3", n=50).p == 80
    assert make_design("sca-synthetic", n=50).a == 16
    assert d.truth_active == (0, 1, 2, 3, 4)
    wide = make_design("example-3", n=50, p=40)
    assert wide.p == 40 and wide.a == 5


def test_design_validation():
    with pytest.raises(DataError, match="unknown design"):
        make_design("nope", n=50)
    with pytest.raises(DataError):
        make_design("example-2", n=1)
    with pytest.raises(DataError):
        make_design("example-2", n=50, a=11)
    with pytest.raises(DataError, match="fixed at p=3"):
        make_design("zhao-yu", n=50, p=5)
    with pytest.raises(DataError, match="five-predictor"):
        generate(make_design("example-2", n=50, a=3), seeded_rng(0))


def test_fixed_signal_value_at_origin():
    # cos terms contribute 10 + 8 at zero, everything else vanishes
    assert _nonadditive_signal(np.zeros((1, 5)))[0] == pytest.approx(18.0)


def test_generate_returns_standardized_data_and_centered_signal():
    for name in DESIGN_NAMES:
        n = 60 if name != "sca-synthetic" else 40
        ds, f, truth = generate(make_design(name, n=n), seeded_rng(950))
        assert ds.n == n
        assert truth == tuple(range(len(truth)))
        assert abs(f.mean()) < 1e-10
        assert abs(ds.y.mean()) < 1e-10
        assert np.allclose((ds.X**2).sum(axis=0), 1.0, atol=1e-10)
        assert np.allclose(ds.X.mean(axis=0), 0.0, atol=1e-12)
        assert ds.column_names[0] == "x1"


def test_generate_is_bit_reproducible():
    for name in ("example-1", "zhao-yu"):
        a = generate(make_design(name, n=40), seeded_rng(951))
        b = generate(make_design(name, n=40), seeded_rng(951))
        assert np.array_equal(a[0].y, b[0].y)
        assert np.array_equal(a[0].X, b[0].X)
        assert np.array_equal(a[1], b[1])


def test_generate_uses_design_seed_when_no_rng_given():
    d = make_design("zhao-yu", n=30, seed=7)
    a = generate(d)
    b = generate(d)
    assert np.array_equal(a[0].y, b[0].y)


def test_mixed_predictor_is_correlated_with_both_parents():
    ds, _, _ = generate(make_design("zhao-yu", n=4000), seeded_rng(952))
    # population correlation of the mix with each parent is (2/3)/sqrt(1)
    r1 = float(ds.X[:, 2] @ ds.X[:, 0])
    r2 = float(ds.X[:, 2] @ ds.X[:, 1])
    assert r1 == pytest.approx(2.0 / 3.0, abs=0.05)
    assert r2 == pytest.approx(2.0 / 3.0, abs=0.05)


def test_gp_draw_marginal_variance_matches_signal_level():
    # single draws of the process are strongly correlated across rows, so the
    # level only shows up in the raw response pooled over many draws
    d = make_design("example-1", n=16)
    raw = np.concatenate(
        [generate(d, seeded_rng(5, s))[0].original()[0] for s in range(400)]
    )
    level = d.signal_var + d.noise_var
    assert 0.75 * level <= float(raw.var()) <= 1.25 * level


def test_single_run_summary_flags_itself():
    summary = run_experiment(make_design("example-2", n=48), "gaussian", runs=1, seed=3)
    assert summary.single_run
    assert summary.runs == 1 and summary.failures == 0
    assert summary.fp_sd == 0.0 and summary.fn_sd == 0.0
    assert set(np.unique(summary.selection_freq)) <= {0.0, 1.0}


def test_experiment_summary_statistics(example2_summary_50):
    s = example2_summary_50
    assert s.design == "example-2" and s.kernel == "gaussian"
    assert s.runs == 50 and s.failures == 0
    assert not s.single_run
    assert s.selection_freq.shape == (10,)
    assert np.all(s.selection_freq[:5] >= 0.9)
    # mean squared residual splits into signal error plus noise, so the gap
    # to the signal-only error sits near the unit noise variance
    assert 0.5 <= s.rss_mean - s.se_mean <= 1.5
    assert s.fp_mean <= 0.3 and s.fn_mean <= 0.1


def test_format_summary_renders_one_row(example2_summary_50):
    text = format_summary(example2_summary_50)
    assert text.startswith("example-2/gaussian (runs=50, failed=0)")
    for tag in ("FP ", "FN ", "MS ", "RSS ", "SE "):
        assert tag in text
    assert "\n" not in text


def test_export_summary_schema(example2_summary_50):
    buf = io.StringIO()
    export_summary(example2_summary_50, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "metric,mean,sd"
    metrics = [line.split(",")[0] for line in lines[1:6]]
    assert metrics == ["fp_rate", "fn_rate", "model_size", "rss_n", "se"]
    assert lines[6] == ""
    assert lines[7] == "predictor,selection_freq"
    freqs = [line.split(",") for line in lines[8:]]
    assert len(freqs) == 10
    assert [f[0] for f in freqs[:2]] == ["x1", "x2"]
    parsed = [float(f[1]) for f in freqs]
    assert np.allclose(parsed, example2_summary_50.selection_freq)


def test_run_experiment_rejects_zero_runs():
    with pytest.raises(ValueError):
        run_experiment(make_design("example-2", n=48), "gaussian", runs=0, seed=1)
