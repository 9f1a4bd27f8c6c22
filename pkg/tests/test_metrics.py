import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serpentflow import spectral
from serpentflow.metrics import (
    MetricReport,
    cdf_curve,
    correlation_map,
    correlation_score,
    default_points,
    ks,
    nse,
    psd,
    realism_accuracy,
    temporal_rmse,
)
from serpentflow.numerics import make_rng

# values on a 1/8 grid so strictly increasing maps stay strictly increasing in floating point
grid_values = st.integers(-8 * 10 ** 6, 8 * 10 ** 6).map(lambda k: k / 8)
samples = st.lists(grid_values, min_size=1, max_size=40)


def ks_oracle(a, b):
    # brute force over every observed value
    a, b = np.asarray(a), np.asarray(b)
    return max(abs(np.mean(a <= v) - np.mean(b <= v)) for v in np.concatenate([a, b]))


def test_ks_identical_is_zero():
    x = make_rng(0).standard_normal(100)
    assert ks(x, x) == 0.0


def test_ks_shifted_uniforms():
    rng = make_rng(1)
    assert abs(ks(rng.uniform(0, 1, 100_000), rng.uniform(0.5, 1.5, 100_000)) - 0.5) < 0.01


def test_ks_disjoint_is_one():
    assert ks([1.0, 2.0], [3.0, 4.0, 5.0]) == 1.0


def test_ks_rejects_empty():
    with pytest.raises(ValueError):
        ks([], [1.0])


@given(samples, samples)
def test_ks_matches_brute_force_and_is_symmetric(a, b):
    assert ks(a, b) == pytest.approx(ks_oracle(a, b), abs=1e-12)
    assert ks(a, b) == ks(b, a)


@given(samples, samples)
def test_ks_invariant_under_increasing_map(a, b):
    f = lambda v: np.arctan(np.asarray(v) / 1e5) * 3 + 1
    assert ks(a, b) == pytest.approx(ks(f(a), f(b)), abs=1e-12)


def test_nse_examples():
    r = np.array([1.0, 2.0, 3.0])
    assert nse(r, r) == 1.0
    assert nse(np.full(3, r.mean()), r) == 0.0
    assert nse([1.0, 1.0, 3.0], r) == pytest.approx(0.5)


def test_nse_rejects_constant_reference_and_mismatch():
    with pytest.raises(ValueError, match="constant"):
        nse([1.0, 2.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        nse([1.0, 2.0, 3.0], [1.0, 2.0])


@given(st.lists(grid_values, min_size=2, max_size=20), st.integers(0, 100))
def test_nse_is_one_only_for_exact_match(ref, seed):
    r = np.asarray(ref)
    if np.ptp(r) == 0:
        return
    assert nse(r, r) == 1.0
    p = r.copy()
    p[seed % len(r)] += 1.0
    assert nse(p, r) < 1.0


def test_temporal_rmse_examples():
    s = make_rng(2).standard_normal((50, 4, 4))
    assert temporal_rmse(s, s) == 0.0
    t = np.linspace(0, 1, 10_001)
    assert temporal_rmse(t, t + 1, standardize=False) == pytest.approx(1.0)
    sine = np.sin(2 * np.pi * 5 * t[:-1])
    assert temporal_rmse(sine, np.zeros_like(sine), standardize=False) == pytest.approx(
        1 / np.sqrt(2), abs=1e-3)
    with pytest.raises(ValueError):
        temporal_rmse(np.zeros(3), np.zeros(4))


def test_psd_single_tone_and_parseval():
    n = 64
    x = np.cos(2 * np.pi * 5 * np.arange(n) / n)
    spec = psd(x)
    assert int(np.argmax(spec.power)) == 5
    assert np.all(np.delete(spec.power, 5) < 1e-20)
    assert spec.total() == pytest.approx(np.sum(x ** 2), rel=1e-12)
    f = make_rng(3).standard_normal((16, 16))
    assert psd(f).total() == pytest.approx(np.sum(f ** 2), rel=1e-12)


def test_psd_white_noise_is_flat():
    x = make_rng(4).standard_normal((400, 32, 32))
    p = psd(x, 2).power
    assert np.all(np.abs(p / p.mean() - 1) < 0.2)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 20), st.integers(0, 100))
def test_psd_of_lowpassed_field_vanishes_above_cutoff(cutoff, seed):
    x = spectral.lowpass(make_rng(seed).standard_normal((32, 32)), cutoff)
    spec = psd(x)
    assert np.all(spec.power[spec.radius >= np.ceil(cutoff)] < 1e-20)


def test_correlation_map_shared_series():
    s = make_rng(5).standard_normal(30)
    fields = np.repeat(s[:, None, None], 16, axis=1).reshape(30, 4, 4)
    np.testing.assert_allclose(correlation_map(fields, (1, 2)).values, 1.0, atol=1e-12)


def test_correlation_map_negated_pixel():
    f = make_rng(6).standard_normal((40, 3, 3))
    f[:, 2, 2] = -f[:, 0, 0]
    m = correlation_map(f, (0, 0)).values
    assert m[0, 0] == pytest.approx(1.0) and m[2, 2] == pytest.approx(-1.0)


def test_correlation_map_independent_noise():
    m = correlation_map(make_rng(7).standard_normal((100, 8, 8)), (3, 3)).values
    off = np.delete(m.ravel(), 3 * 8 + 3)
    assert np.all(np.abs(off) < 0.3)
    assert abs(off.mean()) < 0.05


def test_correlation_map_zero_variance_pixels_counted():
    f = make_rng(8).standard_normal((10, 3, 3))
    f[:, 1, 1] = 2.0
    f[:, 0, 2] = -1.0
    cm = correlation_map(f, (0, 0))
    assert cm.zero_variance == 2
    assert cm.values[1, 1] == 0.0 and np.all(np.isfinite(cm.values))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_correlation_values_bounded(seed):
    m = correlation_map(make_rng(seed).standard_normal((5, 4, 4)), (0, 0)).values
    assert np.all(np.abs(m) <= 1.0)
    assert m[0, 0] == pytest.approx(1.0)


def test_correlation_map_validation():
    with pytest.raises(ValueError):
        correlation_map(np.zeros((2, 3, 3)), (0, 0))
    with pytest.raises(ValueError):
        correlation_map(np.zeros((5, 3, 3)), (7, 0))


def test_correlation_score():
    f = make_rng(9).standard_normal((30, 6, 6))
    assert correlation_score(f, f) == 0.0
    assert len(default_points((6, 6))) == 8
    assert correlation_score(f, make_rng(10).standard_normal((30, 6, 6))) > 0.0


def test_realism_accuracy_null_and_separable():
    rng = make_rng(11)
    a, b = rng.standard_normal((2, 400, 32))
    acc = realism_accuracy(a, b, seed=0)
    assert abs(acc - 0.5) <= 0.07
    assert realism_accuracy(b + 5.0, b, seed=0) > 0.95
    assert realism_accuracy(a, b, seed=0) == acc


def test_cdf_curve_is_monotone():
    q, p = cdf_curve(make_rng(12).standard_normal(1000))
    assert len(q) == 512 and np.all(np.diff(q) >= 0) and np.all(np.diff(p) > 0)


def test_report_csv(tmp_path):
    r = MetricReport()
    r.add("ks", 0.25)
    r.curves["cdf"] = (np.array([0.0, 1.0]), np.array([0.5, 1.0]))
    r.write(tmp_path)
    assert (tmp_path / "summary.csv").read_text() == "name,value\nks,0.25\n"
    assert (tmp_path / "cdf.csv").read_text().splitlines()[0] == "x,y"
    with pytest.raises(ValueError):
        r.add("bad", float("nan"))
