import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serpentflow import spectral as sp
from serpentflow.numerics import make_rng

pow2 = st.sampled_from([4, 8, 16, 32])


def rand(shape, seed=0):
    return make_rng(seed, "spectral-test").standard_normal(shape)


def test_constant_signal_transform():
    np.testing.assert_allclose(sp.dft_forward([1.0, 1.0, 1.0, 1.0]), [4, 0, 0, 0], atol=1e-15)


def test_impulse_transform():
    np.testing.assert_allclose(sp.dft_forward([1.0, 0.0, 0.0, 0.0]), [1, 1, 1, 1], atol=1e-15)


def test_length_8_against_direct_sum():
    x = rand(8)
    assert np.max(np.abs(sp.dft_forward(x) - sp.dft_direct(x))) < 1e-10


def test_direct_sum_matches_textbook_definition():
    # independent of both code paths: explicit double loop
    x = rand(6, 1)
    ref = [sum(x[j] * np.exp(-2j * np.pi * j * k / 6) for j in range(6)) for k in range(6)]
    np.testing.assert_allclose(sp.dft_direct(x), ref, atol=1e-12)


def test_non_power_of_two_falls_back():
    x = rand((3, 12), 2)
    np.testing.assert_allclose(sp.dft_forward(x, 1), sp.dft_direct(x, 1), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(n=pow2, m=pow2, seed=st.integers(0, 10_000))
def test_roundtrip_and_parseval_2d(n, m, seed):
    x = rand((n, m), seed)
    z = sp.dft_forward(x)
    assert np.max(np.abs(sp.dft_inverse(z) - x)) < 1e-9
    assert np.sum(np.abs(z) ** 2) == pytest.approx(n * m * np.sum(x ** 2), rel=1e-9)


def test_signed_bins():
    assert sp.signed_bins(8).tolist() == [0, 1, 2, 3, -4, -3, -2, -1]
    assert sp.signed_bins(5).tolist() == [0, 1, 2, -2, -1]


def test_mask_1d_length_8_cutoff_2():
    m = sp.radial_mask((8,), 2.0).mask
    assert np.nonzero(m)[0].tolist() == [0, 1, 7]


def test_mask_2d_cutoff_1_is_dc_only():
    m = sp.radial_mask((8, 8), 1.0).mask
    assert m.sum() == 1 and m[0, 0]


def test_mask_limits_and_errors():
    assert not sp.radial_mask((16,), 0.0).mask.any()
    assert sp.radial_mask((8, 8), sp.nyquist_radius((8, 8)) + 1e-9).mask.all()
    with pytest.raises(ValueError):
        sp.radial_mask((8,), -1.0)


@given(n=pow2, m=pow2, cutoff=st.floats(0, 30))
def test_mask_is_hermitian_and_keeps_dc(n, m, cutoff):
    mask = sp.radial_mask((n, m), cutoff).mask
    flipped = np.roll(mask[::-1, ::-1], (1, 1), axis=(0, 1))
    # bins -n/2 have no positive partner; compare only the symmetric part
    sym = np.ones_like(mask)
    sym[n // 2, :] = False
    sym[:, m // 2] = False
    assert np.array_equal(mask[sym], flipped[sym])
    assert mask[0, 0] == (cutoff > 0)


def tone(n, k, phase=0.0):
    t = np.arange(n)
    return np.cos(2 * np.pi * k * t / n + phase)


def test_lowpass_above_nyquist_is_identity():
    x = rand(16)
    np.testing.assert_array_equal(sp.lowpass(x, 100.0), x)


def test_lowpass_removes_tone_above_cutoff():
    assert np.max(np.abs(sp.lowpass(tone(32, 5), 3.0))) < 1e-9


def test_lowpass_keeps_exactly_the_low_tone():
    x = tone(64, 1, 0.3) + 0.7 * tone(64, 5, 1.1)
    np.testing.assert_allclose(sp.lowpass(x, 3.0), tone(64, 1, 0.3), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=pow2, m=pow2, cutoff=st.floats(0, 25), seed=st.integers(0, 1000))
def test_band_algebra(n, m, cutoff, seed):
    x = rand((n, m), seed)
    lo, hi = sp.lowpass(x, cutoff), sp.highpass(x, cutoff)
    assert np.max(np.abs(lo + hi - x)) < 1e-9
    assert np.max(np.abs(sp.lowpass(lo, cutoff) - lo)) < 1e-9
    assert np.sum(lo ** 2) + np.sum(hi ** 2) == pytest.approx(np.sum(x ** 2), rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
def test_lowpass_is_linear(a, b, seed):
    x, y = rand(32, seed), rand(32, seed + 1)
    lhs = sp.lowpass(a * x + b * y, 6.0)
    rhs = a * sp.lowpass(x, 6.0) + b * sp.lowpass(y, 6.0)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_to_real_rejects_large_imaginary_part():
    with pytest.raises(FloatingPointError):
        sp.to_real(np.array([1.0 + 1e-3j]))


def test_pseudo_pair_limits():
    x = rand((8, 8))
    assert np.array_equal(sp.make_pseudo(x, 100.0, seed=1).pseudo_input, x)
    pair = sp.make_pseudo(x, 0.0, seed=1)
    assert np.array_equal(pair.pseudo_input, pair.noise)


@settings(max_examples=30, deadline=None)
@given(n=pow2, cutoff=st.floats(0.5, 20), seed=st.integers(0, 1000))
def test_pseudo_pair_band_identities(n, cutoff, seed):
    x = rand((n, n), seed) * 3.0
    pair = sp.make_pseudo(x, cutoff, seed=seed)
    assert np.max(np.abs(sp.lowpass(pair.pseudo_input, cutoff) - sp.lowpass(x, cutoff))) < 1e-9
    assert np.max(np.abs(sp.highpass(pair.pseudo_input, cutoff)
                         - sp.highpass(pair.noise, cutoff))) < 1e-9


def test_two_seeds_share_low_band_and_differ_above():
    x = rand(64)
    p1 = sp.make_pseudo(x, 5.0, seed=1).pseudo_input
    p2 = sp.make_pseudo(x, 5.0, seed=2).pseudo_input
    assert np.max(np.abs(sp.lowpass(p1, 5.0) - sp.lowpass(p2, 5.0))) < 1e-9
    assert np.max(np.abs(sp.highpass(p1, 5.0) - sp.highpass(p2, 5.0))) > 0.1


def test_batched_filter_matches_per_sample():
    x = rand((3, 16, 16))
    batched = sp.lowpass(x, 4.0, d=2)
    for i in range(3):
        np.testing.assert_allclose(batched[i], sp.lowpass(x[i], 4.0), atol=1e-14)


def test_field_validation():
    sp.Field(np.zeros((4, 4)), 1.0)
    with pytest.raises(ValueError):
        sp.Field(np.zeros(3))
    with pytest.raises(ValueError):
        sp.Field(np.array([0.0, 1.0, np.nan, 2.0]))
    with pytest.raises(ValueError):
        sp.Field(np.zeros(8), sample_rate=0)
