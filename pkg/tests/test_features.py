import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vmdtex.errors import BadOrder, DegenerateImage, DimensionMismatch, NonFinite
from vmdtex.features import (
    EntropyOrders,
    Histogram,
    ZernikeSpec,
    box_counts,
    extract_features,
    feature_names,
    fractal_dimension,
    intensity_histogram,
    kapur_entropy,
    quantize,
    radial_coefficients,
    radial_polynomial,
    renyi_entropy,
    resample_bilinear,
    yager_entropy,
    zernike_magnitudes,
    zernike_moments,
)
from vmdtex.vmd import DecompositionLevel, DecompositionTree, Mode2D, iterative_vmd

X = 256


def prob_vectors(min_bins=1, max_bins=300):
    return arrays(np.float64, st.integers(min_bins, max_bins), elements=st.floats(0, 1)).filter(
        lambda w: w.sum() > 1e-6
    ).map(lambda w: w / w.sum())


# -- Zernike ---------------------------------------------------------------

def symbolic_radial(p, q):
    """R_pq as {power: Fraction} by expanding the factorial sum with rationals."""
    poly = {}
    for s in range((p - q) // 2 + 1):
        coef = Fraction((-1) ** s * math.factorial(p - s)) / (
            math.factorial(s) * math.factorial((p + q) // 2 - s) * math.factorial((p - q) // 2 - s)
        )
        poly[p - 2 * s] = poly.get(p - 2 * s, 0) + coef
    return poly


def test_moment_set():
    spec = ZernikeSpec(10, 16)
    assert len(spec.orders) == 36
    assert all(0 <= q <= p <= 10 and (p - q) % 2 == 0 for p, q in spec.orders)
    assert len(set(spec.orders)) == 36


@pytest.mark.parametrize("p,q", [(p, q) for p in range(0, 13) for q in range(p % 2, p + 1, 2)])
def test_radial_coefficients_match_symbolic(p, q):
    expected = symbolic_radial(p, q)
    got = {power: Fraction(c) for c, power in radial_coefficients(p, q)}
    assert got == expected


@pytest.mark.parametrize("p,q,r,expected", [(0, 0, 0.37, 1.0), (2, 0, 0.5, -0.5), (4, 2, 1.0, 1.0)])
def test_radial_examples(p, q, r, expected):
    assert radial_polynomial(p, q, r) == pytest.approx(expected, abs=1e-15)


def test_r42_closed_form():
    r = np.linspace(0, 1, 11)
    np.testing.assert_allclose(radial_polynomial(4, 2, r), 4 * r**4 - 3 * r**2, atol=1e-14)


@pytest.mark.parametrize("p", range(11))
def test_rpp_is_power(p):
    r = np.linspace(0, 1, 101)
    np.testing.assert_allclose(radial_polynomial(p, p, r), r**p, atol=1e-12, rtol=0)


def test_radial_at_one_is_one():
    for p, q in ZernikeSpec(10).orders:
        assert radial_polynomial(p, q, 1.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p,q", [(2, 1), (1, 2), (3, -1), (-1, -1)])
def test_bad_order(p, q):
    with pytest.raises(BadOrder):
        radial_polynomial(p, q, 0.5)


def test_bad_radius():
    with pytest.raises(BadOrder):
        radial_polynomial(2, 0, 1.5)


@pytest.mark.parametrize("n", [8, 33, 128])
def test_constant_image_moments(n):
    mags = zernike_magnitudes(np.ones((n, n)), ZernikeSpec(10, n))
    assert mags[(0, 0)] == pytest.approx(2 / np.pi, abs=1e-9)
    assert mags[(1, 1)] <= 1e-10


def test_rotation_invariance(rng):
    img = rng.random((64, 64))
    spec = ZernikeSpec(10, 64)
    a = zernike_magnitudes(img, spec)
    b = zernike_magnitudes(np.rot90(img), spec)
    for (p, q), v in a.items():
        if p <= 8:
            assert abs(b[(p, q)] - v) <= 0.02 * v + 1e-12


def test_reflection_q0(rng):
    img = rng.random((32, 32))
    spec = ZernikeSpec(10, 32)
    a = zernike_magnitudes(img, spec)
    b = zernike_magnitudes(img[:, ::-1], spec)
    for (p, q), v in a.items():
        if q == 0:
            assert b[(p, q)] == pytest.approx(v, abs=1e-9)


def test_moment_brute_force(rng):
    n = 6
    img = rng.random((n, n))
    spec = ZernikeSpec(4, n)
    got = zernike_moments(img, spec)
    for idx, (p, q) in enumerate(spec.orders):
        acc = 0j
        for row in range(n):
            for col in range(n):
                x = (2 * col + 1 - n) / (n * math.sqrt(2))
                y = (2 * row + 1 - n) / (n * math.sqrt(2))
                r, th = math.hypot(x, y), math.atan2(y, x)
                rad = sum(c * r**k for c, k in radial_coefficients(p, q))
                acc += img[row, col] * rad * complex(math.cos(q * th), -math.sin(q * th))
        assert got[idx] == pytest.approx(2 * (p + 1) / (math.pi * n * n) * acc, abs=1e-12)


def test_zernike_shape_check():
    with pytest.raises(DimensionMismatch):
        zernike_moments(np.ones((8, 9)), ZernikeSpec(4, 8))


# -- histogram and entropies -----------------------------------------------

def test_quantize_constant():
    assert not quantize(np.full((3, 3), 4.2)).any()


def test_quantize_range(rng):
    q = quantize(rng.standard_normal(1000))
    assert q.min() == 0 and q.max() == 255


def test_histogram_constant():
    h = intensity_histogram(np.full((5, 5), -3.0))
    assert h.probabilities[0] == 1.0 and h.probabilities[1:].sum() == 0
    assert h.source_pixels == 25 and h.bins == X


def test_histogram_two_values():
    m = np.zeros((4, 4))
    m[:2] = 7.0
    h = intensity_histogram(m)
    assert h.probabilities[0] == h.probabilities[255] == 0.5


def test_histogram_uniform_noise():
    noise = np.random.default_rng(7).random((256, 256))
    h = intensity_histogram(noise)
    assert abs(h.probabilities.sum() - 1) <= 1e-12
    assert np.max(np.abs(h.probabilities - 1 / X)) <= 0.002


@pytest.mark.parametrize("fn", [renyi_entropy, kapur_entropy])
def test_uniform_gives_log2_bins(fn):
    assert fn(np.full(X, 1 / X)) == pytest.approx(8.0, abs=1e-9)


@pytest.mark.parametrize("a,b", [(0.5, 2), (0.3, 3.0), (2, 0.5)])
def test_kapur_uniform_any_order(a, b):
    assert kapur_entropy(np.full(X, 1 / X), a, b) == pytest.approx(8.0, abs=1e-9)


def test_delta_histogram():
    q = np.zeros(X)
    q[17] = 1.0
    assert renyi_entropy(q) == 0.0
    assert kapur_entropy(q) == 0.0
    assert yager_entropy(q) == 0.0


def test_half_half():
    q = np.zeros(X)
    q[:2] = 0.5
    assert renyi_entropy(q) == pytest.approx(1.0, abs=1e-9)
    assert kapur_entropy(q, 0.5, 2) == pytest.approx(1.0, abs=1e-9)


def test_yager_examples():
    q = np.full(X, 1 / X)
    assert yager_entropy(q) == pytest.approx(2 / X, abs=1e-15)
    q = np.zeros(X)
    q[:2] = (0.75, 0.25)
    assert yager_entropy(q) == pytest.approx(1 / X, abs=1e-15)


def test_yager_pixels_denominator():
    h = Histogram(np.r_[1.0, np.zeros(X - 1)], source_pixels=1024)
    assert yager_entropy(h, "pixels") == pytest.approx(1 - X / 1024)
    with pytest.raises(ValueError):
        yager_entropy(h.probabilities, "pixels")


@pytest.mark.parametrize("call", [lambda: renyi_entropy([1.0], 1.0), lambda: renyi_entropy([1.0], 0),
                                  lambda: kapur_entropy([1.0], 2, 2), lambda: kapur_entropy([1.0], -1, 2)])
def test_entropy_bad_orders(call):
    with pytest.raises(BadOrder):
        call()


@settings(max_examples=60, deadline=None)
@given(q=prob_vectors(X, X), seed=st.integers(0, 1000))
def test_entropy_properties(q, seed):
    perm = np.random.default_rng(seed).permutation(X)
    for fn in (renyi_entropy, kapur_entropy, yager_entropy):
        assert fn(q[perm]) == pytest.approx(fn(q), abs=1e-9)
    for fn in (renyi_entropy, kapur_entropy):
        assert -1e-9 <= fn(q) <= 8.0 + 1e-9
    assert -1e-12 <= yager_entropy(q) <= 2 / X + 1e-12


# -- fractal dimension -----------------------------------------------------

def dbc_reference(levels):
    """Differential box counting with explicit loops; natural-log polyfit slope."""
    n = levels.shape[0]
    xs, ys = [], []
    s = 2
    while s <= n // 2:
        h = s * 256 / n
        total = 0
        for bi in range(0, n, s):
            for bj in range(0, n, s):
                block = levels[bi:bi + s, bj:bj + s]
                total += math.ceil(block.max() / h) - math.ceil(block.min() / h) + 1
        xs.append(math.log(n / s))
        ys.append(math.log(total))
        s *= 2
    return np.polyfit(xs, ys, 1)[0]


def test_fd_constant_exact():
    assert fractal_dimension(np.full((128, 128), 0.3)) == 2.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fd_matches_reference(seed):
    img = np.random.default_rng(seed).random((32, 32)) ** (seed + 1)
    assert fractal_dimension(img) == pytest.approx(dbc_reference(quantize(img)), abs=1e-12)


def test_fd_ramp():
    n = 128
    ramp = np.repeat(np.arange(n)[:, None] / n, n, axis=1)
    fd = fractal_dimension(ramp)
    assert 1.95 <= fd <= 2.10
    assert fd == pytest.approx(dbc_reference(quantize(ramp)), abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_fd_noise(seed):
    n = 128
    noise = np.random.default_rng(seed).random((n, n))
    ramp = np.repeat(np.arange(n)[:, None] / n, n, axis=1)
    fd = fractal_dimension(noise)
    assert 2.4 <= fd <= 3.0
    assert fractal_dimension(ramp) < fd


@settings(max_examples=30, deadline=None)
@given(scale=st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]), shift=st.sampled_from([-4.0, -0.5, 0.0, 1.0, 16.0]))
def test_fd_affine_invariance(scale, shift):
    # dyadic factors keep the min-max rescaling exact
    img = np.random.default_rng(3).random((32, 32))
    assert fractal_dimension(scale * img + shift) == fractal_dimension(img)


def test_box_counts_constant():
    scales, counts = box_counts(np.zeros((16, 16), dtype=int))
    np.testing.assert_array_equal(scales, [8, 4, 2])
    np.testing.assert_array_equal(counts, scales**2)


@pytest.mark.parametrize("shape", [(4, 4), (8, 16)])
def test_box_counts_degenerate(shape):
    with pytest.raises(DegenerateImage):
        box_counts(np.zeros(shape, dtype=int))


# -- extraction ------------------------------------------------------------

def test_resample_identity_and_constant(rng):
    img = rng.random((16, 16))
    np.testing.assert_array_equal(resample_bilinear(img, 16), img)
    np.testing.assert_allclose(resample_bilinear(np.full((30, 46), 0.4), 16), 0.4)
    assert resample_bilinear(img, 40).shape == (40, 40)


def test_feature_names():
    names = feature_names(5, ZernikeSpec())
    assert len(names) == 400 == len(set(names))
    assert names[0] == "comp1lo/zern_p0_q0"
    assert names[36:40] == ["comp1lo/KE", "comp1lo/RE", "comp1lo/YE", "comp1lo/FD"]
    assert names[-1] == "comp5hi/FD"


def test_extract_features(rng):
    tree = iterative_vmd(rng.random((40, 40)), 5)
    spec = ZernikeSpec(10, 32)
    a = extract_features(tree, spec, label="benign")
    b = extract_features(tree, spec)
    assert len(a) == 400 and a.label == "benign"
    assert np.all(np.isfinite(a.values))
    np.testing.assert_array_equal(a.values, b.values)
    assert list(a.as_dict()) == feature_names(5, spec)


def test_degenerate_mode_features():
    tree = iterative_vmd(np.zeros((16, 16)), 2)
    spec = ZernikeSpec(4, 16)
    fv = extract_features(tree, spec).as_dict()
    for comp in ("comp1lo", "comp2hi"):
        assert fv[f"{comp}/FD"] == 2.0
        assert fv[f"{comp}/KE"] == fv[f"{comp}/RE"] == fv[f"{comp}/YE"] == 0.0
        assert fv[f"{comp}/zern_p0_q0"] == 0.0


def test_nonfinite_mode_rejected():
    bad = np.full((16, 16), np.inf)
    tree = DecompositionTree([DecompositionLevel(Mode2D(bad, (0, 0)), Mode2D(bad, (0, 0)), None)])
    with pytest.raises(NonFinite):
        extract_features(tree, ZernikeSpec(2, 16))


def test_entropy_orders_default():
    assert EntropyOrders() == EntropyOrders(2.0, 0.5, 2.0, "bins")
