import numpy as np
import pytest

from specshift import tifo
from specshift.spectral import dft_forward, n_bins


def make_params(bins=5, hidden=3, seed=0):
    return tifo.init_params(bins, hidden, np.random.default_rng(seed))


def test_init_deterministic():
    a = make_params(seed=7)
    b = make_params(seed=7)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])


def test_init_seeds_differ():
    a = make_params(seed=0)
    b = make_params(seed=1)
    assert any(not np.array_equal(a[n], b[n]) for n in a)


def test_init_starts_at_identity_weights():
    # output layer starts at zero with bias one, so lambda == 1 regardless of scores
    params = make_params()
    scores = np.random.default_rng(3).uniform(0, 50, size=(5, 4))
    lam_r, lam_i, _ = tifo.weights_forward(params, scores)
    np.testing.assert_array_equal(lam_r, np.ones((5, 4)))
    np.testing.assert_array_equal(lam_i, np.ones((5, 4)))


def test_weights_all_ones_when_nonbias_zeroed():
    params = make_params()
    for name in params:
        if name.endswith("w1") or name.endswith("w2"):
            params[name] = np.zeros_like(params[name])
    lam_r, lam_i, _ = tifo.weights_forward(params, np.full((5, 2), 9.0))
    np.testing.assert_array_equal(lam_r, np.ones((5, 2)))
    np.testing.assert_array_equal(lam_i, np.ones((5, 2)))


def test_weights_hand_forward_single_hidden_unit():
    params = {
        "r.w1": np.array([[0.5, -0.25]]),
        "r.b1": np.array([0.1]),
        "r.w2": np.array([[2.0], [-1.0]]),
        "r.b2": np.array([0.3, 0.7]),
    }
    params.update({k.replace("r.", "i."): v.copy() for k, v in params.items()})
    lam_r, lam_i, _ = tifo.weights_forward(params, np.array([[1.0], [2.0]]))
    # pre = 0.5*1 - 0.25*2 + 0.1 = 0.1, relu keeps it, out = w2*0.1 + b2
    np.testing.assert_allclose(lam_r[:, 0], [0.5, 0.6], atol=1e-12)
    np.testing.assert_allclose(lam_i[:, 0], [0.5, 0.6], atol=1e-12)


def test_weights_share_parameters_across_channels():
    params = make_params(seed=2)
    rng = np.random.default_rng(4)
    scores = rng.uniform(0, 3, size=(5, 3))
    scores[:, 2] = scores[:, 0]
    lam_r, lam_i, _ = tifo.weights_forward(params, scores)
    np.testing.assert_array_equal(lam_r[:, 2], lam_r[:, 0])
    np.testing.assert_array_equal(lam_i[:, 2], lam_i[:, 0])


def test_weights_channel_permutation_equivariance():
    params = make_params(seed=5)
    scores = np.random.default_rng(6).uniform(0, 3, size=(5, 4))
    perm = [2, 0, 3, 1]
    lam_r, _, _ = tifo.weights_forward(params, scores)
    lam_r_perm, _, _ = tifo.weights_forward(params, scores[:, perm])
    np.testing.assert_allclose(lam_r_perm, lam_r[:, perm], atol=1e-12)


def test_transform_identity_weights():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 12, 2))
    ones = np.ones((n_bins(12), 2))
    out = tifo.transform(x, ones, ones)
    np.testing.assert_allclose(out, x, atol=1e-10)


def test_transform_zero_weights():
    x = np.random.default_rng(1).standard_normal((3, 8, 1))
    zeros = np.zeros((n_bins(8), 1))
    np.testing.assert_allclose(tifo.transform(x, zeros, zeros), 0.0, atol=1e-12)


def test_transform_dc_only_matches_mean():
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1)
    lam = np.zeros((3, 1))
    lam[0] = 1.0
    out = tifo.transform(x, lam, lam)
    np.testing.assert_allclose(out[0, :, 0], [2.5, 2.5, 2.5, 2.5], atol=1e-12)


def test_transform_linear_in_x():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((2, 4, 10, 3))
    lam_r = rng.uniform(0.5, 1.5, size=(n_bins(10), 3))
    lam_i = rng.uniform(0.5, 1.5, size=(n_bins(10), 3))
    combo = tifo.transform(2.0 * x - 3.0 * y, lam_r, lam_i)
    parts = 2.0 * tifo.transform(x, lam_r, lam_i) - 3.0 * tifo.transform(y, lam_r, lam_i)
    np.testing.assert_allclose(combo, parts, atol=1e-10)


def test_transform_keep_truncates_high_bins():
    x = np.random.default_rng(3).standard_normal((2, 8, 1))
    ones = np.ones((5, 1))
    out = tifo.transform(x, ones, ones, keep=2)
    real, imag = dft_forward(out, axis=1)
    np.testing.assert_allclose(real[:, 2:, :], 0.0, atol=1e-10)
    np.testing.assert_allclose(imag[:, 2:, :], 0.0, atol=1e-10)


def test_alpha_scale():
    lam = np.array([[3.0]])
    np.testing.assert_array_equal(tifo.alpha_scale(lam, 1.0), lam)
    np.testing.assert_array_equal(tifo.alpha_scale(lam, 0.0), [[1.0]])
    np.testing.assert_array_equal(tifo.alpha_scale(lam, 0.5), [[2.0]])
    with pytest.raises(ValueError):
        tifo.alpha_scale(lam, 1.2)
    with pytest.raises(ValueError):
        tifo.alpha_scale(lam, -0.1)


def test_alpha_zero_transform_is_identity():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((5, 16, 2))
    lam = rng.uniform(-2, 2, size=(n_bins(16), 2))
    neutral = tifo.alpha_scale(lam, 0.0)
    np.testing.assert_allclose(tifo.transform(x, neutral, neutral), x, atol=1e-10)


def test_transform_vjp_zero_upstream():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((3, 8, 1))
    real, imag = dft_forward(x, axis=1)
    lam = rng.uniform(0.5, 1.5, size=(5, 1))
    gx, gr, gi = tifo.transform_vjp(np.zeros_like(x), real, imag, lam, lam, 8, None)
    np.testing.assert_array_equal(gx, 0.0)
    np.testing.assert_array_equal(gr, 0.0)
    np.testing.assert_array_equal(gi, 0.0)


def test_transform_vjp_identity_passes_upstream_through():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 8, 2))
    upstream = rng.standard_normal((4, 8, 2))
    real, imag = dft_forward(x, axis=1)
    ones = np.ones((5, 2))
    gx, _, _ = tifo.transform_vjp(upstream, real, imag, ones, ones, 8, None)
    np.testing.assert_allclose(gx, upstream, atol=1e-10)


@pytest.mark.parametrize("keep", [None, 3])
def test_transform_vjp_matches_finite_differences(keep):
    rng = np.random.default_rng(6)
    length = 8
    x = rng.standard_normal((3, length, 2))
    lam_r = rng.uniform(0.2, 1.8, size=(n_bins(length), 2))
    lam_i = rng.uniform(0.2, 1.8, size=(n_bins(length), 2))
    target = rng.standard_normal(x.shape)

    def loss(x_, lr_, li_):
        out = tifo.transform(x_, lr_, li_, keep=keep)
        return float(np.mean((out - target) ** 2))

    base = tifo.transform(x, lam_r, lam_i, keep=keep)
    upstream = 2.0 * (base - target) / base.size
    real, imag = dft_forward(x, axis=1)
    gx, gr, gi = tifo.transform_vjp(upstream, real, imag, lam_r, lam_i, length, keep)

    eps = 1e-6
    for arr, grad in ((x, gx), (lam_r, gr), (lam_i, gi)):
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for idx in range(0, flat.size, max(1, flat.size // 17)):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss(x, lam_r, lam_i)
            flat[idx] = orig - eps
            down = loss(x, lam_r, lam_i)
            flat[idx] = orig
            numeric = (up - down) / (2 * eps)
            assert abs(numeric - gflat[idx]) < 1e-6 * max(1.0, abs(numeric))


def test_expected_bins_spans_full_spectrum():
    assert tifo.expected_bins(48) == 25
    assert tifo.expected_bins(48, keep=10) == 25
    with pytest.raises(ValueError):
        tifo.expected_bins(48, keep=26)
