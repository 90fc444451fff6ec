import numpy as np
import pytest

import irncc


def rng_patch(seed, size=15):
    return np.random.default_rng(seed).normal(100.0, 10.0, (size, size))


def test_stats_match_numpy():
    p = rng_patch(1)
    mean, std, mad = irncc.patch_stats(p)
    assert mean == pytest.approx(p.mean(), rel=1e-12)
    assert std == pytest.approx(p.std(ddof=1), rel=1e-12)
    assert mad == pytest.approx(np.abs(p - p.mean()).mean(), rel=1e-12)


def test_std_normalization_is_unit_norm():
    z = irncc.normalize(rng_patch(2), irncc.NormMode.STD)
    assert z.sum() == pytest.approx(0.0, abs=1e-10)
    assert np.linalg.norm(z) == pytest.approx(1.0, rel=1e-12)


def test_ncc_is_pearson_and_affine_invariant():
    p, f = rng_patch(3), rng_patch(4)
    score = irncc.ncc_score(p, f, irncc.NormMode.STD)
    assert score == pytest.approx(np.corrcoef(p.ravel(), f.ravel())[0, 1], abs=1e-12)
    for mode in (irncc.NormMode.STD, irncc.NormMode.MAD):
        a = irncc.ncc_score(p, f, mode)
        b = irncc.ncc_score(3.5 * p - 40.0, f, mode)
        assert a == pytest.approx(b, abs=1e-9)


def test_flat_patch_raises_degenerate():
    with pytest.raises(irncc.DegeneratePatchError):
        irncc.normalize(np.full((15, 15), 7.0), irncc.NormMode.STD)
    assert issubclass(irncc.DegeneratePatchError, irncc.Error)


def test_std_jacobian_matches_finite_differences():
    p = rng_patch(5, 5)
    jac = irncc.jacobian_normalize(p, irncc.NormMode.STD)
    h = 1e-5
    for j in range(p.size):
        d = np.zeros(p.size)
        d[j] = h
        up = irncc.normalize(p + d.reshape(p.shape), irncc.NormMode.STD).ravel()
        dn = irncc.normalize(p - d.reshape(p.shape), irncc.NormMode.STD).ravel()
        np.testing.assert_allclose(jac[:, j], (up - dn) / (2 * h), atol=1e-7)


def test_forward_backward_round_trip():
    net = irncc.init_network(2, 15, irncc.NormMode.MAD, 7)
    p = rng_patch(6)
    out = irncc.forward(net, p)
    scores = irncc.filter_scores(net, p)
    assert out == pytest.approx(sum(w * max(s, 0.0) for w, s in zip(net.weights, scores)), abs=1e-12)
    loss, filter_grads, weight_grads = irncc.backward(net, p, 1.0)
    assert loss == pytest.approx(abs(out - 1.0), abs=1e-12)
    assert len(filter_grads) == 2 and filter_grads[0].shape == (15, 15)
    assert len(weight_grads) == 2


def test_training_separates_impulses_from_noise():
    rng = np.random.default_rng(8)
    patches, labels = [], []
    yy, xx = np.mgrid[-7:8, -7:8]
    blob = 60.0 * np.exp(-(yy**2 + xx**2) / 2.0)
    for i in range(200):
        noise = rng.normal(100.0, 3.0, (15, 15))
        positive = i % 2 == 0
        patches.append(noise + blob if positive else noise)
        labels.append(1 if positive else -1)
    config = irncc.TrainConfig()
    config.max_epochs = 3
    config.learning_rate = 0.01
    net, history = irncc.train(irncc.init_network(1, 15, irncc.NormMode.STD, 1), patches, labels, config)
    assert len(history) == 3
    outputs = np.array([irncc.forward(net, p) for p in patches])
    pos, neg = outputs[0::2], outputs[1::2]
    assert pos.min() > neg.max()


def test_hat_filter_is_symmetric_and_fit_recovers_it():
    hat = irncc.ricker_hat_filter(15).grid
    np.testing.assert_array_equal(hat, np.rot90(hat))
    np.testing.assert_array_equal(hat, hat.T)
    _, similarity = irncc.fit_hat(hat)
    assert similarity > 0.999


def test_fixed_score_tracks_float_reference():
    f = irncc.hat_variant(9, True, irncc.NormMode.MAD)
    assert f.is_fixed and len(f.raw) == 81
    rng = np.random.default_rng(9)
    for _ in range(50):
        p = rng.integers(1000, 1040, (9, 9)).astype(np.uint16)
        p[4, 4] += 200
        fixed = irncc.mad_ncc_fixed_score(p, f)
        assert not fixed["degenerate"]
        ref = irncc.ncc_score(p.astype(float), f.grid, irncc.NormMode.MAD)
        assert abs(fixed["value"] - ref) <= 2.0**-5


def test_op_count_square_roots():
    assert irncc.op_count("ncc-mad", 512, 15)["square_roots"] == 0
    assert irncc.op_count("ncc-std", 512, 15)["square_roots"] == (512 // 15) ** 2


def test_scene_detection_and_benchmark():
    config = irncc.SceneConfig()
    config.width = config.height = 96
    config.target_count = 3
    config.clutter_kind = irncc.ClutterKind.COLLIMATOR
    config.bad_pixel_rate = 0.0
    config.target_amplitude = 200.0
    config.rng_seed = 5
    image, truths, _ = irncc.synth_scene(config)
    assert image.shape == (96, 96) and len(truths) == 3
    dets = irncc.sliding_detect(image, "gauss-1.2", 0.5)
    for r, c in truths:
        assert any(abs(r - dr) <= 1 and abs(c - dc) <= 1 for dr, dc, _ in dets)
    aucs = irncc.run_benchmark([image], [truths], ["gauss-1.2", "mad-ratio"])
    assert set(aucs) == {"gauss-1.2", "mad-ratio"}
    assert 0.0 <= aucs["gauss-1.2"] <= 1.0
