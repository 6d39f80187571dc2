import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import correlate2d
from sklearn.base import clone

from _builders import gradient_check
from echomap.inference import (
    SMALL_CONFIG,
    JointPipeDepthModel,
    ModelConfig,
    TrainingPair,
    aggregate_segments,
    backward,
    conv_forward,
    forward,
    forward_batch,
    init_model,
    load_checkpoint,
    loss_and_grad,
    loss_depth,
    loss_joint,
    loss_pipe,
    read_dataset,
    save_checkpoint,
    train,
    write_dataset,
)
from echomap.inference.io import CheckpointFormatError, DatasetFormatError
from echomap.inference.network import glorot_limit, softmax
from echomap.signal import detect_soi, low_pass_filter, mel_segments
from echomap.synth import WaveConfig, wave_pair

# layer 2 has 8 * 3 * 3 = 72 input taps, so it runs the shifted-GEMM path
SHIFT_CONFIG = ModelConfig(channels=(8, 4), kernels=(3, 3), pipe_hidden=(4,), depth_hidden=(4, 4))


def loop_conv(x, w, b):
    c_out, c_in, kh, kw = w.shape
    _, h, wd = x.shape
    out = np.zeros((c_out, h - kh + 1, wd - kw + 1))
    for o in range(c_out):
        for i in range(out.shape[1]):
            for j in range(out.shape[2]):
                acc = b[o]
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            acc += w[o, c, u, v] * x[c, i + u, j + v]
                out[o, i, j] = acc
    return out


def reference_forward(model, segment):
    """Step-by-step recomputation with scipy correlations and plain matrix products."""
    p = model.params
    x = np.asarray(segment, dtype=float)[None]
    z1 = np.array([sum(correlate2d(x[c], p["conv1_w"][o, c], mode="valid") for c in range(x.shape[0]))
                   + p["conv1_b"][o] for o in range(p["conv1_w"].shape[0])])
    a1 = np.maximum(z1, 0)
    z2 = np.array([sum(correlate2d(a1[c], p["conv2_w"][o, c], mode="valid") for c in range(a1.shape[0]))
                   + p["conv2_b"][o] for o in range(p["conv2_w"].shape[0])])
    f = np.maximum(z2, 0).reshape(z2.shape[0], -1).max(axis=1)
    h = f
    n = len(model.config.pipe_hidden) + 1
    for i in range(1, n + 1):
        h = h @ p[f"pipe_w{i}"] + p[f"pipe_b{i}"]
        if i < n:
            h = np.maximum(h, 0)
    logits = h
    h = f
    n = len(model.config.depth_hidden) + 1
    for i in range(1, n + 1):
        h = h @ p[f"depth_w{i}"] + p[f"depth_b{i}"]
        if i < n:
            h = np.maximum(h, 0)
    e = np.exp(logits - logits.max())
    return e / e.sum(), float(h[0])


# -- convolution ------------------------------------------------------------

def test_conv_sum_of_ones():
    out = conv_forward(np.ones((1, 3, 3)), np.ones((1, 1, 3, 3)), np.zeros(1))
    assert out.shape == (1, 1, 1) and out[0, 0, 0] == 9.0


@pytest.mark.parametrize("c_in, c_out, k", [(1, 3, 3), (2, 4, 5), (8, 3, 3), (16, 2, 3)])
def test_conv_matches_loop(rng, c_in, c_out, k):
    x = rng.standard_normal((c_in, 8, 8))
    w = rng.standard_normal((c_out, c_in, k, k))
    b = rng.standard_normal(c_out)
    np.testing.assert_allclose(conv_forward(x, w, b), loop_conv(x, w, b), atol=1e-12)


def test_conv_batch_matches_single(rng):
    x = rng.standard_normal((3, 8, 10, 9))
    w = rng.standard_normal((5, 8, 3, 3))
    b = rng.standard_normal(5)
    batch = conv_forward(x, w, b)
    for k in range(3):
        np.testing.assert_allclose(batch[k], loop_conv(x[k], w, b), atol=1e-12)


def test_conv_zero_input_gives_bias():
    K = 9
    b = np.array([0.5, -2.0])
    # one bias per output channel equals the per-parameter bias b/K summed K times
    out = conv_forward(np.zeros((1, 6, 6)), np.zeros((2, 1, 3, 3)), sum(b / K for _ in range(K)))
    np.testing.assert_allclose(out[0], 0.5)
    np.testing.assert_allclose(out[1], -2.0)


# -- forward ----------------------------------------------------------------

@pytest.mark.parametrize("config", [SMALL_CONFIG, SHIFT_CONFIG])
def test_forward_matches_reference(rng, config):
    model = init_model(config, seed=3)
    for name in model.params:
        if "_b" in name:
            model.params[name] = rng.normal(0, 0.1, model.params[name].shape)
    seg = rng.standard_normal((60, 41))
    probs, depth = forward(model, seg)
    ref_probs, ref_depth = reference_forward(model, seg)
    np.testing.assert_allclose(probs, ref_probs, atol=1e-12)
    assert depth == pytest.approx(ref_depth, abs=1e-12)


def test_forward_default_model_properties(rng):
    model = init_model(ModelConfig(), seed=0)
    seg = rng.standard_normal((60, 41))
    p1, d1 = forward(model, seg)
    p2, d2 = forward(model, seg.copy())
    assert abs(p1.sum() - 1) < 1e-9
    assert np.array_equal(p1, p2) and d1 == d2
    assert model.n_params() == ModelConfig().n_params()


def test_glorot_init_bounds():
    model = init_model(SMALL_CONFIG, seed=1)
    for name, v in model.params.items():
        if "_w" in name:
            assert np.abs(v).max() <= glorot_limit(v.shape)
        else:
            assert not v.any()
    assert init_model(SMALL_CONFIG, 1).flat().tolist() == model.flat().tolist()


def test_wrong_segment_shape():
    with pytest.raises(ValueError):
        forward(init_model(SMALL_CONFIG), np.zeros((41, 60)))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_softmax_is_a_distribution(z):
    p = softmax(np.array(z))
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


# -- losses -----------------------------------------------------------------

def test_loss_examples():
    assert loss_pipe([1.0, 0.0], 0) == 0.0
    assert loss_pipe([0.5, 0.5], 1) == pytest.approx(0.6931, abs=1e-4)
    assert loss_depth(0.3, 0.3) == 0.0
    assert loss_depth(3.0, 5.0) == 4.0
    assert loss_joint(0.4, 0.25, w0=0.0, w1=2.0) == 0.5
    assert loss_joint(0.3, 0.7) == pytest.approx(1.0)


@given(st.floats(1e-6, 1 - 1e-6), st.integers(0, 1), st.floats(-5, 5), st.floats(-5, 5),
       st.floats(0, 3), st.floats(0, 3))
def test_losses_match_formulas(p1, label, pred, target, w0, w1):
    p = np.array([1 - p1, p1])
    lp = loss_pipe(p, label)
    assert lp == pytest.approx(-np.log(p[label]))
    assert lp >= 0
    ld = loss_depth(pred, target)
    assert ld == pytest.approx((target - pred) ** 2)
    assert loss_joint(ld, lp, w0, w1) == pytest.approx(w0 * ld + w1 * lp)


def test_cross_entropy_zero_only_when_certain():
    assert loss_pipe([0.0, 1.0], 1) == 0.0
    assert loss_pipe([1e-12, 1 - 1e-12], 1) > 0
    assert np.isfinite(loss_pipe([1.0, 0.0], 1))


# -- backward ---------------------------------------------------------------

def test_zero_heads_without_pipe_weight_have_zero_gradient(rng):
    model = init_model(SMALL_CONFIG, seed=0)
    for name in model.params:
        if name.startswith(("pipe_", "depth_")):
            model.params[name][...] = 0.0
    _, grads = loss_and_grad(model, rng.standard_normal((2, 60, 41)), [0, 1], None, None, w0=1.0, w1=0.0)
    assert all(not g.any() for g in grads.values())


@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_check_shift_path(seed):
    # h = 1e-4 straddles a max-pool winner switch for one weight at seed 0
    assert gradient_check(SHIFT_CONFIG, seed=seed, h=1e-6) < 1e-4


def test_duplicate_pair_doubles_gradient(rng):
    model = init_model(SMALL_CONFIG, seed=2)
    x = rng.standard_normal((1, 60, 41))
    _, one = loss_and_grad(model, x, [1], [0.2], [True])
    _, two = loss_and_grad(model, np.concatenate([x, x]), [1, 1], [0.2, 0.2], [True, True])
    for k in one:
        np.testing.assert_allclose(two[k], 2 * one[k], rtol=1e-12, atol=1e-15)


@given(st.integers(0, 10_000), st.sampled_from(["pipe", "depth", "conv"]))
def test_shared_encoder_contract(seed, part):
    model = init_model(SMALL_CONFIG, seed=seed % 7)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((60, 41))
    p0, d0 = forward(model, x)
    names = [n for n in model.params if n.startswith(part)]
    name = names[rng.integers(len(names))]
    model.params[name].flat[rng.integers(model.params[name].size)] += 0.5
    p1, d1 = forward(model, x)
    if part == "pipe":
        assert d1 == d0
    elif part == "depth":
        assert np.array_equal(p1, p0)


def test_encoder_change_reaches_both_heads(rng):
    model = init_model(SMALL_CONFIG, seed=0)
    x = rng.standard_normal((60, 41))
    p0, d0 = forward(model, x)
    model.params["conv2_b"] += 1.0
    p1, d1 = forward(model, x)
    assert d1 != d0 and not np.array_equal(p1, p0)


def test_backward_uses_cache(rng):
    model = init_model(SMALL_CONFIG, seed=4)
    x = rng.standard_normal((3, 60, 41))
    cache = forward_batch(model, x)
    grads = backward(model, cache, [0, 1, 1], [np.nan, 0.1, 0.3], [False, True, True])
    _, again = loss_and_grad(model, x, [0, 1, 1], [np.nan, 0.1, 0.3], [False, True, True])
    for k in grads:
        np.testing.assert_array_equal(grads[k], again[k])


# -- training ---------------------------------------------------------------

def synthetic_pairs(n_pairs=20):
    X, y, d = [], [], []
    cfg = WaveConfig(noise_std=0.01)
    for k in range(n_pairs):
        depth = 0.15 + 0.15 * k / n_pairs
        pair = wave_pair(depth, cfg, seed=k)
        for label, trace in ((1, pair.pipe), (0, pair.no_pipe)):
            (soi,) = detect_soi(low_pass_filter(trace))
            X.append(mel_segments(soi)[0].values)
            y.append(label)
            d.append(depth if label else np.nan)
    X = np.array(X)
    return (X - X.mean()) / X.std(), np.array(y), np.array(d)


@pytest.fixture(scope="module")
def pairs40():
    return synthetic_pairs()


def test_zero_learning_rate_keeps_weights(pairs40):
    X, y, d = pairs40
    model = init_model(SMALL_CONFIG, seed=0)
    trained, _ = train(model, X, y, d, epochs=2, learning_rate=0.0)
    for k in model.params:
        assert np.array_equal(trained.params[k], model.params[k])


def test_training_lowers_loss(pairs40):
    X, y, d = pairs40
    _, history = train(init_model(SMALL_CONFIG, seed=0), X, y, d, epochs=50, learning_rate=0.02)
    assert len(history) == 50
    assert np.mean(history[-5:]) < np.mean(history[:5])
    assert history[-1] < history[0]


def test_training_is_deterministic(pairs40):
    X, y, d = pairs40
    runs = [train(init_model(SMALL_CONFIG, seed=1), X, y, d, epochs=3, seed=5) for _ in range(2)]
    assert runs[0][1] == runs[1][1]
    assert np.array_equal(runs[0][0].flat(), runs[1][0].flat())


def test_single_class_training_warns(pairs40):
    X, y, d = pairs40
    with pytest.warns(UserWarning, match="one class"):
        train(init_model(SMALL_CONFIG), X[y == 0], y[y == 0], None, epochs=1)


def test_estimator_api(pairs40):
    X, y, d = pairs40
    est = JointPipeDepthModel(channels=(4, 4), kernels=(3, 3), pipe_hidden=(8,), depth_hidden=(8,),
                              epochs=3, learning_rate=0.02)
    assert clone(est).get_params() == est.get_params()
    est.fit(X, y, d)
    proba = est.predict_proba(X)
    assert proba.shape == (len(X), 2) and np.allclose(proba.sum(axis=1), 1)
    assert set(est.predict(X)) <= {0, 1}
    assert est.predict_depth(X).shape == (len(X),)
    assert 0.0 <= est.score(X, y) <= 1.0
    assert len(est.loss_history_) == 3


def test_aggregate_segments():
    probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.4, 0.6], [0.3, 0.7]])
    depth = np.array([0.1, 0.3, 0.2, 0.4])
    ids, p, d = aggregate_segments(probs, depth, [5, 5, 2, 2])
    assert ids.tolist() == [2, 5]
    np.testing.assert_allclose(p, [[0.35, 0.65], [0.55, 0.45]])
    np.testing.assert_allclose(d, [0.3, 0.2])
    _, p, _ = aggregate_segments(probs, depth, [5, 5, 2, 2], mode="vote")
    np.testing.assert_array_equal(p, [[0, 1], [0, 1]])


# -- files ------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model = init_model(SMALL_CONFIG, seed=9)
    save_checkpoint(tmp_path / "m.ckpt", model, {"scale": [1.5, 2.0]})
    back, extra = load_checkpoint(tmp_path / "m.ckpt")
    assert back.config == model.config and back.seed == 9 and extra == {"scale": [1.5, 2.0]}
    for k in model.params:
        assert np.array_equal(back.params[k], model.params[k])


def test_checkpoint_errors(tmp_path):
    (tmp_path / "x.ckpt").write_bytes(b"nope")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "x.ckpt")
    save_checkpoint(tmp_path / "m.ckpt", init_model(SMALL_CONFIG))
    data = (tmp_path / "m.ckpt").read_bytes()
    (tmp_path / "cut.ckpt").write_bytes(data[:-16])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "cut.ckpt")


def test_dataset_round_trip(tmp_path, rng):
    pairs = [TrainingPair(rng.standard_normal((60, 41)), 1, 0.2), TrainingPair(rng.standard_normal((60, 41)), 0)]
    write_dataset(tmp_path / "d.csv", pairs)
    back = read_dataset(tmp_path / "d.csv")
    for a, b in zip(back, pairs):
        assert np.array_equal(a.input, b.input)
        assert (a.pipe_label, a.depth_label) == (b.pipe_label, b.depth_label)


def test_dataset_error_names_record(tmp_path, rng):
    pairs = [TrainingPair(rng.standard_normal((60, 41)), 1, 0.2) for _ in range(3)]
    write_dataset(tmp_path / "d.csv", pairs)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    lines[2] = lines[2].replace(",", ",x", 1)
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match="record 1") as err:
        read_dataset(tmp_path / "bad.csv")
    assert err.value.record == 1
