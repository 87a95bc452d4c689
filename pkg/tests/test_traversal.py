from dataclasses import replace

import numpy as np
import pytest

from latentprobe.align import greedy_align
from latentprobe.datagen import gen_fa
from latentprobe.errors import ConfigError, DataError
from latentprobe.nn import MlpSpec, init_mlp
from latentprobe.traversal import (DEFAULT_TRAVERSAL, TraversalSpec, cvae_quality_traversal,
                                   fvh_lt_aggregate, fvh_lt_run, resolve_range,
                                   traverse_dimension)
from latentprobe.vae import ObjectiveSpec, TrainedVae

P, K = 4, 3


def linear_model(mu_const, lv_const, w_dec, conditional=False, seed=0):
    """Encoder with zero weights (constant posterior) and a purely linear decoder.

    Keeps every traversal quantity available in closed form.
    """
    extra = 1 if conditional else 0
    enc_spec = MlpSpec(widths=(P + extra, 2 * K), activation="relu")
    dec_spec = MlpSpec(widths=(K + extra, P), activation="relu")
    enc = init_mlp(enc_spec, np.random.default_rng(0))
    enc["w0"] = np.zeros_like(enc["w0"])
    enc["b0"] = np.concatenate([np.asarray(mu_const, dtype=float),
                                np.asarray(lv_const, dtype=float)])
    dec = init_mlp(dec_spec, np.random.default_rng(1))
    dec["w0"] = np.asarray(w_dec, dtype=float)
    dec["b0"] = np.zeros(P)
    return TrainedVae(objective=ObjectiveSpec.vanilla(), feature_dim=P, latent_dim=K,
                      conditional=conditional, encoder_spec=enc_spec, decoder_spec=dec_spec,
                      encoder=enc, decoder=dec, seed=seed)


def grid_var(lo, hi, steps):
    t = np.linspace(0.0, 1.0, steps)
    return (hi - lo) ** 2 * np.var(t, ddof=1)


def test_spec_validation():
    with pytest.raises(ConfigError):
        TraversalSpec(strategy="spiral")
    with pytest.raises(ConfigError):
        TraversalSpec(value=0.0)
    with pytest.raises(ConfigError):
        TraversalSpec(steps=1)
    assert DEFAULT_TRAVERSAL.strategy == "fixed_range"
    assert DEFAULT_TRAVERSAL.value == 15.0
    assert DEFAULT_TRAVERSAL.steps == 21


def test_resolve_range_strategies():
    assert resolve_range(TraversalSpec.fixed_range(15.0), 3.0, 2.0, 0, 0) == (-15.0, 15.0)
    assert resolve_range(TraversalSpec.posterior_scaled(2.0), 3.0, 0.5, 0, 0) == (2.0, 4.0)
    assert resolve_range(TraversalSpec.posterior_centered(1.5), 3.0, 0.5, 0, 0) == (1.5, 4.5)
    with pytest.raises(DataError, match="sample 4, dimension 2"):
        resolve_range(TraversalSpec.posterior_scaled(2.0), 3.0, 0.0, 4, 2)


def test_traverse_dimension_shape_and_exact_endpoints():
    w = np.zeros((K, P))
    w[1, 0] = 1.0
    model = linear_model([0.5, -0.2, 0.1], [-0.3, 0.2, 0.0], w)
    x = np.zeros(P)
    out = traverse_dimension(model, x, 1, TraversalSpec.fixed_range(15.0, steps=5))
    assert out.shape == (5, P)
    # with weight 1 on feature 0, the sweep shows the grid itself
    np.testing.assert_allclose(out[:, 0], np.linspace(-15.0, 15.0, 5), atol=1e-12)
    assert out[0, 0] == -15.0 and out[-1, 0] == 15.0
    with pytest.raises(ConfigError):
        traverse_dimension(model, x, K, DEFAULT_TRAVERSAL)


def test_sample_variance_convention():
    # a sweep decoding to (0, 1, 2) for one feature has unbiased variance 1
    w = np.zeros((K, P))
    w[0, 2] = 1.0
    model = linear_model([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], w)
    dec = dict(model.decoder)
    dec["b0"] = np.array([0.0, 0.0, 1.0, 0.0])
    model = TrainedVae(objective=model.objective, feature_dim=P, latent_dim=K,
                       conditional=False, encoder_spec=model.encoder_spec,
                       decoder_spec=model.decoder_spec, encoder=model.encoder, decoder=dec)
    ds = gen_fa(n=10, p=P, blocks=((0, 1), (2, 3)), seed=0)
    assoc = fvh_lt_run(model, ds, TraversalSpec.fixed_range(1.0, steps=3))
    assert assoc.values[0, 2] == 1.0


def test_zero_decoder_gives_zero_variance():
    model = linear_model([0.1, 0.2, 0.3], [0.0, -0.1, 0.1], np.zeros((K, P)))
    ds = gen_fa(n=30, p=P, blocks=((0, 1), (2, 3)), seed=1)
    assoc = fvh_lt_run(model, ds)
    np.testing.assert_array_equal(assoc.values, np.zeros((K, P)))


@pytest.mark.parametrize("spec", [
    TraversalSpec.fixed_range(15.0, steps=21),
    TraversalSpec.fixed_range(2.5, steps=7),
    TraversalSpec.posterior_scaled(3.0, steps=11),
    TraversalSpec.posterior_centered(1.25, steps=4),
], ids=["fixed15", "fixed2.5", "scaled", "centered"])
def test_linear_decoder_matches_closed_form(spec):
    # variance of w*g + const over the grid g is w^2 * var(g); rows share one
    # grid because the constant encoder gives every row the same posterior
    mu = np.array([0.4, -1.0, 2.0])
    lv = np.array([0.6, -0.8, 0.2])
    w = np.random.default_rng(7).normal(size=(K, P))
    model = linear_model(mu, lv, w)
    # 700 training rows force two decode chunks, covering the chunked path
    ds = gen_fa(n=875, p=P, blocks=((0, 1), (2, 3)), seed=2)
    assoc = fvh_lt_run(model, ds, spec)
    sigma = np.exp(0.5 * lv)
    expected = np.zeros((K, P))
    for k in range(K):
        if spec.strategy == "fixed_range":
            lo, hi = -spec.value, spec.value
        elif spec.strategy == "posterior_scaled":
            lo, hi = mu[k] - spec.value * sigma[k], mu[k] + spec.value * sigma[k]
        else:
            lo, hi = mu[k] - spec.value, mu[k] + spec.value
        expected[k] = w[k] ** 2 * grid_var(lo, hi, spec.steps)
    np.testing.assert_allclose(assoc.values, expected, atol=1e-10)
    # the constant posterior's KL rides along exactly
    kl = 0.5 * (mu ** 2 + np.exp(lv) - lv - 1.0)
    np.testing.assert_allclose(assoc.mean_kl, kl, atol=1e-12)
    assert assoc.feature_names == ds.feature_names


def test_run_is_deterministic_per_model_seed():
    w = np.random.default_rng(9).normal(size=(K, P))
    model = linear_model([0.1, 0.2, 0.3], [0.4, -0.2, 0.0], w, seed=5)
    ds = gen_fa(n=40, p=P, blocks=((0, 1), (2, 3)), seed=3)
    a = fvh_lt_run(model, ds)
    b = fvh_lt_run(model, ds)
    np.testing.assert_array_equal(a.values, b.values)
    c = fvh_lt_run(model, ds, rng=np.random.default_rng(123))
    assert a.values.shape == c.values.shape


def test_degenerate_width_names_row_and_dimension():
    model = linear_model([0.0, 0.0, 0.0], [-1500.0, 0.0, 0.0],
                         np.ones((K, P)))  # sigma underflows to exactly 0
    ds = gen_fa(n=10, p=P, blocks=((0, 1), (2, 3)), seed=4)
    with pytest.raises(DataError, match="sample 0, dimension 0"):
        fvh_lt_run(model, ds, TraversalSpec.posterior_scaled(2.0))


def test_empty_split_rejected():
    model = linear_model([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], np.zeros((K, P)))
    ds = gen_fa(n=10, p=P, blocks=((0, 1), (2, 3)), seed=5, train_fraction=0.0)
    with pytest.raises(DataError):
        fvh_lt_run(model, ds)


def test_aggregate_single_run_is_identity():
    w = np.abs(np.random.default_rng(11).normal(size=(K, P)))
    model = linear_model([1.0, 0.1, 2.0], [0.1, 0.3, -0.4], w)
    ds = gen_fa(n=25, p=P, blocks=((0, 1), (2, 3)), seed=6)
    assoc = fvh_lt_run(model, ds)
    mapping = greedy_align([assoc], seed=0)
    agg = fvh_lt_aggregate([assoc], mapping)
    np.testing.assert_allclose(agg.values, assoc.values, atol=1e-15)
    np.testing.assert_allclose(agg.mean_kl, assoc.mean_kl, atol=1e-15)


def conditional_fixture():
    # decoder reads (z, y); the label weight row drives feature responses
    w = np.zeros((K + 1, P))
    w[0, 0] = 2.0
    w[K, 1] = 3.0   # label column feeds feature 1
    w[K, 3] = -1.0
    enc_spec = MlpSpec(widths=(P + 1, 2 * K), activation="relu")
    dec_spec = MlpSpec(widths=(K + 1, P), activation="relu")
    enc = init_mlp(enc_spec, np.random.default_rng(0))
    enc["w0"] = np.zeros_like(enc["w0"])
    enc["b0"] = np.concatenate([np.zeros(K), np.full(K, -0.5)])
    dec = init_mlp(dec_spec, np.random.default_rng(1))
    dec["w0"] = w
    dec["b0"] = np.zeros(P)
    model = TrainedVae(objective=ObjectiveSpec.vanilla(), feature_dim=P, latent_dim=K,
                       conditional=True, encoder_spec=enc_spec, decoder_spec=dec_spec,
                       encoder=enc, decoder=dec)
    ds = gen_fa(n=50, p=P, blocks=((0,), (1,), (2,), (3,)), seed=7, label_features=(0, 2))
    return model, ds, w


def test_label_traversal_matches_closed_form():
    model, ds, w = conditional_fixture()
    spec = TraversalSpec.fixed_range(15.0, steps=9)
    row = cvae_quality_traversal(model, ds, spec)
    y = ds.train_y
    expected = w[K] ** 2 * grid_var(float(np.min(y)), float(np.max(y)), spec.steps)
    np.testing.assert_allclose(row, expected, atol=1e-10)
    # label-linked features respond; the rest sit at the rounding floor of
    # np.var over a constant sweep (the mean of L identical floats rounds)
    assert row[1] > 1e-3 and row[3] > 1e-3
    assert row[0] < 1e-24 and row[2] < 1e-24


def test_label_traversal_needs_conditional_model():
    model = linear_model([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], np.zeros((K, P)))
    ds = gen_fa(n=10, p=P, blocks=((0, 1), (2, 3)), seed=8)
    with pytest.raises(ConfigError):
        cvae_quality_traversal(model, ds)


def test_label_traversal_rejects_constant_label():
    model, ds, _ = conditional_fixture()
    flat = replace(ds, y=np.zeros_like(ds.y))
    with pytest.raises(DataError, match="constant"):
        cvae_quality_traversal(model, flat)


def test_traverse_dimension_conditional_needs_label():
    model, ds, _ = conditional_fixture()
    with pytest.raises(DataError):
        traverse_dimension(model, ds.train_x[0], 0)
    out = traverse_dimension(model, ds.train_x[0], 0, y_i=ds.train_y[0])
    assert out.shape == (DEFAULT_TRAVERSAL.steps, P)
