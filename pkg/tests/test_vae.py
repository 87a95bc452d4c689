from dataclasses import replace

import numpy as np
import pytest

from latentprobe import autodiff as ad
from latentprobe.config import ExperimentConfig, DatasetSource
from latentprobe.datagen import gen_fa
from latentprobe.errors import ConfigError, DataError, TrainingDivergence
from latentprobe.nn import MlpSpec, adam_init, adam_step, grad_check, init_mlp, mlp_apply
from latentprobe.vae import (CvaeSpec, ObjectiveSpec, TrainedVae, decode, encode,
                             gaussian_kl_per_dim, load_checkpoint, objective_value,
                             permute_latent_columns, posterior_stats, reconstruction_loss,
                             save_checkpoint, tc_discriminator_loss, train_vae)

P, K = 4, 2


def tiny_model(seed=0, conditional=False):
    """Small hand-sized model so finite differences stay cheap."""
    extra = 1 if conditional else 0
    enc_spec = MlpSpec(widths=(P + extra, 6, 2 * K), activation="relu")
    dec_spec = MlpSpec(widths=(K + extra, 6, P), activation="relu")
    disc_spec = MlpSpec(widths=(K, 8, 8, 2), activation="leaky_relu")
    rng = np.random.default_rng(seed)
    return TrainedVae(objective=ObjectiveSpec.vanilla(), feature_dim=P, latent_dim=K,
                      conditional=conditional, encoder_spec=enc_spec, decoder_spec=dec_spec,
                      encoder=init_mlp(enc_spec, rng), decoder=init_mlp(dec_spec, rng),
                      discriminator_spec=disc_spec, discriminator=init_mlp(disc_spec, rng))


def batch(n=5, seed=1, conditional=False):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, P))
    eps = rng.standard_normal((n, K))
    y = rng.normal(size=n) if conditional else None
    return x, eps, y


ALL_SPECS = [
    ObjectiveSpec.bf(beta=2.0, gamma=0.5, capacity=0.3),
    ObjectiveSpec.beta_vae(beta=3.0),
    ObjectiveSpec.factor_vae(gamma=0.7),
    ObjectiveSpec.vanilla(),
    ObjectiveSpec.dip(1, lambda_od=2.0, lambda_d=1.5),
    ObjectiveSpec.dip(2, lambda_od=1.0, lambda_d=0.5),
]


def manual_objective(spec, model, x, eps, y=None):
    """Independent numpy computation of every objective variant."""
    x_in = np.concatenate([x, np.asarray(y)[:, None]], axis=1) if y is not None else x
    moments = mlp_apply(model.encoder_spec, model.encoder, x_in)
    mu, lv = moments[:, :K], moments[:, K:]
    z = mu + np.exp(0.5 * lv) * eps
    dec_in = np.concatenate([z, np.asarray(y)[:, None]], axis=1) if y is not None else z
    x_hat = mlp_apply(model.decoder_spec, model.decoder, dec_in)
    recon = np.mean(np.sum((x_hat - x) ** 2, axis=1))
    kl_i = 0.5 * np.sum(mu ** 2 + np.exp(lv) - lv - 1.0, axis=1)

    if spec.variant == "bf":
        loss = recon + spec.beta * np.mean(np.abs(kl_i - spec.capacity))
        if spec.gamma > 0.0:
            logits = mlp_apply(model.discriminator_spec, model.discriminator, z)
            loss += spec.gamma * np.mean(logits[:, 0] - logits[:, 1])
        return loss
    if spec.variant == "beta":
        return recon + spec.beta * np.mean(kl_i)
    if spec.variant == "vanilla":
        return recon + np.mean(kl_i)
    if spec.variant == "factor":
        loss = recon + np.mean(kl_i)
        if spec.gamma > 0.0:
            logits = mlp_apply(model.discriminator_spec, model.discriminator, z)
            loss += spec.gamma * np.mean(logits[:, 0] - logits[:, 1])
        return loss
    b = x.shape[0]
    centered = mu - mu.mean(axis=0)
    cov = centered.T @ centered / b
    od = np.sum((cov * (1.0 - np.eye(K))) ** 2)
    diag = np.mean(centered ** 2, axis=0)
    if spec.variant == "dip2":
        diag = diag + np.mean(np.exp(lv), axis=0)
    dev = np.sum((diag - 1.0) ** 2)
    return recon + np.mean(kl_i) + spec.lambda_od * od + spec.lambda_d * dev


@pytest.mark.parametrize("spec", ALL_SPECS, ids=[s.variant for s in ALL_SPECS])
def test_objective_matches_manual_computation(spec):
    model = tiny_model()
    x, eps, _ = batch()
    got = float(ad.data_of(objective_value(spec, x, model, eps=eps)))
    want = manual_objective(spec, model, x, eps)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=[s.variant for s in ALL_SPECS])
def test_objective_gradients(spec):
    model = tiny_model()
    x, eps, _ = batch()
    flat = {f"e.{n}": v for n, v in model.encoder.items()}
    flat.update({f"d.{n}": v for n, v in model.decoder.items()})

    def f(leaves):
        enc = {n[2:]: v for n, v in leaves.items() if n.startswith("e.")}
        dec = {n[2:]: v for n, v in leaves.items() if n.startswith("d.")}
        probe = replace(model, encoder=enc, decoder=dec)
        return objective_value(spec, x, probe, eps=eps)

    assert grad_check(f, flat, h=1e-5) < 1e-5


def test_conditional_objective_matches_manual():
    model = tiny_model(conditional=True)
    x, eps, y = batch(conditional=True)
    spec = ObjectiveSpec.bf(beta=2.0, gamma=0.0, capacity=0.1)
    got = float(ad.data_of(objective_value(spec, x, model, eps=eps, y=y)))
    want = manual_objective(spec, model, x, eps, y=y)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_special_cases_collapse_to_each_other():
    model = tiny_model()
    x, eps, _ = batch()

    def value(spec):
        return float(ad.data_of(objective_value(spec, x, model, eps=eps)))

    # gamma=0, capacity=0 reduces the unified objective to the beta form
    assert abs(value(ObjectiveSpec.bf(beta=2.5, gamma=0.0))
               - value(ObjectiveSpec.beta_vae(beta=2.5))) < 1e-12
    # beta=1 on top of that is the plain objective
    assert abs(value(ObjectiveSpec.bf(beta=1.0, gamma=0.0))
               - value(ObjectiveSpec.vanilla())) < 1e-12
    assert abs(value(ObjectiveSpec.beta_vae(beta=1.0))
               - value(ObjectiveSpec.vanilla())) < 1e-12
    # the TC variant with gamma=0 is the plain objective too
    assert abs(value(ObjectiveSpec.factor_vae(gamma=0.0))
               - value(ObjectiveSpec.vanilla())) < 1e-12


def test_objective_spec_validation():
    with pytest.raises(ConfigError):
        ObjectiveSpec(variant="nope")
    with pytest.raises(ConfigError):
        ObjectiveSpec(variant="bf", beta=-1.0)
    with pytest.raises(ConfigError):
        ObjectiveSpec(variant="beta", gamma=0.5)  # beta form has no TC term
    with pytest.raises(ConfigError):
        ObjectiveSpec(variant="factor", beta=2.0)  # factor form pins beta=1
    with pytest.raises(ConfigError):
        ObjectiveSpec(variant="vanilla", capacity=1.0)
    # dip variants canonicalize the unified knobs instead of rejecting them
    spec = ObjectiveSpec.dip(1, lambda_od=1.0, lambda_d=1.0)
    assert (spec.beta, spec.gamma, spec.capacity) == (1.0, 0.0, 0.0)
    assert ObjectiveSpec.bf(beta=1.0, gamma=0.5).needs_discriminator
    assert not ObjectiveSpec.bf(beta=1.0, gamma=0.0).needs_discriminator
    assert ObjectiveSpec.factor_vae(gamma=0.5).needs_discriminator


def test_reconstruction_loss_trivial():
    assert reconstruction_loss(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]])) == 2.0
    assert reconstruction_loss(np.zeros((0, 3)), np.zeros((0, 3))) == 0.0
    with pytest.raises(ConfigError):
        reconstruction_loss(np.zeros((2, 3)), np.zeros((2, 4)))


def test_kl_closed_form_pins():
    kl = gaussian_kl_per_dim(np.array([[0.0]]), np.array([[0.0]]))
    np.testing.assert_allclose(kl, [[0.0]], atol=1e-15)
    kl = gaussian_kl_per_dim(np.array([[1.0]]), np.array([[0.0]]))
    np.testing.assert_allclose(kl, [[0.5]])
    with pytest.raises(ConfigError):
        gaussian_kl_per_dim(np.zeros((2, 3)), np.zeros((3, 2)))


def test_kl_matches_monte_carlo():
    rng = np.random.default_rng(42)
    mu = np.array([[1.2, -0.8, 0.4]])
    lv = np.array([[0.5, -1.0, 1.2]])
    kl = gaussian_kl_per_dim(mu, lv)[0]
    sigma = np.exp(0.5 * lv[0])
    draws = rng.standard_normal((200000, 3))
    draws = np.concatenate([draws, -draws])  # antithetic halves the variance
    z = mu[0] + sigma * draws
    log_q = -0.5 * (np.log(2 * np.pi) + lv[0]) - (z - mu[0]) ** 2 / (2 * sigma ** 2)
    log_p = -0.5 * np.log(2 * np.pi) - z ** 2 / 2
    mc = (log_q - log_p).mean(axis=0)
    np.testing.assert_allclose(kl, mc, rtol=0.01)


def test_tc_loss_at_zero_weights():
    disc_spec = MlpSpec(widths=(K, 8, 2), activation="leaky_relu")
    params = {n: np.zeros_like(v) for n, v in
              init_mlp(disc_spec, np.random.default_rng(0)).items()}
    z = np.random.default_rng(1).normal(size=(6, K))
    z_perm = permute_latent_columns(z, np.random.default_rng(2))
    ce, tc = tc_discriminator_loss(z, z_perm, disc_spec, params)
    np.testing.assert_allclose(float(ad.data_of(ce)), np.log(2.0), rtol=1e-12)
    assert tc == 0.0


def test_tc_needs_two_rows():
    disc_spec = MlpSpec(widths=(K, 8, 2), activation="leaky_relu")
    params = init_mlp(disc_spec, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        tc_discriminator_loss(np.zeros((1, K)), np.zeros((1, K)), disc_spec, params)
    with pytest.raises(ConfigError):
        permute_latent_columns(np.zeros((1, K)), np.random.default_rng(0))


def test_permutation_preserves_column_values():
    z = np.random.default_rng(3).normal(size=(10, 3))
    out = permute_latent_columns(z, np.random.default_rng(4))
    for k in range(3):
        np.testing.assert_array_equal(np.sort(out[:, k]), np.sort(z[:, k]))
    assert not np.array_equal(out, z)


def test_discriminator_learns_dependence():
    # perfectly tied columns are easy to tell apart from permuted ones
    rng = np.random.default_rng(5)
    disc_spec = MlpSpec(widths=(2, 16, 16, 2), activation="leaky_relu")
    params = init_mlp(disc_spec, rng)
    state = adam_init(params, lr=5e-3)
    for _ in range(150):
        base = rng.normal(size=(128, 1))
        z = np.concatenate([base, base], axis=1)
        z_perm = permute_latent_columns(z, rng)
        leaves = {n: ad.Var(v) for n, v in params.items()}
        ce, _ = tc_discriminator_loss(z, z_perm, disc_spec, leaves)
        ad.backward(ce)
        params, state = adam_step(state, params, {n: l.grad for n, l in leaves.items()})
    base = rng.normal(size=(512, 1))
    z = np.concatenate([base, base], axis=1)
    z_perm = permute_latent_columns(z, rng)
    ce, tc = tc_discriminator_loss(z, z_perm, disc_spec, params)
    assert float(ad.data_of(ce)) < 0.9 * np.log(2.0)
    assert tc > 0.2


def test_tc_gradient_freezing_is_structural():
    # bare ndarrays passed as discriminator weights collect no gradient,
    # while the encoder still receives gradient through z
    model = tiny_model()
    x, eps, _ = batch()
    spec = ObjectiveSpec.bf(beta=1.0, gamma=1.0)
    enc_leaves = {n: ad.Var(v) for n, v in model.encoder.items()}
    dec_leaves = {n: ad.Var(v) for n, v in model.decoder.items()}
    probe = replace(model, encoder=enc_leaves, decoder=dec_leaves)
    loss = objective_value(spec, x, probe, eps=eps)
    ad.backward(loss)
    assert any(l.grad is not None and np.any(l.grad != 0.0)
               for l in enc_leaves.values())


def test_encode_decode_shapes_and_determinism():
    model = tiny_model()
    x, _, _ = batch(n=7)
    mu1, lv1, z1 = encode(model, x)
    mu2, lv2, z2 = encode(model, x)
    assert z1 is None and z2 is None
    np.testing.assert_array_equal(mu1, mu2)
    np.testing.assert_array_equal(lv1, lv2)
    assert mu1.shape == (7, K)
    _, _, z = encode(model, x, deterministic=False, eps=np.zeros((7, K)))
    np.testing.assert_array_equal(z, mu1)
    out = decode(model, z)
    assert out.shape == (7, P)
    with pytest.raises(ConfigError):
        encode(model, x, deterministic=False)


def test_posterior_stats_chunking_matches_direct():
    model = tiny_model()
    x = np.random.default_rng(8).normal(size=(5000, P))
    stats = posterior_stats(model, x)
    mu, lv, _ = encode(model, x)
    np.testing.assert_array_equal(stats.mu, mu)
    np.testing.assert_array_equal(stats.log_var, lv)
    np.testing.assert_allclose(stats.kl_per_dim,
                               gaussian_kl_per_dim(mu, lv), atol=1e-15)


def small_config(**overrides):
    base = dict(
        dataset=DatasetSource(preset="fa15", n=60),
        objective=ObjectiveSpec.bf(beta=0.02, gamma=0.3),
        latent_dim=2, epochs=1, batch_size=16, disc_width=8,
        runs=1, master_seed=0, dropout=0.2,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def small_dataset(n=60, seed=0):
    return gen_fa(n=n, p=5, blocks=((0, 1, 2), (3, 4)), seed=seed)


def test_train_zero_epochs_returns_init():
    config = small_config(epochs=0)
    ds = small_dataset()
    model = train_vae(config, ds, seed=1)
    assert model.loss_trace == ()
    assert model.posterior is not None
    assert model.posterior.mu.shape == (len(ds.train_idx), 2)
    assert model.seed == 1


def test_train_is_seed_deterministic():
    config = small_config()
    ds = small_dataset()
    a = train_vae(config, ds, seed=3)
    b = train_vae(config, ds, seed=3)
    c = train_vae(config, ds, seed=4)
    assert a.loss_trace == b.loss_trace
    for name in a.encoder:
        np.testing.assert_array_equal(a.encoder[name], b.encoder[name])
    assert a.loss_trace != c.loss_trace


def test_train_divergence_names_the_batch():
    config = small_config(lr=1e8, epochs=3, objective=ObjectiveSpec.vanilla())
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDivergence, match="epoch"):
            train_vae(config, small_dataset(), seed=1)


def test_train_empty_split_rejected():
    config = small_config()
    ds = gen_fa(n=10, p=5, blocks=((0, 1, 2), (3, 4)), seed=0, train_fraction=0.0)
    with pytest.raises(DataError):
        train_vae(config, ds, seed=1)


def test_collapse_sets_flag_and_warns():
    # a crushing KL weight drives every dimension back to the prior
    config = small_config(objective=ObjectiveSpec.bf(beta=100.0, gamma=0.0),
                          lr=1e-2, epochs=30)
    with pytest.warns(RuntimeWarning, match="collapse"):
        model = train_vae(config, small_dataset(), seed=1)
    assert model.collapsed
    assert np.all(model.posterior.kl_per_dim.mean(axis=0) < 0.01)


def test_conditional_training_runs():
    config = small_config(cvae=CvaeSpec(enabled=True),
                          objective=ObjectiveSpec.bf(beta=0.02, gamma=0.0))
    ds = gen_fa(n=40, p=5, blocks=((0,), (1,), (2,), (3,), (4,)), seed=2,
                label_features=(1, 3))
    model = train_vae(config, ds, seed=1)
    assert model.conditional
    assert model.encoder_spec.widths[0] == 6
    assert model.decoder_spec.widths[0] == 3
    with pytest.raises(DataError):
        train_vae(config, small_dataset(), seed=1)  # unlabeled data


def test_checkpoint_round_trip(tmp_path):
    config = small_config()
    ds = small_dataset()
    model = train_vae(config, ds, seed=2)
    path = tmp_path / "ck.json"
    save_checkpoint(model, str(path))
    back = load_checkpoint(str(path))
    assert back.objective == model.objective
    assert back.loss_trace == model.loss_trace
    assert back.seed == model.seed
    assert back.collapsed == model.collapsed
    for name in model.encoder:
        np.testing.assert_array_equal(back.encoder[name], model.encoder[name])
    x = ds.train_x[:8]
    np.testing.assert_array_equal(encode(back, x)[0], encode(model, x)[0])
    np.testing.assert_array_equal(back.posterior.mu, model.posterior.mu)
    np.testing.assert_allclose(back.posterior.kl_per_dim, model.posterior.kl_per_dim,
                               atol=1e-15)
    # saving the reloaded model reproduces the file byte for byte
    path2 = tmp_path / "ck2.json"
    save_checkpoint(back, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_wrong_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(DataError):
        load_checkpoint(str(path))
