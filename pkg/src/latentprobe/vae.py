"""VAE objectives, total-correlation discriminator, and the training loop.

One unified loss family covers every model this package trains. The full
form ("bf") is

    reconstruction + beta * |KL_i - capacity|  averaged over samples i
                   + gamma * total-correlation estimate,

where KL_i is sample i's posterior divergence summed over latent dims and
the total correlation of the aggregate posterior is estimated by a small
discriminator that contrasts latent batches against column-permuted ones.
Setting gamma=0 and capacity=0 gives the plain weighted-KL model ("beta");
beta=1 with a TC term gives "factor"; beta=1 alone is "vanilla". The two
decorrelation baselines ("dip1", "dip2") drop beta/gamma/capacity and
instead penalize the batch covariance of the posterior means (dip1) or of
the full posterior (dip2) toward the identity.

Training is plain numpy on the tape from `autodiff`; gradients are frozen
across the VAE/discriminator boundary structurally, by passing the other
side's parameters as bare arrays so the tape treats them as constants.
"""

import json
import os
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DataError, TrainingDivergence
from .nn import MlpSpec, adam_init, adam_step, init_mlp, mlp_apply, mlp_forward, sgd_step

VARIANTS = ("bf", "beta", "factor", "vanilla", "dip1", "dip2")

ENCODER_HIDDEN = (256, 128, 64)
DECODER_HIDDEN = (64, 128, 256)
DISC_DEPTH = 5

# rng stream tags per run seed; keep stable, they define reproducibility
INIT_STREAM = 0
TRAIN_STREAM = 1
TRAVERSAL_STREAM = 2
LABEL_TRAVERSAL_STREAM = 3

EVAL_CHUNK = 2048
COLLAPSE_KL = 0.01

CHECKPOINT_FORMAT = "latentprobe-checkpoint"
CHECKPOINT_VERSION = 1


def seeded_rng(run_seed, stream):
    """Independent generator for (run seed, stream tag)."""
    return np.random.default_rng(np.random.SeedSequence((int(run_seed), int(stream))))


@dataclass(frozen=True)
class ObjectiveSpec:
    """Loss-family selector plus its weights.

    Variant constraints are enforced at construction: "beta" requires
    gamma=0 and capacity=0, "factor" requires beta=1 and capacity=0,
    "vanilla" requires beta=1, gamma=0, capacity=0. The dip variants
    ignore beta/gamma/capacity entirely (stored canonically as 1/0/0)
    and read lambda_od / lambda_d instead; those are zeroed for every
    other variant.
    """

    variant: str = "bf"
    beta: float = 1.0
    gamma: float = 0.0
    capacity: float = 0.0
    lambda_od: float = 0.0
    lambda_d: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown objective variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ("beta", "gamma", "capacity", "lambda_od", "lambda_d"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0.0:
                raise ConfigError(f"objective field {name} must be a non-negative finite float, got {v!r}")
            object.__setattr__(self, name, v)
        if self.variant in ("dip1", "dip2"):
            object.__setattr__(self, "beta", 1.0)
            object.__setattr__(self, "gamma", 0.0)
            object.__setattr__(self, "capacity", 0.0)
            return
        object.__setattr__(self, "lambda_od", 0.0)
        object.__setattr__(self, "lambda_d", 0.0)
        if self.variant == "beta" and (self.gamma != 0.0 or self.capacity != 0.0):
            raise ConfigError("variant 'beta' requires gamma=0 and capacity=0")
        if self.variant == "factor" and (self.beta != 1.0 or self.capacity != 0.0):
            raise ConfigError("variant 'factor' requires beta=1 and capacity=0")
        if self.variant == "vanilla" and (self.beta != 1.0 or self.gamma != 0.0 or self.capacity != 0.0):
            raise ConfigError("variant 'vanilla' requires beta=1, gamma=0, capacity=0")

    @property
    def needs_discriminator(self):
        return self.variant in ("bf", "factor") and self.gamma > 0.0

    @classmethod
    def bf(cls, beta, gamma, capacity=0.0):
        return cls(variant="bf", beta=beta, gamma=gamma, capacity=capacity)

    @classmethod
    def beta_vae(cls, beta):
        return cls(variant="beta", beta=beta)

    @classmethod
    def factor_vae(cls, gamma):
        return cls(variant="factor", beta=1.0, gamma=gamma)

    @classmethod
    def vanilla(cls):
        return cls(variant="vanilla", beta=1.0)

    @classmethod
    def dip(cls, order, lambda_od, lambda_d):
        if order not in (1, 2):
            raise ConfigError("dip order must be 1 or 2")
        return cls(variant=f"dip{order}", lambda_od=lambda_od, lambda_d=lambda_d)


@dataclass(frozen=True)
class CvaeSpec:
    """Conditioning switch: when enabled the label is appended to both the
    encoder input and the decoder input (reconstruction still targets the
    features only)."""

    enabled: bool = False
    label_column: str = None


def gaussian_kl_per_dim(mu, log_var):
    """Elementwise KL of N(mu, var) against N(0, 1).

    Entry (i, k) = 0.5 * (mu^2 + var - log var - 1). Analytically this is
    never negative; floating-point dust below zero is clipped so stored
    statistics satisfy the non-negativity contract exactly.
    """
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise ConfigError(f"mu shape {mu.shape} != log_var shape {log_var.shape}")
    kl = 0.5 * (mu * mu + np.exp(log_var) - log_var - 1.0)
    return np.maximum(kl, 0.0)


def reconstruction_loss(x, x_hat):
    """Mean over samples of the per-sample sum of squared feature errors."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ConfigError(f"x shape {x.shape} != x_hat shape {x_hat.shape}")
    if x.shape[0] == 0:
        return 0.0
    d = x_hat - x
    return float(np.mean(np.sum(d * d, axis=1)))


@dataclass(frozen=True)
class PosteriorStats:
    """Posterior moments and per-dimension KL over a dataset."""

    mu: np.ndarray
    log_var: np.ndarray
    kl_per_dim: np.ndarray

    @classmethod
    def from_moments(cls, mu, log_var):
        return cls(mu=np.asarray(mu, dtype=np.float64),
                   log_var=np.asarray(log_var, dtype=np.float64),
                   kl_per_dim=gaussian_kl_per_dim(mu, log_var))

    @property
    def mean_kl(self):
        if self.kl_per_dim.shape[0] == 0:
            return np.zeros(self.kl_per_dim.shape[1])
        return self.kl_per_dim.mean(axis=0)


@dataclass(frozen=True)
class TrainedVae:
    objective: ObjectiveSpec
    feature_dim: int
    latent_dim: int
    conditional: bool
    encoder_spec: MlpSpec
    decoder_spec: MlpSpec
    encoder: dict
    decoder: dict
    discriminator_spec: MlpSpec = None
    discriminator: dict = None
    posterior: PosteriorStats = None
    loss_trace: tuple = ()
    seed: int = 0
    collapsed: bool = False

    @property
    def encoder_input_dim(self):
        return self.feature_dim + (1 if self.conditional else 0)

    @property
    def decoder_input_dim(self):
        return self.latent_dim + (1 if self.conditional else 0)


def build_specs(feature_dim, latent_dim, conditional=False, disc_width=256, dropout=0.2):
    """Layer shapes for encoder, decoder, and TC discriminator."""
    if latent_dim < 1:
        raise ConfigError("latent_dim must be at least 1")
    if feature_dim < 1:
        raise ConfigError("feature_dim must be at least 1")
    extra = 1 if conditional else 0
    enc = MlpSpec(widths=(feature_dim + extra, *ENCODER_HIDDEN, 2 * latent_dim),
                  activation="relu", dropout=dropout)
    dec = MlpSpec(widths=(latent_dim + extra, *DECODER_HIDDEN, feature_dim),
                  activation="relu", dropout=dropout)
    disc = MlpSpec(widths=(latent_dim, *([int(disc_width)] * DISC_DEPTH), 2),
                   activation="leaky_relu", dropout=0.0)
    return enc, dec, disc


def stack_conditional(x, y):
    """Append the label as one extra input column."""
    x = np.asarray(x, dtype=np.float64)
    if y is None:
        raise DataError("conditional model needs a labeled dataset")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (x.shape[0],):
        raise DataError(f"label has shape {y.shape}, expected ({x.shape[0]},)")
    return np.concatenate([x, y[:, None]], axis=1)


# ---------------------------------------------------------------------------
# discriminator pieces

def permute_latent_columns(z, rng):
    """Shuffle each latent column independently across the batch."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] < 2:
        raise ConfigError("column permutation needs a batch of at least 2 rows")
    out = np.empty_like(z)
    for k in range(z.shape[1]):
        out[:, k] = z[rng.permutation(z.shape[0]), k]
    return out


def tc_discriminator_loss(z, z_perm, disc_spec, disc_params):
    """Two-logit cross-entropy plus the density-ratio TC estimate.

    Logit 0 means "drawn jointly", logit 1 means "columns independently
    permuted". Returns (ce, tc_estimate): `ce` is the discriminator's
    training loss on the tape (averaged over both halves), and
    tc_estimate = mean(logit0 - logit1) on the unpermuted batch, which
    estimates how far the aggregate posterior is from the product of its
    marginals. Pass Vars in disc_params to train the discriminator; pass
    bare arrays to keep it frozen.
    """
    if ad.data_of(z).shape[0] < 2:
        raise ConfigError("TC estimation needs a batch of at least 2 rows")
    logits_joint = mlp_forward(disc_spec, disc_params, z)
    logits_perm = mlp_forward(disc_spec, disc_params, z_perm)
    l0j = ad.cols(logits_joint, 0, 1)
    l1j = ad.cols(logits_joint, 1, 2)
    l0p = ad.cols(logits_perm, 0, 1)
    l1p = ad.cols(logits_perm, 1, 2)
    # CE with softmax over two logits reduces to softplus of the logit gap.
    ce = ad.mul(0.5, ad.add(ad.vmean(ad.softplus(ad.sub(l1j, l0j))),
                            ad.vmean(ad.softplus(ad.sub(l0p, l1p)))))
    tc_estimate = float(np.mean(ad.data_of(l0j) - ad.data_of(l1j)))
    return ce, tc_estimate


def _tc_term(z, disc_spec, disc_params):
    # VAE-side TC term: same estimator, gradients flow through z only.
    logits = mlp_forward(disc_spec, disc_params, z)
    return ad.vmean(ad.sub(ad.cols(logits, 0, 1), ad.cols(logits, 1, 2)))


# ---------------------------------------------------------------------------
# objective

def _tape_objective(spec, enc_spec, dec_spec, enc_params, dec_params,
                    disc_spec, disc_params, x_in, x_target, y, eps,
                    capacity, training, rng):
    """Full objective on the tape; returns (loss Var, sampled z data)."""
    moments = mlp_forward(enc_spec, enc_params, x_in, training=training, rng=rng)
    k = eps.shape[1]
    mu = ad.cols(moments, 0, k)
    log_var = ad.cols(moments, k, 2 * k)
    sigma = ad.vexp(ad.mul(0.5, log_var))
    z = ad.add(mu, ad.mul(sigma, eps))
    dec_in = z if y is None else ad.concat_cols(z, np.asarray(y, dtype=np.float64)[:, None])
    x_hat = mlp_forward(dec_spec, dec_params, dec_in, training=training, rng=rng)
    recon = ad.vmean(ad.vsum(ad.square(ad.sub(x_hat, x_target)), axis=1))

    kl_elem = ad.mul(0.5, ad.sub(ad.add(ad.square(mu), ad.vexp(log_var)),
                                 ad.add(log_var, 1.0)))
    kl_per_sample = ad.vsum(kl_elem, axis=1)
    kl_mean = ad.vmean(kl_per_sample)

    if spec.variant == "bf":
        bound = ad.vmean(ad.absval(ad.sub(kl_per_sample, capacity)))
        loss = ad.add(recon, ad.mul(spec.beta, bound))
        if spec.gamma > 0.0:
            loss = ad.add(loss, ad.mul(spec.gamma, _tc_term(z, disc_spec, disc_params)))
    elif spec.variant == "beta":
        loss = ad.add(recon, ad.mul(spec.beta, kl_mean))
    elif spec.variant == "vanilla":
        loss = ad.add(recon, kl_mean)
    elif spec.variant == "factor":
        loss = ad.add(recon, kl_mean)
        if spec.gamma > 0.0:
            loss = ad.add(loss, ad.mul(spec.gamma, _tc_term(z, disc_spec, disc_params)))
    else:
        b = ad.data_of(x_in).shape[0]
        centered = ad.sub(mu, ad.vmean(mu, axis=0))
        cov = ad.mul(ad.matmul(ad.transpose(centered), centered), 1.0 / b)
        off_mask = 1.0 - np.eye(k)
        od = ad.vsum(ad.square(ad.mul(cov, off_mask)))
        diag = ad.vmean(ad.square(centered), axis=0)
        if spec.variant == "dip2":
            diag = ad.add(diag, ad.vmean(ad.vexp(log_var), axis=0))
        dev = ad.vsum(ad.square(ad.sub(diag, 1.0)))
        loss = ad.add(ad.add(recon, kl_mean),
                      ad.add(ad.mul(spec.lambda_od, od), ad.mul(spec.lambda_d, dev)))
    return loss, ad.data_of(z)


def objective_value(spec, x, model, rng=None, eps=None, y=None, training=False):
    """One-batch objective with gradient tape.

    `model` supplies specs and parameter dicts (a TrainedVae works; so does
    any object with the same attributes, including ones whose param dicts
    hold Vars). Latent noise comes from `eps` when given, else from `rng`.
    """
    x = np.asarray(x, dtype=np.float64)
    if eps is None:
        if rng is None:
            raise ConfigError("objective_value needs eps or an rng to sample latents")
        eps = rng.standard_normal((x.shape[0], model.latent_dim))
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (x.shape[0], model.latent_dim):
        raise ConfigError(f"eps has shape {eps.shape}, expected ({x.shape[0]}, {model.latent_dim})")
    x_in = stack_conditional(x, y) if model.conditional else x
    loss, _ = _tape_objective(spec, model.encoder_spec, model.decoder_spec,
                              model.encoder, model.decoder,
                              model.discriminator_spec, model.discriminator,
                              x_in, x, y if model.conditional else None, eps,
                              spec.capacity, training, rng)
    return loss


# ---------------------------------------------------------------------------
# inference

def encode(model, x, deterministic=True, rng=None, eps=None):
    """Posterior moments for x; optionally a reparameterized sample.

    Returns (mu, log_var, z) with z=None when deterministic. Dropout is
    always off here; encoding the same rows twice gives identical moments.
    """
    x = np.asarray(x, dtype=np.float64)
    moments = mlp_apply(model.encoder_spec, model.encoder, x)
    k = model.latent_dim
    mu, log_var = moments[:, :k], moments[:, k:]
    if deterministic:
        return mu, log_var, None
    if eps is None:
        if rng is None:
            raise ConfigError("sampling encode needs eps or an rng")
        eps = rng.standard_normal(mu.shape)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != mu.shape:
        raise ConfigError(f"eps has shape {eps.shape}, expected {mu.shape}")
    z = mu + np.exp(0.5 * log_var) * eps
    return mu, log_var, z


def decode(model, z):
    """Deterministic decoder mean for a latent batch."""
    return mlp_apply(model.decoder_spec, model.decoder, np.asarray(z, dtype=np.float64))


def posterior_stats(model, x):
    """PosteriorStats over x, evaluated in fixed-size chunks."""
    x = np.asarray(x, dtype=np.float64)
    mus, lvs = [], []
    for start in range(0, x.shape[0], EVAL_CHUNK):
        mu, lv, _ = encode(model, x[start:start + EVAL_CHUNK])
        mus.append(mu)
        lvs.append(lv)
    if not mus:
        k = model.latent_dim
        return PosteriorStats.from_moments(np.empty((0, k)), np.empty((0, k)))
    return PosteriorStats.from_moments(np.concatenate(mus), np.concatenate(lvs))


# ---------------------------------------------------------------------------
# training

def _capacity_at(config, epoch):
    target = config.objective.capacity
    ramp = getattr(config, "capacity_ramp", 0.0)
    if ramp <= 0.0 or target == 0.0:
        return target
    ramp_epochs = max(1.0, ramp * config.epochs)
    return target * min(1.0, (epoch + 1) / ramp_epochs)


def train_vae(config, dataset, seed=None):
    """Train one model per `config` on the dataset's training split.

    `seed` is this run's seed (defaults to config.master_seed + 1, run 1 of
    R); initialization, shuffling, latent noise, dropout, and permutation
    draws all come from streams derived from it, so a (config, seed) pair
    fixes the result bit for bit. Raises TrainingDivergence with the epoch
    and batch index if the loss leaves the reals. When every latent
    dimension ends below mean KL 0.01 a collapse warning is issued and the
    returned model is flagged, not rejected.
    """
    spec = config.objective
    conditional = bool(config.cvae.enabled) if config.cvae is not None else False
    k = int(config.latent_dim)
    p = dataset.n_features
    x = np.asarray(dataset.train_x, dtype=np.float64)
    y = dataset.train_y if conditional else None
    if conditional and y is None:
        raise DataError("conditional training needs a labeled dataset")
    x_in = stack_conditional(x, y) if conditional else x
    n = x.shape[0]
    if n == 0 and config.epochs > 0:
        raise DataError("cannot train on an empty training split")

    run_seed = int(seed) if seed is not None else int(config.master_seed) + 1
    init_rng = seeded_rng(run_seed, INIT_STREAM)
    train_rng = seeded_rng(run_seed, TRAIN_STREAM)

    enc_spec, dec_spec, disc_spec = build_specs(
        p, k, conditional=conditional, disc_width=config.disc_width, dropout=config.dropout)
    enc = init_mlp(enc_spec, init_rng)
    dec = init_mlp(dec_spec, init_rng)
    disc = init_mlp(disc_spec, init_rng) if spec.needs_discriminator else None

    use_adam = config.optimizer == "adam"
    if use_adam:
        enc_opt = adam_init(enc, config.lr)
        dec_opt = adam_init(dec, config.lr)
    disc_lr = config.disc_lr if config.disc_lr is not None else config.lr
    disc_opt = adam_init(disc, disc_lr) if disc is not None else None

    bs = int(config.batch_size)
    trace = []
    for epoch in range(config.epochs):
        cap = _capacity_at(config, epoch)
        order = train_rng.permutation(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, bs)):
            idx = order[start:start + bs]
            xb_in = x_in[idx]
            xb = x[idx]
            yb = y[idx] if conditional else None
            eps = train_rng.standard_normal((len(idx), k))

            enc_leaves = {name: ad.Var(v) for name, v in enc.items()}
            dec_leaves = {name: ad.Var(v) for name, v in dec.items()}
            loss, z_data = _tape_objective(spec, enc_spec, dec_spec, enc_leaves, dec_leaves,
                                           disc_spec, disc, xb_in, xb, yb, eps,
                                           cap, True, train_rng)
            loss_val = float(ad.data_of(loss))
            if not np.isfinite(loss_val):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}, batch {bi}")
            ad.backward(loss)
            enc_grads = {name: leaf.grad for name, leaf in enc_leaves.items()}
            dec_grads = {name: leaf.grad for name, leaf in dec_leaves.items()}
            if use_adam:
                enc, enc_opt = adam_step(enc_opt, enc, enc_grads)
                dec, dec_opt = adam_step(dec_opt, dec, dec_grads)
            else:
                enc = sgd_step(enc, enc_grads, config.lr)
                dec = sgd_step(dec, dec_grads, config.lr)
            total += loss_val * len(idx)

            if disc is not None and len(idx) >= 2:
                z_perm = permute_latent_columns(z_data, train_rng)
                disc_leaves = {name: ad.Var(v) for name, v in disc.items()}
                ce, _ = tc_discriminator_loss(z_data, z_perm, disc_spec, disc_leaves)
                ad.backward(ce)
                disc_grads = {name: leaf.grad for name, leaf in disc_leaves.items()}
                disc, disc_opt = adam_step(disc_opt, disc, disc_grads)
        trace.append(total / n if n else 0.0)

    model = TrainedVae(objective=spec, feature_dim=p, latent_dim=k, conditional=conditional,
                       encoder_spec=enc_spec, decoder_spec=dec_spec,
                       encoder=enc, decoder=dec,
                       discriminator_spec=disc_spec if disc is not None else None,
                       discriminator=disc, posterior=None,
                       loss_trace=tuple(trace), seed=run_seed, collapsed=False)
    stats = posterior_stats(model, x_in)
    collapsed = bool(n and np.all(stats.mean_kl < COLLAPSE_KL))
    if collapsed:
        warnings.warn(f"all {k} latent dimensions have mean KL below {COLLAPSE_KL}: "
                      "posterior collapse", RuntimeWarning, stacklevel=2)
    return replace(model, posterior=stats, collapsed=collapsed)


# ---------------------------------------------------------------------------
# checkpoints

def _spec_blob(spec):
    return None if spec is None else {
        "widths": list(spec.widths), "activation": spec.activation,
        "dropout": spec.dropout, "leaky_slope": spec.leaky_slope,
    }


def _spec_from_blob(blob):
    return None if blob is None else MlpSpec(
        widths=tuple(blob["widths"]), activation=blob["activation"],
        dropout=blob["dropout"], leaky_slope=blob["leaky_slope"])


def _params_blob(params):
    return None if params is None else {k: v.tolist() for k, v in params.items()}


def _params_from_blob(blob):
    return None if blob is None else {k: np.array(v, dtype=np.float64) for k, v in blob.items()}


def save_checkpoint(model, path):
    """Write a model as a versioned JSON blob (floats kept exact)."""
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "objective": {
            "variant": model.objective.variant, "beta": model.objective.beta,
            "gamma": model.objective.gamma, "capacity": model.objective.capacity,
            "lambda_od": model.objective.lambda_od, "lambda_d": model.objective.lambda_d,
        },
        "feature_dim": model.feature_dim,
        "latent_dim": model.latent_dim,
        "conditional": model.conditional,
        "seed": model.seed,
        "collapsed": model.collapsed,
        "loss_trace": list(model.loss_trace),
        "encoder_spec": _spec_blob(model.encoder_spec),
        "decoder_spec": _spec_blob(model.decoder_spec),
        "discriminator_spec": _spec_blob(model.discriminator_spec),
        "encoder": _params_blob(model.encoder),
        "decoder": _params_blob(model.decoder),
        "discriminator": _params_blob(model.discriminator),
        "posterior": None if model.posterior is None else {
            "mu": model.posterior.mu.tolist(),
            "log_var": model.posterior.log_var.tolist(),
        },
    }
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(blob, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path) as fh:
        blob = json.load(fh)
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a model checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {blob.get('version')!r}")
    post = blob["posterior"]
    stats = None
    if post is not None:
        stats = PosteriorStats.from_moments(np.array(post["mu"], dtype=np.float64),
                                            np.array(post["log_var"], dtype=np.float64))
        k = blob["latent_dim"]
        if stats.mu.size == 0:
            stats = PosteriorStats.from_moments(np.empty((0, k)), np.empty((0, k)))
    return TrainedVae(
        objective=ObjectiveSpec(**blob["objective"]),
        feature_dim=int(blob["feature_dim"]),
        latent_dim=int(blob["latent_dim"]),
        conditional=bool(blob["conditional"]),
        encoder_spec=_spec_from_blob(blob["encoder_spec"]),
        decoder_spec=_spec_from_blob(blob["decoder_spec"]),
        discriminator_spec=_spec_from_blob(blob["discriminator_spec"]),
        encoder=_params_from_blob(blob["encoder"]),
        decoder=_params_from_blob(blob["decoder"]),
        discriminator=_params_from_blob(blob["discriminator"]),
        posterior=stats,
        loss_trace=tuple(blob["loss_trace"]),
        seed=int(blob["seed"]),
        collapsed=bool(blob["collapsed"]),
    )
