"""Class-conditioned adversarial oversampler with a K+1-way discriminator.

The discriminator maps a feature vector to K class logits plus one
"generated" logit, so one softmax head answers both questions at once: which
condition, and is the sample real. Realness d is 1 minus the softmax mass on
the generated index; the fault score (1 - d)/d estimates the density ratio
p_generated/p_real at the discriminator's optimum, which makes it a
calibratable alarm statistic.

The generator consumes a per-class Gaussian latent draw concatenated with a
one-hot class code. Its loss is feature matching: the squared distance
between mean discriminator embeddings of a real-side batch and a generated
batch. Minority batches on the real side mix majority-class samples with
generated ones (weight pi), which is what lets the minority synthesis borrow
mass from the majority manifold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ndcore
from .dataio import LabeledDataset
from .metrics import g_mean_from_labels
from .ndcore import Dense, InstanceNorm, Network, PReLU, Reshape, ConvTranspose1D
from .seeding import derive_seed, make_rng

LATENT_DIM_DEFAULT = 128
EMBED_DIM_DEFAULT = 64
VARIANCE_FLOOR = 1e-6
FAULT_SCORE_CLAMP = 1e12
FAKE = -1


class ModelError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    """Raised when a loss stops being finite; carries the partial history."""

    def __init__(self, epoch: int, history: "TrainHistory", stage: str = "adversarial"):
        super().__init__(f"training diverged at {stage} epoch {epoch}")
        self.epoch = int(epoch)
        self.history = history
        self.stage = stage


# ---------------------------------------------------------------------------
# networks


class DiscriminatorNet:
    """Dense body (width -> 128 -> 64) with a K+1 logit head.

    The 64-unit activation feeding the head is the embedding f(x) used by the
    feature-matching loss and the latent statistics.
    """

    def __init__(self, width: int, n_classes: int, seed: int = 0):
        if n_classes < 1:
            raise ModelError("need at least one class")
        self.width = int(width)
        self.n_classes = int(n_classes)
        rng = make_rng(seed, "disc_init")
        self.net = Network([
            Dense(self.width, 128, rng),
            PReLU(128),
            Dense(128, EMBED_DIM_DEFAULT, rng),
            PReLU(EMBED_DIM_DEFAULT),
            Dense(EMBED_DIM_DEFAULT, self.n_classes + 1, rng),
        ])
        self.embed_layer = 3
        self.embed_dim = EMBED_DIM_DEFAULT

    @classmethod
    def from_parts(cls, net: Network, width: int, n_classes: int,
                   embed_layer: int, embed_dim: int) -> "DiscriminatorNet":
        self = cls.__new__(cls)
        self.width = int(width)
        self.n_classes = int(n_classes)
        self.net = net
        self.embed_layer = int(embed_layer)
        self.embed_dim = int(embed_dim)
        return self

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.net.forward(np.atleast_2d(np.asarray(x, dtype=np.float64)))

    def embed(self, x: np.ndarray) -> np.ndarray:
        self.logits(x)
        return self.net.activation(self.embed_layer)

    def backward_from_embedding(self, d_embedding: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the input given a gradient at the embedding."""
        return self.net.backward(d_embedding, from_layer=self.embed_layer + 1)


class GeneratorNet:
    """Maps (latent draw, one-hot class) to a feature vector.

    body="mlp": 5 Dense stages (in -> 128 -> 256 -> 256 -> 256 -> width) with
    InstanceNorm + PReLU between stages and a linear final layer. body="conv"
    (feature widths that are multiples of 16, >= 512 by default): a Dense
    projection to 64 channels followed by 4 stride-2 transposed convolutions
    down to one channel, same normalization pattern, linear final stage.

    Latent statistics (per-class mean/variance) and the embedding-to-latent
    projection live on the generator so sampling is self-contained; they
    start at the standard normal and are refreshed during training.
    """

    def __init__(self, width: int, n_classes: int, latent_dim: int = LATENT_DIM_DEFAULT,
                 seed: int = 0, body: str | None = None):
        if latent_dim < 1:
            raise ModelError("latent_dim must be >= 1")
        self.width = int(width)
        self.n_classes = int(n_classes)
        self.latent_dim = int(latent_dim)
        if body is None:
            body = "conv" if (width >= 512 and width % 16 == 0) else "mlp"
        if body == "conv" and width % 16 != 0:
            raise ModelError("conv body needs the feature width divisible by 16")
        self.body = body
        rng = make_rng(seed, "gen_init")
        in_dim = self.latent_dim + self.n_classes
        if body == "mlp":
            self.net = Network([
                Dense(in_dim, 128, rng), InstanceNorm(), PReLU(128),
                Dense(128, 256, rng), InstanceNorm(), PReLU(256),
                Dense(256, 256, rng), InstanceNorm(), PReLU(256),
                Dense(256, 256, rng), InstanceNorm(), PReLU(256),
                Dense(256, self.width, rng),
            ])
        elif body == "conv":
            l0 = self.width // 16
            self.net = Network([
                Dense(in_dim, 64 * l0, rng), Reshape((64, l0)),
                InstanceNorm(), PReLU(64),
                ConvTranspose1D(64, 32, 4, 2, padding=1, rng=rng),
                InstanceNorm(), PReLU(32),
                ConvTranspose1D(32, 16, 4, 2, padding=1, rng=rng),
                InstanceNorm(), PReLU(16),
                ConvTranspose1D(16, 8, 4, 2, padding=1, rng=rng),
                InstanceNorm(), PReLU(8),
                ConvTranspose1D(8, 1, 4, 2, padding=1, rng=rng),
                Reshape((self.width,)),
            ])
        else:
            raise ModelError(f"unknown body {body!r}")
        self.stats = standard_normal_stats(self.n_classes, self.latent_dim)
        self.projection: np.ndarray | None = None

    @classmethod
    def from_parts(cls, net: Network, width: int, n_classes: int, latent_dim: int,
                   body: str, stats: "LatentStats",
                   projection: np.ndarray | None) -> "GeneratorNet":
        self = cls.__new__(cls)
        self.width = int(width)
        self.n_classes = int(n_classes)
        self.latent_dim = int(latent_dim)
        self.body = body
        self.net = net
        self.stats = stats
        self.projection = None if projection is None else np.asarray(projection,
                                                                     dtype=np.float64)
        return self

    def inputs_for(self, z: np.ndarray, class_ids: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        c = np.atleast_1d(np.asarray(class_ids, dtype=np.int64))
        if z.shape != (c.size, self.latent_dim):
            raise ModelError(f"latent batch {z.shape} does not match {c.size} class ids")
        if c.min() < 0 or c.max() >= self.n_classes:
            raise ModelError("class id out of range")
        onehot = np.zeros((c.size, self.n_classes))
        onehot[np.arange(c.size), c] = 1.0
        return np.concatenate([z, onehot], axis=1)

    def forward(self, z: np.ndarray, class_ids: np.ndarray) -> np.ndarray:
        return self.net.forward(self.inputs_for(z, class_ids))

    def sample(self, class_ids: np.ndarray, rng: np.random.Generator):
        """Draw latents from the per-class statistics and generate."""
        c = np.atleast_1d(np.asarray(class_ids, dtype=np.int64))
        z = np.empty((c.size, self.latent_dim))
        for i, ci in enumerate(c):
            z[i] = latent_from_draw(self.stats, int(ci),
                                    rng.standard_normal(self.latent_dim))
        return self.forward(z, c), z


# ---------------------------------------------------------------------------
# latent statistics


@dataclass
class LatentStats:
    """Per-class diagonal Gaussian over the latent space."""

    mu: np.ndarray     # (K, latent_dim)
    var: np.ndarray    # (K, latent_dim), entries >= VARIANCE_FLOOR

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.var = np.asarray(self.var, dtype=np.float64)
        if self.mu.shape != self.var.shape or self.mu.ndim != 2:
            raise ModelError("mu and var must be matching (K, latent_dim) arrays")
        if np.any(self.var < VARIANCE_FLOOR):
            raise ModelError(f"variance below floor {VARIANCE_FLOOR}")

    @property
    def n_classes(self) -> int:
        return self.mu.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.mu.shape[1]


def standard_normal_stats(n_classes: int, latent_dim: int) -> LatentStats:
    return LatentStats(np.zeros((n_classes, latent_dim)),
                       np.ones((n_classes, latent_dim)))


def fit_latent_stats(embeddings_by_class) -> LatentStats:
    """Per-class mean and population variance (floored at 1e-6).

    `embeddings_by_class[c]` holds class c's (already projected) latent-space
    vectors; every class needs at least 2 samples.
    """
    mus = []
    vars_ = []
    dim = None
    for c, emb in enumerate(embeddings_by_class):
        e = np.asarray(emb, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 2:
            raise ModelError(f"class {c}: need >= 2 samples to fit statistics")
        if dim is None:
            dim = e.shape[1]
        elif e.shape[1] != dim:
            raise ModelError("inconsistent latent dimension across classes")
        mus.append(e.mean(axis=0))
        vars_.append(np.maximum(e.var(axis=0), VARIANCE_FLOOR))
    return LatentStats(np.asarray(mus), np.asarray(vars_))


def latent_projection(embed_dim: int, latent_dim: int, seed: int) -> np.ndarray:
    """Fixed random projection from embedding space to latent space."""
    rng = make_rng(seed, "latent_projection")
    return rng.standard_normal((embed_dim, latent_dim)) / np.sqrt(embed_dim)


def latent_from_draw(stats: LatentStats, c: int, normal_draw: np.ndarray) -> np.ndarray:
    """mu_c + sqrt(var_c) * draw; the deterministic core of sample_latent."""
    if not 0 <= c < stats.n_classes:
        raise ModelError(f"class {c} not present in statistics")
    draw = np.asarray(normal_draw, dtype=np.float64)
    if draw.shape[-1] != stats.latent_dim:
        raise ModelError("draw dimension does not match latent_dim")
    return stats.mu[c] + np.sqrt(stats.var[c]) * draw


def sample_latent(stats: LatentStats, c: int, seed: int, n: int = 1) -> np.ndarray:
    """n latent vectors for class c, deterministic per seed."""
    rng = make_rng(seed, f"latent:{c}")
    z = latent_from_draw(stats, c, rng.standard_normal((int(n), stats.latent_dim)))
    return z


def generate(gen: GeneratorNet, z: np.ndarray, c: int) -> np.ndarray:
    """Synthesize feature vectors for class c from given latent draws."""
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    out = gen.forward(z2, np.full(z2.shape[0], int(c), dtype=np.int64))
    return out[0] if single else out


def discriminate(disc: DiscriminatorNet, x: np.ndarray):
    """(class_logits, fake_logit, embedding, realness d) for one x or a batch.

    d = 1 - softmax probability of the generated index, so d + p_fake = 1.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    logits = disc.logits(arr)
    emb = disc.net.activation(disc.embed_layer)
    probs = ndcore.softmax(logits)
    d = 1.0 - probs[:, disc.n_classes]
    class_logits = logits[:, : disc.n_classes]
    fake_logit = logits[:, disc.n_classes]
    if single:
        return class_logits[0], float(fake_logit[0]), emb[0], float(d[0])
    return class_logits, fake_logit, emb, d


# ---------------------------------------------------------------------------
# mixture sampling


@dataclass
class MixtureConfig:
    """Majority mixing weight pi and per-class density thresholds delta."""

    pi: float = 0.5
    delta: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ModelError("pi must lie in [0, 1]")
        self.delta = tuple(float(d) for d in self.delta)
        if any(not 0.0 <= d <= 1.0 for d in self.delta):
            raise ModelError("delta entries must lie in [0, 1]")

    def delta_for(self, c: int) -> float:
        return self.delta[c] if c < len(self.delta) else 0.05


def mixture_minority_batch(ds: LabeledDataset, gen: GeneratorNet, stats: LatentStats,
                           cfg: MixtureConfig, c: int, n: int, seed: int):
    """n rows drawn from pi * (real majority) + (1 - pi) * (generated class c).

    Returns (features, origin) where origin[i] is True for rows copied from
    the real majority class and False for generated rows.
    """
    if n < 1:
        raise ModelError("n must be >= 1")
    if not 0 < c < gen.n_classes:
        raise ModelError(f"class {c} is not a fault class")
    majority = np.flatnonzero(ds.labels == 0)
    if majority.size == 0:
        raise ModelError("majority (normal) class is empty")
    rng = make_rng(seed, f"mixture:{c}")
    take_real = rng.uniform(size=n) < cfg.pi
    out = np.empty((n, ds.dim))
    real_rows = np.flatnonzero(take_real)
    gen_rows = np.flatnonzero(~take_real)
    if real_rows.size:
        picks = majority[rng.integers(0, majority.size, size=real_rows.size)]
        out[real_rows] = ds.features[picks]
    if gen_rows.size:
        z = latent_from_draw(stats, c, rng.standard_normal((gen_rows.size, gen.latent_dim)))
        out[gen_rows] = gen.forward(z, np.full(gen_rows.size, c, dtype=np.int64))
    return out, take_real


# ---------------------------------------------------------------------------
# losses


def feature_matching_loss(disc: DiscriminatorNet, real_batch: np.ndarray,
                          fake_batch: np.ndarray):
    """Squared distance of mean embeddings; gradient w.r.t. the fake batch.

    loss = || mean_x f(x_real) - mean_x f(x_fake) ||^2. The returned gradient
    is d loss / d fake_batch, obtained by backpropagating through the
    discriminator body below the embedding; the real side is a constant and
    discriminator parameters are not updated from this loss.
    """
    real = np.atleast_2d(np.asarray(real_batch, dtype=np.float64))
    fake = np.atleast_2d(np.asarray(fake_batch, dtype=np.float64))
    if real.shape[0] == 0 or fake.shape[0] == 0:
        raise ModelError("feature matching needs non-empty batches")
    mean_real = disc.embed(real).mean(axis=0)
    emb_fake = disc.embed(fake)
    mean_fake = emb_fake.mean(axis=0)
    diff = mean_real - mean_fake
    loss = float(diff @ diff)
    d_emb = np.tile(2.0 * (mean_fake - mean_real) / fake.shape[0], (fake.shape[0], 1))
    d_fake = disc.backward_from_embedding(d_emb)
    return loss, d_fake


def feature_matching_gap(emb_real: np.ndarray, emb_fake: np.ndarray) -> float:
    """The loss value alone, straight from embedding matrices."""
    diff = np.asarray(emb_real).mean(axis=0) - np.asarray(emb_fake).mean(axis=0)
    return float(diff @ diff)


# ---------------------------------------------------------------------------
# Gaussian embedding model and low-density penalty


class GaussianEmbeddingModel:
    """One diagonal Gaussian per class, fitted on real-sample embeddings.

    Scoring picks the argmax-density component (weight 1, all others 0).
    Class 0 is the majority component used by the low-density penalty; the
    fitted majority training densities are kept so quantile thresholds can be
    derived later.
    """

    def __init__(self):
        self.mu: np.ndarray | None = None
        self.var: np.ndarray | None = None
        self._majority_train_logpdf: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.mu is not None

    def fit(self, embeddings: np.ndarray, labels: np.ndarray, n_classes: int):
        e = np.asarray(embeddings, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        if e.ndim != 2 or y.shape != (e.shape[0],):
            raise ModelError("embeddings must be (n, d) with one label per row")
        mus = []
        vars_ = []
        for c in range(int(n_classes)):
            rows = e[y == c]
            if rows.shape[0] < 2:
                raise ModelError(f"class {c}: need >= 2 embeddings to fit")
            mus.append(rows.mean(axis=0))
            vars_.append(np.maximum(rows.var(axis=0), VARIANCE_FLOOR))
        self.mu = np.asarray(mus)
        self.var = np.asarray(vars_)
        self._majority_train_logpdf = np.sort(self.log_density(e[y == 0], 0))
        return self

    def _require_fitted(self):
        if not self.fitted:
            raise ModelError("embedding model not fitted")

    def log_density(self, e: np.ndarray, component: int) -> np.ndarray:
        self._require_fitted()
        e = np.atleast_2d(np.asarray(e, dtype=np.float64))
        mu = self.mu[component]
        var = self.var[component]
        quad = ((e - mu) ** 2 / var).sum(axis=1)
        norm = e.shape[1] * np.log(2 * np.pi) + np.log(var).sum()
        return -0.5 * (quad + norm)

    def score(self, e: np.ndarray):
        """(best component, density) for one embedding; ties -> lowest index."""
        self._require_fitted()
        e = np.asarray(e, dtype=np.float64)
        logs = np.array([self.log_density(e, c)[0] for c in range(self.mu.shape[0])])
        best = int(np.argmax(logs))
        return best, float(np.exp(logs[best]))

    def majority_log_threshold(self, delta_quantile: float) -> float:
        """log density at the requested quantile of majority training points."""
        self._require_fitted()
        if not 0.0 <= delta_quantile <= 1.0:
            raise ModelError("delta_quantile must lie in [0, 1]")
        return float(np.quantile(self._majority_train_logpdf, delta_quantile))


def gaussian_embedding_score(model: GaussianEmbeddingModel, x_embedding: np.ndarray):
    return model.score(x_embedding)


def low_density_penalty(model: GaussianEmbeddingModel, fake_embeddings: np.ndarray,
                        delta_quantile: float):
    """Hinge on majority log-density: mean(max(0, log p_Mj(e) - log delta)).

    delta is the `delta_quantile` quantile of the fitted majority training
    densities. Returns (penalty, d penalty / d fake_embeddings); the gradient
    is zero for embeddings already below the threshold.
    """
    model._require_fitted()
    e = np.atleast_2d(np.asarray(fake_embeddings, dtype=np.float64))
    log_delta = model.majority_log_threshold(delta_quantile)
    logp = model.log_density(e, 0)
    active = logp > log_delta
    penalty = float(np.maximum(0.0, logp - log_delta).mean())
    grad = np.zeros_like(e)
    if np.any(active):
        # d log p / d e = -(e - mu) / var, averaged over the batch
        grad[active] = -(e[active] - model.mu[0]) / model.var[0] / e.shape[0]
    return penalty, grad


# ---------------------------------------------------------------------------
# detector


@dataclass
class FaultDetector:
    """Trained discriminator plus a threshold on the fault score.

    The default threshold 1.0 is the indifference point where the estimated
    generated and real densities are equal; calibration replaces it.
    """

    disc: DiscriminatorNet
    tau: float = 1.0
    target_fpr: float = 0.05

    def __post_init__(self):
        if not np.isfinite(self.tau):
            raise ModelError("tau must be finite")
        if not 0.0 < self.target_fpr < 1.0:
            raise ModelError("target_fpr must lie in (0, 1)")


def fault_score(det: FaultDetector, x: np.ndarray) -> float:
    """s = (1 - d)/d for one sample; clamped at 1e12 when d underflows."""
    scores, _ = fault_scores(det, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return float(scores[0])


def fault_scores(det: FaultDetector, X: np.ndarray):
    """(scores, clamped_mask) for a batch."""
    _, _, _, d = discriminate(det.disc, np.atleast_2d(np.asarray(X, dtype=np.float64)))
    d = np.atleast_1d(d)
    clamped = d <= 1.0 / (1.0 + FAULT_SCORE_CLAMP)
    safe = np.where(clamped, 1.0, d)
    s = (1.0 - safe) / safe
    s[clamped] = FAULT_SCORE_CLAMP
    return s, clamped


@dataclass
class CalibrationResult:
    tau: float
    achieved_fpr: float
    flagged: bool


def calibrate_threshold(det: FaultDetector, normal_scores, target_fpr: float) -> CalibrationResult:
    """Set tau to the (1 - target_fpr) quantile of healthy-sample scores.

    Linear interpolation between order statistics; the alarm rule is
    score > tau, so the achieved rate on the calibration set is at most
    target_fpr + 1/n except under heavy ties, which are flagged. Updates
    det.tau in place and returns the calibration record.
    """
    s = np.asarray(normal_scores, dtype=np.float64).ravel()
    if s.size < 20:
        raise ModelError(f"need >= 20 calibration scores, got {s.size}")
    if not 0.0 < target_fpr < 1.0:
        raise ModelError("target_fpr must lie in (0, 1)")
    tau = float(np.quantile(s, 1.0 - target_fpr))
    achieved = float(np.mean(s > tau))
    flagged = achieved > target_fpr + 1.0 / s.size
    det.tau = tau
    det.target_fpr = float(target_fpr)
    return CalibrationResult(tau=tau, achieved_fpr=achieved, flagged=flagged)


def classify(det: FaultDetector, x: np.ndarray) -> int:
    """Class index, or FAKE (-1) for samples rejected as generated."""
    labels = classify_batch(det, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    return int(labels[0])


def classify_batch(det: FaultDetector, X: np.ndarray) -> np.ndarray:
    """Rejected as generated iff fault score exceeds tau AND the best class
    logit is below the generated logit; otherwise argmax over class logits
    (ties to the lowest index).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    class_logits, fake_logit, _, _ = discriminate(det.disc, X)
    scores, _ = fault_scores(det, X)
    labels = np.argmax(class_logits, axis=1).astype(np.int64)
    best = class_logits[np.arange(X.shape[0]), labels]
    is_fake = (scores > det.tau) & (best < fake_logit)
    labels[is_fake] = FAKE
    return labels


def fake_rejection_rate(det: FaultDetector, gen: GeneratorNet, n: int, seed: int) -> float:
    """Fraction of freshly generated samples the detector rejects as fake."""
    if n < 1:
        raise ModelError("n must be >= 1")
    rng = make_rng(seed, "fake_rejection")
    fault_classes = list(range(1, gen.n_classes)) or [0]
    classes = np.asarray(fault_classes)[rng.integers(0, len(fault_classes), size=n)]
    feats, _ = gen.sample(classes, rng)
    return float(np.mean(classify_batch(det, feats) == FAKE))


# ---------------------------------------------------------------------------
# plain classifier (reference point for the resampling baselines)


class BaselineClassifier:
    """Same body as the discriminator but a plain K-way softmax classifier.

    Trained with uniform minibatches, so it inherits whatever class imbalance
    the training set carries; the oversampling baselines differ only in the
    data they feed it. Its fault score is 1 - p(class 0).
    """

    def __init__(self, width: int, n_classes: int, seed: int = 0):
        self.width = int(width)
        self.n_classes = int(n_classes)
        rng = make_rng(seed, "classifier_init")
        self.net = Network([
            Dense(self.width, 128, rng),
            PReLU(128),
            Dense(128, EMBED_DIM_DEFAULT, rng),
            PReLU(EMBED_DIM_DEFAULT),
            Dense(EMBED_DIM_DEFAULT, self.n_classes, rng),
        ])

    def predict(self, X: np.ndarray) -> np.ndarray:
        logits = self.net.forward(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        return np.argmax(logits, axis=1).astype(np.int64)

    def scores(self, X: np.ndarray) -> np.ndarray:
        logits = self.net.forward(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        return 1.0 - ndcore.softmax(logits)[:, 0]


def train_classifier(ds: LabeledDataset, epochs: int, batch_size: int,
                     seed: int, lr: float = 2e-4) -> BaselineClassifier:
    """Cross-entropy training on uniformly shuffled minibatches."""
    if epochs < 1 or batch_size < 2:
        raise ModelError("epochs >= 1 and batch_size >= 2 required")
    clf = BaselineClassifier(ds.dim, ds.n_classes, seed=seed)
    opt = ndcore.Adam(clf.net, lr=lr)
    rng = make_rng(seed, "classifier_loop")
    for _ in range(epochs):
        order = rng.permutation(ds.n)
        for start in range(0, ds.n - batch_size + 1, batch_size):
            idx = order[start : start + batch_size]
            logits = clf.net.forward(ds.features[idx])
            loss, grad = ndcore.softmax_cross_entropy_batch(logits, ds.labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(0, TrainHistory(), stage="classifier")
            clf.net.backward(grad)
            opt.step(clf.net)
    return clf


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 64
    latent_dim: int = LATENT_DIM_DEFAULT
    pi: float = 0.5
    refresh_interval: int = 5
    warmup_epochs: int = 5
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    fake_fraction: float = 0.125
    mixture_share: float = 0.5
    input_jitter: float = 0.4
    penalty_weight: float = 0.0
    delta_quantile: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ModelError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ModelError("batch_size must be >= 2")
        if self.refresh_interval < 1:
            raise ModelError("refresh_interval must be >= 1")
        if self.warmup_epochs < 0:
            raise ModelError("warmup_epochs must be >= 0")
        if not 0.0 <= self.pi <= 1.0:
            raise ModelError("pi must lie in [0, 1]")
        if not 0.0 < self.fake_fraction <= 1.0:
            raise ModelError("fake_fraction must lie in (0, 1]")
        if not 0.0 <= self.mixture_share < 1.0:
            raise ModelError("mixture_share must lie in [0, 1)")
        if self.input_jitter < 0:
            raise ModelError("input_jitter must be >= 0")
        if self.penalty_weight < 0:
            raise ModelError("penalty_weight must be >= 0")


@dataclass
class TrainHistory:
    """One row per completed adversarial epoch."""

    d_loss: list = field(default_factory=list)
    g_loss: list = field(default_factory=list)
    val_g_mean: list = field(default_factory=list)
    fake_rejection: list = field(default_factory=list)

    def append(self, d: float, g: float, gm: float, rej: float) -> None:
        self.d_loss.append(float(d))
        self.g_loss.append(float(g))
        self.val_g_mean.append(float(gm))
        self.fake_rejection.append(float(rej))

    def __len__(self) -> int:
        return len(self.d_loss)

    def to_csv_text(self) -> str:
        lines = ["epoch,d_loss,g_loss,val_g_mean,fake_rejection"]
        for i in range(len(self)):
            lines.append("%d,%.17g,%.17g,%.17g,%.17g" % (
                i, self.d_loss[i], self.g_loss[i],
                self.val_g_mean[i], self.fake_rejection[i]))
        return "\n".join(lines) + "\n"


def _stratified_batch(rng, rows_by_class, batch_size: int):
    """Balanced real batch: class drawn uniformly, then a row within it."""
    k = len(rows_by_class)
    classes = rng.integers(0, k, size=batch_size)
    idx = np.empty(batch_size, dtype=np.int64)
    for i, c in enumerate(classes):
        rows = rows_by_class[c]
        idx[i] = rows[rng.integers(0, rows.size)]
    return idx


def train(ds_train: LabeledDataset, cfg: TrainConfig,
          ds_val: LabeledDataset | None = None):
    """Adversarial training; returns (FaultDetector, GeneratorNet, TrainHistory).

    Warm-up first: the generator alone minimizes feature matching against
    real fault samples. Then per batch: a discriminator step of K+1
    cross-entropy (balanced real batch at its class labels, generated batch
    at the fake index) and a generator step of feature matching between a
    real-fault+mixture batch and a generated batch for one fault class
    (+ the optional low-density penalty). Latent statistics are refitted from
    current discriminator embeddings every `refresh_interval` epochs. Raises
    TrainingDiverged (partial history attached) on a non-finite loss. The
    training set is never written to.
    """
    k = ds_train.n_classes
    counts = ds_train.class_counts()
    if counts[0] == 0:
        raise ModelError("training set has no normal samples")
    if k < 2 or counts[1:].sum() == 0:
        raise ModelError("training set has no fault samples")
    present = [c for c in range(k) if counts[c] > 0]
    if len(present) != k:
        raise ModelError("every class needs at least one training sample")

    disc = DiscriminatorNet(ds_train.dim, k, seed=cfg.seed)
    gen = GeneratorNet(ds_train.dim, k, latent_dim=cfg.latent_dim, seed=cfg.seed)
    gen.projection = latent_projection(disc.embed_dim, cfg.latent_dim, cfg.seed)
    opt_d = ndcore.Adam(disc.net, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    opt_g = ndcore.Adam(gen.net, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)

    rng = make_rng(cfg.seed, "train_loop")
    rows_by_class = [np.flatnonzero(ds_train.labels == c) for c in range(k)]
    fault_classes = list(range(1, k))
    mix_cfg = MixtureConfig(pi=cfg.pi, delta=(cfg.delta_quantile,) * k)
    n_batches = max(1, ds_train.n // cfg.batch_size)
    history = TrainHistory()
    embedding_model: GaussianEmbeddingModel | None = None
    eval_ds = ds_val if ds_val is not None else ds_train

    def g_step(real_side: np.ndarray, classes: np.ndarray, delta_q: float) -> float:
        # gen.sample leaves the generator's forward cache in place, so the
        # feature-matching gradient backpropagates through that exact pass
        fake, _ = gen.sample(classes, rng)
        loss, d_fake = feature_matching_loss(disc, real_side, fake)
        if not np.isfinite(loss):
            return loss
        if cfg.penalty_weight > 0 and embedding_model is not None:
            emb_fake = disc.embed(fake)
            pen, d_emb = low_density_penalty(embedding_model, emb_fake, delta_q)
            loss += cfg.penalty_weight * pen
            d_fake = d_fake + cfg.penalty_weight * disc.backward_from_embedding(d_emb)
        gen.net.backward(d_fake)
        opt_g.step(gen.net)
        return loss

    for epoch in range(cfg.warmup_epochs):
        for b in range(n_batches):
            # one fault class per batch so the generator is conditioned from
            # the start instead of matching the all-faults centroid
            c = fault_classes[b % len(fault_classes)]
            real_idx = rows_by_class[c][rng.integers(0, rows_by_class[c].size,
                                                     size=cfg.batch_size)]
            classes = np.full(cfg.batch_size, c, dtype=np.int64)
            try:
                loss = g_step(ds_train.features[real_idx], classes, cfg.delta_quantile)
            except ndcore.NonFiniteError:
                raise TrainingDiverged(epoch, history, stage="warmup") from None
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, history, stage="warmup")

    det = FaultDetector(disc)
    for epoch in range(cfg.epochs):
        if epoch > 0 and epoch % cfg.refresh_interval == 0:
            emb = disc.embed(ds_train.features)
            proj = emb @ gen.projection
            gen.stats = fit_latent_stats([proj[ds_train.labels == c] for c in range(k)])
            if cfg.penalty_weight > 0:
                embedding_model = GaussianEmbeddingModel().fit(emb, ds_train.labels, k)
        d_sum = 0.0
        g_sum = 0.0
        for b in range(n_batches):
            try:
                # discriminator step: balanced real batch at class labels,
                # generated batch at the fake index.  The generated share is
                # kept below the per-class real share so the fake logit learns
                # generator artifacts instead of annexing the fault regions.
                real_idx = _stratified_batch(rng, rows_by_class, cfg.batch_size)
                n_fake = max(1, int(round(cfg.batch_size * cfg.fake_fraction)))
                fake_classes = np.asarray(fault_classes)[
                    rng.integers(0, len(fault_classes), size=n_fake)]
                fake, _ = gen.sample(fake_classes, rng)
                real_x = ds_train.features[real_idx]
                if cfg.input_jitter > 0:
                    # jitter the real side only: unseen real rows differ from
                    # training rows by fresh noise, so widening the real cloud
                    # keeps the fake logit from clipping its tails
                    real_x = real_x + cfg.input_jitter * rng.standard_normal(real_x.shape)
                x = np.concatenate([real_x, fake], axis=0)
                t = np.concatenate([ds_train.labels[real_idx],
                                    np.full(n_fake, k, dtype=np.int64)])
                d_loss, d_grad = ndcore.softmax_cross_entropy_batch(disc.logits(x), t)
                if not np.isfinite(d_loss):
                    raise TrainingDiverged(epoch, history)
                disc.net.backward(d_grad)
                opt_d.step(disc.net)

                # generator step for one fault class: real side is real
                # class-c samples plus a mixture batch (mixture_share of it)
                c = fault_classes[b % len(fault_classes)]
                n_mix = int(round(cfg.batch_size * cfg.mixture_share))
                n_real = cfg.batch_size - n_mix
                real_c = rows_by_class[c][rng.integers(0, rows_by_class[c].size,
                                                       size=n_real)]
                parts = [ds_train.features[real_c]]
                if n_mix > 0:
                    mix, _ = mixture_minority_batch(
                        ds_train, gen, gen.stats, mix_cfg, c, n_mix,
                        seed=derive_seed(cfg.seed, f"mix:{epoch}:{b}"))
                    parts.append(mix)
                real_side = np.concatenate(parts, axis=0)
                g_loss = g_step(real_side, np.full(cfg.batch_size, c, dtype=np.int64),
                                mix_cfg.delta_for(c))
                if not np.isfinite(g_loss):
                    raise TrainingDiverged(epoch, history)
            except ndcore.NonFiniteError:
                raise TrainingDiverged(epoch, history) from None
            d_sum += d_loss
            g_sum += g_loss

        preds = classify_batch(det, eval_ds.features)
        gm = g_mean_from_labels(eval_ds.labels, preds, k, fake_column=True)
        rej = fake_rejection_rate(det, gen, n=min(256, 4 * cfg.batch_size),
                                  seed=derive_seed(cfg.seed, f"rejection:{epoch}"))
        history.append(d_sum / n_batches, g_sum / n_batches, gm, rej)

    return det, gen, history
