"""Biased matrix factorization trained with per-sample SGD.

Predicted rating: mu + b_u + b_i + p_u . q_i, clamped to [1, 5].  Training
iterates interactions in a seeded shuffled order each epoch, so a model is
a pure function of (data, hyperparameters).
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import sgd_epoch
from .dataio import InteractionSet
from .errors import NumericError

CLAMP_MIN = 1.0
CLAMP_MAX = 5.0

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    k: int = 32
    epochs: int = 20
    learning_rate: float = 0.005
    regularization: float = 0.02
    init_scale: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.regularization < 0:
            raise ValueError(f"regularization must be >= 0, got {self.regularization}")
        if self.init_scale <= 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")


class FactorModel:
    """Trained parameters; immutable by convention after training."""

    def __init__(self, global_mean, user_bias, item_bias, user_factors, item_factors):
        self.global_mean = float(global_mean)
        self.user_bias = np.asarray(user_bias, dtype=np.float64)
        self.item_bias = np.asarray(item_bias, dtype=np.float64)
        self.user_factors = np.asarray(user_factors, dtype=np.float64)
        self.item_factors = np.asarray(item_factors, dtype=np.float64)
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise ValueError("user and item factor widths differ")
        if self.user_factors.shape[0] != self.user_bias.shape[0]:
            raise ValueError("user factor/bias length mismatch")
        if self.item_factors.shape[0] != self.item_bias.shape[0]:
            raise ValueError("item factor/bias length mismatch")

    @property
    def k(self) -> int:
        return self.user_factors.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_bias.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_bias.shape[0]


class RankedList:
    """Per-user candidate ranking: items with their clamped predictions."""

    __slots__ = ("user", "items", "preds")

    def __init__(self, user, items, preds):
        self.user = int(user)
        self.items = np.asarray(items, dtype=np.int32)
        self.preds = np.asarray(preds, dtype=np.float64)
        if len(self.items) != len(self.preds):
            raise ValueError("items and preds length mismatch")

    def __len__(self) -> int:
        return len(self.items)

    def entries(self):
        return list(zip(self.items.tolist(), self.preds.tolist()))


def train(train_set: InteractionSet, hp: Hyperparams) -> FactorModel:
    """Fit the model on a training set; deterministic given (data, hp).

    epochs == 0 returns the canonical untrained model (zero biases and
    factors, so every prediction is the clamped global mean).
    """
    hp.validate()
    if len(train_set) == 0:
        raise ValueError("cannot train on an empty interaction set")

    n_users = train_set.n_users
    n_items = train_set.n_items
    mu = float(train_set.rating.mean())

    if hp.epochs == 0:
        return FactorModel(mu, np.zeros(n_users), np.zeros(n_items),
                           np.zeros((n_users, hp.k)), np.zeros((n_items, hp.k)))

    rng = np.random.default_rng(hp.seed)
    user_factors = rng.uniform(-hp.init_scale, hp.init_scale, (n_users, hp.k))
    item_factors = rng.uniform(-hp.init_scale, hp.init_scale, (n_items, hp.k))
    user_bias = np.zeros(n_users)
    item_bias = np.zeros(n_items)

    user_idx = train_set.user_idx
    item_idx = train_set.item_idx
    ratings = train_set.rating
    for epoch in range(hp.epochs):
        order = rng.permutation(len(train_set)).astype(np.int64)
        sse = sgd_epoch(user_idx, item_idx, ratings, order, mu,
                        user_bias, item_bias, user_factors, item_factors,
                        hp.learning_rate, hp.regularization)
        if not np.isfinite(sse):
            raise NumericError(
                f"training diverged at epoch {epoch + 1} (non-finite loss); "
                f"try a smaller learning rate than {hp.learning_rate}")
    return FactorModel(mu, user_bias, item_bias, user_factors, item_factors)


def predict(model: FactorModel, user: int, item: int) -> float:
    """Clamped predicted rating for one (user, item) index pair."""
    if not (0 <= user < model.n_users):
        raise IndexError(f"user index {user} out of range [0, {model.n_users})")
    if not (0 <= item < model.n_items):
        raise IndexError(f"item index {item} out of range [0, {model.n_items})")
    raw = (model.global_mean + model.user_bias[user] + model.item_bias[item]
           + float(np.dot(model.user_factors[user], model.item_factors[item])))
    return float(min(max(raw, CLAMP_MIN), CLAMP_MAX))


def score_items(model: FactorModel, user: int) -> np.ndarray:
    """Clamped predictions for one user over all items."""
    if not (0 <= user < model.n_users):
        raise IndexError(f"user index {user} out of range [0, {model.n_users})")
    scores = model.item_factors @ model.user_factors[user]
    scores += model.global_mean + model.user_bias[user] + model.item_bias
    return np.clip(scores, CLAMP_MIN, CLAMP_MAX)


def rank_candidates(model: FactorModel, user: int, train_set: InteractionSet) -> RankedList:
    """Full ranking of items the user has not rated in train.

    Order: predicted rating descending, ties by item index ascending.  The
    whole ranking (not only a top-N prefix) is returned so re-ranking
    strategies can reach below the head of the list.
    """
    scores = score_items(model, user)
    seen = train_set.item_idx[train_set.user_idx == user]
    masked = scores.copy()
    masked[seen] = -np.inf
    order = np.argsort(-masked, kind="stable")
    order = order[:model.n_items - len(seen)]
    return RankedList(user, order, scores[order])


def objective(model: FactorModel, user: int, item: int, rating: float,
              regularization: float) -> float:
    """Single-interaction SGD objective: squared error on the raw prediction
    plus L2 penalty on every parameter the interaction touches."""
    raw = (model.global_mean + model.user_bias[user] + model.item_bias[item]
           + float(np.dot(model.user_factors[user], model.item_factors[item])))
    err = rating - raw
    penalty = (model.user_bias[user] ** 2 + model.item_bias[item] ** 2
               + float(np.dot(model.user_factors[user], model.user_factors[user]))
               + float(np.dot(model.item_factors[item], model.item_factors[item])))
    return err * err + regularization * penalty


def gradient_check(model: FactorModel, user: int, item: int, rating: float,
                   regularization: float = 0.02, epsilon: float = 1e-5) -> float:
    """Max relative deviation between the analytic gradient of
    :func:`objective` and central finite differences, over all parameters
    touched by the interaction (b_u, b_i, p_u, q_i)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pu = model.user_factors[user]
    qi = model.item_factors[item]
    raw = (model.global_mean + model.user_bias[user] + model.item_bias[item]
           + float(np.dot(pu, qi)))
    err = rating - raw
    lam = regularization

    analytic = np.concatenate([
        [-2.0 * err + 2.0 * lam * model.user_bias[user]],
        [-2.0 * err + 2.0 * lam * model.item_bias[item]],
        -2.0 * err * qi + 2.0 * lam * pu,
        -2.0 * err * pu + 2.0 * lam * qi,
    ])

    def perturbed(delta_bu=0.0, delta_bi=0.0, delta_pu=None, delta_qi=None):
        m = FactorModel(model.global_mean,
                        model.user_bias.copy(), model.item_bias.copy(),
                        model.user_factors.copy(), model.item_factors.copy())
        m.user_bias[user] += delta_bu
        m.item_bias[item] += delta_bi
        if delta_pu is not None:
            m.user_factors[user] += delta_pu
        if delta_qi is not None:
            m.item_factors[item] += delta_qi
        return objective(m, user, item, rating, lam)

    k = model.k
    numeric = np.empty(2 * k + 2)
    numeric[0] = (perturbed(delta_bu=epsilon) - perturbed(delta_bu=-epsilon)) / (2 * epsilon)
    numeric[1] = (perturbed(delta_bi=epsilon) - perturbed(delta_bi=-epsilon)) / (2 * epsilon)
    for f in range(k):
        e = np.zeros(k)
        e[f] = epsilon
        numeric[2 + f] = (perturbed(delta_pu=e) - perturbed(delta_pu=-e)) / (2 * epsilon)
        numeric[2 + k + f] = (perturbed(delta_qi=e) - perturbed(delta_qi=-e)) / (2 * epsilon)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-10)
    return float(np.max(np.abs(analytic - numeric) / denom))


def save_model(model: FactorModel, path: str) -> None:
    """Write the model as an .npz archive (see README for the layout)."""
    np.savez(path,
             format_version=np.int64(MODEL_FORMAT_VERSION),
             global_mean=np.float64(model.global_mean),
             user_bias=model.user_bias,
             item_bias=model.item_bias,
             user_factors=model.user_factors,
             item_factors=model.item_factors)


def load_model(path: str) -> FactorModel:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        return FactorModel(float(data["global_mean"]), data["user_bias"],
                           data["item_bias"], data["user_factors"],
                           data["item_factors"])
