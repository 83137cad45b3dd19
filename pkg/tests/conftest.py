import os

import numpy as np
import pytest

from margin_bench import dataio, factor, profitgen, purchase, synth

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
MINI_CSV = os.path.join(DATA_DIR, "mini_ratings.csv")

# Real MovieLens 1M takes precedence over the bundled stand-in when present.
ML1M_ENV = "MARGIN_BENCH_ML1M"


@pytest.fixture(scope="session")
def mini_csv_path():
    return MINI_CSV


@pytest.fixture(scope="session")
def mini_set():
    return dataio.load_ratings(MINI_CSV, "csv")


@pytest.fixture(scope="session")
def ml1m_scale_set(tmp_path_factory):
    """ML-1M-scale ratings: the real dataset if MARGIN_BENCH_ML1M points at
    its ratings.dat, otherwise the bundled synthetic stand-in written to and
    re-read from disk so the loader is exercised at scale."""
    real = os.environ.get(ML1M_ENV, "")
    if real:
        return dataio.load_ratings(real, "movielens-1m")
    path = tmp_path_factory.mktemp("ml1m_standin") / "ratings.dat"
    synth.write_ml1m(synth.movielens_like(), str(path))
    return dataio.load_ratings(str(path), "movielens-1m")


@pytest.fixture(scope="session")
def ml1m_pipeline(ml1m_scale_set):
    """One full train + profit assignment at the default experiment config."""
    split = dataio.split_holdout(ml1m_scale_set, 0.2, seed=42)
    model = factor.train(split.train, factor.Hyperparams(seed=7))
    profits = profitgen.assign_profits(ml1m_scale_set.n_items,
                                       profitgen.ProfitConfig(seed=21))
    decay = purchase.PurchaseModel(kind="relevance-decay", lam=1.0, r_max=5.0)
    return split, model, profits, decay


def make_set(triples, n_users=None, n_items=None):
    """InteractionSet from (user, item, rating) triples with 1-based ids;
    optionally pad the id maps to fixed sizes."""
    users = [t[0] for t in triples]
    items = [t[1] for t in triples]
    ratings = [t[2] for t in triples]
    user_ids = np.arange(1, (n_users or max(users)) + 1)
    item_ids = np.arange(1, (n_items or max(items)) + 1)
    return dataio.InteractionSet(users, items, ratings,
                                 user_ids=user_ids, item_ids=item_ids)
