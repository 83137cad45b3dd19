"""Rating data ingestion and deterministic train/test splitting.

Supported input formats:

* ``movielens-1m``  : ``UserID::MovieID::Rating::Timestamp``
* ``movielens-100k``: tab-separated ``user item rating timestamp``
* ``csv``           : header ``user,item,rating[,timestamp]``, comma-separated

Raw ids are remapped to contiguous 0-based indices at load time; everything
downstream works on indices.  A ``Split`` shares the parent's index maps so
train and test stay aligned.
"""

from typing import NamedTuple

import numpy as np

from .errors import DataError

RATING_MIN = 1.0
RATING_MAX = 5.0

FORMATS = ("movielens-1m", "movielens-100k", "csv")
_SEPARATORS = {"movielens-1m": "::", "movielens-100k": "\t", "csv": ","}


class Interaction(NamedTuple):
    user_id: int
    item_id: int
    rating: float
    timestamp: int = 0


class InteractionSet:
    """Immutable collection of rating triples plus raw-id index maps.

    ``user_ids``/``item_ids`` map index -> raw id (sorted ascending);
    ``user_map``/``item_map`` are the inverse dicts.  Subsets created by
    :meth:`subset` inherit the parent maps, so ``n_users``/``n_items`` count
    the map universe, not the rows present in this particular set.
    """

    def __init__(self, user_raw, item_raw, rating, timestamp=None,
                 user_ids=None, item_ids=None):
        self.user_raw = np.asarray(user_raw, dtype=np.int64)
        self.item_raw = np.asarray(item_raw, dtype=np.int64)
        self.rating = np.asarray(rating, dtype=np.float64)
        if timestamp is None:
            timestamp = np.zeros(len(self.user_raw), dtype=np.int64)
        self.timestamp = np.asarray(timestamp, dtype=np.int64)
        if not (len(self.user_raw) == len(self.item_raw)
                == len(self.rating) == len(self.timestamp)):
            raise ValueError("field arrays must have equal length")

        if len(self.user_raw) and (self.user_raw.min() <= 0 or self.item_raw.min() <= 0):
            raise DataError("user and item ids must be strictly positive")
        if len(self.rating):
            lo, hi = self.rating.min(), self.rating.max()
            if lo < RATING_MIN or hi > RATING_MAX:
                raise DataError(
                    f"rating out of range [{RATING_MIN}, {RATING_MAX}]: "
                    f"found values in [{lo}, {hi}]")

        if user_ids is None:
            user_ids = np.unique(self.user_raw)
        if item_ids is None:
            item_ids = np.unique(self.item_raw)
        self.user_ids = np.asarray(user_ids, dtype=np.int64)
        self.item_ids = np.asarray(item_ids, dtype=np.int64)
        self.user_map = {int(r): i for i, r in enumerate(self.user_ids)}
        self.item_map = {int(r): i for i, r in enumerate(self.item_ids)}

        self.user_idx = np.searchsorted(self.user_ids, self.user_raw).astype(np.int32)
        self.item_idx = np.searchsorted(self.item_ids, self.item_raw).astype(np.int32)
        if len(self.user_raw):
            if (self.user_ids[self.user_idx] != self.user_raw).any():
                raise DataError("user id not covered by the provided index map")
            if (self.item_ids[self.item_idx] != self.item_raw).any():
                raise DataError("item id not covered by the provided index map")

        key = self.user_idx.astype(np.int64) * max(len(self.item_ids), 1) \
            + self.item_idx
        uniq, counts = np.unique(key, return_counts=True)
        if (counts > 1).any():
            dup = uniq[counts > 1][0]
            u = self.user_ids[dup // max(len(self.item_ids), 1)]
            i = self.item_ids[dup % max(len(self.item_ids), 1)]
            raise DataError(f"duplicate (user, item) pair: ({u}, {i})")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def __len__(self) -> int:
        return len(self.user_raw)

    def __getitem__(self, j: int) -> Interaction:
        return Interaction(int(self.user_raw[j]), int(self.item_raw[j]),
                           float(self.rating[j]), int(self.timestamp[j]))

    def __iter__(self):
        for j in range(len(self)):
            yield self[j]

    def subset(self, row_index) -> "InteractionSet":
        """Row subset sharing this set's index maps."""
        row_index = np.asarray(row_index)
        return InteractionSet(
            self.user_raw[row_index], self.item_raw[row_index],
            self.rating[row_index], self.timestamp[row_index],
            user_ids=self.user_ids, item_ids=self.item_ids)

    def items_by_user(self):
        """CSR-style (indptr, item_idx) over all mapped users, rows sorted."""
        order = np.lexsort((self.item_idx, self.user_idx))
        sorted_users = self.user_idx[order]
        indptr = np.zeros(self.n_users + 1, dtype=np.int64)
        np.add.at(indptr, sorted_users + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, self.item_idx[order], self.rating[order]


class Split(NamedTuple):
    train: InteractionSet
    test: InteractionSet
    seed: int
    test_fraction: float


def _parse_line(line: str, sep: str, lineno: int, path: str):
    parts = line.split(sep)
    if len(parts) < 3:
        raise DataError(f"{path}:{lineno}: expected at least 3 fields, got {len(parts)}")
    try:
        user = int(parts[0])
        item = int(parts[1])
        rating = float(parts[2])
        ts = int(parts[3]) if len(parts) > 3 and parts[3] != "" else 0
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: malformed field ({exc})") from None
    if user <= 0 or item <= 0:
        raise DataError(f"{path}:{lineno}: ids must be strictly positive")
    if not (RATING_MIN <= rating <= RATING_MAX):
        raise DataError(f"{path}:{lineno}: rating out of range: {rating}")
    return user, item, rating, ts


def load_ratings(path: str, fmt: str = "movielens-1m") -> InteractionSet:
    """Load a ratings file into an :class:`InteractionSet`.

    Duplicate (user, item) pairs, out-of-range ratings and malformed lines
    raise :class:`DataError` with the offending line number.
    """
    if fmt not in FORMATS:
        raise DataError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    sep = _SEPARATORS[fmt]

    users, items, ratings, stamps = [], [], [], []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        first = True
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if fmt == "csv" and first and line.lower().replace(" ", "").startswith("user,item,rating"):
                first = False
                continue
            first = False
            u, i, r, ts = _parse_line(line, sep, lineno, path)
            users.append(u)
            items.append(i)
            ratings.append(r)
            stamps.append(ts)
    return InteractionSet(users, items, ratings, stamps)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_holdout(data: InteractionSet, test_fraction: float, seed: int) -> Split:
    """Per-user stratified holdout split, deterministic given the seed.

    Each user contributes round(test_fraction * count) interactions to the
    test partition; users with a single interaction stay entirely in train.
    """
    if not (0.0 <= test_fraction <= 1.0):
        raise ValueError(f"test_fraction must be in [0, 1], got {test_fraction}")
    rng = np.random.default_rng(seed)
    n = len(data)
    to_test = np.zeros(n, dtype=bool)

    order = np.argsort(data.user_idx, kind="stable")
    sorted_users = data.user_idx[order]
    boundaries = np.nonzero(np.diff(sorted_users))[0] + 1
    groups = np.split(order, boundaries)
    for rows in groups:
        n_u = len(rows)
        if n_u <= 1:
            continue
        k = min(n_u, _round_half_up(test_fraction * n_u))
        if k == 0:
            continue
        picked = rng.permutation(n_u)[:k]
        to_test[rows[picked]] = True

    return Split(train=data.subset(np.nonzero(~to_test)[0]),
                 test=data.subset(np.nonzero(to_test)[0]),
                 seed=seed, test_fraction=test_fraction)
