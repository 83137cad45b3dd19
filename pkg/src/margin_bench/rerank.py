"""Profit-oriented list construction strategies.

``rerank_by_profit`` implements thresholded greedy profit re-ranking: among
candidates whose predicted rating passes the threshold it takes the most
profitable ones first, then falls back to prediction order to keep the list
full.  ``rank_by_expected_margin`` scores each candidate by purchase
probability times profit.

Tie-breaking is total everywhere so outputs are reproducible:
profit selection breaks ties by higher prediction then lower item index;
margin and prediction orderings break ties by lower item index.
"""

from dataclasses import dataclass

import numpy as np

from .factor import RankedList
from .profitgen import ProfitTable
from .purchase import GUARANTEED, PurchaseModel, purchase_probability

STRATEGIES = ("baseline", "profit-rerank", "expected-margin")


@dataclass(frozen=True)
class RerankConfig:
    threshold: float = -np.inf
    n: int = 10

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"list length n must be >= 1, got {self.n}")


def _gather_profits(ranked: RankedList, profits: ProfitTable) -> np.ndarray:
    if len(ranked) and ranked.items.max() >= len(profits):
        missing = int(ranked.items[ranked.items >= len(profits)][0])
        raise KeyError(f"item index {missing} missing from the profit table")
    return profits.profit[ranked.items]


def topn_baseline(ranked: RankedList, n: int) -> RankedList:
    """First min(n, len) entries of the prediction-ordered list."""
    if n < 1:
        raise ValueError(f"list length n must be >= 1, got {n}")
    return RankedList(ranked.user, ranked.items[:n], ranked.preds[:n])


def rerank_by_profit(ranked: RankedList, profits: ProfitTable,
                     cfg: RerankConfig) -> RankedList:
    """Thresholded greedy profit re-ranking of one candidate list.

    Output: profit-selected items in profit-descending order, then (only if
    fewer than n candidates pass the threshold) fill items in prediction
    order.  Output length is always min(n, len(ranked)).
    """
    cfg.validate()
    item_profit = _gather_profits(ranked, profits)
    m = len(ranked)
    kmax = min(cfg.n, m)

    # ranked is already (pred desc, idx asc); a stable sort on -profit on top
    # of it yields (profit desc, pred desc, idx asc).
    profit_order = np.argsort(-item_profit, kind="stable")
    feasible = np.nonzero(ranked.preds[profit_order] >= cfg.threshold)[0][:cfg.n]
    sel = profit_order[feasible]
    if sel.size < kmax:
        taken = np.zeros(m, dtype=bool)
        taken[sel] = True
        fill = np.nonzero(~taken)[0][:kmax - sel.size]
        sel = np.concatenate([sel, fill])
    return RankedList(ranked.user, ranked.items[sel], ranked.preds[sel])


def rank_by_expected_margin(ranked: RankedList, profits: ProfitTable,
                            pm: PurchaseModel, n: int) -> RankedList:
    """Top-n by purchase probability x profit (ties: pred desc, idx asc)."""
    if n < 1:
        raise ValueError(f"list length n must be >= 1, got {n}")
    item_profit = _gather_profits(ranked, profits)
    if pm.kind == GUARANTEED:
        score = item_profit
    else:
        score = purchase_probability(ranked.preds, pm) * item_profit
    order = np.argsort(-score, kind="stable")[:n]
    return RankedList(ranked.user, ranked.items[order], ranked.preds[order])
