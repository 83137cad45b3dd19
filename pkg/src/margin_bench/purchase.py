"""Consumer purchase models over a recommendation list.

Two stylized behaviors:

* ``guaranteed``      : the user buys exactly one item chosen uniformly from
  the list, so expected profit is the list's mean profit.
* ``relevance-decay`` : the user considers one uniformly chosen item and buys
  it with probability exp(-lambda * (r_max - predicted rating)), which decays
  as predicted relevance falls and permits a zero-purchase outcome.
"""

from dataclasses import dataclass

import numpy as np

from .factor import RankedList
from .profitgen import ProfitTable

GUARANTEED = "guaranteed"
RELEVANCE_DECAY = "relevance-decay"


@dataclass(frozen=True)
class PurchaseModel:
    kind: str = GUARANTEED
    lam: float = 1.0
    r_max: float = 5.0

    def __post_init__(self):
        if self.kind not in (GUARANTEED, RELEVANCE_DECAY):
            raise ValueError(f"unknown purchase model kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


def purchase_probability(pred_rating, pm: PurchaseModel):
    """exp(-lambda * (r_max - pred_rating)); accepts scalars or arrays."""
    if pm.kind != RELEVANCE_DECAY:
        raise ValueError("purchase_probability is defined for the relevance-decay model")
    pred = np.asarray(pred_rating, dtype=np.float64)
    if np.any(pred > pm.r_max):
        raise ValueError(f"predicted rating above r_max={pm.r_max}")
    p = np.exp(-pm.lam * (pm.r_max - pred))
    return float(p) if np.isscalar(pred_rating) else p


def expected_profit(ranked: RankedList, profits: ProfitTable, pm: PurchaseModel) -> float:
    """Expected dollars from one user under the given purchase model."""
    if len(ranked) == 0:
        if pm.kind == GUARANTEED:
            raise ValueError("guaranteed purchase needs a non-empty list")
        return 0.0
    item_profit = profits.profit[ranked.items]
    if pm.kind == GUARANTEED:
        return float(item_profit.mean())
    p = purchase_probability(ranked.preds, pm)
    return float((p * item_profit).mean())
