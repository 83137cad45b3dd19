"""Profit-aware top-N re-ranking experiments on MovieLens-style data."""

__version__ = "0.1.0"

from .dataio import Interaction, InteractionSet, Split, load_ratings, split_holdout
from .factor import (FactorModel, Hyperparams, RankedList, gradient_check,
                     load_model, predict, rank_candidates, save_model, train)
from .profitgen import ProfitConfig, ProfitTable, assign_profits, load_profits, save_profits
from .purchase import PurchaseModel, expected_profit, purchase_probability
from .rerank import RerankConfig, rank_by_expected_margin, rerank_by_profit, topn_baseline
from .evaluate import (EvalPoint, SweepResult, evaluate_config,
                       find_optimal_threshold, precision_at_n, read_sweep_csv,
                       sweep_thresholds, write_sweep_csv)

__all__ = [
    "Interaction", "InteractionSet", "Split", "load_ratings", "split_holdout",
    "FactorModel", "Hyperparams", "RankedList", "train", "predict",
    "rank_candidates", "gradient_check", "save_model", "load_model",
    "ProfitConfig", "ProfitTable", "assign_profits", "save_profits", "load_profits",
    "PurchaseModel", "purchase_probability", "expected_profit",
    "RerankConfig", "topn_baseline", "rerank_by_profit", "rank_by_expected_margin",
    "EvalPoint", "SweepResult", "evaluate_config", "sweep_thresholds",
    "find_optimal_threshold", "precision_at_n", "write_sweep_csv", "read_sweep_csv",
]
