"""Accuracy/profit metrics, threshold sweeps and the tradeoff curve.

Every test user is scored once; candidate orderings are computed once per
user and reused across every grid threshold, with the per-threshold list
selection delegated to the kernels in ``_kernels``.  Per-user work is
independent, so results are identical however the users are chunked.

Metric conventions: profit averages run over every test user with a
non-empty candidate list; precision@n uses held-out items with true rating
>= 4.0 as relevant, excludes users with no relevant test item, and divides
by the configured n even when a list is shorter.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .dataio import Split
from .errors import DataError
from .factor import FactorModel, CLAMP_MIN, CLAMP_MAX
from .profitgen import ProfitTable
from .purchase import RELEVANCE_DECAY, PurchaseModel
from .rerank import STRATEGIES, RerankConfig

RELEVANCE_RATING = 4.0

SWEEP_CSV_HEADER = ("threshold,avg_profit_guaranteed,avg_profit_relevance,"
                    "precision_at_n,accuracy_loss_pct,profit_gain_pct")

_CHUNK = 512


@dataclass(frozen=True)
class EvalPoint:
    threshold: float
    avg_profit_guaranteed: float
    avg_profit_relevance: float
    precision_at_n: float
    accuracy_loss_pct: float
    profit_gain_pct: float


@dataclass(frozen=True)
class SweepResult:
    baseline: EvalPoint
    points: tuple
    fingerprint: str = ""


def precision_at_n(list_items, relevant_items, n: int) -> Optional[float]:
    """|list ∩ relevant| / n; None when the user has no relevant test items."""
    relevant = set(int(i) for i in relevant_items)
    if not relevant:
        return None
    hits = sum(1 for i in list_items if int(i) in relevant)
    return hits / n


def _user_csr(iset, rating_min=None):
    """(indptr, item_idx) over all mapped users, optionally rating-filtered."""
    indptr, items, ratings = iset.items_by_user()
    if rating_min is None:
        return indptr, items
    keep = ratings >= rating_min
    user_of_row = np.repeat(np.arange(iset.n_users), np.diff(indptr))
    counts = np.bincount(user_of_row[keep], minlength=iset.n_users)
    new_indptr = np.zeros(iset.n_users + 1, dtype=np.int64)
    np.cumsum(counts, out=new_indptr[1:])
    return new_indptr, items[keep]


class _EngineResult:
    """Per-(test user, column) metric arrays produced by the sweep engine."""

    def __init__(self, thresholds, guaranteed, relevance, hits, counts,
                 has_relevant, n):
        self.thresholds = thresholds
        self.guaranteed = guaranteed
        self.relevance = relevance
        self.hits = hits
        self.counts = counts
        self.has_relevant = has_relevant
        self.n = n

    def column(self, col: int):
        valid = self.counts[:, col] > 0
        avg_g = float(self.guaranteed[valid, col].mean())
        avg_r = float(self.relevance[valid, col].mean())
        prec_mask = valid & self.has_relevant
        prec = (float((self.hits[prec_mask, col] / self.n).mean())
                if prec_mask.any() else float("nan"))
        return avg_g, avg_r, prec


def _margin_select(cand_items, preds, pred_order, item_profit, decay, n):
    score = np.exp(-decay.lam * (decay.r_max - preds)) * item_profit
    order = pred_order[np.argsort(-score[pred_order], kind="stable")][:n]
    return cand_items[order]


def _run_engine(model: FactorModel, profits: ProfitTable, split: Split,
                thresholds, n: int, decay: PurchaseModel,
                want_margin: bool = False):
    """Score, rank and select lists for every test user.

    Returns (profit_result, margin_result_or_None); column 0 of the profit
    result is the baseline (threshold = +inf), columns 1.. follow
    ``thresholds``.
    """
    if decay.kind != RELEVANCE_DECAY:
        raise ValueError("the sweep engine needs a relevance-decay purchase model")
    test_users = np.unique(split.test.user_idx)
    all_thr = np.concatenate([[np.inf], np.asarray(thresholds, dtype=np.float64)])
    n_cols = len(all_thr)
    n_test = len(test_users)

    train_indptr, train_items = _user_csr(split.train)
    rel_indptr, rel_items = _user_csr(split.test, rating_min=RELEVANCE_RATING)

    guaranteed = np.zeros((n_test, n_cols))
    relevance = np.zeros((n_test, n_cols))
    hits = np.zeros((n_test, n_cols))
    counts = np.zeros((n_test, n_cols), dtype=np.int64)
    has_relevant = np.zeros(n_test, dtype=bool)
    m_guaranteed = np.zeros((n_test, 1)) if want_margin else None
    m_relevance = np.zeros((n_test, 1)) if want_margin else None
    m_hits = np.zeros((n_test, 1)) if want_margin else None
    m_counts = np.zeros((n_test, 1), dtype=np.int64) if want_margin else None

    n_items = model.n_items
    profit_vec = profits.profit
    if len(profit_vec) != n_items:
        raise DataError(f"profit table covers {len(profit_vec)} items, model has {n_items}")

    for start in range(0, n_test, _CHUNK):
        chunk = test_users[start:start + _CHUNK]
        u_count = len(chunk)
        scores = model.user_factors[chunk] @ model.item_factors.T
        scores += (model.global_mean + model.user_bias[chunk][:, None]
                   + model.item_bias[None, :])
        np.clip(scores, CLAMP_MIN, CLAMP_MAX, out=scores)

        cand_pred_parts = []
        cand_item_parts = []
        pred_order_parts = []
        profit_order_parts = []
        offsets = np.zeros(u_count + 1, dtype=np.int64)
        margin_sel = np.full((u_count, 1, n), -1, dtype=np.int32) if want_margin else None
        relevant_mask = np.zeros((u_count, n_items), dtype=bool)

        for lu, u in enumerate(chunk):
            seen = train_items[train_indptr[u]:train_indptr[u + 1]]
            cand_mask = np.ones(n_items, dtype=bool)
            cand_mask[seen] = False
            cand_items = np.nonzero(cand_mask)[0].astype(np.int32)
            preds = scores[lu, cand_items]
            pred_order = np.argsort(-preds, kind="stable").astype(np.int32)
            item_profit = profit_vec[cand_items]
            profit_order = pred_order[
                np.argsort(-item_profit[pred_order], kind="stable")].astype(np.int32)

            cand_pred_parts.append(preds)
            cand_item_parts.append(cand_items)
            pred_order_parts.append(pred_order)
            profit_order_parts.append(profit_order)
            offsets[lu + 1] = offsets[lu] + len(cand_items)

            rel = rel_items[rel_indptr[u]:rel_indptr[u + 1]]
            relevant_mask[lu, rel] = True
            has_relevant[start + lu] = len(rel) > 0

            if want_margin and len(cand_items):
                sel = _margin_select(cand_items, preds, pred_order,
                                     item_profit, decay, n)
                margin_sel[lu, 0, :len(sel)] = sel

        cand_pred = np.concatenate(cand_pred_parts) if cand_pred_parts else np.empty(0)
        cand_item = np.concatenate(cand_item_parts) if cand_item_parts else np.empty(0, np.int32)
        pred_order = np.concatenate(pred_order_parts) if pred_order_parts else np.empty(0, np.int32)
        profit_order = np.concatenate(profit_order_parts) if profit_order_parts else np.empty(0, np.int32)

        out_sel = np.full((u_count, n_cols, n), -1, dtype=np.int32)
        _kernels.select_profit_lists(cand_pred, cand_item, offsets, pred_order,
                                     profit_order, all_thr, n, out_sel)

        sl = slice(start, start + u_count)
        _accumulate(out_sel, scores, profit_vec, relevant_mask, decay,
                    guaranteed[sl], relevance[sl], hits[sl], counts[sl])
        if want_margin:
            _accumulate(margin_sel, scores, profit_vec, relevant_mask, decay,
                        m_guaranteed[sl], m_relevance[sl], m_hits[sl], m_counts[sl])

    profit_result = _EngineResult(all_thr, guaranteed, relevance, hits,
                                  counts, has_relevant, n)
    margin_result = None
    if want_margin:
        margin_result = _EngineResult(np.array([-np.inf]), m_guaranteed,
                                      m_relevance, m_hits, m_counts,
                                      has_relevant, n)
    return profit_result, margin_result


def _accumulate(sel, scores, profit_vec, relevant_mask, decay,
                out_g, out_r, out_hits, out_counts):
    """Turn selected item ids into per-(user, column) metric values."""
    mask = sel >= 0
    safe = np.where(mask, sel, 0)
    u_count = sel.shape[0]
    rows = np.arange(u_count)[:, None, None]
    prof = np.where(mask, profit_vec[safe], 0.0)
    preds = np.where(mask, scores[rows, safe], 0.0)
    p_buy = np.where(mask, np.exp(-decay.lam * (decay.r_max - preds)), 0.0)
    counts = mask.sum(axis=-1)
    np.copyto(out_counts, counts)
    with np.errstate(invalid="ignore"):
        np.copyto(out_g, np.where(counts > 0, prof.sum(axis=-1) / np.maximum(counts, 1), 0.0))
        np.copyto(out_r, np.where(counts > 0, (p_buy * prof).sum(axis=-1) / np.maximum(counts, 1), 0.0))
    np.copyto(out_hits, np.where(mask, relevant_mask[rows, safe], False).sum(axis=-1))


def _point(threshold, stats, base_g, base_prec) -> EvalPoint:
    avg_g, avg_r, prec = stats
    gain = np.nan if base_g == 0 else (avg_g - base_g) / base_g * 100.0
    loss = np.nan if base_prec == 0 else (base_prec - prec) / base_prec * 100.0
    return EvalPoint(threshold=float(threshold), avg_profit_guaranteed=avg_g,
                     avg_profit_relevance=avg_r, precision_at_n=prec,
                     accuracy_loss_pct=float(loss), profit_gain_pct=float(gain))


def sweep_thresholds(model: FactorModel, profits: ProfitTable, split: Split,
                     grid, n: int, decay: PurchaseModel,
                     fingerprint: str = "") -> SweepResult:
    """One EvalPoint per grid threshold plus the baseline sentinel row."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("threshold grid must be non-empty")
    grid = grid[np.argsort(-grid, kind="stable")]
    result, _ = _run_engine(model, profits, split, grid, n, decay)
    base_g, base_r, base_prec = result.column(0)
    base = EvalPoint(float("inf"), base_g, base_r, base_prec, 0.0, 0.0)
    points = tuple(
        _point(grid[c - 1], result.column(c), base_g, base_prec)
        for c in range(1, len(result.thresholds)))
    return SweepResult(baseline=base, points=points, fingerprint=fingerprint)


def evaluate_config(model: FactorModel, profits: ProfitTable, split: Split,
                    strategy: str, cfg: RerankConfig,
                    decay: PurchaseModel) -> EvalPoint:
    """Evaluate one strategy; percentages are relative to the baseline
    strategy run with identical inputs."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    cfg.validate()
    if strategy == "profit-rerank":
        result, _ = _run_engine(model, profits, split, [cfg.threshold], cfg.n, decay)
        base_g, _, base_prec = result.column(0)
        return _point(cfg.threshold, result.column(1), base_g, base_prec)
    if strategy == "expected-margin":
        result, margin = _run_engine(model, profits, split, [], cfg.n, decay,
                                     want_margin=True)
        base_g, _, base_prec = result.column(0)
        return _point(-np.inf, margin.column(0), base_g, base_prec)
    result, _ = _run_engine(model, profits, split, [], cfg.n, decay)
    avg_g, avg_r, prec = result.column(0)
    return EvalPoint(float("inf"), avg_g, avg_r, prec, 0.0, 0.0)


def find_optimal_threshold(sweep: SweepResult, objective: str):
    """(threshold, dollars) maximizing the chosen profit column over the grid
    points; ties resolve toward the higher threshold."""
    if objective not in ("guaranteed", "relevance"):
        raise ValueError(f"objective must be 'guaranteed' or 'relevance', got {objective!r}")
    if not sweep.points:
        raise ValueError("sweep has no grid points")
    attr = ("avg_profit_guaranteed" if objective == "guaranteed"
            else "avg_profit_relevance")
    pts = sorted(sweep.points, key=lambda p: -p.threshold)
    best = max(pts, key=lambda p: getattr(p, attr))  # max keeps the first tie
    return best.threshold, getattr(best, attr)


def write_sweep_csv(sweep: SweepResult, path: str) -> None:
    """Documented schema: header, baseline row first (threshold 'inf'),
    then grid rows in threshold-descending order, floats at 6 decimals."""
    rows = [sweep.baseline] + sorted(sweep.points, key=lambda p: -p.threshold)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SWEEP_CSV_HEADER + "\n")
        for p in rows:
            fh.write(f"{p.threshold:.6f},{p.avg_profit_guaranteed:.6f},"
                     f"{p.avg_profit_relevance:.6f},{p.precision_at_n:.6f},"
                     f"{p.accuracy_loss_pct:.6f},{p.profit_gain_pct:.6f}\n")


def read_sweep_csv(path: str) -> SweepResult:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        header = fh.readline().strip()
        if header != SWEEP_CSV_HEADER:
            raise DataError(f"{path}:1: unexpected sweep CSV header")
        rows = []
        for lineno, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise DataError(f"{path}:{lineno}: expected 6 fields")
            try:
                rows.append(EvalPoint(*(float(x) for x in parts)))
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed float") from None
    if not rows or rows[0].threshold != float("inf"):
        raise DataError(f"{path}: first row must be the baseline (threshold inf)")
    return SweepResult(baseline=rows[0], points=tuple(rows[1:]))
