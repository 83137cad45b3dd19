import math

import numpy as np
import pytest

from margin_bench import dataio, evaluate, factor, rerank
from margin_bench.errors import DataError
from margin_bench.evaluate import EvalPoint, SweepResult
from margin_bench.profitgen import ProfitTable
from margin_bench.purchase import PurchaseModel, expected_profit

from conftest import make_set

DECAY = PurchaseModel("relevance-decay", lam=1.0, r_max=5.0)


def small_world(seed=0, n_users=8, n_items=14, per_user=6):
    """Random but deterministic split + hand-buildable model + profits."""
    rng = np.random.default_rng(seed)
    triples = []
    for u in range(1, n_users + 1):
        items = rng.choice(np.arange(1, n_items + 1), per_user, replace=False)
        for i in items:
            triples.append((u, int(i), float(rng.integers(1, 6))))
    data = make_set(triples, n_users=n_users, n_items=n_items)
    split = dataio.split_holdout(data, 0.34, seed=seed)
    model = factor.FactorModel(
        3.4, rng.normal(0, 0.4, n_users), rng.normal(0, 0.4, n_items),
        rng.normal(0, 0.3, (n_users, 2)), rng.normal(0, 0.3, (n_items, 2)))
    profits = ProfitTable(rng.uniform(0, 4, n_items))
    return split, model, profits


def reference_evaluate(model, profits, split, strategy, threshold, n, decay):
    """Independent per-user path built from the public single-list ops."""
    test_users = np.unique(split.test.user_idx)
    g_vals, r_vals, precs = [], [], []
    for u in test_users:
        ranked = factor.rank_candidates(model, int(u), split.train)
        if len(ranked) == 0:
            continue
        if strategy == "baseline":
            lst = rerank.topn_baseline(ranked, n)
        elif strategy == "profit-rerank":
            lst = rerank.rerank_by_profit(ranked, profits,
                                          rerank.RerankConfig(threshold, n))
        else:
            lst = rerank.rank_by_expected_margin(ranked, profits, decay, n)
        g_vals.append(expected_profit(lst, profits, PurchaseModel("guaranteed")))
        r_vals.append(expected_profit(lst, profits, decay))
        mask = split.test.user_idx == u
        relevant = split.test.item_idx[mask][split.test.rating[mask] >= 4.0]
        p = evaluate.precision_at_n(lst.items.tolist(), relevant.tolist(), n)
        if p is not None:
            precs.append(p)
    return (float(np.mean(g_vals)), float(np.mean(r_vals)),
            float(np.mean(precs)))


class TestPrecisionAtN:
    def test_basic(self):
        assert evaluate.precision_at_n([1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
                                       [2, 5, 9, 77], 10) == pytest.approx(0.3)

    def test_no_relevant_excluded(self):
        assert evaluate.precision_at_n([1, 2], [], 10) is None

    def test_perfect_list(self):
        items = list(range(10))
        assert evaluate.precision_at_n(items, items, 10) == 1.0

    def test_short_list_divides_by_n(self):
        assert evaluate.precision_at_n([1, 2], [1, 2], 10) == pytest.approx(0.2)


class TestHandComputedFixture:
    """5-user fixture: every metric recomputed with plain arithmetic."""

    def setup_method(self):
        # 5 users, 6 items; model with k=1 factors chosen for easy hand math
        self.n = 3
        train = [(1, 1, 5.0), (1, 2, 3.0), (2, 2, 4.0), (2, 3, 2.0),
                 (3, 4, 4.0), (4, 5, 3.0), (5, 6, 4.0), (5, 1, 2.0)]
        test = [(1, 3, 4.0), (2, 4, 5.0), (3, 1, 3.0), (4, 6, 4.5), (5, 2, 1.0)]
        all_rows = make_set(train + test, n_users=5, n_items=6)
        tr = make_set(train, n_users=5, n_items=6)
        te = make_set(test, n_users=5, n_items=6)
        self.split = dataio.Split(train=tr, test=te, seed=0, test_fraction=0.0)
        self.model = factor.FactorModel(
            3.0,
            np.array([0.5, 0.0, -0.5, 0.25, 0.0]),
            np.array([0.2, -0.2, 0.4, 0.0, -0.4, 0.1]),
            np.array([[0.5], [1.0], [0.0], [-0.5], [0.25]]),
            np.array([[0.2], [-0.2], [0.0], [0.4], [0.0], [-0.1]]))
        self.profits = ProfitTable(np.array([1.0, 2.0, 0.5, 3.5, 2.5, 3.0]))

    def test_baseline_matches_reference(self):
        point = evaluate.evaluate_config(self.model, self.profits, self.split,
                                         "baseline", rerank.RerankConfig(n=self.n),
                                         DECAY)
        ref = reference_evaluate(self.model, self.profits, self.split,
                                 "baseline", None, self.n, DECAY)
        assert point.avg_profit_guaranteed == pytest.approx(ref[0], abs=1e-12)
        assert point.avg_profit_relevance == pytest.approx(ref[1], abs=1e-12)
        assert point.precision_at_n == pytest.approx(ref[2], abs=1e-12)
        assert point.accuracy_loss_pct == 0.0
        assert point.profit_gain_pct == 0.0

    def test_user1_guaranteed_profit_by_hand(self):
        # user 1 (index 0) rated items 1,2 in train; candidates 3,4,5,6.
        # preds: item3: 3+0.5+0.4+0.5*0 = 3.9 ; item4: 3+0.5+0+0.5*0.4 = 3.7
        # item5: 3+0.5-0.4+0 = 3.1 ; item6: 3+0.5+0.1+0.5*-0.1 = 3.55
        # baseline top-3 : items 3,4,6 -> profits 0.5, 3.5, 3.0 -> mean 7/3
        ranked = factor.rank_candidates(self.model, 0, self.split.train)
        assert ranked.items.tolist() == [2, 3, 5, 4]
        np.testing.assert_allclose(ranked.preds, [3.9, 3.7, 3.55, 3.1], atol=1e-12)
        lst = rerank.topn_baseline(ranked, 3)
        g = expected_profit(lst, self.profits, PurchaseModel("guaranteed"))
        assert g == pytest.approx((0.5 + 3.5 + 3.0) / 3, abs=1e-12)
        # relevance-decay: mean of exp(-(5-pred))*profit
        expect_r = (math.exp(-1.1) * 0.5 + math.exp(-1.3) * 3.5
                    + math.exp(-1.45) * 3.0) / 3
        r = expected_profit(lst, self.profits, DECAY)
        assert r == pytest.approx(expect_r, abs=1e-12)

    def test_profit_rerank_threshold_between(self):
        # T=3.6 for user 1: feasible = items 3 (3.9), 4 (3.7); both selected by
        # profit (3.5 > 0.5 -> item4 first), fill = item 6 (next by prediction)
        ranked = factor.rank_candidates(self.model, 0, self.split.train)
        out = rerank.rerank_by_profit(ranked, self.profits,
                                      rerank.RerankConfig(3.6, 3))
        assert out.items.tolist() == [3, 2, 5]

    def test_sweep_point_equals_config_eval(self):
        sweep = evaluate.sweep_thresholds(self.model, self.profits, self.split,
                                          [4.2, 3.6, 2.0], self.n, DECAY)
        for p in sweep.points:
            single = evaluate.evaluate_config(
                self.model, self.profits, self.split, "profit-rerank",
                rerank.RerankConfig(p.threshold, self.n), DECAY)
            assert single.avg_profit_guaranteed == pytest.approx(
                p.avg_profit_guaranteed, abs=1e-15)
            assert single.avg_profit_relevance == pytest.approx(
                p.avg_profit_relevance, abs=1e-15)
            assert single.precision_at_n == pytest.approx(p.precision_at_n, abs=1e-15)

    def test_engine_matches_reference_path_all_strategies(self):
        for strategy, thr in (("baseline", None), ("profit-rerank", 3.6),
                              ("profit-rerank", -np.inf), ("expected-margin", None)):
            point = evaluate.evaluate_config(
                self.model, self.profits, self.split, strategy,
                rerank.RerankConfig(thr if thr is not None else 2.0, self.n), DECAY)
            ref = reference_evaluate(self.model, self.profits, self.split,
                                     strategy, thr, self.n, DECAY)
            assert point.avg_profit_guaranteed == pytest.approx(ref[0], abs=1e-12), strategy
            assert point.avg_profit_relevance == pytest.approx(ref[1], abs=1e-12), strategy
            assert point.precision_at_n == pytest.approx(ref[2], abs=1e-12), strategy


class TestEvaluateConfig:
    def test_infinite_threshold_equals_baseline(self):
        split, model, profits = small_world(1, n_users=12, n_items=20)
        base = evaluate.evaluate_config(model, profits, split, "baseline",
                                        rerank.RerankConfig(n=4), DECAY)
        assert base.precision_at_n > 0
        point = evaluate.evaluate_config(model, profits, split, "profit-rerank",
                                         rerank.RerankConfig(np.inf, 4), DECAY)
        assert point.avg_profit_guaranteed == pytest.approx(
            base.avg_profit_guaranteed, abs=1e-12)
        assert point.avg_profit_relevance == pytest.approx(
            base.avg_profit_relevance, abs=1e-12)
        assert point.precision_at_n == pytest.approx(base.precision_at_n, abs=1e-12)
        assert abs(point.profit_gain_pct) < 1e-9
        assert abs(point.accuracy_loss_pct) < 1e-9

    def test_engine_matches_reference_random_worlds(self):
        for seed in range(4):
            split, model, profits = small_world(seed, n_users=12, n_items=20)
            for strategy, thr in (("baseline", 0.0), ("profit-rerank", 3.5),
                                  ("expected-margin", 0.0)):
                point = evaluate.evaluate_config(
                    model, profits, split, strategy,
                    rerank.RerankConfig(thr, 5), DECAY)
                ref = reference_evaluate(model, profits, split, strategy, thr, 5, DECAY)
                assert point.avg_profit_guaranteed == pytest.approx(ref[0], abs=1e-12)
                assert point.avg_profit_relevance == pytest.approx(ref[1], abs=1e-12)
                assert point.precision_at_n == pytest.approx(ref[2], abs=1e-12)

    def test_unknown_strategy(self):
        split, model, profits = small_world(2)
        with pytest.raises(ValueError, match="strategy"):
            evaluate.evaluate_config(model, profits, split, "popular",
                                     rerank.RerankConfig(n=3), DECAY)


class TestSweep:
    def test_empty_grid_rejected(self):
        split, model, profits = small_world(3)
        with pytest.raises(ValueError, match="non-empty"):
            evaluate.sweep_thresholds(model, profits, split, [], 3, DECAY)

    def test_deterministic(self):
        split, model, profits = small_world(4)
        grid = [4.0, 3.0, 2.0]
        a = evaluate.sweep_thresholds(model, profits, split, grid, 3, DECAY)
        b = evaluate.sweep_thresholds(model, profits, split, grid, 3, DECAY)
        assert a == b

    def test_points_sorted_descending(self):
        split, model, profits = small_world(5)
        sweep = evaluate.sweep_thresholds(model, profits, split,
                                          [2.0, 4.0, 3.0], 3, DECAY)
        thr = [p.threshold for p in sweep.points]
        assert thr == sorted(thr, reverse=True)
        assert sweep.baseline.threshold == np.inf

    def test_unconstrained_limit_oracle(self):
        # at T = -inf the guaranteed profit equals the mean over users of
        # their n most profitable candidates' average (direct computation)
        split, model, profits = small_world(6, n_users=10, n_items=18)
        n = 4
        sweep = evaluate.sweep_thresholds(model, profits, split, [-np.inf], n, DECAY)
        vals = []
        for u in np.unique(split.test.user_idx):
            ranked = factor.rank_candidates(model, int(u), split.train)
            top = np.sort(profits.profit[ranked.items])[::-1][:n]
            vals.append(top.mean())
        assert sweep.points[0].avg_profit_guaranteed == pytest.approx(
            float(np.mean(vals)), abs=1e-9)

    def test_profit_bounds(self):
        split, model, profits = small_world(7)
        sweep = evaluate.sweep_thresholds(model, profits, split,
                                          np.arange(5.0, 1.9, -0.5), 3, DECAY)
        for p in [sweep.baseline] + list(sweep.points):
            assert 0.0 <= p.avg_profit_relevance <= 4.0
            assert 0.0 <= p.avg_profit_guaranteed <= 4.0
            assert p.avg_profit_relevance <= p.avg_profit_guaranteed + 1e-12


class TestFindOptimalThreshold:
    def _sweep(self, thr_vals, rel_vals):
        base = EvalPoint(np.inf, 2.0, 1.3, 0.1, 0.0, 0.0)
        pts = tuple(EvalPoint(t, 2.5, r, 0.1, 1.0, 25.0)
                    for t, r in zip(thr_vals, rel_vals))
        return SweepResult(baseline=base, points=pts)

    def test_singleton(self):
        sweep = self._sweep([3.0], [1.5])
        assert evaluate.find_optimal_threshold(sweep, "relevance") == (3.0, 1.5)

    def test_unimodal_peak(self):
        sweep = self._sweep([5.0, 4.5, 4.0, 3.5], [1.0, 1.9, 1.4, 1.1])
        assert evaluate.find_optimal_threshold(sweep, "relevance") == (4.5, 1.9)

    def test_tie_resolves_to_higher_threshold(self):
        sweep = self._sweep([4.5, 4.0, 3.5], [1.9, 1.9, 1.0])
        assert evaluate.find_optimal_threshold(sweep, "relevance")[0] == 4.5

    def test_guaranteed_objective(self):
        sweep = self._sweep([4.0, 3.0], [1.0, 2.0])
        thr, val = evaluate.find_optimal_threshold(sweep, "guaranteed")
        assert (thr, val) == (4.0, 2.5)

    def test_bad_objective(self):
        sweep = self._sweep([4.0], [1.0])
        with pytest.raises(ValueError):
            evaluate.find_optimal_threshold(sweep, "revenue")


class TestSweepCsv:
    def test_roundtrip(self, tmp_path):
        split, model, profits = small_world(8)
        sweep = evaluate.sweep_thresholds(model, profits, split,
                                          [4.5, 4.0, 3.0], 3, DECAY)
        path = str(tmp_path / "sweep.csv")
        evaluate.write_sweep_csv(sweep, path)
        lines = open(path).read().splitlines()
        assert lines[0] == evaluate.SWEEP_CSV_HEADER
        assert lines[1].startswith("inf,")
        loaded = evaluate.read_sweep_csv(path)
        assert loaded.baseline.threshold == np.inf
        assert len(loaded.points) == 3
        for orig, got in zip(sweep.points, loaded.points):
            assert got.avg_profit_guaranteed == pytest.approx(
                orig.avg_profit_guaranteed, abs=5e-7)

    def test_malformed_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("nope\n")
        with pytest.raises(DataError, match="header"):
            evaluate.read_sweep_csv(str(p))
        p.write_text(evaluate.SWEEP_CSV_HEADER + "\n1,2,3\n")
        with pytest.raises(DataError, match="6 fields"):
            evaluate.read_sweep_csv(str(p))
        p.write_text(evaluate.SWEEP_CSV_HEADER + "\n4.0,1,1,1,0,0\n")
        with pytest.raises(DataError, match="baseline"):
            evaluate.read_sweep_csv(str(p))
