"""Hot numeric kernels with optional numba acceleration.

The two inner loops that dominate runtime on MovieLens-1M-scale inputs live
here: the per-sample SGD epoch and the per-user threshold-sweep list
selection.  Each kernel has a pure numpy/Python twin so the package works
without a JIT.  Selection is controlled by the ``MARGIN_BENCH_JIT`` env var
(unset or "1" = use numba when importable, "0"/"false"/"off" = plain numpy).

Both paths of ``sgd_epoch`` execute the same function body, so trained
models are bit-identical across paths.  The selection kernels return
integer item ids, so they agree exactly as well; ``benchmarks/kernel_bench.py``
times the two paths against each other.
"""

import os

import numpy as np


def _jit_requested() -> bool:
    flag = os.environ.get("MARGIN_BENCH_JIT", "1").strip().lower()
    return flag not in ("0", "false", "off")


if _jit_requested():
    try:
        from numba import njit, prange

        JIT_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        prange = range
        JIT_ENABLED = False
else:
    prange = range
    JIT_ENABLED = False


def _sgd_epoch_py(user_idx, item_idx, ratings, order, mu, user_bias, item_bias,
                  user_factors, item_factors, lr, reg):
    """One SGD pass over ``order``; updates parameters in place, returns SSE.

    The factor dot product is an explicit loop (not np.dot) so the jitted
    and plain-Python paths perform identical float64 operations.
    """
    k = user_factors.shape[1]
    sse = 0.0
    for t in range(order.shape[0]):
        j = order[t]
        u = user_idx[j]
        i = item_idx[j]
        dot = 0.0
        for f in range(k):
            dot += user_factors[u, f] * item_factors[i, f]
        err = ratings[j] - (mu + user_bias[u] + item_bias[i] + dot)
        sse += err * err
        user_bias[u] += lr * (err - reg * user_bias[u])
        item_bias[i] += lr * (err - reg * item_bias[i])
        for f in range(k):
            pu = user_factors[u, f]
            qi = item_factors[i, f]
            user_factors[u, f] = pu + lr * (err * qi - reg * pu)
            item_factors[i, f] = qi + lr * (err * pu - reg * qi)
    return sse


def _select_profit_walk_py(cand_pred, cand_item, offsets, pred_order,
                           profit_order, thresholds, n, out_sel):
    """Loop form of the thresholded profit selection (jitted in production).

    Candidates are stored as flat per-user segments (``offsets`` CSR style);
    ``pred_order``/``profit_order`` hold segment-relative permutations.  For
    each user and threshold: take the first n profit-ordered candidates whose
    prediction passes the threshold, then fill remaining slots from the
    prediction order.  Writes global item ids into ``out_sel`` (-1 padded).
    """
    n_users = offsets.shape[0] - 1
    for u in prange(n_users):
        lo = offsets[u]
        hi = offsets[u + 1]
        m = hi - lo
        if m == 0:
            continue
        kmax = min(n, m)
        stamp = np.full(m, -1, np.int64)
        for t in range(thresholds.shape[0]):
            thr = thresholds[t]
            cnt = 0
            for a in range(m):
                pos = profit_order[lo + a]
                if cand_pred[lo + pos] >= thr:
                    out_sel[u, t, cnt] = cand_item[lo + pos]
                    stamp[pos] = t
                    cnt += 1
                    if cnt == n:
                        break
            if cnt < kmax:
                for a in range(m):
                    pos = pred_order[lo + a]
                    if stamp[pos] != t:
                        out_sel[u, t, cnt] = cand_item[lo + pos]
                        cnt += 1
                        if cnt == kmax:
                            break


def _select_profit_lists_numpy(cand_pred, cand_item, offsets, pred_order,
                               profit_order, thresholds, n, out_sel):
    """Vectorized numpy twin of ``_select_profit_walk_py``."""
    n_users = offsets.shape[0] - 1
    for u in range(n_users):
        lo = int(offsets[u])
        hi = int(offsets[u + 1])
        m = hi - lo
        if m == 0:
            continue
        kmax = min(n, m)
        po = profit_order[lo:hi]
        qo = pred_order[lo:hi]
        pred_seg = cand_pred[lo:hi]
        item_seg = cand_item[lo:hi]
        pred_po = pred_seg[po]
        for ti in range(thresholds.shape[0]):
            feas = np.nonzero(pred_po >= thresholds[ti])[0][:n]
            sel = po[feas]
            if sel.size < kmax:
                taken = np.zeros(m, dtype=bool)
                taken[sel] = True
                fill = qo[~taken[qo]][:kmax - sel.size]
                sel = np.concatenate([sel, fill])
            out_sel[u, ti, :sel.size] = item_seg[sel]


if JIT_ENABLED:
    sgd_epoch = njit(cache=True)(_sgd_epoch_py)
    select_profit_lists = njit(parallel=True, cache=True)(_select_profit_walk_py)
else:
    sgd_epoch = _sgd_epoch_py
    select_profit_lists = _select_profit_lists_numpy


def set_thread_cap(n_threads: int) -> None:
    """Cap the JIT thread pool (0 = automatic). No-op on the numpy path."""
    if n_threads > 0 and JIT_ENABLED:
        import numba

        numba.set_num_threads(min(n_threads, numba.get_num_threads()))
