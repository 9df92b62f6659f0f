"""Gradient-boosted regression trees for squared and logistic loss.

Stagewise boosting with shallow CART-style trees. Each stage fits a tree to
the negative gradient of the loss on a row subsample and takes a damped
Newton step per leaf (for squared loss the Newton step is the residual mean,
so this reduces to classic least-squares boosting). Split search maximizes
the usual gain G_L^2/H_L + G_R^2/H_R - G^2/H over midpoint thresholds.

Binary 0/1 columns get a vectorized one-threshold fast path; other columns
fall back to a sort-and-scan over unique values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GBTModel", "fit_gbt_core"]

_EPS_HESS = 1e-12


@dataclass(frozen=True)
class _Leaf:
    value: float


@dataclass(frozen=True)
class _Split:
    feature: int
    threshold: float
    left: "_Leaf | _Split"
    right: "_Leaf | _Split"


def _leaf_value(g_sum: float, h_sum: float) -> float:
    if h_sum <= _EPS_HESS:
        return 0.0
    return g_sum / h_sum


def _best_split_binary(Xn, g, h, binary_cols):
    """Vectorized gain over all binary columns at the single threshold 0.5."""
    mask = Xn[:, binary_cols] > 0.5
    GR = g @ mask
    HR = h @ mask
    G, H = g.sum(), h.sum()
    GL, HL = G - GR, H - HR
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(
            (HL > _EPS_HESS) & (HR > _EPS_HESS),
            GL * GL / np.maximum(HL, _EPS_HESS) + GR * GR / np.maximum(HR, _EPS_HESS),
            -np.inf,
        )
    # also require both sides non-empty by sample count
    counts_r = mask.sum(axis=0)
    gain = np.where((counts_r > 0) & (counts_r < Xn.shape[0]), gain, -np.inf)
    if not np.isfinite(gain).any():
        return None
    j = int(np.argmax(gain))
    return float(gain[j]), int(binary_cols[j]), 0.5


def _best_split_scan(col, g, h):
    """Best threshold for one general column via sorted prefix scans."""
    order = np.argsort(col, kind="stable")
    cs = col[order]
    gs = np.cumsum(g[order])
    hs = np.cumsum(h[order])
    # candidate boundaries are positions where the value changes
    change = np.flatnonzero(cs[1:] != cs[:-1])
    if change.size == 0:
        return None
    GL, HL = gs[change], hs[change]
    G, H = gs[-1], hs[-1]
    GR, HR = G - GL, H - HL
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(
            (HL > _EPS_HESS) & (HR > _EPS_HESS),
            GL * GL / np.maximum(HL, _EPS_HESS) + GR * GR / np.maximum(HR, _EPS_HESS),
            -np.inf,
        )
    best = int(np.argmax(gain))
    if not np.isfinite(gain[best]):
        return None
    pos = change[best]
    thr = 0.5 * (cs[pos] + cs[pos + 1])
    return float(gain[best]), thr


def _grow(Xn, g, h, depth, max_depth, min_leaf, binary_mask):
    G, H = float(g.sum()), float(h.sum())
    if depth >= max_depth or Xn.shape[0] < 2 * min_leaf:
        return _Leaf(_leaf_value(G, H))

    base = G * G / H if H > _EPS_HESS else 0.0
    best_gain, best_j, best_thr = -np.inf, -1, 0.0

    binary_cols = np.flatnonzero(binary_mask)
    if binary_cols.size:
        found = _best_split_binary(Xn, g, h, binary_cols)
        if found is not None:
            best_gain, best_j, best_thr = found

    for j in np.flatnonzero(~binary_mask):
        found = _best_split_scan(Xn[:, j], g, h)
        if found is not None and found[0] > best_gain:
            best_gain, best_j, best_thr = found[0], j, found[1]

    if best_j < 0 or best_gain - base <= 1e-12:
        return _Leaf(_leaf_value(G, H))

    go_right = Xn[:, best_j] > best_thr
    n_right = int(go_right.sum())
    if n_right < min_leaf or Xn.shape[0] - n_right < min_leaf:
        return _Leaf(_leaf_value(G, H))
    left = _grow(Xn[~go_right], g[~go_right], h[~go_right], depth + 1, max_depth, min_leaf, binary_mask)
    right = _grow(Xn[go_right], g[go_right], h[go_right], depth + 1, max_depth, min_leaf, binary_mask)
    return _Split(best_j, best_thr, left, right)


def _tree_predict(node, X, out, rows):
    if isinstance(node, _Leaf):
        out[rows] = node.value
        return
    go_right = X[rows, node.feature] > node.threshold
    _tree_predict(node.left, X, out, rows[~go_right])
    _tree_predict(node.right, X, out, rows[go_right])


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class GBTModel:
    """Fitted boosted ensemble; prediction is ``init + lr * sum(tree(x))``."""

    trees: tuple
    init: float
    learning_rate: float
    classification: bool
    diagnostics: dict = field(default_factory=dict)

    def raw(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        score = np.full(X.shape[0], self.init)
        if not self.trees:
            return score
        rows = np.arange(X.shape[0])
        buf = np.empty(X.shape[0])
        for tree in self.trees:
            _tree_predict(tree, X, buf, rows)
            score += self.learning_rate * buf
        return score

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.raw(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.raw(X))


def fit_gbt_core(
    X: np.ndarray,
    y: np.ndarray,
    classification: bool,
    depth: int = 2,
    n_trees: int = 100,
    learning_rate: float = 0.1,
    subsample: float = 0.7,
    seed: int = 0,
    min_samples_leaf: int = 1,
) -> GBTModel:
    """Fit a boosted tree ensemble; deterministic given ``seed``.

    Training stops early once the full-sample gradient vanishes (constant
    targets fit exactly). The per-stage training loss on the full sample is
    recorded in ``diagnostics['train_loss']``.
    """
    if depth < 1:
        raise ValueError(f"tree depth must be >= 1, got {depth}")
    if n_trees < 1:
        raise ValueError(f"need at least one boosting stage, got {n_trees}")
    if not 0.0 < subsample <= 1.0:
        raise ValueError(f"subsample must be in (0, 1], got {subsample}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot fit on an empty sample")

    binary_mask = np.array([np.isin(X[:, j], (0.0, 1.0)).all() for j in range(X.shape[1])])

    if classification:
        p_bar = min(max(y.mean(), 1e-12), 1.0 - 1e-12)
        init = float(np.log(p_bar / (1.0 - p_bar)))
    else:
        init = float(y.mean())

    rng = np.random.default_rng(seed)
    score = np.full(n, init)
    trees: list = []
    losses: list[float] = []
    m_sub = max(1, int(round(subsample * n)))
    rows_all = np.arange(n)
    buf = np.empty(n)

    for _ in range(n_trees):
        if classification:
            p = _sigmoid(score)
            g_full = y - p
            h_full = p * (1.0 - p)
            losses.append(float(np.logaddexp(0.0, -(2.0 * y - 1.0) * score).mean()))
        else:
            g_full = y - score
            h_full = np.ones(n)
            losses.append(float(np.mean(g_full * g_full)))
        if np.abs(g_full).max() < 1e-12:
            break

        if m_sub < n:
            take = rng.choice(n, size=m_sub, replace=False)
        else:
            take = rows_all
        tree = _grow(X[take], g_full[take], h_full[take], 0, depth, min_samples_leaf, binary_mask)
        trees.append(tree)
        _tree_predict(tree, X, buf, rows_all)
        score += learning_rate * buf
    else:
        if classification:
            losses.append(float(np.logaddexp(0.0, -(2.0 * y - 1.0) * score).mean()))
        else:
            losses.append(float(np.mean((y - score) ** 2)))

    return GBTModel(
        trees=tuple(trees),
        init=init,
        learning_rate=learning_rate,
        classification=classification,
        diagnostics={
            "train_loss": tuple(losses),
            "subsample": subsample,
            "n_trees_fit": len(trees),
            "depth": depth,
            "learning_rate": learning_rate,
        },
    )
