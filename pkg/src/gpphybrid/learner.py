"""Deterministic gradient-boosted regression trees (squared-error loss).

Each boosting round fits one CART tree to the current residuals using exact
greedy split search over midpoints of consecutive distinct feature values.
Leaf values are L2-regularised means ``sum(r) / (n + l2_leaf)``; split gain
is the matching reduction of the regularised squared-error objective, which
for ``l2_leaf == 0`` is plain variance reduction.

Ties between candidate splits go to the lowest feature index, then the
lowest threshold. All randomness (row/column subsampling) comes from
``numpy.random.default_rng(rng_seed)``, so a fit is bit-reproducible.
"""

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Sequence

import numpy as np

from gpphybrid.errors import InvalidInputError, ModelFormatError, SchemaError, UnsupportedVersionError

FORMAT_VERSION = 1

# Gains within this fraction of the node's sum of squared residuals count as ties.
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class GBTConfig:
    n_trees: int = 300
    learning_rate: float = 0.05
    max_depth: int = 4
    min_samples_leaf: int = 20
    subsample_rows: float = 0.8
    subsample_cols: float = 1.0
    rng_seed: int = 42
    l2_leaf: float = 1.0

    def __post_init__(self):
        if int(self.n_trees) != self.n_trees or self.n_trees < 1:
            raise InvalidInputError("n_trees must be an integer >= 1")
        if not 0 < self.learning_rate <= 1:
            raise InvalidInputError("learning_rate must lie in (0, 1]")
        if int(self.max_depth) != self.max_depth or self.max_depth < 0:
            raise InvalidInputError("max_depth must be an integer >= 0")
        if int(self.min_samples_leaf) != self.min_samples_leaf or self.min_samples_leaf < 1:
            raise InvalidInputError("min_samples_leaf must be an integer >= 1")
        for name in ("subsample_rows", "subsample_cols"):
            if not 0 < getattr(self, name) <= 1:
                raise InvalidInputError(f"{name} must lie in (0, 1]")
        if not self.l2_leaf >= 0:
            raise InvalidInputError("l2_leaf must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "GBTConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidInputError(f"unknown GBTConfig keys: {sorted(unknown)}")
        ints = {"n_trees", "max_depth", "min_samples_leaf", "rng_seed"}
        return cls(**{k: (int(v) if k in ints else float(v)) for k, v in data.items()})


@dataclass(frozen=True)
class FeatureMatrix:
    """Finite float64 feature table with unique column names."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise InvalidInputError("FeatureMatrix values must be 2-D")
        names = tuple(str(n) for n in self.names)
        if len(names) != vals.shape[1]:
            raise SchemaError(f"{len(names)} names for {vals.shape[1]} columns")
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if not np.all(np.isfinite(vals)):
            rows = np.flatnonzero(~np.isfinite(vals).all(axis=1)) + 1
            raise SchemaError("feature matrix has non-finite values", rows=rows)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "names", names)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass
class Tree:
    """Flat binary tree. ``feature[i] == -1`` marks node ``i`` as a leaf.

    Rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            if self.feature[i] >= 0:
                stack += [(int(self.left[i]), d + 1), (int(self.right[i]), d + 1)]
            else:
                best = max(best, d)
        return best

    def to_nodes(self) -> list:
        nodes = []
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                nodes.append({"feat": int(self.feature[i]), "thr": float(self.threshold[i]),
                              "left": int(self.left[i]), "right": int(self.right[i])})
            else:
                nodes.append({"value": float(self.value[i])})
        return nodes

    @classmethod
    def leaf(cls, value: float) -> "Tree":
        return cls(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([float(value)]))


@dataclass
class TreeEnsemble:
    """Boosted model: ``base_score + learning_rate * sum(tree outputs)``.

    ``degenerate`` is a fit-time diagnostic (all feature rows identical) and
    is not persisted.
    """

    base_score: float
    learning_rate: float
    trees: List[Tree]
    config: GBTConfig
    feature_names: tuple
    format_version: int = FORMAT_VERSION
    degenerate: bool = field(default=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "config": asdict(self.config),
            "feature_names": list(self.feature_names),
            "base_score": float(self.base_score),
            "trees": [t.to_nodes() for t in self.trees],
        }


def _check_xy(X: FeatureMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != X.n_rows:
        raise InvalidInputError(f"y has shape {y.shape}, expected ({X.n_rows},)")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("y contains non-finite values")
    return y


def fit(X: FeatureMatrix, y, config: GBTConfig = GBTConfig()) -> TreeEnsemble:
    """Fit a boosted tree ensemble to ``y`` (squared-error loss).

    If every row of ``X`` is identical no split is possible; the result is a
    base-score-only ensemble with ``degenerate=True`` and a warning.
    """
    y = _check_xy(X, y)
    n = X.n_rows
    if n < 2 * config.min_samples_leaf:
        raise InvalidInputError(f"need at least {2 * config.min_samples_leaf} rows, got {n}")

    # exact mean when y is constant, so constant targets are reproduced exactly
    base = float(y[0]) if np.all(y == y[0]) else float(np.mean(y))
    model = TreeEnsemble(base, float(config.learning_rate), [], config, X.names)
    if n == 0 or np.all(X.values == X.values[0]):
        if not np.all(y == y[0]):
            warnings.warn("all feature rows are identical; returning base-score-only ensemble",
                          RuntimeWarning, stacklevel=2)
            model.degenerate = True
        return model

    Xv = X.values
    XT = np.ascontiguousarray(Xv.T)
    presorted = np.argsort(XT, axis=1, kind="stable")
    rng = np.random.default_rng(config.rng_seed)
    n_sub = max(1, int(round(config.subsample_rows * n)))
    p = X.n_cols
    p_sub = max(1, int(round(config.subsample_cols * p)))

    tree_sum = np.zeros(n)
    for _ in range(config.n_trees):
        resid = y - (base + config.learning_rate * tree_sum)
        if n_sub < n:
            in_sub = np.zeros(n, dtype=bool)
            in_sub[rng.choice(n, size=n_sub, replace=False)] = True
        else:
            in_sub = np.ones(n, dtype=bool)
        cols = np.sort(rng.choice(p, size=p_sub, replace=False)) if p_sub < p else np.arange(p)
        tree = _grow_tree(XT, presorted, resid, in_sub, cols, config)
        model.trees.append(tree)
        tree_sum += tree.predict(Xv)
    return model


def _grow_tree(XT, presorted, resid, in_sub, cols, config) -> Tree:
    """Grow one tree on the rows flagged in ``in_sub`` using features ``cols``.

    Each node keeps, per candidate feature, its rows in ascending feature order
    (a ``(n_features, n_node)`` index block). Splitting a node partitions every
    row of the block stably, so no sorting happens below the root.
    """
    msl = config.min_samples_leaf
    lam = config.l2_leaf
    order = presorted[cols]
    block = order[in_sub[order]].reshape(len(cols), -1)
    Xc = XT[cols]

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    goes_left = np.zeros(XT.shape[1], dtype=bool)
    stack = [(new_node(), block, 0)]
    while stack:
        node, blk, depth = stack.pop()
        rows = blk[0]
        r = resid[rows]
        n = rows.size
        g = math.fsum(r)
        value[node] = g / (n + lam)
        if depth >= config.max_depth or n < 2 * msl:
            continue
        split = _best_split(Xc, blk, resid, g, float(np.dot(r, r)), msl, lam)
        if split is None:
            continue
        j, pos = split
        xs_lo = Xc[j, blk[j, pos]]
        xs_hi = Xc[j, blk[j, pos + 1]]
        thr = 0.5 * (xs_lo + xs_hi)
        if not xs_lo <= thr < xs_hi:
            thr = xs_lo
        goes_left[rows] = Xc[j, rows] <= thr
        mask = goes_left[blk]
        n_left = int(mask[0].sum())
        lblk = blk[mask].reshape(blk.shape[0], n_left)
        rblk = blk[~mask].reshape(blk.shape[0], n - n_left)
        feature[node] = int(cols[j])
        threshold[node] = float(thr)
        li, ri = new_node(), new_node()
        left[node], right[node] = li, ri
        stack.append((ri, rblk, depth + 1))
        stack.append((li, lblk, depth + 1))

    return Tree(
        np.array(feature, dtype=np.intp), np.array(threshold, dtype=float),
        np.array(left, dtype=np.intp), np.array(right, dtype=np.intp), np.array(value, dtype=float),
    )


def _best_split(Xc, blk, resid, g, sse, msl, lam):
    """Return ``(feature_row, position)`` of the best split or ``None``.

    ``position`` i splits the node's sorted rows into ``[0..i]`` and ``[i+1..]``.
    """
    n = blk.shape[1]
    xs = np.take_along_axis(Xc, blk, axis=1)
    cl = np.cumsum(resid[blk], axis=1)[:, :-1]
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    gain = cl * cl / (nl + lam) + (g - cl) ** 2 / (nr + lam) - g * g / (n + lam)
    valid = xs[:, :-1] < xs[:, 1:]
    valid[:, : msl - 1] = False
    if msl > 1:
        valid[:, n - msl:] = False
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    tol = _TIE_RTOL * sse
    if not best > tol:
        return None
    flat = np.flatnonzero((gain >= best - tol).ravel())[0]
    return divmod(int(flat), n - 1)


def predict(model: TreeEnsemble, X: FeatureMatrix) -> np.ndarray:
    """Predictions ``base_score + learning_rate * sum(tree outputs)`` per row."""
    if tuple(X.names) != tuple(model.feature_names):
        raise SchemaError(
            f"feature columns {list(X.names)} do not match model features {list(model.feature_names)}"
        )
    total = np.zeros(X.n_rows)
    for tree in model.trees:
        total += tree.predict(X.values)
    return model.base_score + model.learning_rate * total


def dumps(model: TreeEnsemble) -> str:
    return json.dumps(model.to_dict(), separators=(",", ":"), allow_nan=False) + "\n"


def save(model: TreeEnsemble, path) -> None:
    """Write the versioned JSON model file."""
    Path(path).write_text(dumps(model), encoding="utf-8")


def load(path) -> TreeEnsemble:
    """Read a model file written by :func:`save`.

    Raises:
        UnsupportedVersionError: unknown ``format_version``.
        ModelFormatError: malformed JSON or structure, with its location.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    return loads(text)


def loads(text: str) -> TreeEnsemble:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from exc
    return from_dict(data)


def from_dict(data) -> TreeEnsemble:
    if not isinstance(data, dict):
        raise ModelFormatError("model must be a JSON object", "$")
    for key in ("format_version", "config", "feature_names", "base_score", "trees"):
        if key not in data:
            raise ModelFormatError(f"missing key {key!r}", "$")
    version = data["format_version"]
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported format_version {version!r}; expected {FORMAT_VERSION}",
                                      "format_version")
    try:
        config = GBTConfig.from_dict(data["config"])
    except (InvalidInputError, TypeError, ValueError, AttributeError) as exc:
        raise ModelFormatError(f"bad config: {exc}", "config") from exc
    names = data["feature_names"]
    if not isinstance(names, list) or not all(isinstance(s, str) for s in names):
        raise ModelFormatError("feature_names must be a list of strings", "feature_names")
    base = _number(data["base_score"], "base_score")
    if not isinstance(data["trees"], list):
        raise ModelFormatError("trees must be a list", "trees")
    trees = [_tree_from_nodes(nodes, len(names), f"trees[{t}]") for t, nodes in enumerate(data["trees"])]
    return TreeEnsemble(base, float(config.learning_rate), trees, config, tuple(names), version)


def _number(v, where) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ModelFormatError("expected a finite number", where)
    return float(v)


def _tree_from_nodes(nodes, n_features, where) -> Tree:
    if not isinstance(nodes, list) or not nodes:
        raise ModelFormatError("tree must be a non-empty list of nodes", where)
    m = len(nodes)
    feat = np.full(m, -1, dtype=np.intp)
    thr = np.zeros(m)
    lft = np.full(m, -1, dtype=np.intp)
    rgt = np.full(m, -1, dtype=np.intp)
    val = np.zeros(m)
    for i, node in enumerate(nodes):
        loc = f"{where}[{i}]"
        if not isinstance(node, dict):
            raise ModelFormatError("node must be an object", loc)
        if "value" in node:
            if set(node) != {"value"}:
                raise ModelFormatError("leaf must only have 'value'", loc)
            val[i] = _number(node["value"], f"{loc}.value")
            continue
        if set(node) != {"feat", "thr", "left", "right"}:
            raise ModelFormatError("internal node needs feat, thr, left, right", loc)
        f = node["feat"]
        if isinstance(f, bool) or not isinstance(f, int) or not 0 <= f < n_features:
            raise ModelFormatError("feature index out of range", f"{loc}.feat")
        feat[i] = f
        thr[i] = _number(node["thr"], f"{loc}.thr")
        for key, arr in (("left", lft), ("right", rgt)):
            c = node[key]
            if isinstance(c, bool) or not isinstance(c, int) or not i < c < m:
                raise ModelFormatError("child index out of range", f"{loc}.{key}")
            arr[i] = c
    # every node except the root must be the child of exactly one node
    parents = np.zeros(m, dtype=int)
    internal = feat >= 0
    np.add.at(parents, lft[internal], 1)
    np.add.at(parents, rgt[internal], 1)
    if parents[0] != 0 or np.any(parents[1:] != 1):
        raise ModelFormatError("nodes do not form a tree (unreachable or shared nodes)", where)
    return Tree(feat, thr, lft, rgt, val)


def feature_matrix(columns: Sequence[np.ndarray], names: Sequence[str]) -> FeatureMatrix:
    """Stack 1-D columns into a :class:`FeatureMatrix`."""
    return FeatureMatrix(np.column_stack([np.asarray(c, dtype=float) for c in columns]), tuple(names))
