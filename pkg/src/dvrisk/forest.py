"""Decision trees, random forests, and the balanced-resampling ensemble.

Trees are CART-style classifiers over categorical level codes: a split
routes a subset of one feature's levels left and the rest right, chosen to
minimize weighted Gini impurity. Features with at most 8 observed levels
are searched exhaustively over all bipartitions; wider features use the
positive-rate ordering of levels, which is optimal for binary outcomes.

The ensemble counters class imbalance by redrawing a balanced bootstrap
(equal per-class counts, sampled with replacement) on every outer round,
retraining several forests on that same resample with fresh tree
randomness, and averaging every member forest's probability. All
randomness is derived from the master seed through counter-keyed seed
sequences, so any parallel schedule reproduces the serial model bit for
bit.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .preprocess import FeatureFrame, FrameSchema
from .records import DataError

__all__ = [
    "Leaf",
    "Split",
    "TreeParams",
    "ForestModel",
    "EnsembleConfig",
    "EnsembleModel",
    "RiskLevel",
    "gini_impurity",
    "best_split",
    "build_tree",
    "balanced_resample",
    "split_holdout",
    "train_ensemble",
    "predict_proba",
    "predict_matrix",
    "classify",
    "DEFAULT_BANDS",
    "PAPER_CONFIG",
    "DESK_CONFIG",
]

MODEL_FORMAT_VERSION = 1
DEFAULT_BANDS = (0.33, 0.67)

# exhaustive bipartition search up to 2^(8-1) - 1 = 127 candidate subsets
EXHAUSTIVE_LEVEL_CAP = 8


@dataclass(frozen=True)
class Leaf:
    positive_fraction: float


@dataclass(frozen=True)
class Split:
    feature: int
    left_levels: frozenset[int]
    left: "Leaf | Split"
    right: "Leaf | Split"


@dataclass(frozen=True)
class SplitSpec:
    feature: int
    left_levels: frozenset[int]
    weighted_gini: float


def gini_impurity(labels) -> float:
    y = np.asarray(labels)
    if y.size == 0:
        raise DataError("gini_impurity: empty input")
    p = float(np.mean(y))
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _subset_matrix(k: int) -> np.ndarray:
    """0/1 matrix of all proper nonempty subsets of k items that contain
    item 0 (one representative per unordered bipartition)."""
    ids = (np.arange(0, 2 ** (k - 1) - 1, dtype=np.int64) << 1) | 1
    return ((ids[:, None] >> np.arange(k)) & 1).astype(np.float64)


_SUBSETS = {k: _subset_matrix(k) for k in range(2, EXHAUSTIVE_LEVEL_CAP + 1)}


def best_split(frame: FeatureFrame, row_indices, candidate_features) -> SplitSpec | None:
    """Minimum weighted-Gini (feature, level-subset) over the candidates.

    Returns None for a pure node or when no feature has two observed
    levels. A zero-decrease split at an impure node is still returned
    (weighted child Gini never exceeds the parent), so parity-structured
    data remains learnable by deeper trees.
    """
    rows = np.asarray(row_indices, dtype=np.int64)
    if rows.size < 2:
        return None
    y = frame.labels[rows].astype(np.float64)
    n = float(rows.size)
    total_pos = float(y.sum())
    parent = 2.0 * (total_pos / n) * (1.0 - total_pos / n)
    if parent <= 0.0:
        return None

    best: tuple[float, int, tuple[int, ...]] | None = None
    for f in candidate_features:
        f = int(f)
        levels = frame.schema.features[f].levels
        codes = frame.rows[rows, f].astype(np.int64)
        tot = np.bincount(codes, minlength=len(levels)).astype(np.float64)
        pos = np.bincount(codes, weights=y, minlength=len(levels))
        present = np.flatnonzero(tot > 0)
        k = present.size
        if k < 2:
            continue

        if k <= EXHAUSTIVE_LEVEL_CAP:
            subsets = _SUBSETS[k]
            n_left = subsets @ tot[present]
            pos_left = subsets @ pos[present]
        else:
            rates = pos[present] / tot[present]
            order = present[np.lexsort((present, rates))]
            n_left = np.cumsum(tot[order])[:-1]
            pos_left = np.cumsum(pos[order])[:-1]
        n_right = n - n_left
        pos_right = total_pos - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        weighted = (
            n_left * 2.0 * p_l * (1.0 - p_l) + n_right * 2.0 * p_r * (1.0 - p_r)
        ) / n
        idx = int(np.argmin(weighted))
        score = float(weighted[idx])
        if best is not None and score >= best[0]:
            continue
        if k <= EXHAUSTIVE_LEVEL_CAP:
            chosen = tuple(int(l) for l in present[subsets[idx].astype(bool)])
        else:
            chosen = tuple(int(l) for l in order[: idx + 1])
        best = (score, f, chosen)

    if best is None:
        return None
    return SplitSpec(
        feature=best[1], left_levels=frozenset(best[2]), weighted_gini=best[0]
    )


@dataclass(frozen=True)
class TreeParams:
    mtry: int
    max_depth: int = 12
    min_leaf: int = 5


def build_tree(frame: FeatureFrame, row_indices, params: TreeParams, rng) -> "Leaf | Split":
    """Grow one CART tree; rng drives only the per-node feature draws."""
    rows = np.asarray(row_indices, dtype=np.int64)
    if rows.size == 0:
        raise DataError("build_tree: no rows")
    p = len(frame.schema)
    mtry = min(params.mtry, p)
    labels = frame.labels

    def grow(idx: np.ndarray, depth: int):
        pos = int(labels[idx].sum())
        n = idx.size
        if (
            depth >= params.max_depth
            or n < 2 * params.min_leaf
            or pos == 0
            or pos == n
        ):
            return Leaf(pos / n)
        feats = np.sort(rng.choice(p, size=mtry, replace=False))
        spec = best_split(frame, idx, feats)
        if spec is None:
            return Leaf(pos / n)
        lut = np.zeros(len(frame.schema.features[spec.feature].levels), dtype=bool)
        lut[list(spec.left_levels)] = True
        go_left = lut[frame.rows[idx, spec.feature]]
        return Split(
            feature=spec.feature,
            left_levels=spec.left_levels,
            left=grow(idx[go_left], depth + 1),
            right=grow(idx[~go_left], depth + 1),
        )

    return grow(rows, 0)


def balanced_resample(frame: FeatureFrame, per_class: int, rng) -> np.ndarray:
    """Exactly per_class row indices per class, drawn with replacement."""
    if per_class < 1:
        raise DataError("balanced_resample: per_class must be >= 1")
    picks = []
    for cls in (0, 1):
        members = np.flatnonzero(frame.labels == cls)
        if members.size == 0:
            raise DataError(f"balanced_resample: no rows in class {cls}")
        picks.append(members[rng.integers(0, members.size, size=per_class)])
    return np.concatenate(picks)


def split_holdout(frame: FeatureFrame, size: int, rng, stratified: bool = False):
    """Uniformly reserve ``size`` rows for evaluation; returns (train, holdout)
    index arrays. Stratified mode preserves the class ratio instead."""
    n = frame.n_rows
    if not 0 < size < n:
        raise DataError(f"holdout size {size} must be in (0, {n})")
    if stratified:
        hold = []
        pos_idx = np.flatnonzero(frame.labels == 1)
        neg_idx = np.flatnonzero(frame.labels == 0)
        n_pos = int(round(size * pos_idx.size / n))
        n_pos = min(max(n_pos, 0), size)
        hold.append(rng.permutation(pos_idx)[:n_pos])
        hold.append(rng.permutation(neg_idx)[: size - n_pos])
        holdout = np.sort(np.concatenate(hold))
    else:
        holdout = np.sort(rng.permutation(n)[:size])
    mask = np.ones(n, dtype=bool)
    mask[holdout] = False
    return np.flatnonzero(mask), holdout


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    n_trees: int
    mtry: int
    seed: int


@dataclass(frozen=True)
class EnsembleConfig:
    outer_rounds: int = 200
    inner_repeats: int = 50
    trees_per_forest: int = 200
    per_class_sample: int = 500
    mtry: int | None = None  # None -> ceil(sqrt(n_features))
    max_depth: int = 12
    min_leaf: int = 5
    master_seed: int = 0
    threshold: float = 0.5

    def validate(self) -> None:
        for name in ("outer_rounds", "inner_repeats", "trees_per_forest", "per_class_sample"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be >= 1")
        if self.master_seed < 0:
            raise DataError("master_seed must be a nonnegative integer")
        if not 0.0 <= self.threshold <= 1.0:
            raise DataError("threshold must be in [0, 1]")

    def resolve_mtry(self, n_features: int) -> int:
        if self.mtry is not None:
            if not 1 <= self.mtry <= n_features:
                raise DataError(f"mtry must be in [1, {n_features}]")
            return self.mtry
        return max(1, math.ceil(math.sqrt(n_features)))


PAPER_CONFIG = EnsembleConfig()
DESK_CONFIG = EnsembleConfig(
    outer_rounds=20, inner_repeats=5, trees_per_forest=50, per_class_sample=200
)


def _rng_for(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=key))
    )


def _forest_seed(master_seed: int, outer: int, inner: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(1, outer, inner))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _train_round(frame: FeatureFrame, config: EnsembleConfig, outer: int) -> list[ForestModel]:
    mtry = config.resolve_mtry(len(frame.schema))
    params = TreeParams(mtry=mtry, max_depth=config.max_depth, min_leaf=config.min_leaf)
    resample = balanced_resample(
        frame, config.per_class_sample, _rng_for(config.master_seed, 0, outer)
    )
    forests = []
    for inner in range(config.inner_repeats):
        trees = tuple(
            build_tree(
                frame,
                resample,
                params,
                _rng_for(config.master_seed, 1, outer, inner, t),
            )
            for t in range(config.trees_per_forest)
        )
        forests.append(
            ForestModel(
                trees=trees,
                n_trees=config.trees_per_forest,
                mtry=mtry,
                seed=_forest_seed(config.master_seed, outer, inner),
            )
        )
    return forests


@dataclass(frozen=True)
class EnsembleModel:
    config: EnsembleConfig
    schema: FrameSchema
    forests: tuple[ForestModel, ...]  # outer-round major, inner-repeat minor

    @property
    def threshold(self) -> float:
        return self.config.threshold

    @property
    def master_seed(self) -> int:
        return self.config.master_seed

    def to_json_bytes(self) -> bytes:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "dvrisk-ensemble",
            "config": {
                "outer_rounds": self.config.outer_rounds,
                "inner_repeats": self.config.inner_repeats,
                "trees_per_forest": self.config.trees_per_forest,
                "per_class_sample": self.config.per_class_sample,
                "mtry": self.config.mtry,
                "max_depth": self.config.max_depth,
                "min_leaf": self.config.min_leaf,
                "master_seed": self.config.master_seed,
                "threshold": self.config.threshold,
            },
            "schema": self.schema.to_list(),
            "forests": [
                {
                    "seed": f.seed,
                    "mtry": f.mtry,
                    "n_trees": f.n_trees,
                    "trees": [_flatten_tree(t) for t in f.trees],
                }
                for f in self.forests
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_json_bytes())

    @classmethod
    def from_json_bytes(cls, raw: bytes) -> "EnsembleModel":
        doc = json.loads(raw.decode("utf-8"))
        if doc.get("kind") != "dvrisk-ensemble":
            raise DataError("not an ensemble model file")
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model format_version {doc.get('format_version')!r}")
        cfg = EnsembleConfig(**doc["config"])
        forests = tuple(
            ForestModel(
                trees=tuple(_unflatten_tree(t) for t in f["trees"]),
                n_trees=f["n_trees"],
                mtry=f["mtry"],
                seed=f["seed"],
            )
            for f in doc["forests"]
        )
        return cls(config=cfg, schema=FrameSchema.from_list(doc["schema"]), forests=forests)

    @classmethod
    def load(cls, path) -> "EnsembleModel":
        with open(path, "rb") as fh:
            return cls.from_json_bytes(fh.read())


def _flatten_tree(root) -> dict:
    feature: list[int] = []
    left_levels: list[list[int] | None] = []
    left: list[int] = []
    right: list[int] = []
    leaf: list[float | None] = []

    def rec(node) -> int:
        i = len(feature)
        if isinstance(node, Leaf):
            feature.append(-1)
            left_levels.append(None)
            left.append(-1)
            right.append(-1)
            leaf.append(node.positive_fraction)
        else:
            feature.append(node.feature)
            left_levels.append(sorted(node.left_levels))
            left.append(-1)
            right.append(-1)
            leaf.append(None)
            left[i] = rec(node.left)
            right[i] = rec(node.right)
        return i

    rec(root)
    return {
        "feature": feature,
        "left_levels": left_levels,
        "left": left,
        "right": right,
        "leaf": leaf,
    }


def _unflatten_tree(doc: dict):
    feature = doc["feature"]
    left_levels = doc["left_levels"]
    left = doc["left"]
    right = doc["right"]
    leaf = doc["leaf"]

    def rec(i: int):
        if feature[i] < 0:
            return Leaf(leaf[i])
        return Split(
            feature=feature[i],
            left_levels=frozenset(left_levels[i]),
            left=rec(left[i]),
            right=rec(right[i]),
        )

    return rec(0)


def train_ensemble(frame: FeatureFrame, config: EnsembleConfig, jobs: int = 1) -> EnsembleModel:
    """Train the two-level ensemble; any jobs count yields the same model."""
    config.validate()
    if frame.n_rows == 0:
        raise DataError("train_ensemble: empty frame")
    mtry = config.resolve_mtry(len(frame.schema))
    config = replace(config, mtry=mtry)

    if jobs > 1 and config.outer_rounds > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rounds = list(
                pool.map(
                    _train_round,
                    [frame] * config.outer_rounds,
                    [config] * config.outer_rounds,
                    range(config.outer_rounds),
                )
            )
    else:
        rounds = [_train_round(frame, config, r) for r in range(config.outer_rounds)]

    forests = tuple(f for round_forests in rounds for f in round_forests)
    return EnsembleModel(config=config, schema=frame.schema, forests=forests)


def _walk(node, row) -> float:
    while isinstance(node, Split):
        node = node.left if row[node.feature] in node.left_levels else node.right
    return node.positive_fraction


def _check_row(schema: FrameSchema, row) -> None:
    if len(row) != len(schema):
        raise DataError(
            f"row has {len(row)} values, schema expects {len(schema)}"
        )
    for value, feat in zip(row, schema.features):
        if not 0 <= int(value) < len(feat.levels):
            raise DataError(
                f"{feat.name}: level index {value} outside [0, {len(feat.levels)})"
            )


def predict_proba(model: EnsembleModel, row) -> float:
    """Mean member-forest probability for one encoded row."""
    _check_row(model.schema, row)
    forest_means = [
        math.fsum(_walk(t, row) for t in f.trees) / f.n_trees for f in model.forests
    ]
    return math.fsum(forest_means) / len(forest_means)


def _tree_accumulate(node, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[idx] += node.positive_fraction
        return
    codes = X[idx, node.feature]
    lut = np.zeros(codes.max() + 1 if codes.size else 1, dtype=bool)
    for lvl in node.left_levels:
        if lvl < lut.size:
            lut[lvl] = True
    go_left = lut[codes]
    if go_left.any():
        _tree_accumulate(node.left, X, idx[go_left], out)
    if not go_left.all():
        _tree_accumulate(node.right, X, idx[~go_left], out)


def predict_matrix(model: EnsembleModel, rows: np.ndarray) -> np.ndarray:
    """Vectorized predict_proba over an (n, p) matrix of level codes."""
    X = np.asarray(rows, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != len(model.schema):
        raise DataError(f"expected (n, {len(model.schema)}) matrix, got {X.shape}")
    n = X.shape[0]
    total = np.zeros(n, dtype=np.float64)
    all_idx = np.arange(n, dtype=np.int64)
    for f in model.forests:
        acc = np.zeros(n, dtype=np.float64)
        for tree in f.trees:
            _tree_accumulate(tree, X, all_idx, acc)
        total += acc / f.n_trees
    return total / len(model.forests)


class RiskLevel(str, Enum):
    LOW = "low"
    ELEVATED = "elevated"
    HIGH = "high"


def classify(prob: float, threshold: float = 0.5, bands: tuple[float, float] = DEFAULT_BANDS):
    """Binary label (1 iff prob >= threshold) plus the risk band."""
    if not 0.0 <= prob <= 1.0 or not 0.0 <= threshold <= 1.0:
        raise DataError("probability and threshold must be in [0, 1]")
    label = 1 if prob >= threshold else 0
    if prob < bands[0]:
        level = RiskLevel.LOW
    elif prob < bands[1]:
        level = RiskLevel.ELEVATED
    else:
        level = RiskLevel.HIGH
    return label, level
