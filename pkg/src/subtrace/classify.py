"""Interval classifiers: Gaussian NB, boosted NB, and a random forest.

The two ensembles are trained on the same rows and averaged 50/50 at
prediction time. Everything is written against plain numpy arrays and
serializes to versioned JSON so a trained attack model is a single file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureConfig, SegmentFeatures

VAR_FLOOR = 1e-6
ERR_FLOOR = 1e-10
MAX_RESAMPLE_RETRIES = 5

DEFAULT_BOOST_ROUNDS = 12
DEFAULT_TREES = 100
DEFAULT_MAX_DEPTH = 12
DEFAULT_MIN_LEAF = 2


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class TrainingSet:
    """Feature rows with interval labels in [0, n_classes)."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int
    sample_weight: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("X must be (n, d) with matching labels")
        if y.min(initial=0) < 0 or y.max(initial=0) >= self.n_classes:
            raise ValueError("labels outside [0, n_classes)")
        counts = np.bincount(y, minlength=self.n_classes)
        thin = np.nonzero((counts > 0) & (counts < 2))[0]
        if thin.size:
            raise ValueError(f"classes {thin.tolist()} have fewer than 2 rows")
        if self.sample_weight is not None:
            w = np.asarray(self.sample_weight, dtype=float)
            if w.shape != y.shape or (w < 0).any() or w.sum() <= 0:
                raise ValueError("bad sample weights")
            object.__setattr__(self, "sample_weight", w)

    @classmethod
    def from_pairs(
        cls,
        pairs: list[tuple[SegmentFeatures, int]],
        n_classes: int,
        sample_weight: np.ndarray | None = None,
    ) -> "TrainingSet":
        X = np.stack([f.vector() for f, _ in pairs])
        y = np.array([lab for _, lab in pairs], dtype=int)
        return cls(X=X, y=y, n_classes=n_classes, sample_weight=sample_weight)


class GaussianNB:
    """Diagonal Gaussian naive Bayes with optional sample weights."""

    def __init__(self, priors: np.ndarray, means: np.ndarray, variances: np.ndarray):
        self.priors = priors
        self.means = means
        self.variances = variances

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        n_classes: int,
        sample_weight: np.ndarray | None = None,
    ) -> "GaussianNB":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        n, d = X.shape
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        priors = np.zeros(n_classes)
        means = np.zeros((n_classes, d))
        variances = np.full((n_classes, d), VAR_FLOOR)
        for c in range(n_classes):
            wc = w[y == c]
            tot = wc.sum()
            priors[c] = tot
            if tot <= 0:
                continue
            Xc = X[y == c]
            mu = (wc[:, None] * Xc).sum(axis=0) / tot
            var = (wc[:, None] * (Xc - mu) ** 2).sum(axis=0) / tot
            means[c] = mu
            variances[c] = np.maximum(var, VAR_FLOOR)
        priors /= priors.sum()
        return cls(priors, means, variances)

    def log_joint(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(divide="ignore"):
            lp = np.where(self.priors > 0, np.log(self.priors), -np.inf)
        # (n, 1, d) against (m, d) class params
        diff = X[:, None, :] - self.means[None, :, :]
        ll = -0.5 * (
            np.log(2.0 * np.pi * self.variances)[None] + diff**2 / self.variances[None]
        ).sum(axis=2)
        return lp[None, :] + ll

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.log_joint(X), axis=1)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        lj = self.log_joint(X)
        lj = np.where(np.isfinite(lj), lj, -1e300)
        return _softmax(lj)

    def to_dict(self) -> dict:
        return {
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianNB":
        return cls(
            np.array(doc["priors"], dtype=float),
            np.array(doc["means"], dtype=float),
            np.array(doc["variances"], dtype=float),
        )


class AdaBoostNB:
    """SAMME boosting over NB learners, resampling by the boost weights.

    Each round draws a weight-proportional bootstrap, fits NB on it, and
    scores the error on the original rows. Rounds whose error reaches the
    random-guess bound 1 - 1/m are redrawn a few times, then boosting stops;
    a zero-error round keeps its learner and stops early.
    """

    def __init__(self, learners: list[GaussianNB], alphas: np.ndarray, n_classes: int):
        if not learners:
            raise ValueError("boosted model needs at least one learner")
        self.learners = learners
        self.alphas = alphas
        self.n_classes = n_classes

    def vote_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        scores = np.zeros((len(X), self.n_classes))
        for alpha, nb in zip(self.alphas, self.learners):
            pred = nb.predict(X)
            scores[np.arange(len(X)), pred] += alpha
        return scores

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.vote_scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.vote_scores(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "alphas": self.alphas.tolist(),
            "learners": [nb.to_dict() for nb in self.learners],
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AdaBoostNB":
        return cls(
            [GaussianNB.from_dict(d) for d in doc["learners"]],
            np.array(doc["alphas"], dtype=float),
            int(doc["n_classes"]),
        )


def train_adaboost_nb(
    train: TrainingSet, rounds: int = DEFAULT_BOOST_ROUNDS, seed: int = 0
) -> AdaBoostNB:
    X, y, m = train.X, train.y, train.n_classes
    n = len(X)
    rng = np.random.default_rng(seed)
    w = np.ones(n) if train.sample_weight is None else train.sample_weight.copy()
    w = w / w.sum()
    limit = 1.0 - 1.0 / m

    learners: list[GaussianNB] = []
    alphas: list[float] = []
    for _ in range(rounds):
        nb = None
        for _ in range(1 + MAX_RESAMPLE_RETRIES):
            idx = rng.choice(n, size=n, p=w)
            cand = GaussianNB.fit(X[idx], y[idx], m)
            mis = cand.predict(X) != y
            err = float(w[mis].sum())
            if err < limit:
                nb = cand
                break
        if nb is None:
            break
        err_f = min(max(err, ERR_FLOOR), 1.0 - ERR_FLOOR)
        alpha = float(np.log((1.0 - err_f) / err_f) + np.log(m - 1.0))
        learners.append(nb)
        alphas.append(alpha)
        if err <= 0.0:
            break
        w = w * np.exp(alpha * mis)
        w = w / w.sum()

    if not learners:
        # hopeless resampling: fall back to one NB on the untouched rows
        learners = [GaussianNB.fit(X, y, m, sample_weight=train.sample_weight)]
        alphas = [1.0]
    return AdaBoostNB(learners, np.array(alphas), m)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    rng: np.random.Generator,
    max_depth: int,
    min_leaf: int,
    n_feats: int,
) -> dict:
    """CART with Gini splits, stored as flat arrays (feature -1 marks a leaf)."""
    n, d = X.shape
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    probs: list[np.ndarray] = []

    def leaf_probs(idx: np.ndarray) -> np.ndarray:
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        return counts / counts.sum()

    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node

        ysub = y[idx]
        pure = ysub.min() == ysub.max()
        if depth >= max_depth or len(idx) < 2 * min_leaf or pure:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            probs.append(leaf_probs(idx))
            continue

        feats = rng.choice(d, size=n_feats, replace=False)
        best_gini, best_f, best_t = np.inf, -1, 0.0
        onehot = np.eye(n_classes)[ysub]
        nn = len(idx)
        for f in feats:
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xo = xs[order]
            if xo[0] == xo[-1]:
                continue
            cum = np.cumsum(onehot[order], axis=0)
            total = cum[-1]
            nl = np.arange(1, nn)
            gl = 1.0 - ((cum[:-1] / nl[:, None]) ** 2).sum(axis=1)
            gr = 1.0 - (((total - cum[:-1]) / (nn - nl)[:, None]) ** 2).sum(axis=1)
            score = (nl * gl + (nn - nl) * gr) / nn
            valid = (xo[:-1] < xo[1:]) & (nl >= min_leaf) & ((nn - nl) >= min_leaf)
            if not valid.any():
                continue
            score = np.where(valid, score, np.inf)
            j = int(np.argmin(score))
            if score[j] < best_gini:
                best_gini, best_f, best_t = float(score[j]), int(f), float(
                    0.5 * (xo[j] + xo[j + 1])
                )

        if best_f < 0:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            probs.append(leaf_probs(idx))
            continue

        go_left = X[idx, best_f] <= best_t
        feature.append(best_f)
        threshold.append(best_t)
        left.append(-1)
        right.append(-1)
        probs.append(leaf_probs(idx))
        stack.append((idx[~go_left], depth + 1, node, True))
        stack.append((idx[go_left], depth + 1, node, False))

    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "probs": np.stack(probs),
    }


def _tree_apply(tree: dict, X: np.ndarray) -> np.ndarray:
    """Leaf index per row, walking all rows one depth level at a time."""
    n = len(X)
    node = np.zeros(n, dtype=np.int64)
    feat = tree["feature"]
    thr = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    rows = np.arange(n)
    while True:
        f = feat[node]
        active = f >= 0
        if not active.any():
            return node
        fx = X[rows, np.where(active, f, 0)]
        nxt = np.where(fx <= thr[node], left[node], right[node])
        node = np.where(active, nxt, node)


class RandomForest:
    """Bagged CART trees with soft voting over leaf class histograms."""

    def __init__(self, trees: list[dict], n_classes: int, oob_accuracy: float | None = None):
        if not trees:
            raise ValueError("forest needs at least one tree")
        self.trees = trees
        self.n_classes = n_classes
        self.oob_accuracy = oob_accuracy

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        acc = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            acc += tree["probs"][_tree_apply(tree, X)]
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "oob_accuracy": self.oob_accuracy,
            "trees": [
                {
                    "feature": t["feature"].tolist(),
                    "threshold": t["threshold"].tolist(),
                    "left": t["left"].tolist(),
                    "right": t["right"].tolist(),
                    "probs": t["probs"].tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomForest":
        trees = [
            {
                "feature": np.array(t["feature"], dtype=np.int64),
                "threshold": np.array(t["threshold"], dtype=float),
                "left": np.array(t["left"], dtype=np.int64),
                "right": np.array(t["right"], dtype=np.int64),
                "probs": np.array(t["probs"], dtype=float),
            }
            for t in doc["trees"]
        ]
        return cls(trees, int(doc["n_classes"]), doc.get("oob_accuracy"))


def train_random_forest(
    train: TrainingSet,
    n_trees: int = DEFAULT_TREES,
    seed: int = 0,
    max_depth: int = DEFAULT_MAX_DEPTH,
    min_leaf: int = DEFAULT_MIN_LEAF,
    feature_frac: float | None = None,
    bootstrap: bool = True,
) -> RandomForest:
    X, y, m = train.X, train.y, train.n_classes
    n, d = X.shape
    n_feats = (
        max(1, int(round(np.sqrt(d))))
        if feature_frac is None
        else max(1, int(round(feature_frac * d)))
    )
    if train.sample_weight is not None:
        p = train.sample_weight / train.sample_weight.sum()
    else:
        p = None

    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    oob_votes = np.zeros((n, m))
    oob_hit = np.zeros(n, dtype=bool)
    for child in children:
        rng = np.random.default_rng(child)
        if bootstrap:
            idx = rng.choice(n, size=n, p=p)
        else:
            idx = np.arange(n)
        tree = _grow_tree(X[idx], y[idx], m, rng, max_depth, min_leaf, n_feats)
        trees.append(tree)
        if bootstrap:
            oob = np.setdiff1d(np.arange(n), idx, assume_unique=False)
            if oob.size:
                oob_votes[oob] += tree["probs"][_tree_apply(tree, X[oob])]
                oob_hit[oob] = True

    oob_accuracy = None
    if bootstrap and oob_hit.any():
        pred = np.argmax(oob_votes[oob_hit], axis=1)
        oob_accuracy = float(np.mean(pred == y[oob_hit]))
    return RandomForest(trees, m, oob_accuracy)


@dataclass
class IntervalEnsemble:
    """Boosted NB and forest averaged 50/50 over the interval classes."""

    boost: AdaBoostNB
    forest: RandomForest
    config: FeatureConfig
    n_classes: int

    def predict_matrix(self, rows: np.ndarray | list[SegmentFeatures]) -> np.ndarray:
        """Row-stochastic (n_segments, n_classes) probability matrix."""
        if isinstance(rows, list):
            rows = np.stack([f.vector() for f in rows])
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        p = 0.5 * self.boost.predict_proba(rows) + 0.5 * self.forest.predict_proba(rows)
        p = p / p.sum(axis=1, keepdims=True)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
        return p

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "interval_ensemble",
            "n_classes": self.n_classes,
            "feature_config": self.config.to_dict(),
            "boost": self.boost.to_dict(),
            "forest": self.forest.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "IntervalEnsemble":
        if doc.get("kind") != "interval_ensemble" or doc.get("schema_version") != 1:
            raise ValueError("not a version-1 interval ensemble document")
        return cls(
            boost=AdaBoostNB.from_dict(doc["boost"]),
            forest=RandomForest.from_dict(doc["forest"]),
            config=FeatureConfig.from_dict(doc["feature_config"]),
            n_classes=int(doc["n_classes"]),
        )


def train_interval_ensemble(
    train: TrainingSet,
    config: FeatureConfig,
    boost_rounds: int = DEFAULT_BOOST_ROUNDS,
    n_trees: int = DEFAULT_TREES,
    seed: int = 0,
) -> IntervalEnsemble:
    ss = np.random.SeedSequence(seed)
    boost_seed, forest_seed = (int(c.generate_state(1)[0]) for c in ss.spawn(2))
    boost = train_adaboost_nb(train, rounds=boost_rounds, seed=boost_seed)
    forest = train_random_forest(train, n_trees=n_trees, seed=forest_seed)
    return IntervalEnsemble(boost=boost, forest=forest, config=config, n_classes=train.n_classes)
