"""From-scratch supervised models for the attack.

Random forest (gini, bootstrap, sqrt-feature splits) for change prediction,
a feed-forward network (relu hidden, softmax output, cross-entropy loss,
mini-batch gradient descent) for snapshot reconstruction, and a cumulative
confidence voting ensemble over per-size networks. All training is
deterministic under a fixed seed; models serialize to versioned JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import derive_seed
from .locality import Locality, encode
from .netlist import NetlistError

MODEL_SCHEMA = "sail-models/1"

NO_CHANGE = 0  # reserved reconstruction label: keep the observed snapshot


class TrainingDivergedError(NetlistError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


# -- random forest -----------------------------------------------------------------

FOREST_DEFAULTS = {"trees": 100, "max_depth": 12, "min_leaf": 2, "seed": 0}


@dataclass
class ForestModel:
    trees: list  # nested dicts: {"leaf": [p0, p1]} | {"f": i, "t": x, "l": .., "r": ..}
    n_features: int
    params: dict

    def to_json(self) -> dict:
        return {"trees": self.trees, "n_features": self.n_features, "params": self.params}

    @classmethod
    def from_json(cls, d: dict) -> "ForestModel":
        return cls(d["trees"], d["n_features"], d["params"])


def _gini(n_false: int, n_true: int) -> float:
    n = n_false + n_true
    if n == 0:
        return 0.0
    pf = n_false / n
    return 1.0 - pf * pf - (1.0 - pf) * (1.0 - pf)


def _leaf(y) -> dict:
    n = len(y)
    n_true = int(np.count_nonzero(y))
    return {"leaf": [(n - n_true) / n, n_true / n]}


def _grow_tree(X, y, idx, depth, rng, max_depth, min_leaf, k_features) -> dict:
    sub_y = y[idx]
    n_true = int(np.count_nonzero(sub_y))
    if depth >= max_depth or n_true == 0 or n_true == len(idx) or len(idx) < 2 * min_leaf:
        return _leaf(sub_y)

    n_feat = X.shape[1]
    feats = sorted(rng.choice(n_feat, size=min(k_features, n_feat), replace=False).tolist())
    best = None  # (gini, feature, threshold, left mask)
    for f in feats:
        col = X[idx, f]
        vals = np.unique(col)
        if len(vals) < 2:
            continue
        for t in (vals[:-1] + vals[1:]) / 2.0:
            left = col <= t
            nl = int(np.count_nonzero(left))
            nr = len(idx) - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            lt = int(np.count_nonzero(sub_y[left]))
            rt = n_true - lt
            g = (nl * _gini(nl - lt, lt) + nr * _gini(nr - rt, rt)) / len(idx)
            if best is None or g < best[0] - 1e-12:
                best = (g, f, float(t), left)
    if best is None:
        return _leaf(sub_y)
    _, f, t, left = best
    return {
        "f": f,
        "t": t,
        "l": _grow_tree(X, y, idx[left], depth + 1, rng, max_depth, min_leaf, k_features),
        "r": _grow_tree(X, y, idx[~left], depth + 1, rng, max_depth, min_leaf, k_features),
    }


def forest_train(data, params: dict | None = None) -> ForestModel:
    """Train a random forest on (feature vector, boolean label) pairs."""
    if not data:
        raise NetlistError("empty training data")
    p = dict(FOREST_DEFAULTS)
    p.update(params or {})
    lengths = {len(x) for x, _ in data}
    if len(lengths) != 1:
        raise NetlistError(f"inconsistent feature lengths {sorted(lengths)}")
    X = np.array([x for x, _ in data], dtype=float)
    y = np.array([bool(l) for _, l in data])
    n, n_feat = X.shape
    k_features = max(1, int(round(math.sqrt(n_feat))))
    trees = []
    for i in range(p["trees"]):
        rng = np.random.Generator(np.random.PCG64(derive_seed(p["seed"], "tree", i)))
        boot = np.sort(rng.integers(0, n, size=n))
        trees.append(_grow_tree(X, y, boot, 0, rng, p["max_depth"], p["min_leaf"], k_features))
    return ForestModel(trees, n_feat, p)


def _tree_vote(node: dict, x) -> bool:
    while "leaf" not in node:
        node = node["l"] if x[node["f"]] <= node["t"] else node["r"]
    p0, p1 = node["leaf"]
    return p1 > p0


def forest_predict(m: ForestModel, x) -> tuple[bool, float]:
    """Majority vote; confidence is the fraction of trees agreeing with it."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.n_features:
        raise NetlistError(f"feature length {x.shape[0]} != {m.n_features}")
    votes_true = sum(1 for t in m.trees if _tree_vote(t, x))
    total = len(m.trees)
    majority = votes_true * 2 > total
    agree = votes_true if majority else total - votes_true
    return majority, agree / total


# -- feed-forward network ----------------------------------------------------------

NETWORK_DEFAULTS = {"epochs": 200, "batch": 32, "learning_rate": 0.01, "seed": 0}


@dataclass
class NetworkModel:
    layer_sizes: list[int]
    weights: list  # np arrays, shape (fan_in, fan_out)
    biases: list  # np arrays, shape (fan_out,)
    locality_size: int | None = None
    final_loss: float | None = None

    def to_json(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "locality_size": self.locality_size,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_json(cls, d: dict) -> "NetworkModel":
        return cls(
            list(d["layer_sizes"]),
            [np.array(w, dtype=float) for w in d["weights"]],
            [np.array(b, dtype=float) for b in d["biases"]],
            d.get("locality_size"),
            d.get("final_loss"),
        )


def _init_network(layer_sizes, seed) -> NetworkModel:
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "net-init")))
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkModel(list(layer_sizes), weights, biases)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(m: NetworkModel, X):
    acts = [X]
    h = X
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = h @ w + b
        h = _softmax(z) if i == len(m.weights) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def network_loss_and_grads(m: NetworkModel, X, labels):
    """Mean cross-entropy over a batch, plus analytic gradients per layer."""
    n = X.shape[0]
    acts = _forward(m, X)
    probs = acts[-1]
    eps = 1e-12
    loss = -np.mean(np.log(probs[np.arange(n), labels] + eps))
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads_w, grads_b = [], []
    for i in range(len(m.weights) - 1, -1, -1):
        grads_w.append(acts[i].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ m.weights[i].T) * (acts[i] > 0)
    return loss, grads_w[::-1], grads_b[::-1]


def network_train(data, arch, params: dict | None = None) -> NetworkModel:
    """Train on (feature vector, label index) pairs; `arch` is the full layer list."""
    if not data:
        raise NetlistError("empty training data")
    p = dict(NETWORK_DEFAULTS)
    p.update(params or {})
    X = np.array([x for x, _ in data], dtype=float)
    labels = np.array([l for _, l in data], dtype=int)
    if X.shape[1] != arch[0]:
        raise NetlistError(f"feature length {X.shape[1]} != input layer {arch[0]}")
    bad = labels[(labels < 0) | (labels >= arch[-1])]
    if bad.size:
        raise NetlistError(f"label {int(bad[0])} outside catalog of size {arch[-1]}")

    m = _init_network(arch, p["seed"])
    rng = np.random.Generator(np.random.PCG64(derive_seed(p["seed"], "net-batches")))
    n = X.shape[0]
    batch = max(1, min(p["batch"], n))
    lr = p["learning_rate"]
    for epoch in range(p["epochs"]):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            sel = order[start : start + batch]
            loss, gw, gb = network_loss_and_grads(m, X[sel], labels[sel])
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)
            for i in range(len(m.weights)):
                m.weights[i] -= lr * gw[i]
                m.biases[i] -= lr * gb[i]
    final, _, _ = network_loss_and_grads(m, X, labels)
    if not math.isfinite(final):
        raise TrainingDivergedError(p["epochs"])
    m.final_loss = float(final)
    return m


def network_predict(m: NetworkModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.layer_sizes[0]:
        raise NetlistError(f"feature length {x.shape[0]} != input layer {m.layer_sizes[0]}")
    return _forward(m, x[None, :])[-1][0]


# -- label catalog and ensemble ----------------------------------------------------


@dataclass
class LabelCatalog:
    """Bijection between observed truth-snapshot signatures and dense labels.

    Label 0 is NO-CHANGE: decode it as the observed post-synthesis snapshot.
    """

    sig_to_label: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)  # label -> Locality

    @classmethod
    def build(cls, truth_snapshots) -> "LabelCatalog":
        by_sig = {}
        for snap in truth_snapshots:
            by_sig.setdefault(snap.signature(), snap)
        cat = cls()
        for i, sig in enumerate(sorted(by_sig), start=1):
            cat.sig_to_label[sig] = i
            cat.snapshots[i] = by_sig[sig]
        return cat

    @property
    def size(self) -> int:
        return 1 + len(self.sig_to_label)

    def label_for(self, snapshot: Locality) -> int | None:
        return self.sig_to_label.get(snapshot.signature())

    def snapshot_for(self, label: int, observed: Locality) -> Locality:
        if label == NO_CHANGE:
            return observed
        return self.snapshots[label]

    def to_json(self) -> dict:
        return {
            "sig_to_label": self.sig_to_label,
            "snapshots": {str(k): v.to_json() for k, v in self.snapshots.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "LabelCatalog":
        cat = cls()
        cat.sig_to_label = dict(d["sig_to_label"])
        cat.snapshots = {int(k): Locality.from_json(v) for k, v in d["snapshots"].items()}
        return cat


@dataclass
class EnsembleModel:
    members: dict  # locality size -> NetworkModel
    catalog: LabelCatalog

    def to_json(self) -> dict:
        return {
            "members": {str(k): v.to_json() for k, v in self.members.items()},
            "catalog": self.catalog.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "EnsembleModel":
        return cls(
            {int(k): NetworkModel.from_json(v) for k, v in d["members"].items()},
            LabelCatalog.from_json(d["catalog"]),
        )


def combine_distributions(dists) -> tuple[int, float]:
    """Sum member distributions; argmax label, ties to the smaller index."""
    total = np.sum(np.stack(list(dists)), axis=0)
    label = int(np.argmax(total))
    return label, float(total[label])


def ensemble_predict(e: EnsembleModel, localities: dict) -> tuple[int, float]:
    """Cumulative confidence vote across whichever member sizes are available."""
    dists = []
    for size in sorted(localities):
        member = e.members.get(size)
        if member is not None:
            dists.append(network_predict(member, encode(localities[size])))
    if not dists:
        raise NetlistError("no ensemble members available for the given sizes")
    return combine_distributions(dists)


def models_dumps(forest: ForestModel, ensemble: EnsembleModel, meta: dict | None = None) -> str:
    doc = {
        "schema": MODEL_SCHEMA,
        "forest": forest.to_json(),
        "ensemble": ensemble.to_json(),
        "meta": meta or {},
    }
    return json.dumps(doc, sort_keys=True)


def models_loads(text: str):
    doc = json.loads(text)
    if doc.get("schema") != MODEL_SCHEMA:
        raise NetlistError(f"unexpected model schema {doc.get('schema')!r}")
    forest = ForestModel.from_json(doc["forest"])
    ensemble = EnsembleModel.from_json(doc["ensemble"])
    return forest, ensemble, doc.get("meta", {})
