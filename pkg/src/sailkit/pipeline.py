"""Attack orchestration: dataset generation, model training, recovery, key bits.

The attacker holds only an obfuscated netlist. Treating it as a pseudo golden
circuit, we lock it again with fresh keys, re-synthesize, and harvest labeled
(pre, post) locality pairs around the new key gates. Models trained on those
pairs are then pointed at the victim's original key inputs, which never enter
the training data.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from ._util import derive_seed
from .learners import (
    NO_CHANGE,
    EnsembleModel,
    ForestModel,
    LabelCatalog,
    forest_predict,
    forest_train,
    network_train,
    ensemble_predict,
)
from .locality import (
    MAX_LOCALITY,
    MIN_LOCALITY,
    Locality,
    SnapshotDiff,
    encode,
    extract_locality,
    feature_length,
    snapshot_diff,
)
from .locking import InsertionHeuristic, KeyGateRecord, lock
from .netlist import Netlist, NetlistError, key_index, key_net
from .rewrite import RewriteLog, classify_change, resynthesize

DATASET_SCHEMA = "sail-dataset/1"
ALL_SIZES = tuple(range(MIN_LOCALITY, MAX_LOCALITY + 1))

NETWORK_HIDDEN = 128


@dataclass
class DatasetRecord:
    anchor: str
    instance: int
    level: int
    changed: bool
    truth: Locality  # pre-resynthesis snapshot
    localities: dict  # size -> post-resynthesis Locality

    def to_json(self) -> dict:
        return {
            "anchor": self.anchor,
            "instance": self.instance,
            "level": self.level,
            "changed": self.changed,
            "truth": self.truth.to_json(),
            "localities": {str(s): l.to_json() for s, l in self.localities.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetRecord":
        return cls(
            d["anchor"],
            d["instance"],
            d["level"],
            d["changed"],
            Locality.from_json(d["truth"]),
            {int(s): Locality.from_json(l) for s, l in d["localities"].items()},
        )


@dataclass
class Dataset:
    records: list
    meta: dict = field(default_factory=dict)


def generate_dataset(
    obfuscated: Netlist,
    instances: int,
    key_bits_per_instance: int,
    h: InsertionHeuristic,
    master_seed: int,
    rules=None,
) -> Dataset:
    """Pseudo-self-referencing training data around freshly inserted key gates.

    The victim's own key inputs are never labeled; only the new per-instance
    key gates contribute records, so train and test anchors stay disjoint.
    """
    if instances < 1:
        raise NetlistError("need at least one instance")
    records = []
    for i in range(instances):
        rng = random.Random(derive_seed(master_seed, "key", i))
        key = [rng.randrange(2) for _ in range(key_bits_per_instance)]
        heur = InsertionHeuristic(h.kind, derive_seed(master_seed, "sites", h.kind, i))
        locked, recs = lock(obfuscated, key, heur)
        post, log = resynthesize(locked, rules=rules)
        for rec in recs:
            anchor = key_net(rec.key_index)
            truth = extract_locality(locked, anchor, MIN_LOCALITY)
            level = classify_change(locked, post, rec, log)
            locs = {s: extract_locality(post, anchor, s) for s in ALL_SIZES}
            records.append(
                DatasetRecord(anchor, i, level, level != 1, truth, locs)
            )
    meta = {
        "instances": instances,
        "key_bits_per_instance": key_bits_per_instance,
        "heuristic": h.kind,
        "master_seed": master_seed,
    }
    return Dataset(records, meta)


# -- training ----------------------------------------------------------------------


@dataclass
class TrainedModels:
    forest: ForestModel
    ensemble: EnsembleModel
    catalog: LabelCatalog
    meta: dict = field(default_factory=dict)


def record_label(catalog: LabelCatalog, rec: DatasetRecord) -> int:
    if rec.truth.signature() == rec.localities[MIN_LOCALITY].signature():
        return NO_CHANGE
    return catalog.sig_to_label[rec.truth.signature()]


def train_models(d: Dataset, params: dict | None = None) -> TrainedModels:
    """Change-prediction forest (size-10 features) plus one network per size."""
    if not d.records:
        raise NetlistError("empty dataset")
    params = params or {}
    forest_params = dict(params.get("forest", {}))
    net_params = dict(params.get("network", {}))
    hidden = params.get("hidden", NETWORK_HIDDEN)
    seed = params.get("seed", 0)

    catalog = LabelCatalog.build([r.truth for r in d.records])
    labels = [record_label(catalog, r) for r in d.records]

    forest_params.setdefault("seed", derive_seed(seed, "forest"))
    forest = forest_train(
        [(encode(r.localities[MAX_LOCALITY]), r.changed) for r in d.records],
        forest_params,
    )

    members = {}
    for size in ALL_SIZES:
        arch = [feature_length(size), hidden, catalog.size]
        p = dict(net_params)
        p.setdefault("seed", derive_seed(seed, "net", size))
        data = [(encode(r.localities[size]), lab) for r, lab in zip(d.records, labels)]
        members[size] = network_train(data, arch, p)
        members[size].locality_size = size

    meta = {
        "post_signatures": sorted({r.localities[MIN_LOCALITY].signature() for r in d.records}),
        "distinct_labels": len(set(labels)),
        "degenerate": len(set(labels)) < 2,
        "records": len(d.records),
    }
    return TrainedModels(forest, EnsembleModel(members, catalog), catalog, meta)


# -- attack ------------------------------------------------------------------------


@dataclass
class AttackResult:
    anchor: str
    key_index: int
    predicted_changed: bool
    change_confidence: float
    label: int
    confidence: float
    predicted: Locality
    novel_signature: bool
    recovered_bit: object  # 0 | 1 | "unknown"
    diff: SnapshotDiff | None = None
    true_bit: int | None = None
    level: int | None = None

    def to_json(self) -> dict:
        out = {
            "anchor": self.anchor,
            "key_index": self.key_index,
            "predicted_changed": self.predicted_changed,
            "change_confidence": self.change_confidence,
            "label": self.label,
            "confidence": self.confidence,
            "predicted": self.predicted.to_json(),
            "novel_signature": self.novel_signature,
            "recovered_bit": self.recovered_bit,
        }
        if self.diff is not None:
            out["diff"] = {"gate_error": self.diff.gate_error, "link_error": self.diff.link_error}
            out["true_bit"] = self.true_bit
            out["level"] = self.level
        return out


def recover_key_bit(s: Locality):
    """Key bit implied by the inserted-gate shape at the anchor position.

    Bare XOR consuming the key input means bit 0; XOR feeding an inverter
    inside the snapshot, or an XNOR, means bit 1; anything else is unknown.
    """
    anchored = [i for i, t in enumerate(s.tags) if t[0] == 1]
    if not anchored:
        return "unknown"
    i = anchored[0]
    gtype = s.types[i]
    if gtype == "XNOR":
        return 1
    if gtype == "XOR":
        for j in range(s.size):
            if s.adjacency[i][j] and s.types[j] == "NOT":
                return 1
        return 0
    return "unknown"


BOOST_CONFIDENCE = 0.65  # leave-alone only when the forest is this sure


def run_attack(
    victim: Netlist,
    models: TrainedModels,
    boost: bool = True,
    boost_confidence: float = BOOST_CONFIDENCE,
) -> list:
    """Per key input: predict change, reconstruct the snapshot, read off the bit.

    With boost on, anchors the forest confidently calls unchanged keep their
    observed snapshot; everything else goes through the reconstruction
    ensemble (which can itself answer NO-CHANGE).
    """
    if not victim.key_inputs:
        raise NetlistError("victim has no key inputs")
    known_sigs = set(models.meta.get("post_signatures", ()))
    results = []
    for anchor in sorted(victim.key_inputs, key=key_index):
        locs = {s: extract_locality(victim, anchor, s) for s in ALL_SIZES}
        observed = locs[MIN_LOCALITY]
        changed, cconf = forest_predict(models.forest, encode(locs[MAX_LOCALITY]))
        if boost and not changed and cconf >= boost_confidence:
            label, conf = NO_CHANGE, cconf
            predicted = observed
        else:
            label, conf = ensemble_predict(models.ensemble, locs)
            predicted = models.catalog.snapshot_for(label, observed)
        results.append(
            AttackResult(
                anchor=anchor,
                key_index=key_index(anchor),
                predicted_changed=changed,
                change_confidence=cconf,
                label=label,
                confidence=conf,
                predicted=predicted,
                novel_signature=observed.signature() not in known_sigs,
                recovered_bit=recover_key_bit(predicted),
            )
        )
    return results


# -- evaluation harness (truth known because we created the victim) -----------------


@dataclass
class VictimCase:
    name: str
    original: Netlist
    locked: Netlist  # pre-resynthesis
    victim: Netlist  # post-resynthesis, what the attacker sees
    records: list
    log: RewriteLog
    key: tuple


def make_victim(
    original: Netlist, name: str, bits: int, h: InsertionHeuristic, seed: int, rules=None
) -> VictimCase:
    rng = random.Random(derive_seed(seed, "victim-key"))
    key = tuple(rng.randrange(2) for _ in range(bits))
    locked, records = lock(original, key, InsertionHeuristic(h.kind, derive_seed(seed, "victim-sites")))
    victim, log = resynthesize(locked, rules=rules)
    return VictimCase(name, original, locked, victim, records, log, key)


def attach_truth(results: list, case: VictimCase) -> list:
    """Fill per-anchor truth snapshot diff, true key bit, and change level."""
    by_index = {rec.key_index: rec for rec in case.records}
    for r in results:
        rec = by_index[r.key_index]
        truth = extract_locality(case.locked, r.anchor, MIN_LOCALITY)
        r.diff = snapshot_diff(r.predicted, truth)
        r.true_bit = rec.key_bit
        r.level = classify_change(case.locked, case.victim, rec, case.log)
    return results


def change_prediction_curve(
    d: Dataset, case: VictimCase, params: dict | None = None
) -> dict[int, float]:
    """Held-out change-prediction accuracy per locality size (percent).

    Trains one forest per size on the dataset and scores it on the victim's
    own anchors, whose ground truth comes from the victim's rewrite log.
    """
    params = params or {}
    seed = params.get("seed", 0)
    truth = {}
    for rec in case.records:
        anchor = key_net(rec.key_index)
        truth[anchor] = classify_change(case.locked, case.victim, rec, case.log) != 1
    curve = {}
    for size in ALL_SIZES:
        fp = dict(params.get("forest", {}))
        fp.setdefault("seed", derive_seed(seed, "cp-curve", size))
        forest = forest_train(
            [(encode(r.localities[size]), r.changed) for r in d.records], fp
        )
        hits = 0
        for anchor, is_changed in truth.items():
            feat = encode(extract_locality(case.victim, anchor, size))
            pred, _ = forest_predict(forest, feat)
            hits += int(pred == is_changed)
        curve[size] = 100.0 * hits / len(truth)
    return curve


# -- serialization ------------------------------------------------------------------


def dataset_dumps(d: Dataset) -> str:
    lines = [json.dumps({"schema": DATASET_SCHEMA, "meta": d.meta}, sort_keys=True)]
    lines += [json.dumps(r.to_json(), sort_keys=True) for r in d.records]
    return "\n".join(lines) + "\n"


def dataset_loads(text: str) -> Dataset:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise NetlistError("empty dataset file")
    head = json.loads(lines[0])
    if head.get("schema") != DATASET_SCHEMA:
        raise NetlistError(f"unexpected dataset schema {head.get('schema')!r}")
    return Dataset([DatasetRecord.from_json(json.loads(ln)) for ln in lines[1:]], head["meta"])
