"""Logic locking, deterministic re-synthesis emulation, and structural key-gate
recovery (the SAIL attack) for gate-level bench netlists."""

__version__ = "0.1.0"

from .netlist import (
    BenchSyntaxError,
    Gate,
    GateType,
    Netlist,
    NetlistError,
    export_dot,
    parse_bench,
    subgraph_signature,
    topo_order,
    write_bench,
)
from .simulate import EquivalenceReport, bind_key, check_equivalence, evaluate
from .locking import InsertionHeuristic, KeyGateRecord, SiteExhaustionError, lock, select_sites
from .rewrite import (
    RewriteLog,
    RewriteRule,
    builtin_rules,
    classify_change,
    enumerate_transformations,
    replay_log,
    resynthesize,
)
from .locality import Locality, Snapshot, SnapshotDiff, encode, extract_locality, snapshot_diff
from .learners import (
    EnsembleModel,
    ForestModel,
    LabelCatalog,
    NetworkModel,
    ensemble_predict,
    forest_predict,
    forest_train,
    network_predict,
    network_train,
)
from .pipeline import (
    AttackResult,
    Dataset,
    DatasetRecord,
    TrainedModels,
    generate_dataset,
    recover_key_bit,
    run_attack,
    train_models,
)
from .metrics import RecoveryRow, aggregate, emit_report, r_metric
from .random_circuits import random_netlist
