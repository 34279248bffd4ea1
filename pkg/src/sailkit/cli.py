"""Command-line front end: lock, resynth, dataset, train, attack, eval, report.

Every artifact embeds the resolved run configuration and tool version, and
identical invocations produce byte-identical files. Exit codes: 0 success,
1 usage error, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import __version__
from ._util import derive_seed
from .locking import HEURISTIC_KINDS, InsertionHeuristic, KeyGateRecord, lock
from .metrics import aggregate, emit_report, render_csv, RecoveryRow
from .netlist import BenchSyntaxError, Netlist, NetlistError, export_dot, parse_bench, write_bench
from .pipeline import (
    attach_truth,
    change_prediction_curve,
    dataset_dumps,
    dataset_loads,
    generate_dataset,
    make_victim,
    run_attack,
    train_models,
    TrainedModels,
)
from .learners import models_dumps, models_loads, EnsembleModel, LabelCatalog
from .rewrite import LogEntry, RewriteLog, replay_log, resynthesize

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

LOG_SCHEMA = "sail-rewritelog/1"
ATTACK_SCHEMA = "sail-attack/1"
SIDECAR_SCHEMA = "sail-keyrecords/1"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _read_bench(path: str) -> Netlist:
    return parse_bench(Path(path).read_text())


def _config_header(cfg: dict) -> str:
    lines = [f"# sailkit {k} = {v}" for k, v in sorted(cfg.items())]
    return "\n".join(lines) + "\n"


def _load_config_file(path: str) -> dict:
    """Flat key = value lines; '#' comments allowed."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise NetlistError(f"config line {ln}: expected key = value")
        k, v = (part.strip() for part in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _merge_config(args: argparse.Namespace, spec: dict) -> dict:
    """Resolve options as: explicit flag > config file > default."""
    file_cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = {}
    for name, (caster, default) in spec.items():
        val = getattr(args, name, None)
        if val is None:
            raw = file_cfg.get(name)
            val = caster(raw) if raw is not None else default
        cfg[name] = val
    cfg["version"] = __version__
    return cfg


def _bool(text) -> bool:
    return str(text).lower() in ("1", "true", "yes", "on")


def _key_bits(cfg: dict, n_bits: int) -> str:
    if cfg.get("key"):
        if len(cfg["key"]) != n_bits:
            raise NetlistError(f"--key length {len(cfg['key'])} != --bits {n_bits}")
        return cfg["key"]
    rng = random.Random(derive_seed(cfg["seed"], "cli-key"))
    return "".join(str(rng.randrange(2)) for _ in range(n_bits))


def _learner_params(cfg: dict) -> dict:
    return {
        "seed": cfg["seed"],
        "hidden": cfg["hidden"],
        "forest": {"trees": cfg["trees"], "max_depth": cfg["depth"], "min_leaf": cfg["min_leaf"]},
        "network": {
            "epochs": cfg["epochs"],
            "batch": cfg["batch"],
            "learning_rate": cfg["rate"],
        },
    }


# -- subcommands -------------------------------------------------------------------


def cmd_lock(args) -> int:
    cfg = _merge_config(
        args,
        {
            "infile": (str, None),
            "out": (str, None),
            "bits": (int, 8),
            "heuristic": (str, "rnd"),
            "seed": (int, 0),
            "key": (str, None),
            "workers": (int, 1),
        },
    )
    n = _read_bench(cfg["infile"])
    key = _key_bits(cfg, cfg["bits"])
    locked, records = lock(n, key, InsertionHeuristic(cfg["heuristic"], cfg["seed"]))
    header_cfg = {k: v for k, v in cfg.items() if k != "key"}
    Path(cfg["out"]).write_text(_config_header(header_cfg) + write_bench(locked))
    sidecar = {
        "schema": SIDECAR_SCHEMA,
        "config": header_cfg,
        "key": key,
        "records": [r.to_json() for r in records],
    }
    Path(cfg["out"] + ".key.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"locked {cfg['infile']} with {cfg['bits']} key bits -> {cfg['out']}")
    return EXIT_OK


def cmd_resynth(args) -> int:
    cfg = _merge_config(
        args,
        {
            "infile": (str, None),
            "out": (str, None),
            "max_passes": (int, 10),
            "workers": (int, 1),
        },
    )
    n = _read_bench(cfg["infile"])
    post, log = resynthesize(n, max_passes=cfg["max_passes"])
    Path(cfg["out"]).write_text(_config_header(cfg) + write_bench(post))
    head = {
        "schema": LOG_SCHEMA,
        "config": cfg,
        "converged": log.converged,
        "passes": log.passes,
    }
    lines = [json.dumps(head, sort_keys=True)]
    lines += [json.dumps(e.to_json(), sort_keys=True) for e in log.entries]
    Path(cfg["out"] + ".log.jsonl").write_text("\n".join(lines) + "\n")
    print(f"rewrote {cfg['infile']}: {len(log.entries)} rule applications, "
          f"{'converged' if log.converged else 'pass limit hit'} -> {cfg['out']}")
    return EXIT_OK


def read_rewrite_log(path: str) -> RewriteLog:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = json.loads(lines[0])
    if head.get("schema") != LOG_SCHEMA:
        raise NetlistError(f"unexpected log schema {head.get('schema')!r}")
    entries = tuple(LogEntry.from_json(json.loads(ln)) for ln in lines[1:])
    return RewriteLog(entries, head["converged"], head["passes"])


def cmd_dataset(args) -> int:
    cfg = _merge_config(
        args,
        {
            "infile": (str, None),
            "out": (str, None),
            "instances": (int, 3),
            "bits": (int, 8),
            "heuristic": (str, "rnd"),
            "seed": (int, 0),
            "workers": (int, 1),
        },
    )
    victim = _read_bench(cfg["infile"])
    ds = generate_dataset(
        victim, cfg["instances"], cfg["bits"], InsertionHeuristic(cfg["heuristic"]), cfg["seed"]
    )
    ds.meta["config"] = cfg
    Path(cfg["out"]).write_text(dataset_dumps(ds))
    print(f"generated {len(ds.records)} records -> {cfg['out']}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _merge_config(
        args,
        {
            "dataset": (str, None),
            "out": (str, None),
            "seed": (int, 0),
            "hidden": (int, 128),
            "trees": (int, 100),
            "depth": (int, 12),
            "min_leaf": (int, 2),
            "epochs": (int, 200),
            "batch": (int, 32),
            "rate": (float, 0.01),
            "workers": (int, 1),
        },
    )
    ds = dataset_loads(Path(cfg["dataset"]).read_text())
    models = train_models(ds, _learner_params(cfg))
    meta = dict(models.meta)
    meta["config"] = cfg
    Path(cfg["out"]).write_text(models_dumps(models.forest, models.ensemble, meta) + "\n")
    print(f"trained on {len(ds.records)} records "
          f"({models.catalog.size} labels) -> {cfg['out']}")
    return EXIT_OK


def cmd_attack(args) -> int:
    cfg = _merge_config(
        args,
        {
            "infile": (str, None),
            "models": (str, None),
            "out": (str, None),
            "boost": (_bool, True),
            "dot": (str, None),
            "workers": (int, 1),
        },
    )
    victim = _read_bench(cfg["infile"])
    forest, ensemble, meta = models_loads(Path(cfg["models"]).read_text())
    models = TrainedModels(forest, ensemble, ensemble.catalog, meta)
    results = run_attack(victim, models, boost=cfg["boost"])
    doc = {
        "schema": ATTACK_SCHEMA,
        "config": cfg,
        "results": [r.to_json() for r in results],
    }
    Path(cfg["out"]).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if cfg["dot"]:
        colors = {}
        for r in results:
            colors[r.anchor] = "cyan"
            tint = "green" if not r.novel_signature else "red"
            for gid in _anchor_gates(victim, r.anchor):
                colors[gid] = tint
        Path(cfg["dot"]).write_text(export_dot(victim, colors))
    bits = "".join(str(r.recovered_bit) if r.recovered_bit != "unknown" else "?" for r in results)
    print(f"attacked {len(results)} key inputs -> {cfg['out']} (key guess: {bits})")
    return EXIT_OK


def _anchor_gates(victim: Netlist, anchor: str):
    from .locality import locality_gates

    return locality_gates(victim, anchor, 3)


def cmd_eval(args) -> int:
    cfg = _merge_config(
        args,
        {
            "infile": (str, None),
            "out": (str, None),
            "name": (str, None),
            "bits": (int, 32),
            "heuristic": (str, "rnd"),
            "seed": (int, 0),
            "instances": (int, 3),
            "boost": (_bool, True),
            "sweep_key_ratio": (str, None),
            "seed_sweep": (int, 1),
            "with_cp_curve": (_bool, True),
            "hidden": (int, 128),
            "trees": (int, 100),
            "depth": (int, 12),
            "min_leaf": (int, 2),
            "epochs": (int, 200),
            "batch": (int, 32),
            "rate": (float, 0.01),
            "workers": (int, 1),
        },
    )
    original = _read_bench(cfg["infile"])
    name = cfg["name"] or Path(cfg["infile"]).stem
    ratios = [1.0]
    if cfg["sweep_key_ratio"]:
        ratios = [float(x) for x in cfg["sweep_key_ratio"].split(",") if x.strip()]
    rows = [
        evaluate_circuit(
            original,
            name,
            max(1, round(cfg["bits"] * ratio)),
            InsertionHeuristic(cfg["heuristic"]),
            derive_seed(cfg["seed"], "eval", ratio),
            _learner_params(cfg),
            instances=cfg["instances"],
            boost=cfg["boost"],
            key_ratio=ratio,
            with_cp_curve=cfg["with_cp_curve"],
        )
        for ratio in ratios
    ]
    emit_report(rows, cfg["out"] + ".csv", "csv")
    emit_report(rows, cfg["out"] + ".json", "json", config=cfg)
    for row in rows:
        print(
            f"{row.circuit} x{row.key_ratio:g} ({row.heuristic}): "
            f"GE0={row.ge[0]:.2f} GE1={row.ge[1]:.2f} GE2={row.ge[2]:.2f} R={row.r:.2f}"
        )
    return EXIT_OK


def evaluate_circuit(
    original: Netlist,
    name: str,
    bits: int,
    h: InsertionHeuristic,
    seed: int,
    params: dict,
    instances: int = 3,
    boost: bool = True,
    key_ratio: float = 1.0,
    with_cp_curve: bool = True,
) -> RecoveryRow:
    """Lock, re-synthesize, attack with pseudo-self-referencing, and score.

    Training instances always use random insertion (the victim heuristic only
    shapes the test anchors), mirroring how the attack would be mounted.
    """
    case = make_victim(original, name, bits, h, seed)
    ds = generate_dataset(
        case.victim, instances, bits, InsertionHeuristic("rnd"), derive_seed(seed, "dataset")
    )
    models = train_models(ds, params)
    results = attach_truth(run_attack(case.victim, models, boost=boost), case)
    curve = change_prediction_curve(ds, case, params) if with_cp_curve else None
    return aggregate(results, name, cp_acc=curve, heuristic=h.kind, key_ratio=key_ratio)


def cmd_report(args) -> int:
    cfg = _merge_config(args, {"infile": (str, None), "out": (str, None)})
    doc = json.loads(Path(cfg["infile"]).read_text())
    if doc.get("schema") != "sail-report/1":
        raise NetlistError(f"unexpected report schema {doc.get('schema')!r}")
    rows = []
    for rj in doc["rows"]:
        rows.append(
            RecoveryRow(
                circuit=rj["circuit"],
                anchors=rj["anchors"],
                ge=(rj["ge0"], rj["ge1"], rj["ge2"]),
                r=rj["r_metric"],
                levels={int(k): (v["complete"], v["total"]) for k, v in rj["levels"].items()},
                cp_acc={int(k): v for k, v in rj.get("cp_acc", {}).items()},
                heuristic=rj.get("heuristic", "rnd"),
                key_ratio=rj.get("key_ratio", 1.0),
            )
        )
    Path(cfg["out"]).write_text(render_csv(rows))
    print(f"rendered {len(rows)} rows -> {cfg['out']}")
    return EXIT_OK


# -- wiring ------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="sailkit", description=__doc__)
    p.add_argument("--version", action="version", version=f"sailkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value config file; flags win")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)

    sp = sub.add_parser("lock", help="insert key gates")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--bits", type=int)
    sp.add_argument("--heuristic", choices=HEURISTIC_KINDS)
    sp.add_argument("--key", help="explicit key bits (default: seeded random)")
    common(sp)
    sp.set_defaults(func=cmd_lock)

    sp = sub.add_parser("resynth", help="apply the rewrite engine")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-passes", dest="max_passes", type=int)
    common(sp)
    sp.set_defaults(func=cmd_resynth)

    sp = sub.add_parser("dataset", help="pseudo-self-referencing training data")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--bits", type=int)
    sp.add_argument("--heuristic", choices=HEURISTIC_KINDS)
    common(sp)
    sp.set_defaults(func=cmd_dataset)

    sp = sub.add_parser("train", help="train forest + reconstruction ensemble")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    for flag, typ in (("--hidden", int), ("--trees", int), ("--depth", int),
                      ("--min-leaf", int), ("--epochs", int), ("--batch", int), ("--rate", float)):
        sp.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("attack", help="recover snapshots and key bits")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--models", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--boost", dest="boost", action="store_const", const=True)
    sp.add_argument("--no-boost", dest="boost", action="store_const", const=False)
    sp.add_argument("--dot", help="write a recovery overlay in DOT format")
    common(sp)
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("eval", help="end-to-end evaluation with known truth")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True, help="report path stem (.csv/.json added)")
    sp.add_argument("--name")
    sp.add_argument("--bits", type=int)
    sp.add_argument("--heuristic", choices=HEURISTIC_KINDS)
    sp.add_argument("--instances", type=int)
    sp.add_argument("--boost", dest="boost", action="store_const", const=True)
    sp.add_argument("--no-boost", dest="boost", action="store_const", const=False)
    sp.add_argument("--sweep-key-ratio", dest="sweep_key_ratio",
                    help="comma list, e.g. 0.5,1,2,3")
    sp.add_argument("--no-cp-curve", dest="with_cp_curve", action="store_const", const=False)
    for flag, typ in (("--hidden", int), ("--trees", int), ("--depth", int),
                      ("--min-leaf", int), ("--epochs", int), ("--batch", int), ("--rate", float)):
        sp.add_argument(flag, dest=flag[2:].replace("-", "_"), type=typ)
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("report", help="render a JSON report as CSV")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NetlistError, BenchSyntaxError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # invariant violations and genuine bugs
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
