#!/usr/bin/env python3
"""Regenerate the bundled benchmark suite (deterministic; commit the outputs).

rnd_* are raw generator circuits; syn_* are the same circuits after a full
re-synthesis pass, standing in for already-optimized production netlists.
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from sailkit.netlist import write_bench
from sailkit.random_circuits import random_netlist
from sailkit.rewrite import resynthesize

C17 = """# c17 (ISCAS-85)
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
"""

SPECS = [
    ("rnd_a", 240, 12, 6, 1),
    ("rnd_b", 300, 14, 6, 2),
    ("rnd_c", 360, 16, 8, 3),
    ("rnd_big", 2800, 40, 16, 77),
]

# key bits for the default evaluation sweep, per circuit
EVAL_BITS = {"syn_a": 32, "syn_b": 48, "syn_c": 64, "syn_big": 64}
CENSUS_BITS = {"rnd_a": 32, "rnd_b": 48, "rnd_c": 64}


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "benchmarks"
    out_dir.mkdir(exist_ok=True)
    (out_dir / "c17.bench").write_text(C17)
    manifest = {"c17": {"file": "c17.bench", "kind": "iscas"}}
    for name, gates, pis, pos, seed in SPECS:
        raw = random_netlist(gates, n_inputs=pis, n_outputs=pos, seed=seed)
        (out_dir / f"{name}.bench").write_text(write_bench(raw))
        syn_name = name.replace("rnd", "syn")
        syn, _ = resynthesize(raw)
        (out_dir / f"{syn_name}.bench").write_text(write_bench(syn))
        manifest[name] = {
            "file": f"{name}.bench",
            "kind": "raw",
            "gates": len(raw.gates),
            "seed": seed,
            "census_bits": CENSUS_BITS.get(name),
        }
        manifest[syn_name] = {
            "file": f"{syn_name}.bench",
            "kind": "synthesized",
            "gates": len(syn.gates),
            "seed": seed,
            "eval_bits": EVAL_BITS.get(syn_name),
        }
    (out_dir / "suite.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for name, info in sorted(manifest.items()):
        print(name, info)


if __name__ == "__main__":
    main()
