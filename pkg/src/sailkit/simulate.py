"""Functional simulation, key binding, and equivalence checking.

Evaluation is bit-parallel: each net carries a Python int whose bits are
independent vectors, so exhaustive checks on <=16 inputs and 10k-vector
random checks are both cheap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import reduce

from ._util import fresh_name
from .netlist import Gate, GateType, Netlist, NetlistError

EXHAUSTIVE_PI_LIMIT = 16


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    vectors_tried: int
    first_counterexample: dict | None
    mode: str  # "exhaustive" or "random"


def _gate_value(gtype: GateType, vals: list[int], mask: int) -> int:
    if gtype is GateType.AND:
        return reduce(lambda a, b: a & b, vals)
    if gtype is GateType.NAND:
        return mask ^ reduce(lambda a, b: a & b, vals)
    if gtype is GateType.OR:
        return reduce(lambda a, b: a | b, vals)
    if gtype is GateType.NOR:
        return mask ^ reduce(lambda a, b: a | b, vals)
    if gtype is GateType.XOR:
        return reduce(lambda a, b: a ^ b, vals)
    if gtype is GateType.XNOR:
        return mask ^ reduce(lambda a, b: a ^ b, vals)
    if gtype is GateType.NOT:
        return mask ^ vals[0]
    return vals[0]  # BUFF


def evaluate_batch(n: Netlist, inputs: dict[str, int], width: int) -> dict[str, int]:
    """Evaluate `width` vectors at once; input values are bit masks."""
    terminals = set(n.primary_inputs) | set(n.key_inputs)
    missing = terminals - set(inputs)
    if missing:
        raise NetlistError(f"missing input bits for {sorted(missing)}")
    extra = set(inputs) - terminals
    if extra:
        raise NetlistError(f"assignment covers non-input nets {sorted(extra)}")
    mask = (1 << width) - 1
    vals = {net: v & mask for net, v in inputs.items()}
    for gid in n.topo_order():
        g = n.gates[gid]
        vals[gid] = _gate_value(g.gtype, [vals[net] for net in g.inputs], mask)
    return {po: vals[po] for po in n.primary_outputs}


def evaluate(n: Netlist, inputs: dict[str, int]) -> dict[str, int]:
    """Single-vector evaluation: bits in, bits out over the primary outputs."""
    for net, v in inputs.items():
        if v not in (0, 1):
            raise NetlistError(f"non-bit value {v!r} for net {net!r}")
    return evaluate_batch(n, inputs, 1)


# -- constant propagation ----------------------------------------------------------

# (gtype, const bit) -> ("drop" | "kill", payload). "drop" removes the const
# input, flipping the gate's phase for xor-family; "kill" forces the output.
_CONST_ACTIONS = {
    (GateType.AND, 1): ("drop", None),
    (GateType.AND, 0): ("kill", 0),
    (GateType.NAND, 1): ("drop", None),
    (GateType.NAND, 0): ("kill", 1),
    (GateType.OR, 0): ("drop", None),
    (GateType.OR, 1): ("kill", 1),
    (GateType.NOR, 0): ("drop", None),
    (GateType.NOR, 1): ("kill", 0),
}

# Gate type after dropping all inputs but one.
_SINGLE_INPUT_TYPE = {
    GateType.AND: GateType.BUFF,
    GateType.OR: GateType.BUFF,
    GateType.XOR: GateType.BUFF,
    GateType.NAND: GateType.NOT,
    GateType.NOR: GateType.NOT,
    GateType.XNOR: GateType.NOT,
}

# Output value when every input was constant, per remaining phase.
_EMPTY_VALUE = {
    GateType.AND: 1,
    GateType.NAND: 0,
    GateType.OR: 0,
    GateType.NOR: 1,
    GateType.XOR: 0,
    GateType.XNOR: 1,
}


def specialize_gate(gtype: GateType, inputs: tuple[str, ...], consts: dict[str, int]):
    """Resolve known-constant inputs of one gate.

    Returns ("const", bit) when the output is forced, or (new_type, new_inputs)
    for the simplified gate. Identity (no const inputs) returns the gate as-is.
    """
    if gtype is GateType.NOT and inputs[0] in consts:
        return ("const", 1 - consts[inputs[0]])
    if gtype is GateType.BUFF and inputs[0] in consts:
        return ("const", consts[inputs[0]])

    remaining = [net for net in inputs if net not in consts]
    if len(remaining) == len(inputs):
        return (gtype, tuple(inputs))

    if gtype in (GateType.XOR, GateType.XNOR):
        phase = sum(consts[net] for net in inputs if net in consts) % 2
        eff = gtype
        if phase:
            eff = GateType.XNOR if gtype is GateType.XOR else GateType.XOR
        if not remaining:
            return ("const", _EMPTY_VALUE[eff])
        if len(remaining) == 1:
            return (_SINGLE_INPUT_TYPE[eff], tuple(remaining))
        return (eff, tuple(remaining))

    for net in inputs:
        if net in consts:
            action, payload = _CONST_ACTIONS[(gtype, consts[net])]
            if action == "kill":
                return ("const", payload)
    if not remaining:
        return ("const", _EMPTY_VALUE[gtype])
    if len(remaining) == 1:
        return (_SINGLE_INPUT_TYPE[gtype], tuple(remaining))
    return (gtype, tuple(remaining))


def bind_key(n: Netlist, key) -> Netlist:
    """Substitute key inputs with constant bits and fold them into consumers.

    Propagation is limited to constants: gates fed by a constant net are
    specialized (XOR with 0 -> BUFF, XOR with 1 -> NOT, ...), cascading only
    along nets that become constant themselves. A primary output that ends up
    constant is materialized as XOR(p,p) / XNOR(p,p) over the first primary
    input, since the gate library has no constant cells.
    """
    bits = _normalize_key(key)
    if len(bits) != len(n.key_inputs):
        raise NetlistError(
            f"key length {len(bits)} != number of key inputs {len(n.key_inputs)}"
        )
    consts = {net: bit for net, bit in zip(n.key_inputs, bits)}
    gates: dict[str, Gate] = {}
    for gid in n.topo_order():
        g = n.gates[gid]
        res = specialize_gate(g.gtype, g.inputs, consts)
        if res[0] == "const":
            consts[gid] = res[1]
        else:
            gtype, inputs = res
            gates[gid] = Gate(gtype, inputs, gid)

    used = set(n.primary_inputs) | set(gates)
    for po in n.primary_outputs:
        if po in consts and po not in gates:
            if not n.primary_inputs:
                raise NetlistError(f"cannot materialize constant output {po!r}")
            pi = n.primary_inputs[0]
            gtype = GateType.XNOR if consts[po] else GateType.XOR
            gates[po] = Gate(gtype, (pi, pi), po)
            used.add(po)
    return Netlist(n.primary_inputs, (), n.primary_outputs, gates)


def _normalize_key(key) -> tuple[int, ...]:
    if isinstance(key, str):
        if not set(key) <= {"0", "1"}:
            raise NetlistError(f"bad key string {key!r}")
        return tuple(int(c) for c in key)
    bits = tuple(int(b) for b in key)
    if not set(bits) <= {0, 1}:
        raise NetlistError("key bits must be 0/1")
    return bits


# -- equivalence -------------------------------------------------------------------


def _exhaustive_masks(pis: list[str]) -> tuple[dict[str, int], int]:
    width = 1 << len(pis)
    masks = {}
    for i, name in enumerate(pis):
        period = 1 << (i + 1)
        unit = ((1 << (1 << i)) - 1) << (1 << i)
        reps = ((1 << width) - 1) // ((1 << period) - 1)
        masks[name] = unit * reps
    return masks, width


def check_equivalence(
    a: Netlist, b: Netlist, budget: int = 10000, seed: int = 0
) -> EquivalenceReport:
    """Compare two key-free netlists over their shared PI/PO interface.

    Exhaustive for <=16 primary inputs (a proof); otherwise `budget` seeded
    random vectors (statistical only, recorded in `mode`).
    """
    if a.key_inputs or b.key_inputs:
        raise NetlistError("interface mismatch: key inputs present")
    if set(a.primary_inputs) != set(b.primary_inputs):
        raise NetlistError("interface mismatch: primary inputs differ")
    if set(a.primary_outputs) != set(b.primary_outputs):
        raise NetlistError("interface mismatch: primary outputs differ")

    pis = sorted(a.primary_inputs)
    if len(pis) <= EXHAUSTIVE_PI_LIMIT:
        masks, width = _exhaustive_masks(pis)
        mode = "exhaustive"
    else:
        width = budget
        rng = random.Random(seed)
        masks = {name: rng.getrandbits(width) for name in pis}
        mode = "random"

    ya = evaluate_batch(a, masks, width)
    yb = evaluate_batch(b, masks, width)
    diff = 0
    for po in sorted(set(a.primary_outputs)):
        diff |= ya[po] ^ yb[po]
    if diff == 0:
        return EquivalenceReport(True, width, None, mode)
    v = (diff & -diff).bit_length() - 1
    cex = {name: (masks[name] >> v) & 1 for name in pis}
    return EquivalenceReport(False, v + 1, cex, mode)
