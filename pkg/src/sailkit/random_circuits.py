"""Seeded random combinational circuits for benchmarks and property tests.

Circuits are built mostly from a small pool of repeated cell motifs
(half/full adders, parity pairs, and-or selects), the way real designs
repeat structure; a tunable fraction of free random gates and reducible
clusters (inverter chains, inverter-fed gates) is mixed in so re-synthesis
has realistic work to do.
"""

from __future__ import annotations

import random

from .netlist import Gate, GateType, Netlist

_BINARY = [GateType.AND, GateType.NAND, GateType.OR, GateType.NOR, GateType.XOR, GateType.XNOR]


class _Builder:
    def __init__(self, seed: int, n_inputs: int):
        self.rng = random.Random(seed)
        self.pis = [f"pi{i}" for i in range(n_inputs)]
        self.nets = list(self.pis)
        self.gates: dict[str, Gate] = {}
        self.ctr = 0

    def pick(self, k: int) -> list[str]:
        pool = self.nets[-30:] if len(self.nets) > 30 and self.rng.random() < 0.7 else self.nets
        return self.rng.sample(pool, min(k, len(pool)))

    def add(self, gtype: GateType, inputs) -> str:
        self.ctr += 1
        out = f"n{self.ctr:04d}"
        self.gates[out] = Gate(gtype, tuple(inputs), out)
        self.nets.append(out)
        return out


def _motif_half_adder(b: _Builder):
    a, c = (b.pick(2) + b.pis)[:2]
    b.add(GateType.XOR, [a, c])
    b.add(GateType.AND, [a, c])


def _motif_full_adder(b: _Builder):
    ins = (b.pick(3) + b.pis)[:3]
    a, c, cin = ins[0], ins[1], ins[2]
    t = b.add(GateType.XOR, [a, c])
    b.add(GateType.XOR, [t, cin])
    g = b.add(GateType.AND, [a, c])
    p = b.add(GateType.AND, [t, cin])
    b.add(GateType.OR, [g, p])


def _motif_parity(b: _Builder):
    ins = (b.pick(3) + b.pis)[:3]
    t = b.add(GateType.XOR, [ins[0], ins[1]])
    b.add(GateType.XNOR, [t, ins[2]])


def _motif_select(b: _Builder):
    ins = (b.pick(3) + b.pis)[:3]
    u = b.add(GateType.NAND, [ins[0], ins[1]])
    v = b.add(GateType.NAND, [ins[1], ins[2]])
    b.add(GateType.NAND, [u, v])


_MOTIFS = (_motif_full_adder, _motif_half_adder, _motif_parity, _motif_select)


def random_netlist(
    n_gates: int,
    n_inputs: int = 8,
    n_outputs: int = 4,
    seed: int = 0,
    p_motif: float = 0.65,
    p_not: float = 0.10,
    p_pair: float = 0.08,
) -> Netlist:
    """Random DAG of roughly `n_gates` gates (motifs may slightly overshoot)."""
    b = _Builder(seed, n_inputs)
    while len(b.gates) < n_gates:
        roll = b.rng.random()
        if roll < p_motif:
            b.rng.choice(_MOTIFS)(b)
        elif roll < p_motif + p_pair and len(b.gates) + 3 <= n_gates:
            kind = b.rng.randrange(3)
            if kind == 0:  # inverter chain
                a = b.pick(1)[0]
                b.add(GateType.NOT, [b.add(GateType.NOT, [a])])
            elif kind == 1:  # inverter behind a symmetric gate
                ins = (b.pick(2) + b.pis)[:2]
                inv = b.add(GateType.NOT, [ins[0]])
                b.add(b.rng.choice(_BINARY), [inv, ins[1]])
            else:  # two inverters into one gate
                ins = (b.pick(2) + b.pis)[:2]
                b.add(
                    b.rng.choice([GateType.AND, GateType.OR, GateType.NAND, GateType.NOR]),
                    [b.add(GateType.NOT, [ins[0]]), b.add(GateType.NOT, [ins[1]])],
                )
        elif roll < p_motif + p_pair + p_not:
            b.add(GateType.NOT, b.pick(1))
        else:
            gtype = b.rng.choice(_BINARY)
            ins = b.pick(2)
            if len(ins) < 2 or ins[0] == ins[1]:
                ins = [ins[0], b.rng.choice([p for p in b.pis if p != ins[0]])]
            b.add(gtype, ins)

    gate_nets = list(b.gates)
    tail = gate_nets[-max(n_outputs * 3, n_outputs):]
    pos = b.rng.sample(tail, min(n_outputs, len(tail)))
    return Netlist(b.pis, [], pos, b.gates)
