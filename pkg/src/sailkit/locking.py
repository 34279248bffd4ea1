"""Key-gate insertion: site-selection heuristics and XOR locking.

Locking cuts a net and re-drives its consumers through XOR(net, keyinput)
for key bit 0, adding an inverter after the XOR for key bit 1, so the locked
netlist computes the original function exactly when the right key is applied.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ._util import fresh_name
from .netlist import Gate, GateType, Netlist, NetlistError, key_index, key_net
from .simulate import _normalize_key

HEURISTIC_KINDS = ("rnd", "cs", "cy", "sll")


class SiteExhaustionError(NetlistError):
    pass


@dataclass(frozen=True)
class InsertionHeuristic:
    kind: str = "rnd"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in HEURISTIC_KINDS:
            raise NetlistError(f"unknown heuristic {self.kind!r}")


@dataclass(frozen=True)
class KeyGateRecord:
    key_index: int
    key_bit: int
    anchor_net: str
    inserted_gate_ids: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "key_index": self.key_index,
            "key_bit": self.key_bit,
            "anchor_net": self.anchor_net,
            "inserted_gate_ids": list(self.inserted_gate_ids),
        }

    @classmethod
    def from_json(cls, d: dict) -> "KeyGateRecord":
        return cls(d["key_index"], d["key_bit"], d["anchor_net"], tuple(d["inserted_gate_ids"]))


def eligible_sites(n: Netlist) -> list[str]:
    """Nets a key-gate may cut, sorted by name.

    Gate outputs and primary inputs qualify, except nets that already feed a
    key-gate, nets with an inverter consumer (keeps key-bit recovery from the
    inserted-gate shape unambiguous), and input nets aliased directly to a
    primary output (no spot to splice without renaming the interface).
    """
    key_set = set(n.key_inputs)
    po_set = set(n.primary_outputs)
    out = []
    for net in list(n.primary_inputs) + sorted(n.gates):
        cons = n.consumers(net)
        skip = False
        for c in cons:
            g = n.gates[c]
            if key_set & set(g.inputs):
                skip = True  # already feeds a key-gate
                break
            if g.gtype is GateType.NOT:
                skip = True
                break
        if skip:
            continue
        if net not in n.gates and net in po_set:
            continue
        out.append(net)
    return sorted(out)


def _fanin_cone(n: Netlist, net: str, memo: dict) -> frozenset:
    """Gates transitively driving `net`."""
    if net in memo:
        return memo[net]
    g = n.gates.get(net)
    if g is None:
        cone = frozenset()
    else:
        cone = frozenset({net}).union(*(_fanin_cone(n, i, memo) for i in g.inputs))
    memo[net] = cone
    return cone


def _fanout_cone(n: Netlist, net: str, memo: dict) -> frozenset:
    """Gates transitively consuming `net`."""
    if net in memo:
        return memo[net]
    cone = set()
    for c in n.consumers(net):
        cone.add(c)
        cone |= _fanout_cone(n, c, memo)
    memo[net] = frozenset(cone)
    return memo[net]


def select_sites(n: Netlist, count: int, h: InsertionHeuristic) -> list[str]:
    """Choose `count` distinct insertion nets under the given heuristic."""
    elig = eligible_sites(n)
    if count > len(elig):
        raise SiteExhaustionError(
            f"requested {count} sites but only {len(elig)} eligible nets"
        )
    if count < 0:
        raise NetlistError("negative site count")
    rng = random.Random(h.seed)

    if h.kind == "rnd":
        return rng.sample(elig, count)

    if h.kind == "cs":
        memo: dict = {}
        ranked = sorted(elig, key=lambda s: (-len(_fanin_cone(n, s, memo)), s))
        return ranked[:count]

    if h.kind == "cy":
        fin: dict = {}
        fout: dict = {}
        remaining = list(elig)
        sites: list[str] = []
        while len(sites) < count:
            a = rng.choice(remaining)
            remaining.remove(a)
            sites.append(a)
            if len(sites) == count:
                break
            along = _fanin_cone(n, a, fin) | _fanout_cone(n, a, fout)
            partners = [s for s in remaining if s in along or a in _fanin_cone(n, s, fin)]
            if partners:
                b = rng.choice(sorted(partners))
                remaining.remove(b)
                sites.append(b)
        return sites

    # sll: greedy, preferring nets whose fan-out cones overlap already-chosen cones
    fout = {}
    cones = {s: _fanout_cone(n, s, fout) for s in elig}
    remaining = list(elig)
    first = max(remaining, key=lambda s: (len(cones[s]), s))
    sites = [first]
    remaining.remove(first)
    covered = set(cones[first])
    while len(sites) < count:
        nxt = max(remaining, key=lambda s: (len(cones[s] & covered), len(cones[s]), s))
        sites.append(nxt)
        remaining.remove(nxt)
        covered |= cones[nxt]
    return sites


def lock(n: Netlist, key, h: InsertionHeuristic) -> tuple[Netlist, list[KeyGateRecord]]:
    """Insert one key-gate per key bit; returns the locked netlist and provenance.

    Key inputs continue the existing keyinput<N> numbering, so locking an
    already-locked netlist (pseudo-self-referencing) extends the key.
    """
    bits = _normalize_key(key)
    sites = select_sites(n, len(bits), h)
    pis, keys, pos, gates = n.parts()
    used = set(pis) | set(keys) | set(gates)

    existing = [key_index(k) for k in keys]
    base_idx = max(existing, default=-1) + 1

    records = []
    for offset, (site, bit) in enumerate(zip(sites, bits)):
        idx = base_idx + offset
        kname = key_net(idx)
        used.add(kname)
        keys.append(kname)
        if site in gates:
            # Rename the driver's output; the key-gate chain takes over `site`.
            drv = gates.pop(site)
            pre = fresh_name(f"{site}_cut", used)
            gates[pre] = Gate(drv.gtype, drv.inputs, pre)
            if bit == 0:
                gates[site] = Gate(GateType.XOR, (pre, kname), site)
                inserted = (site,)
            else:
                mid = fresh_name(f"{site}_enc", used)
                gates[mid] = Gate(GateType.XOR, (pre, kname), mid)
                gates[site] = Gate(GateType.NOT, (mid,), site)
                inserted = (mid, site)
        else:
            # Primary-input site: splice after the input, rewiring its readers.
            keyed = fresh_name(f"{site}_keyed", used)
            for gid, g in list(gates.items()):
                if site in g.inputs:
                    gates[gid] = Gate(
                        g.gtype, tuple(keyed if i == site else i for i in g.inputs), gid
                    )
            if bit == 0:
                gates[keyed] = Gate(GateType.XOR, (site, kname), keyed)
                inserted = (keyed,)
            else:
                mid = fresh_name(f"{site}_enc", used)
                gates[mid] = Gate(GateType.XOR, (site, kname), mid)
                gates[keyed] = Gate(GateType.NOT, (mid,), keyed)
                inserted = (mid, keyed)
        records.append(KeyGateRecord(idx, bit, site, inserted))

    return Netlist(pis, keys, pos, gates), records
