"""Key-gate localities: extraction, canonical ordering, feature encoding, diffing.

A locality is the n-gate connected neighborhood of a key input (n = 3..10),
grown breadth-first from the key input's consumer gate, fan-in before fan-out.
Gate positions are canonicalized from structure alone, so two localities with
the same shape encode identically no matter how their nets are named. The
fixed 3-gate form is the snapshot that reconstruction predicts.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

import numpy as np

from .netlist import (
    ROLE_ANCHOR,
    ROLE_IN,
    ROLE_OUT,
    GateType,
    Netlist,
    NetlistError,
    TYPE_RANK,
    _encode_subgraph,
)

EMPTY = "EMPTY"
MIN_LOCALITY = 3
MAX_LOCALITY = 10

TAG_NAMES = ("key-input", "external-in", "external-out", "internal")


@dataclass(frozen=True)
class Locality:
    anchor: str
    size: int
    types: tuple[str, ...]
    adjacency: tuple[tuple[int, ...], ...]  # row drives column
    tags: tuple[tuple[int, int, int, int], ...]  # key-in, ext-in, ext-out, internal
    depths: tuple[int, ...]
    disconnected: bool = False

    def signature(self) -> str:
        adj = "".join(str(b) for row in self.adjacency for b in row)
        tags = "".join("".join(map(str, t)) for t in self.tags)
        depths = ",".join(map(str, self.depths))
        flag = "~" if self.disconnected else ""
        return f"L{self.size}{flag}|{','.join(self.types)}|{adj}|{tags}|{depths}"

    def to_json(self) -> dict:
        return {
            "anchor": self.anchor,
            "size": self.size,
            "types": list(self.types),
            "adjacency": [list(r) for r in self.adjacency],
            "tags": [list(t) for t in self.tags],
            "depths": list(self.depths),
            "disconnected": self.disconnected,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Locality":
        return cls(
            d["anchor"],
            d["size"],
            tuple(d["types"]),
            tuple(tuple(r) for r in d["adjacency"]),
            tuple(tuple(t) for t in d["tags"]),
            tuple(d["depths"]),
            d.get("disconnected", False),
        )


Snapshot = Locality  # size-3 output form


@dataclass(frozen=True)
class SnapshotDiff:
    gate_error: int
    link_error: int


# -- canonical expansion -----------------------------------------------------------


def _fanin_subsig(n: Netlist, gid: str, depth: int) -> str:
    key = ("fis", gid, depth)
    cached = n._cache.get(key)
    if cached is not None:
        return cached
    g = n.gates[gid]
    keys = set(n.key_inputs)
    parts = []
    for net in g.inputs:
        if net in n.gates and depth > 0:
            parts.append(_fanin_subsig(n, net, depth - 1))
        elif net in keys:
            parts.append("K")
        elif net in n.gates:
            parts.append("G")
        else:
            parts.append("P")
    po = "!" if g.output in set(n.primary_outputs) else ""
    sig = f"{g.gtype.value}{po}({','.join(sorted(parts))})"
    n._cache[key] = sig
    return sig


def _fanout_subsig(n: Netlist, gid: str, depth: int) -> str:
    key = ("fos", gid, depth)
    cached = n._cache.get(key)
    if cached is not None:
        return cached
    g = n.gates[gid]
    if depth > 0:
        parts = sorted(_fanout_subsig(n, c, depth - 1) for c in n.consumers(gid))
    else:
        parts = ["..."] if n.consumers(gid) else []
    po = "!" if g.output in set(n.primary_outputs) else ""
    sig = f"{g.gtype.value}{po}[{','.join(parts)}]"
    n._cache[key] = sig
    return sig


def _role_tags(n: Netlist, gate_set: set, anchor: str) -> dict:
    """Role map for signature purposes: anchor, entering, and leaving nets."""
    tags = {anchor: ROLE_ANCHOR}
    po_set = set(n.primary_outputs)
    for gid in gate_set:
        g = n.gates[gid]
        for net in g.inputs:
            if net not in gate_set and net != anchor:
                tags[net] = ROLE_IN
        if g.output in po_set or any(c not in gate_set for c in n.consumers(g.output)):
            tags[g.output] = ROLE_OUT
    return tags


def _adj_code(n: Netlist, gid: str, placed: list) -> tuple:
    g = n.gates[gid]
    codes = []
    for p in placed:
        code = 0
        if p in g.inputs:
            code |= 1
        if gid in n.gates[p].inputs:
            code |= 2
        codes.append(code)
    return tuple(codes)


def _expansion(n: Netlist, anchor: str) -> list:
    """Canonically ordered neighborhood of `anchor`, up to MAX_LOCALITY gates.

    Returns [(gate id, depth, tie group id)]. Ordering keys are structural
    only: depth layer, fan-in before fan-out, gate-type rank, recursive
    neighborhood signatures, and connection pattern to already-placed gates.
    Exact ties form groups whose internal order is settled per-extraction by
    encoding minimization.
    """
    key = ("expansion", anchor)
    cached = n._cache.get(key)
    if cached is not None:
        return cached

    seeds = n.consumers(anchor)
    selected: list = []  # (gid, depth, group)
    if not seeds:
        n._cache[key] = selected
        return selected

    placed: list = []
    sel_set: set = set()
    frontier = {g: (0, 0) for g in seeds}
    group_ctr = 0

    while frontier and len(selected) < MAX_LOCALITY:
        depth = min(d for d, _ in frontier.values())
        batch = [g for g, (d, _) in frontier.items() if d == depth]
        keyed: dict = {}
        for g in batch:
            io = frontier[g][1]
            k = (
                io,
                TYPE_RANK[n.gates[g].gtype],
                int(anchor not in n.gates[g].inputs),
                _fanin_subsig(n, g, 3),
                _adj_code(n, g, placed),
            )
            keyed.setdefault(k, []).append(g)

        added = []
        for k in sorted(keyed):
            members = keyed[k]
            if len(members) > 1:
                tags = _role_tags(n, sel_set | set(members), anchor)

                def trial(g):
                    try:
                        return _encode_subgraph(n, sel_set | {g}, tags)
                    except NetlistError:
                        return ""  # deep subsignatures below still order the tie

                members.sort(
                    key=lambda g: (
                        trial(g),
                        _fanin_subsig(n, g, MAX_LOCALITY),
                        _fanout_subsig(n, g, 4),
                    )
                )
                gid0 = group_ctr
                group_ctr += 1
            else:
                gid0 = group_ctr
                group_ctr += 1
            for g in members:
                if len(selected) >= MAX_LOCALITY:
                    break
                selected.append((g, depth, gid0 if len(members) > 1 else -len(selected) - 1))
                placed.append(g)
                sel_set.add(g)
                added.append(g)
                frontier.pop(g)
            if len(selected) >= MAX_LOCALITY:
                break

        for g in added:
            gate = n.gates[g]
            for net in gate.inputs:
                if net in n.gates and net not in sel_set:
                    cand = (depth + 1, 0)
                    if frontier.get(net, (99, 99)) > cand:
                        frontier[net] = cand
            for c in n.consumers(g):
                if c not in sel_set:
                    cand = (depth + 1, 1)
                    if frontier.get(c, (99, 99)) > cand:
                        frontier[c] = cand

    n._cache[key] = selected
    return selected


def locality_gates(n: Netlist, anchor: str, size: int) -> list[str]:
    """Gate ids of the size-n locality around `anchor`, in canonical order."""
    _check_anchor(n, anchor, size)
    return [gid for gid, _, _ in _expansion(n, anchor)[:size]]


def _check_anchor(n: Netlist, anchor: str, size: int):
    if anchor not in n.key_inputs:
        raise NetlistError(f"anchor {anchor!r} is not a key input")
    if not MIN_LOCALITY <= size <= MAX_LOCALITY:
        raise NetlistError(f"locality size must be in [{MIN_LOCALITY},{MAX_LOCALITY}]")


def _build(n: Netlist, anchor: str, size: int, chosen: list) -> tuple:
    """Per-position fields for an ordered gate list."""
    gate_set = {gid for gid, _, _ in chosen}
    po_set = set(n.primary_outputs)
    types, tags, depths = [], [], []
    for gid, depth, _ in chosen:
        g = n.gates[gid]
        types.append(g.gtype.value)
        key_in = int(anchor in g.inputs)
        ext_in = int(
            any(net != anchor and (net not in gate_set) for net in g.inputs)
        )
        ext_out = int(
            g.output in po_set or any(c not in gate_set for c in n.consumers(g.output))
        )
        internal = int(not ext_in and not ext_out)
        tags.append((key_in, ext_in, ext_out, internal))
        depths.append(depth)
    adjacency = []
    ids = [gid for gid, _, _ in chosen]
    for i, gi in enumerate(ids):
        row = [0] * size
        for j, gj in enumerate(ids):
            if i != j and gi in n.gates[gj].inputs:
                row[j] = 1
        adjacency.append(row)
    pad = size - len(chosen)
    types += [EMPTY] * pad
    tags += [(0, 0, 0, 0)] * pad
    depths += [0] * pad
    adjacency += [[0] * size for _ in range(pad)]
    return tuple(types), tuple(tuple(r) for r in adjacency), tuple(tags), tuple(depths)


def extract_locality(n: Netlist, anchor: str, size: int) -> Locality:
    """BFS locality of exactly `size` positions; underfull regions pad EMPTY.

    A floating key input (no consumers) yields an all-EMPTY locality flagged
    disconnected, which is a legal post-synthesis outcome.
    """
    _check_anchor(n, anchor, size)
    order = _expansion(n, anchor)[:size]
    if not order:
        empty = tuple([EMPTY] * size)
        zeros = tuple(tuple([0] * size) for _ in range(size))
        return Locality(
            anchor, size, empty, zeros, tuple([(0, 0, 0, 0)] * size),
            tuple([0] * size), disconnected=True,
        )

    # Settle exact-tie groups by minimizing the encoded form.
    groups: dict = {}
    for pos, (gid, depth, grp) in enumerate(order):
        if grp >= 0:
            groups.setdefault(grp, []).append(pos)
    variable = [positions for positions in groups.values() if len(positions) > 1]
    if variable:
        best = None
        perm_sets = [list(permutations(p)) for p in variable]
        total = 1
        for ps in perm_sets:
            total *= len(ps)
        if total > 720:  # fall back to per-group greedy minimization
            chosen = list(order)
            for positions in variable:
                best_local = None
                for perm in permutations(positions):
                    trial = list(chosen)
                    for src, dst in zip(positions, perm):
                        trial[dst] = chosen[src]
                    fields = _build(n, anchor, size, trial)
                    if best_local is None or fields < best_local[0]:
                        best_local = (fields, trial)
                chosen = best_local[1]
            fields = _build(n, anchor, size, chosen)
        else:
            for combo in product(*perm_sets):
                trial = list(order)
                for positions, perm in zip(variable, combo):
                    for src, dst in zip(positions, perm):
                        trial[dst] = order[src]
                fields = _build(n, anchor, size, trial)
                if best is None or fields < best[0]:
                    best = (fields, trial)
            fields = best[0]
    else:
        fields = _build(n, anchor, size, order)

    types, adjacency, tags, depths = fields
    return Locality(anchor, size, types, adjacency, tags, depths)


def snapshot_signature(n: Netlist, anchor: str) -> str:
    """Order-free canonical signature of the 3-gate snapshot around `anchor`."""
    gates = set(locality_gates(n, anchor, MIN_LOCALITY))
    if not gates:
        return "<empty>"
    return _encode_subgraph(n, gates, _role_tags(n, gates, anchor))


# -- feature encoding and diffs ----------------------------------------------------


def feature_length(size: int) -> int:
    return size * 8 + size * size + size + size * 4


def encode(l: Locality) -> np.ndarray:
    """Fixed-length numeric encoding: type one-hots, adjacency, depths, tags."""
    vec = np.zeros(feature_length(l.size))
    off = 0
    for i, t in enumerate(l.types):
        if t != EMPTY:
            vec[off + i * 8 + TYPE_RANK[GateType[t]]] = 1.0
    off += l.size * 8
    flat = [b for row in l.adjacency for b in row]
    vec[off : off + l.size * l.size] = flat
    off += l.size * l.size
    vec[off : off + l.size] = l.depths
    off += l.size
    vec[off:] = [t for tag in l.tags for t in tag]
    return vec


def snapshot_diff(predicted: Snapshot, truth: Snapshot) -> SnapshotDiff:
    """Positionwise gate-type and connection errors between two snapshots."""
    if predicted.size != MIN_LOCALITY or truth.size != MIN_LOCALITY:
        raise NetlistError("snapshot_diff expects size-3 snapshots")
    gate_error = sum(1 for a, b in zip(predicted.types, truth.types) if a != b)
    link_error = sum(
        1
        for ra, rb in zip(predicted.adjacency, truth.adjacency)
        for a, b in zip(ra, rb)
        if a != b
    )
    return SnapshotDiff(gate_error, link_error)
