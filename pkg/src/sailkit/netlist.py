"""Gate-level netlist core: bench-format I/O, traversal, canonical signatures, DOT export.

A netlist is a DAG of single-output gates over named nets. Key inputs are
ordinary inputs whose name matches ``keyinput<N>``; they are kept separate
from primary inputs because locking and the attack treat them specially.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from enum import Enum

from ._util import stable_hash

MAX_FANIN = 8

_KEY_INPUT_RE = re.compile(r"^keyinput(\d+)$")
_INPUT_LINE = re.compile(r"(?i:INPUT)\s*\(\s*([^\s(),]+)\s*\)")
_OUTPUT_LINE = re.compile(r"(?i:OUTPUT)\s*\(\s*([^\s(),]+)\s*\)")
_GATE_LINE = re.compile(r"([^\s=(),]+)\s*=\s*([A-Za-z]+)\s*\(\s*([^()]*?)\s*\)")

# Role tags for subgraph signatures.
ROLE_ANCHOR = "anchor-key-input"
ROLE_IN = "boundary-in"
ROLE_OUT = "boundary-out"
ROLE_INTERNAL = "internal"
_ROLES = {ROLE_ANCHOR, ROLE_IN, ROLE_OUT, ROLE_INTERNAL}


class NetlistError(Exception):
    pass


class BenchSyntaxError(NetlistError):
    def __init__(self, msg: str, line_no: int):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


class GateType(Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUFF = "BUFF"


TYPE_RANK = {t: i for i, t in enumerate(GateType)}
UNARY_TYPES = (GateType.NOT, GateType.BUFF)

_TYPE_ALIASES = {t.value: t for t in GateType}
_TYPE_ALIASES["BUF"] = GateType.BUFF


@dataclass(frozen=True)
class Gate:
    gtype: GateType
    inputs: tuple[str, ...]
    output: str


def key_index(net: str) -> int | None:
    """Index N for nets named keyinput<N>, else None."""
    m = _KEY_INPUT_RE.match(net)
    return int(m.group(1)) if m else None


def key_net(index: int) -> str:
    return f"keyinput{index}"


class Netlist:
    """Immutable combinational netlist. Gate ids equal their output net names."""

    def __init__(self, primary_inputs, key_inputs, primary_outputs, gates):
        self.primary_inputs = tuple(primary_inputs)
        self.key_inputs = tuple(key_inputs)
        self.primary_outputs = tuple(primary_outputs)
        self.gates = {gid: g for gid, g in gates.items()}
        self._cache: dict = {}
        self._validate()

    # -- construction helpers -------------------------------------------------

    def _validate(self):
        terminals = self.primary_inputs + self.key_inputs
        seen = set()
        for name in terminals:
            if name in seen:
                raise NetlistError(f"duplicate driver for net {name!r}")
            seen.add(name)
        for gid, g in self.gates.items():
            if gid != g.output:
                raise NetlistError(f"gate id {gid!r} must equal its output net {g.output!r}")
            if g.output in seen:
                raise NetlistError(f"duplicate driver for net {g.output!r}")
            seen.add(g.output)
            arity = len(g.inputs)
            if g.gtype in UNARY_TYPES:
                if arity != 1:
                    raise NetlistError(f"{g.gtype.value} gate {gid!r} needs exactly 1 input")
            elif not 2 <= arity <= MAX_FANIN:
                raise NetlistError(
                    f"{g.gtype.value} gate {gid!r} needs 2..{MAX_FANIN} inputs, got {arity}"
                )
        for g in self.gates.values():
            for net in g.inputs:
                if net not in seen:
                    raise NetlistError(f"undriven net {net!r} feeding gate {g.output!r}")
        for po in self.primary_outputs:
            if po not in seen:
                raise NetlistError(f"primary output {po!r} references no net")
        self.topo_order()  # raises on cycles

    def parts(self):
        """Mutable copies of the constituents, for building modified netlists."""
        return (
            list(self.primary_inputs),
            list(self.key_inputs),
            list(self.primary_outputs),
            dict(self.gates),
        )

    # -- queries ---------------------------------------------------------------

    def driver(self, net: str) -> str | None:
        """Gate id driving `net`, or None for terminals."""
        return net if net in self.gates else None

    def consumers(self, net: str) -> tuple[str, ...]:
        cons = self._cache.get("consumers")
        if cons is None:
            cons = {}
            for gid, g in self.gates.items():
                for net_in in g.inputs:
                    cons.setdefault(net_in, set()).add(gid)
            cons = {k: tuple(sorted(v)) for k, v in cons.items()}
            self._cache["consumers"] = cons
        return cons.get(net, ())

    def nets(self):
        return list(self.primary_inputs) + list(self.key_inputs) + list(self.gates)

    def topo_order(self) -> list[str]:
        order = self._cache.get("topo")
        if order is None:
            indeg = {}
            fanout = {}
            for gid, g in self.gates.items():
                deps = {net for net in g.inputs if net in self.gates}
                indeg[gid] = len(deps)
                for d in deps:
                    fanout.setdefault(d, []).append(gid)
            ready = [gid for gid, d in indeg.items() if d == 0]
            heapq.heapify(ready)
            order = []
            while ready:
                gid = heapq.heappop(ready)
                order.append(gid)
                for nxt in fanout.get(gid, ()):
                    indeg[nxt] -= 1
                    if indeg[nxt] == 0:
                        heapq.heappush(ready, nxt)
            if len(order) != len(self.gates):
                raise NetlistError("combinational cycle detected")
            self._cache["topo"] = order
        return list(order)

    def __eq__(self, other):
        if not isinstance(other, Netlist):
            return NotImplemented
        return (
            self.primary_inputs == other.primary_inputs
            and self.key_inputs == other.key_inputs
            and self.primary_outputs == other.primary_outputs
            and self.gates == other.gates
        )

    def __repr__(self):
        return (
            f"Netlist(pis={len(self.primary_inputs)}, keys={len(self.key_inputs)}, "
            f"pos={len(self.primary_outputs)}, gates={len(self.gates)})"
        )


# -- bench format ---------------------------------------------------------------


def parse_bench(text: str) -> Netlist:
    """Parse bench-format source into a Netlist.

    INPUT lines named keyinput<N> become key inputs (ordered by N); everything
    else keeps file order. Raises BenchSyntaxError / NetlistError on bad input.
    """
    pis: list[str] = []
    keys: list[str] = []
    pos: list[str] = []
    gates: dict[str, Gate] = {}
    declared = set()

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _INPUT_LINE.fullmatch(line)
        if m:
            name = m.group(1)
            if name in declared:
                raise BenchSyntaxError(f"duplicate driver for net {name!r}", ln)
            declared.add(name)
            (keys if key_index(name) is not None else pis).append(name)
            continue
        m = _OUTPUT_LINE.fullmatch(line)
        if m:
            pos.append(m.group(1))
            continue
        m = _GATE_LINE.fullmatch(line)
        if m:
            out, tname, argstr = m.group(1), m.group(2).upper(), m.group(3)
            gtype = _TYPE_ALIASES.get(tname)
            if gtype is None:
                raise BenchSyntaxError(f"unknown gate type {tname!r}", ln)
            args = tuple(a.strip() for a in argstr.split(",")) if argstr.strip() else ()
            if any(not a for a in args):
                raise BenchSyntaxError("empty input name", ln)
            if gtype in UNARY_TYPES and len(args) != 1:
                raise BenchSyntaxError(f"{gtype.value} takes exactly 1 input", ln)
            if gtype not in UNARY_TYPES and not 2 <= len(args) <= MAX_FANIN:
                raise BenchSyntaxError(f"{gtype.value} takes 2..{MAX_FANIN} inputs", ln)
            if out in declared:
                raise BenchSyntaxError(f"duplicate driver for net {out!r}", ln)
            declared.add(out)
            gates[out] = Gate(gtype, args, out)
            continue
        raise BenchSyntaxError(f"unrecognized line: {line!r}", ln)

    keys.sort(key=lambda s: key_index(s))
    return Netlist(pis, keys, pos, gates)


def write_bench(n: Netlist) -> str:
    """Emit bench-format text; parse_bench(write_bench(n)) == n."""
    lines = [f"INPUT({name})" for name in n.primary_inputs]
    lines += [f"INPUT({name})" for name in n.key_inputs]
    lines += [f"OUTPUT({name})" for name in n.primary_outputs]
    for gid in n.topo_order():
        g = n.gates[gid]
        lines.append(f"{g.output} = {g.gtype.value}({', '.join(g.inputs)})")
    return "\n".join(lines) + "\n"


def topo_order(n: Netlist) -> list[str]:
    """Gate ids in dependency order, ties broken lexicographically."""
    return n.topo_order()


# -- canonical subgraph signatures ------------------------------------------------
#
# A signature is the lexicographically smallest encoding of the colored
# connection graph over (gates in the set) plus (external nets they read),
# found by color refinement with branching on ambiguous cells. Node colors
# carry gate types and role tags, never names, so renaming cannot change it.

_SEARCH_CAP = 50000


def _refine(colors, out_adj, in_adj):
    while True:
        new = {}
        for v in colors:
            outs = sorted((colors[u], c) for u, c in out_adj[v])
            ins = sorted((colors[u], c) for u, c in in_adj[v])
            new[v] = stable_hash(colors[v], "O", outs, "I", ins)
        old_part = {}
        new_part = {}
        for v in colors:
            old_part.setdefault(colors[v], set()).add(v)
            new_part.setdefault(new[v], set()).add(v)
        if sorted(map(sorted, old_part.values())) == sorted(map(sorted, new_part.values())):
            return colors
        colors = new


def _canonical_encoding(base_colors: dict, edges: dict) -> str:
    nodes = list(base_colors)
    out_adj = {v: [] for v in nodes}
    in_adj = {v: [] for v in nodes}
    for (u, v), c in edges.items():
        out_adj[u].append((v, c))
        in_adj[v].append((u, c))

    best: list[str | None] = [None]
    visited = [0]

    # Nodes with identical neighborhoods by identity are automorphic swaps;
    # branching on one representative per fingerprint is enough.
    fingerprint = {
        v: (tuple(sorted(out_adj[v])), tuple(sorted(in_adj[v]))) for v in nodes
    }

    def encode(order):
        idx = {v: i for i, v in enumerate(order)}
        parts = [base_colors[v] for v in order]
        elist = sorted(f"{idx[u]}>{idx[v]}x{c}" for (u, v), c in edges.items())
        return ";".join(parts) + "||" + ",".join(elist)

    def search(colors):
        visited[0] += 1
        if visited[0] > _SEARCH_CAP:
            raise NetlistError("canonical signature search exceeded budget")
        colors = _refine(colors, out_adj, in_adj)
        cells: dict[str, list] = {}
        for v in nodes:
            cells.setdefault(colors[v], []).append(v)
        non_singleton = [(len(cell), c) for c, cell in cells.items() if len(cell) > 1]
        if not non_singleton:
            enc = encode([cells[c][0] for c in sorted(cells)])
            if best[0] is None or enc < best[0]:
                best[0] = enc
            return
        target = cells[min(non_singleton)[1]]
        seen_fp = set()
        for v in target:
            fp = fingerprint[v]
            if fp in seen_fp:
                continue
            seen_fp.add(fp)
            branched = dict(colors)
            branched[v] = stable_hash(colors[v], "pin")
            search(branched)

    search(dict(base_colors))
    return best[0]


def _signature_graph(n: Netlist, gate_ids, role_tags):
    gate_set = set(gate_ids)
    for gid in gate_set:
        if gid not in n.gates:
            raise NetlistError(f"gate {gid!r} not in netlist")
    for net, role in role_tags.items():
        if role not in _ROLES:
            raise NetlistError(f"unknown role tag {role!r} for net {net!r}")

    base = {}
    edges: dict[tuple, int] = {}
    for gid in gate_set:
        g = n.gates[gid]
        out_role = role_tags.get(g.output, ROLE_INTERNAL)
        base[("g", gid)] = f"G:{g.gtype.value}:{out_role}"
        for net in g.inputs:
            if net in gate_set:
                src = ("g", net)
            else:
                src = ("x", net)
                base[src] = f"X:{role_tags.get(net, ROLE_IN)}"
            edges[(src, ("g", gid))] = edges.get((src, ("g", gid)), 0) + 1
    return base, edges


def _encode_subgraph(n: Netlist, gate_ids, role_tags) -> str:
    """Signature without the connectivity precondition (internal use)."""
    if not gate_ids:
        return "<empty>"
    base, edges = _signature_graph(n, gate_ids, role_tags)
    return _canonical_encoding(base, edges)


def subgraph_signature(n: Netlist, gate_ids, role_tags) -> str:
    """Canonical signature of a connected induced gate subgraph with role-tagged nets.

    Invariant under net/gate renaming; sensitive to gate types, internal
    topology, and role tags. Raises on a disconnected gate set.
    """
    gate_set = set(gate_ids)
    if not gate_set:
        raise NetlistError("empty gate set")
    # Connectivity over driver edges (undirected).
    adj = {gid: set() for gid in gate_set}
    for gid in gate_set:
        for net in n.gates[gid].inputs:
            if net in gate_set:
                adj[gid].add(net)
                adj[net].add(gid)
    seen = set()
    stack = [next(iter(sorted(gate_set)))]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(adj[v] - seen)
    if seen != gate_set:
        raise NetlistError("gate set is not connected")
    return _encode_subgraph(n, gate_set, role_tags)


# -- DOT export -------------------------------------------------------------------


def export_dot(n: Netlist, node_colors: dict | None = None) -> str:
    """Graphviz digraph: one node per gate and terminal, one edge per connection.

    Key inputs default to cyan fill; `node_colors` overrides fill per node id.
    """
    node_colors = node_colors or {}
    po_set = set(n.primary_outputs)
    lines = ["digraph netlist {", "  rankdir=LR;"]

    def node(nid, label, shape, fill=None):
        attrs = [f'label="{label}"', f"shape={shape}"]
        fill = node_colors.get(nid, fill)
        if fill:
            attrs.append(f'fillcolor="{fill}"')
            attrs.append("style=filled")
        if nid in po_set:
            attrs.append("peripheries=2")
        lines.append(f'  "{nid}" [{", ".join(attrs)}];')

    for name in n.primary_inputs:
        node(name, name, "invtriangle")
    for name in n.key_inputs:
        node(name, name, "invtriangle", fill="cyan")
    for gid in sorted(n.gates):
        g = n.gates[gid]
        node(gid, f"{gid}\\n{g.gtype.value}", "box")
    for gid in sorted(n.gates):
        for net in n.gates[gid].inputs:
            lines.append(f'  "{net}" -> "{gid}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
