"""Deterministic rule-based re-synthesis: rule library, engine, change taxonomy.

Rules are small pattern/replacement fragments proven functionally equivalent
by exhaustive truth-table check when constructed. The engine applies them in
a fixed priority order over gates in topological order, repeating passes to a
fixpoint, and logs every application so the rewrite is replayable. Key inputs
are never special-cased: camouflage of key-gates emerges from structure alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import permutations

from .locality import locality_gates, snapshot_signature
from .netlist import Gate, GateType, Netlist, NetlistError
from .simulate import specialize_gate


# -- rule fragments ----------------------------------------------------------------


@dataclass(frozen=True)
class Pat:
    """A gate pattern node; inputs are variable names, nested Pats, or ConstBit.

    `consume` on an interior node requires the matched gate to have a single
    consumer (and a non-output net) and deletes it when the rule applies.
    """

    gtype: GateType
    inputs: tuple
    consume: bool = True


@dataclass(frozen=True)
class ConstBit:
    bit: int


def _expr_vars(node) -> list[str]:
    if isinstance(node, str):
        return [node]
    if isinstance(node, ConstBit):
        return []
    out: list[str] = []
    for child in node.inputs:
        for v in _expr_vars(child):
            if v not in out:
                out.append(v)
    return out


def _expr_eval(node, env: dict) -> int:
    if isinstance(node, str):
        return env[node]
    if isinstance(node, ConstBit):
        return node.bit
    vals = [_expr_eval(c, env) for c in node.inputs]
    t = node.gtype
    if t is GateType.AND:
        return reduce(lambda a, b: a & b, vals)
    if t is GateType.NAND:
        return 1 - reduce(lambda a, b: a & b, vals)
    if t is GateType.OR:
        return reduce(lambda a, b: a | b, vals)
    if t is GateType.NOR:
        return 1 - reduce(lambda a, b: a | b, vals)
    if t is GateType.XOR:
        return reduce(lambda a, b: a ^ b, vals)
    if t is GateType.XNOR:
        return 1 - reduce(lambda a, b: a ^ b, vals)
    if t is GateType.NOT:
        return 1 - vals[0]
    return vals[0]


def _has_const(node) -> bool:
    if isinstance(node, ConstBit):
        return True
    if isinstance(node, Pat):
        return any(_has_const(c) for c in node.inputs)
    return False


@dataclass(frozen=True)
class RewriteRule:
    rule_id: str
    pattern: Pat
    replacement: object  # Pat | variable name | ConstBit
    description: str
    shared_inner: bool = False  # fire only when the inner gate has >1 consumer

    def __post_init__(self):
        pvars = _expr_vars(self.pattern)
        rvars = _expr_vars(self.replacement) if not isinstance(self.replacement, ConstBit) else []
        if not set(rvars) <= set(pvars):
            raise NetlistError(f"rule {self.rule_id}: replacement uses unbound variables")
        for bits in range(1 << len(pvars)):
            env = {v: (bits >> i) & 1 for i, v in enumerate(pvars)}
            if _expr_eval(self.pattern, env) != _expr_eval(self.replacement, env):
                raise NetlistError(f"rule {self.rule_id}: pattern and replacement differ")

    @property
    def structural(self) -> bool:
        return not _has_const(self.pattern)


def builtin_rules() -> list[RewriteRule]:
    """Fixed rule library in priority order; every rule self-verifies."""
    T = GateType
    rules = [
        RewriteRule("buff-elim", Pat(T.BUFF, ("a",)), "a", "drop a buffer"),
        RewriteRule(
            "not-not-elim",
            Pat(T.NOT, (Pat(T.NOT, ("a",)),)),
            "a",
            "double inversion cancels",
        ),
        RewriteRule(
            "not-not-bypass",
            Pat(T.NOT, (Pat(T.NOT, ("a",), consume=False),)),
            "a",
            "double inversion over a shared inverter",
            shared_inner=True,
        ),
        RewriteRule(
            "not-not-buff",
            Pat(T.NOT, (Pat(T.NOT, ("a",)),)),
            Pat(T.BUFF, ("a",)),
            "double inversion at an output net",
        ),
        RewriteRule(
            "not-xor-fuse",
            Pat(T.NOT, (Pat(T.XOR, ("a", "b"), consume=False),)),
            Pat(T.XNOR, ("a", "b")),
            "inverter after XOR fuses to XNOR",
        ),
        RewriteRule(
            "not-xnor-fuse",
            Pat(T.NOT, (Pat(T.XNOR, ("a", "b"), consume=False),)),
            Pat(T.XOR, ("a", "b")),
            "inverter after XNOR fuses to XOR",
        ),
        RewriteRule(
            "not-and-fuse",
            Pat(T.NOT, (Pat(T.AND, ("a", "b"), consume=False),)),
            Pat(T.NAND, ("a", "b")),
            "inverter after AND fuses to NAND",
        ),
        RewriteRule(
            "not-or-fuse",
            Pat(T.NOT, (Pat(T.OR, ("a", "b"), consume=False),)),
            Pat(T.NOR, ("a", "b")),
            "inverter after OR fuses to NOR",
        ),
        RewriteRule(
            "not-nand-fuse",
            Pat(T.NOT, (Pat(T.NAND, ("a", "b"), consume=False),)),
            Pat(T.AND, ("a", "b")),
            "inverter after NAND fuses to AND",
        ),
        RewriteRule(
            "not-nor-fuse",
            Pat(T.NOT, (Pat(T.NOR, ("a", "b"), consume=False),)),
            Pat(T.OR, ("a", "b")),
            "inverter after NOR fuses to OR",
        ),
        RewriteRule(
            "xor-not-absorb",
            Pat(T.XOR, (Pat(T.NOT, ("a",)), "b")),
            Pat(T.XNOR, ("a", "b")),
            "input inverter absorbed into XNOR",
        ),
        RewriteRule(
            "xnor-not-absorb",
            Pat(T.XNOR, (Pat(T.NOT, ("a",)), "b")),
            Pat(T.XOR, ("a", "b")),
            "input inverter absorbed into XOR",
        ),
        RewriteRule(
            "and-not-demorgan",
            Pat(T.AND, (Pat(T.NOT, ("a",)), Pat(T.NOT, ("b",)))),
            Pat(T.NOR, ("a", "b")),
            "AND of inverters becomes NOR",
        ),
        RewriteRule(
            "or-not-demorgan",
            Pat(T.OR, (Pat(T.NOT, ("a",)), Pat(T.NOT, ("b",)))),
            Pat(T.NAND, ("a", "b")),
            "OR of inverters becomes NAND",
        ),
        RewriteRule(
            "nand-not-demorgan",
            Pat(T.NAND, (Pat(T.NOT, ("a",)), Pat(T.NOT, ("b",)))),
            Pat(T.OR, ("a", "b")),
            "NAND of inverters becomes OR",
        ),
        RewriteRule(
            "nor-not-demorgan",
            Pat(T.NOR, (Pat(T.NOT, ("a",)), Pat(T.NOT, ("b",)))),
            Pat(T.AND, ("a", "b")),
            "NOR of inverters becomes AND",
        ),
        RewriteRule(
            "xor-not-push",
            Pat(T.XOR, (Pat(T.NOT, ("a",), consume=False), "b")),
            Pat(T.NOT, (Pat(T.XOR, ("a", "b")),)),
            "shared input inverter pushed to the XOR output side",
            shared_inner=True,
        ),
        RewriteRule(
            "xnor-not-push",
            Pat(T.XNOR, (Pat(T.NOT, ("a",), consume=False), "b")),
            Pat(T.NOT, (Pat(T.XNOR, ("a", "b")),)),
            "shared input inverter pushed to the XNOR output side",
            shared_inner=True,
        ),
        RewriteRule("xor-dup-zero", Pat(T.XOR, ("a", "a")), ConstBit(0), "x^x = 0"),
        RewriteRule("xnor-dup-one", Pat(T.XNOR, ("a", "a")), ConstBit(1), "xnor(x,x) = 1"),
        RewriteRule("and-dup", Pat(T.AND, ("a", "a")), Pat(T.BUFF, ("a",)), "x&x = x"),
        RewriteRule("or-dup", Pat(T.OR, ("a", "a")), Pat(T.BUFF, ("a",)), "x|x = x"),
        RewriteRule("nand-dup", Pat(T.NAND, ("a", "a")), Pat(T.NOT, ("a",)), "nand(x,x) = !x"),
        RewriteRule("nor-dup", Pat(T.NOR, ("a", "a")), Pat(T.NOT, ("a",)), "nor(x,x) = !x"),
    ]
    # Constant-input simplification family; fires during constant cascades.
    C0, C1 = ConstBit(0), ConstBit(1)
    rules += [
        RewriteRule("and-const0", Pat(T.AND, ("a", C0)), C0, "x&0 = 0"),
        RewriteRule("and-const1", Pat(T.AND, ("a", C1)), Pat(T.BUFF, ("a",)), "x&1 = x"),
        RewriteRule("or-const0", Pat(T.OR, ("a", C0)), Pat(T.BUFF, ("a",)), "x|0 = x"),
        RewriteRule("or-const1", Pat(T.OR, ("a", C1)), C1, "x|1 = 1"),
        RewriteRule("nand-const0", Pat(T.NAND, ("a", C0)), C1, "nand(x,0) = 1"),
        RewriteRule("nand-const1", Pat(T.NAND, ("a", C1)), Pat(T.NOT, ("a",)), "nand(x,1) = !x"),
        RewriteRule("nor-const0", Pat(T.NOR, ("a", C0)), Pat(T.NOT, ("a",)), "nor(x,0) = !x"),
        RewriteRule("nor-const1", Pat(T.NOR, ("a", C1)), C0, "nor(x,1) = 0"),
        RewriteRule("xor-const0", Pat(T.XOR, ("a", C0)), Pat(T.BUFF, ("a",)), "x^0 = x"),
        RewriteRule("xor-const1", Pat(T.XOR, ("a", C1)), Pat(T.NOT, ("a",)), "x^1 = !x"),
        RewriteRule("xnor-const0", Pat(T.XNOR, ("a", C0)), Pat(T.NOT, ("a",)), "xnor(x,0) = !x"),
        RewriteRule("xnor-const1", Pat(T.XNOR, ("a", C1)), Pat(T.BUFF, ("a",)), "xnor(x,1) = x"),
        RewriteRule("not-const0", Pat(T.NOT, (C0,)), C1, "!0 = 1"),
        RewriteRule("not-const1", Pat(T.NOT, (C1,)), C0, "!1 = 0"),
        RewriteRule("buff-const0", Pat(T.BUFF, (C0,)), C0, "buffered 0"),
        RewriteRule("buff-const1", Pat(T.BUFF, (C1,)), C1, "buffered 1"),
    ]
    return rules


_CONST_RULE_ID = {
    (GateType.AND, 0): "and-const0",
    (GateType.AND, 1): "and-const1",
    (GateType.OR, 0): "or-const0",
    (GateType.OR, 1): "or-const1",
    (GateType.NAND, 0): "nand-const0",
    (GateType.NAND, 1): "nand-const1",
    (GateType.NOR, 0): "nor-const0",
    (GateType.NOR, 1): "nor-const1",
    (GateType.XOR, 0): "xor-const0",
    (GateType.XOR, 1): "xor-const1",
    (GateType.XNOR, 0): "xnor-const0",
    (GateType.XNOR, 1): "xnor-const1",
    (GateType.NOT, 0): "not-const0",
    (GateType.NOT, 1): "not-const1",
    (GateType.BUFF, 0): "buff-const0",
    (GateType.BUFF, 1): "buff-const1",
}


# -- rewrite log -------------------------------------------------------------------


@dataclass(frozen=True)
class LogEntry:
    rule_id: str
    before: tuple[str, ...]  # matched gate ids; first is the root
    after: tuple[str, ...]  # surviving/created gate ids
    pass_no: int

    def to_json(self) -> dict:
        return {
            "rule": self.rule_id,
            "before": list(self.before),
            "after": list(self.after),
            "pass": self.pass_no,
        }

    @classmethod
    def from_json(cls, d: dict) -> "LogEntry":
        return cls(d["rule"], tuple(d["before"]), tuple(d["after"]), d["pass"])


@dataclass(frozen=True)
class RewriteLog:
    entries: tuple[LogEntry, ...]
    converged: bool
    passes: int


# -- engine ------------------------------------------------------------------------


class _Workspace:
    """Mutable netlist state while rewriting; gate id == output net throughout."""

    def __init__(self, n: Netlist):
        self.pis = list(n.primary_inputs)
        self.keys = list(n.key_inputs)
        self.pos = list(n.primary_outputs)
        self.po_set = set(n.primary_outputs)
        self.gates: dict[str, Gate] = dict(n.gates)
        self.consumers: dict[str, set] = {}
        for gid, g in self.gates.items():
            for net in g.inputs:
                self.consumers.setdefault(net, set()).add(gid)
        self.used = set(self.pis) | set(self.keys) | set(self.gates)
        self.fresh_ctr = 0

    def fresh(self) -> str:
        while True:
            name = f"rw{self.fresh_ctr}"
            self.fresh_ctr += 1
            if name not in self.used:
                self.used.add(name)
                return name

    def add(self, gate: Gate):
        self.gates[gate.output] = gate
        self.used.add(gate.output)
        for net in gate.inputs:
            self.consumers.setdefault(net, set()).add(gate.output)

    def remove(self, gid: str):
        g = self.gates.pop(gid)
        for net in g.inputs:
            cons = self.consumers.get(net)
            if cons:
                cons.discard(gid)

    def replace(self, gid: str, gtype: GateType, inputs: tuple):
        self.remove(gid)
        self.add(Gate(gtype, inputs, gid))

    def rewire(self, old: str, new: str):
        """Point every reader of net `old` at net `new`."""
        for cid in sorted(self.consumers.get(old, ())):
            g = self.gates[cid]
            self.replace(cid, g.gtype, tuple(new if i == old else i for i in g.inputs))

    def n_consumers(self, net: str) -> int:
        return len(self.consumers.get(net, ()))

    def topo_ids(self) -> list[str]:
        import heapq

        indeg = {}
        fanout: dict[str, list] = {}
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
            raise NetlistError("cycle introduced during rewriting")
        return order

    def to_netlist(self) -> Netlist:
        return Netlist(self.pis, self.keys, self.pos, self.gates)


def _match(ws: _Workspace, gid: str, pat: Pat, env: dict, nodes: list):
    g = ws.gates.get(gid)
    if g is None or g.gtype is not pat.gtype or len(g.inputs) != len(pat.inputs):
        return None
    nodes = nodes + [(pat, gid)]
    for perm in permutations(range(len(g.inputs))):
        res = _match_slots(ws, g, perm, pat.inputs, dict(env), list(nodes))
        if res is not None:
            return res
    return None


def _match_slots(ws: _Workspace, g: Gate, perm, slots, env: dict, nodes: list):
    for slot, k in zip(slots, perm):
        net = g.inputs[k]
        if isinstance(slot, str):
            if env.get(slot, net) != net:
                return None
            env[slot] = net
        elif isinstance(slot, Pat):
            if net not in ws.gates:
                return None
            if slot.consume and (ws.n_consumers(net) != 1 or net in ws.po_set):
                return None
            res = _match(ws, net, slot, env, nodes)
            if res is None:
                return None
            env, nodes = res
        else:  # ConstBit patterns never match real nets
            return None
    return env, nodes


def _build_replacement(ws: _Workspace, node, env: dict, out: str, created: list) -> None:
    """Create gates for a replacement tree; the root drives net `out`."""
    inputs = []
    for child in node.inputs:
        if isinstance(child, str):
            inputs.append(env[child])
        else:
            mid = ws.fresh()
            _build_replacement(ws, child, env, mid, created)
            inputs.append(mid)
    ws.add(Gate(node.gtype, tuple(inputs), out))
    created.append(out)


def _apply(ws: _Workspace, rule: RewriteRule, root: str, env: dict, nodes: list, pass_no: int):
    """Apply a matched rule; returns the produced log entries or None if blocked."""
    inner = [(p, gid) for p, gid in nodes if gid != root]
    if rule.shared_inner and any(ws.n_consumers(gid) < 2 for _, gid in inner):
        return None
    consumed = [gid for p, gid in inner if p.consume]
    before = (root, *[gid for _, gid in inner])
    rep = rule.replacement

    if isinstance(rep, str):
        target = env[rep]
        if root in ws.po_set or target in consumed:
            return None
        ws.remove(root)
        for gid in consumed:
            ws.remove(gid)
        ws.rewire(root, target)
        return [LogEntry(rule.rule_id, before, (), pass_no)]

    if isinstance(rep, ConstBit):
        return _apply_const(ws, rule, root, consumed, before, rep.bit, pass_no)

    # Pat replacement: root keeps its output net; interiors may be deleted.
    if any(env[v] in consumed for v in _expr_vars(rep)):
        return None
    ws.remove(root)
    for gid in consumed:
        ws.remove(gid)
    created: list = []
    _build_replacement(ws, rep, env, root, created)
    # Opportunistic cleanup of now-dead shared interiors.
    for _, gid in inner:
        if gid in ws.gates and ws.n_consumers(gid) == 0 and gid not in ws.po_set:
            ws.remove(gid)
    return [LogEntry(rule.rule_id, before, tuple(created), pass_no)]


def _apply_const(ws, rule, root, consumed, before, bit, pass_no):
    """Delete a constant-output gate and fold the constant through its readers.

    Aborts (no application) if the constant would reach a primary output,
    since the gate library cannot represent a constant net.
    """
    consts = {root: bit}
    plan = []  # (gid, rule_id, result)
    for gid in ws.topo_ids():
        if gid == root or gid in consumed:
            continue
        g = ws.gates[gid]
        hit = [net for net in g.inputs if net in consts]
        if not hit:
            continue
        res = specialize_gate(g.gtype, g.inputs, consts)
        rid = _CONST_RULE_ID[(g.gtype, consts[hit[0]])]
        if res[0] == "const":
            consts[gid] = res[1]
            plan.append((gid, rid, None))
        else:
            plan.append((gid, rid, res))
    if any(net in ws.po_set for net in consts):
        return None

    ws.remove(root)
    for gid in consumed:
        ws.remove(gid)
    entries = [LogEntry(rule.rule_id, before, (), pass_no)]
    for gid, rid, res in plan:
        if res is None:
            ws.remove(gid)
            entries.append(LogEntry(rid, (gid,), (), pass_no))
        else:
            ws.replace(gid, res[0], res[1])
            entries.append(LogEntry(rid, (gid,), (gid,), pass_no))
    return entries


DEFAULT_MAX_PASSES = 10


def resynthesize(
    n: Netlist, rules: list[RewriteRule] | None = None, max_passes: int = DEFAULT_MAX_PASSES
) -> tuple[Netlist, RewriteLog]:
    """Rewrite to a fixpoint (or `max_passes`); function over PIs+keys is preserved.

    Deterministic: identical inputs give byte-identical results. Key inputs are
    never deleted; one may end up floating, which downstream code treats as a
    legal outcome.
    """
    if rules is None:
        rules = builtin_rules()
    by_type: dict[GateType, list[RewriteRule]] = {}
    for rule in rules:
        if rule.structural:
            by_type.setdefault(rule.pattern.gtype, []).append(rule)

    ws = _Workspace(n)
    entries: list[LogEntry] = []
    converged = False
    passes = 0
    for pass_no in range(1, max_passes + 1):
        passes = pass_no
        fired = False
        for gid in ws.topo_ids():
            if gid not in ws.gates:
                continue
            for rule in by_type.get(ws.gates[gid].gtype, ()):
                m = _match(ws, gid, rule.pattern, {}, [])
                if m is None:
                    continue
                produced = _apply(ws, rule, gid, m[0], m[1], pass_no)
                if produced is None:
                    continue
                entries.extend(produced)
                fired = True
                break
        if not fired:
            converged = True
            break
    return ws.to_netlist(), RewriteLog(tuple(entries), converged, passes)


def replay_log(pre: Netlist, log: RewriteLog) -> Netlist:
    """Re-apply a rewrite log to its pre-rewrite netlist; exact reproduction."""
    rules = {r.rule_id: r for r in builtin_rules()}
    ws = _Workspace(pre)
    i = 0
    entries = log.entries
    while i < len(entries):
        e = entries[i]
        rule = rules[e.rule_id]
        m = _match(ws, e.before[0], rule.pattern, {}, [])
        if m is None:
            raise NetlistError(f"log replay: rule {e.rule_id} no longer matches at {e.before[0]!r}")
        produced = _apply(ws, rule, e.before[0], m[0], m[1], e.pass_no)
        if produced is None or tuple(produced) != tuple(entries[i : i + len(produced)]):
            raise NetlistError(f"log replay diverged at entry {i}")
        i += len(produced)
    return ws.to_netlist()


# -- change taxonomy ---------------------------------------------------------------


def classify_change(pre: Netlist, post: Netlist, rec, log: RewriteLog) -> int:
    """Level 1: snapshot identical. Level 3: key-gate consumed/transformed or the
    key input rewired/disconnected. Level 2: key-gate intact, neighborhood changed."""
    xor_id = rec.inserted_gate_ids[0]
    original = pre.gates.get(xor_id)
    if original is None:
        raise NetlistError(f"key-gate record {xor_id!r} not found in pre-netlist")
    anchor = next(net for net in original.inputs if net in pre.key_inputs)

    if snapshot_signature(pre, anchor) == snapshot_signature(post, anchor):
        return 1

    inserted = set(rec.inserted_gate_ids)
    touched = any(set(e.before) & inserted for e in log.entries)
    consumers_now = post.consumers(anchor)
    intact = consumers_now == (xor_id,) and post.gates.get(xor_id) == original
    if touched or not consumers_now or not intact:
        return 3
    return 2


@dataclass(frozen=True)
class TransformStats:
    groups: tuple  # ((pre signature, post signature), count), most frequent first
    curve: tuple  # (rule count, cumulative percent of changes covered)
    total: int


def enumerate_transformations(corpus) -> TransformStats:
    """Group (pre, post) locality pairs by signature pair; frequency + coverage."""
    counts: dict = {}
    for pre_loc, post_loc in corpus:
        key = (pre_loc.signature(), post_loc.signature())
        counts[key] = counts.get(key, 0) + 1
    groups = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(counts.values())
    curve = []
    cum = 0
    for k, (_, c) in enumerate(groups, start=1):
        cum += c
        curve.append((k, 100.0 * cum / total if total else 0.0))
    return TransformStats(tuple(groups), tuple(curve), total)
