"""Static gas bounds over the IR, and an independent path-enumeration oracle."""

from __future__ import annotations

from dataclasses import dataclass

from ..bytecode import ir


@dataclass(frozen=True)
class CostTable:
    """Unit costs per IR node kind (version 1, tied to the bytecode version)."""

    lit: int = 1
    move: int = 1
    copy: int = 2
    drop: int = 1  # per slot
    val: int = 2
    arith: int = 1
    conv: int = 1
    construct: int = 2  # plus one per field
    match: int = 2  # plus one per arm; also every destructuring pattern node (one arm)
    let: int = 3
    call: int = 10
    cell_read: int = 50
    cell_write: int = 200
    derive: int = 5
    new_id: int = 20
    new_context: int = 20
    try_: int = 2
    cap_op: int = 1
    and_return: int = 1
    cycle: int = 2


COSTS = CostTable()


def destructure_cost(p, table: CostTable = COSTS) -> int:
    """Cost of unpacking a pattern: one single-arm match per tuple or constructor node."""
    if isinstance(p, ir.PTuple):
        return table.match + 1 + sum(destructure_cost(e, table) for e in p.elems)
    if isinstance(p, ir.PCtor):
        return table.match + 1 + sum(destructure_cost(e, table) for e in p.subs)
    return 0


def nested_cost(p, table: CostTable = COSTS) -> int:
    """Destructuring below the top of a case-arm pattern (the arm test itself is charged by the case)."""
    subs = p.elems if isinstance(p, ir.PTuple) else p.subs if isinstance(p, ir.PCtor) else []
    return sum(destructure_cost(s, table) for s in subs)


class Bounds:
    """Computes bounds given ``callee(ref) -> int`` for every callable reference."""

    def __init__(self, callee, table: CostTable = COSTS):
        self.callee = callee
        self.t = table

    def function(self, f: ir.BFun) -> int:
        return sum(destructure_cost(p, self.t) for _, p in f.params) + self.node(f.body)

    def default(self, ref) -> int:
        return 0 if ref is None else self.t.call + self.callee(ref)

    def node(self, n) -> int:
        t, b = self.t, self.node
        if isinstance(n, ir.Lit):
            return t.lit
        if isinstance(n, ir.Move):
            return t.move
        if isinstance(n, ir.Copy):
            return t.copy
        if isinstance(n, ir.Drop):
            return t.drop * len(n.slots) + b(n.body)
        if isinstance(n, ir.Val):
            return t.val
        if isinstance(n, ir.Arith):
            return t.arith + b(n.left) + b(n.right)
        if isinstance(n, ir.Conv):
            return t.conv + b(n.arg)
        if isinstance(n, ir.Construct):
            return t.construct + len(n.args) + sum(b(a) for a in n.args)
        if isinstance(n, ir.MkTuple):
            return t.construct + len(n.elems) + sum(b(e) for e in n.elems)
        if isinstance(n, ir.Call):
            return t.call + self.callee(n.fun) + sum(b(a) for a in n.args)
        if isinstance(n, ir.Derive):
            return t.derive + b(n.ctx) + b(n.id)
        if isinstance(n, ir.NewId):
            return t.new_id
        if isinstance(n, ir.NewContext):
            return t.new_context
        if isinstance(n, ir.Read):
            return t.cell_read + self.default(n.default) + b(n.ref)
        if isinstance(n, ir.Let):
            return t.let + destructure_cost(n.pattern, t) + b(n.bound) + b(n.body)
        if isinstance(n, ir.Case):
            arms = max((nested_cost(p, t) + b(body) for p, body in n.arms), default=0)
            return t.match + len(n.arms) + b(n.scrutinee) + arms
        if isinstance(n, ir.Modify):
            return t.cell_read + t.cell_write + self.default(n.default) + b(n.ref) + b(n.body)
        if isinstance(n, ir.AndReturn):
            return t.and_return + b(n.value) + b(n.result)
        if isinstance(n, ir.CapOp):
            return t.cap_op + b(n.arg)
        if isinstance(n, ir.Cycle):
            return t.cycle + b(n.init) + n.count * b(n.body) + t.drop * len(n.after)
        if isinstance(n, ir.Try):
            after = max([t.drop * len(n.success_drops)] + [b(h.body) for h in n.handlers])
            return t.try_ + b(n.call) + after
        raise TypeError(type(n).__name__)


def gas_bound(f: ir.BFun, callee, table: CostTable = COSTS) -> int:
    return Bounds(callee, table).function(f)


# ---- oracle ------------------------------------------------------------------------------
#
# Enumerates every control-flow path explicitly and returns the set of path
# costs. A callee counts as its own most expensive path; a cell access counts
# both with and without materializing the default.


class PathOracle:
    def __init__(self, callee, table: CostTable = COSTS, limit: int = 1 << 16):
        self.callee = callee
        self.t = table
        self.limit = limit

    def _seq(self, *groups) -> set:
        out = {0}
        for g in groups:
            out = {a + c for a in out for c in g}
            if len(out) > self.limit:
                raise OverflowError("too many paths")
        return out

    @staticmethod
    def _const(c: int) -> set:
        return {c}

    def paths(self, n) -> set:
        t, p, k = self.t, self.paths, self._const
        if isinstance(n, ir.Lit):
            return k(t.lit)
        if isinstance(n, ir.Move):
            return k(t.move)
        if isinstance(n, ir.Copy):
            return k(t.copy)
        if isinstance(n, ir.Val):
            return k(t.val)
        if isinstance(n, ir.NewId):
            return k(t.new_id)
        if isinstance(n, ir.NewContext):
            return k(t.new_context)
        if isinstance(n, ir.Drop):
            return self._seq(k(t.drop * len(n.slots)), p(n.body))
        if isinstance(n, ir.Arith):
            return self._seq(k(t.arith), p(n.left), p(n.right))
        if isinstance(n, ir.Conv):
            return self._seq(k(t.conv), p(n.arg))
        if isinstance(n, (ir.Construct, ir.MkTuple)):
            elems = n.args if isinstance(n, ir.Construct) else n.elems
            return self._seq(k(t.construct + len(elems)), *(p(a) for a in elems))
        if isinstance(n, ir.Call):
            return self._seq(k(t.call), k(self.callee(n.fun)), *(p(a) for a in n.args))
        if isinstance(n, ir.Derive):
            return self._seq(k(t.derive), p(n.ctx), p(n.id))
        if isinstance(n, ir.Read):
            return self._seq(self._cell(t.cell_read, n.default), p(n.ref))
        if isinstance(n, ir.Let):
            return self._seq(k(t.let), self._unpack(n.pattern), p(n.bound), p(n.body))
        if isinstance(n, ir.Case):
            arms = set()
            for pat, body in n.arms:
                arms |= self._seq(self._unpack_below(pat), p(body))
            return self._seq(k(t.match + len(n.arms)), p(n.scrutinee), arms)
        if isinstance(n, ir.Modify):
            return self._seq(self._cell(t.cell_read + t.cell_write, n.default), p(n.ref), p(n.body))
        if isinstance(n, ir.AndReturn):
            return self._seq(k(t.and_return), p(n.value), p(n.result))
        if isinstance(n, ir.CapOp):
            return self._seq(k(t.cap_op), p(n.arg))
        if isinstance(n, ir.Cycle):
            body = p(n.body)
            total = self._seq(k(t.cycle + t.drop * len(n.after)), p(n.init))
            for _ in range(n.count):
                total = self._seq(total, body)
            return total
        if isinstance(n, ir.Try):
            ok = k(t.drop * len(n.success_drops))
            branches = set(ok)
            for h in n.handlers:
                branches |= p(h.body)
            return self._seq(k(t.try_), p(n.call), branches)
        raise TypeError(type(n).__name__)

    def _cell(self, base: int, default) -> set:
        if default is None:
            return {base}
        return {base, base + self.t.call + self.callee(default)}

    def _unpack(self, pat) -> set:
        if isinstance(pat, (ir.PTuple, ir.PCtor)):
            return self._seq({self.t.match + 1}, self._unpack_below(pat))
        return {0}

    def _unpack_below(self, pat) -> set:
        subs = pat.elems if isinstance(pat, ir.PTuple) else pat.subs if isinstance(pat, ir.PCtor) else []
        return self._seq(*(self._unpack(s) for s in subs))

    def function(self, f: ir.BFun) -> set:
        return self._seq(*(self._unpack(pat) for _, pat in f.params), self.paths(f.body))


def oracle_bound(f: ir.BFun, callee, table: CostTable = COSTS) -> int:
    """Most expensive path found by explicit enumeration."""
    return max(PathOracle(callee, table).function(f))
