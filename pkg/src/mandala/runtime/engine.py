"""Deployments and transactions against a ledger, each producing a receipt."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from ..bytecode import address, ir
from ..ledger import Ledger
from ..types import Effect, Type, accepts, render, subst
from ..validator import COSTS, CostTable, validate
from ..values import Value, encode_value, id_value, int_, render_value, type_of, uint
from .interp import CallFailed, InternalFault, Interpreter, RiskError, Stats, external_id

INT_RANGE = (-(2**63), 2**63 - 1)
UINT_RANGE = (0, 2**64 - 1)


class TxRejected(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason} {detail}".strip())
        self.reason = reason
        self.detail = detail


class DeployError(Exception):
    def __init__(self, risk: str):
        super().__init__(risk)
        self.risk = risk


class DuplicateModule(Exception):
    pass


@dataclass
class Receipt:
    status: str  # "ok" | "error"
    risk: str | None
    gas_used: int
    gas_bound: int
    digest: bytes
    value: Value | None
    rendered: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def line(self) -> str:
        status = "ok" if self.ok else f"error:{self.risk}"
        return f"{status} {self.gas_used} {self.gas_bound} {self.digest.hex()} {self.rendered}"


@dataclass
class Arg:
    """A transaction argument before it meets the parameter type."""

    kind: str  # uint | int | id | val | unit | value
    payload: object = None


class Engine:
    def __init__(self, ledger: Ledger, table: CostTable = COSTS):
        self.ledger = ledger
        self.table = table
        self.stats = Stats()

    # ---- naming helpers -----------------------------------------------------------------

    def type_name(self, ref) -> str:
        iface = self.ledger.interface(ref.module)
        return iface.types[ref.index].name if iface else ref.module.hex()[:8]

    def ctor_name(self, ref, ctor: int) -> str:
        iface = self.ledger.interface(ref.module)
        return iface.types[ref.index].ctors[ctor].name if iface else f"#{ctor}"

    def render(self, v: Value | None) -> str:
        if v is None:
            return "-"
        return render_value(v, self.type_name, self.ctor_name)

    def _tx_digest(self, kind: str, signer: str | None, parts: list) -> bytes:
        h = hashlib.sha256(b"tx:" + struct.pack("<Q", self.ledger.tx_counter))
        for p in [kind, signer or ""] + parts:
            b = p.encode() if isinstance(p, str) else p
            h.update(struct.pack("<I", len(b)) + b)
        return h.digest()

    def _count_failed(self):
        store = self.ledger.store
        store.begin()
        self.ledger.bump_tx_counter()
        store.commit()

    # ---- deployment ---------------------------------------------------------------------

    def deploy(self, data: bytes, signer: str | None = None) -> Receipt:
        """Validate, register and initialize a module. Raises Rejection, DuplicateModule or DeployError."""
        addr = address(data)
        if self.ledger.loaded(addr) is not None:
            raise DuplicateModule(f"module {addr.hex()} is already deployed")
        vm = validate(data, self.ledger, self.table)
        if self.ledger.address_of(vm.module.name) is not None:
            raise DuplicateModule(f"a module named {vm.module.name} is already deployed")
        if vm.module.init is not None and signer is None:
            raise TxRejected("MissingSigner", "init needs the deployer's Master ID")
        interp = Interpreter(self.ledger, self._tx_digest("deploy", signer, [vm.module.name]), self.stats, self.table)
        store = self.ledger.store
        store.begin()
        try:
            self.ledger.put_module(vm)
            loaded = self.ledger.loaded(addr)
            for j, v in enumerate(vm.module.vals):
                f = _val_function(v)
                value = interp.run(loaded, f, len(vm.module.funs) + 1 + j, vm.val_bounds[j], (), ())
                self.ledger.put_val(addr, j, value)
            if vm.module.init is not None:
                deployer = id_value(external_id(signer), master=True)
                interp.run(loaded, vm.module.init, len(vm.module.funs), vm.init_bound, (), (deployer,))
            self.ledger.bump_tx_counter()
        except RiskError as exc:
            store.abort()
            self.ledger._cache.pop(addr, None)
            self._count_failed()
            raise DeployError(exc.risk.name) from None
        except BaseException:
            store.abort()
            self.ledger._cache.pop(addr, None)
            raise
        store.commit()
        bound = sum(vm.val_bounds) + (vm.init_bound or 0)
        return Receipt("ok", None, interp.gas, bound, self.ledger.digest(), None, addr.hex())

    # ---- transactions -------------------------------------------------------------------

    def resolve(self, module: str, fn: str):
        addr = self.ledger.address_of(module)
        if addr is None:
            raise TxRejected("UnknownFunction", f"no module named {module}")
        loaded = self.ledger.loaded(addr)
        idx = loaded.fun_index(fn)
        if idx is None:
            raise TxRejected("UnknownFunction", f"{module} has no function {fn}")
        return loaded, idx

    def type_arg(self, name: str) -> Type:
        """Look up a type by ``Name`` or ``Module.Name``; it carries its declared capabilities."""
        mod, _, tname = name.rpartition(".")
        found = []
        for mname in self.ledger.module_names():
            if mod and mname != mod:
                continue
            iface = self.ledger.interface(self.ledger.address_of(mname))
            for t in iface.types:
                if t.name == tname and not t.params:
                    found.append(Type("Adt", (), t.caps, adt=t.ref))
        if len(found) != 1:
            raise TxRejected("ArgumentType", f"type {name} is {'ambiguous' if found else 'unknown'}")
        return found[0]

    def _argument(self, a: Arg, want: Type, signer: str | None) -> Value:
        if a.kind == "value":
            return a.payload
        if a.kind == "unit":
            return Value("unit", None, want.caps)
        if a.kind in ("uint", "int"):
            n = a.payload
            lo, hi = UINT_RANGE if want.head == "UInt" else INT_RANGE
            if want.head not in ("UInt", "Int") or not lo <= n <= hi:
                raise TxRejected("ArgumentType", f"{a.kind}:{n} does not fit {render(want)}")
            return uint(n) if want.head == "UInt" else int_(n)
        if a.kind == "id":
            master = "Master" in want.caps
            if master and signer != a.payload:
                raise TxRejected("MissingSigner", f"a Master ID for {a.payload} needs --signer {a.payload}")
            return id_value(external_id(a.payload), master=master)
        if a.kind == "val":
            mod, _, vname = a.payload.rpartition(".")
            addr = self.ledger.address_of(mod)
            iface = self.ledger.interface(addr) if addr else None
            for v in iface.vals if iface else []:
                if v.name == vname:
                    return self.ledger.get_val(addr, v.index)
            raise TxRejected("ArgumentType", f"no val {a.payload}")
        raise TxRejected("ArgumentType", f"unknown argument kind {a.kind}")

    def call(self, module: str, fn: str, args: list, targs=(), signer: str | None = None, gas_limit: int | None = None) -> Receipt:
        """Run a public function as a transaction. Raises TxRejected; risks come back as error receipts."""
        loaded, idx = self.resolve(module, fn)
        f = loaded.module.funs[idx]
        sig = loaded.interface.funs[idx]
        if sig.visibility != "public":
            raise TxRejected("NotPublic", f"{module}.{fn} is {sig.visibility}")
        targs = tuple(self.type_arg(t) if isinstance(t, str) else t for t in targs)
        if len(targs) != len(sig.tparams):
            raise TxRejected("ArgumentType", f"{fn} takes {len(sig.tparams)} type arguments")
        if len(args) != len(sig.params):
            raise TxRejected("ArgumentType", f"{fn} takes {len(sig.params)} arguments")
        values = []
        for a, p in zip(args, sig.params):
            want = subst(p, targs)
            v = a if isinstance(a, Value) else self._argument(a, want, signer)
            if not accepts(want, type_of(v)):
                raise TxRejected("ArgumentType", f"argument does not fit {render(want)}")
            values.append(v)
        bound = loaded.record.bounds[idx]
        limit = bound if gas_limit is None else gas_limit
        if limit < bound:
            raise TxRejected("InsufficientGasLimit", f"limit {limit} is below the bound {bound}")
        parts = [module, fn] + [self.render(v) if v.kind == "adt" else encode_value(v) for v in values]
        interp = Interpreter(self.ledger, self._tx_digest("call", signer, parts), self.stats, self.table)
        store = self.ledger.store
        store.begin()
        try:
            result = interp.run(loaded, f, idx, bound, targs, tuple(values))
        except CallFailed as exc:
            store.abort()
            self._count_failed()
            return Receipt("error", exc.risk.name, interp.gas, bound, self.ledger.digest(), None, "-")
        except BaseException:
            store.abort()
            raise
        self.ledger.bump_tx_counter()
        store.commit()
        return Receipt("ok", None, interp.gas, bound, self.ledger.digest(), result, self.render(result))


def _val_function(v):
    return ir.BFun(v.name, "private", None, Effect.INIT, None, (), (), [], v.type, v.slots, v.body)


__all__ = ["Engine", "Receipt", "Arg", "TxRejected", "DeployError", "DuplicateModule", "InternalFault"]
