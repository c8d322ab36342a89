"""The ledger view used by the validator and the runtime: registry, cells, vals, defaults."""

from __future__ import annotations

import struct
from dataclasses import dataclass

from ..bytecode import decode, interface_from_module, ir, resolver
from ..interface import ModuleInterface
from ..types import AdtRef, FunRef
from ..values import Value, decode_value, encode_value
from .store import CELLS, DEFAULTS, META, MODULES, NAMES, VALS, Store

TX_COUNTER = b"tx_counter"


class PersistViolation(Exception):
    """A value without the required capabilities reached the store."""


@dataclass
class ModuleRecord:
    seq: int
    bounds: list
    val_bounds: list
    init_bound: int | None
    data: bytes

    def encode(self) -> bytes:
        out = [struct.pack("<IH", self.seq, len(self.bounds))]
        out += [struct.pack("<Q", b) for b in self.bounds]
        out.append(struct.pack("<H", len(self.val_bounds)))
        out += [struct.pack("<Q", b) for b in self.val_bounds]
        if self.init_bound is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01" + struct.pack("<Q", self.init_bound))
        out.append(self.data)
        return b"".join(out)

    @classmethod
    def decode(cls, raw: bytes) -> "ModuleRecord":
        seq, n = struct.unpack_from("<IH", raw, 0)
        pos = 6
        bounds = list(struct.unpack_from(f"<{n}Q", raw, pos))
        pos += 8 * n
        (n,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        val_bounds = list(struct.unpack_from(f"<{n}Q", raw, pos))
        pos += 8 * n
        init_bound = None
        if raw[pos]:
            (init_bound,) = struct.unpack_from("<Q", raw, pos + 1)
            pos += 8
        return cls(seq, bounds, val_bounds, init_bound, raw[pos + 1 :])


@dataclass
class Loaded:
    """A deployed module decoded once and kept for execution."""

    address: bytes
    name: str
    module: ir.BModule
    interface: ModuleInterface
    record: ModuleRecord

    def __post_init__(self):
        self.key = resolver(self.module, self.address)

    def fun_index(self, name: str) -> int | None:
        for i, f in enumerate(self.module.funs):
            if f.name == name:
                return i
        return None


def _ref_key(module: bytes, index: int) -> bytes:
    return module + struct.pack("<H", index)


class Ledger:
    """Registry protocol plus typed accessors over a Store."""

    def __init__(self, store: Store):
        self.store = store
        self._cache: dict = {}
        store.listeners.append(self._after_commit)
        self.sync_files()

    @classmethod
    def open(cls, path, **kw) -> "Ledger":
        return cls(Store.open(path, **kw))

    @classmethod
    def memory(cls) -> "Ledger":
        return cls(Store.memory())

    def close(self):
        self.store.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # ---- registry --------------------------------------------------------------------

    def address_of(self, name: str):
        return self.store.get(NAMES, name.encode())

    def module_names(self) -> list:
        recs = [(ModuleRecord.decode(raw).seq, addr) for addr, raw in self.store.maps[MODULES].items()]
        return [self.loaded(a).name for _, a in sorted(recs)]

    def loaded(self, address: bytes) -> Loaded | None:
        raw = self.store.get(MODULES, address)
        if raw is None:
            return None
        hit = self._cache.get(address)
        if hit is not None:
            return hit
        rec = ModuleRecord.decode(raw)
        m = decode(rec.data)
        hit = Loaded(address, m.name, m, interface_from_module(m, address), rec)
        self._cache[address] = hit
        return hit

    def interface(self, address: bytes):
        hit = self.loaded(address)
        return hit.interface if hit is not None else None

    def default_for(self, ref: AdtRef):
        raw = self.store.get(DEFAULTS, _ref_key(ref.module, ref.index))
        if raw is None:
            return None
        return FunRef(raw[:32], struct.unpack("<H", raw[32:])[0])

    def gas_bound(self, ref: FunRef):
        hit = self.loaded(ref.module)
        if hit is None or not 0 <= ref.index < len(hit.record.bounds):
            return None
        return hit.record.bounds[ref.index]

    # ---- writes (inside a store transaction) -----------------------------------------

    def put_module(self, vm) -> None:
        seq = len(self.store.maps[MODULES])
        rec = ModuleRecord(seq, list(vm.bounds), list(vm.val_bounds), vm.init_bound, vm.data)
        self.store.put(MODULES, vm.address, rec.encode())
        self.store.put(NAMES, vm.module.name.encode(), vm.address)
        for f in vm.interface.funs:
            if f.default_for is not None:
                self.store.put(DEFAULTS, _ref_key(f.default_for.module, f.default_for.index), _ref_key(vm.address, f.ref.index))

    def get_cell(self, key: bytes) -> Value | None:
        raw = self.store.get(CELLS, key)
        return decode_value(raw) if raw is not None else None

    def put_cell(self, key: bytes, v: Value):
        if not v.has("Persist"):
            raise PersistViolation("cell value lacks Persist")
        self.store.put(CELLS, key, encode_value(v))

    def get_val(self, module: bytes, index: int) -> Value | None:
        raw = self.store.get(VALS, _ref_key(module, index))
        return decode_value(raw) if raw is not None else None

    def put_val(self, module: bytes, index: int, v: Value):
        if not (v.has("Persist") and v.has("Copy")):
            raise PersistViolation("val lacks Persist or Copy")
        self.store.put(VALS, _ref_key(module, index), encode_value(v))

    @property
    def tx_counter(self) -> int:
        raw = self.store.get(META, TX_COUNTER)
        return struct.unpack("<Q", raw)[0] if raw else 0

    def bump_tx_counter(self):
        self.store.put(META, TX_COUNTER, struct.pack("<Q", self.tx_counter + 1))

    def cells(self) -> dict:
        return {k: decode_value(v) for k, v in self.store.maps[CELLS].items()}

    def digest(self) -> bytes:
        return self.store.digest()

    # ---- files ------------------------------------------------------------------------

    def _after_commit(self, puts):
        if any(m in (MODULES, NAMES) for m, _, _ in puts):
            self.sync_files()

    def sync_files(self):
        """Mirror deployed modules as ``modules/<hex>.mdlc`` and the name table as ``manifest.txt``."""
        if self.store.path is None:
            return
        folder = self.store.path / "modules"
        for addr, raw in self.store.maps[MODULES].items():
            p = folder / f"{addr.hex()}.mdlc"
            if not p.exists():
                self.store.write_file(f"modules/{addr.hex()}.mdlc", ModuleRecord.decode(raw).data)
        lines = [f"{name.decode()} {addr.hex()}\n" for name, addr in sorted(self.store.maps[NAMES].items())]
        text = "".join(lines).encode()
        p = self.store.path / "manifest.txt"
        if not p.exists() or p.read_bytes() != text:
            self.store.write_file("manifest.txt", text)
