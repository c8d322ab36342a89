"""Command-line front end: check, compile, deploy, call, inspect and corpus."""

from __future__ import annotations

import argparse
import re
import sys
import tempfile
from pathlib import Path

from . import golden
from .bytecode import DecodeError, address, compile_module, decode, encode
from .interface import MemoryRegistry
from .ledger import Ledger, StoreCorrupt, StoreLocked
from .runtime import Arg, DeployError, DuplicateModule, Engine, TxRejected, cell_key, external_id
from .sema import ElaborationError, elaborate_source
from .validator import Rejection, validate

DEFAULT_STORE = ".mandala"


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _out(line: str = ""):
    print(line, flush=True)


def _err(line: str):
    print(line, file=sys.stderr, flush=True)


def _read(path: str, binary: bool = False):
    try:
        return Path(path).read_bytes() if binary else Path(path).read_text()
    except OSError as exc:
        raise CliError(f"IO {path}: {exc.strerror}", 2) from None


def _store_registry(args):
    """The deployed registry if the store exists, else an empty one. Returns (registry, ledger or None)."""
    if Path(args.store).exists():
        ledger = Ledger.open(args.store)
        return MemoryRegistry(ledger), ledger
    return MemoryRegistry(), None


def _compile(path: str, reg) -> bytes:
    return encode(compile_module(elaborate_source(_read(path), reg)))


# ---- commands ----------------------------------------------------------------------------


def cmd_check(args) -> int:
    reg, ledger = _store_registry(args)
    status = 0
    try:
        for f in args.files:
            try:
                data = _compile(f, reg)
                vm = validate(data, reg)
                reg.add(vm.interface, {vm.fun_ref(fn.name): b for fn, b in zip(vm.module.funs, vm.bounds)})
                if not args.machine:
                    _out(f"OK {f}")
            except ElaborationError as exc:
                for d in exc.diagnostics:
                    _err(d.format(f))
                status = 1
            except Rejection as exc:
                _err(f"{exc.line()} {f}")
                status = 1
        if args.machine:
            _out("OK" if status == 0 else "FAIL")
    finally:
        if ledger is not None:
            ledger.close()
    return status


def cmd_compile(args) -> int:
    reg, ledger = _store_registry(args)
    try:
        try:
            data = _compile(args.file, reg)
        except ElaborationError as exc:
            for d in exc.diagnostics:
                _err(d.format(args.file))
            return 1
    finally:
        if ledger is not None:
            ledger.close()
    out = Path(args.output) if args.output else Path(args.file).with_suffix(".mdlc")
    try:
        out.write_bytes(data)
    except OSError as exc:
        raise CliError(f"IO {out}: {exc.strerror}", 2) from None
    _out(address(data).hex() if args.machine else f"{address(data).hex()} {out}")
    return 0


def _load_module_bytes(path: str, ledger: Ledger) -> bytes:
    if path.endswith(".mdl"):
        try:
            return _compile(path, ledger)
        except ElaborationError as exc:
            for d in exc.diagnostics:
                _err(d.format(path))
            raise CliError("compilation failed") from None
    return _read(path, binary=True)


def cmd_deploy(args) -> int:
    with Ledger.open(args.store) as ledger:
        engine = Engine(ledger)
        for path in args.files:
            data = _load_module_bytes(path, ledger)
            try:
                r = engine.deploy(data, signer=args.signer)
            except Rejection as exc:
                _out(exc.line())
                return 1
            except DuplicateModule as exc:
                _out(f"DuplicateModule {exc}")
                return 1
            except DeployError as exc:
                _out(f"DeployError({exc.risk}) {ledger.digest().hex()}")
                return 1
            except TxRejected as exc:
                _out(f"TxRejected({exc.reason}) {exc.detail}")
                return 1
            if not args.machine:
                loaded = ledger.loaded(bytes.fromhex(r.rendered))
                _out(f"{loaded.name} {r.rendered}")
                for fn, b in zip(loaded.module.funs, loaded.record.bounds):
                    _out(f"  fn {fn.name} bound={b}")
            _out(r.line())
    return 0


_INT = re.compile(r"-?\d+")


def parse_arg(text: str) -> Arg:
    """``uint:5``, ``int:-3``, ``id:alice``, ``val:Module.name`` or ``unit``."""
    if text == "unit":
        return Arg("unit")
    kind, sep, rest = text.partition(":")
    if not sep:
        raise CliError(f"argument {text!r} has no kind prefix")
    if kind in ("uint", "int"):
        if not _INT.fullmatch(rest):
            raise CliError(f"argument {text!r} is not a number")
        return Arg(kind, int(rest))
    if kind in ("id", "val") and rest:
        return Arg(kind, rest)
    raise CliError(f"argument {text!r} is not understood")


def parse_type_args(text: str) -> list:
    inner = text.strip()[1:-1]
    return [t.strip() for t in inner.split(",") if t.strip()]


def cmd_call(args) -> int:
    module, _, fn = args.target.rpartition(".")
    if not module:
        raise CliError("call target must be Module.function")
    rest = list(args.args)
    targs = []
    if rest and rest[0].startswith("["):
        targs = parse_type_args(rest.pop(0))
    call_args = [parse_arg(a) for a in rest]
    with Ledger.open(args.store) as ledger:
        engine = Engine(ledger)
        try:
            r = engine.call(module, fn, call_args, targs, signer=args.signer, gas_limit=args.gas)
        except TxRejected as exc:
            _out(f"TxRejected({exc.reason}) {exc.detail}")
            return 1
        _out(r.line())
        return 0 if r.ok else 1


def _find_context(v):
    if v.kind == "context":
        return v
    if v.kind in ("adt", "tuple"):
        for f in v.data:
            hit = _find_context(f)
            if hit is not None:
                return hit
    return None


def _val(engine: Engine, path: str):
    mod, _, name = path.rpartition(".")
    addr = engine.ledger.address_of(mod)
    if addr is None:
        return None
    for v in engine.ledger.interface(addr).vals:
        if v.name == name:
            return engine.ledger.get_val(addr, v.index)
    return None


def cmd_inspect(args) -> int:
    with Ledger.open(args.store) as ledger:
        engine = Engine(ledger)
        target = args.target
        if target.startswith("cell:"):
            spec = target[5:]
            if re.fullmatch(r"[0-9a-f]{64}", spec):
                key = bytes.fromhex(spec)
            else:
                path, _, who = spec.rpartition(":")
                holder = _val(engine, path)
                ctx = _find_context(holder) if holder is not None else None
                if ctx is None:
                    raise CliError(f"NotFound {target}")
                key = cell_key(ctx.data, external_id(who))
            v = ledger.get_cell(key)
            if v is None:
                raise CliError(f"NotFound {target}")
            _out(engine.render(v))
            return 0
        if target.startswith("val:"):
            v = _val(engine, target[4:])
            if v is None:
                raise CliError(f"NotFound {target}")
            _out(engine.render(v))
            return 0
        addr = bytes.fromhex(target) if re.fullmatch(r"[0-9a-f]{64}", target) else ledger.address_of(target)
        loaded = ledger.loaded(addr) if addr else None
        if loaded is None:
            raise CliError(f"NotFound {target}")
        iface = loaded.interface
        if args.machine:
            _out(f"{loaded.name} {addr.hex()} types={len(iface.types)} funs={len(iface.funs)} vals={len(iface.vals)}")
            return 0
        _out(f"module {loaded.name} {addr.hex()}")
        namer = engine.type_name
        for t in iface.types:
            ctors = " | ".join(c.name + ("(" + ", ".join(_show(f, namer, t.params) for f in c.fields) + ")" if c.fields else "") for c in t.ctors)
            caps = " ".join(sorted(str(c) for c in t.caps))
            _out(f"  type {t.name}{'[' + ','.join(t.params) + ']' if t.params else ''} caps={{{caps}}} {ctors}")
        for f, b in zip(iface.funs, loaded.record.bounds):
            params = ", ".join(_show(p, namer, f.tparams) for p in f.params)
            tps = "[" + ",".join(f.tparams) + "]" if f.tparams else ""
            _out(f"  fn {f.visibility} {f.effect.keyword} {f.name}{tps}({params}) -> {_show(f.ret, namer, f.tparams)} bound={b}")
        for v, b in zip(iface.vals, loaded.record.val_bounds):
            _out(f"  val {v.name}: {_show(v.type, namer)} = {engine.render(ledger.get_val(addr, v.index))} bound={b}")
        if loaded.record.init_bound is not None:
            _out(f"  init bound={loaded.record.init_bound}")
        return 0


def _show(t, namer, params=()) -> str:
    if t.head == "Var":
        return params[t.var] if t.var < len(params) else f"T{t.var}"
    if t.head == "Tuple":
        return "(" + ", ".join(_show(a, namer, params) for a in t.args) + ")"
    base = namer(t.adt) if t.head == "Adt" else t.head
    if t.args:
        base += "[" + ", ".join(_show(a, namer, params) for a in t.args) + "]"
    return base


def cmd_corpus(args) -> int:
    path = args.store_explicit or tempfile.mkdtemp(prefix="mandala-corpus-")
    with Ledger.open(path) as ledger:
        engine = Engine(ledger)
        for name, data in zip(golden.CORPUS, golden.compile_corpus()):
            r = engine.deploy(data, signer=golden.DEPLOYER)
            if not args.machine:
                _out(f"deploy {name} {r.line()}")
        for module, fn, call_args, targs, signer in golden.golden_transactions():
            r = engine.call(module, fn, call_args, targs, signer=signer)
            if not args.machine:
                _out(f"call {module}.{fn} {r.line()}")
        bad = engine.stats.faults or engine.stats.gas_violations
        _out(f"digest {ledger.digest().hex()}")
        return 1 if bad else 0


def cmd_decode(args) -> int:
    data = _read(args.file, binary=True)
    try:
        m = decode(data)
    except DecodeError as exc:
        _out(f"DecodeError offset={exc.offset} {exc.reason}")
        return 1
    _out(f"{m.name} {address(data).hex()} funs={len(m.funs)} vals={len(m.vals)} types={len(m.types)}")
    return 0


# ---- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store", default=argparse.SUPPRESS, help=f"ledger directory (default {DEFAULT_STORE})")
    common.add_argument("--machine", action="store_true", default=argparse.SUPPRESS, help="one result line per command")
    p = argparse.ArgumentParser(prog="mandala", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="elaborate and validate source files")
    s.add_argument("files", nargs="+")
    s.set_defaults(run=cmd_check)

    s = sub.add_parser("compile", parents=[common], help="compile one source file to .mdlc")
    s.add_argument("file")
    s.add_argument("-o", "--output")
    s.set_defaults(run=cmd_compile)

    s = sub.add_parser("deploy", parents=[common], help="validate and deploy .mdlc or .mdl files")
    s.add_argument("files", nargs="+")
    s.add_argument("--signer")
    s.set_defaults(run=cmd_deploy)

    s = sub.add_parser("call", parents=[common], help="run a public function as a transaction")
    s.add_argument("target", help="Module.function")
    s.add_argument("args", nargs="*", help="[TypeArgs] then uint:N int:N id:NAME val:Module.name unit")
    s.add_argument("--signer")
    s.add_argument("--gas", type=int)
    s.set_defaults(run=cmd_call)

    s = sub.add_parser("inspect", parents=[common], help="show a module, a val or a cell")
    s.add_argument("target", help="module name or address, val:Module.name, cell:<hex> or cell:Module.val:idname")
    s.set_defaults(run=cmd_inspect)

    s = sub.add_parser("corpus", parents=[common], help="deploy the bundled corpus and run the golden transactions")
    s.set_defaults(run=cmd_corpus)

    s = sub.add_parser("decode", parents=[common], help="decode an .mdlc file")
    s.add_argument("file")
    s.set_defaults(run=cmd_decode)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.store_explicit = getattr(args, "store", None)
    args.store = args.store_explicit or DEFAULT_STORE
    args.machine = bool(getattr(args, "machine", False))
    try:
        return args.run(args)
    except CliError as exc:
        _err(str(exc))
        return exc.code
    except (StoreCorrupt, StoreLocked) as exc:
        _err(f"{type(exc).__name__} {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
