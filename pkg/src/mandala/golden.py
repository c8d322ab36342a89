"""The bundled corpus and the golden transaction suite run against it."""

from __future__ import annotations

from importlib import resources

from .bytecode import compile_module, encode
from .interface import MemoryRegistry
from .runtime import Arg
from .sema import elaborate_source
from .validator import validate

# deployment order; the first four are the language's reference listings
LISTINGS = ("token", "purse", "purse_storage", "my_fix_supply_token")
CORPUS = LISTINGS + ("teller",)
DEPLOYER = "alice"
TOKEN = "MyToken"
SUPPLY = 100_000_000


def source(name: str) -> str:
    return resources.files("mandala.corpus").joinpath(f"{name}.mdl").read_text()


def negative_sources() -> dict:
    folder = resources.files("mandala.corpus").joinpath("negative")
    files = sorted(folder.iterdir(), key=lambda p: p.name)
    return {p.name: p.read_text() for p in files if p.name.endswith(".mdl") and p.name != "support.mdl"}


def expected_code(text: str) -> str | None:
    for line in text.splitlines():
        if line.strip().startswith("// expect:"):
            return line.split(":", 1)[1].strip()
    return None


def compile_corpus(names=CORPUS, reg: MemoryRegistry | None = None) -> list:
    """Compile modules in order, each against the interfaces of the ones before it."""
    reg = reg if reg is not None else MemoryRegistry()
    out = []
    for n in names:
        data = encode(compile_module(elaborate_source(source(n), reg)))
        vm = validate(data, reg)
        reg.add(vm.interface, {vm.fun_ref(f.name): b for f, b in zip(vm.module.funs, vm.bounds)})
        out.append(data)
    return out


def negative_registry() -> MemoryRegistry:
    """The listings plus the helper module the negative programs import."""
    reg = MemoryRegistry()
    compile_corpus(LISTINGS + ("negative/support",), reg)
    return reg


def store_arg():
    return Arg("val", "MyFixSupplyToken.defaultStore")


def golden_transactions() -> list:
    """(module, function, args, type args, signer) tuples exercising every construct of the corpus."""
    def ids(*names):
        return [Arg("id", n) for n in names]

    s = store_arg
    return [
        ("PurseStorage", "transfer", ids("alice", "bob") + [s(), Arg("int", 250)], [TOKEN], "alice"),
        ("PurseStorage", "transfer", ids("bob", "carol") + [s(), Arg("int", 251)], [TOKEN], "bob"),
        ("PurseStorage", "transfer", ids("bob", "carol") + [s(), Arg("int", -1)], [TOKEN], "bob"),
        ("Teller", "tryPay", ids("bob", "alice") + [s(), Arg("int", 1000)], [TOKEN], "bob"),
        ("Teller", "tryPay", ids("bob", "carol") + [s(), Arg("int", 50)], [TOKEN], "bob"),
        ("Teller", "drip", ids("alice", "dave") + [s(), Arg("int", 7)], [TOKEN], "alice"),
        ("Teller", "pay2", ids("alice", "bob", "carol") + [s(), Arg("int", 5), Arg("int", 6)], [TOKEN], "alice"),
        ("Teller", "pay2", ids("carol", "bob", "dave") + [s(), Arg("int", 50), Arg("int", 1)], [TOKEN], "carol"),
        ("PurseStorage", "getPurse", ids("bob") + [s()], [TOKEN], None),
    ]
