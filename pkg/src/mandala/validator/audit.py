"""Single-byte mutation audit of the validator.

A mutant is one corpus module with one byte changed. Either the validator (or
the validation of a module depending on it) rejects the mutant, or the golden
transaction suite must behave exactly as on the original corpus. Mutations
that only rename something or change a literal constant, a loop count or an
arithmetic operator are excluded: they yield a different but well-formed
program, which no validator can or should reject.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field

from ..bytecode import DecodeError, address, decode, encode, ir
from ..types import BUILTIN_CAPS, BUILTIN_RISKS, AdtRef, Effect, FunRef, Risk, Type
from .verify import Rejection

STRUCTURAL_MASK = 0x80


@dataclass(frozen=True)
class Mutant:
    module: int  # index into the corpus
    offset: int
    value: int  # replacement byte
    kind: str  # "structural" or "semantic:<rule>"

    def apply(self, data: bytes) -> bytes:
        return data[: self.offset] + bytes([self.value]) + data[self.offset + 1 :]


@dataclass
class Outcome:
    mutant: Mutant
    verdict: str  # rejected | equivalent | interface | divergent
    detail: str = ""


@dataclass
class AuditReport:
    outcomes: list = field(default_factory=list)

    def count(self, verdict: str) -> int:
        return sum(1 for o in self.outcomes if o.verdict == verdict)

    @property
    def divergent(self) -> list:
        return [o for o in self.outcomes if o.verdict == "divergent"]

    def summary(self) -> str:
        return (
            f"mutants={len(self.outcomes)} rejected={self.count('rejected')} "
            f"equivalent={self.count('equivalent')} interface={self.count('interface')} accepted-divergent={self.count('divergent')}"
        )


# ---- walking the IR with setters ---------------------------------------------------------


def _walk(obj, setter, fname=""):
    yield obj, setter, fname
    if isinstance(obj, (Type, AdtRef, FunRef, Risk, Effect, str, bytes, int, bool, frozenset)) or obj is None:
        return
    if dataclasses.is_dataclass(obj):
        if obj.__dataclass_params__.frozen:
            return
        for f in dataclasses.fields(obj):
            yield from _walk(getattr(obj, f.name), lambda nv, o=obj, n=f.name: setattr(o, n, nv), f.name)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _walk(v, lambda nv, lst=obj, i=i: lst.__setitem__(i, nv), fname)
    elif isinstance(obj, tuple):
        for i, v in enumerate(obj):
            yield from _walk(v, lambda nv, t=obj, i=i, s=setter: s(t[:i] + (nv,) + t[i + 1 :]), fname)


def _sites(m: ir.BModule) -> list:
    return list(_walk(m, lambda nv: None))


def _toggle(caps: frozenset) -> list:
    return [caps ^ {c} for c in BUILTIN_CAPS]


def _variants(obj, fname) -> list:
    """Replacement values for one site of the IR, named by rule."""
    out = []
    if isinstance(obj, ir.Move):
        out.append(("move-to-copy", ir.Copy(obj.slot)))
    elif isinstance(obj, ir.Copy):
        out.append(("copy-to-move", ir.Move(obj.slot)))
    elif isinstance(obj, Effect):
        out += [("effect", e) for e in Effect if e != obj]
    elif isinstance(obj, bool):
        if fname in ("open", "public", "attach", "shorthand"):
            out.append((f"flip-{fname}", not obj))
    elif isinstance(obj, int):
        if fname in ("slot", "slots", "index", "ctor", "protected"):
            out += [(f"{fname}+1", obj + 1)] + ([(f"{fname}-1", obj - 1)] if obj > 0 else [])
    elif isinstance(obj, str):
        if fname == "visibility" and obj == "private":
            out.append(("make-public", "public"))
        elif fname == "target":
            out.append(("conv-target", "Int" if obj == "UInt" else "UInt"))
    elif isinstance(obj, frozenset) and fname == "caps":
        out += [("type-caps", c) for c in _toggle(obj)]
    elif isinstance(obj, Type) and obj.head not in ("Tuple", "Var"):
        out += [("sig-caps", Type(obj.head, obj.args, c, obj.adt, obj.var)) for c in _toggle(obj.caps)]
    elif isinstance(obj, Risk) and obj.module is None:
        out += [("risk", Risk(r)) for r in BUILTIN_RISKS if r != obj.name]
    elif isinstance(obj, FunRef):
        out.append(("callee+1", FunRef(obj.module, obj.index + 1)))
    elif isinstance(obj, AdtRef):
        out.append(("adt+1", AdtRef(obj.module, obj.index + 1)))
    return out


def semantic_mutants(index: int, data: bytes) -> list:
    """IR-level flips whose encoding differs from ``data`` in exactly one byte."""
    base = decode(data)
    sites = _sites(base)
    found = []
    for k, (obj, _, fname) in enumerate(sites):
        for rule, new in _variants(obj, fname):
            m = copy.deepcopy(base)
            _, set_it, _ = _sites(m)[k]
            set_it(new)
            try:
                mutated = encode(m)
            except Exception:
                continue
            if len(mutated) != len(data):
                continue
            diff = [i for i in range(len(data)) if data[i] != mutated[i]]
            if len(diff) == 1:
                found.append(Mutant(index, diff[0], mutated[diff[0]], f"semantic:{rule}"))
    return found


def _normalized(m: ir.BModule) -> bytes:
    """Encoding with names, literals, loop counts and operators erased."""
    m = copy.deepcopy(m)
    for obj, set_it, fname in _sites(m):
        if isinstance(obj, ir.BType):
            obj.ctors = [("", fields) for _, fields in obj.ctors]
        elif fname == "name" and isinstance(obj, str):
            set_it("")
        elif fname in ("value", "count") and isinstance(obj, int) and not isinstance(obj, bool):
            set_it(0)
        elif fname == "op":
            set_it("+")
    return encode(m)


def is_data_mutation(original: bytes, mutated: bytes) -> bool:
    """Whether the mutation only changes data: a different program, not an unsound one."""
    try:
        a, b = decode(original), decode(mutated)
    except DecodeError:
        return False
    return _normalized(a) == _normalized(b)


def curated_mutants(corpus: list, total: int = 200) -> list:
    """Semantic flips first, then evenly spread structural flips, up to ``total``."""
    semantic, seen = [], set()
    for i, data in enumerate(corpus):
        for mu in semantic_mutants(i, data):
            key = (mu.module, mu.offset, mu.value)
            if key not in seen and not is_data_mutation(data, mu.apply(data)):
                seen.add(key)
                semantic.append(mu)
    structural = []
    for i, data in enumerate(corpus):
        for off in range(len(data)):
            mu = Mutant(i, off, data[off] ^ STRUCTURAL_MASK, "structural")
            if (i, off, mu.value) not in seen and not is_data_mutation(data, mu.apply(data)):
                structural.append(mu)
    semantic = _spread(semantic, min(len(semantic), total * 3 // 5))
    return semantic + _spread(structural, total - len(semantic))


def _spread(items: list, n: int) -> list:
    if n >= len(items):
        return list(items)
    return [items[(k * len(items)) // n] for k in range(n)]


# ---- running a universe ------------------------------------------------------------------


def run_universe(corpus: list, transactions: list, signer: str) -> tuple:
    """Deploy ``corpus`` into a fresh in-memory ledger and run ``transactions``.

    Returns ("rejected", detail) if any module fails validation, otherwise
    ("ran", fingerprint, stats).
    """
    from ..ledger import Ledger
    from ..runtime import DeployError, DuplicateModule, Engine, InternalFault, TxRejected

    engine = Engine(Ledger.memory())
    deploys = []
    for data in corpus:
        try:
            engine.deploy(data, signer=signer)
            deploys.append(("ok", ""))
        except Rejection as exc:
            return ("rejected", exc.line())
        except (DuplicateModule, DeployError, TxRejected, InternalFault) as exc:
            deploys.append((type(exc).__name__, str(exc)))
    receipts = []
    for module, fn, args, targs, who in transactions:
        try:
            r = engine.call(module, fn, args, targs, signer=who)
            receipts.append((r.status, r.risk, r.rendered))
        except TxRejected as exc:
            receipts.append(("rejected", exc.reason, ""))
        except InternalFault as exc:
            receipts.append(("fault", exc.kind, exc.detail))
    return ("ran", (tuple(deploys), tuple(receipts), state_fingerprint(engine)), engine.stats)


def state_fingerprint(engine) -> tuple:
    """Cells and vals rendered by name, so that fingerprints compare across addresses."""
    ledger = engine.ledger
    cells = tuple(sorted((k.hex(), engine.render(v)) for k, v in ledger.cells().items()))
    vals = []
    for name in ledger.module_names():
        loaded = ledger.loaded(ledger.address_of(name))
        for j, v in enumerate(loaded.module.vals):
            vals.append((name, v.name, engine.render(ledger.get_val(loaded.address, j))))
    return cells, tuple(vals)


def relink(corpus: list, index: int, mutated: bytes) -> list:
    """Replace module ``index`` and point every dependent's import at the new address."""
    old, new = address(corpus[index]), address(mutated)
    out = list(corpus)
    out[index] = mutated
    for j in range(index + 1, len(out)):
        out[j] = out[j].replace(old, new)
    return out


def _boundary_only(reference: tuple, fp: tuple) -> bool:
    """Every difference is a transaction the mutant's interface turned away before it ran.

    Such a transaction executes no code, so it cannot witness an unsound
    acceptance; the final state is not comparable in that case.
    """
    if reference[0] != fp[0]:
        return False
    pairs = [(r, m) for r, m in zip(reference[1], fp[1]) if r != m]
    return bool(pairs) and all(m[0] == "rejected" and m[1] in ("ArgumentType", "NotPublic") for _, m in pairs)


def mutation_audit(corpus: list, transactions: list, signer: str, mutants: list | None = None) -> AuditReport:
    baseline = run_universe(corpus, transactions, signer)
    if baseline[0] != "ran":
        raise ValueError(f"the unmutated corpus does not deploy: {baseline[1]}")
    reference = baseline[1]
    report = AuditReport()
    for mu in mutants if mutants is not None else curated_mutants(corpus):
        mutated = mu.apply(corpus[mu.module])
        result = run_universe(relink(corpus, mu.module, mutated), transactions, signer)
        if result[0] == "rejected":
            report.outcomes.append(Outcome(mu, "rejected", result[1]))
            continue
        _, fp, stats = result
        problems = []
        if stats.faults:
            problems.append(f"faults {stats.faults}")
        if stats.gas_violations:
            problems.append(f"gas {stats.gas_violations[:2]}")
        verdict = "equivalent"
        if fp != reference:
            verdict = "interface" if _boundary_only(reference, fp) else "divergent"
        if problems:
            verdict = "divergent"
        report.outcomes.append(Outcome(mu, verdict, "; ".join(problems)))
    return report
