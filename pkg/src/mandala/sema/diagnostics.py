from __future__ import annotations

from dataclasses import dataclass, field

# Stable codes; tests and tooling key on them.
CODES = {
    "E-NAME-UNKNOWN": "unknown name",
    "E-NAME-AMBIG": "name provided by more than one imported module",
    "E-NAME-DUP": "duplicate declaration",
    "E-IMPORT-MISSING": "dependency not deployed",
    "E-REC-FORWARD": "reference to the same or a later declaration",
    "E-TYPE-MISMATCH": "type mismatch",
    "E-MATCH-NONEXH": "non-exhaustive match",
    "E-GENERIC-AMBIG": "type argument cannot be inferred",
    "E-CTOR-CLOSED": "constructor of a closed type used outside its module",
    "E-PERSIST": "cell content lacks Persist",
    "E-LIN-COPY": "value without Copy used more than once",
    "E-LIN-DROP": "value without Drop left unused",
    "E-INSPECT": "unpacking without Inspect outside the defining module",
    "E-CAP-ATTACH": "capability attached without the right to do so",
    "E-CAP-STRUCT": "declared capability not supported by a field",
    "E-CAP-TARGET": "capability not applicable to this type",
    "E-CAP-MODIFY": "modify through a reference without Modify",
    "E-VIS-PROTECTED": "protected function called without defining its type argument",
    "E-VIS-PRIVATE": "private function called from another module",
    "E-EFF-ESCALATE": "effect exceeds the declared effect",
    "E-EFF-MODIFY-IMPURE": "modify transition is not pure",
    "E-VAL-EFFECT": "val initializer is neither pure nor init",
    "E-VAL-CAPS": "val type lacks Copy or Persist",
    "E-RISK-UNDECLARED": "risk neither caught nor declared",
    "E-SYNTAX": "lexical or syntax error",
}


@dataclass
class Diagnostic:
    code: str
    pos: tuple
    message: str
    related: list = field(default_factory=list)

    def format(self, file: str = "<input>") -> str:
        line, col = self.pos
        return f"{self.code} {file}:{line}:{col} {self.message}"

    def __str__(self) -> str:
        return self.format()


class ElaborationError(Exception):
    def __init__(self, diagnostics: list):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics

    @property
    def codes(self) -> list:
        return [d.code for d in self.diagnostics]
