from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = frozenset(
    """module import type capability open risk public private protected pure init
    dependent active default val let in case of modify with return try catch cycle
    from as""".split()
)

# longest first
PUNCTUATION = ("=>", "{", "}", "(", ")", "[", "]", ",", ":", "=", "&", "+", "-", ".", "|", "*")


class LexError(Exception):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | uint-literal | int-literal | punctuation | eof
    lexeme: str
    line: int
    column: int
    offset: int

    @property
    def end(self) -> int:
        return self.offset + len(self.lexeme)

    def __repr__(self) -> str:
        return f"{self.kind}:{self.lexeme!r}@{self.line}:{self.column}"


def _is_ident_start(ch: str) -> bool:
    return ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def _is_ident_char(ch: str) -> bool:
    return _is_ident_start(ch) or ("0" <= ch <= "9")


def tokenize(source: str | bytes) -> list[Token]:
    """Split Mandala source into tokens. The trailing ``eof`` token is not included."""
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LexError(1, exc.start + 1, "source is not valid UTF-8") from None

    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j < 0 else j
            col += j - i
            i = j
            continue
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(source[j]):
                j += 1
            word = source[i:j]
            kind = "keyword" if word in KEYWORDS else "identifier"
            tokens.append(Token(kind, word, line, col, i))
            col += j - i
            i = j
            continue
        if "0" <= ch <= "9":
            j = i + 1
            while j < n and "0" <= source[j] <= "9":
                j += 1
            kind = "uint-literal"
            if j < n and source[j] == "i":
                j += 1
                kind = "int-literal"
            if j < n and _is_ident_char(source[j]):
                raise LexError(line, col, f"malformed number literal {source[i:j + 1]!r}")
            tokens.append(Token(kind, source[i:j], line, col, i))
            col += j - i
            i = j
            continue
        for p in PUNCTUATION:
            if source.startswith(p, i):
                tokens.append(Token("punctuation", p, line, col, i))
                i += len(p)
                col += len(p)
                break
        else:
            raise LexError(line, col, f"illegal character {ch!r}")
    return tokens
