"""Total tokenizer for C-family source text.

Never raises: unknown bytes become single-character punct tokens, and
unterminated strings or comments extend to the end of the line or
input.  Comments and whitespace are dropped from the token stream but
still consume their span, so concatenating the spans of ``lex`` output
reconstructs the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = frozenset(
    """
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Bool _Complex _Imaginary
    """.split()
)

_THREE_CHAR = ("<<=", ">>=", "...")
_TWO_CHAR = (
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "^=", "|=", "##",
)
_PUNCT_MULTI = {"...", "##"}
_ONE_CHAR_OPERATOR = frozenset("+-*/%<>=!&|^~?:.")
_ONE_CHAR_PUNCT = frozenset("()[]{};,#")


@dataclass(frozen=True)
class Token:
    kind: str  # identifier | keyword | number | string | char | operator | punct
    text: str


def _is_ident_start(ch: str) -> bool:
    return ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def _is_ident_char(ch: str) -> bool:
    return _is_ident_start(ch) or ch.isdigit()


def _scan_number(text: str, i: int) -> int:
    # Preprocessing-number rule: digits, letters, underscores, dots, and
    # exponent signs directly after e/E/p/P.  Total by construction.
    n = len(text)
    j = i + 1
    while j < n:
        ch = text[j]
        if ch.isalnum() or ch in "_.":
            j += 1
        elif ch in "+-" and text[j - 1] in "eEpP":
            j += 1
        else:
            break
    return j


def _scan_quoted(text: str, i: int) -> int:
    quote = text[i]
    n = len(text)
    j = i + 1
    while j < n:
        ch = text[j]
        if ch == "\\" and j + 1 < n:
            j += 2
        elif ch == quote:
            return j + 1
        elif ch == "\n":
            break  # unterminated literal stops at the line break
        else:
            j += 1
    return j


def lex(text: str) -> list[tuple[str | None, str]]:
    """Full-coverage scan: (kind, span) pairs whose spans tile the input.

    Whitespace and comment spans carry kind ``None``.
    """
    pieces: list[tuple[str | None, str]] = []
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if ch.isspace():
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            pieces.append((None, text[i:j]))
        elif text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j == -1 else j
            pieces.append((None, text[i:j]))
        elif text.startswith("/*", i):
            end = text.find("*/", i + 2)
            j = n if end == -1 else end + 2
            pieces.append((None, text[i:j]))
        elif _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(text[j]):
                j += 1
            word = text[i:j]
            pieces.append(("keyword" if word in KEYWORDS else "identifier", word))
        elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = _scan_number(text, i)
            pieces.append(("number", text[i:j]))
        elif ch == '"':
            j = _scan_quoted(text, i)
            pieces.append(("string", text[i:j]))
        elif ch == "'":
            j = _scan_quoted(text, i)
            pieces.append(("char", text[i:j]))
        else:
            j = i
            for candidates in (_THREE_CHAR, _TWO_CHAR):
                match = next(
                    (op for op in candidates if text.startswith(op, i)), None
                )
                if match:
                    kind = "punct" if match in _PUNCT_MULTI else "operator"
                    pieces.append((kind, match))
                    j = i + len(match)
                    break
            if j == i:
                if ch in _ONE_CHAR_OPERATOR:
                    pieces.append(("operator", ch))
                elif ch in _ONE_CHAR_PUNCT:
                    pieces.append(("punct", ch))
                else:
                    pieces.append(("punct", ch))  # unknown byte
                j = i + 1
        i = j
    return pieces


def tokenize(text: str) -> list[Token]:
    """Token stream with whitespace and comments removed."""
    return [Token(kind, span) for kind, span in lex(text) if kind is not None]
