"""Java tokenizer.

Produces a flat token stream with UTF-8 byte offsets and 1-based line
numbers. The stream is the substrate for the structural parser, the
reference scanner, and the body digests used by the detector: a digest is
just the token texts with comments and whitespace dropped, so two bodies
compare equal regardless of formatting.

The tokenizer is deliberately forgiving: an unterminated string or block
comment runs to end of input instead of raising, so partially edited files
still produce a usable stream.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # ident | number | string | char | punct | comment
    text: str
    line: int  # 1-based line of the token's first character
    start: int  # byte offset (UTF-8) into the source text
    end: int

    def __repr__(self) -> str:  # compact, for test failure output
        return f"Token({self.kind} {self.text!r} @{self.start}:{self.end} L{self.line})"


# Longest first so maximal munch works with a simple startswith scan.
_MULTI_PUNCT = (
    ">>>=", "<<=", ">>=", ">>>", "...",
    "->", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>",
)

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public record return short static strictfp super
    switch synchronized this throw throws transient try void volatile
    while""".split()
)

MODIFIER_KEYWORDS = frozenset(
    "public protected private static final abstract synchronized native "
    "transient volatile strictfp default".split()
)


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch in "_$" or ord(ch) > 0x7F


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch in "_$" or ord(ch) > 0x7F


def tokenize(text: str, keep_comments: bool = False) -> list[Token]:
    """Lex Java source into tokens.

    Whitespace never appears in the output; comments only when
    ``keep_comments`` is set. Offsets are byte positions so spans can be
    applied to the UTF-8 encoding of the file.
    """
    tokens: list[Token] = []
    n = len(text)
    ascii_only = text.isascii()
    i = 0
    b = 0  # running byte offset; equals i for pure-ASCII sources
    line = 1

    def blen(s: str) -> int:
        return len(s) if ascii_only else len(s.encode("utf-8"))

    while i < n:
        ch = text[i]

        if ch in " \t\f\r":
            i += 1
            b += 1
            continue
        if ch == "\n":
            line += 1
            i += 1
            b += 1
            continue

        start_i, start_b, start_line = i, b, line

        if ch == "/" and i + 1 < n:
            nxt = text[i + 1]
            if nxt == "/":
                j = text.find("\n", i)
                if j < 0:
                    j = n
                tok_text = text[i:j]
                i = j
                b = start_b + blen(tok_text)
                if keep_comments:
                    tokens.append(Token("comment", tok_text, start_line, start_b, b))
                continue
            if nxt == "*":
                j = text.find("*/", i + 2)
                j = n if j < 0 else j + 2
                tok_text = text[i:j]
                line += tok_text.count("\n")
                i = j
                b = start_b + blen(tok_text)
                if keep_comments:
                    tokens.append(Token("comment", tok_text, start_line, start_b, b))
                continue

        if ch == '"':
            if text.startswith('"""', i):
                j = text.find('"""', i + 3)
                j = n if j < 0 else j + 3
            else:
                j = i + 1
                while j < n and text[j] != '"':
                    if text[j] == "\\" and j + 1 < n:
                        j += 2
                    elif text[j] == "\n":
                        break  # unterminated: stop at EOL
                    else:
                        j += 1
                j = min(j + 1, n)
            tok_text = text[i:j]
            line += tok_text.count("\n")
            i = j
            b = start_b + blen(tok_text)
            tokens.append(Token("string", tok_text, start_line, start_b, b))
            continue

        if ch == "'":
            j = i + 1
            while j < n and text[j] != "'":
                if text[j] == "\\" and j + 1 < n:
                    j += 2
                elif text[j] == "\n":
                    break
                else:
                    j += 1
            j = min(j + 1, n)
            tok_text = text[i:j]
            i = j
            b = start_b + blen(tok_text)
            tokens.append(Token("char", tok_text, start_line, start_b, b))
            continue

        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n:
                c = text[j]
                if c.isalnum() or c in "._":
                    j += 1
                elif c in "+-" and text[j - 1] in "eEpP":
                    j += 1
                else:
                    break
            tok_text = text[i:j]
            i = j
            b = start_b + blen(tok_text)
            tokens.append(Token("number", tok_text, start_line, start_b, b))
            continue

        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_part(text[j]):
                j += 1
            tok_text = text[i:j]
            i = j
            b = start_b + blen(tok_text)
            tokens.append(Token("ident", tok_text, start_line, start_b, b))
            continue

        for punct in _MULTI_PUNCT:
            if text.startswith(punct, i):
                i += len(punct)
                b = start_b + len(punct)
                tokens.append(Token("punct", punct, start_line, start_b, b))
                break
        else:
            i += 1
            b = start_b + blen(ch)
            tokens.append(Token("punct", ch, start_line, start_b, b))

    return tokens


def element_digest(body_text: str) -> tuple[str, ...]:
    """Normalize a code region to its token texts.

    Comments and whitespace are dropped; identifiers and string/char
    literals are kept verbatim. Formatting-only edits therefore produce
    equal digests.
    """
    return tuple(t.text for t in tokenize(body_text))
