"""Structural model of a Java codebase.

Parsing is token-based rather than grammar-complete: a compilation unit is
scanned for package/import declarations and type declarations, and type
bodies are walked by brace matching to extract nested types, methods,
constructors, fields, and parameters. Each element carries

  * a qualified name rendered as ``pkg.Outer.Inner#member(T1,T2)``
    (parameters append ``:name``), which is the identity used everywhere
    else in the toolchain,
  * the byte/line span of the whole declaration plus the span of the bare
    name token (the splice target for renames), and
  * a normalized token digest of the body for similarity comparison.

Name resolution for the reference index is heuristic by design: explicit
imports first, then the same package, then the same compilation unit;
method overloads are distinguished by arity only. Anything unresolved is
dropped and noted in the model's diagnostics, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ParseError
from .lexer import KEYWORDS, MODIFIER_KEYWORDS, Token, tokenize

KIND_PACKAGE = "package"
KIND_CLASS = "class"
KIND_INTERFACE = "interface"
KIND_ENUM = "enum"
KIND_METHOD = "method"
KIND_CONSTRUCTOR = "constructor"
KIND_FIELD = "field"
KIND_PARAMETER = "parameter"

TYPE_KINDS = (KIND_CLASS, KIND_INTERFACE, KIND_ENUM)
CALLABLE_KINDS = (KIND_METHOD, KIND_CONSTRUCTOR)


@dataclass(frozen=True, slots=True)
class SourceSpan:
    file_path: str
    start_line: int  # 1-based, inclusive
    end_line: int
    start_byte: int  # UTF-8 byte offsets, half-open
    end_byte: int

    def intersects(self, other: "SourceSpan") -> bool:
        return (
            self.file_path == other.file_path
            and self.start_byte < other.end_byte
            and other.start_byte < self.end_byte
        )


@dataclass(frozen=True, slots=True)
class QualifiedName:
    package: tuple[str, ...] = ()
    types: tuple[str, ...] = ()
    member: str | None = None
    signature: tuple[str, ...] | None = None
    param: str | None = None

    def render(self) -> str:
        parts = ".".join(self.package)
        if self.types:
            parts = (parts + "." if parts else "") + ".".join(self.types)
        if self.member is not None:
            parts += "#" + self.member
            if self.signature is not None:
                parts += "(" + ",".join(self.signature) + ")"
        if self.param is not None:
            parts += ":" + self.param
        return parts

    @property
    def simple(self) -> str:
        """The last identifier segment: parameter, member, type, or package."""
        if self.param is not None:
            return self.param
        if self.member is not None:
            return self.member
        if self.types:
            return self.types[-1]
        return self.package[-1] if self.package else ""

    def owner(self) -> "QualifiedName":
        """The enclosing scope's name (member -> type, nested -> outer)."""
        if self.param is not None:
            return replace(self, param=None)
        if self.member is not None:
            return QualifiedName(self.package, self.types)
        if len(self.types) > 1:
            return QualifiedName(self.package, self.types[:-1])
        return QualifiedName(self.package)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True, slots=True)
class ReferenceSite:
    target: QualifiedName
    span: SourceSpan  # covers exactly the referencing identifier token
    kind: str  # call | field-access | type-use | import


@dataclass(frozen=True)
class CodeElement:
    kind: str
    name: QualifiedName
    span: SourceSpan
    name_span: SourceSpan
    body_digest: tuple[str, ...] = ()
    modifiers: frozenset[str] = frozenset()
    members: tuple["CodeElement", ...] = ()
    extends_name: str | None = None  # raw superclass name, types only
    param_names: tuple[str, ...] = ()  # methods/constructors
    value_type: str | None = None  # declared type, fields/parameters

    @property
    def rendered(self) -> str:
        return self.name.render()

    def walk(self):
        yield self
        for m in self.members:
            yield from m.walk()


@dataclass(frozen=True)
class ImportDecl:
    segments: tuple[str, ...]
    wildcard: bool
    name_token: Token  # last identifier of the dotted chain
    span: SourceSpan  # the whole statement, 'import' through ';'
    is_static: bool = False
    segment_tokens: tuple[Token, ...] = ()


@dataclass
class ParsedUnit:
    path: str
    package: tuple[str, ...]
    imports: list[ImportDecl]
    elements: list[CodeElement]
    tokens: list[Token]
    package_span: SourceSpan | None = None  # dotted name inside 'package ...;'


@dataclass
class ProjectModel:
    units: dict[str, list[CodeElement]] = field(default_factory=dict)
    index: dict[str, CodeElement] = field(default_factory=dict)
    references: dict[str, list[ReferenceSite]] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    partial: bool = False
    texts: dict[str, str] = field(default_factory=dict)
    packages: dict[str, tuple[str, ...]] = field(default_factory=dict)
    _parsed: dict[str, ParsedUnit] = field(default_factory=dict, repr=False)

    def elements(self, *kinds: str):
        for elems in self.units.values():
            for top in elems:
                for el in top.walk():
                    if not kinds or el.kind in kinds:
                        yield el

    def lookup(self, rendered: str) -> CodeElement | None:
        return self.index.get(rendered)

    def owner_of(self, el: CodeElement) -> CodeElement | None:
        return self.index.get(el.name.owner().render())

    def type_named(self, package: tuple[str, ...], simple: str) -> CodeElement | None:
        return self.index.get(QualifiedName(package, (simple,)).render())

    def superclass_of(self, cls: CodeElement) -> CodeElement | None:
        if cls.extends_name is None:
            return None
        return self.resolve_type(cls.span.file_path, cls.extends_name)

    def subclasses_of(self, cls: CodeElement) -> list[CodeElement]:
        out = []
        for el in self.elements(*TYPE_KINDS):
            if el.extends_name and self.superclass_of(el) is cls:
                out.append(el)
        return out

    def resolve_type(self, file_path: str, simple: str) -> CodeElement | None:
        """Heuristic type resolution: imports, same package, same unit."""
        unit = self._parsed.get(file_path)
        if unit is None:
            return None
        if "." in simple:
            return self.resolve_dotted(tuple(simple.split(".")))
        for imp in unit.imports:
            if imp.wildcard:
                continue
            if imp.segments[-1] == simple:
                return self.index.get(QualifiedName(imp.segments[:-1], (simple,)).render())
        found = self.type_named(unit.package, simple)
        if found is not None:
            return found
        for top in self.units.get(file_path, []):
            for el in top.walk():
                if el.kind in TYPE_KINDS and el.name.simple == simple:
                    return el
        for imp in unit.imports:
            if imp.wildcard:
                found = self.type_named(imp.segments, simple)
                if found is not None:
                    return found
        return None

    def resolve_dotted(self, chain: tuple[str, ...]) -> CodeElement | None:
        """Resolve ``p.q.C`` or ``p.Outer.Inner`` against the index."""
        for split in range(len(chain) - 1, -1, -1):
            qn = QualifiedName(chain[:split], chain[split:])
            el = self.index.get(qn.render())
            if el is not None and el.kind in TYPE_KINDS:
                return el
        return None

    def methods_of(self, cls: CodeElement, name: str, arity: int) -> list[CodeElement]:
        return [
            m
            for m in cls.members
            if m.kind in CALLABLE_KINDS and m.name.member == name and len(m.param_names) == arity
        ]

    def field_of(self, cls: CodeElement, name: str) -> CodeElement | None:
        for m in cls.members:
            if m.kind == KIND_FIELD and m.name.member == name:
                return m
        return None


# ---------------------------------------------------------------------------
# Parsing


class _Cursor:
    def __init__(self, tokens: list[Token], path: str):
        self.toks = tokens
        self.i = 0
        self.path = path

    def peek(self, off: int = 0) -> Token | None:
        j = self.i + off
        return self.toks[j] if 0 <= j < len(self.toks) else None

    def at(self, text: str, off: int = 0) -> bool:
        t = self.peek(off)
        return t is not None and t.text == text

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of file", self.path)
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", self.path, t.line)
        return t

    def skip_balanced(self, open_text: str, close_text: str) -> int:
        """Position is at the opening token; returns index just past the close."""
        depth = 0
        while True:
            t = self.next()
            if t.text == open_text:
                depth += 1
            elif t.text == close_text:
                depth -= 1
                if depth == 0:
                    return self.i

    def skip_generics(self) -> None:
        """Skip a ``<...>`` group; ``>>``/``>>>`` close several levels."""
        depth = 0
        while True:
            t = self.next()
            if t.text == "<":
                depth += 1
            elif t.text in (">", ">>", ">>>"):
                depth -= len(t.text)
                if depth <= 0:
                    return

    def skip_annotation(self) -> None:
        """Position is at ``@``; consumes the name and optional arguments."""
        self.next()  # @
        self.next()  # name (possibly dotted: keep eating ident.ident)
        while self.at(".") and self.peek(1) is not None and self.peek(1).kind == "ident":
            self.next()
            self.next()
        if self.at("("):
            self.skip_balanced("(", ")")


def _span_from(tokens: list[Token], path: str, first: int, last: int) -> SourceSpan:
    t0, t1 = tokens[first], tokens[last]
    end_line = t1.line + t1.text.count("\n")
    return SourceSpan(path, t0.line, end_line, t0.start, t1.end)


def _token_span(tok: Token, path: str) -> SourceSpan:
    return SourceSpan(path, tok.line, tok.line, tok.start, tok.end)


def _raw_type_name(tokens: list[Token]) -> str:
    """Base type name of a declaration's type tokens, generics dropped.

    ``java.util.List<String>`` -> ``List``; ``int[]`` -> ``int[]``;
    varargs count as one array dimension.
    """
    base = None
    dims = 0
    depth = 0
    for t in tokens:
        if t.text == "<":
            depth += 1
        elif t.text in (">", ">>", ">>>"):
            depth -= len(t.text)
        elif depth == 0:
            if t.kind == "ident" and t.text not in MODIFIER_KEYWORDS:
                base = t.text  # last segment of a dotted chain wins
            elif t.text == "[":
                dims += 1
            elif t.text == "...":
                dims += 1
    return (base or "?") + "[]" * dims


def _parse_unit(text: str, path: str) -> ParsedUnit:
    tokens = tokenize(text)
    cur = _Cursor(tokens, path)
    package: tuple[str, ...] = ()
    package_span: SourceSpan | None = None
    imports: list[ImportDecl] = []
    elements: list[CodeElement] = []

    while cur.peek() is not None:
        t = cur.peek()
        if t.text == "@" and not (cur.peek(1) and cur.peek(1).text == "interface"):
            cur.skip_annotation()
            continue
        if t.text == "package":
            cur.next()
            first = cur.next()
            segs = [first.text]
            last = first
            while cur.at("."):
                cur.next()
                last = cur.next()
                segs.append(last.text)
            cur.expect(";")
            package = tuple(segs)
            package_span = SourceSpan(path, first.line, last.line, first.start, last.end)
            continue
        if t.text == "import":
            stmt_first = t
            cur.next()
            is_static = False
            if cur.at("static"):
                is_static = True
                cur.next()
            first_seg = cur.next()
            seg_toks = [first_seg]
            wildcard = False
            while cur.at("."):
                cur.next()
                nxt = cur.next()
                if nxt.text == "*":
                    wildcard = True
                    break
                seg_toks.append(nxt)
            semi = cur.expect(";")
            imports.append(
                ImportDecl(
                    tuple(tk.text for tk in seg_toks),
                    wildcard,
                    seg_toks[-1],
                    SourceSpan(path, stmt_first.line, semi.line, stmt_first.start, semi.end),
                    is_static,
                    tuple(seg_toks),
                )
            )
            continue
        if t.text in ("class", "interface", "enum", "record") or (
            t.text == "@" and cur.peek(1) and cur.peek(1).text == "interface"
        ) or t.text in MODIFIER_KEYWORDS:
            el = _parse_type(cur, path, package, ())
            if el is not None:
                elements.append(el)
            continue
        if t.text == ";":
            cur.next()
            continue
        raise ParseError(f"unexpected token {t.text!r} at top level", path, t.line)

    return ParsedUnit(path, package, imports, elements, tokens, package_span)


def _parse_type(
    cur: _Cursor, path: str, package: tuple[str, ...], outer: tuple[str, ...]
) -> CodeElement | None:
    start_idx = cur.i
    modifiers = set()
    while True:
        t = cur.peek()
        if t is None:
            raise ParseError("unexpected end of file in type declaration", path)
        if t.text == "@" and not (cur.peek(1) and cur.peek(1).text == "interface"):
            cur.skip_annotation()
            continue
        if t.text in MODIFIER_KEYWORDS:
            modifiers.add(t.text)
            cur.next()
            continue
        break

    t = cur.peek()
    if t.text == "@":  # @interface
        cur.next()
        kw = cur.expect("interface")
        kind = KIND_INTERFACE
    else:
        kw = cur.next()
        kind = {
            "class": KIND_CLASS,
            "interface": KIND_INTERFACE,
            "enum": KIND_ENUM,
            "record": KIND_CLASS,
        }.get(kw.text)
        if kind is None:
            raise ParseError(f"expected a type keyword, found {kw.text!r}", path, kw.line)

    name_tok = cur.next()
    qname = QualifiedName(package, outer + (name_tok.text,))
    if cur.at("<"):
        cur.skip_generics()
    if cur.at("("):  # record component list
        cur.skip_balanced("(", ")")
    extends_name = None
    while cur.peek() is not None and not cur.at("{"):
        t = cur.next()
        if t.text == "extends" and kind != KIND_INTERFACE:
            chain = [cur.next().text]
            while cur.at("."):
                cur.next()
                chain.append(cur.next().text)
            if cur.at("<"):
                cur.skip_generics()
            extends_name = ".".join(chain)
    open_tok = cur.expect("{")

    members: list[CodeElement] = []
    if kind == KIND_ENUM:
        _skip_enum_constants(cur)
    while not cur.at("}"):
        members.extend(_parse_member(cur, path, package, outer + (name_tok.text,), name_tok.text))
    close_idx = cur.i
    cur.next()  # }

    span = _span_from(cur.toks, path, start_idx, close_idx)
    return CodeElement(
        kind=kind,
        name=qname,
        span=span,
        name_span=_token_span(name_tok, path),
        modifiers=frozenset(modifiers),
        members=tuple(members),
        extends_name=extends_name,
    )


def _skip_enum_constants(cur: _Cursor) -> None:
    """Skip constant list up to the member separator ``;`` (or body end)."""
    depth = 0
    while True:
        t = cur.peek()
        if t is None:
            return
        if depth == 0 and t.text in (";", "}"):
            if t.text == ";":
                cur.next()
            return
        if t.text in ("(", "{"):
            depth += 1
        elif t.text in (")", "}"):
            depth -= 1
        cur.next()


def _parse_member(
    cur: _Cursor,
    path: str,
    package: tuple[str, ...],
    type_chain: tuple[str, ...],
    simple_type: str,
) -> list[CodeElement]:
    start_idx = cur.i
    modifiers = set()
    while True:
        t = cur.peek()
        if t is None:
            raise ParseError("unexpected end of file in type body", path)
        if t.text == "@" and not (cur.peek(1) and cur.peek(1).text == "interface"):
            cur.skip_annotation()
            continue
        if t.text in MODIFIER_KEYWORDS and not (t.text == "static" and cur.peek(1) and cur.peek(1).text == "{"):
            modifiers.add(t.text)
            cur.next()
            continue
        break

    t = cur.peek()
    if t.text == ";":
        cur.next()
        return []
    if t.text in ("class", "interface", "enum", "record") or (
        t.text == "@" and cur.peek(1) and cur.peek(1).text == "interface"
    ):
        el = _parse_type(cur, path, package, type_chain)
        return [el] if el is not None else []
    if t.text in ("{", "static"):  # instance or static initializer block
        if t.text == "static":
            cur.next()
        cur.skip_balanced("{", "}")
        return []

    # method, constructor, or field: decided by the first of ( = ; at depth 0
    probe = cur.i
    depth = 0
    decider = None
    while probe < len(cur.toks):
        tx = cur.toks[probe].text
        if tx in ("(", "[", "{"):
            if depth == 0 and tx == "(":
                decider = "("
                break
            depth += 1
        elif tx in (")", "]", "}"):
            depth -= 1
        elif depth == 0 and tx in ("=", ";"):
            decider = tx
            break
        probe += 1
    if decider is None:
        raise ParseError("unterminated member declaration", path, t.line)

    if decider == "(":
        return [_parse_callable(cur, path, package, type_chain, simple_type, start_idx, modifiers, probe)]
    return _parse_fields(cur, path, package, type_chain, start_idx, modifiers)


def _parse_callable(
    cur: _Cursor,
    path: str,
    package: tuple[str, ...],
    type_chain: tuple[str, ...],
    simple_type: str,
    start_idx: int,
    modifiers: set,
    paren_idx: int,
) -> CodeElement:
    name_tok = cur.toks[paren_idx - 1]
    head = cur.toks[cur.i : paren_idx - 1]  # return type (and generic params) tokens
    # constructor: the name equals the type and nothing but an optional
    # generic group precedes it
    rest = []
    depth = 0
    for h in head:
        if h.text == "<":
            depth += 1
        elif h.text in (">", ">>", ">>>"):
            depth -= len(h.text)
        elif depth == 0:
            rest.append(h)
    is_ctor = name_tok.text == simple_type and not rest

    cur.i = paren_idx
    params = _parse_params(cur, path)

    # throws clause and either a body or ';'
    while cur.peek() is not None and not cur.at("{") and not cur.at(";"):
        if cur.at("("):
            cur.skip_balanced("(", ")")
        else:
            cur.next()
    digest: tuple[str, ...] = ()
    if cur.at("{"):
        body_open = cur.i
        cur.skip_balanced("{", "}")
        body_tokens = cur.toks[body_open + 1 : cur.i - 1]
        digest = tuple(tk.text for tk in body_tokens)
        end_idx = cur.i - 1
    else:
        cur.next()  # ;
        end_idx = cur.i - 1

    signature = tuple(p[0] for p in params)
    qname = QualifiedName(package, type_chain, name_tok.text, signature)
    kind = KIND_CONSTRUCTOR if is_ctor else KIND_METHOD
    param_elements = tuple(
        CodeElement(
            kind=KIND_PARAMETER,
            name=replace(qname, param=pname),
            span=pspan,
            name_span=pspan,
            value_type=ptype,
        )
        for (ptype, pname, pspan) in params
    )
    return CodeElement(
        kind=kind,
        name=qname,
        span=_span_from(cur.toks, path, start_idx, end_idx),
        name_span=_token_span(name_tok, path),
        body_digest=digest,
        modifiers=frozenset(modifiers),
        members=param_elements,
        param_names=tuple(p[1] for p in params),
    )


def _parse_params(cur: _Cursor, path: str) -> list[tuple[str, str, SourceSpan]]:
    """Parse ``(...)`` into (raw type, name, name span) triples."""
    open_idx = cur.i
    cur.skip_balanced("(", ")")
    inner = cur.toks[open_idx + 1 : cur.i - 1]
    if not inner:
        return []
    groups: list[list[Token]] = [[]]
    depth = 0
    for t in inner:
        if t.text in ("(", "[", "{"):
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
        elif t.text == "<":
            depth += 1
        elif t.text in (">", ">>", ">>>"):
            depth -= len(t.text)
        if t.text == "," and depth == 0:
            groups.append([])
        else:
            groups[-1].append(t)
    params = []
    for group in groups:
        # drop annotations: '@' name [(...)]
        cleaned: list[Token] = []
        k = 0
        while k < len(group):
            if group[k].text == "@":
                k += 2
                if k < len(group) and group[k].text == "(":
                    d = 0
                    while k < len(group):
                        if group[k].text == "(":
                            d += 1
                        elif group[k].text == ")":
                            d -= 1
                            if d == 0:
                                k += 1
                                break
                        k += 1
                continue
            cleaned.append(group[k])
            k += 1
        idents = [t for t in cleaned if t.kind == "ident" and t.text not in MODIFIER_KEYWORDS]
        if not idents:
            continue
        name_tok = idents[-1]
        type_toks = cleaned[: cleaned.index(name_tok)]
        params.append((_raw_type_name(type_toks), name_tok.text, _token_span(name_tok, path)))
    return params


def _parse_fields(
    cur: _Cursor,
    path: str,
    package: tuple[str, ...],
    type_chain: tuple[str, ...],
    start_idx: int,
    modifiers: set,
) -> CodeElement | None:
    """Parse one field declaration (possibly multi-declarator).

    Returns the first declarator's element; extra declarators become
    siblings via the pending queue on the cursor.
    """
    decl_tokens: list[Token] = []
    depth = 0
    while True:
        t = cur.next()
        if t.text in ("(", "[", "{"):
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
        elif t.text == ";" and depth == 0:
            break
        decl_tokens.append(t)
    end_idx = cur.i - 1

    # find the first declarator name: an ident at depth 0 followed by
    # '=', ',', '[' or the end; generics count as depth only in the type
    # part (before any '='), where no comparison operators can occur
    name_positions = []
    depth = 0
    for idx, t in enumerate(decl_tokens):
        if t.text in ("(", "[", "{"):
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
        elif t.text == "<":
            depth += 1
        elif t.text in (">", ">>", ">>>"):
            depth -= len(t.text)
        elif t.text == "=" and depth == 0:
            break
        if depth == 0 and t.kind == "ident":
            nxt = decl_tokens[idx + 1] if idx + 1 < len(decl_tokens) else None
            if nxt is None or nxt.text in ("=", ",", "["):
                name_positions.append(idx)
                break
    if not name_positions:
        return []
    first_name_idx = name_positions[0]
    type_toks = decl_tokens[:first_name_idx]
    raw_type = _raw_type_name(type_toks)

    # split on top-level commas that start a new declarator
    current_name = decl_tokens[first_name_idx]
    rest = decl_tokens[first_name_idx + 1 :]
    names = [current_name]
    depth = 0
    j = 0
    while j < len(rest):
        t = rest[j]
        if t.text in ("(", "[", "{"):
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
        elif t.text == "," and depth == 0:
            nxt = rest[j + 1] if j + 1 < len(rest) else None
            after = rest[j + 2] if j + 2 < len(rest) else None
            if nxt is not None and nxt.kind == "ident" and (
                after is None or after.text in ("=", ",", "[")
            ):
                names.append(nxt)
                j += 1
        j += 1

    span = _span_from(cur.toks, path, start_idx, end_idx)
    return [
        CodeElement(
            kind=KIND_FIELD,
            name=QualifiedName(package, type_chain, name_tok.text),
            span=span,
            name_span=_token_span(name_tok, path),
            modifiers=frozenset(modifiers),
            value_type=raw_type,
        )
        for name_tok in names
    ]


def parse_unit(text: str, path: str) -> list[CodeElement]:
    """Parse one Java source file into its top-level type elements.

    Deterministic for identical input; raises :class:`ParseError` with the
    file path and first error location when no structure can be read.
    """
    unit = _parse_unit(text, path)
    elements = list(unit.elements)
    return elements


def element_digest(body_text: str) -> tuple[str, ...]:
    """Re-export of the token digest, the unit the detector compares."""
    from .lexer import element_digest as _digest

    return _digest(body_text)


# ---------------------------------------------------------------------------
# Model building and the reference scan


def build_model(files: dict[str, str]) -> ProjectModel:
    """Build a project model from ``path -> text``.

    Files that fail to parse are skipped; the model is still built from the
    rest with ``partial`` set and the failure recorded in diagnostics.
    Unresolved references are dropped into diagnostics, never raised.
    """
    model = ProjectModel()
    for path in sorted(files):
        text = files[path]
        model.texts[path] = text
        try:
            unit = _parse_unit(text, path)
        except ParseError as exc:
            model.diagnostics.append(f"parse error: {exc}")
            model.partial = True
            continue
        model._parsed[path] = unit
        model.units[path] = unit.elements
        model.packages[path] = unit.package
        for top in unit.elements:
            for el in top.walk():
                key = el.rendered
                if key in model.index:
                    model.diagnostics.append(f"duplicate declaration key {key} in {path}")
                else:
                    model.index[key] = el

    for path, unit in model._parsed.items():
        _scan_references(model, unit)
    return model


def _scan_references(model: ProjectModel, unit: ParsedUnit) -> None:
    path = unit.path

    def add_ref(target: QualifiedName, tok: Token, kind: str) -> None:
        model.references.setdefault(target.render(), []).append(
            ReferenceSite(target, _token_span(tok, path), kind)
        )

    # import references
    for imp in unit.imports:
        if imp.wildcard:
            continue
        el = model.resolve_dotted(imp.segments)
        if el is not None and not imp.is_static:
            add_ref(el.name, imp.name_token, "import")
        else:
            # static member import: anchor the reference on the type token
            owner = model.resolve_dotted(imp.segments[:-1]) if len(imp.segments) > 1 else None
            if owner is not None and len(imp.segment_tokens) >= 2:
                add_ref(owner.name, imp.segment_tokens[-2], "import")
            else:
                model.diagnostics.append(f"unresolved import {'.'.join(imp.segments)} in {path}")

    decl_name_starts = set()
    spans: list[tuple[int, int, CodeElement]] = []
    for top in unit.elements:
        for el in top.walk():
            decl_name_starts.add(el.name_span.start_byte)
            spans.append((el.span.start_byte, el.span.end_byte, el))
    spans.sort(key=lambda s: (s[0], -s[1]))

    def enclosing(byte: int, kinds: tuple[str, ...]) -> CodeElement | None:
        best = None
        for s, e, el in spans:
            if s <= byte < e and el.kind in kinds:
                if best is None or s >= best.span.start_byte:
                    best = el  # innermost covering element wins
        return best

    def class_chain(cls: CodeElement | None):
        seen = set()
        while cls is not None and id(cls) not in seen:
            seen.add(id(cls))
            yield cls
            cls = model.superclass_of(cls)

    def find_method(cls0: CodeElement | None, name: str, arity: int) -> CodeElement | None:
        for cls in class_chain(cls0):
            cands = model.methods_of(cls, name, arity)
            if len(cands) == 1:
                return cands[0]
            if len(cands) > 1:
                model.diagnostics.append(
                    f"ambiguous overloads for {cls.rendered}#{name}/{arity} in {path}"
                )
                return None
        return None

    def find_field(cls0: CodeElement | None, name: str) -> CodeElement | None:
        for cls in class_chain(cls0):
            f = model.field_of(cls, name)
            if f is not None:
                return f
        return None

    toks = unit.tokens
    n = len(toks)
    for i, tok in enumerate(toks):
        if tok.kind != "ident":
            continue
        if tok.start in decl_name_starts:
            continue
        prv = toks[i - 1] if i > 0 else None
        nxt = toks[i + 1] if i + 1 < n else None
        if prv is not None and prv.text == "@":
            continue
        if tok.text in KEYWORDS:
            continue
        if prv is not None and prv.text in ("package", "import"):
            continue
        # inside an import/package statement (dotted continuation)
        if prv is not None and prv.text == "." and _stmt_head(toks, i) in ("package", "import"):
            continue

        if nxt is not None and nxt.text == "(":
            arity = _call_arity(toks, i + 1)
            if prv is not None and prv.text == ".":
                chain = _qualifier_chain(toks, i - 1)
                owner = _resolve_qualifier(model, path, chain, enclosing, tok)
                if owner is None:
                    # capitalized qualifiers look like type names; flag them
                    if chain and chain[-1][:1].isupper():
                        model.diagnostics.append(
                            f"unresolved reference {'.'.join(chain)}.{tok.text} in {path}:{tok.line}"
                        )
                    continue
                target = find_method(owner, tok.text, arity)
                if target is not None:
                    add_ref(target.name, tok, "call")
                else:
                    model.diagnostics.append(
                        f"unresolved call {owner.rendered}.{tok.text}/{arity} in {path}:{tok.line}"
                    )
            elif prv is not None and prv.text == "new":
                el = model.resolve_type(path, tok.text)
                if el is not None:
                    add_ref(el.name, tok, "type-use")
            else:
                cls = enclosing(tok.start, TYPE_KINDS)
                target = find_method(cls, tok.text, arity)
                if target is not None:
                    add_ref(target.name, tok, "call")
            continue

        if prv is not None and prv.text == ".":
            chain = _qualifier_chain(toks, i - 1)
            resolved = model.resolve_dotted(tuple(chain) + (tok.text,)) if chain else None
            if resolved is not None:
                add_ref(resolved.name, tok, "type-use")
                continue
            owner = _resolve_qualifier(model, path, chain, enclosing, tok)
            if owner is not None:
                f = find_field(owner, tok.text)
                if f is not None:
                    add_ref(f.name, tok, "field-access")
            continue

        as_type = model.resolve_type(path, tok.text)
        if as_type is not None:
            add_ref(as_type.name, tok, "type-use")
            continue

        # bare identifier: a field of the enclosing class unless shadowed
        # by a parameter of the enclosing method (locals are not tracked)
        cls = enclosing(tok.start, TYPE_KINDS)
        if cls is None:
            continue
        meth = enclosing(tok.start, CALLABLE_KINDS)
        if meth is not None and tok.text in meth.param_names:
            continue
        f = find_field(cls, tok.text)
        if f is not None:
            add_ref(f.name, tok, "field-access")


def _stmt_head(toks: list[Token], i: int) -> str | None:
    """Keyword opening the statement a dotted chain belongs to."""
    j = i
    while j > 0:
        t = toks[j - 1]
        if t.kind == "ident" and t.text in ("package", "import"):
            return t.text
        if t.text in (".",) or t.kind == "ident":
            j -= 1
            continue
        break
    return None


def _qualifier_chain(toks: list[Token], dot_idx: int) -> list[str]:
    """Identifier chain ending just before ``toks[dot_idx] == '.'``."""
    chain: list[str] = []
    j = dot_idx
    while j > 0 and toks[j].text == ".":
        prev = toks[j - 1]
        if prev.kind != "ident":
            break
        chain.append(prev.text)
        j -= 2
    chain.reverse()
    return chain


def _call_arity(toks: list[Token], open_idx: int) -> int:
    depth = 0
    count = 0
    seen_any = False
    for j in range(open_idx, len(toks)):
        t = toks[j]
        if t.text in ("(", "[", "{"):
            depth += 1
        elif t.text in (")", "]", "}"):
            depth -= 1
            if depth == 0:
                break
        elif depth == 1:
            seen_any = True
            if t.text == ",":
                count += 1
    return count + 1 if seen_any else 0


def _resolve_qualifier(model, path, chain, enclosing, tok):
    """Resolve a dotted receiver to a type element, or None."""
    if not chain:
        return None
    if chain == ["this"]:
        return enclosing(tok.start, TYPE_KINDS)
    if chain == ["super"]:
        cls = enclosing(tok.start, TYPE_KINDS)
        return model.superclass_of(cls) if cls is not None else None
    el = model.resolve_type(path, chain[-1]) if len(chain) == 1 else model.resolve_dotted(tuple(chain))
    return el
