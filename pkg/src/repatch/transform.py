"""Apply refactoring operations to a working tree by editing source text.

All edits are span-based splices computed from the live structural model
and applied right-to-left per file, so untouched formatting survives and
earlier spans stay valid. Descriptor spans are treated as hints only: an
element is located by name in the model built from the current tree state,
which keeps operations applicable after unrelated edits (such as a freshly
merged patch).

Member relocation cuts the declaration together with the whitespace run
separating it from the previous sibling, and re-inserts that exact text at
the destination; the recorded span of the inverse operation pins the
insertion offset, which is what makes apply(op) followed by
apply(invert(op)) restore the tree byte-for-byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .errors import (
    AmbiguousInline,
    CollisionError,
    ElementNotFound,
    TransformError,
)
from .lexer import tokenize
from .model import (
    CALLABLE_KINDS,
    KIND_CONSTRUCTOR,
    KIND_FIELD,
    KIND_METHOD,
    TYPE_KINDS,
    CodeElement,
    ProjectModel,
    QualifiedName,
    build_model,
)
from .ops import (
    CLASS_KINDS,
    ConflictMatrix,
    ExtractInlinePayload,
    ParameterPayload,
    RefactoringKind,
    RefactoringOp,
    ReplayConflictReport,
    replay_order,
)


class Worktree:
    """In-memory view of a source tree; flush writes only dirty files."""

    def __init__(self, root: str | None = None, files: dict[str, str] | None = None):
        self.root = root
        self._files: dict[str, str] = dict(files or {})
        self._known: set[str] = set(self._files)
        if root is not None:
            for dirpath, dirnames, filenames in os.walk(root):
                dirnames[:] = [d for d in dirnames if d != ".git"]
                for fn in filenames:
                    rel = os.path.relpath(os.path.join(dirpath, fn), root).replace(os.sep, "/")
                    self._known.add(rel)
        self.deleted: set[str] = set()
        self.dirty: set[str] = set()

    def paths(self) -> list[str]:
        return sorted(self._known - self.deleted)

    def java_paths(self) -> list[str]:
        return [p for p in self.paths() if p.endswith(".java")]

    def exists(self, path: str) -> bool:
        return path in self._known and path not in self.deleted

    def read(self, path: str) -> str:
        if not self.exists(path):
            raise FileNotFoundError(path)
        if path not in self._files:
            with open(os.path.join(self.root, path), "rb") as fh:
                self._files[path] = fh.read().decode("utf-8")
        return self._files[path]

    def write(self, path: str, text: str) -> None:
        self._files[path] = text
        self._known.add(path)
        self.deleted.discard(path)
        self.dirty.add(path)

    def delete(self, path: str) -> None:
        if not self.exists(path):
            raise FileNotFoundError(path)
        self.read(path)  # keep content for snapshots
        self.deleted.add(path)
        self.dirty.add(path)

    def rename(self, old: str, new: str) -> None:
        text = self.read(old)
        self.delete(old)
        self.write(new, text)

    def files(self) -> dict[str, str]:
        return {p: self.read(p) for p in self.paths()}

    def java_files(self) -> dict[str, str]:
        return {p: self.read(p) for p in self.java_paths()}

    def snapshot(self):
        return (dict(self._files), set(self._known), set(self.deleted), set(self.dirty))

    def restore(self, snap) -> None:
        self._files, self._known, self.deleted, self.dirty = (
            dict(snap[0]),
            set(snap[1]),
            set(snap[2]),
            set(snap[3]),
        )

    def flush(self) -> None:
        if self.root is None:
            raise ValueError("in-memory worktree has no root to flush to")
        for path in sorted(self.dirty):
            full = os.path.join(self.root, path)
            if path in self.deleted:
                if os.path.exists(full):
                    os.remove(full)
                continue
            os.makedirs(os.path.dirname(full) or ".", exist_ok=True)
            with open(full, "wb") as fh:
                fh.write(self._files[path].encode("utf-8"))
        self.dirty.clear()


@dataclass
class TransformResult:
    edited_files: list[str] = field(default_factory=list)
    edit_count: int = 0
    skipped_refs: list[tuple[str, str]] = field(default_factory=list)  # (where, reason)

    def merge(self, other: "TransformResult") -> None:
        for p in other.edited_files:
            if p not in self.edited_files:
                self.edited_files.append(p)
        self.edit_count += other.edit_count
        self.skipped_refs.extend(other.skipped_refs)


def splice(text: str, edits: list[tuple[int, int, str]]) -> str:
    """Apply byte-offset (start, end, replacement) edits right-to-left."""
    if not edits:
        return text
    data = text.encode("utf-8")
    prev_start = None
    for start, end, repl in sorted(edits, key=lambda e: (e[0], e[1]), reverse=True):
        if prev_start is not None and end > prev_start:
            raise TransformError(f"overlapping edits at byte {start}")
        prev_start = start
        data = data[:start] + repl.encode("utf-8") + data[end:]
    return data.decode("utf-8")


class _Editor:
    """Collects per-file edits and file moves for one operation."""

    def __init__(self, worktree: Worktree, model: ProjectModel):
        self.w = worktree
        self.model = model
        self.edits: dict[str, list[tuple[int, int, str]]] = {}
        self.moves: list[tuple[str, str]] = []
        self.result = TransformResult()
        self._token_maps: dict[str, dict[int, int]] = {}

    def add(self, path: str, start: int, end: int, replacement: str) -> None:
        self.edits.setdefault(path, []).append((start, end, replacement))

    def move_file(self, old: str, new: str) -> None:
        self.moves.append((old, new))

    def tokens(self, path: str):
        return self.model._parsed[path].tokens

    def token_index(self, path: str, start_byte: int) -> int:
        tmap = self._token_maps.get(path)
        if tmap is None:
            tmap = {t.start: i for i, t in enumerate(self.tokens(path))}
            self._token_maps[path] = tmap
        idx = tmap.get(start_byte)
        if idx is None:
            raise TransformError(f"no token at byte {start_byte} in {path}")
        return idx

    def commit(self) -> TransformResult:
        for path, edits in self.edits.items():
            if not edits:
                continue
            self.w.write(path, splice(self.w.read(path), edits))
            self.result.edited_files.append(path)
            self.result.edit_count += len(edits)
        for old, new in self.moves:
            if old != new:
                self.w.rename(old, new)
                if new not in self.result.edited_files:
                    self.result.edited_files.append(new)
                self.result.edit_count += 1
        if self.result.edit_count < 1:
            raise TransformError("operation produced no edits")
        return self.result


# ---------------------------------------------------------------------------
# lookup helpers


def _locate(model: ProjectModel, name: QualifiedName) -> CodeElement:
    el = model.lookup(name.render())
    if el is None:
        raise ElementNotFound(f"{name.render()} not found in the working tree")
    return el


def _owner_class(model: ProjectModel, name: QualifiedName) -> CodeElement:
    owner = model.lookup(name.owner().render())
    if owner is None or owner.kind not in TYPE_KINDS:
        raise ElementNotFound(f"owner type {name.owner().render()} not found")
    return owner


def _refs(model: ProjectModel, el: CodeElement):
    return model.references.get(el.rendered, [])


def _prev_nonspace(text: str, byte: int) -> int:
    """Byte offset just past the previous non-whitespace byte before ``byte``."""
    data = text.encode("utf-8")
    i = byte
    while i > 0 and data[i - 1 : i] in (b" ", b"\t", b"\r", b"\n"):
        i -= 1
    return i


def _cut_member(editor: _Editor, el: CodeElement) -> tuple[str, int]:
    """Remove a member declaration plus its leading separator whitespace.

    Returns (cut text, cut start byte).
    """
    path = el.span.file_path
    text = editor.w.read(path)
    data = text.encode("utf-8")
    start = _prev_nonspace(text, el.span.start_byte)
    cut = data[start : el.span.end_byte].decode("utf-8")
    editor.add(path, start, el.span.end_byte, "")
    return cut, start


def _map_final_to_current(edits: list[tuple[int, int, str]], pos: int) -> int | None:
    """Translate a byte offset valid after ``edits`` back to current text.

    Returns None when the offset falls inside a replaced region.
    """
    delta = 0
    for s, e, r in sorted(edits):
        fs = s + delta
        fe = fs + len(r.encode("utf-8"))
        if pos <= fs:
            break
        if pos < fe:
            return None
        delta += len(r.encode("utf-8")) - (e - s)
    return pos - delta


def _insert_member(editor: _Editor, dest_class: CodeElement, text_block: str, span_hint) -> None:
    """Insert a member text block (leading separator included) into a class.

    The hint, when usable, pins the exact offset: it is the recorded
    declaration span of the element in the destination state, minus the
    block's leading whitespace. Hints are post-state coordinates, so they
    are mapped back through the edits this operation has already queued
    for the file; all other same-file edits must be registered first.
    """
    path = dest_class.span.file_path
    text = editor.w.read(path)
    data = text.encode("utf-8")
    body_open = data.index(b"{", _name_end(dest_class)) + 1
    body_close = dest_class.span.end_byte - 1

    lead = len(text_block) - len(text_block.lstrip(" \t\r\n"))
    pos = None
    if span_hint is not None and span_hint.file_path == path:
        final_pos = span_hint.start_byte - len(text_block[:lead].encode("utf-8"))
        cand = _map_final_to_current(editor.edits.get(path, []), final_pos)
        if cand is not None:
            inside_member = any(
                m.span.start_byte < cand < m.span.end_byte
                for m in dest_class.members
                if m.kind != "parameter"
            )
            if body_open <= cand <= body_close and not inside_member:
                pos = cand
    if pos is None:
        last_end = body_open
        for m in dest_class.members:
            if m.kind != "parameter":
                last_end = max(last_end, m.span.end_byte)
        pos = last_end
    editor.add(path, pos, pos, text_block)


def _name_end(el: CodeElement) -> int:
    return el.name_span.end_byte


def _collision_check(model: ProjectModel, name: QualifiedName, kind: str) -> None:
    existing = model.lookup(name.render())
    if existing is not None:
        raise CollisionError(f"{name.render()} already exists")


def _qualifier_before(editor: _Editor, path: str, ident_start: int) -> tuple[int, list[str]]:
    """Dotted qualifier chain immediately before an identifier token.

    Returns (start byte of the chain, chain texts); start equals the
    identifier start when there is no qualifier.
    """
    toks = editor.tokens(path)
    i = editor.token_index(path, ident_start)
    chain: list[str] = []
    start = ident_start
    j = i - 1
    while j > 0 and toks[j].text == "." and toks[j - 1].kind == "ident":
        chain.append(toks[j - 1].text)
        start = toks[j - 1].start
        j -= 2
    chain.reverse()
    return start, chain


# ---------------------------------------------------------------------------
# rename family


def _apply_rename_member(editor: _Editor, op: RefactoringOp) -> None:
    model = editor.model
    el = _locate(model, op.before.name)
    owner = _owner_class(model, op.before.name)
    new_simple = op.after.name.simple

    if el.kind in CALLABLE_KINDS:
        if model.methods_of(owner, new_simple, len(el.param_names)):
            raise CollisionError(f"{owner.rendered}#{new_simple} already exists with same arity")
    else:
        if model.field_of(owner, new_simple) is not None:
            raise CollisionError(f"{owner.rendered}#{new_simple} already exists")

    editor.add(el.span.file_path, el.name_span.start_byte, el.name_span.end_byte, new_simple)
    for ref in _refs(model, el):
        editor.add(ref.span.file_path, ref.span.start_byte, ref.span.end_byte, new_simple)


def _apply_rename_parameter(editor: _Editor, op: RefactoringOp) -> None:
    model = editor.model
    method = _locate(model, replace(op.before.name, param=None))
    old = op.before.name.param
    new = op.after.name.param
    if old is None or new is None:
        raise TransformError("parameter rename needs parameter names on both descriptors")
    if new in method.param_names:
        raise CollisionError(f"parameter {new} already exists on {method.rendered}")
    if old not in method.param_names:
        raise ElementNotFound(f"parameter {old} not found on {method.rendered}")

    path = method.span.file_path
    text = editor.w.read(path)
    data = text.encode("utf-8")
    region = data[method.span.start_byte : method.span.end_byte].decode("utf-8")
    count = 0
    for tok in tokenize(region):
        if tok.kind == "ident" and tok.text == old:
            editor.add(path, method.span.start_byte + tok.start, method.span.start_byte + tok.end, new)
            count += 1
    if count == 0:
        raise ElementNotFound(f"parameter {old} not found in {method.rendered}")


def _apply_class_change(editor: _Editor, op: RefactoringOp) -> None:
    """Rename and/or move a top-level (or nested) type."""
    model = editor.model
    el = _locate(model, op.before.name)
    old_name = op.before.name
    new_name = op.after.name
    _collision_check(model, new_name, el.kind)
    renames = old_name.simple != new_name.simple
    moves = old_name.package != new_name.package
    path = el.span.file_path
    unit = model._parsed[path]

    if renames:
        editor.add(path, el.name_span.start_byte, el.name_span.end_byte, new_name.simple)
        for member in el.members:
            if member.kind == KIND_CONSTRUCTOR:
                editor.add(
                    path, member.name_span.start_byte, member.name_span.end_byte, new_name.simple
                )

    if moves and unit.package_span is not None and len(old_name.types) == 1:
        editor.add(
            path,
            unit.package_span.start_byte,
            unit.package_span.end_byte,
            ".".join(new_name.package),
        )

    old_fq = old_name.render()
    new_fq = new_name.render()
    for ref in _refs(model, el):
        rpath = ref.span.file_path
        if ref.kind == "import":
            imp = next(
                (
                    i
                    for i in model._parsed[rpath].imports
                    if ref.span.start_byte in {t.start for t in i.segment_tokens}
                ),
                None,
            )
            if imp is None:
                continue
            if imp.is_static:
                stmt = f"import static {new_fq}.{imp.segments[-1]};"
            else:
                stmt = f"import {new_fq};"
            editor.add(rpath, imp.span.start_byte, imp.span.end_byte, stmt)
            continue
        chain_start, chain = _qualifier_before(editor, rpath, ref.span.start_byte)
        ref_pkg = model.packages.get(rpath, ())
        if chain and tuple(chain) == old_name.package:
            # fully qualified use: requalify, or strip when now same-package
            if ref_pkg == new_name.package:
                editor.add(rpath, chain_start, ref.span.end_byte, new_name.simple)
            else:
                editor.add(rpath, chain_start, ref.span.end_byte, new_fq)
        elif not chain:
            if rpath == path or ref_pkg == new_name.package or _has_import(model, rpath, new_name):
                if renames:
                    editor.add(rpath, ref.span.start_byte, ref.span.end_byte, new_name.simple)
            elif _has_import(model, rpath, old_name):
                # the rewritten import keeps the bare name resolvable
                if renames:
                    editor.add(rpath, ref.span.start_byte, ref.span.end_byte, new_name.simple)
            else:
                # same-package resolution breaks once the class moves away
                editor.add(rpath, ref.span.start_byte, ref.span.end_byte, new_fq)
        else:
            # qualified through an outer type or partly: rewrite the tail
            if renames:
                editor.add(rpath, ref.span.start_byte, ref.span.end_byte, new_name.simple)

    # relocate the file when it is named after the class
    base = os.path.basename(path)
    if base == old_name.simple + ".java" and len(old_name.types) == 1:
        new_path = _repath(path, old_name, new_name)
        if new_path != path:
            editor.move_file(path, new_path)


def _has_import(model: ProjectModel, path: str, name: QualifiedName) -> bool:
    unit = model._parsed.get(path)
    if unit is None:
        return False
    fq = name.package + name.types
    return any(not i.wildcard and i.segments == fq for i in unit.imports)


def _repath(path: str, old_name: QualifiedName, new_name: QualifiedName) -> str:
    parts = path.split("/")
    fname = new_name.simple + ".java"
    dirs = parts[:-1]
    k = len(old_name.package)
    if k and len(dirs) >= k and tuple(dirs[-k:]) == old_name.package:
        dirs = dirs[:-k] + list(new_name.package)
    return "/".join(dirs + [fname])


# ---------------------------------------------------------------------------
# member relocation (move / pull up / push down)


def _apply_move_member(editor: _Editor, op: RefactoringOp, require_chain: str | None = None) -> None:
    model = editor.model
    el = _locate(model, op.before.name)
    src_owner = _owner_class(model, op.before.name)
    dest_owner = _owner_class(model, op.after.name)
    new_simple = op.after.name.simple
    renames = op.before.name.simple != new_simple

    if require_chain == "up" and model.superclass_of(src_owner) is not dest_owner:
        raise TransformError(
            f"{dest_owner.rendered} is not the declared superclass of {src_owner.rendered}"
        )
    if require_chain == "down" and model.superclass_of(dest_owner) is not src_owner:
        raise TransformError(
            f"{dest_owner.rendered} is not a declared subclass of {src_owner.rendered}"
        )

    if el.kind in CALLABLE_KINDS:
        if model.methods_of(dest_owner, new_simple, len(el.param_names)):
            raise CollisionError(f"{dest_owner.rendered}#{new_simple} already exists with same arity")
    else:
        if model.field_of(dest_owner, new_simple) is not None:
            raise CollisionError(f"{dest_owner.rendered}#{new_simple} already exists")

    cut, cut_start = _cut_member(editor, el)
    if renames:
        # rename the declaration identifier inside the cut text (byte offsets)
        cut_b = cut.encode("utf-8")
        rel = el.name_span.start_byte - cut_start
        width = el.name_span.end_byte - el.name_span.start_byte
        cut = (cut_b[:rel] + new_simple.encode("utf-8") + cut_b[rel + width :]).decode("utf-8")

    # requalify explicit Type.member references; bare references resolve
    # through inheritance after a pull up and are left alone, otherwise
    # they are recorded as skipped rather than edited (editing them could
    # not be undone byte-exactly by the inverse operation)
    for ref in _refs(model, el):
        rpath = ref.span.file_path
        chain_start, chain = _qualifier_before(editor, rpath, ref.span.start_byte)
        if chain and chain[-1] == src_owner.name.simple:
            prefix = dest_owner.name.simple
            if len(chain) > 1:
                prefix = ".".join(chain[:-1]) + "." + prefix
            editor.add(rpath, chain_start, ref.span.end_byte, f"{prefix}.{new_simple}")
        elif require_chain is None:
            editor.result.skipped_refs.append(
                (f"{rpath}:{ref.span.start_line}", "unqualified reference to a moved member")
            )

    if dest_owner.span.file_path != el.span.file_path:
        _sync_imports(editor, el.span.file_path, removed_text=cut)
        _sync_imports(editor, dest_owner.span.file_path, added_text=cut)
    _insert_member(editor, dest_owner, cut, op.after.span)


def _sync_imports(editor: _Editor, path: str, added_text: str = "", removed_text: str = "") -> None:
    """Add imports the new text needs; drop imports the file no longer uses.

    Deterministic and self-inverse for a text move: re-running after the
    inverse move restores the original import block byte-for-byte (imports
    are kept in sorted position).
    """
    model = editor.model
    unit = model._parsed.get(path)
    if unit is None:
        return
    text = editor.w.read(path)
    if removed_text:
        remaining = text.replace(removed_text, "", 1)
    else:
        remaining = text
    used = {t.text for t in tokenize(remaining) if t.kind == "ident"}
    future = {t.text for t in tokenize(added_text) if t.kind == "ident"} if added_text else set()

    # drop explicit imports whose simple name disappears
    for imp in unit.imports:
        if imp.wildcard:
            continue
        simple = imp.segments[-1]
        if simple not in used and simple not in future:
            data = text.encode("utf-8")
            end = imp.span.end_byte
            if data[end : end + 1] == b"\n":
                end += 1
            editor.add(path, imp.span.start_byte, end, "")

    if not added_text:
        return
    # add imports for names the incoming text resolves only via import
    have = {imp.segments[-1] for imp in unit.imports if not imp.wildcard}
    pkg = unit.package
    wanted: list[str] = []
    for name in sorted(future):
        if name in have:
            continue
        el = model.index.get(QualifiedName(pkg, (name,)).render())
        if el is not None:
            continue  # same package
        candidates = [
            e
            for e in model.elements(*TYPE_KINDS)
            if e.name.simple == name and len(e.name.types) == 1
        ]
        if len(candidates) == 1 and candidates[0].name.package != pkg:
            wanted.append(candidates[0].rendered)
    if not wanted:
        return
    explicit = [imp for imp in unit.imports if not imp.wildcard]
    for fq in wanted:
        stmt = f"import {fq};\n"
        pos = None
        for imp in explicit:
            if ".".join(imp.segments) > fq:
                pos = imp.span.start_byte
                break
        if pos is None:
            if explicit:
                data = editor.w.read(path).encode("utf-8")
                end = explicit[-1].span.end_byte
                pos = end + 1 if data[end : end + 1] == b"\n" else end
            elif unit.package_span is not None:
                data = editor.w.read(path).encode("utf-8")
                semi = data.index(b";", unit.package_span.end_byte)
                pos = semi + 1
                if data[pos : pos + 1] == b"\n":
                    pos += 1
            else:
                pos = 0
        editor.add(path, pos, pos, stmt)


# ---------------------------------------------------------------------------
# inline / extract


def _method_body_region(editor: _Editor, el: CodeElement) -> tuple[int, int, str]:
    """(start byte, end byte, text) of the region inside a method's braces."""
    path = el.span.file_path
    data = editor.w.read(path).encode("utf-8")
    open_b = data.index(b"{", _name_end(el))
    close_b = el.span.end_byte - 1
    return open_b + 1, close_b, data[open_b + 1 : close_b].decode("utf-8")


def _derive_inline_body(editor: _Editor, el: CodeElement) -> tuple[str, bool]:
    """Body text for substitution plus expression-mode flag."""
    _, _, body = _method_body_region(editor, el)
    stripped = body.strip()
    toks = tokenize(stripped)
    returns = [t for t in toks if t.kind == "ident" and t.text == "return"]
    if len(returns) == 1 and toks and toks[0].text == "return" and stripped.endswith(";"):
        return stripped[len("return") : -1].strip(), True
    if len(returns) > 1:
        raise AmbiguousInline(f"{el.rendered} has multiple returns")
    if returns:
        raise AmbiguousInline(f"{el.rendered} mixes statements with a return")
    return stripped, False


def _substitute(body_text: str, formals: tuple[str, ...], actuals: tuple[str, ...]) -> str:
    mapping = dict(zip(formals, actuals))
    if not mapping:
        return body_text
    edits = []
    for tok in tokenize(body_text):
        if tok.kind == "ident" and tok.text in mapping:
            edits.append((tok.start, tok.end, mapping[tok.text]))
    data = body_text.encode("utf-8")
    for s, e, r in sorted(edits, reverse=True):
        data = data[:s] + r.encode("utf-8") + data[e:]
    return data.decode("utf-8")


def call_extent(text: str, tokens, ident_idx: int) -> tuple[int, int, str, tuple[str, ...]]:
    """Extent of ``qualifier.name(args)`` around a call identifier token.

    Returns (start byte, end byte just past ')', qualifier text with
    trailing dot or '', argument texts).
    """
    ident = tokens[ident_idx]
    start = ident.start
    j = ident_idx - 1
    while j > 0 and tokens[j].text == "." and tokens[j - 1].kind == "ident":
        start = tokens[j - 1].start
        j -= 2
    depth = 0
    k = ident_idx + 1
    args: list[tuple[int, int]] = []
    arg_start = None
    end = None
    while k < len(tokens):
        t = tokens[k]
        if t.text in ("(", "[", "{"):
            depth += 1
            if depth == 1:
                arg_start = t.end
        elif t.text in (")", "]", "}"):
            depth -= 1
            if depth == 0:
                if arg_start is not None and arg_start != t.start:
                    args.append((arg_start, t.start))
                end = t.end
                break
        elif depth == 1 and t.text == ",":
            args.append((arg_start, t.start))
            arg_start = t.end
        k += 1
    if end is None:
        raise TransformError(f"unbalanced call at byte {ident.start}")
    data = text.encode("utf-8")
    arg_texts = tuple(data[s:e].decode("utf-8").strip() for s, e in args)
    if arg_texts == ("",):
        arg_texts = ()
    qualifier = data[start : ident.start].decode("utf-8")
    return start, end, qualifier, arg_texts


def _call_extent(editor: _Editor, path: str, ident_start: int) -> tuple[int, int, str, tuple[str, ...]]:
    toks = editor.tokens(path)
    i = editor.token_index(path, ident_start)
    return call_extent(editor.w.read(path), toks, i)


def _apply_inline(editor: _Editor, op: RefactoringOp) -> None:
    model = editor.model
    callee = _locate(model, op.before.name)
    payload = op.payload if isinstance(op.payload, ExtractInlinePayload) else None
    if payload is not None and payload.body_text:
        body_text, is_expr = payload.body_text, payload.is_expression
    else:
        body_text, is_expr = _derive_inline_body(editor, callee)
    formals = tuple(callee.param_names)

    call_refs = [r for r in _refs(model, callee) if r.kind == "call"]
    if not call_refs:
        raise AmbiguousInline(f"no resolvable call sites for {callee.rendered}")

    for ref in call_refs:
        if ref.span.intersects(callee.span):
            raise AmbiguousInline(f"{callee.rendered} is recursive")
        path = ref.span.file_path
        start, end, _qual, actuals = _call_extent(editor, path, ref.span.start_byte)
        if len(actuals) != len(formals):
            raise AmbiguousInline(
                f"call at {path}:{ref.span.start_line} passes {len(actuals)} args, expected {len(formals)}"
            )
        replacement = _substitute(body_text, formals, actuals)
        if is_expr:
            editor.add(path, start, end, replacement)
        else:
            data = editor.w.read(path).encode("utf-8")
            stmt_end = end
            if data[end : end + 1] == b";":
                stmt_end = end + 1
            else:
                raise AmbiguousInline(
                    f"statement-body callee used in expression context at {path}:{ref.span.start_line}"
                )
            editor.add(path, start, stmt_end, replacement)

    cut, _start = _cut_member(editor, callee)
    host = model.lookup(op.after.name.render())
    if host is not None and host.span.file_path != callee.span.file_path:
        _sync_imports(editor, callee.span.file_path, removed_text=cut)
        _sync_imports(editor, host.span.file_path, added_text=body_text)


def _apply_extract(editor: _Editor, op: RefactoringOp) -> None:
    model = editor.model
    host = _locate(model, op.before.name)
    payload = op.payload if isinstance(op.payload, ExtractInlinePayload) else None
    if payload is None or not payload.decl_text or not payload.body_text:
        raise TransformError("extract requires a payload with declaration and body text")
    _collision_check(model, op.after.name, KIND_METHOD)

    dest_owner = _owner_class(model, op.after.name)
    name = op.after.name.member or op.after.name.simple
    formals = payload.param_names

    sites = payload.call_sites
    if not sites:
        from .ops import CallSite

        sites = (CallSite(None, "", tuple(formals)),)

    path = host.span.file_path
    body_start, body_end, host_body = _method_body_region(editor, host)
    for cs in sites:
        substituted = _substitute(payload.body_text, formals, cs.args)
        call_text = f"{cs.qualifier}{name}(" + ", ".join(cs.args) + ")"
        if not payload.is_expression:
            call_text += ";"
        occur = host_body.count(substituted)
        if occur == 0:
            raise TransformError(
                f"extracted body not found in {host.rendered}; cannot introduce {name}"
            )
        rel = host_body.index(substituted)
        if occur > 1 and cs.span is not None:
            # prefer the occurrence nearest the recorded site
            best, best_d = None, None
            off = 0
            while True:
                k = host_body.find(substituted, off)
                if k < 0:
                    break
                d = abs((body_start + k) - cs.span.start_byte)
                if best_d is None or d < best_d:
                    best, best_d = k, d
                off = k + 1
            rel = best
        abs_start = body_start + len(host_body[:rel].encode("utf-8"))
        abs_end = abs_start + len(substituted.encode("utf-8"))
        editor.add(path, abs_start, abs_end, call_text)

    if dest_owner.span.file_path != path:
        _sync_imports(editor, dest_owner.span.file_path, added_text=payload.decl_text)
        _sync_imports(editor, path, removed_text=payload.body_text)
    indent = " " * 4 * len(dest_owner.name.types)
    block = "\n\n" + indent + payload.decl_text
    _insert_member(editor, dest_owner, block, op.after.span)


# ---------------------------------------------------------------------------
# package rename


def _apply_rename_package(editor: _Editor, op: RefactoringOp) -> None:
    model = editor.model
    old_pkg = op.before.name.package
    new_pkg = op.after.name.package
    if not old_pkg or not new_pkg:
        raise TransformError("package rename needs non-empty package names on both sides")

    touched = False
    for path, unit in model._parsed.items():
        pkg = unit.package
        if pkg[: len(old_pkg)] == old_pkg:
            touched = True
            rest = pkg[len(old_pkg) :]
            if unit.package_span is not None:
                editor.add(
                    path,
                    unit.package_span.start_byte,
                    unit.package_span.end_byte,
                    ".".join(new_pkg + rest),
                )
            new_path = _repath_package(path, old_pkg, new_pkg)
            if new_path != path:
                editor.move_file(path, new_path)
        # rewrite imports and qualified references of classes in the package
        for imp in unit.imports:
            if imp.segments[: len(old_pkg)] == old_pkg:
                tail = imp.segments[len(old_pkg) :]
                editor.add(
                    path,
                    imp.span.start_byte,
                    imp.span.end_byte,
                    "import " + ".".join(new_pkg + tail) + ";",
                )
    if not touched:
        raise ElementNotFound(f"no files declare package {'.'.join(old_pkg)}")

    # fully qualified in-code references
    for key, refs in model.references.items():
        el = model.index.get(key)
        if el is None or el.kind not in TYPE_KINDS:
            continue
        if el.name.package[: len(old_pkg)] != old_pkg:
            continue
        tail = el.name.package[len(old_pkg) :]
        for ref in refs:
            if ref.kind != "type-use":
                continue
            rpath = ref.span.file_path
            chain_start, chain = _qualifier_before(editor, rpath, ref.span.start_byte)
            if chain and tuple(chain) == el.name.package:
                editor.add(
                    rpath,
                    chain_start,
                    ref.span.end_byte,
                    ".".join(new_pkg + tail) + "." + el.name.simple,
                )


def _repath_package(path: str, old_pkg: tuple[str, ...], new_pkg: tuple[str, ...]) -> str:
    parts = path.split("/")
    dirs, fname = parts[:-1], parts[-1]
    k = len(old_pkg)
    for i in range(len(dirs) - k + 1):
        if tuple(dirs[i : i + k]) == old_pkg:
            dirs = dirs[:i] + list(new_pkg) + dirs[i + k :]
            break
    return "/".join(dirs + [fname])


# ---------------------------------------------------------------------------
# entry points


def apply_refactoring(
    worktree: Worktree, op: RefactoringOp, model: ProjectModel | None = None
) -> TransformResult:
    """Apply one operation to the worktree; raises on failure, no partial edits."""
    if model is None:
        model = build_model(worktree.java_files())
    editor = _Editor(worktree, model)

    kind = op.kind
    if kind in (RefactoringKind.RenameMethod, RefactoringKind.RenameField):
        _apply_rename_member(editor, op)
    elif kind == RefactoringKind.RenameParameter:
        _apply_rename_parameter(editor, op)
    elif kind in CLASS_KINDS:
        _apply_class_change(editor, op)
    elif kind in (RefactoringKind.MoveMethod, RefactoringKind.MoveAndRenameMethod,
                  RefactoringKind.MoveField, RefactoringKind.MoveAndRenameField):
        _apply_move_member(editor, op)
    elif kind in (RefactoringKind.PullUpMethod, RefactoringKind.PullUpField):
        _apply_move_member(editor, op, require_chain="up")
    elif kind in (RefactoringKind.PushDownMethod, RefactoringKind.PushDownField):
        _apply_move_member(editor, op, require_chain="down")
    elif kind == RefactoringKind.InlineMethod:
        _apply_inline(editor, op)
    elif kind == RefactoringKind.ExtractMethod:
        _apply_extract(editor, op)
    elif kind == RefactoringKind.RenamePackage:
        _apply_rename_package(editor, op)
    else:  # pragma: no cover
        raise TransformError(f"unsupported kind {kind}")

    return editor.commit()


def rewrite_through(pending: RefactoringOp, applied: RefactoringOp) -> RefactoringOp:
    """Rewrite a pending op's coordinates through an already-applied op."""

    def map_name(name: QualifiedName) -> QualifiedName:
        if applied.kind == RefactoringKind.RenamePackage:
            old_pkg = applied.before.name.package
            new_pkg = applied.after.name.package
            if name.package[: len(old_pkg)] == old_pkg:
                return replace(name, package=new_pkg + name.package[len(old_pkg) :])
            return name
        if applied.kind in CLASS_KINDS:
            b, a = applied.before.name, applied.after.name
            if name.package == b.package and name.types[: len(b.types)] == b.types:
                return replace(
                    name, package=a.package, types=a.types + name.types[len(b.types) :]
                )
            return name
        b, a = applied.before.name, applied.after.name
        if b.member is not None and name.member is not None:
            if replace(name, param=None).render() == replace(b, param=None).render():
                return replace(
                    name,
                    package=a.package,
                    types=a.types,
                    member=a.member,
                    signature=a.signature if a.signature is not None else name.signature,
                )
        return name

    new_before = replace(pending.before, name=map_name(pending.before.name))
    new_after = replace(pending.after, name=map_name(pending.after.name))
    if new_before == pending.before and new_after == pending.after:
        return pending
    return replace(pending, before=new_before, after=new_after)


def apply_all(
    worktree: Worktree,
    ops: list[RefactoringOp],
    matrix: ConflictMatrix | None = None,
) -> TransformResult | ReplayConflictReport:
    """Order, coordinate-rewrite and apply a batch; all-or-nothing."""
    result = TransformResult()
    if not ops:
        return result
    ordered = replay_order(list(ops), matrix)
    if isinstance(ordered, ReplayConflictReport):
        return ordered

    snap = worktree.snapshot()
    pending = list(ordered)
    try:
        for idx in range(len(pending)):
            op = pending[idx]
            model = build_model(worktree.java_files())
            result.merge(apply_refactoring(worktree, op, model))
            for j in range(idx + 1, len(pending)):
                pending[j] = rewrite_through(pending[j], op)
    except Exception as exc:
        worktree.restore(snap)
        raise TransformError(f"operation {idx} ({op}) failed: {exc}") from exc
    return result
