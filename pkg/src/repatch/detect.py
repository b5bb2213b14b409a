"""Detect refactoring operations between two project models.

The matcher runs a fixed cascade over elements that disappeared or
appeared between the two states: package renames first (they remap every
owner underneath), then classes by member-set similarity, then methods by
body-digest similarity, inline/extract by body embedding, then fields,
and finally parameter renames inside methods that kept their identity.
Earlier stages win ties; each concrete element joins at most one
operation, and low-confidence candidates are dropped rather than guessed.

The configured body-similarity threshold gates only the digest-similarity
matches (method rename/move). Class matching uses a fixed internal bar
and the structural stages use exact evidence, so raising the configured
threshold can only remove operations, never add them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .model import (
    CALLABLE_KINDS,
    KIND_CONSTRUCTOR,
    KIND_FIELD,
    KIND_METHOD,
    TYPE_KINDS,
    CodeElement,
    ProjectModel,
    QualifiedName,
)
from .ops import (
    CallSite,
    ElementDescriptor,
    ExtractInlinePayload,
    ParameterPayload,
    RefactoringKind,
    RefactoringOp,
    op_to_json,
)
from .transform import call_extent

_CLASS_MATCH_BAR = 0.5  # fixed: not the configurable body threshold


@dataclass
class DetectionConfig:
    body_similarity_threshold: float = 0.7
    min_body_tokens: int = 5
    file_scope: set[str] | None = None

    def __post_init__(self):
        if not 0.0 <= self.body_similarity_threshold <= 1.0:
            raise ValueError("body_similarity_threshold must lie in [0, 1]")


@dataclass
class DetectionResult:
    ops: list[RefactoringOp] = field(default_factory=list)
    unmatched_removed: list[str] = field(default_factory=list)
    unmatched_added: list[str] = field(default_factory=list)

    def counts_by_kind(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for op in self.ops:
            out[op.kind.value] = out.get(op.kind.value, 0) + 1
        return out

    def to_jsonl(self) -> str:
        lines = [op_to_json(op) for op in self.ops]
        import json

        lines.append(json.dumps({"summary": self.counts_by_kind()}, sort_keys=True))
        return "\n".join(lines) + "\n"


def similarity(a: tuple[str, ...], b: tuple[str, ...]) -> float:
    """Jaccard index over token bigrams; identical sequences score 1.0."""
    if tuple(a) == tuple(b):
        return 1.0
    if not a or not b:
        return 0.0
    ba = {(a[i], a[i + 1]) for i in range(len(a) - 1)}
    bb = {(b[i], b[i + 1]) for i in range(len(b) - 1)}
    if not ba and not bb:
        return 1.0 if a == b else 0.0
    union = ba | bb
    if not union:
        return 0.0
    return len(ba & bb) / len(union)


# ---------------------------------------------------------------------------


def _descriptor(el: CodeElement) -> ElementDescriptor:
    return ElementDescriptor(el.name, el.kind, el.span)


def _scoped(model: ProjectModel, scope: set[str] | None):
    for el in model.elements():
        if scope is None or el.span.file_path in scope:
            yield el


class _NameMap:
    """Accumulated owner mapping from detected package and class ops."""

    def __init__(self):
        self.pkg: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
        self.cls: dict[str, QualifiedName] = {}  # before rendered type -> after name

    def map_name(self, name: QualifiedName) -> QualifiedName:
        if name.types:
            owner = QualifiedName(name.package, name.types)
            mapped = self.cls.get(owner.render())
            if mapped is not None:
                return replace(name, package=mapped.package, types=mapped.types)
        for old, new in self.pkg:
            if name.package[: len(old)] == old:
                return replace(name, package=new + name.package[len(old) :])
        return name


def _member_profile(cls: CodeElement) -> frozenset:
    out = set()
    for m in cls.members:
        if m.kind in CALLABLE_KINDS:
            ident = m.name.member if m.kind != KIND_CONSTRUCTOR else "<init>"
            out.add(("callable", ident, len(m.param_names)))
        elif m.kind == KIND_FIELD:
            out.add(("field", m.name.member, m.value_type))
    return frozenset(out)


def _set_jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def _embeds(haystack: tuple[str, ...], needle: tuple[str, ...], wildcards: frozenset[str]) -> bool:
    """Contiguous subsequence check where wildcard tokens match any run.

    A wildcard (formal parameter name) matches one or more consecutive
    tokens, shortest match first; everything else must match exactly.
    """
    if not needle:
        return False
    n, m = len(haystack), len(needle)

    def match_from(hi: int, ni: int) -> bool:
        while ni < m:
            if hi >= n:
                return False
            tok = needle[ni]
            if tok in wildcards:
                nxt = needle[ni + 1] if ni + 1 < m else None
                if nxt is None:
                    return True
                j = hi + 1
                while j < n:
                    if haystack[j] == nxt and match_from(j, ni + 1):
                        return True
                    j += 1
                return False
            if haystack[hi] != tok:
                return False
            hi += 1
            ni += 1
        return True

    first = needle[0]
    for start in range(n):
        if first in wildcards or haystack[start] == first:
            if match_from(start, 0):
                return True
    return False


def _calls_in(digest: tuple[str, ...], name: str) -> int:
    return sum(
        1 for i in range(len(digest) - 1) if digest[i] == name and digest[i + 1] == "("
    )


def _single_return_expr(method: CodeElement) -> tuple[str, ...] | None:
    d = method.body_digest
    if d[:1] == ("return",) and d[-1:] == (";",) and d.count("return") == 1:
        return d[1:-1]
    return None


def _body_statement_tokens(method: CodeElement) -> tuple[str, ...] | None:
    if "return" in method.body_digest:
        return None
    return method.body_digest


def _decl_text(model: ProjectModel, el: CodeElement) -> str:
    data = model.texts[el.span.file_path].encode("utf-8")
    return data[el.span.start_byte : el.span.end_byte].decode("utf-8")


def _body_text(model: ProjectModel, el: CodeElement) -> tuple[str, bool]:
    """Substitutable body text of a method and its expression-mode flag."""
    decl = _decl_text(model, el)
    inner = decl[decl.index("{") + 1 : decl.rindex("}")].strip()
    expr = _single_return_expr(el)
    if expr is not None:
        return inner[len("return") : -1].strip(), True
    return inner, False


def _call_sites_for(model: ProjectModel, callee: CodeElement, within: CodeElement | None = None):
    sites = []
    for ref in model.references.get(callee.rendered, []):
        if ref.kind != "call":
            continue
        if within is not None and not (
            ref.span.file_path == within.span.file_path
            and within.span.start_byte <= ref.span.start_byte < within.span.end_byte
        ):
            continue
        unit = model._parsed[ref.span.file_path]
        idx = next(i for i, t in enumerate(unit.tokens) if t.start == ref.span.start_byte)
        start, end, qualifier, args = call_extent(model.texts[ref.span.file_path], unit.tokens, idx)
        sites.append(CallSite(ref.span, qualifier, args))
    return sites


# ---------------------------------------------------------------------------


def detect(before: ProjectModel, after: ProjectModel, cfg: DetectionConfig | None = None) -> DetectionResult:
    """Match the 17 supported refactoring kinds between two models."""
    cfg = cfg or DetectionConfig()
    scope = cfg.file_scope
    nm = _NameMap()
    result = DetectionResult()
    ops = result.ops

    # --- package renames -------------------------------------------------
    pkgs_before: dict[tuple[str, ...], set[str]] = {}
    pkgs_after: dict[tuple[str, ...], set[str]] = {}
    for el in _scoped(before, scope):
        if el.kind in TYPE_KINDS and len(el.name.types) == 1:
            pkgs_before.setdefault(el.name.package, set()).add(el.name.simple)
    for el in _scoped(after, scope):
        if el.kind in TYPE_KINDS and len(el.name.types) == 1:
            pkgs_after.setdefault(el.name.package, set()).add(el.name.simple)
    removed_pkgs = {p: s for p, s in pkgs_before.items() if p not in pkgs_after}
    added_pkgs = {p: s for p, s in pkgs_after.items() if p not in pkgs_before}
    pkg_pairs = []
    for p, names_p in sorted(removed_pkgs.items()):
        for q, names_q in sorted(added_pkgs.items()):
            if names_p and names_p == names_q:
                pkg_pairs.append((p, q))
    used_q = set()
    chosen_pairs = []
    for p, q in pkg_pairs:
        if q in used_q:
            continue
        used_q.add(q)
        chosen_pairs.append((p, q))
    # collapse sub-package pairs implied by a parent rename
    final_pairs = []
    for p, q in chosen_pairs:
        implied = any(
            p != p2 and p[: len(p2)] == p2 and q[: len(q2)] == q2 and p[len(p2):] == q[len(q2):]
            for p2, q2 in chosen_pairs
        )
        if not implied:
            final_pairs.append((p, q))
    for p, q in final_pairs:
        nm.pkg.append((p, q))
        ops.append(
            RefactoringOp(
                RefactoringKind.RenamePackage,
                ElementDescriptor(QualifiedName(p), "package"),
                ElementDescriptor(QualifiedName(q), "package"),
            )
        )

    # --- classes ----------------------------------------------------------
    before_classes = {el.rendered: el for el in _scoped(before, scope) if el.kind in TYPE_KINDS}
    after_classes = {el.rendered: el for el in _scoped(after, scope) if el.kind in TYPE_KINDS}
    mapped_names = {nm.map_name(el.name).render(): key for key, el in before_classes.items()}
    removed_cls = [
        el for key, el in sorted(before_classes.items()) if nm.map_name(el.name).render() not in after_classes
    ]
    added_cls = [
        el for key, el in sorted(after_classes.items()) if key not in mapped_names
    ]
    cand = []
    for r in removed_cls:
        pr = _member_profile(r)
        for a in added_cls:
            score = _set_jaccard(pr, _member_profile(a))
            if score >= _CLASS_MATCH_BAR:
                cand.append((score, r.rendered, a.rendered, r, a))
    cand.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_r: set[str] = set()
    used_a: set[str] = set()
    for score, kr, ka, r, a in cand:
        if kr in used_r or ka in used_a:
            continue
        mapped_pkg = nm.map_name(r.name).package
        same_pkg = mapped_pkg == a.name.package and r.name.types[:-1] == a.name.types[:-1]
        same_name = r.name.simple == a.name.simple
        if same_pkg and same_name:
            continue  # should have been caught as unchanged
        if same_pkg:
            kind = RefactoringKind.RenameClass
        elif same_name:
            kind = RefactoringKind.MoveClass
        else:
            kind = RefactoringKind.MoveAndRenameClass
        used_r.add(kr)
        used_a.add(ka)
        nm.cls[QualifiedName(r.name.package, r.name.types).render()] = a.name
        ops.append(RefactoringOp(kind, _descriptor(r), _descriptor(a)))
    leftover_removed = [r.rendered for r in removed_cls if r.rendered not in used_r]
    leftover_added = [a.rendered for a in added_cls if a.rendered not in used_a]

    # --- methods ----------------------------------------------------------
    def methods_of(model, scope_set):
        return {
            el.rendered: el
            for el in _scoped(model, scope_set)
            if el.kind in CALLABLE_KINDS
        }

    before_methods = methods_of(before, scope)
    after_methods = methods_of(after, scope)
    surviving: list[tuple[CodeElement, CodeElement]] = []
    removed_m: list[CodeElement] = []
    for key, el in sorted(before_methods.items()):
        mapped = nm.map_name(el.name).render()
        mate = after_methods.get(mapped)
        if mate is not None:
            surviving.append((el, mate))
        else:
            removed_m.append(el)
    survived_after = {mate.rendered for _, mate in surviving}
    added_m = [el for key, el in sorted(after_methods.items()) if key not in survived_after]

    thr = cfg.body_similarity_threshold
    min_tokens = cfg.min_body_tokens
    mcand = []
    for r in removed_m:
        if r.kind == KIND_CONSTRUCTOR or len(r.body_digest) < min_tokens:
            continue
        for a in added_m:
            if a.kind == KIND_CONSTRUCTOR or len(a.body_digest) < min_tokens:
                continue
            if len(r.param_names) != len(a.param_names):
                continue
            sim = similarity(r.body_digest, a.body_digest)
            if sim >= thr:
                mcand.append((sim, r.rendered, a.rendered, r, a))
    mcand.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_rm: set[str] = set()
    used_am: set[str] = set()
    for sim, kr, ka, r, a in mcand:
        if kr in used_rm or ka in used_am:
            continue
        mapped_owner = nm.map_name(QualifiedName(r.name.package, r.name.types)).render()
        a_owner = QualifiedName(a.name.package, a.name.types).render()
        same_owner = mapped_owner == a_owner
        same_name = r.name.member == a.name.member
        if same_owner and same_name:
            continue
        if same_owner:
            kind = RefactoringKind.RenameMethod
        else:
            rel = _chain_relation(after, mapped_owner, a_owner)
            if same_name and rel == "up":
                kind = RefactoringKind.PullUpMethod
            elif same_name and rel == "down":
                kind = RefactoringKind.PushDownMethod
            elif same_name:
                kind = RefactoringKind.MoveMethod
            else:
                kind = RefactoringKind.MoveAndRenameMethod
        used_rm.add(kr)
        used_am.add(ka)
        ops.append(RefactoringOp(kind, _descriptor(r), _descriptor(a)))

    # --- inline / extract ---------------------------------------------------
    survivors_by_after = {mate.rendered: (orig, mate) for orig, mate in surviving}
    for r in removed_m:
        if r.rendered in used_rm or r.kind == KIND_CONSTRUCTOR:
            continue
        expr = _single_return_expr(r)
        needle = expr if expr is not None else _body_statement_tokens(r)
        if not needle:
            continue
        wilds = frozenset(r.param_names)
        hit = None
        for orig, mate in surviving:
            if len(mate.body_digest) <= len(orig.body_digest):
                continue
            if _calls_in(orig.body_digest, r.name.member) == 0:
                continue
            if _calls_in(mate.body_digest, r.name.member) > 0:
                continue
            if _embeds(mate.body_digest, needle, wilds):
                hit = (orig, mate)
                break
        if hit is not None:
            orig, mate = hit
            body_text, is_expr = _body_text(before, r)
            payload = ExtractInlinePayload(
                decl_text=_decl_text(before, r),
                body_text=body_text,
                param_names=tuple(r.param_names),
                call_sites=tuple(_call_sites_for(before, r)),
                is_expression=is_expr,
            )
            used_rm.add(r.rendered)
            ops.append(
                RefactoringOp(RefactoringKind.InlineMethod, _descriptor(r), _descriptor(mate), payload)
            )

    for a in added_m:
        if a.rendered in used_am or a.kind == KIND_CONSTRUCTOR:
            continue
        expr = _single_return_expr(a)
        needle = expr if expr is not None else _body_statement_tokens(a)
        if not needle:
            continue
        wilds = frozenset(a.param_names)
        hit = None
        for orig, mate in surviving:
            if len(mate.body_digest) >= len(orig.body_digest):
                continue
            if _calls_in(mate.body_digest, a.name.member) == 0:
                continue
            if _calls_in(orig.body_digest, a.name.member) > 0:
                continue
            if _embeds(orig.body_digest, needle, wilds):
                hit = (orig, mate)
                break
        if hit is not None:
            orig, mate = hit
            body_text, is_expr = _body_text(after, a)
            located = _locate_tokens_span(before, orig, needle, frozenset())
            payload = ExtractInlinePayload(
                decl_text=_decl_text(after, a),
                body_text=_span_text(before, located) if located else body_text,
                param_names=tuple(a.param_names),
                call_sites=tuple(_call_sites_for(after, a)),
                body_span=located,
                is_expression=is_expr,
            )
            used_am.add(a.rendered)
            ops.append(
                RefactoringOp(RefactoringKind.ExtractMethod, _descriptor(orig), _descriptor(a), payload)
            )

    leftover_removed += [r.rendered for r in removed_m if r.rendered not in used_rm]
    leftover_added += [a.rendered for a in added_m if a.rendered not in used_am]

    # --- fields -------------------------------------------------------------
    before_fields = {
        el.rendered: el for el in _scoped(before, scope) if el.kind == KIND_FIELD
    }
    after_fields = {el.rendered: el for el in _scoped(after, scope) if el.kind == KIND_FIELD}
    removed_f = []
    for key, el in sorted(before_fields.items()):
        if nm.map_name(el.name).render() not in after_fields:
            removed_f.append(el)
    mapped_fields = {nm.map_name(el.name).render() for el in before_fields.values()}
    added_f = [el for key, el in sorted(after_fields.items()) if key not in mapped_fields]
    fcand = []
    for r in removed_f:
        for a in added_f:
            if r.value_type != a.value_type:
                continue
            mapped_owner = nm.map_name(QualifiedName(r.name.package, r.name.types)).render()
            a_owner = QualifiedName(a.name.package, a.name.types).render()
            score = 0.5 + (0.3 if mapped_owner == a_owner else 0.0) + (
                0.2 if r.name.member == a.name.member else 0.0
            )
            fcand.append((score, r.rendered, a.rendered, r, a, mapped_owner, a_owner))
    fcand.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_rf: set[str] = set()
    used_af: set[str] = set()
    for score, kr, ka, r, a, mapped_owner, a_owner in fcand:
        if kr in used_rf or ka in used_af:
            continue
        same_owner = mapped_owner == a_owner
        same_name = r.name.member == a.name.member
        if same_owner and same_name:
            continue
        if same_owner:
            kind = RefactoringKind.RenameField
        else:
            rel = _chain_relation(after, mapped_owner, a_owner)
            if same_name and rel == "up":
                kind = RefactoringKind.PullUpField
            elif same_name and rel == "down":
                kind = RefactoringKind.PushDownField
            elif same_name:
                kind = RefactoringKind.MoveField
            else:
                kind = RefactoringKind.MoveAndRenameField
        used_rf.add(kr)
        used_af.add(ka)
        ops.append(RefactoringOp(kind, _descriptor(r), _descriptor(a)))
    leftover_removed += [r.rendered for r in removed_f if r.rendered not in used_rf]
    leftover_added += [a.rendered for a in added_f if a.rendered not in used_af]

    # --- parameter renames ----------------------------------------------------
    for orig, mate in surviving:
        if orig.param_names == mate.param_names:
            continue
        if len(orig.param_names) != len(mate.param_names):
            continue
        rename_map = {
            o: n for o, n in zip(orig.param_names, mate.param_names) if o != n
        }
        translated = tuple(rename_map.get(t, t) for t in orig.body_digest)
        if translated != mate.body_digest:
            continue
        for idx, (o, n) in enumerate(zip(orig.param_names, mate.param_names)):
            if o == n:
                continue
            ops.append(
                RefactoringOp(
                    RefactoringKind.RenameParameter,
                    ElementDescriptor(replace(orig.name, param=o), "parameter", orig.span),
                    ElementDescriptor(replace(mate.name, param=n), "parameter", mate.span),
                    ParameterPayload(idx),
                )
            )

    result.unmatched_removed = leftover_removed
    result.unmatched_added = leftover_added
    return result


def _chain_relation(after: ProjectModel, src_owner_key: str, dst_owner_key: str) -> str | None:
    """'up' when dst is an ancestor of src in the after model, 'down' when
    dst is a descendant, else None."""
    src = after.lookup(src_owner_key)
    dst = after.lookup(dst_owner_key)
    if src is None or dst is None:
        return None
    cls = after.superclass_of(src)
    seen = 0
    while cls is not None and seen < 32:
        if cls is dst:
            return "up"
        cls = after.superclass_of(cls)
        seen += 1
    cls = after.superclass_of(dst)
    seen = 0
    while cls is not None and seen < 32:
        if cls is src:
            return "down"
        cls = after.superclass_of(cls)
        seen += 1
    return None


def _locate_tokens_span(model: ProjectModel, method: CodeElement, needle: tuple[str, ...], wilds):
    """Byte span of a token subsequence inside a method body, if present."""
    path = method.span.file_path
    unit = model._parsed[path]
    toks = [
        t
        for t in unit.tokens
        if method.span.start_byte <= t.start < method.span.end_byte and t.kind != "comment"
    ]
    texts = [t.text for t in toks]
    n, m = len(texts), len(needle)
    for i in range(n - m + 1):
        if tuple(texts[i : i + m]) == tuple(needle):
            from .model import SourceSpan

            return SourceSpan(path, toks[i].line, toks[i + m - 1].line, toks[i].start, toks[i + m - 1].end)
    return None


def _span_text(model: ProjectModel, span) -> str:
    data = model.texts[span.file_path].encode("utf-8")
    return data[span.start_byte : span.end_byte].decode("utf-8")
