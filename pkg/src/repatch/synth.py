"""Synthetic fixtures and scenario generation.

Two layers live here. The in-memory layer builds small randomized Java
projects together with one applicable refactoring operation per kind,
with fully populated descriptors and payloads; those fixtures drive the
round-trip and detector test batteries. The repository layer materializes
a base project as a git repo, forks it into source and target working
copies, applies refactorings on the target, authors a bug-fix commit on
the source that touches the refactored regions, and records the ground
truth it created along the way.

Generated sources follow one canonical layout (package line, blank line,
imports, blank line, one top-level class per file, members separated by a
blank line at four-space indent) so that text cut/insert operations are
exactly invertible.
"""

from __future__ import annotations

import os
import random
import subprocess
from dataclasses import dataclass, field, replace

from .diffs import Patch
from .lexer import tokenize
from .model import ProjectModel, QualifiedName, build_model
from .ops import (
    CallSite,
    ElementDescriptor,
    ExtractInlinePayload,
    ParameterPayload,
    RefactoringKind,
    RefactoringOp,
)
from .transform import Worktree, apply_refactoring

_METHOD_NAMES = ["compute", "process", "handle", "resolve", "merge", "scan", "fold", "track"]
_CLASS_NAMES = ["Engine", "Worker", "Buffer", "Router", "Cache", "Ledger", "Probe", "Mixer"]
_FIELD_NAMES = ["total", "count", "limit", "offset", "stride", "budget"]
_PARAM_NAMES = ["value", "factor", "amount", "delta", "weight", "share"]
_PKG_WORDS = ["core", "util", "flow", "grid", "mesh", "dock"]


class _Names:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set()

    def pick(self, pool: list[str]) -> str:
        for _ in range(50):
            base = self.rng.choice(pool)
            suffix = self.rng.randrange(100)
            name = f"{base}{suffix}" if self.rng.random() < 0.7 else base
            if name not in self.used:
                self.used.add(name)
                return name
        name = f"{pool[0]}{len(self.used)}"
        self.used.add(name)
        return name


def _method_src(name: str, params: list[tuple[str, str]], body_lines: list[str],
                returns: str = "int", static: bool = False, indent: str = "    ") -> str:
    mods = "public static" if static else "public"
    plist = ", ".join(f"{t} {p}" for t, p in params)
    inner = "\n".join(indent + "    " + ln for ln in body_lines)
    return f"{indent}{mods} {returns} {name}({plist}) {{\n{inner}\n{indent}}}"


def _int_body(rng: random.Random, param: str | None, fld: str | None) -> list[str]:
    a, b, c = rng.randrange(2, 9), rng.randrange(10, 99), rng.randrange(2, 9)
    base = param if param is not None else str(rng.randrange(3, 30))
    lines = [f"int staged = {base} * {a} + {b};"]
    if fld is not None and rng.random() < 0.5:
        lines.append(f"this.{fld} = this.{fld} + staged;")
    lines.append(f"return staged - {c};")
    return lines


def _class_src(pkg: str, name: str, members: list[str], extends: str | None = None,
               imports: list[str] | None = None) -> str:
    head = f"package {pkg};\n\n"
    if imports:
        head += "".join(f"import {imp};\n" for imp in sorted(imports)) + "\n"
    ext = f" extends {extends}" if extends else ""
    body = "\n\n".join(members)
    return f"{head}public class {name}{ext} {{\n\n{body}\n}}\n"


def _pkg_path(pkg: str, cls: str) -> str:
    return pkg.replace(".", "/") + f"/{cls}.java"


@dataclass
class OpFixture:
    files: dict[str, str]  # pre-state sources
    op: RefactoringOp  # fully populated, applicable to the pre-state
    kind: RefactoringKind

    def apply(self) -> dict[str, str]:
        w = Worktree(files=dict(self.files))
        apply_refactoring(w, self.op)
        return w.files()


def build_op_fixture(kind: RefactoringKind, seed: int) -> OpFixture:
    """A random project plus one applicable operation of the given kind."""
    rng = random.Random((seed << 5) ^ hash(kind.value) % 100003)
    names = _Names(rng)
    builder = _FIXTURE_BUILDERS[kind]
    files, op_skeleton = builder(rng, names)
    op = _finish_op(files, op_skeleton)
    return OpFixture(files=files, op=op, kind=kind)


def _finish_op(files: dict[str, str], op: RefactoringOp) -> RefactoringOp:
    """Fill descriptor spans from the pre and post models."""
    before_model = build_model(files)
    bel = before_model.lookup(op.before.name.render())
    if bel is not None:
        op = replace(op, before=replace(op.before, span=bel.span))
    if op.kind == RefactoringKind.InlineMethod:
        # record call sites from the pre-state when not already present
        payload = op.payload
        if isinstance(payload, ExtractInlinePayload) and payload.call_sites:
            sites = []
            refs = [r for r in before_model.references.get(op.before.name.render(), []) if r.kind == "call"]
            for cs, ref in zip(payload.call_sites, refs):
                sites.append(replace(cs, span=ref.span))
            payload = replace(payload, call_sites=tuple(sites))
            op = replace(op, payload=payload)

    w = Worktree(files=dict(files))
    apply_refactoring(w, op)
    after_model = build_model(w.java_files())
    ael = after_model.lookup(op.after.name.render())
    if ael is not None:
        op = replace(op, after=replace(op.after, span=ael.span))
    return op


def _base_pkg(rng: random.Random, names: _Names) -> str:
    return "app." + names.pick(_PKG_WORDS)


def _fixture_rename_method(rng, names):
    pkg = _base_pkg(rng, names)
    cls = names.pick(_CLASS_NAMES)
    other = names.pick(_CLASS_NAMES)
    old = names.pick(_METHOD_NAMES)
    new = names.pick(_METHOD_NAMES)
    fld = names.pick(_FIELD_NAMES)
    p = rng.choice(_PARAM_NAMES)
    target = _method_src(old, [("int", p)], _int_body(rng, p, fld), static=True)
    caller_body = [f"int seen = {old}({rng.randrange(5, 50)});", "return seen + this." + fld + ";"]
    caller = _method_src(names.pick(_METHOD_NAMES), [], caller_body)
    files = {
        _pkg_path(pkg, cls): _class_src(pkg, cls, [f"    public int {fld} = {rng.randrange(1, 9)};", target, caller]),
        _pkg_path(pkg, other): _class_src(
            pkg,
            other,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {cls}.{old}({rng.randrange(3, 30)});"])],
        ),
    }
    sig = ("int",)
    return files, RefactoringOp(
        RefactoringKind.RenameMethod,
        ElementDescriptor(QualifiedName(tuple(pkg.split(".")), (cls,), old, sig), "method"),
        ElementDescriptor(QualifiedName(tuple(pkg.split(".")), (cls,), new, sig), "method"),
    )


def _fixture_move_method(rng, names, rename: bool = False):
    pkg = _base_pkg(rng, names)
    src_cls = names.pick(_CLASS_NAMES)
    dst_cls = names.pick(_CLASS_NAMES)
    user_cls = names.pick(_CLASS_NAMES)
    old = names.pick(_METHOD_NAMES)
    new = names.pick(_METHOD_NAMES) if rename else old
    p = rng.choice(_PARAM_NAMES)
    moved = _method_src(old, [("int", p)], _int_body(rng, p, None), static=True)
    files = {
        _pkg_path(pkg, src_cls): _class_src(pkg, src_cls, [moved]),
        _pkg_path(pkg, dst_cls): _class_src(
            pkg, dst_cls, [_method_src(names.pick(_METHOD_NAMES), [], _int_body(rng, None, None))]
        ),
        _pkg_path(pkg, user_cls): _class_src(
            pkg,
            user_cls,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {src_cls}.{old}({rng.randrange(2, 20)}) + {rng.randrange(1, 5)};"])],
        ),
    }
    pkg_t = tuple(pkg.split("."))
    kind = RefactoringKind.MoveAndRenameMethod if rename else RefactoringKind.MoveMethod
    return files, RefactoringOp(
        kind,
        ElementDescriptor(QualifiedName(pkg_t, (src_cls,), old, ("int",)), "method"),
        ElementDescriptor(QualifiedName(pkg_t, (dst_cls,), new, ("int",)), "method"),
    )


def _fixture_move_and_rename_method(rng, names):
    return _fixture_move_method(rng, names, rename=True)


def _fixture_rename_class(rng, names, move: bool = False, rename: bool = True):
    pkg_a = _base_pkg(rng, names)
    pkg_b = _base_pkg(rng, names) if move else pkg_a
    far_pkg = _base_pkg(rng, names)
    old = names.pick(_CLASS_NAMES)
    new = names.pick(_CLASS_NAMES) if rename else old
    mname = names.pick(_METHOD_NAMES)
    fld = names.pick(_FIELD_NAMES)
    sibling = names.pick(_CLASS_NAMES)
    far = names.pick(_CLASS_NAMES)
    files = {
        _pkg_path(pkg_a, old): _class_src(
            pkg_a, old,
            [f"    public int {fld} = {rng.randrange(1, 9)};",
             _method_src(mname, [("int", "value")], _int_body(rng, "value", fld), static=True)],
        ),
        _pkg_path(pkg_a, sibling): _class_src(
            pkg_a, sibling,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"int got = {old}.{mname}({rng.randrange(2, 30)});",
                          f"return got * {rng.randrange(2, 5)};"])],
        ),
        _pkg_path(far_pkg, far): _class_src(
            far_pkg, far,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {old}.{mname}({rng.randrange(2, 30)});"])],
            imports=[f"{pkg_a}.{old}"],
        ),
    }
    if move:
        # make the destination package exist on disk
        anchor = names.pick(_CLASS_NAMES)
        files[_pkg_path(pkg_b, anchor)] = _class_src(
            pkg_b, anchor, [_method_src(names.pick(_METHOD_NAMES), [], _int_body(rng, None, None))]
        )
    if move and rename:
        kind = RefactoringKind.MoveAndRenameClass
    elif move:
        kind = RefactoringKind.MoveClass
    else:
        kind = RefactoringKind.RenameClass
    return files, RefactoringOp(
        kind,
        ElementDescriptor(QualifiedName(tuple(pkg_a.split(".")), (old,)), "class"),
        ElementDescriptor(QualifiedName(tuple(pkg_b.split(".")), (new,)), "class"),
    )


def _fixture_move_class(rng, names):
    return _fixture_rename_class(rng, names, move=True, rename=False)


def _fixture_move_and_rename_class(rng, names):
    return _fixture_rename_class(rng, names, move=True, rename=True)


def _fixture_inline_method(rng, names):
    pkg = _base_pkg(rng, names)
    cls = names.pick(_CLASS_NAMES)
    callee = names.pick(_METHOD_NAMES)
    host = names.pick(_METHOD_NAMES)
    p = rng.choice(_PARAM_NAMES)
    k = rng.randrange(2, 9)
    m = rng.randrange(10, 80)
    expr = f"{p} * {k} + {m}"
    decl = _method_src(callee, [("int", p)], [f"return {expr};"], static=True).strip()
    arg = str(rng.randrange(3, 40))
    host_src = _method_src(
        host, [("int", "seed")],
        [f"int woven = {callee}({arg}) - seed;", f"return woven * {rng.randrange(2, 6)};"],
    )
    files = {
        _pkg_path(pkg, cls): _class_src(pkg, cls, ["    " + decl, host_src]),
    }
    pkg_t = tuple(pkg.split("."))
    payload = ExtractInlinePayload(
        decl_text=decl,
        body_text=expr,
        param_names=(p,),
        call_sites=(CallSite(None, "", (arg,)),),
        is_expression=True,
    )
    return files, RefactoringOp(
        RefactoringKind.InlineMethod,
        ElementDescriptor(QualifiedName(pkg_t, (cls,), callee, ("int",)), "method"),
        ElementDescriptor(QualifiedName(pkg_t, (cls,), host, ("int",)), "method"),
        payload,
    )


def _fixture_extract_method(rng, names):
    pkg = _base_pkg(rng, names)
    cls = names.pick(_CLASS_NAMES)
    host = names.pick(_METHOD_NAMES)
    fresh = names.pick(_METHOD_NAMES)
    fld = names.pick(_FIELD_NAMES)
    k = rng.randrange(2, 9)
    stmt = f"this.{fld} = this.{fld} * {k} + {rng.randrange(1, 30)};"
    host_src = _method_src(
        host, [("int", "seed")],
        [f"int primed = seed + {rng.randrange(1, 9)};", stmt, "return primed;"],
    )
    decl = f"private void {fresh}() {{\n        {stmt}\n    }}"
    files = {
        _pkg_path(pkg, cls): _class_src(
            pkg, cls, [f"    public int {fld} = {rng.randrange(1, 9)};", host_src]
        ),
    }
    pkg_t = tuple(pkg.split("."))
    payload = ExtractInlinePayload(
        decl_text=decl,
        body_text=stmt,
        param_names=(),
        call_sites=(CallSite(None, "", ()),),
        is_expression=False,
    )
    return files, RefactoringOp(
        RefactoringKind.ExtractMethod,
        ElementDescriptor(QualifiedName(pkg_t, (cls,), host, ("int",)), "method"),
        ElementDescriptor(QualifiedName(pkg_t, (cls,), fresh, ()), "method"),
        payload,
    )


def _fixture_pull_push(rng, names, kind: RefactoringKind, member: str):
    pkg = _base_pkg(rng, names)
    base_cls = names.pick(_CLASS_NAMES)
    derived_cls = names.pick(_CLASS_NAMES)
    up = kind in (RefactoringKind.PullUpMethod, RefactoringKind.PullUpField)
    src_cls, dst_cls = (derived_cls, base_cls) if up else (base_cls, derived_cls)
    pkg_t = tuple(pkg.split("."))

    base_members = [_method_src(names.pick(_METHOD_NAMES), [], _int_body(rng, None, None))]
    derived_members = [_method_src(names.pick(_METHOD_NAMES), [], _int_body(rng, None, None))]
    target_members = base_members if not up else derived_members

    if member == "method":
        name = names.pick(_METHOD_NAMES)
        p = rng.choice(_PARAM_NAMES)
        moved = _method_src(name, [("int", p)], _int_body(rng, p, None))
        target_members.append(moved)
        caller = _method_src(names.pick(_METHOD_NAMES), [],
                             [f"return {name}({rng.randrange(2, 20)});"])
        derived_members.append(caller)
        before = ElementDescriptor(QualifiedName(pkg_t, (src_cls,), name, ("int",)), "method")
        after = ElementDescriptor(QualifiedName(pkg_t, (dst_cls,), name, ("int",)), "method")
    else:
        name = names.pick(_FIELD_NAMES)
        target_members.insert(0, f"    protected int {name} = {rng.randrange(1, 40)};")
        user = _method_src(names.pick(_METHOD_NAMES), [],
                           [f"return {name} + {rng.randrange(1, 9)};"])
        derived_members.append(user)
        before = ElementDescriptor(QualifiedName(pkg_t, (src_cls,), name), "field")
        after = ElementDescriptor(QualifiedName(pkg_t, (dst_cls,), name), "field")

    files = {
        _pkg_path(pkg, base_cls): _class_src(pkg, base_cls, base_members),
        _pkg_path(pkg, derived_cls): _class_src(pkg, derived_cls, derived_members, extends=base_cls),
    }
    return files, RefactoringOp(kind, before, after)


def _fixture_rename_field(rng, names):
    pkg = _base_pkg(rng, names)
    cls = names.pick(_CLASS_NAMES)
    other = names.pick(_CLASS_NAMES)
    old = names.pick(_FIELD_NAMES)
    new = names.pick(_FIELD_NAMES)
    m1 = _method_src(names.pick(_METHOD_NAMES), [("int", "value")],
                     [f"this.{old} = this.{old} + value;", f"return this.{old};"])
    m2 = _method_src(names.pick(_METHOD_NAMES), [], [f"return {old} * {rng.randrange(2, 7)};"])
    files = {
        _pkg_path(pkg, cls): _class_src(
            pkg, cls, [f"    public static int {old} = {rng.randrange(1, 20)};", m1, m2]
        ),
        _pkg_path(pkg, other): _class_src(
            pkg, other,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {cls}.{old} + {rng.randrange(1, 9)};"])],
        ),
    }
    pkg_t = tuple(pkg.split("."))
    return files, RefactoringOp(
        RefactoringKind.RenameField,
        ElementDescriptor(QualifiedName(pkg_t, (cls,), old), "field"),
        ElementDescriptor(QualifiedName(pkg_t, (cls,), new), "field"),
    )


def _fixture_move_field(rng, names, rename: bool = False):
    pkg = _base_pkg(rng, names)
    src_cls = names.pick(_CLASS_NAMES)
    dst_cls = names.pick(_CLASS_NAMES)
    old = names.pick(_FIELD_NAMES)
    new = names.pick(_FIELD_NAMES) if rename else old
    files = {
        _pkg_path(pkg, src_cls): _class_src(
            pkg, src_cls, [f"    public static int {old} = {rng.randrange(1, 50)};",
                           _method_src(names.pick(_METHOD_NAMES), [], _int_body(rng, None, None))]
        ),
        _pkg_path(pkg, dst_cls): _class_src(
            pkg, dst_cls,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {src_cls}.{old} - {rng.randrange(1, 9)};"])],
        ),
    }
    pkg_t = tuple(pkg.split("."))
    kind = RefactoringKind.MoveAndRenameField if rename else RefactoringKind.MoveField
    return files, RefactoringOp(
        kind,
        ElementDescriptor(QualifiedName(pkg_t, (src_cls,), old), "field"),
        ElementDescriptor(QualifiedName(pkg_t, (dst_cls,), new), "field"),
    )


def _fixture_move_and_rename_field(rng, names):
    return _fixture_move_field(rng, names, rename=True)


def _fixture_rename_package(rng, names):
    word_old = names.pick(_PKG_WORDS)
    word_new = names.pick(_PKG_WORDS)
    old_pkg = f"app.{word_old}"
    new_pkg = f"app.{word_new}"
    outside_pkg = "app." + names.pick(_PKG_WORDS)
    c1 = names.pick(_CLASS_NAMES)
    c2 = names.pick(_CLASS_NAMES)
    out = names.pick(_CLASS_NAMES)
    mname = names.pick(_METHOD_NAMES)
    files = {
        _pkg_path(old_pkg, c1): _class_src(
            old_pkg, c1, [_method_src(mname, [("int", "value")], _int_body(rng, "value", None), static=True)]
        ),
        _pkg_path(old_pkg, c2): _class_src(
            old_pkg, c2,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {c1}.{mname}({rng.randrange(2, 20)});"])],
        ),
        _pkg_path(outside_pkg, out): _class_src(
            outside_pkg, out,
            [_method_src(names.pick(_METHOD_NAMES), [],
                         [f"return {c1}.{mname}({rng.randrange(2, 20)}) + 1;"])],
            imports=[f"{old_pkg}.{c1}"],
        ),
    }
    return files, RefactoringOp(
        RefactoringKind.RenamePackage,
        ElementDescriptor(QualifiedName(tuple(old_pkg.split("."))), "package"),
        ElementDescriptor(QualifiedName(tuple(new_pkg.split("."))), "package"),
    )


def _fixture_rename_parameter(rng, names):
    pkg = _base_pkg(rng, names)
    cls = names.pick(_CLASS_NAMES)
    mname = names.pick(_METHOD_NAMES)
    old_p = names.pick(_PARAM_NAMES)
    new_p = names.pick(_PARAM_NAMES)
    second = names.pick(_PARAM_NAMES)
    body = [f"int mixed = {old_p} * {rng.randrange(2, 8)} + {second};",
            f"return mixed - {old_p};"]
    files = {
        _pkg_path(pkg, cls): _class_src(
            pkg, cls, [_method_src(mname, [("int", old_p), ("int", second)], body)]
        ),
    }
    pkg_t = tuple(pkg.split("."))
    sig = ("int", "int")
    return files, RefactoringOp(
        RefactoringKind.RenameParameter,
        ElementDescriptor(QualifiedName(pkg_t, (cls,), mname, sig, old_p), "parameter"),
        ElementDescriptor(QualifiedName(pkg_t, (cls,), mname, sig, new_p), "parameter"),
        ParameterPayload(0),
    )


_FIXTURE_BUILDERS = {
    RefactoringKind.RenameMethod: _fixture_rename_method,
    RefactoringKind.MoveMethod: _fixture_move_method,
    RefactoringKind.MoveAndRenameMethod: _fixture_move_and_rename_method,
    RefactoringKind.RenameClass: _fixture_rename_class,
    RefactoringKind.MoveClass: _fixture_move_class,
    RefactoringKind.MoveAndRenameClass: _fixture_move_and_rename_class,
    RefactoringKind.InlineMethod: _fixture_inline_method,
    RefactoringKind.ExtractMethod: _fixture_extract_method,
    RefactoringKind.PullUpMethod: lambda r, n: _fixture_pull_push(r, n, RefactoringKind.PullUpMethod, "method"),
    RefactoringKind.PushDownMethod: lambda r, n: _fixture_pull_push(r, n, RefactoringKind.PushDownMethod, "method"),
    RefactoringKind.RenameField: _fixture_rename_field,
    RefactoringKind.MoveField: _fixture_move_field,
    RefactoringKind.MoveAndRenameField: _fixture_move_and_rename_field,
    RefactoringKind.PullUpField: lambda r, n: _fixture_pull_push(r, n, RefactoringKind.PullUpField, "field"),
    RefactoringKind.PushDownField: lambda r, n: _fixture_pull_push(r, n, RefactoringKind.PushDownField, "field"),
    RefactoringKind.RenamePackage: _fixture_rename_package,
    RefactoringKind.RenameParameter: _fixture_rename_parameter,
}


def random_op(kind: RefactoringKind, seed: int) -> RefactoringOp:
    """A structurally well-formed op with randomized names, for pure
    value-level checks (involution, serialization); not applicable to any
    tree."""
    return build_op_fixture(kind, seed).op


# ---------------------------------------------------------------------------
# Git-backed scenarios


class ScenarioRetry(Exception):
    pass


@dataclass
class SynthScenario:
    seed: int
    injected_ops: list[RefactoringOp]
    patch: Patch
    expected: dict
    source_path: str
    target_path: str
    base_commit: str
    source_commit: str
    target_head: str


def _anchor_line_for(op: RefactoringOp, model: ProjectModel) -> tuple[str, int] | None:
    """(file, 1-based line) in the base state that the refactoring rewrites."""
    key = op.before.name.render()
    if op.kind == RefactoringKind.RenameParameter:
        method = model.lookup(
            QualifiedName(
                op.before.name.package,
                op.before.name.types,
                op.before.name.member,
                op.before.name.signature,
            ).render()
        )
        if method is None:
            return None
        # middle of the body uses the parameter
        return method.span.file_path, method.span.start_line + 1
    if op.kind == RefactoringKind.RenamePackage:
        for path, pkg in model.packages.items():
            if pkg == op.before.name.package:
                el = next(iter(model.units.get(path, [])), None)
                if el is not None and el.members:
                    m = el.members[-1]
                    return path, m.span.start_line + 1
        return None
    refs = model.references.get(key, [])
    if op.kind in (RefactoringKind.InlineMethod, RefactoringKind.ExtractMethod):
        refs = [r for r in refs if r.kind == "call"]
    if refs:
        ref = refs[0]
        return ref.span.file_path, ref.span.start_line
    el = model.lookup(key)
    if el is not None:
        return el.span.file_path, el.span.start_line
    return None


def _bump_line(text: str, line_no: int) -> str:
    """A one-line bug-fix-style edit: bump a literal or tag the line."""
    lines = text.split("\n")
    idx = line_no - 1
    if idx >= len(lines):
        raise ScenarioRetry("anchor line out of range")
    line = lines[idx]
    out = []
    bumped = False
    for tok in tokenize(line):
        if not bumped and tok.kind == "number" and tok.text.isdigit():
            out.append((tok.start, tok.end, str(int(tok.text) + 1)))
            bumped = True
    if bumped:
        s, e, r = out[0]
        line = line[:s] + r + line[e:]
    else:
        line = line + " // adjusted"
    lines[idx] = line
    return "\n".join(lines)


def generate_scenario(
    seed: int, kinds: list[RefactoringKind], out_dir: str, max_retries: int = 8
) -> SynthScenario:
    """Two local git repositories realizing one integration scenario.

    The target branch carries the requested refactorings; the source
    branch carries a bug-fix commit touching the refactored regions. The
    recorded expectations come from the generator's own bookkeeping.
    """
    last: Exception | None = None
    for attempt in range(max_retries):
        try:
            return _generate_once(seed + attempt * 7919, seed, kinds, out_dir)
        except ScenarioRetry as exc:
            last = exc
            _clear_dir(out_dir)
    raise RuntimeError(f"scenario generation failed after {max_retries} attempts: {last}")


def _clear_dir(path: str) -> None:
    import shutil

    if os.path.isdir(path):
        shutil.rmtree(path)


def _generate_once(
    gen_seed: int, seed: int, kinds: list[RefactoringKind], out_dir: str
) -> SynthScenario:
    from . import vcs
    from .diffs import FileDiff, diff

    rng = random.Random(gen_seed)
    files: dict[str, str] = {}
    ops: list[RefactoringOp] = []
    for i, kind in enumerate(kinds):
        fx = build_op_fixture(kind, gen_seed * 31 + i)
        overlap = set(files) & set(fx.files)
        if overlap:
            raise ScenarioRetry(f"fixture path collision: {sorted(overlap)}")
        files.update(fx.files)
        ops.append(fx.op)
    if not kinds:
        pkg = "app.base"
        files[_pkg_path(pkg, "Anchor")] = _class_src(
            pkg, "Anchor",
            [_method_src("steady", [("int", "value")], _int_body(rng, "value", None))],
        )

    base_model = build_model(files)
    if base_model.partial:
        raise ScenarioRetry("base project failed to parse")

    # bug-fix edits on the source side, anchored in refactored regions
    patched = dict(files)
    touched: set[str] = set()
    for op in ops:
        anchor = _anchor_line_for(op, base_model)
        if anchor is None:
            raise ScenarioRetry(f"no anchor for {op}")
        path, line = anchor
        patched[path] = _bump_line(patched[path], line)
        touched.add(path)
    if not ops:
        path = sorted(files)[0]
        patched[path] = _bump_line(patched[path], 6)
        touched.add(path)
    if patched == files:
        raise ScenarioRetry("patch produced no textual change")

    # source repository: base commit + bug-fix commit
    source_dir = os.path.join(out_dir, "source")
    target_dir = os.path.join(out_dir, "target")
    source = vcs.init_repo(source_dir)
    _write_files(source_dir, files)
    base_commit = vcs.commit_all(source, "base project", date="2021-01-01T00:00:00 +0000")
    # fork the target before the fix lands
    target = vcs.clone(source_dir, target_dir)
    _write_files(source_dir, patched, clear=files)
    source_commit = vcs.commit_all(source, "fix: adjust computation", date="2021-02-01T00:00:00 +0000")

    # target evolves independently: the refactorings land there
    wt = Worktree(root=target_dir)
    for op in ops:
        try:
            apply_refactoring(wt, op)
        except Exception as exc:
            raise ScenarioRetry(f"{op} inapplicable: {exc}") from exc
    wt.flush()
    target_head = base_commit
    if ops:
        target_head = vcs.commit_all(target, "restructure internals", date="2021-03-01T00:00:00 +0000")
    target.head = target_head

    hunks_by_path = {}
    for path in sorted(touched):
        hs = diff(files.get(path, ""), patched.get(path, ""))
        if hs:
            hunks_by_path[path] = hs
    patch = Patch(
        [FileDiff(p, p, "modified", hs) for p, hs in sorted(hunks_by_path.items())]
    )

    expected = {
        "baseline_status": "conflicts" if ops else "clean",
        "repatch_status": "clean",
        "min_conflicting_files": 1 if ops else 0,
    }
    return SynthScenario(
        seed=seed,
        injected_ops=ops,
        patch=patch,
        expected=expected,
        source_path=source_dir,
        target_path=target_dir,
        base_commit=base_commit,
        source_commit=source_commit,
        target_head=target_head,
    )


def _write_files(root: str, files: dict[str, str], clear: dict[str, str] | None = None) -> None:
    if clear:
        for path in clear:
            full = os.path.join(root, path)
            if path not in files and os.path.exists(full):
                os.remove(full)
    for path, text in files.items():
        full = os.path.join(root, path)
        os.makedirs(os.path.dirname(full) or root, exist_ok=True)
        with open(full, "wb") as fh:
            fh.write(text.encode("utf-8"))
