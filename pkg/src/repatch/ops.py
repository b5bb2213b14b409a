"""Refactoring operations: the 17-kind catalog, inversion, and replay rules.

An operation maps a *before* element descriptor to an *after* descriptor.
Descriptors are qualified names plus kind and an optional span; spans are
hints (the transform engine relocates elements through the live model), so
two operations compare equal when their kinds, names, and payloads agree.

Inversion is a total involution: renames and moves swap descriptors,
extract and inline swap into each other carrying the same payload, pull-up
and push-down swap directions.

Replay constraints are a total 17x17 table mapping a kind pair to a rule:
``commute`` or an element-check predicate drawn from a registry. The
predicates implement the minimal sound rule set: operations on the same
element with different results conflict, two operations producing the same
name conflict, an operation renaming or moving a container replays before
operations on its members, an operation vacating a name replays before the
operation that claims it, and extract/inline pairs conflict when their
recorded spans overlap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import CycleError
from .model import QualifiedName, SourceSpan


class RefactoringKind(Enum):
    RenameMethod = "RenameMethod"
    MoveMethod = "MoveMethod"
    MoveAndRenameMethod = "MoveAndRenameMethod"
    RenameClass = "RenameClass"
    MoveClass = "MoveClass"
    MoveAndRenameClass = "MoveAndRenameClass"
    InlineMethod = "InlineMethod"
    ExtractMethod = "ExtractMethod"
    PullUpMethod = "PullUpMethod"
    PushDownMethod = "PushDownMethod"
    RenameField = "RenameField"
    MoveField = "MoveField"
    MoveAndRenameField = "MoveAndRenameField"
    PullUpField = "PullUpField"
    PushDownField = "PushDownField"
    RenamePackage = "RenamePackage"
    RenameParameter = "RenameParameter"


ALL_KINDS = tuple(RefactoringKind)

METHOD_KINDS = frozenset(
    {
        RefactoringKind.RenameMethod,
        RefactoringKind.MoveMethod,
        RefactoringKind.MoveAndRenameMethod,
        RefactoringKind.PullUpMethod,
        RefactoringKind.PushDownMethod,
    }
)
FIELD_KINDS = frozenset(
    {
        RefactoringKind.RenameField,
        RefactoringKind.MoveField,
        RefactoringKind.MoveAndRenameField,
        RefactoringKind.PullUpField,
        RefactoringKind.PushDownField,
    }
)
CLASS_KINDS = frozenset(
    {
        RefactoringKind.RenameClass,
        RefactoringKind.MoveClass,
        RefactoringKind.MoveAndRenameClass,
    }
)

_INVERSE_KIND = {
    RefactoringKind.ExtractMethod: RefactoringKind.InlineMethod,
    RefactoringKind.InlineMethod: RefactoringKind.ExtractMethod,
    RefactoringKind.PullUpMethod: RefactoringKind.PushDownMethod,
    RefactoringKind.PushDownMethod: RefactoringKind.PullUpMethod,
    RefactoringKind.PullUpField: RefactoringKind.PushDownField,
    RefactoringKind.PushDownField: RefactoringKind.PullUpField,
}


@dataclass(frozen=True)
class ElementDescriptor:
    name: QualifiedName
    kind: str  # CodeElement kind string
    span: SourceSpan | None = None

    @property
    def rendered(self) -> str:
        return self.name.render()


@dataclass(frozen=True)
class CallSite:
    span: SourceSpan | None  # identifier token span in the calls-present state
    qualifier: str  # receiver text including the trailing dot, may be ""
    args: tuple[str, ...]  # actual argument texts, in order


@dataclass(frozen=True)
class ExtractInlinePayload:
    """Shared payload of ExtractMethod and InlineMethod.

    ``decl_text`` is the full method declaration; ``body_text`` the
    expression (single-return callee) or statement block that substitutes
    at call sites; ``body_span`` the extracted region in the caller for
    the extract direction.
    """

    decl_text: str
    body_text: str
    param_names: tuple[str, ...] = ()
    call_sites: tuple[CallSite, ...] = ()
    body_span: SourceSpan | None = None
    is_expression: bool = True


@dataclass(frozen=True)
class ParameterPayload:
    index: int


Payload = ExtractInlinePayload | ParameterPayload | None


@dataclass(frozen=True)
class RefactoringOp:
    kind: RefactoringKind
    before: ElementDescriptor
    after: ElementDescriptor
    payload: Payload = None

    def __str__(self) -> str:
        return f"{self.kind.value}({self.before.rendered} -> {self.after.rendered})"


def invert(op: RefactoringOp) -> RefactoringOp:
    """The exact reverse transformation; total on well-formed ops."""
    kind = _INVERSE_KIND.get(op.kind, op.kind)
    return RefactoringOp(kind=kind, before=op.after, after=op.before, payload=op.payload)


# ---------------------------------------------------------------------------
# JSON-lines serialization (stable wire contract: {kind, before, after, payload})


def _span_to_json(span: SourceSpan | None):
    if span is None:
        return None
    return {
        "file": span.file_path,
        "lines": [span.start_line, span.end_line],
        "bytes": [span.start_byte, span.end_byte],
    }


def _span_from_json(data) -> SourceSpan | None:
    if data is None:
        return None
    return SourceSpan(data["file"], data["lines"][0], data["lines"][1], data["bytes"][0], data["bytes"][1])


def _name_to_json(name: QualifiedName):
    out = {"package": list(name.package), "types": list(name.types)}
    if name.member is not None:
        out["member"] = name.member
    if name.signature is not None:
        out["signature"] = list(name.signature)
    if name.param is not None:
        out["param"] = name.param
    return out


def _name_from_json(data) -> QualifiedName:
    return QualifiedName(
        tuple(data.get("package", [])),
        tuple(data.get("types", [])),
        data.get("member"),
        tuple(data["signature"]) if "signature" in data else None,
        data.get("param"),
    )


def _descriptor_to_json(d: ElementDescriptor):
    return {"name": _name_to_json(d.name), "kind": d.kind, "span": _span_to_json(d.span)}


def _descriptor_from_json(data) -> ElementDescriptor:
    return ElementDescriptor(_name_from_json(data["name"]), data["kind"], _span_from_json(data.get("span")))


def op_to_json(op: RefactoringOp) -> str:
    payload = None
    if isinstance(op.payload, ParameterPayload):
        payload = {"type": "parameter", "index": op.payload.index}
    elif isinstance(op.payload, ExtractInlinePayload):
        payload = {
            "type": "extract-inline",
            "decl_text": op.payload.decl_text,
            "body_text": op.payload.body_text,
            "param_names": list(op.payload.param_names),
            "call_sites": [
                {"span": _span_to_json(cs.span), "qualifier": cs.qualifier, "args": list(cs.args)}
                for cs in op.payload.call_sites
            ],
            "body_span": _span_to_json(op.payload.body_span),
            "is_expression": op.payload.is_expression,
        }
    record = {
        "kind": op.kind.value,
        "before": _descriptor_to_json(op.before),
        "after": _descriptor_to_json(op.after),
        "payload": payload,
    }
    return json.dumps(record, sort_keys=True)


def op_from_json(line: str) -> RefactoringOp:
    data = json.loads(line)
    payload: Payload = None
    pd = data.get("payload")
    if pd is not None:
        if pd["type"] == "parameter":
            payload = ParameterPayload(pd["index"])
        else:
            payload = ExtractInlinePayload(
                decl_text=pd["decl_text"],
                body_text=pd["body_text"],
                param_names=tuple(pd.get("param_names", [])),
                call_sites=tuple(
                    CallSite(_span_from_json(cs.get("span")), cs["qualifier"], tuple(cs["args"]))
                    for cs in pd.get("call_sites", [])
                ),
                body_span=_span_from_json(pd.get("body_span")),
                is_expression=pd.get("is_expression", True),
            )
    return RefactoringOp(
        RefactoringKind(data["kind"]),
        _descriptor_from_json(data["before"]),
        _descriptor_from_json(data["after"]),
        payload,
    )


# ---------------------------------------------------------------------------
# Conflict matrix and replay ordering


@dataclass(frozen=True)
class Commute:
    pass


@dataclass(frozen=True)
class MustOrder:
    first: RefactoringOp
    second: RefactoringOp


@dataclass(frozen=True)
class Conflict:
    reason: str


PairVerdict = Commute | MustOrder | Conflict


def _contains(container: QualifiedName, member: QualifiedName) -> bool:
    """Is ``member`` declared inside the scope named by ``container``?"""
    c, m = container, member
    if c.render() == m.render():
        return False
    if c.member is not None:
        # a method contains its parameters
        return m.param is not None and replace(m, param=None).render() == c.render()
    if c.types:
        prefix = (c.package and ".".join(c.package) + "." or "") + ".".join(c.types) + "."
        rendered = m.render()
        return rendered.startswith(prefix) or (
            m.member is not None and replace(m, member=None, signature=None, param=None).render() == c.render()
        )
    # package containment
    return len(m.package) >= len(c.package) and m.package[: len(c.package)] == c.package and bool(
        c.package
    )


def _check_same_element(a: RefactoringOp, b: RefactoringOp) -> PairVerdict | None:
    if a.before.rendered == b.before.rendered and a.before.kind == b.before.kind:
        if a.after.rendered != b.after.rendered or a.kind != b.kind:
            return Conflict(
                f"{a.before.rendered} is transformed two incompatible ways "
                f"({a.kind.value} vs {b.kind.value})"
            )
        return Commute()  # literally the same transformation
    if a.after.rendered == b.after.rendered and a.before.rendered != b.before.rendered:
        if a.after.kind == b.after.kind:
            return Conflict(f"both operations produce {a.after.rendered}")
    return None


def _check_name_chain(a: RefactoringOp, b: RefactoringOp) -> PairVerdict | None:
    # b vacates a name that a claims: b must replay first
    if a.after.rendered == b.before.rendered and a.after.kind == b.before.kind:
        if b.after.rendered == a.before.rendered and b.after.kind == a.before.kind:
            return Conflict(
                f"{a.before.rendered} and {b.before.rendered} swap names; replay order is circular"
            )
        return MustOrder(first=b, second=a)
    if b.after.rendered == a.before.rendered and b.after.kind == a.before.kind:
        return MustOrder(first=a, second=b)
    return None


def _check_container(a: RefactoringOp, b: RefactoringOp) -> PairVerdict | None:
    a_contains_b = _contains(a.before.name, b.before.name) or _contains(a.before.name, b.after.name)
    b_contains_a = _contains(b.before.name, a.before.name) or _contains(b.before.name, a.after.name)
    if a_contains_b and b_contains_a:
        return Conflict(
            f"{a.before.rendered} and {b.before.rendered} mutually contain each other's targets"
        )
    if a_contains_b:
        return MustOrder(first=a, second=b)
    if b_contains_a:
        return MustOrder(first=b, second=a)
    return None


def _check_span_overlap(a: RefactoringOp, b: RefactoringOp) -> PairVerdict | None:
    spans_a = _op_spans(a)
    spans_b = _op_spans(b)
    for sa in spans_a:
        for sb in spans_b:
            if sa.intersects(sb):
                return Conflict(f"{a} and {b} edit overlapping regions")
    return None


def _op_spans(op: RefactoringOp) -> list[SourceSpan]:
    spans = []
    if isinstance(op.payload, ExtractInlinePayload):
        if op.payload.body_span is not None:
            spans.append(op.payload.body_span)
        spans.extend(cs.span for cs in op.payload.call_sites if cs.span is not None)
    return spans


def _composite(*checks):
    def rule(a: RefactoringOp, b: RefactoringOp) -> PairVerdict:
        for check in checks:
            verdict = check(a, b)
            if verdict is not None:
                return verdict
        return Commute()

    return rule


PREDICATES = {
    "commute": _composite(),
    "element-check": _composite(_check_same_element, _check_name_chain, _check_container),
    "element-and-span-check": _composite(
        _check_same_element, _check_name_chain, _check_container, _check_span_overlap
    ),
}

_EXTRACTIVE = frozenset({RefactoringKind.ExtractMethod, RefactoringKind.InlineMethod})


@dataclass
class ConflictMatrix:
    """Total verdict table over kind pairs plus the predicate registry."""

    table: dict[tuple[RefactoringKind, RefactoringKind], str] = field(default_factory=dict)
    predicates: dict[str, object] = field(default_factory=lambda: dict(PREDICATES))

    @classmethod
    def default(cls) -> "ConflictMatrix":
        m = cls()
        for a in ALL_KINDS:
            for b in ALL_KINDS:
                if a in _EXTRACTIVE or b in _EXTRACTIVE:
                    m.table[(a, b)] = "element-and-span-check"
                else:
                    m.table[(a, b)] = "element-check"
        return m

    def rule_for(self, a: RefactoringKind, b: RefactoringKind):
        return self.predicates[self.table[(a, b)]]


def check_pair(a: RefactoringOp, b: RefactoringOp, matrix: ConflictMatrix | None = None) -> PairVerdict:
    """Pairwise replay verdict; symmetric in conflicts and ordering."""
    matrix = matrix or ConflictMatrix.default()
    return matrix.rule_for(a.kind, b.kind)(a, b)


@dataclass
class ReplayConflictReport:
    conflicts: list[tuple[RefactoringOp, RefactoringOp, str]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.conflicts)


def replay_order(
    ops: list[RefactoringOp], matrix: ConflictMatrix | None = None
) -> list[RefactoringOp] | ReplayConflictReport:
    """Topological replay order satisfying every MustOrder verdict.

    Stable with respect to input order among unconstrained operations.
    Returns a :class:`ReplayConflictReport` when any pair conflicts, and
    raises :class:`CycleError` when ordering constraints are circular.
    """
    matrix = matrix or ConflictMatrix.default()
    report = ReplayConflictReport()
    n = len(ops)
    after: dict[int, set[int]] = {i: set() for i in range(n)}  # i -> must come after these
    for i in range(n):
        for j in range(i + 1, n):
            verdict = check_pair(ops[i], ops[j], matrix)
            if isinstance(verdict, Conflict):
                report.conflicts.append((ops[i], ops[j], verdict.reason))
            elif isinstance(verdict, MustOrder):
                first = i if verdict.first is ops[i] else j
                second = j if first == i else i
                after[second].add(first)
    if report:
        return report

    ordered: list[RefactoringOp] = []
    done: set[int] = set()
    while len(done) < n:
        progressed = False
        for i in range(n):
            if i in done:
                continue
            if after[i] <= done:
                ordered.append(ops[i])
                done.add(i)
                progressed = True
        if not progressed:
            cycle = [ops[i] for i in range(n) if i not in done]
            raise CycleError(
                "replay constraints form a cycle: " + ", ".join(str(op) for op in cycle),
                cycle,
            )
    return ordered
