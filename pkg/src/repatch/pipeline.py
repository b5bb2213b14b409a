"""Per-patch integration pipeline.

One call runs, under a deadline: the baseline cherry-pick; when it
conflicts, dual-sided detection anchored at the merge base; inversion of
the target-side operations on a fresh worktree and of the source-side
operations on the source parent and commit trees; reapplication of the
adjusted patch by three-way merge; replay of the target-side operations;
and failure classification. The baseline stage never touches the
detector or the transform engine, which the stage trace makes checkable.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .detect import DetectionConfig, DetectionResult, detect
from .errors import TimeoutExceeded
from .lexer import tokenize
from .merge import CherryPickOutcome, ConflictStats, count_conflicts, merge_trees
from .model import build_model
from .ops import ConflictMatrix, RefactoringOp, ReplayConflictReport, invert, op_from_json, op_to_json
from .cherry import apply_outcome, cherry_pick
from .transform import Worktree, apply_all
from .vcs import (
    RepoHandle,
    changed_files,
    cleanup_worktree,
    first_parent,
    materialize_worktree,
    merge_base,
    read_tree,
    run_git,
)

STATUS_CLEAN = "clean"
STATUS_CONFLICTS = "conflicts"
STATUS_TIMEOUT = "timeout"
STATUS_ERROR = "error"

CLASS_REFACTORING = "refactoring-related"
CLASS_OTHER = "other"
CLASS_NA = "not-applicable"


class Deadline:
    def __init__(self, seconds: float):
        self.start = time.monotonic()
        self.seconds = seconds

    def remaining(self) -> float:
        return self.seconds - (time.monotonic() - self.start)

    def check(self, stage: str) -> None:
        if self.remaining() <= 0:
            raise TimeoutExceeded(stage)


@dataclass
class PipelineConfig:
    timeout_seconds: float = 900.0
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    detection_range_mode: str = "endpoints"  # endpoints | per-commit
    source_remote_name: str = "source"
    report_path: str | None = None
    full_tree_detection: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.detection_range_mode not in ("endpoints", "per-commit"):
            raise ValueError("detection_range_mode must be 'endpoints' or 'per-commit'")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        det = DetectionConfig(**data.pop("detection", {}))
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(detection=det, **known)


@dataclass
class IntegrationReport:
    patch_id: str
    target: str = ""
    baseline_status: str = STATUS_ERROR
    baseline_stats: ConflictStats = field(default_factory=ConflictStats)
    repatch_status: str | None = None
    repatch_stats: ConflictStats | None = None
    delta_files: int | None = None
    delta_loc: int | None = None
    classification: str = CLASS_NA
    source_ops: dict[str, int] = field(default_factory=dict)
    target_ops: dict[str, int] = field(default_factory=dict)
    attributed_kinds: dict[str, int] = field(default_factory=dict)
    durations: dict[str, float] = field(default_factory=dict)
    stages: list[str] = field(default_factory=list)
    error: str | None = None
    replay_conflicts: int = 0

    @property
    def baseline_failed(self) -> bool:
        return self.baseline_status != STATUS_CLEAN

    @property
    def counts_as_failure(self) -> bool:
        """Conservative accounting: timeout and error count as failed."""
        if not self.baseline_failed:
            return False
        return self.repatch_status != STATUS_CLEAN

    def to_json(self) -> str:
        return json.dumps(
            {
                "patch_id": self.patch_id,
                "target": self.target,
                "baseline_status": self.baseline_status,
                "baseline_stats": self.baseline_stats.as_dict(),
                "repatch_status": self.repatch_status,
                "repatch_stats": self.repatch_stats.as_dict() if self.repatch_stats else None,
                "delta_files": self.delta_files,
                "delta_loc": self.delta_loc,
                "classification": self.classification,
                "source_ops": self.source_ops,
                "target_ops": self.target_ops,
                "attributed_kinds": self.attributed_kinds,
                "durations": self.durations,
                "stages": self.stages,
                "error": self.error,
                "replay_conflicts": self.replay_conflicts,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "IntegrationReport":
        d = json.loads(line)
        rep = cls(patch_id=d["patch_id"], target=d.get("target", ""))
        rep.baseline_status = d["baseline_status"]
        rep.baseline_stats = ConflictStats(**_stats_args(d["baseline_stats"]))
        rep.repatch_status = d.get("repatch_status")
        rs = d.get("repatch_stats")
        rep.repatch_stats = ConflictStats(**_stats_args(rs)) if rs else None
        rep.delta_files = d.get("delta_files")
        rep.delta_loc = d.get("delta_loc")
        rep.classification = d.get("classification", CLASS_NA)
        rep.source_ops = d.get("source_ops", {})
        rep.target_ops = d.get("target_ops", {})
        rep.attributed_kinds = d.get("attributed_kinds", {})
        rep.durations = d.get("durations", {})
        rep.stages = d.get("stages", [])
        rep.error = d.get("error")
        rep.replay_conflicts = d.get("replay_conflicts", 0)
        return rep


def _stats_args(d: dict) -> dict:
    return {
        "conflicting_files": d["conflicting_files"],
        "conflicting_loc": d["conflicting_loc"],
        "per_file": d.get("per_file", {}),
    }


# ---------------------------------------------------------------------------


def compute_scope(
    patch_paths: list[str], trees: list[dict[str, str]]
) -> set[str]:
    """Patch files plus files one reference hop away.

    The hop is a textual prefilter: any file mentioning a type declared in
    a patch file is pulled into scope.
    """
    scope = {p for p in patch_paths if p.endswith(".java")}
    type_names: set[str] = set()
    for tree in trees:
        sub = {p: t for p, t in tree.items() if p in scope}
        model = build_model(sub)
        for el in model.elements("class", "interface", "enum"):
            type_names.add(el.name.simple)
    if not type_names:
        return scope
    for tree in trees:
        for path, text in tree.items():
            if not path.endswith(".java") or path in scope:
                continue
            if any(name in text for name in type_names):
                scope.add(path)
    return scope


def _detect_ops(
    repo: RepoHandle,
    base_commit: str,
    end_commit: str,
    cfg: PipelineConfig,
    scope: set[str] | None,
    deadline: Deadline,
) -> DetectionResult:
    det_cfg = DetectionConfig(
        body_similarity_threshold=cfg.detection.body_similarity_threshold,
        min_body_tokens=cfg.detection.min_body_tokens,
        file_scope=None if cfg.full_tree_detection else scope,
    )
    if cfg.detection_range_mode == "per-commit":
        revs = run_git(
            repo.path, "rev-list", "--first-parent", "--reverse",
            f"{base_commit}..{end_commit}", timeout=max(deadline.remaining(), 0.001),
        ).stdout.split()
        chain = [base_commit] + revs
        merged = DetectionResult()
        for lo, hi in zip(chain, chain[1:]):
            deadline.check("detect")
            res = _detect_endpoints(repo, lo, hi, det_cfg, deadline)
            merged = _fold_results(merged, res)
        return merged
    return _detect_endpoints(repo, base_commit, end_commit, det_cfg, deadline)


def _detect_endpoints(repo, lo, hi, det_cfg, deadline) -> DetectionResult:
    t = max(deadline.remaining(), 0.001)
    tree_lo = _java_tree(read_tree(repo, lo, timeout=t))
    tree_hi = _java_tree(read_tree(repo, hi, timeout=t))
    return detect(build_model(tree_lo), build_model(tree_hi), det_cfg)


def _java_tree(tree: dict[str, str]) -> dict[str, str]:
    return {p: t for p, t in tree.items() if p.endswith(".java")}


def _fold_results(acc: DetectionResult, new: DetectionResult) -> DetectionResult:
    """Chain per-commit results: a->b then b->c folds into a->c."""
    out = DetectionResult(ops=list(acc.ops))
    for op in new.ops:
        folded = False
        for i, prior in enumerate(out.ops):
            if (
                prior.after.rendered == op.before.rendered
                and prior.after.kind == op.before.kind
            ):
                out.ops[i] = RefactoringOp(op.kind, prior.before, op.after, op.payload)
                folded = True
                break
        if not folded:
            out.ops.append(op)
    out.unmatched_removed = acc.unmatched_removed + new.unmatched_removed
    out.unmatched_added = acc.unmatched_added + new.unmatched_added
    return out


def classify_failure(baseline: CherryPickOutcome, ops: list[RefactoringOp]) -> str:
    """Label a failed cherry-pick as refactoring-related or other.

    Refactoring-related when a conflict region overlaps a refactored
    element's recorded span, or when the region's text mentions an
    identifier equal to a before/after simple name of some operation.
    """
    if not ops:
        return CLASS_OTHER
    names = set()
    for op in ops:
        names.add(op.before.name.simple)
        names.add(op.after.name.simple)
    spans = [
        d.span
        for op in ops
        for d in (op.before, op.after)
        if d.span is not None
    ]
    for path, fm in baseline.files.items():
        regions = fm.merged.conflicts if fm.merged is not None else []
        if fm.collision is not None and fm.collision_lines:
            # treat the whole file as the conflicting region
            for span in spans:
                if span.file_path == path:
                    return CLASS_REFACTORING
        for region in regions:
            for span in spans:
                if span.file_path != path:
                    continue
                lo = region.base_start
                hi = lo + max(len(region.base), 1)
                if span.start_line <= hi and lo <= span.end_line:
                    return CLASS_REFACTORING
            text = "".join(region.ours + region.theirs + region.base)
            idents = {t.text for t in tokenize(text) if t.kind == "ident"}
            if idents & names:
                return CLASS_REFACTORING
    return CLASS_OTHER


def attribute_kinds(baseline: CherryPickOutcome, ops: list[RefactoringOp]) -> dict[str, int]:
    """Per-kind counts of operations implicated in the baseline conflicts."""
    out: dict[str, int] = {}
    for op in ops:
        names = {op.before.name.simple, op.after.name.simple}
        hit = False
        for path, fm in baseline.files.items():
            regions = fm.merged.conflicts if fm.merged is not None else []
            for region in regions:
                text = "".join(region.ours + region.theirs + region.base)
                idents = {t.text for t in tokenize(text) if t.kind == "ident"}
                if idents & names:
                    hit = True
                    break
            if not hit and fm.collision is not None:
                for d in (op.before, op.after):
                    if d.span is not None and d.span.file_path == path:
                        hit = True
                        break
            if hit:
                break
        if hit:
            out[op.kind.value] = out.get(op.kind.value, 0) + 1
    return out


def integrate(target: RepoHandle, source_commit: str, cfg: PipelineConfig | None = None) -> IntegrationReport:
    """Run the full flow for one patch; never raises, worktrees cleaned up."""
    cfg = cfg or PipelineConfig()
    deadline = Deadline(cfg.timeout_seconds)
    report = IntegrationReport(patch_id=source_commit, target=target.path)
    worktrees: list[Worktree] = []
    stage = "setup"

    def timed(name):
        report.stages.append(name)
        report.durations[name] = time.monotonic()
        return name

    def done(name):
        report.durations[name] = time.monotonic() - report.durations[name]

    try:
        target_head = target.head
        stage = timed("baseline")
        wt = materialize_worktree(target, target_head)
        worktrees.append(wt)
        baseline = cherry_pick(target, source_commit, wt, timeout=max(deadline.remaining(), 0.001))
        report.baseline_stats = count_conflicts(baseline)
        report.baseline_status = STATUS_CLEAN if baseline.clean else STATUS_CONFLICTS
        done("baseline")
        if baseline.clean:
            report.classification = CLASS_NA
            return report
        deadline.check("baseline")

        stage = timed("detect")
        parent = first_parent(target, source_commit)
        base = merge_base(target, source_commit, target_head)
        patch_paths = [p for _, p in changed_files(target, parent, source_commit)]
        t = max(deadline.remaining(), 0.001)
        trees = {
            "base": read_tree(target, base, timeout=t),
            "head": read_tree(target, target_head, timeout=t),
            "parent": read_tree(target, parent, timeout=t),
            "commit": read_tree(target, source_commit, timeout=t),
        }
        scope = compute_scope(patch_paths, [trees["base"], trees["head"], trees["parent"]])
        target_side = _detect_ops(target, base, target_head, cfg, scope, deadline)
        source_side = _detect_ops(target, base, parent, cfg, scope, deadline)
        report.target_ops = target_side.counts_by_kind()
        report.source_ops = source_side.counts_by_kind()
        done("detect")
        deadline.check("detect")

        stage = timed("invert")
        inverted_wt = materialize_worktree(target, target_head)
        worktrees.append(inverted_wt)
        matrix = ConflictMatrix.default()
        inv_t = [invert(op) for op in target_side.ops]
        inv_result = apply_all(inverted_wt, inv_t, matrix)
        if isinstance(inv_result, ReplayConflictReport):
            report.repatch_status = STATUS_ERROR
            report.error = f"invert: {len(inv_result.conflicts)} conflicting operation pairs"
            report.classification = classify_failure(baseline, target_side.ops + source_side.ops)
            return report
        adj_parent = _apply_lenient(_java_merge_tree(trees["parent"]), source_side.ops)
        adj_commit = _apply_lenient(_java_merge_tree(trees["commit"]), source_side.ops)
        done("invert")
        deadline.check("invert")

        stage = timed("reapply")
        adj_paths = sorted(
            p for p in set(adj_parent) | set(adj_commit) if adj_parent.get(p) != adj_commit.get(p)
        )
        # non-java patch files keep their original change
        for p in patch_paths:
            if not p.endswith(".java") and p not in adj_paths:
                adj_paths.append(p)
                if p in trees["parent"]:
                    adj_parent[p] = trees["parent"][p]
                if p in trees["commit"]:
                    adj_commit[p] = trees["commit"][p]
        ours_tree = {p: inverted_wt.read(p) for p in adj_paths if inverted_wt.exists(p)}
        reapply = merge_trees(adj_parent, ours_tree, adj_commit, adj_paths)
        apply_outcome(reapply, inverted_wt)
        report.repatch_stats = count_conflicts(reapply)
        report.repatch_status = STATUS_CLEAN if reapply.clean else STATUS_CONFLICTS
        done("reapply")
        deadline.check("reapply")

        if reapply.clean and target_side.ops:
            stage = timed("replay")
            replay = apply_all(inverted_wt, list(target_side.ops), matrix)
            if isinstance(replay, ReplayConflictReport):
                report.repatch_status = STATUS_CONFLICTS
                report.replay_conflicts = len(replay.conflicts)
            done("replay")

        stage = "classify"
        all_ops = source_side.ops + target_side.ops
        report.classification = classify_failure(baseline, all_ops)
        report.attributed_kinds = attribute_kinds(baseline, all_ops)
        report.delta_files = (
            report.repatch_stats.conflicting_files - report.baseline_stats.conflicting_files
        )
        report.delta_loc = (
            report.repatch_stats.conflicting_loc - report.baseline_stats.conflicting_loc
        )
        return report
    except TimeoutExceeded as exc:
        report.repatch_status = STATUS_TIMEOUT
        report.error = f"timeout at stage {exc}"
        if report.baseline_status == STATUS_ERROR:
            report.baseline_status = STATUS_TIMEOUT
        return report
    except Exception as exc:  # noqa: BLE001 - reported, not raised
        if report.baseline_status == STATUS_CLEAN:
            return report
        report.repatch_status = STATUS_ERROR
        report.error = f"{stage}: {type(exc).__name__}: {exc}"
        return report
    finally:
        for wt in worktrees:
            cleanup_worktree(wt)


def _java_merge_tree(tree: dict[str, str]) -> dict[str, str]:
    return {p: t for p, t in tree.items() if p.endswith(".java")}


def _apply_lenient(tree: dict[str, str], source_ops: list[RefactoringOp]) -> dict[str, str]:
    """Invert source-side ops onto a tree, skipping inapplicable ones.

    The commit tree may already lack an op's element (the patch touched
    it); a best-effort inversion is what keeps the adjusted diff clean.
    """
    w = Worktree(files=dict(tree))
    from .transform import apply_refactoring

    for op in source_ops:
        snap = w.snapshot()
        try:
            apply_refactoring(w, invert(op))
        except Exception:
            w.restore(snap)
    return w.files()
