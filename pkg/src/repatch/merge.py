"""Three-way line merge, cherry-pick outcomes, and conflict statistics.

The merge aligns ours and theirs against their common base: regions where
both sides match the base ("sync regions") are kept; in between, a change
on one side wins, identical changes collapse to one, and differing changes
become a :class:`ConflictRegion`. Rendering emits git-style markers with
fixed ``ours`` / ``theirs`` labels.

Conflicting LOC is defined as the number of content lines inside conflict
regions on both sides (ours + theirs), excluding marker lines and base
lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .diffs import matching_blocks, split_lines

OURS_MARK = "<<<<<<< ours\n"
MID_MARK = "=======\n"
THEIRS_MARK = ">>>>>>> theirs\n"


@dataclass
class ConflictRegion:
    ours: list[str]
    theirs: list[str]
    base: list[str]
    base_start: int = 0  # 1-based base line where the region anchors

    @property
    def loc(self) -> int:
        return len(self.ours) + len(self.theirs)


@dataclass
class MergedFile:
    segments: list  # str (resolved text) or ConflictRegion, in document order

    @property
    def conflicts(self) -> list[ConflictRegion]:
        return [s for s in self.segments if isinstance(s, ConflictRegion)]

    @property
    def is_clean(self) -> bool:
        return not self.conflicts

    def render(self) -> str:
        """Merged text with conflict markers where regions remain."""
        parts: list[str] = []
        for seg in self.segments:
            if isinstance(seg, ConflictRegion):
                parts.append(OURS_MARK)
                parts.extend(_terminated(seg.ours))
                parts.append(MID_MARK)
                parts.extend(_terminated(seg.theirs))
                parts.append(THEIRS_MARK)
            else:
                parts.append(seg)
        return "".join(parts)

    def resolved_text(self) -> str | None:
        """The merged text when clean, else None."""
        if not self.is_clean:
            return None
        return "".join(self.segments)


def _terminated(lines: list[str]) -> list[str]:
    # marker lines always end with a newline; force the same on content so
    # rendered conflicts stay line-structured even at EOF
    return [ln if ln.endswith("\n") else ln + "\n" for ln in lines]


def _intersect(ra: tuple[int, int], rb: tuple[int, int]) -> tuple[int, int] | None:
    sa = max(ra[0], rb[0])
    sb = min(ra[1], rb[1])
    return (sa, sb) if sa < sb else None


def _sync_regions(base: list[str], a: list[str], b: list[str]):
    """Regions (zs, ze, as_, ae, bs, be) where both sides match the base.

    Always ends with a zero-length sentinel at the three ends.
    """
    am = matching_blocks(base, a)
    bm = matching_blocks(base, b)
    regions = []
    ia = ib = 0
    while ia < len(am) and ib < len(bm):
        abase, amatch, alen = am[ia]
        bbase, bmatch, blen = bm[ib]
        overlap = _intersect((abase, abase + alen), (bbase, bbase + blen))
        if overlap:
            zs, ze = overlap
            regions.append(
                (zs, ze, amatch + (zs - abase), amatch + (ze - abase), bmatch + (zs - bbase), bmatch + (ze - bbase))
            )
        if abase + alen < bbase + blen:
            ia += 1
        else:
            ib += 1
    regions.append((len(base), len(base), len(a), len(a), len(b), len(b)))
    return regions


def three_way_merge(base: str, ours: str, theirs: str) -> MergedFile:
    """Merge two descendants of ``base`` line-by-line.

    Non-overlapping changes resolve automatically; identical changes on
    both sides collapse to one; overlapping differing changes become
    conflict regions.
    """
    zb = split_lines(base)
    a = split_lines(ours)
    b = split_lines(theirs)

    segments: list = []
    text_buf: list[str] = []

    def flush():
        if text_buf:
            segments.append("".join(text_buf))
            text_buf.clear()

    iz = ia = ib = 0
    for zs, ze, as_, ae, bs, be in _sync_regions(zb, a, b):
        a_gap = a[ia:as_]
        b_gap = b[ib:bs]
        z_gap = zb[iz:zs]
        if a_gap or b_gap or z_gap:
            if a_gap == b_gap:
                text_buf.extend(a_gap)
            elif a_gap == z_gap:
                text_buf.extend(b_gap)
            elif b_gap == z_gap:
                text_buf.extend(a_gap)
            else:
                flush()
                segments.append(ConflictRegion(a_gap, b_gap, z_gap, base_start=iz + 1))
        text_buf.extend(zb[zs:ze])
        iz, ia, ib = ze, ae, be
    flush()
    return MergedFile(segments)


# ---------------------------------------------------------------------------
# Cherry-pick outcomes


@dataclass
class FileMerge:
    path: str
    merged: MergedFile | None  # None for non-textual outcomes below
    collision: str | None = None  # delete-modify | modify-delete | add-add
    collision_lines: int = 0


@dataclass
class CherryPickOutcome:
    files: dict[str, FileMerge] = field(default_factory=dict)
    changed_paths: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return all(
            fm.collision is None and (fm.merged is None or fm.merged.is_clean)
            for fm in self.files.values()
        )


@dataclass
class ConflictStats:
    conflicting_files: int = 0
    conflicting_loc: int = 0
    per_file: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "conflicting_files": self.conflicting_files,
            "conflicting_loc": self.conflicting_loc,
            "per_file": dict(self.per_file),
        }


def count_conflicts(outcome: CherryPickOutcome) -> ConflictStats:
    """File and line conflict counts for a cherry-pick or reapply outcome."""
    per_file: dict[str, int] = {}
    for path, fm in outcome.files.items():
        loc = 0
        if fm.merged is not None:
            loc += sum(region.loc for region in fm.merged.conflicts)
        if fm.collision is not None:
            loc += fm.collision_lines
        if loc:
            per_file[path] = loc
    return ConflictStats(
        conflicting_files=len(per_file),
        conflicting_loc=sum(per_file.values()),
        per_file=per_file,
    )


def merge_trees(
    base: dict[str, str],
    ours: dict[str, str],
    theirs: dict[str, str],
    paths: list[str] | None = None,
) -> CherryPickOutcome:
    """Three-way merge of file trees restricted to paths changed base->theirs.

    ``ours`` is the receiving side; additions, deletions and edits on the
    theirs side are folded in. Delete/modify and add/add collisions are
    reported as conflicts on the affected path.
    """
    if paths is None:
        paths = sorted(set(base) | set(theirs))
        paths = [p for p in paths if base.get(p) != theirs.get(p)]

    outcome = CherryPickOutcome(changed_paths=list(paths))
    for path in paths:
        in_base = path in base
        in_ours = path in ours
        in_theirs = path in theirs
        if not in_theirs and in_base:
            # deleted by the patch
            if not in_ours:
                continue  # both deleted: nothing to do
            if ours[path] == base[path]:
                outcome.files[path] = FileMerge(path, None)  # clean delete
                continue
            lines = len(split_lines(ours[path]))
            outcome.files[path] = FileMerge(path, None, collision="modify-delete", collision_lines=lines)
            continue
        if in_theirs and not in_base:
            # added by the patch
            if not in_ours:
                merged = MergedFile([theirs[path]] if theirs[path] else [])
                outcome.files[path] = FileMerge(path, merged)
                continue
            if ours[path] == theirs[path]:
                continue
            merged = three_way_merge("", ours[path], theirs[path])
            fm = FileMerge(path, merged)
            if not merged.is_clean:
                fm.collision = "add-add"
            outcome.files[path] = fm
            continue
        if not in_ours:
            if in_base and base[path] == theirs.get(path, base[path]):
                continue  # we deleted it, patch left it alone
            lines = len(split_lines(theirs[path])) if in_theirs else 0
            outcome.files[path] = FileMerge(path, None, collision="delete-modify", collision_lines=lines)
            continue
        merged = three_way_merge(base.get(path, ""), ours[path], theirs[path])
        outcome.files[path] = FileMerge(path, merged)
    return outcome
