"""Line diffs and unified-diff interchange.

The diff core is a Myers shortest-edit-script search with the linear-space
middle-snake refinement, so pathological inputs (two large, completely
unrelated files) stay in O(N+M) memory. Edit runs are then slid to line up
with unique lines, which keeps hunks stable across small edits and makes
three-way merges localize better.

Hunk line texts keep their trailing newline byte when the source line had
one; a line without it can only be the final line of its side, and is
rendered with the standard ``\\ No newline at end of file`` marker. This
keeps parse -> render and diff -> apply byte-faithful.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DiffFormatError

CONTEXT = "context"
REMOVED = "removed"
ADDED = "added"


@dataclass
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: list[tuple[str, str]] = field(default_factory=list)  # (tag, text)

    def header(self) -> str:
        def part(sign: str, start: int, length: int) -> str:
            return f"{sign}{start}" if length == 1 else f"{sign}{start},{length}"

        return f"@@ {part('-', self.old_start, self.old_len)} {part('+', self.new_start, self.new_len)} @@"


@dataclass
class FileDiff:
    old_path: str | None
    new_path: str | None
    status: str  # modified | added | deleted | renamed
    hunks: list[Hunk] = field(default_factory=list)


@dataclass
class Patch:
    file_diffs: list[FileDiff] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.file_diffs


def split_lines(text: str) -> list[str]:
    """Split on ``\\n`` only, keeping the newline on each line.

    Unlike ``str.splitlines`` this treats a lone ``\\r`` as line content,
    so CRLF endings survive a split/join round trip byte-for-byte.
    """
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
        return [ln + "\n" for ln in lines]
    return [ln + "\n" for ln in lines[:-1]] + [lines[-1]]


# ---------------------------------------------------------------------------
# Myers shortest edit script


def _middle_snake(a, a0, a1, b, b0, b1):
    """Find a middle snake of an optimal path through a[a0:a1] x b[b0:b1].

    Returns (x, y, u, v): the snake runs from (x, y) to (u, v) in absolute
    coordinates, possibly with zero length. Both slices must be non-empty.
    """
    n = a1 - a0
    m = b1 - b0
    delta = n - m
    odd = delta % 2 != 0
    vf = {1: 0}
    vb = {1: 0}
    dmax = (n + m + 1) // 2 + 1
    for d in range(dmax + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vf.get(k - 1, -1) < vf.get(k + 1, -1)):
                x = vf.get(k + 1, 0)
            else:
                x = vf.get(k - 1, 0) + 1
            y = x - k
            sx, sy = x, y
            while x < n and y < m and a[a0 + x] == b[b0 + y]:
                x += 1
                y += 1
            vf[k] = x
            if odd and -(d - 1) <= k - delta <= d - 1:
                if x + vb.get(delta - k, -1) >= n:
                    return a0 + sx, b0 + sy, a0 + x, b0 + y
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vb.get(k - 1, -1) < vb.get(k + 1, -1)):
                x = vb.get(k + 1, 0)
            else:
                x = vb.get(k - 1, 0) + 1
            y = x - k
            sx, sy = x, y
            # backward: x counts from the end of a, y from the end of b
            while x < n and y < m and a[a1 - x - 1] == b[b1 - y - 1]:
                x += 1
                y += 1
            vb[k] = x
            if not odd and -d <= delta - k <= d:
                if x + vf.get(delta - k, -1) >= n:
                    return a1 - x, b1 - y, a1 - sx, b1 - sy
    raise AssertionError("middle snake search failed")  # pragma: no cover


def _myers(a, a0, a1, b, b0, b1, out):
    while a0 < a1 and b0 < b1 and a[a0] == b[b0]:
        out.append(("equal", a0, a0 + 1, b0, b0 + 1))
        a0 += 1
        b0 += 1
    tail = []
    while a1 > a0 and b1 > b0 and a[a1 - 1] == b[b1 - 1]:
        tail.append(("equal", a1 - 1, a1, b1 - 1, b1))
        a1 -= 1
        b1 -= 1
    if a0 == a1:
        if b0 < b1:
            out.append(("insert", a0, a0, b0, b1))
    elif b0 == b1:
        out.append(("delete", a0, a1, b0, b0))
    else:
        x, y, u, v = _middle_snake(a, a0, a1, b, b0, b1)
        _myers(a, a0, x, b, b0, y, out)
        if u > x:
            out.append(("equal", x, u, y, v))
        _myers(a, u, a1, b, v, b1, out)
    out.extend(reversed(tail))


def _coalesce(ops):
    merged = []
    for op in ops:
        if merged and merged[-1][0] == op[0] and merged[-1][2] == op[1] and merged[-1][4] == op[3]:
            tag, i1, _, j1, _ = merged[-1]
            merged[-1] = (tag, i1, op[2], j1, op[4])
        else:
            merged.append(op)
    return merged


def _slide(ops, a, b):
    """Shift insert/delete runs within equal surroundings.

    A pure insertion or deletion bounded by identical lines can sit at
    several equivalent offsets; prefer the one whose preceding anchor line
    is unique in its file, falling back to where Myers put it. Purely a
    tie-break: edit-script length is unchanged.
    """
    from collections import Counter

    count_a = Counter(a)
    count_b = Counter(b)

    edits = [op for op in ops if op[0] != "equal"]
    for idx, op in enumerate(edits):
        tag, i1, i2, j1, j2 = op
        if tag == "insert":
            src, counts, r1, r2 = b, count_b, j1, j2
        elif tag == "delete":
            src, counts, r1, r2 = a, count_a, i1, i2
        else:
            continue
        # content-equivalent shift window
        lo = 0
        while r1 - lo - 1 >= 0 and src[r1 - lo - 1] == src[r2 - lo - 1]:
            lo += 1
        hi = 0
        while r2 + hi < len(src) and src[r1 + hi] == src[r2 + hi]:
            hi += 1
        # never slide across a neighbouring edit
        if idx > 0:
            prev = edits[idx - 1]
            lo = min(lo, i1 - prev[2], j1 - prev[4])
        if idx + 1 < len(edits):
            nxt = edits[idx + 1]
            hi = min(hi, nxt[1] - i2, nxt[3] - j2)
        if lo <= 0 and hi <= 0:
            continue
        best, best_score = 0, -1
        for s in range(-max(lo, 0), max(hi, 0) + 1):
            p = r1 + s - 1
            anchor = src[p] if p >= 0 else None
            score = 1 if anchor is not None and counts[anchor] == 1 else 0
            if score > best_score or (score == best_score and s == 0):
                best_score, best = score, s
        if best:
            edits[idx] = (tag, i1 + best, i2 + best, j1 + best, j2 + best)
    return _rebuild_equals(edits, a, b)


def _rebuild_equals(edits, a, b):
    """Reassemble full opcodes from edit runs, filling equal gaps."""
    out = []
    ai = bi = 0
    for tag, i1, i2, j1, j2 in edits:
        if i1 > ai:
            out.append(("equal", ai, i1, bi, bi + (i1 - ai)))
            bi += i1 - ai
            ai = i1
        out.append((tag, i1, i2, j1, j2))
        ai, bi = i2, j2
    if ai < len(a):
        out.append(("equal", ai, len(a), bi, len(b)))
    return out


def line_opcodes(a: list[str], b: list[str]) -> list[tuple[str, int, int, int, int]]:
    """Shortest-edit-script opcodes over two line lists.

    Tags are ``equal``, ``delete``, ``insert``, ``replace``; index pairs
    follow difflib conventions (half-open, monotone).
    """
    raw: list = []
    _myers(a, 0, len(a), b, 0, len(b), raw)
    ops = _coalesce(raw)
    ops = _slide(ops, a, b)
    # fold delete+insert adjacency into replace
    folded = []
    for op in ops:
        if (
            folded
            and op[0] == "insert"
            and folded[-1][0] == "delete"
            and folded[-1][2] == op[1]
        ):
            _, i1, i2, j1, _ = folded[-1]
            folded[-1] = ("replace", i1, i2, j1, op[4])
        else:
            folded.append(op)
    return folded


def matching_blocks(a: list[str], b: list[str]) -> list[tuple[int, int, int]]:
    """Equal runs as (a_start, b_start, length), ending with a zero sentinel."""
    blocks = [
        (i1, j1, i2 - i1) for tag, i1, i2, j1, j2 in line_opcodes(a, b) if tag == "equal"
    ]
    blocks.append((len(a), len(b), 0))
    return blocks


# ---------------------------------------------------------------------------
# Hunks


def diff(base: str, changed: str, context: int = 3) -> list[Hunk]:
    """Line diff of two texts as unified hunks.

    ``diff(x, x)`` is empty, and applying the result to ``base`` with
    :func:`apply_hunks` reproduces ``changed`` exactly.
    """
    a = split_lines(base)
    b = split_lines(changed)
    ops = line_opcodes(a, b)
    edits = [op for op in ops if op[0] != "equal"]
    if not edits:
        return []

    # group edit runs whose context windows touch
    groups: list[list] = [[edits[0]]]
    for op in edits[1:]:
        if op[1] - groups[-1][-1][2] <= 2 * context:
            groups[-1].append(op)
        else:
            groups.append([op])

    hunks = []
    for group in groups:
        i_lo = max(group[0][1] - context, 0)
        i_hi = min(group[-1][2] + context, len(a))
        j_lo = group[0][3] - (group[0][1] - i_lo)
        lines: list[tuple[str, str]] = []
        ai = i_lo
        bj = j_lo
        for tag, i1, i2, j1, j2 in group:
            while ai < i1:
                lines.append((CONTEXT, a[ai]))
                ai += 1
                bj += 1
            for i in range(i1, i2):
                lines.append((REMOVED, a[i]))
            for j in range(j1, j2):
                lines.append((ADDED, b[j]))
            ai, bj = i2, j2
        while ai < i_hi:
            lines.append((CONTEXT, a[ai]))
            ai += 1
            bj += 1
        old_len = sum(1 for tag, _ in lines if tag in (CONTEXT, REMOVED))
        new_len = sum(1 for tag, _ in lines if tag in (CONTEXT, ADDED))
        old_start = i_lo + 1 if old_len else i_lo
        new_start = j_lo + 1 if new_len else j_lo
        hunks.append(Hunk(old_start, old_len, new_start, new_len, lines))
    return hunks


def apply_hunks(base: str, hunks: list[Hunk]) -> str:
    """Apply hunks positionally (no fuzz) to ``base``."""
    a = split_lines(base)
    out: list[str] = []
    pos = 0  # index into a
    for hunk in hunks:
        start = hunk.old_start - 1 if hunk.old_len else hunk.old_start
        if start < pos or start > len(a):
            raise DiffFormatError("hunk does not fit the base text", hunk.old_start)
        out.extend(a[pos:start])
        pos = start
        for tag, text in hunk.lines:
            if tag == CONTEXT:
                if pos >= len(a) or a[pos] != text:
                    raise DiffFormatError("context mismatch while applying hunk", hunk.old_start)
                out.append(text)
                pos += 1
            elif tag == REMOVED:
                if pos >= len(a) or a[pos] != text:
                    raise DiffFormatError("removed line mismatch while applying hunk", hunk.old_start)
                pos += 1
            else:
                out.append(text)
    out.extend(a[pos:])
    return "".join(out)


# ---------------------------------------------------------------------------
# Unified diff interchange


def _strip_prefix(path: str) -> str | None:
    if path == "/dev/null":
        return None
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


def parse_unified_diff(text: str) -> Patch:
    """Parse git-style unified diff text into a :class:`Patch`.

    Accepts full ``git diff`` output as well as bare hunk fragments with no
    file headers (such fragments attach to a pathless file entry).
    """
    patch = Patch()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    current: FileDiff | None = None
    hunk: Hunk | None = None
    old_seen = new_seen = 0
    pending_status: str | None = None
    pending_rename: tuple[str | None, str | None] = (None, None)

    def close_hunk(lineno: int):
        nonlocal hunk, old_seen, new_seen
        if hunk is None:
            return
        if old_seen != hunk.old_len or new_seen != hunk.new_len:
            raise DiffFormatError("hunk line counts disagree with header", lineno)
        hunk = None

    for idx, raw in enumerate(lines, start=1):
        if raw.startswith("diff --git "):
            close_hunk(idx)
            current = None
            pending_status = None
            pending_rename = (None, None)
            continue
        if raw.startswith("new file mode"):
            pending_status = "added"
            continue
        if raw.startswith("deleted file mode"):
            pending_status = "deleted"
            continue
        if raw.startswith("rename from "):
            pending_status = "renamed"
            pending_rename = (raw[len("rename from "):], pending_rename[1])
            continue
        if raw.startswith("rename to "):
            pending_status = "renamed"
            pending_rename = (pending_rename[0], raw[len("rename to "):])
            continue
        if raw.startswith(("index ", "similarity index", "dissimilarity index", "old mode", "new mode")):
            continue
        if raw.startswith("--- "):
            close_hunk(idx)
            old = _strip_prefix(raw[4:].split("\t")[0])
            current = FileDiff(old, None, pending_status or "modified")
            patch.file_diffs.append(current)
            continue
        if raw.startswith("+++ "):
            if current is None:
                raise DiffFormatError("'+++' without matching '---'", idx)
            current.new_path = _strip_prefix(raw[4:].split("\t")[0])
            if current.old_path is None and current.status == "modified":
                current.status = "added"
            if current.new_path is None and current.status == "modified":
                current.status = "deleted"
            continue
        if raw.startswith("@@"):
            close_hunk(idx)
            if current is None:
                if pending_rename != (None, None):
                    current = FileDiff(pending_rename[0], pending_rename[1], "renamed")
                else:
                    current = FileDiff(None, None, pending_status or "modified")
                patch.file_diffs.append(current)
            body = raw[2:]
            try:
                header, _ = body.split("@@", 1)
                old_part, new_part = header.split()
                def parse_part(part: str) -> tuple[int, int]:
                    nums = part[1:]
                    if "," in nums:
                        s, n = nums.split(",")
                        return int(s), int(n)
                    return int(nums), 1
                old_start, old_len = parse_part(old_part)
                new_start, new_len = parse_part(new_part)
            except ValueError as exc:
                raise DiffFormatError(f"bad hunk header {raw!r}", idx) from exc
            hunk = Hunk(old_start, old_len, new_start, new_len)
            current.hunks.append(hunk)
            old_seen = new_seen = 0
            continue
        if hunk is not None:
            if raw.startswith("\\"):
                # previous content line has no trailing newline
                tag, prev = hunk.lines[-1]
                hunk.lines[-1] = (tag, prev.rstrip("\n"))
                continue
            if raw.startswith("+"):
                hunk.lines.append((ADDED, raw[1:] + "\n"))
                new_seen += 1
            elif raw.startswith("-"):
                hunk.lines.append((REMOVED, raw[1:] + "\n"))
                old_seen += 1
            elif raw.startswith(" ") or raw == "":
                hunk.lines.append((CONTEXT, raw[1:] + "\n"))
                old_seen += 1
                new_seen += 1
            else:
                raise DiffFormatError(f"unexpected line {raw!r}", idx)
            continue
        # prose between file sections is ignored (git prints none, humans do)
    close_hunk(len(lines))
    return patch


def render_patch(patch: Patch) -> str:
    """Render a :class:`Patch` as git-compatible unified diff text."""
    out: list[str] = []
    for fd in patch.file_diffs:
        old_label = f"a/{fd.old_path}" if fd.old_path else "/dev/null"
        new_label = f"b/{fd.new_path}" if fd.new_path else "/dev/null"
        git_old = fd.old_path or fd.new_path or ""
        git_new = fd.new_path or fd.old_path or ""
        out.append(f"diff --git a/{git_old} b/{git_new}\n")
        if fd.status == "added":
            out.append("new file mode 100644\n")
        elif fd.status == "deleted":
            out.append("deleted file mode 100644\n")
        elif fd.status == "renamed":
            out.append(f"rename from {fd.old_path}\n")
            out.append(f"rename to {fd.new_path}\n")
        if fd.hunks:
            out.append(f"--- {old_label}\n")
            out.append(f"+++ {new_label}\n")
        for hunk in fd.hunks:
            out.append(hunk.header() + "\n")
            for tag, text in hunk.lines:
                sign = {CONTEXT: " ", REMOVED: "-", ADDED: "+"}[tag]
                if text.endswith("\n"):
                    out.append(sign + text)
                else:
                    out.append(sign + text + "\n")
                    out.append("\\ No newline at end of file\n")
    return "".join(out)
