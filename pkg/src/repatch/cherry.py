"""Cherry-pick emulation: commit-scoped three-way merge onto a worktree.

The change a commit carries is measured against its first parent (git's
``-m 1`` convention, which also covers pull-request merge commits), and
each changed file is merged with base = file at the parent, ours = file
in the receiving worktree, theirs = file at the commit. The worktree ends
up holding merged content, conflict markers included, for inspection.
"""

from __future__ import annotations

from .merge import CherryPickOutcome, merge_trees
from .transform import Worktree
from .vcs import RepoHandle, changed_files, first_parent, read_tree


def cherry_pick(
    repo: RepoHandle,
    commit: str,
    onto: Worktree,
    timeout: float | None = None,
) -> CherryPickOutcome:
    """Apply one commit onto a worktree via per-file three-way merge."""
    parent = first_parent(repo, commit)
    changed = changed_files(repo, parent, commit, timeout=timeout)
    paths = [p for _, p in changed]
    scope = set(paths)
    base_tree = read_tree(repo, parent, scope=scope, timeout=timeout)
    theirs_tree = read_tree(repo, commit, scope=scope, timeout=timeout)
    ours_tree = {p: onto.read(p) for p in paths if onto.exists(p)}

    outcome = merge_trees(base_tree, ours_tree, theirs_tree, paths)
    apply_outcome(outcome, onto)
    return outcome


def apply_outcome(outcome: CherryPickOutcome, onto: Worktree) -> None:
    """Write merged contents (markers included) into the worktree."""
    for path, fm in outcome.files.items():
        if fm.merged is None:
            if fm.collision is None and onto.exists(path):
                onto.delete(path)
            continue  # collisions leave the worktree side untouched
        onto.write(path, fm.merged.render())
