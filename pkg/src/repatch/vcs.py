"""Read-mostly git adapter built on the git executable.

Only worktrees and refs created by this tool are ever touched; repository
objects are never rewritten. Worktree materialization extracts blobs into
a plain directory (no git metadata), so concurrent jobs cannot contend on
repository locks.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field

from .errors import (
    FetchError,
    MissingParent,
    NoCommonAncestor,
    ObjectMissing,
    VcsError,
)
from .transform import Worktree

_GIT_ENV_DEFAULTS = {
    "GIT_TERMINAL_PROMPT": "0",  # never prompt interactively in batch mode
    "GIT_CONFIG_NOSYSTEM": "1",
}


def run_git(repo_path: str | None, *args: str, check: bool = True, timeout: float | None = None,
            env_extra: dict | None = None) -> subprocess.CompletedProcess:
    cmd = ["git"]
    if repo_path is not None:
        cmd += ["-C", repo_path]
    cmd += list(args)
    env = dict(os.environ)
    env.update(_GIT_ENV_DEFAULTS)
    if env_extra:
        env.update(env_extra)
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, env=env, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        raise VcsError(f"git {' '.join(args)} timed out") from exc
    if check and proc.returncode != 0:
        raise VcsError(f"git {' '.join(args)} failed: {proc.stderr.strip()}")
    return proc


@dataclass
class RepoHandle:
    path: str
    remotes: dict[str, str] = field(default_factory=dict)
    head: str = ""

    @classmethod
    def open(cls, path: str) -> "RepoHandle":
        proc = run_git(path, "rev-parse", "--is-inside-work-tree", check=False)
        if proc.returncode != 0 or proc.stdout.strip() != "true":
            raise VcsError(f"{path} is not a git repository")
        remotes: dict[str, str] = {}
        for line in run_git(path, "remote", "-v").stdout.splitlines():
            parts = line.split()
            if len(parts) >= 2 and parts[-1] == "(fetch)":
                remotes[parts[0]] = parts[1]
        head = run_git(path, "rev-parse", "HEAD").stdout.strip()
        return cls(path=path, remotes=remotes, head=head)


def clone(url: str, dest: str, depth: int | None = None, timeout: float | None = None) -> RepoHandle:
    args = ["clone", "--quiet"]
    if depth:
        args += ["--depth", str(depth)]
    args += [url, dest]
    proc = run_git(None, *args, check=False, timeout=timeout)
    if proc.returncode != 0:
        raise FetchError(f"clone of {url} failed: {proc.stderr.strip()}")
    return RepoHandle.open(dest)


def link_source(target: RepoHandle, source_url: str, remote_name: str,
                depth: int | None = None, timeout: float | None = None) -> None:
    """Add the source repository as a remote and fetch its history."""
    existing = target.remotes.get(remote_name)
    if existing is not None and existing != source_url:
        raise FetchError(
            f"remote {remote_name} already points at {existing}, not {source_url}"
        )
    if existing is None:
        proc = run_git(target.path, "remote", "add", remote_name, source_url, check=False)
        if proc.returncode != 0:
            raise FetchError(f"remote add failed: {proc.stderr.strip()}")
        target.remotes[remote_name] = source_url
    args = ["fetch", "--quiet", remote_name]
    if depth:
        args += ["--depth", str(depth)]
    proc = run_git(target.path, *args, check=False, timeout=timeout)
    if proc.returncode != 0:
        raise FetchError(f"fetch of {source_url} failed: {proc.stderr.strip()}")


def resolve_commit(repo: RepoHandle, rev: str) -> str:
    proc = run_git(repo.path, "rev-parse", "--verify", rev + "^{commit}", check=False)
    if proc.returncode != 0:
        raise ObjectMissing(f"cannot resolve {rev} in {repo.path}")
    return proc.stdout.strip()


def merge_base(repo: RepoHandle, a: str, b: str) -> str:
    """Best common ancestor; ties break toward the latest commit time."""
    proc = run_git(repo.path, "merge-base", "--all", a, b, check=False)
    if proc.returncode != 0 or not proc.stdout.strip():
        raise NoCommonAncestor(f"{a} and {b} share no history")
    bases = proc.stdout.split()
    if len(bases) == 1:
        return bases[0]
    stamped = []
    for c in bases:
        ts = int(run_git(repo.path, "show", "-s", "--format=%ct", c).stdout.strip())
        stamped.append((ts, c))
    stamped.sort(key=lambda x: (x[0], x[1]))
    return stamped[-1][1]


def first_parent(repo: RepoHandle, commit: str) -> str:
    """Mainline parent (the ``-m 1`` base for merge commits)."""
    out = run_git(repo.path, "show", "-s", "--format=%P", commit).stdout.split()
    if not out:
        raise MissingParent(f"{commit} has no parents")
    return out[0]


def changed_files(repo: RepoHandle, base: str, commit: str, timeout: float | None = None) -> list[tuple[str, str]]:
    """(status, path) pairs between two commits; renames are not folded."""
    proc = run_git(
        repo.path, "diff", "--name-status", "--no-renames", base, commit, timeout=timeout
    )
    out = []
    for line in proc.stdout.splitlines():
        if not line.strip():
            continue
        status, path = line.split("\t", 1)
        out.append((status[:1], path))
    return out


def read_tree(repo: RepoHandle, commit: str, scope: set[str] | None = None,
              timeout: float | None = None) -> dict[str, str]:
    """Blobs of a commit as UTF-8 text; non-UTF-8 files are skipped."""
    proc = run_git(repo.path, "ls-tree", "-r", "-z", commit, check=False, timeout=timeout)
    if proc.returncode != 0:
        raise ObjectMissing(f"cannot read tree of {commit}")
    entries = []
    for item in proc.stdout.split("\0"):
        if not item:
            continue
        meta, path = item.split("\t", 1)
        mode, otype, sha = meta.split()
        if otype != "blob":
            continue
        if scope is not None and path not in scope:
            continue
        entries.append((path, sha))
    if not entries:
        return {}
    batch = subprocess.run(
        ["git", "-C", repo.path, "cat-file", "--batch"],
        input="\n".join(sha for _, sha in entries) + "\n",
        capture_output=True,
        text=False,
        timeout=timeout,
    )
    files: dict[str, str] = {}
    data = batch.stdout
    pos = 0
    for path, sha in entries:
        nl = data.index(b"\n", pos)
        header = data[pos:nl].decode()
        parts = header.split()
        if parts[1] == "missing":
            raise ObjectMissing(f"blob {sha} missing")
        size = int(parts[2])
        blob = data[nl + 1 : nl + 1 + size]
        pos = nl + 1 + size + 1  # trailing newline after each object
        try:
            files[path] = blob.decode("utf-8")
        except UnicodeDecodeError:
            continue  # binary: excluded from modeling
    return files


def materialize_worktree(repo: RepoHandle, commit: str, base_dir: str | None = None) -> Worktree:
    """Extract a commit into an isolated plain directory."""
    root = tempfile.mkdtemp(prefix="repatch-wt-", dir=base_dir)
    files = read_tree(repo, commit)
    for path, text in files.items():
        full = os.path.join(root, path)
        os.makedirs(os.path.dirname(full) or root, exist_ok=True)
        with open(full, "wb") as fh:
            fh.write(text.encode("utf-8"))
    return Worktree(root=root)


def cleanup_worktree(worktree: Worktree) -> None:
    if worktree.root and os.path.isdir(worktree.root):
        shutil.rmtree(worktree.root, ignore_errors=True)


# --- helpers for building fixture repositories (scenario generation) --------

_FIXED_AUTHOR = {
    "GIT_AUTHOR_NAME": "fixture",
    "GIT_AUTHOR_EMAIL": "fixture@localhost",
    "GIT_COMMITTER_NAME": "fixture",
    "GIT_COMMITTER_EMAIL": "fixture@localhost",
    "GIT_AUTHOR_DATE": "2021-01-01T00:00:00 +0000",
    "GIT_COMMITTER_DATE": "2021-01-01T00:00:00 +0000",
}


def init_repo(path: str) -> RepoHandle:
    os.makedirs(path, exist_ok=True)
    run_git(None, "init", "--quiet", "-b", "main", path)
    run_git(path, "config", "user.name", "fixture")
    run_git(path, "config", "user.email", "fixture@localhost")
    return RepoHandle(path=path, remotes={}, head="")

def commit_all(repo: RepoHandle, message: str, date: str | None = None) -> str:
    run_git(repo.path, "add", "-A")
    env = dict(_FIXED_AUTHOR)
    if date:
        env["GIT_AUTHOR_DATE"] = date
        env["GIT_COMMITTER_DATE"] = date
    run_git(repo.path, "commit", "--quiet", "--allow-empty", "-m", message, env_extra=env)
    repo.head = run_git(repo.path, "rev-parse", "HEAD").stdout.strip()
    return repo.head
