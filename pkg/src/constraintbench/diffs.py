"""Unified-diff parsing, artifact exclusion, and import extraction.

The verifiers only ever look at lines a patch *adds*, so the parser keeps
added lines (with their line numbers in the post-image) and file paths, and
drops deletions, context, and binary hunks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import PatchParseError

LOCK_FILES = {
    "package-lock.json",
    "yarn.lock",
    "pnpm-lock.yaml",
    "uv.lock",
    "poetry.lock",
}

EXCLUDED_DIR_COMPONENTS = {"node_modules", "__pycache__"}

_PY_EXTENSIONS = {".py"}
_JS_EXTENSIONS = {".js", ".mjs", ".cjs", ".ts"}

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_DIFF_GIT_RE = re.compile(r'^diff --git (?:"?a/(.*?)"?) (?:"?b/(.*?)"?)$')

_PY_IMPORT_RE = re.compile(r"^\s*import\s+([A-Za-z_][\w.]*(?:\s*,\s*[A-Za-z_][\w.]*)*)")
_PY_FROM_RE = re.compile(r"^\s*from\s+([.\w]+)\s+import\b")
_JS_REQUIRE_RE = re.compile(r"""\brequire\s*\(\s*['"]([^'"]+)['"]\s*\)""")
_JS_IMPORT_FROM_RE = re.compile(r"""^\s*import\s+[\w{},*\s$]+?\sfrom\s+['"]([^'"]+)['"]""")
_JS_IMPORT_BARE_RE = re.compile(r"""^\s*import\s+['"]([^'"]+)['"]""")


@dataclass
class FileChange:
    """One file's contribution to a patch: its added lines only."""

    path: str
    added_lines: list[tuple[int, str]] = field(default_factory=list)
    is_excluded: bool = False

    @property
    def language(self) -> str:
        dot = self.path.rfind(".")
        ext = self.path[dot:] if dot >= 0 else ""
        if ext in _PY_EXTENSIONS:
            return "python"
        if ext in _JS_EXTENSIONS:
            return "javascript"
        return "other"


@dataclass
class PatchDocument:
    files: list[FileChange] = field(default_factory=list)
    baseline_ref: str | None = None

    def file(self, path: str) -> FileChange | None:
        for change in self.files:
            if change.path == path:
                return change
        return None

    def active_files(self) -> list[FileChange]:
        """Files that survived exclusion filtering."""
        return [f for f in self.files if not f.is_excluded]

    def to_json(self) -> str:
        payload = {
            "baseline_ref": self.baseline_ref,
            "files": [
                {
                    "path": f.path,
                    "language": f.language,
                    "is_excluded": f.is_excluded,
                    "added_lines": [[n, t] for n, t in f.added_lines],
                }
                for f in self.files
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PatchDocument":
        payload = json.loads(text)
        files = [
            FileChange(
                path=entry["path"],
                added_lines=[(int(n), t) for n, t in entry["added_lines"]],
                is_excluded=bool(entry["is_excluded"]),
            )
            for entry in payload["files"]
        ]
        return cls(files=files, baseline_ref=payload.get("baseline_ref"))


@dataclass
class ImportStatement:
    source_file: str
    line_number: int
    raw_text: str
    target: str
    resolved_layer: str | None = None


def _strip_prefix(path: str) -> str:
    if path.startswith(("a/", "b/")):
        return path[2:]
    return path


def _unquote(path: str) -> str:
    if path.startswith('"') and path.endswith('"'):
        return path[1:-1]
    return path


def parse_patch(diff_text: str, baseline_ref: str | None = None) -> PatchDocument:
    """Parse a git-compatible unified diff into a PatchDocument.

    Records each ``+`` hunk line under its file with the post-image line
    number. Binary hunks are dropped silently; a malformed ``@@`` header
    raises PatchParseError with the line number.
    """
    files: list[FileChange] = []
    by_path: dict[str, FileChange] = {}
    current: FileChange | None = None
    old_path: str | None = None
    new_line = 0
    remaining_new = 0
    remaining_old = 0
    binary_section = False

    def open_file(path: str) -> FileChange:
        if path in by_path:
            return by_path[path]
        change = FileChange(path=path)
        by_path[path] = change
        files.append(change)
        return change

    lines = diff_text.splitlines()
    for idx, line in enumerate(lines, start=1):
        # While a hunk is open, interpret by prefix with line accounting: an
        # added "++ x" or deleted "-- x" line would otherwise masquerade as a
        # file header. The counters say when the hunk is really over.
        if current is not None and (remaining_new > 0 or remaining_old > 0):
            if line.startswith("\\"):
                continue  # "\ No newline at end of file"
            if line.startswith("+"):
                current.added_lines.append((new_line, line[1:]))
                new_line += 1
                remaining_new -= 1
                continue
            if line.startswith("-"):
                remaining_old -= 1
                continue
            if line.startswith(" ") or line == "":
                new_line += 1
                remaining_new -= 1
                remaining_old -= 1
                continue
            # anything else ends the hunk early; reparse the line as a header
            remaining_new = remaining_old = 0

        git_header = _DIFF_GIT_RE.match(line)
        if git_header:
            current = None
            old_path = None
            binary_section = False
            continue
        if line.startswith("Binary files ") or line.startswith("GIT binary patch"):
            binary_section = True
            continue
        if binary_section and not line.startswith(("--- ", "+++ ")):
            continue
        if line.startswith("--- "):
            old_path = line[4:].split("\t")[0].strip()
            continue
        if line.startswith("+++ "):
            raw = line[4:].split("\t")[0].strip()
            if raw == "/dev/null":
                # Deleted file: keep its identity from the old side, no added lines.
                path = _strip_prefix(_unquote(old_path or ""))
            else:
                path = _strip_prefix(_unquote(raw))
            current = open_file(path) if path else None
            binary_section = False
            continue
        if line.startswith("@@"):
            match = _HUNK_RE.match(line)
            if not match:
                raise PatchParseError(f"malformed hunk header: {line!r}", idx)
            if current is None:
                raise PatchParseError("hunk header before any file header", idx)
            remaining_old = int(match.group(2)) if match.group(2) is not None else 1
            new_line = int(match.group(3))
            remaining_new = int(match.group(4)) if match.group(4) is not None else 1

    return PatchDocument(files=files, baseline_ref=baseline_ref)


def is_excluded_path(path: str) -> bool:
    """Generated-artifact filter: vendored deps, bytecode, databases, lock files."""
    parts = path.split("/")
    if any(part in EXCLUDED_DIR_COMPONENTS for part in parts):
        return True
    name = parts[-1]
    if name in LOCK_FILES:
        return True
    if name.endswith(".db"):
        return True
    return False


def apply_exclusions(patch: PatchDocument) -> PatchDocument:
    """Mark excluded files in place and return the same document."""
    for change in patch.files:
        change.is_excluded = is_excluded_path(change.path)
    return patch


def filter_excluded_sections(diff_text: str) -> str:
    """Drop whole per-file sections for excluded paths, byte-faithfully otherwise.

    Used at patch-extraction time so generated artifacts never even reach the
    stored diff; exclusion marking at parse time stays as a second guard.
    """
    if not diff_text.strip():
        return diff_text
    kept: list[str] = []
    keeping = True
    for line in diff_text.splitlines(keepends=True):
        header = _DIFF_GIT_RE.match(line.rstrip("\n"))
        if header:
            keeping = not is_excluded_path(header.group(2))
        if keeping:
            kept.append(line)
    return "".join(kept)


def extract_imports(change: FileChange) -> list[ImportStatement]:
    """Scan a file's added lines for single-line import constructs.

    Matches Python ``import``/``from ... import`` and JavaScript
    ``require()``/``import ... from``; anything else is ignored.
    """
    language = change.language
    if language not in ("python", "javascript"):
        return []
    found: list[ImportStatement] = []
    for line_number, text in change.added_lines:
        if language == "python":
            from_match = _PY_FROM_RE.match(text)
            if from_match:
                found.append(ImportStatement(change.path, line_number, text, from_match.group(1)))
                continue
            import_match = _PY_IMPORT_RE.match(text)
            if import_match:
                for target in import_match.group(1).split(","):
                    target = target.strip().split(" ")[0]
                    if target:
                        found.append(ImportStatement(change.path, line_number, text, target))
        else:
            for match in _JS_REQUIRE_RE.finditer(text):
                found.append(ImportStatement(change.path, line_number, text, match.group(1)))
            from_match = _JS_IMPORT_FROM_RE.match(text)
            if from_match:
                found.append(ImportStatement(change.path, line_number, text, from_match.group(1)))
            else:
                bare = _JS_IMPORT_BARE_RE.match(text)
                if bare:
                    found.append(ImportStatement(change.path, line_number, text, bare.group(1)))
    return found
