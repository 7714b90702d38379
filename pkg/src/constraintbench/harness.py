"""Two-phase build/evaluate pipeline over throwaway workspaces.

Each run gets a fresh directory with its own git history, a port from a
configured pool, and a child-process server; Docker is deliberately absent.
Patch sources are pluggable: recorded diffs on disk, or an arbitrary command
run inside the prepared workspace (the hook where a live agent would sit).
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .composer import TaskSpec
from .diffs import PatchDocument, apply_exclusions, filter_excluded_sections, parse_patch
from .errors import PatchParseError, TaskSetupError
from .suite import SuiteResult, TestCollection, poll_health, run_suite, unreachable_result
from .verifiers import LayerAliasMap, structural_compliance

logger = logging.getLogger(__name__)


@dataclass
class HarnessConfig:
    port_pool: list[int] = field(default_factory=lambda: list(range(8080, 8100)))
    workers: int = 1
    request_timeout: float = 10.0
    health_interval: float = 0.5
    health_max_attempts: int = 20
    health_total_timeout: float = 120.0
    setup_timeout: float = 180.0
    provider_timeout: float = 600.0
    shutdown_grace: float = 5.0
    pg_url: str | None = None
    workspace_root: str | None = None
    aliases: LayerAliasMap | None = None

    @classmethod
    def from_env(cls, **overrides) -> "HarnessConfig":
        config = cls(**overrides)
        if config.pg_url is None:
            config.pg_url = os.environ.get("PG_URL") or None
        return config


@dataclass
class PatchProvider:
    """Where patches come from: a directory of recorded diffs, or a command."""

    kind: str  # recorded_directory | external_command
    location: str

    @classmethod
    def parse(cls, spec: str) -> "PatchProvider":
        prefix, _, rest = spec.partition(":")
        if prefix == "recorded" and rest:
            return cls("recorded_directory", rest)
        if prefix == "command" and rest:
            return cls("external_command", rest)
        raise ValueError(f"provider must be recorded:<dir> or command:<cmdline>, got {spec!r}")

    def recorded_diff_path(self, task_id: str, trial: int) -> Path:
        base = Path(self.location)
        per_trial = base / task_id / f"trial{trial}.diff"
        if per_trial.exists():
            return per_trial
        flat = base / f"{task_id}.diff"
        if flat.exists():
            return flat
        raise TaskSetupError(f"no recorded diff for task {task_id!r} trial {trial}")


@dataclass
class Workspace:
    root: Path
    meta: Path
    baseline_ref: str
    port: int

    @property
    def server_log(self) -> Path:
        return self.meta / "server.log"

    def destroy(self):
        shutil.rmtree(self.root.parent, ignore_errors=True)


@dataclass
class BuildResult:
    diff_text: str
    logs: str
    token_usage: dict | None = None


@dataclass
class RunRecord:
    task_id: str
    trial: int
    patch: PatchDocument
    patch_applied: bool
    server_started: bool
    health_ok: bool
    suite: SuiteResult
    verifier_reports: list
    structurally_compliant: bool
    logs: str = ""
    token_usage: dict | None = None
    wall_time: float = 0.0
    environment_skipped: bool = False
    setup_error: bool = False
    task_summary: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    @property
    def raw_fraction(self) -> float:
        total = self.suite.assertions_total
        return self.suite.assertions_passed / total if total else 0.0

    @property
    def full_pass(self) -> bool:
        total = self.suite.assertions_total
        return (
            total > 0
            and self.suite.assertions_passed == total
            and self.structurally_compliant
        )

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "trial": self.trial,
            "patch": json.loads(self.patch.to_json()),
            "patch_applied": self.patch_applied,
            "server_started": self.server_started,
            "health_ok": self.health_ok,
            "suite": self.suite.to_dict(),
            "verifier_reports": [r.to_dict() for r in self.verifier_reports],
            "structurally_compliant": self.structurally_compliant,
            "full_pass": self.full_pass,
            "logs": self.logs,
            "token_usage": self.token_usage,
            "wall_time": self.wall_time,
            "environment_skipped": self.environment_skipped,
            "setup_error": self.setup_error,
            "task": self.task_summary,
            "labels": self.labels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _task_summary(task: TaskSpec) -> dict:
    return {
        "id": task.id,
        "kind": task.kind,
        "framework": task.framework.name,
        "runtime": task.framework.runtime,
        "level": f"L{task.level}",
        "constraints": {
            "architecture": task.constraints.architecture,
            "database": task.constraints.database,
            "orm": task.constraints.orm,
        },
    }


def _git(args: list[str], cwd: Path, check: bool = True) -> subprocess.CompletedProcess:
    result = subprocess.run(
        ["git", *args], cwd=cwd, capture_output=True, text=True,
        env={**os.environ, "GIT_TERMINAL_PROMPT": "0"},
    )
    if check and result.returncode != 0:
        raise TaskSetupError(f"git {' '.join(args)} failed: {result.stderr.strip()}")
    return result


def _init_repo(root: Path):
    _git(["init", "-q"], root)
    _git(["config", "user.email", "harness@localhost"], root)
    _git(["config", "user.name", "harness"], root)
    _git(["config", "commit.gpgsign", "false"], root)


def _make_workspace(task: TaskSpec, port: int, config: HarnessConfig) -> Workspace:
    """Pristine per-run directory: repo/ (the code tree) + meta/ (logs, prompts)."""
    if config.workspace_root:
        Path(config.workspace_root).mkdir(parents=True, exist_ok=True)
    base = Path(tempfile.mkdtemp(prefix=f"cb-{task.id[:40]}-", dir=config.workspace_root))
    root = base / "repo"
    meta = base / "meta"
    root.mkdir()
    meta.mkdir()

    if task.kind == "feature":
        clone = _git(["clone", "-q", task.repo_ref["url"], str(root)], base, check=False)
        if clone.returncode != 0:
            shutil.rmtree(base, ignore_errors=True)
            raise TaskSetupError(f"clone failed: {clone.stderr.strip()}")
        _git(["checkout", "-q", task.repo_ref["commit"]], root)
        _git(["config", "user.email", "harness@localhost"], root)
        _git(["config", "user.name", "harness"], root)
        patch_file = meta / "ablation.diff"
        patch_file.write_text(task.ablation_patch, encoding="utf-8")
        applied = _git(["apply", "--whitespace=nowarn", str(patch_file)], root, check=False)
        if applied.returncode != 0:
            shutil.rmtree(base, ignore_errors=True)
            raise TaskSetupError(f"ablation patch failed to apply: {applied.stderr.strip()}")
        shutil.rmtree(root / ".git", ignore_errors=True)

    _init_repo(root)
    _git(["add", "-A"], root)
    _git(["commit", "-q", "--allow-empty", "-m", "baseline"], root)
    baseline = _git(["rev-parse", "HEAD"], root).stdout.strip()
    return Workspace(root=root, meta=meta, baseline_ref=baseline, port=port)


def _run_env(workspace: Workspace, config: HarnessConfig) -> dict:
    env = dict(os.environ)
    env["PORT"] = str(workspace.port)
    if config.pg_url:
        env["PG_URL"] = config.pg_url
    return env


def _extract_diff(workspace: Workspace) -> str:
    _git(["add", "-A"], workspace.root)
    diff = _git(
        ["diff", "--cached", "--no-color", "--no-ext-diff", workspace.baseline_ref],
        workspace.root,
    ).stdout
    return filter_excluded_sections(diff)


def build_phase(
    task: TaskSpec,
    provider: PatchProvider,
    trial: int = 0,
    config: HarnessConfig | None = None,
) -> BuildResult:
    """Produce the diff for one (task, trial): replay a recorded file, or run
    the provider command in a prepared workspace and capture its changes."""
    config = config or HarnessConfig.from_env()

    if provider.kind == "recorded_directory":
        diff_path = provider.recorded_diff_path(task.id, trial)
        tokens_path = diff_path.with_suffix(diff_path.suffix + ".tokens.json")
        token_usage = None
        if tokens_path.exists():
            token_usage = json.loads(tokens_path.read_text())
        return BuildResult(
            diff_text=diff_path.read_text(encoding="utf-8"),
            logs=f"recorded diff: {diff_path}",
            token_usage=token_usage,
        )

    workspace = _make_workspace(task, port=config.port_pool[0], config=config)
    try:
        (workspace.meta / "task.json").write_text(task.to_json(), encoding="utf-8")
        (workspace.meta / "prompt.txt").write_text(task.prompt, encoding="utf-8")
        env = _run_env(workspace, config)
        env["TASK_ID"] = task.id
        env["TASK_FILE"] = str(workspace.meta / "task.json")
        env["TASK_PROMPT_FILE"] = str(workspace.meta / "prompt.txt")
        completed = subprocess.run(
            provider.location, shell=True, cwd=workspace.root,
            capture_output=True, text=True, env=env, timeout=config.provider_timeout,
        )
        logs = (
            f"provider exit={completed.returncode}\n"
            f"--- stdout ---\n{completed.stdout}\n--- stderr ---\n{completed.stderr}"
        )
        return BuildResult(diff_text=_extract_diff(workspace), logs=logs)
    finally:
        workspace.destroy()


def _terminate(process: subprocess.Popen, grace: float):
    if process.poll() is not None:
        return
    try:
        os.killpg(process.pid, signal.SIGTERM)
    except (ProcessLookupError, PermissionError):
        return
    deadline = time.monotonic() + grace
    while time.monotonic() < deadline:
        if process.poll() is not None:
            return
        time.sleep(0.05)
    try:
        os.killpg(process.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    process.wait()


def evaluate_phase(
    task: TaskSpec,
    diff_text: str,
    collection: TestCollection,
    config: HarnessConfig | None = None,
    trial: int = 0,
    token_usage: dict | None = None,
    labels: dict | None = None,
    port: int | None = None,
) -> RunRecord:
    """Apply the patch to a pristine workspace, run the server, test, verify."""
    config = config or HarnessConfig.from_env()
    started_at = time.monotonic()
    log_parts: list[str] = []

    try:
        patch_doc = apply_exclusions(parse_patch(diff_text))
    except PatchParseError as exc:
        log_parts.append(f"patch parse error: {exc}")
        patch_doc = PatchDocument()
    compliant, reports = structural_compliance(task, patch_doc, config.aliases)

    record = RunRecord(
        task_id=task.id,
        trial=trial,
        patch=patch_doc,
        patch_applied=False,
        server_started=False,
        health_ok=False,
        suite=unreachable_result(collection, "not run"),
        verifier_reports=reports,
        structurally_compliant=compliant,
        token_usage=token_usage,
        task_summary=_task_summary(task),
        labels=dict(labels or {}),
    )

    if task.constraints.database == "postgres" and not config.pg_url:
        record.environment_skipped = True
        record.suite = unreachable_result(
            collection, "environment-skipped: no PostgreSQL target configured (set PG_URL)"
        )
        record.logs = "environment-skipped: postgres task without PG_URL"
        record.wall_time = time.monotonic() - started_at
        return record

    try:
        workspace = _make_workspace(task, port=port or config.port_pool[0], config=config)
    except TaskSetupError as exc:
        record.setup_error = True
        record.logs = f"task setup error: {exc}"
        record.suite = unreachable_result(collection, "task setup error")
        record.wall_time = time.monotonic() - started_at
        return record

    process = None
    try:
        if diff_text.strip():
            patch_file = workspace.meta / "changes.diff"
            patch_file.write_text(diff_text, encoding="utf-8")
            applied = _git(
                ["apply", "--whitespace=nowarn", str(patch_file)], workspace.root, check=False
            )
            record.patch_applied = applied.returncode == 0
            if not record.patch_applied:
                log_parts.append(f"git apply failed: {applied.stderr.strip()}")
        else:
            record.patch_applied = True
            log_parts.append("empty diff: nothing to apply")

        env = _run_env(workspace, config)
        if record.patch_applied:
            for command in task.setup_commands:
                try:
                    completed = subprocess.run(
                        command, shell=True, cwd=workspace.root, env=env,
                        capture_output=True, text=True, timeout=config.setup_timeout,
                    )
                    log_parts.append(
                        f"setup `{command}` exit={completed.returncode}\n"
                        f"{completed.stdout}{completed.stderr}"
                    )
                except subprocess.TimeoutExpired:
                    log_parts.append(f"setup `{command}` timed out")

            run_script = workspace.root / "run.sh"
            if run_script.exists():
                with open(workspace.server_log, "wb") as log_handle:
                    process = subprocess.Popen(
                        ["bash", "run.sh"], cwd=workspace.root, env=env,
                        stdout=log_handle, stderr=subprocess.STDOUT,
                        start_new_session=True,
                    )
                record.server_started = True
                base_url = f"http://127.0.0.1:{workspace.port}/api"
                record.health_ok = poll_health(
                    base_url,
                    interval=config.health_interval,
                    max_attempts=config.health_max_attempts,
                    total_timeout=config.health_total_timeout,
                )
                if record.health_ok:
                    record.suite = run_suite(
                        collection, base_url, request_timeout=config.request_timeout
                    )
                else:
                    record.suite = unreachable_result(collection, "server unreachable")
            else:
                log_parts.append("no run.sh in patched tree; server not started")
                record.suite = unreachable_result(collection, "server unreachable")
        else:
            record.suite = unreachable_result(collection, "patch failed to apply")
    finally:
        if process is not None:
            _terminate(process, config.shutdown_grace)
        if workspace.server_log.exists():
            log_parts.append("--- server log ---")
            log_parts.append(
                workspace.server_log.read_text(encoding="utf-8", errors="replace")[-20000:]
            )
        workspace.destroy()

    record.logs = "\n".join(log_parts)
    record.wall_time = time.monotonic() - started_at
    return record


def run_one(
    task: TaskSpec,
    provider: PatchProvider,
    collection: TestCollection,
    trial: int,
    config: HarnessConfig,
    labels: dict | None = None,
    port: int | None = None,
) -> RunRecord:
    """build_phase + evaluate_phase with per-run error containment."""
    try:
        build = build_phase(task, provider, trial=trial, config=config)
    except TaskSetupError as exc:
        record = RunRecord(
            task_id=task.id,
            trial=trial,
            patch=PatchDocument(),
            patch_applied=False,
            server_started=False,
            health_ok=False,
            suite=unreachable_result(collection, "task setup error"),
            verifier_reports=[],
            structurally_compliant=False,
            logs=f"task setup error: {exc}",
            setup_error=True,
            task_summary=_task_summary(task),
            labels=dict(labels or {}),
        )
        compliant, reports = structural_compliance(task, record.patch, config.aliases)
        record.verifier_reports = reports
        record.structurally_compliant = compliant
        return record
    return evaluate_phase(
        task,
        build.diff_text,
        collection,
        config=config,
        trial=trial,
        token_usage=build.token_usage,
        labels=labels,
        port=port,
    )


def run_campaign(
    tasks: list[TaskSpec],
    provider: PatchProvider,
    trials: int,
    collection: TestCollection,
    config: HarnessConfig | None = None,
    out_dir: str | Path | None = None,
    labels: dict | None = None,
) -> list[RunRecord]:
    """trials x |tasks| isolated runs in deterministic order.

    Individual run errors never abort the campaign; each failure is folded
    into its RunRecord instead.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = config or HarnessConfig.from_env()
    jobs = [(task, trial) for task in tasks for trial in range(trials)]
    records: list[RunRecord | None] = [None] * len(jobs)

    def execute(index: int) -> None:
        task, trial = jobs[index]
        port = config.port_pool[index % len(config.port_pool)]
        try:
            records[index] = run_one(
                task, provider, collection, trial, config, labels=labels, port=port
            )
        except Exception as exc:  # run containment: campaign must survive anything
            logger.exception("run crashed: %s trial %s", task.id, trial)
            records[index] = RunRecord(
                task_id=task.id,
                trial=trial,
                patch=PatchDocument(),
                patch_applied=False,
                server_started=False,
                health_ok=False,
                suite=unreachable_result(collection, "internal error"),
                verifier_reports=[],
                structurally_compliant=False,
                logs=f"internal error: {exc!r}",
                task_summary=_task_summary(task),
                labels=dict(labels or {}),
            )

    # concurrent jobs are a window of consecutive indices, so distinct ports
    # are guaranteed as long as the window is no wider than the pool
    workers = min(config.workers, len(config.port_pool))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(execute, range(len(jobs))))
    else:
        for index in range(len(jobs)):
            execute(index)

    results = [record for record in records if record is not None]
    if out_dir is not None:
        write_campaign(results, out_dir, trials=trials, labels=labels)
    return results


def write_campaign(records: list[RunRecord], out_dir, trials: int, labels: dict | None = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for record in records:
        name = f"{record.task_id}_t{record.trial}.json"
        (out / name).write_text(record.to_json(), encoding="utf-8")
        files.append(name)
    index = {
        "trials": trials,
        "labels": dict(labels or {}),
        "tasks": sorted({r.task_id for r in records}),
        "runs": files,
    }
    (out / "campaign.json").write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")


def load_campaign(results_dir) -> list[dict]:
    """Load raw RunRecord dicts from a results directory via its index."""
    results = Path(results_dir)
    index_file = results / "campaign.json"
    if not index_file.exists():
        raise TaskSetupError(f"no campaign index at {index_file}")
    index = json.loads(index_file.read_text())
    return [json.loads((results / name).read_text()) for name in index["runs"]]
