import json
from pathlib import Path

import pytest

from constraintbench.composer import FRAMEWORKS, ConstraintSet, TaskSpec, task_id
from constraintbench.errors import TaskSetupError
from constraintbench.golden import files_to_diff, golden_patch, write_recorded_tree
from constraintbench.harness import (
    HarnessConfig,
    PatchProvider,
    build_phase,
    evaluate_phase,
    load_campaign,
    run_campaign,
)
from constraintbench.suite import load_collection

from conftest import run_git, write_tree

MINI_COLLECTION = json.dumps(
    {
        "name": "mini",
        "folders": [
            {
                "name": "Health",
                "requests": [
                    {
                        "name": "health",
                        "method": "GET",
                        "path": "/health-check",
                        "assertions": [
                            {"kind": "status_code", "expect": 200},
                            {"kind": "property_presence", "target": "status"},
                        ],
                    }
                ],
            }
        ],
    }
)


@pytest.fixture
def mini_collection():
    return load_collection(MINI_COLLECTION)


@pytest.fixture
def config(tmp_path):
    return HarnessConfig(
        port_pool=[8101, 8102, 8103],
        health_interval=0.15,
        health_max_attempts=25,
        health_total_timeout=20,
        workspace_root=str(tmp_path / "ws"),
        pg_url=None,
    )


@pytest.fixture
def flask_l0():
    framework = FRAMEWORKS["flask"]
    constraints = ConstraintSet()
    return TaskSpec(
        id=task_id(framework, constraints), kind="generation", framework=framework,
        constraints=constraints, level=0, prompt="build it", setup_commands=[],
    )


def make_workspace_root(tmp_path):
    root = tmp_path / "ws"
    root.mkdir(exist_ok=True)
    return root


def test_provider_parse():
    recorded = PatchProvider.parse("recorded:patches/")
    assert recorded.kind == "recorded_directory" and recorded.location == "patches/"
    command = PatchProvider.parse("command:python3 agent.py --fast")
    assert command.kind == "external_command"
    with pytest.raises(ValueError):
        PatchProvider.parse("magic:stuff")


def test_recorded_provider_is_byte_exact_passthrough(tmp_path, flask_l0, config):
    diff = golden_patch("layered")
    (tmp_path / f"{flask_l0.id}.diff").write_text(diff)
    provider = PatchProvider("recorded_directory", str(tmp_path))
    result = build_phase(flask_l0, provider, trial=0, config=config)
    assert result.diff_text == diff


def test_recorded_provider_prefers_per_trial_file(tmp_path, flask_l0, config):
    base = tmp_path / flask_l0.id
    base.mkdir()
    (base / "trial0.diff").write_text("trial zero\n")
    (base / "trial1.diff").write_text("trial one\n")
    provider = PatchProvider("recorded_directory", str(tmp_path))
    assert build_phase(flask_l0, provider, trial=1, config=config).diff_text == "trial one\n"


def test_recorded_provider_missing_diff_is_setup_error(tmp_path, flask_l0, config):
    provider = PatchProvider("recorded_directory", str(tmp_path))
    with pytest.raises(TaskSetupError):
        build_phase(flask_l0, provider, trial=0, config=config)


def test_recorded_provider_token_passthrough(tmp_path, flask_l0, config):
    (tmp_path / f"{flask_l0.id}.diff").write_text("x\n")
    (tmp_path / f"{flask_l0.id}.diff.tokens.json").write_text(
        '{"input": 123, "output": 45}'
    )
    provider = PatchProvider("recorded_directory", str(tmp_path))
    result = build_phase(flask_l0, provider, trial=0, config=config)
    assert result.token_usage == {"input": 123, "output": 45}


def test_command_provider_diff_extraction(flask_l0, config):
    provider = PatchProvider(
        "external_command",
        "mkdir -p src && printf 'created = True\\n' > src/app.py",
    )
    result = build_phase(flask_l0, provider, trial=0, config=config)
    assert "diff --git a/src/app.py b/src/app.py" in result.diff_text
    assert "+created = True" in result.diff_text
    assert "provider exit=0" in result.logs


def test_command_provider_nonzero_exit_still_extracts(flask_l0, config):
    provider = PatchProvider(
        "external_command",
        "printf 'x = 1\\n' > half_done.py; exit 3",
    )
    result = build_phase(flask_l0, provider, trial=0, config=config)
    assert "provider exit=3" in result.logs
    assert "+x = 1" in result.diff_text


def test_command_provider_node_modules_only_yields_empty_diff(flask_l0, config):
    provider = PatchProvider(
        "external_command",
        "mkdir -p node_modules/pg && printf 'module.exports = 1;\\n' > node_modules/pg/index.js",
    )
    result = build_phase(flask_l0, provider, trial=0, config=config)
    assert result.diff_text.strip() == ""


def test_evaluate_golden_layered_l3(conduit_collection, config):
    framework = FRAMEWORKS["flask"]
    constraints = ConstraintSet(architecture=True, database="sqlite", orm=True)
    task = TaskSpec(
        id=task_id(framework, constraints), kind="generation", framework=framework,
        constraints=constraints, level=3, prompt="p", setup_commands=[],
    )
    record = evaluate_phase(task, golden_patch("layered"), conduit_collection, config=config)
    assert record.patch_applied and record.server_started and record.health_ok
    assert record.suite.assertions_passed == 291
    assert record.structurally_compliant is True
    assert record.full_pass is True
    assert [r.axis for r in record.verifier_reports] == ["architecture", "database", "orm"]


def test_evaluate_runs_setup_commands(mini_collection, config, tmp_path, flask_l0):
    marker = tmp_path / "setup-ran.txt"
    task = TaskSpec(
        id=flask_l0.id, kind="generation", framework=flask_l0.framework,
        constraints=flask_l0.constraints, level=0, prompt="p",
        setup_commands=[f"echo ran > {marker}"],
    )
    record = evaluate_phase(task, golden_patch("layered"), mini_collection, config=config)
    assert marker.read_text().strip() == "ran"
    assert record.health_ok


def test_evaluate_crashing_run_script(mini_collection, config, flask_l0):
    diff = files_to_diff(
        {
            "run.sh": ("#!/bin/sh\nexit 7\n", True),
            "app.py": ("x = 1\n", False),
        }
    )
    record = evaluate_phase(flask_l0, diff, mini_collection, config=config)
    assert record.patch_applied is True
    assert record.server_started is True
    assert record.health_ok is False
    assert record.suite.assertions_passed == 0
    assert record.suite.assertions_total == 2


def test_evaluate_invalid_diff_recorded_not_crashed(mini_collection, config, flask_l0):
    record = evaluate_phase(flask_l0, "diff --git a/x b/x\n@@ nonsense", mini_collection,
                            config=config)
    assert record.patch_applied is False
    assert record.suite.assertions_passed == 0
    assert record.structurally_compliant is True  # L0: no applicable verifiers


def test_evaluate_missing_run_script(mini_collection, config, flask_l0):
    diff = files_to_diff({"app.py": ("x = 1\n", False)})
    record = evaluate_phase(flask_l0, diff, mini_collection, config=config)
    assert record.patch_applied is True
    assert record.server_started is False
    assert record.health_ok is False


def test_postgres_task_without_target_is_environment_skipped(mini_collection, config):
    framework = FRAMEWORKS["flask"]
    constraints = ConstraintSet(database="postgres")
    task = TaskSpec(
        id=task_id(framework, constraints), kind="generation", framework=framework,
        constraints=constraints, level=1, prompt="p", setup_commands=[],
    )
    record = evaluate_phase(task, golden_patch("layered"), mini_collection, config=config)
    assert record.environment_skipped is True
    assert record.server_started is False
    assert record.full_pass is False


def test_verifiers_run_even_when_server_never_starts(config, mini_collection):
    framework = FRAMEWORKS["flask"]
    constraints = ConstraintSet(architecture=True, database="sqlite", orm=True)
    task = TaskSpec(
        id=task_id(framework, constraints), kind="generation", framework=framework,
        constraints=constraints, level=3, prompt="p", setup_commands=[],
    )
    diff = files_to_diff(
        {
            "routes/r.py": ("from services.s import f\n", False),
            "services/s.py": ("def f():\n    pass\n", False),
            "models/m.py": ("import sqlite3\nURL = 'sqlite:///x.db'\n", False),
            "requirements.txt": ("sqlalchemy\n", False),
        }
    )
    record = evaluate_phase(task, diff, mini_collection, config=config)
    assert record.server_started is False
    assert len(record.verifier_reports) == 3
    assert record.structurally_compliant is True


def test_campaign_counts_and_index(tmp_path, mini_collection, config, flask_l0):
    patches = tmp_path / "patches"
    write_recorded_tree(patches, {flask_l0.id: "layered"})
    provider = PatchProvider("recorded_directory", str(patches))
    out = tmp_path / "results"
    records = run_campaign(
        [flask_l0], provider, trials=3, collection=mini_collection,
        config=config, out_dir=out, labels={"agent": "replay", "model": "golden"},
    )
    assert len(records) == 3
    assert [r.trial for r in records] == [0, 1, 2]
    index = json.loads((out / "campaign.json").read_text())
    assert index["trials"] == 3
    assert len(index["runs"]) == 3
    loaded = load_campaign(out)
    assert {r["task_id"] for r in loaded} == {flask_l0.id}


def test_campaign_run_counts_match_tasks_times_trials(tmp_path, mini_collection, config):
    # 16 tasks x 3 trials -> 48 records, in task-major deterministic order.
    # The provider directory is empty, so every run takes the cheap
    # setup-error path; the counting logic is what matters here.
    from constraintbench.composer import enumerate_variants

    frameworks = [FRAMEWORKS[name] for name in ("aiohttp", "fastapi", "express", "fastify")]
    tasks = [t for t in enumerate_variants(frameworks) if t.constraints.database != "postgres"][:16]
    assert len(tasks) == 16
    provider = PatchProvider("recorded_directory", str(tmp_path / "void"))
    records = run_campaign(tasks, provider, trials=3, collection=mini_collection, config=config)
    assert len(records) == 48
    assert [(r.task_id, r.trial) for r in records] == [
        (task.id, trial) for task in tasks for trial in range(3)
    ]


def test_campaign_zero_tasks():
    provider = PatchProvider("recorded_directory", "/nonexistent")
    collection = load_collection(MINI_COLLECTION)
    assert run_campaign([], provider, trials=3, collection=collection,
                        config=HarnessConfig()) == []


def test_campaign_survives_missing_recorded_diff(tmp_path, mini_collection, config, flask_l0):
    provider = PatchProvider("recorded_directory", str(tmp_path / "empty"))
    records = run_campaign([flask_l0], provider, trials=2, collection=mini_collection,
                           config=config)
    assert len(records) == 2
    assert all(r.setup_error for r in records)
    assert all(not r.full_pass for r in records)


def test_load_campaign_missing_index(tmp_path):
    with pytest.raises(TaskSetupError):
        load_campaign(tmp_path)


def test_campaign_leaves_no_workspace_behind(tmp_path, mini_collection, config, flask_l0):
    patches = tmp_path / "patches"
    write_recorded_tree(patches, {flask_l0.id: "layered"})
    provider = PatchProvider("recorded_directory", str(patches))
    run_campaign([flask_l0], provider, trials=2, collection=mini_collection, config=config)
    ws_root = Path(config.workspace_root)
    assert not ws_root.exists() or list(ws_root.iterdir()) == []


def test_evaluate_composed_task_with_default_setup(mini_collection, config):
    # the composer's default python setup command is a pip no-op here because
    # the golden requirements line is unpinned and already satisfied
    from constraintbench.composer import enumerate_variants

    task = enumerate_variants([FRAMEWORKS["flask"]])[8]  # arch+sqlite+orm
    assert task.setup_commands == ["pip install -r requirements.txt"]
    record = evaluate_phase(task, golden_patch("layered"), mini_collection, config=config)
    assert record.health_ok is True
    assert record.structurally_compliant is True
    assert "pip install" in record.logs


def test_campaign_parallel_workers(tmp_path, conduit_collection, flask_l0):
    config = HarnessConfig(
        port_pool=[8131, 8132], workers=2,
        health_interval=0.15, health_max_attempts=40, health_total_timeout=30,
        workspace_root=str(tmp_path / "ws"),
    )
    patches = tmp_path / "patches"
    write_recorded_tree(patches, {flask_l0.id: "layered"})
    provider = PatchProvider("recorded_directory", str(patches))
    records = run_campaign([flask_l0], provider, trials=4, collection=conduit_collection,
                           config=config)
    assert len(records) == 4
    assert [r.trial for r in records] == [0, 1, 2, 3]
    assert all(r.suite.assertions_passed == 291 for r in records)


# -- feature tasks over a local fixture repository ------------------------------


def make_feature_fixture(tmp_path):
    """A tiny upstream repo plus an ablation patch that strips one function."""
    upstream = tmp_path / "upstream"
    upstream.mkdir()
    run_git(["init", "-q"], upstream)
    run_git(["config", "user.email", "t@example.com"], upstream)
    run_git(["config", "user.name", "t"], upstream)
    full = {
        "lib/feature.py": "def greet():\n    return 'hello'\n\n\ndef farewell():\n    return 'bye'\n",
        "README.md": "fixture repo\n",
    }
    write_tree(upstream, full)
    run_git(["add", "-A"], upstream)
    run_git(["commit", "-q", "-m", "full implementation"], upstream)
    commit = run_git(["rev-parse", "HEAD"], upstream).strip()

    stripped = "def greet():\n    return 'hello'\n"
    write_tree(upstream, {"lib/feature.py": stripped})
    run_git(["add", "-A"], upstream)
    ablation = run_git(["diff", "--cached", "--no-color", "HEAD"], upstream)
    run_git(["checkout", "-q", "--", "."], upstream)
    run_git(["reset", "-q", "HEAD", "lib/feature.py"], upstream)
    run_git(["checkout", "-q", "--", "lib/feature.py"], upstream)
    return upstream, commit, ablation


def make_feature_task(url, commit, ablation):
    framework = FRAMEWORKS["flask"]
    return TaskSpec(
        id="flask-feature-farewell", kind="feature", framework=framework,
        constraints=ConstraintSet(), level=0, prompt="restore farewell",
        setup_commands=[], ablation_patch=ablation,
        repo_ref={"url": url, "commit": commit},
    )


def test_feature_build_phase_diff_contains_only_provider_changes(tmp_path, config):
    upstream, commit, ablation = make_feature_fixture(tmp_path)
    task = make_feature_task(str(upstream), commit, ablation)
    restore = (
        "printf '\\n\\ndef farewell():\\n    return \"bye\"\\n' >> lib/feature.py"
        " && printf 'marker = 1\\n' > lib/extra.py"
    )
    provider = PatchProvider("external_command", restore)
    result = build_phase(task, provider, trial=0, config=config)
    assert "+def farewell():" in result.diff_text
    assert "+marker = 1" in result.diff_text
    # the pre-stripped content is baseline, not part of the provider's diff
    assert "+def greet():" not in result.diff_text


def test_feature_ablation_failure_is_task_setup_error(tmp_path, config):
    upstream, commit, _ = make_feature_fixture(tmp_path)
    bogus = "diff --git a/nope.py b/nope.py\n--- a/nope.py\n+++ b/nope.py\n@@ -1,1 +1,1 @@\n-x\n+y\n"
    task = make_feature_task(str(upstream), commit, bogus)
    provider = PatchProvider("external_command", "true")
    with pytest.raises(TaskSetupError, match="ablation"):
        build_phase(task, provider, trial=0, config=config)


def test_feature_evaluate_applies_ablation_then_patch(tmp_path, mini_collection, config):
    upstream, commit, ablation = make_feature_fixture(tmp_path)
    task = make_feature_task(str(upstream), commit, ablation)
    # agent patch: restore farewell() and add a run script that proves the
    # workspace saw ablation-then-patch layering
    agent_patch = files_to_diff(
        {
            "run.sh": (
                "#!/bin/sh\n"
                "python3 -c \"from lib.feature import greet, farewell; print(greet(), farewell())\""
                " > outcome.txt 2>&1\n"
                "exec python3 -m http.server ${PORT}\n",
                True,
            ),
            "lib/feature_restored.py": ("def farewell():\n    return 'bye'\n", False),
            "lib/__init__.py": ("", False),
        }
    )
    record = evaluate_phase(task, agent_patch, mini_collection, config=config)
    assert record.patch_applied is True
    assert record.server_started is True
