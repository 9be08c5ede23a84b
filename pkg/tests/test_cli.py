"""CLI: subcommands, exit codes per error class, golden markdown export."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from dikwflow.artifacts import (
    Descriptor,
    DescriptorKind,
    EvidenceTemplate,
    Hypothesis,
    KnowledgeTopic,
    Relation,
    WisdomTopic,
    topic_wire,
)
from dikwflow.cli import main

GOLDEN = Path(__file__).parent / "golden" / "portfolio_stage1.md"


def tag(value: str) -> Descriptor:
    return Descriptor(kind=DescriptorKind.TAG, value=value)


def seed_wires() -> list[dict]:
    k = KnowledgeTopic(
        claim=Hypothesis(left=tag("urgency"), relation=Relation.OUTPERFORMS, right=tag("social_proof")),
        required_evidence=(EvidenceTemplate.PAIRWISE_TESTS, EvidenceTemplate.PER_SIDE_RATES),
    )
    w = WisdomTopic(objective="maximize confirmed visit bookings")
    return [topic_wire(k), topic_wire(w)]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Deterministic dataset + seeds file shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "simulate",
            "--out", str(root / "encounters.csv"),
            "--rows", "6000",
            "--seed", "11",
            "--effect", "urgency=0.6",
            "--effect", "social_proof=-0.5",
            "--json",
        ],
    )
    assert result.exit_code == 0, result.output
    (root / "seeds.json").write_text(json.dumps({"seeds": seed_wires()}), encoding="utf-8")
    return root


def invoke(args, **kw):
    return CliRunner().invoke(main, args, **kw)


def roots(root: Path) -> list[str]:
    return ["--runs-root", str(root / "runs"), "--store-root", str(root / "store")]


def run_auto(workspace: Path) -> str:
    result = invoke(
        [
            "run",
            "--dataset", str(workspace / "encounters.csv"),
            "--seeds", str(workspace / "seeds.json"),
            "--auto-approve",
            "--json",
            *roots(workspace),
        ]
    )
    assert result.exit_code == 0, result.output
    return json.loads(result.output)["run_id"]


def test_ingest_reports_fingerprint(workspace):
    result = invoke(["ingest", str(workspace / "encounters.csv"), "--json"])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert len(body["fingerprint"]) == 64
    assert body["rows"] == 6000
    assert "variant" in body["columns"]


def test_ingest_rejects_malformed_csv(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,real\nschema,at,all\n", encoding="utf-8")
    result = invoke(["ingest", str(bad), "--json"])
    assert result.exit_code == 2
    assert json.loads(result.output)["code"] == "ValidationFailed"


def test_simulate_effect_syntax_error(tmp_path):
    result = invoke(
        ["simulate", "--out", str(tmp_path / "x.csv"), "--effect", "urgency", "--json"]
    )
    assert result.exit_code == 2
    assert json.loads(result.output)["code"] == "ValidationFailed"


def test_run_auto_approve_resolves_everything(workspace):
    run_id = run_auto(workspace)
    result = invoke(["topics", "ls", "--run", run_id, "--json", *roots(workspace)])
    assert result.exit_code == 0, result.output
    statuses = {t["status"] for t in json.loads(result.output)["topics"]}
    assert statuses == {"resolved"}


def test_run_rejects_bad_seed_file(workspace, tmp_path):
    bad = tmp_path / "seeds.json"
    bad.write_text('{"seeds": [{"layer": "knowledge"}]}', encoding="utf-8")
    result = invoke(
        [
            "run",
            "--dataset", str(workspace / "encounters.csv"),
            "--seeds", str(bad),
            "--json",
            *roots(tmp_path),
        ]
    )
    assert result.exit_code == 2
    assert json.loads(result.output)["code"] == "ValidationFailed"


def test_topics_ls_plain_and_filtered(workspace):
    run_id = run_auto(workspace)
    result = invoke(["topics", "ls", "--run", run_id, *roots(workspace)])
    assert result.exit_code == 0
    lines = result.output.strip().splitlines()
    assert len(lines) == 6  # 4 info + 1 knowledge + 1 wisdom
    assert all("resolved" in line for line in lines)
    filtered = invoke(
        ["topics", "ls", "--run", run_id, "--status", "failed", "--json", *roots(workspace)]
    )
    assert json.loads(filtered.output)["topics"] == []


def test_topics_ls_unknown_run_exits_not_found(workspace):
    result = invoke(["topics", "ls", "--run", "run-missing", "--json", *roots(workspace)])
    assert result.exit_code == 3
    assert json.loads(result.output)["code"] == "NotFound"


def test_gated_review_flow_through_cli(workspace, tmp_path):
    local = tmp_path / "gated"
    result = invoke(
        [
            "run",
            "--dataset", str(workspace / "encounters.csv"),
            "--seeds", str(workspace / "seeds.json"),
            "--json",
            *roots(local),
        ]
    )
    assert result.exit_code == 0, result.output
    run_id = json.loads(result.output)["run_id"]
    for _ in range(2):  # knowledge gate, then wisdom gate
        listing = invoke(
            ["topics", "ls", "--run", run_id, "--status", "awaiting_approval", "--json", *roots(local)]
        )
        awaiting = json.loads(listing.output)["topics"]
        assert len(awaiting) == 1
        reviewed = invoke(
            [
                "review", awaiting[0]["key"].split("/")[1],
                "--run", run_id,
                "--approve",
                "--actor", "alice",
                "--comment", "fine",
                "--json",
                *roots(local),
            ]
        )
        assert reviewed.exit_code == 0, reviewed.output
    listing = invoke(["topics", "ls", "--run", run_id, "--json", *roots(local)])
    assert {t["status"] for t in json.loads(listing.output)["topics"]} == {"resolved"}


def test_review_resolved_topic_exits_invalid_state(workspace):
    run_id = run_auto(workspace)
    listing = invoke(["topics", "ls", "--run", run_id, "--json", *roots(workspace)])
    knowledge = next(
        t for t in json.loads(listing.output)["topics"] if t["layer"] == "knowledge"
    )
    result = invoke(
        [
            "review", knowledge["key"].split("/")[1],
            "--run", run_id,
            "--approve",
            "--json",
            *roots(workspace),
        ]
    )
    assert result.exit_code == 4
    assert json.loads(result.output)["code"] == "InvalidState"


def test_review_unknown_topic_exits_not_found(workspace):
    run_id = run_auto(workspace)
    result = invoke(
        ["review", "0" * 64, "--run", run_id, "--approve", "--json", *roots(workspace)]
    )
    assert result.exit_code == 3
    assert json.loads(result.output)["code"] == "NotFound"


def test_export_json_portfolio(workspace, tmp_path):
    run_id = run_auto(workspace)
    out = tmp_path / "portfolio.json"
    result = invoke(
        [
            "export", "portfolio",
            "--run", run_id,
            "--format", "json",
            "--out", str(out),
            *roots(workspace),
        ]
    )
    assert result.exit_code == 0, result.output
    portfolios = json.loads(out.read_text(encoding="utf-8"))
    assert len(portfolios[0]["candidates"]) == 20
    assert portfolios[0]["active_count"] == 20


def test_export_portfolio_missing_run(workspace):
    result = invoke(
        ["export", "portfolio", "--run", "run-missing", "--json", *roots(workspace)]
    )
    assert result.exit_code == 3


def test_export_markdown_matches_golden(workspace):
    run_id = run_auto(workspace)
    result = invoke(
        ["export", "portfolio", "--run", run_id, "--format", "md", *roots(workspace)]
    )
    assert result.exit_code == 0, result.output
    assert result.output == GOLDEN.read_text(encoding="utf-8")


def test_candidate_rejection_shows_in_markdown(workspace, tmp_path):
    local = tmp_path / "curate"
    seeds = workspace / "seeds.json"
    result = invoke(
        [
            "run",
            "--dataset", str(workspace / "encounters.csv"),
            "--seeds", str(seeds),
            "--auto-approve",
            "--json",
            *roots(local),
        ]
    )
    run_id = json.loads(result.output)["run_id"]
    listing = invoke(["topics", "ls", "--run", run_id, "--json", *roots(local)])
    wisdom = next(t for t in json.loads(listing.output)["topics"] if t["layer"] == "wisdom")
    reviewed = invoke(
        [
            "review", wisdom["key"].split("/")[1],
            "--run", run_id,
            "--reject",
            "--actor", "bob",
            "--candidate", "exploit01",
            "--json",
            *roots(local),
        ]
    )
    assert reviewed.exit_code == 0, reviewed.output
    md = invoke(
        ["export", "portfolio", "--run", run_id, "--format", "md", *roots(local)]
    )
    rejected_rows = [line for line in md.output.splitlines() if "| rejected |" in line]
    assert len(rejected_rows) == 1
    assert rejected_rows[0].startswith("| exploit01 ")


def test_schema_dump_contains_review_route(tmp_path):
    out = tmp_path / "openapi.json"
    result = invoke(["schema", "--out", str(out)])
    assert result.exit_code == 0, result.output
    spec = json.loads(out.read_text(encoding="utf-8"))
    assert "/topics/{topic_hash}/review" in spec["paths"]
