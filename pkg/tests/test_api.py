"""HTTP API: endpoints, error envelope, auth, API-vs-CLI route equivalence."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from dikwflow.api import create_app
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
from dikwflow.cli import main as cli_main
from dikwflow.dataset import builtin_catalog
from dikwflow.simulator import default_demographics, generate, model_from_catalog


def tag(value: str) -> Descriptor:
    return Descriptor(kind=DescriptorKind.TAG, value=value)


def k_topic() -> KnowledgeTopic:
    return KnowledgeTopic(
        claim=Hypothesis(left=tag("urgency"), relation=Relation.OUTPERFORMS, right=tag("social_proof")),
        required_evidence=(EvidenceTemplate.PAIRWISE_TESTS, EvidenceTemplate.PER_SIDE_RATES),
    )


def w_topic() -> WisdomTopic:
    return WisdomTopic(objective="maximize confirmed visit bookings")


@pytest.fixture(scope="module")
def dataset_csv(tmp_path_factory):
    catalog = builtin_catalog("stage1")
    model = model_from_catalog(
        catalog, strategy_effects={"urgency": 0.6, "social_proof": -0.5}, seed=11
    )
    table = generate(model, 6000, default_demographics())
    path = tmp_path_factory.mktemp("data") / "encounters.csv"
    table.to_csv(path)
    return str(path)


def run_body(dataset_csv: str, **kw) -> dict:
    body = {
        "dataset_path": dataset_csv,
        "catalog_ref": "stage1",
        "seeds": [topic_wire(k_topic()), topic_wire(w_topic())],
    }
    body.update(kw)
    return body


def make_client(tmp_path, subdir: str = "svc", token: str | None = None) -> TestClient:
    app = create_app(tmp_path / subdir / "runs", tmp_path / subdir / "store", token=token)
    return TestClient(app, raise_server_exceptions=False)


def assert_api_error(response, code: str):
    body = response.json()
    assert set(body) == {"code", "message", "detail"}
    assert body["code"] == code
    assert isinstance(body["message"], str) and body["message"]


def test_healthz(tmp_path):
    client = make_client(tmp_path)
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_create_run_drives_to_first_gate(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    response = client.post("/runs", json=run_body(dataset_csv))
    assert response.status_code == 201
    body = response.json()
    assert body["run_id"].startswith("run-")
    counts = body["snapshot"]["status_counts"]
    assert counts.get("awaiting_approval") == 1  # knowledge topic at its gate
    assert counts.get("resolved") == 4  # evidence resolved unattended


def test_create_run_unknown_dataset_path(tmp_path):
    client = make_client(tmp_path)
    response = client.post(
        "/runs", json={"dataset_path": "/no/such.csv", "catalog_ref": "stage1", "seeds": []}
    )
    assert response.status_code == 400
    assert_api_error(response, "ValidationFailed")


def test_create_run_missing_fields(tmp_path):
    client = make_client(tmp_path)
    response = client.post("/runs", json={"catalog_ref": "stage1"})
    assert response.status_code == 400
    assert_api_error(response, "ValidationFailed")


def test_create_run_bad_seed_wire(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    response = client.post(
        "/runs", json=run_body(dataset_csv, seeds=[{"layer": "knowledge"}])
    )
    assert response.status_code == 400
    assert_api_error(response, "ValidationFailed")


def test_get_run_snapshot_and_unknown_run(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    response = client.get(f"/runs/{run_id}")
    assert response.status_code == 200
    assert response.json()["run_id"] == run_id
    missing = client.get("/runs/run-nope")
    assert missing.status_code == 404
    assert_api_error(missing, "NotFound")


def test_review_queue_filter_accepts_camel_case(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    response = client.get(f"/runs/{run_id}/topics", params={"status": "AwaitingApproval"})
    assert response.status_code == 200
    topics = response.json()["topics"]
    assert len(topics) == 1
    item = topics[0]
    assert item["layer"] == "knowledge"
    assert item["status"] == "awaiting_approval"
    # evidence preview: resolved statistics are on the table for the reviewer
    assert len(item["evidence"]) == 4
    assert all(e["result"] for e in item["evidence"])


def test_approve_returns_ready_then_resolves(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    queue = client.get(f"/runs/{run_id}/topics", params={"status": "awaiting_approval"}).json()["topics"]
    topic_hash = queue[0]["hash"]
    response = client.post(
        f"/topics/{topic_hash}/review",
        json={"action": "approve", "actor": "ops", "comment": "ship it", "run_id": run_id},
    )
    assert response.status_code == 200
    assert response.json()["topic"]["status"] == "ready"
    after = client.get(f"/runs/{run_id}/topics").json()["topics"]
    status = {t["hash"]: t["status"] for t in after}
    assert status[topic_hash] == "resolved"


def test_review_errors(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    info_hash = next(
        t["hash"]
        for t in client.get(f"/runs/{run_id}/topics").json()["topics"]
        if t["layer"] == "information"
    )
    response = client.post(
        f"/topics/{info_hash}/review", json={"action": "approve", "actor": "ops"}
    )
    assert response.status_code == 409
    assert_api_error(response, "InvalidState")

    response = client.post(
        f"/topics/{'0' * 64}/review", json={"action": "approve", "actor": "ops"}
    )
    assert response.status_code == 404
    assert_api_error(response, "NotFound")

    response = client.post(
        f"/topics/{info_hash}/review", json={"action": "bless", "actor": "ops"}
    )
    assert response.status_code == 400
    assert_api_error(response, "ValidationFailed")

    response = client.post(f"/topics/{info_hash}/review", json={"action": "approve"})
    assert response.status_code == 400
    assert_api_error(response, "ValidationFailed")


def approve_until_done(client: TestClient, run_id: str, actor: str = "ops") -> None:
    for _ in range(20):
        queue = client.get(
            f"/runs/{run_id}/topics", params={"status": "awaiting_approval"}
        ).json()["topics"]
        if not queue:
            return
        for item in queue:
            response = client.post(
                f"/topics/{item['hash']}/review",
                json={"action": "approve", "actor": actor, "run_id": run_id},
            )
            assert response.status_code == 200
    raise AssertionError("run never quiesced")


def test_portfolio_endpoint_and_candidate_review(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    early = client.get(f"/runs/{run_id}/portfolio")
    assert early.status_code == 404
    assert_api_error(early, "NotFound")

    approve_until_done(client, run_id)
    response = client.get(f"/runs/{run_id}/portfolio")
    assert response.status_code == 200
    portfolio = response.json()["portfolios"][0]
    assert len(portfolio["candidates"]) == 20
    assert portfolio["active_count"] == 20
    assert all(c["constraint_report"] for c in portfolio["candidates"])

    wisdom_hash = portfolio["topic"].split("/")[1]
    name = portfolio["candidates"][0]["name"]
    response = client.post(
        f"/topics/{wisdom_hash}/review",
        json={"action": "reject", "actor": "ops", "comment": "tone", "candidate": name, "run_id": run_id},
    )
    assert response.status_code == 200
    updated = client.get(f"/runs/{run_id}/portfolio").json()["portfolios"][0]
    assert updated["active_count"] == 19
    assert updated["rejected_count"] == 1


def test_artifact_endpoint(tmp_path, dataset_csv):
    client = make_client(tmp_path)
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    info = next(
        t
        for t in client.get(f"/runs/{run_id}/topics").json()["topics"]
        if t["layer"] == "information"
    )
    response = client.get(f"/artifacts/{info['hash']}")
    assert response.status_code == 200
    artifact = response.json()
    assert artifact["topic_id"]["hash"] == info["hash"]
    assert "payload" in artifact and "provenance" in artifact

    missing = client.get(f"/artifacts/{'f' * 64}")
    assert missing.status_code == 404
    assert_api_error(missing, "NotFound")


def test_registry_loads_runs_from_disk(tmp_path, dataset_csv):
    first = make_client(tmp_path)
    run_id = first.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    second = make_client(tmp_path)  # same roots, fresh process state
    response = second.get(f"/runs/{run_id}")
    assert response.status_code == 200
    assert run_id in second.get("/runs").json()["runs"]


def test_bearer_token_guard(tmp_path, dataset_csv):
    client = make_client(tmp_path, subdir="auth", token="s3cret")
    assert client.get("/healthz").status_code == 200
    denied = client.post("/runs", json=run_body(dataset_csv))
    assert denied.status_code == 401
    assert denied.json()["code"] == "ValidationFailed"
    allowed = client.post(
        "/runs", json=run_body(dataset_csv), headers={"Authorization": "Bearer s3cret"}
    )
    assert allowed.status_code == 201


def test_static_console_mount(tmp_path):
    bundle = tmp_path / "dist"
    bundle.mkdir()
    (bundle / "index.html").write_text("<!doctype html><div id=app></div>", encoding="utf-8")
    app = create_app(
        tmp_path / "runs", tmp_path / "store", token="s3cret", static_dir=bundle
    )
    client = TestClient(app, raise_server_exceptions=False)
    # the shell loads without a token; the API still demands one
    assert client.get("/", follow_redirects=False).status_code in (302, 307)
    page = client.get("/ui/")
    assert page.status_code == 200
    assert "id=app" in page.text
    assert client.get("/runs").status_code == 401


def test_openapi_description_is_served(tmp_path):
    client = make_client(tmp_path)
    response = client.get("/openapi.json")
    assert response.status_code == 200
    paths = response.json()["paths"]
    for path in (
        "/runs",
        "/runs/{run_id}",
        "/runs/{run_id}/topics",
        "/runs/{run_id}/portfolio",
        "/topics/{topic_hash}/review",
        "/artifacts/{topic_hash}",
        "/healthz",
    ):
        assert path in paths


def test_api_run_equals_cli_run_byte_for_byte(tmp_path, dataset_csv):
    # one pipeline, two doors: the portfolios must match exactly
    seeds_path = tmp_path / "seeds.json"
    seeds_path.write_text(
        json.dumps({"seeds": [topic_wire(k_topic()), topic_wire(w_topic())]}),
        encoding="utf-8",
    )
    cli_dir = tmp_path / "cli"
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "run",
            "--dataset", dataset_csv,
            "--catalog", "stage1",
            "--seeds", str(seeds_path),
            "--auto-approve",
            "--runs-root", str(cli_dir / "runs"),
            "--store-root", str(cli_dir / "store"),
            "--json",
        ],
    )
    assert result.exit_code == 0, result.output
    cli_run_id = json.loads(result.output)["run_id"]
    export = runner.invoke(
        cli_main,
        [
            "export", "portfolio",
            "--run", cli_run_id,
            "--format", "json",
            "--runs-root", str(cli_dir / "runs"),
            "--store-root", str(cli_dir / "store"),
        ],
    )
    assert export.exit_code == 0, export.output
    cli_portfolios = json.loads(export.output)

    client = make_client(tmp_path, subdir="api")
    run_id = client.post("/runs", json=run_body(dataset_csv)).json()["run_id"]
    approve_until_done(client, run_id)
    api_portfolios = client.get(f"/runs/{run_id}/portfolio").json()["portfolios"]

    as_bytes = lambda p: json.dumps(p, sort_keys=True).encode()
    assert as_bytes(cli_portfolios) == as_bytes(api_portfolios)
