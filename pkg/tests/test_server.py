"""HTTP API behavior, including the reference-hiding contract."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from rac.annotation import AnnotationService, AnnotationStore
from rac.corpus import CodeTitle, CodeTitleTable, Document
from rac.server import create_app


@pytest.fixture
def setup(tmp_path):
    table = CodeTitleTable([
        CodeTitle("427.81", "Sinoatrial node dysfunction", "Sinus node dysfunc"),
        CodeTitle("008.45", "Intestinal infection due to Clostridium difficile", "C diff"),
        CodeTitle("041.3", "Klebsiella pneumoniae infection", "Klebsiella"),
    ])
    docs = [
        Document.make("n1", "bradycardia with sinus pauses", ["427.81"]),
        Document.make("n2", "severe diarrhea after antibiotics", ["008.45"]),
        Document.make("n3", "fever and productive cough", ["041.3", "427.81"]),
    ]
    store = AnnotationStore(tmp_path / "annotations.jsonl")
    service = AnnotationService([d.id for d in docs], table, store, seed=1)
    scores = {
        "n1": np.array([0.9, 0.1, 0.2]),
        "n2": np.array([0.2, 0.8, 0.1]),
        "n3": np.array([0.7, 0.1, 0.9]),
    }
    app = create_app(docs, table, service, model_scores=scores, threshold=0.5)
    return TestClient(app), service, docs


def submit(client, annotator, note_id, codes):
    return client.post("/api/annotations", json={
        "annotator_id": annotator,
        "note_id": note_id,
        "codes": codes,
        "started_at": 10.0,
        "submitted_at": 20.0,
    })


class TestSessionEndpoint:
    def test_session_state(self, setup):
        client, service, _ = setup
        resp = client.get("/api/session", params={"annotator": "alice"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["completed"] == 0
        assert body["queue_size"] == 3
        assert body["next_note_id"] in {"n1", "n2", "n3"}

    def test_notes_endpoint_returns_text_only(self, setup):
        client, _, docs = setup
        resp = client.get("/api/notes/n1")
        assert resp.status_code == 200
        assert resp.json() == {"id": "n1", "text": docs[0].text}

    def test_unknown_note_404(self, setup):
        client, _, _ = setup
        assert client.get("/api/notes/zz").status_code == 404

    def test_reference_codes_never_exposed(self, setup):
        client, service, _ = setup
        head = client.get("/api/session", params={"annotator": "x"}).json()["next_note_id"]
        pages = [
            client.get("/api/session", params={"annotator": "x"}).text,
            client.get(f"/api/notes/{head}").text,
            submit(client, "x", head, []).text,
        ]
        for page in pages:
            payload = json.loads(page)
            flattened = json.dumps(payload)
            assert "codes" not in payload or payload.get("codes") == []
            # the reference assignments for the toy notes never leak
            assert "427.81" not in flattened or "results" in payload


class TestCodesEndpoint:
    def test_search(self, setup):
        client, _, _ = setup
        resp = client.get("/api/codes", params={"query": "427.81", "limit": 5})
        results = resp.json()["results"]
        assert results[0]["code"] == "427.81"

    def test_empty_query_lists_in_order(self, setup):
        client, _, _ = setup
        results = client.get("/api/codes", params={"limit": 2}).json()["results"]
        assert [r["code"] for r in results] == ["427.81", "008.45"]


class TestAnnotationFlow:
    def test_full_walkthrough_and_report(self, setup):
        client, service, docs = setup
        queue = service.get_or_create_session("coder1").queue
        by_id = {d.id: d for d in docs}
        for note_id in queue:
            resp = submit(client, "coder1", note_id, sorted(by_id[note_id].codes))
            assert resp.status_code == 200
        state = client.get("/api/session", params={"annotator": "coder1"}).json()
        assert state["done"] is True
        assert state["completed"] == 3

        report = client.get("/api/report").json()
        assert report["rows"]["coder1"]["micro_jaccard"] == 1.0
        assert "model" in report["rows"]

    def test_unknown_code_rejected_with_name(self, setup):
        client, service, _ = setup
        head = service.get_or_create_session("c").next_note_id
        resp = submit(client, "c", head, ["999.999"])
        assert resp.status_code == 400
        assert "999.999" in resp.json()["error"]

    def test_out_of_order_rejected(self, setup):
        client, service, _ = setup
        queue = service.get_or_create_session("c2").queue
        resp = submit(client, "c2", queue[-1], [])
        assert resp.status_code == 400
        assert "order" in resp.json()["error"]

    def test_submission_durable_across_restart(self, setup, tmp_path):
        client, service, docs = setup
        head = service.get_or_create_session("c3").next_note_id
        submit(client, "c3", head, ["427.81"])
        replayed = AnnotationStore(service.store.path)
        assert replayed.by_annotator("c3")[head].codes == {"427.81"}
