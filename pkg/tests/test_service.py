import json
import threading
import time

import pytest
import requests

from dvrisk.boundaries import bundled_boundaries
from dvrisk.forest import EnsembleConfig, train_ensemble
from dvrisk.geo import aggregate, export_geojson
from dvrisk.preprocess import build_frame
from dvrisk.service import load_state, make_server, validate_score_request
from dvrisk.synthgen import GeneratorConfig, generate


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("service")
    records = generate(GeneratorConfig.model_mode(seed=31))
    frame = build_frame(records)
    model = train_ensemble(
        frame,
        EnsembleConfig(
            outer_rounds=2,
            inner_repeats=2,
            trees_per_forest=8,
            per_class_sample=60,
            master_seed=17,
        ),
    )
    model_path = tmp / "model.json"
    model.save(model_path)

    boundaries = bundled_boundaries()
    map_records = generate(GeneratorConfig.map_mode(n_cases=2500, seed=32))
    aggregates = aggregate(map_records, boundaries, model=model)
    map_path = tmp / "map.geojson"
    map_path.write_bytes(export_geojson(aggregates, boundaries))
    return model_path, map_path, model


@pytest.fixture(scope="module")
def server(artifacts):
    model_path, map_path, _ = artifacts
    state = load_state(model_path, map_path)
    srv = make_server(state, port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base, srv
    srv.shutdown()
    srv.server_close()


def good_request():
    return {
        "tipvda_score": 4,
        "dv_duration_months": 40,
        "maimed": "fracture",
        "occupation": "unemployed",
        "education": "junior_high",
        "district": "D11",
    }


class TestScore:
    def test_well_formed(self, server):
        base, _ = server
        resp = requests.post(f"{base}/api/score", json=good_request())
        assert resp.status_code == 200
        doc = resp.json()
        assert 0.0 <= doc["probability"] <= 1.0
        assert doc["label"] in (0, 1)
        assert doc["risk_level"] in ("low", "elevated", "high")
        assert doc["model_version"]

    def test_unknown_level_maps_to_merged(self, server):
        base, _ = server
        payload = good_request()
        payload["education"] = "never seen before"
        resp = requests.post(f"{base}/api/score", json=payload)
        assert resp.status_code == 200

    def test_missing_field_names_it(self, server):
        base, _ = server
        payload = good_request()
        del payload["tipvda_score"]
        resp = requests.post(f"{base}/api/score", json=payload)
        assert resp.status_code == 400
        assert "tipvda_score" in resp.json()["errors"]

    def test_report_count_rejected(self, server):
        base, _ = server
        payload = good_request()
        payload["report_count"] = 3
        resp = requests.post(f"{base}/api/score", json=payload)
        assert resp.status_code == 400
        assert "report_count" in resp.json()["errors"]

    def test_idempotent(self, server):
        base, _ = server
        a = requests.post(f"{base}/api/score", json=good_request()).json()
        b = requests.post(f"{base}/api/score", json=good_request()).json()
        assert a == b

    def test_no_model_503(self, artifacts):
        _, map_path, _ = artifacts
        srv = make_server(load_state(None, map_path), port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        try:
            base = f"http://127.0.0.1:{srv.server_address[1]}"
            resp = requests.post(f"{base}/api/score", json=good_request())
            assert resp.status_code == 503
        finally:
            srv.shutdown()
            srv.server_close()

    def test_latency_smoke(self, server):
        base, _ = server
        times = []
        for _ in range(20):
            t0 = time.perf_counter()
            requests.post(f"{base}/api/score", json=good_request())
            times.append(time.perf_counter() - t0)
        times.sort()
        assert times[len(times) // 2] < 0.050


class TestMap:
    def test_full_collection(self, server):
        base, _ = server
        resp = requests.get(f"{base}/api/map")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 456

    def test_type_filter_exposes_category_count(self, server):
        base, _ = server
        resp = requests.get(f"{base}/api/map?type=IPV")
        assert resp.status_code == 200
        doc = resp.json()
        assert len(doc["features"]) == 456
        props = doc["features"][0]["properties"]
        assert "count" in props and "total" in props

    def test_unknown_type_lists_valid(self, server):
        base, _ = server
        resp = requests.get(f"{base}/api/map?type=bogus")
        assert resp.status_code == 400
        assert "IPV" in resp.json()["valid_types"]

    def test_every_response_carries_model_version(self, server):
        base, srv = server
        version = srv.state.model_version
        assert requests.get(f"{base}/api/map").json()["x_model_version"] == version
        assert (
            requests.get(f"{base}/api/map?type=IPV").json()["x_model_version"]
            == version
        )
        assert (
            requests.get(f"{base}/api/district/D01").json()["model_version"]
            == version
        )
        assert (
            requests.post(f"{base}/api/score", json=good_request()).json()[
                "model_version"
            ]
            == version
        )

    def test_etag_stable_and_304(self, server):
        base, _ = server
        first = requests.get(f"{base}/api/map?type=IPV")
        second = requests.get(f"{base}/api/map?type=IPV")
        assert first.headers["ETag"] == second.headers["ETag"]
        third = requests.get(
            f"{base}/api/map?type=IPV",
            headers={"If-None-Match": first.headers["ETag"]},
        )
        assert third.status_code == 304


class TestDistrict:
    def test_known_district(self, server, artifacts):
        base, _ = server
        resp = requests.get(f"{base}/api/district/D01")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["district_id"] == "D01"
        assert doc["n_villages"] == 38
        assert doc["total"] == sum(doc[f"count_{c}"] for c in
                                   ("IPV", "child_adolescent", "elderly", "intersibling_other"))

    def test_unknown_404(self, server):
        base, _ = server
        resp = requests.get(f"{base}/api/district/D99")
        assert resp.status_code == 404

    def test_districts_sum_to_citywide(self, server):
        base, _ = server
        map_doc = requests.get(f"{base}/api/map").json()
        city_total = sum(f["properties"]["total"] for f in map_doc["features"])
        district_total = 0
        for i in range(1, 13):
            doc = requests.get(f"{base}/api/district/D{i:02d}").json()
            district_total += doc["total"]
        assert district_total == city_total


class TestReload:
    def test_reload_returns_version(self, server):
        base, srv = server
        before = srv.state.model_version
        resp = requests.post(f"{base}/api/reload")
        assert resp.status_code == 200
        assert resp.json()["model_version"] == before  # same files on disk

    def test_version_changes_only_via_reload(self, artifacts, tmp_path):
        model_path, map_path, model = artifacts
        state = load_state(model_path, map_path)
        srv = make_server(state, port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{srv.server_address[1]}"
        try:
            v1 = requests.post(f"{base}/api/score", json=good_request()).json()[
                "model_version"
            ]
            # rewrite the model file with a different threshold
            doc = json.loads(model_path.read_text())
            doc["config"]["threshold"] = 0.4
            model_path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))
            v2 = requests.post(f"{base}/api/score", json=good_request()).json()[
                "model_version"
            ]
            assert v2 == v1  # not reloaded yet
            requests.post(f"{base}/api/reload")
            v3 = requests.post(f"{base}/api/score", json=good_request()).json()[
                "model_version"
            ]
            assert v3 != v1
        finally:
            srv.shutdown()
            srv.server_close()


class TestValidation:
    def test_valid_payload(self):
        assert validate_score_request(good_request()) == {}

    def test_type_errors(self):
        payload = good_request()
        payload["tipvda_score"] = "high"
        payload["victim_gender"] = "none"
        errors = validate_score_request(payload)
        assert "tipvda_score" in errors
        assert "victim_gender" in errors

    def test_unknown_field(self):
        payload = good_request()
        payload["surprise"] = 1
        assert "surprise" in validate_score_request(payload)

    def test_non_object(self):
        assert "body" in validate_score_request([1, 2, 3])
