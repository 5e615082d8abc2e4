"""JSON-over-HTTP scoring and map API.

Endpoints (all under /api): POST /api/score encodes one case through the
model's stored preprocessing schema and returns probability, label, and
risk band; GET /api/map returns the aggregated village GeoJSON (optionally
focused on one case-type layer, with a content-hash ETag); GET
/api/district/<id> returns one district's overview; POST /api/reload
(localhost only) atomically swaps in freshly loaded artifacts.

The server is a stdlib ThreadingHTTPServer: scoring is read-only, and a
reload replaces the whole state object in one reference assignment, so
concurrent readers always see a consistent model/aggregate pair.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .forest import DEFAULT_BANDS, EnsembleModel, classify, predict_proba
from .geo import CATEGORIES
from .preprocess import MODEL_VARIABLES
from .records import GENDERS, REPORTER_OCCUPATIONS

__all__ = ["ServiceState", "load_state", "make_server", "run_server"]

MAP_TYPES = CATEGORIES + ("all",)


@dataclass(frozen=True)
class ServiceState:
    model: EnsembleModel | None
    model_version: str | None
    map_doc: dict | None
    districts: dict
    model_path: str | None = None
    map_path: str | None = None


def _district_rollups(map_doc: dict) -> dict:
    rollups: dict[str, dict] = {}
    for feature in map_doc.get("features", []):
        props = feature["properties"]
        district = props["district_id"]
        roll = rollups.get(district)
        if roll is None:
            roll = {
                "district_id": district,
                "n_villages": 0,
                "total": 0,
                "male": 0,
                "female": 0,
                "low_mid_income": 0,
                "disability": 0,
            }
            for c in CATEGORIES:
                roll[f"count_{c}"] = 0
            for b in ("0-18", "19-64", "65+"):
                roll[f"age_{b}"] = 0
            rollups[district] = roll
        roll["n_villages"] += 1
        for key in roll:
            if key in ("district_id", "n_villages"):
                continue
            roll[key] += props.get(key, 0) or 0
        if "predicted_high_risk" in props:
            roll["predicted_high_risk"] = (
                roll.get("predicted_high_risk", 0) + props["predicted_high_risk"]
            )
    return rollups


def load_state(model_path=None, map_path=None) -> ServiceState:
    model = EnsembleModel.load(model_path) if model_path else None
    version = None
    if model_path:
        with open(model_path, "rb") as fh:
            version = hashlib.sha256(fh.read()).hexdigest()[:12]
    map_doc = None
    districts: dict = {}
    if map_path:
        with open(map_path, "rb") as fh:
            map_doc = json.loads(fh.read().decode("utf-8"))
        districts = _district_rollups(map_doc)
    return ServiceState(
        model=model,
        model_version=version,
        map_doc=map_doc,
        districts=districts,
        model_path=str(model_path) if model_path else None,
        map_path=str(map_path) if map_path else None,
    )


_INT_RULES = {
    "tipvda_score": 0,
    "dv_duration_months": 0,
    "victim_age": 0,
}
_STRING_FIELDS = {"maimed", "occupation", "education", "district", "village",
                  "case_id", "case_type_raw"}
_BOOL_FIELDS = {"low_mid_income", "disability_or_mental_illness"}
ALLOWED_FIELDS = (
    set(MODEL_VARIABLES)
    | _STRING_FIELDS
    | _BOOL_FIELDS
    | {"victim_age", "victim_gender", "reporter_occupation", "latitude", "longitude"}
)


def validate_score_request(payload) -> dict:
    """Field-level problems for a score request; empty dict means valid."""
    errors: dict[str, str] = {}
    if not isinstance(payload, dict):
        return {"body": "expected a JSON object"}
    if "report_count" in payload:
        errors["report_count"] = "not accepted: scoring predicts future reports"
    for key in payload:
        if key not in ALLOWED_FIELDS and key != "report_count":
            errors[key] = "unknown field"
    for name in MODEL_VARIABLES:
        if payload.get(name) is None:
            errors[name] = "required"
    for name, minimum in _INT_RULES.items():
        value = payload.get(name)
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, int):
            errors[name] = "must be an integer"
        elif value < minimum:
            errors[name] = f"must be >= {minimum}"
    for name in _STRING_FIELDS:
        value = payload.get(name)
        if value is not None and (not isinstance(value, str) or not value.strip()):
            errors[name] = "must be a nonempty string"
    for name in _BOOL_FIELDS:
        value = payload.get(name)
        if value is not None and not isinstance(value, bool):
            errors[name] = "must be a boolean"
    gender = payload.get("victim_gender")
    if gender is not None and gender not in GENDERS:
        errors["victim_gender"] = f"must be one of {list(GENDERS)}"
    reporter = payload.get("reporter_occupation")
    if reporter is not None and reporter not in REPORTER_OCCUPATIONS:
        errors["reporter_occupation"] = f"must be one of {list(REPORTER_OCCUPATIONS)}"
    lat = payload.get("latitude")
    if lat is not None and not (
        isinstance(lat, (int, float)) and not isinstance(lat, bool) and -90 <= lat <= 90
    ):
        errors["latitude"] = "must be in [-90, 90]"
    lon = payload.get("longitude")
    if lon is not None and not (
        isinstance(lon, (int, float)) and not isinstance(lon, bool) and -180 <= lon <= 180
    ):
        errors["longitude"] = "must be in [-180, 180]"
    return errors


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "dvrisk"

    # --- plumbing ---------------------------------------------------------

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        if getattr(self.server, "quiet", True):
            return
        super().log_message(format, *args)

    def _send_json(self, status: int, doc: dict, etag: str | None = None) -> None:
        body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        if etag:
            self.send_header("ETag", etag)
        self.end_headers()
        self.wfile.write(body)

    def _read_json_body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return None, "empty request body"
        try:
            return json.loads(raw.decode("utf-8")), None
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return None, f"invalid JSON: {exc}"

    # --- routes -----------------------------------------------------------

    def do_GET(self):
        path, _, query = self.path.partition("?")
        if path == "/api/map":
            return self._get_map(query)
        if path.startswith("/api/district/"):
            return self._get_district(path.removeprefix("/api/district/"))
        self._send_json(404, {"error": f"unknown path {path}"})

    def do_POST(self):
        path = self.path.partition("?")[0]
        if path == "/api/score":
            return self._post_score()
        if path == "/api/reload":
            return self._post_reload()
        self._send_json(404, {"error": f"unknown path {path}"})

    def _post_score(self):
        state: ServiceState = self.server.state
        if state.model is None:
            return self._send_json(503, {"error": "no model loaded"})
        payload, problem = self._read_json_body()
        if problem:
            return self._send_json(400, {"errors": {"body": problem}})
        errors = validate_score_request(payload)
        if errors:
            return self._send_json(400, {"errors": errors})
        row = state.model.schema.encode_values(
            {name: payload[name] for name in MODEL_VARIABLES}
        )
        probability = predict_proba(state.model, row)
        label, level = classify(
            probability, state.model.threshold, DEFAULT_BANDS
        )
        self._send_json(
            200,
            {
                "probability": probability,
                "label": label,
                "risk_level": level.value,
                "model_version": state.model_version,
            },
        )

    def _get_map(self, query: str):
        state: ServiceState = self.server.state
        if state.map_doc is None:
            return self._send_json(503, {"error": "no aggregates loaded"})
        params = dict(
            part.split("=", 1) for part in query.split("&") if "=" in part
        )
        layer = params.get("type", "all")
        if layer not in MAP_TYPES:
            return self._send_json(
                400,
                {"error": f"unknown type {layer!r}", "valid_types": list(MAP_TYPES)},
            )
        if layer == "all":
            doc = dict(state.map_doc)
            doc["x_model_version"] = state.model_version
        else:
            features = []
            for feature in state.map_doc["features"]:
                props = feature["properties"]
                slim = {
                    "village_id": props["village_id"],
                    "district_id": props["district_id"],
                    "total": props["total"],
                    "count": props.get(f"count_{layer}", 0),
                }
                if "predicted_high_risk" in props:
                    slim["predicted_high_risk"] = props["predicted_high_risk"]
                features.append(
                    {
                        "type": "Feature",
                        "properties": slim,
                        "geometry": feature["geometry"],
                    }
                )
            doc = {
                "type": "FeatureCollection",
                "features": features,
                "x_model_version": state.model_version,
            }
        body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        etag = '"' + hashlib.sha256(body).hexdigest()[:16] + '"'
        if self.headers.get("If-None-Match") == etag:
            self.send_response(304)
            self.send_header("ETag", etag)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        self.send_response(200)
        self.send_header("Content-Type", "application/geo+json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("ETag", etag)
        self.end_headers()
        self.wfile.write(body)

    def _get_district(self, district_id: str):
        state: ServiceState = self.server.state
        if state.map_doc is None:
            return self._send_json(503, {"error": "no aggregates loaded"})
        roll = state.districts.get(district_id)
        if roll is None:
            return self._send_json(
                404, {"error": f"unknown district {district_id!r}"}
            )
        self._send_json(200, {**roll, "model_version": state.model_version})

    def _post_reload(self):
        if self.client_address[0] not in ("127.0.0.1", "::1"):
            return self._send_json(403, {"error": "reload is localhost-only"})
        state: ServiceState = self.server.state
        try:
            fresh = load_state(state.model_path, state.map_path)
        except Exception as exc:  # noqa: BLE001 - reported to the caller
            return self._send_json(500, {"error": f"reload failed: {exc}"})
        self.server.state = fresh  # atomic swap
        self._send_json(200, {"model_version": fresh.model_version})


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, state: ServiceState, quiet: bool = True):
        super().__init__(addr, ApiHandler)
        self.state = state
        self.quiet = quiet


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 0) -> ApiServer:
    return ApiServer((host, port), state)


def run_server(model_path, map_path, host: str = "127.0.0.1", port: int = 8645) -> None:
    state = load_state(model_path, map_path)
    server = ApiServer((host, port), state, quiet=False)
    print(f"serving on http://{host}:{server.server_address[1]} "
          f"(model {state.model_version})")
    try:
        server.serve_forever()
    finally:
        server.server_close()
