"""Case-type classification, village/district aggregation, and map export.

Aggregation is a fold over records: each record is attributed to a village
by its explicit village id when that id is a known boundary, by
point-in-polygon on its coordinates otherwise, by geocoding the
"district village" label string as a last resort, and lands in an explicit
unlocated bucket when all three fail. District aggregates are exact sums
of their member villages, so additivity and record conservation hold by
construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

from .boundaries import BoundarySet
from .records import DataError

__all__ = [
    "CATEGORIES",
    "AGE_BUCKETS",
    "GeocoderClient",
    "FileGeocoder",
    "bundled_geocoder",
    "load_case_type_mapping",
    "bundled_case_type_mapping",
    "classify_case_type",
    "CaseTypeClassifier",
    "VillageAggregate",
    "AggregateSet",
    "aggregate",
    "table1_summary",
    "export_geojson",
]

CATEGORIES = ("IPV", "child_adolescent", "elderly", "intersibling_other")
FALLBACK_CATEGORY = "intersibling_other"
AGE_BUCKETS = ("0-18", "19-64", "65+")


class GeocoderClient:
    """Address -> (lat, lon) lookup; failures are explicit Nones."""

    def resolve(self, address: str) -> tuple[float, float] | None:
        raise NotImplementedError


class FileGeocoder(GeocoderClient):
    """File-backed stub over a CSV of address,lat,lon rows."""

    def __init__(self, table: dict[str, tuple[float, float]]):
        self.table = table

    @classmethod
    def from_csv(cls, path_or_file) -> "FileGeocoder":
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            with open(path_or_file, "r", encoding="utf-8", newline="") as fh:
                return cls.from_csv(fh)
        reader = csv.DictReader(path_or_file)
        if reader.fieldnames is None or set(reader.fieldnames) != {"address", "lat", "lon"}:
            raise DataError("geocoder stub CSV must have columns address,lat,lon")
        table = {}
        for row in reader:
            table[row["address"]] = (float(row["lat"]), float(row["lon"]))
        return cls(table)

    def resolve(self, address: str) -> tuple[float, float] | None:
        return self.table.get(address)


def bundled_geocoder() -> FileGeocoder:
    raw = resources.files("dvrisk").joinpath("data/geocoder_stub.csv").read_text("utf-8")
    import io

    return FileGeocoder.from_csv(io.StringIO(raw))


def load_case_type_mapping(path_or_file) -> dict[str, str]:
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "r", encoding="utf-8", newline="") as fh:
            return load_case_type_mapping(fh)
    reader = csv.DictReader(path_or_file)
    if reader.fieldnames is None or set(reader.fieldnames) != {"raw_label", "category"}:
        raise DataError("mapping CSV must have columns raw_label,category")
    mapping = {}
    for row in reader:
        category = row["category"]
        if category not in CATEGORIES:
            raise DataError(f"unknown category {category!r} in mapping table")
        mapping[row["raw_label"]] = category
    return mapping


def bundled_case_type_mapping() -> dict[str, str]:
    raw = resources.files("dvrisk").joinpath("data/case_type_mapping.csv").read_text("utf-8")
    import io

    return load_case_type_mapping(io.StringIO(raw))


class CaseTypeClassifier:
    """Exact-match lookup into the four general categories, counting the
    raw labels that had to fall back."""

    def __init__(self, mapping: dict[str, str]):
        self.mapping = dict(mapping)
        self.fallback_count = 0
        self.unmapped_labels: dict[str, int] = {}

    def classify(self, raw: str) -> str:
        key = (raw or "").strip()
        if key in self.mapping:
            return self.mapping[key]
        self.fallback_count += 1
        self.unmapped_labels[key] = self.unmapped_labels.get(key, 0) + 1
        return FALLBACK_CATEGORY


def classify_case_type(raw: str, mapping: dict[str, str]) -> str:
    """One-shot classification without fallback accounting."""
    return CaseTypeClassifier(mapping).classify(raw)


@dataclass
class VillageAggregate:
    village_id: str
    district_id: str
    type_counts: dict = field(
        default_factory=lambda: {c: 0 for c in CATEGORIES}
    )
    male: int = 0
    female: int = 0
    age_counts: dict = field(
        default_factory=lambda: {b: 0 for b in AGE_BUCKETS}
    )
    low_mid_income: int = 0
    disability: int = 0
    predicted_high_risk: int | None = None

    @property
    def total(self) -> int:
        return sum(self.type_counts.values())

    def add(self, category: str, record, high_risk: bool | None) -> None:
        self.type_counts[category] += 1
        if record.victim_gender == "male":
            self.male += 1
        elif record.victim_gender == "female":
            self.female += 1
        if record.victim_age is not None:
            if record.victim_age <= 18:
                self.age_counts["0-18"] += 1
            elif record.victim_age <= 64:
                self.age_counts["19-64"] += 1
            else:
                self.age_counts["65+"] += 1
        if record.low_mid_income:
            self.low_mid_income += 1
        if record.disability_or_mental_illness:
            self.disability += 1
        if high_risk is not None:
            if self.predicted_high_risk is None:
                self.predicted_high_risk = 0
            if high_risk:
                self.predicted_high_risk += 1

    def merge(self, other: "VillageAggregate") -> None:
        for c in CATEGORIES:
            self.type_counts[c] += other.type_counts[c]
        self.male += other.male
        self.female += other.female
        for b in AGE_BUCKETS:
            self.age_counts[b] += other.age_counts[b]
        self.low_mid_income += other.low_mid_income
        self.disability += other.disability
        if other.predicted_high_risk is not None:
            self.predicted_high_risk = (
                self.predicted_high_risk or 0
            ) + other.predicted_high_risk

    def to_properties(self) -> dict:
        props = {
            "village_id": self.village_id,
            "district_id": self.district_id,
            "total": self.total,
            "male": self.male,
            "female": self.female,
            "low_mid_income": self.low_mid_income,
            "disability": self.disability,
        }
        for c in CATEGORIES:
            props[f"count_{c}"] = self.type_counts[c]
        for b in AGE_BUCKETS:
            props[f"age_{b}"] = self.age_counts[b]
        if self.predicted_high_risk is not None:
            props["predicted_high_risk"] = self.predicted_high_risk
        return props


@dataclass
class AggregateSet:
    villages: list[VillageAggregate]
    districts: list[VillageAggregate]
    unlocated: VillageAggregate
    n_records: int
    classifier: CaseTypeClassifier

    def located_total(self) -> int:
        return sum(v.total for v in self.villages)


def _locate(record, boundaries: BoundarySet, geocoder: GeocoderClient | None):
    if record.village and record.village in boundaries.by_id:
        return boundaries.by_id[record.village]
    if record.latitude is not None and record.longitude is not None:
        village = boundaries.village_for_point(record.longitude, record.latitude)
        if village is not None:
            return village
    if geocoder is not None and record.village:
        address = f"{record.district or ''} {record.village}".strip()
        coords = geocoder.resolve(address)
        if coords is not None:
            lat, lon = coords
            village = boundaries.village_for_point(lon, lat)
            if village is not None:
                return village
    return None


def aggregate(
    records,
    boundaries: BoundarySet,
    mapping: dict[str, str] | None = None,
    model=None,
    geocoder: GeocoderClient | None = None,
    high_band: float = 0.67,
) -> AggregateSet:
    """Fold records into per-village aggregates plus exact district sums.

    When a trained model is supplied, rows whose model variables are all
    present are scored and counted into predicted_high_risk at probability
    >= high_band. Unlocatable records land in the explicit unlocated
    bucket, never dropped.
    """
    records = list(records)
    if mapping is None:
        mapping = bundled_case_type_mapping()
    classifier = CaseTypeClassifier(mapping)

    high_risk_of: dict[int, bool] = {}
    if model is not None:
        from .forest import predict_matrix
        from .preprocess import MODEL_VARIABLES

        scorable = []
        rows = []
        for i, rec in enumerate(records):
            values = {name: getattr(rec, name) for name in MODEL_VARIABLES}
            if any(v is None for v in values.values()):
                continue
            scorable.append(i)
            rows.append(model.schema.encode_values(values))
        if rows:
            import numpy as np

            probs = predict_matrix(model, np.asarray(rows))
            high_risk_of = {
                i: bool(p >= high_band) for i, p in zip(scorable, probs)
            }

    by_village: dict[str, VillageAggregate] = {}
    unlocated = VillageAggregate(village_id="(unlocated)", district_id="(unlocated)")
    n = 0
    for i, rec in enumerate(records):
        n += 1
        category = classifier.classify(rec.case_type_raw)
        high = high_risk_of.get(i) if model is not None else None
        village = _locate(rec, boundaries, geocoder)
        if village is None:
            unlocated.add(category, rec, high)
            continue
        agg = by_village.get(village.village_id)
        if agg is None:
            agg = VillageAggregate(
                village_id=village.village_id, district_id=village.district_id
            )
            by_village[village.village_id] = agg
        agg.add(category, rec, high)

    villages = [by_village[vid] for vid in sorted(by_village)]
    by_district: dict[str, VillageAggregate] = {}
    for agg in villages:
        dist = by_district.get(agg.district_id)
        if dist is None:
            dist = VillageAggregate(village_id="", district_id=agg.district_id)
            by_district[agg.district_id] = dist
        dist.merge(agg)
    districts = [by_district[d] for d in sorted(by_district)]
    return AggregateSet(
        villages=villages,
        districts=districts,
        unlocated=unlocated,
        n_records=n,
        classifier=classifier,
    )


def table1_summary(records, mapping: dict[str, str] | None = None) -> list[dict]:
    """Per-category share, gender ratio, and rate columns, one decimal."""
    if mapping is None:
        mapping = bundled_case_type_mapping()
    classifier = CaseTypeClassifier(mapping)
    buckets: dict[str, list] = {c: [] for c in CATEGORIES}
    n = 0
    for rec in records:
        buckets[classifier.classify(rec.case_type_raw)].append(rec)
        n += 1
    rows = []
    for category in CATEGORIES:
        members = buckets[category]
        if not members:
            continue
        m = len(members)
        male = sum(1 for r in members if r.victim_gender == "male")
        gendered = sum(
            1 for r in members if r.victim_gender in ("male", "female")
        )
        low = sum(1 for r in members if r.low_mid_income)
        dis = sum(1 for r in members if r.disability_or_mental_illness)
        rows.append(
            {
                "category": category,
                "n": m,
                "proportion_pct": round(100.0 * m / n, 1),
                "male_pct": round(100.0 * male / gendered, 1) if gendered else None,
                "female_pct": round(100.0 * (gendered - male) / gendered, 1)
                if gendered
                else None,
                "low_mid_income_pct": round(100.0 * low / m, 1),
                "disability_pct": round(100.0 * dis / m, 1),
            }
        )
    return rows


def format_table1(rows) -> str:
    header = (
        f"{'category':<22}{'n':>7}{'share':>8}{'male/female':>14}"
        f"{'low income':>12}{'disability':>12}"
    )
    lines = [header, "-" * len(header)]
    for row in rows:
        gender = (
            f"{row['male_pct']:.0f}/{row['female_pct']:.0f}"
            if row["male_pct"] is not None
            else "n/a"
        )
        lines.append(
            f"{row['category']:<22}{row['n']:>7}{row['proportion_pct']:>7.1f}%"
            f"{gender:>14}{row['low_mid_income_pct']:>11.1f}%"
            f"{row['disability_pct']:>11.1f}%"
        )
    return "\n".join(lines)


def export_geojson(aggregates: AggregateSet, boundaries: BoundarySet) -> bytes:
    """Byte-stable FeatureCollection: one feature per boundary village.

    Villages with no cases carry zero counts. An aggregate referencing a
    village missing from the boundary set is fatal and names the village.
    """
    known = set(boundaries.by_id)
    for agg in aggregates.villages:
        if agg.village_id not in known:
            raise DataError(
                f"village {agg.village_id!r} has no boundary polygon"
            )
    by_id = {agg.village_id: agg for agg in aggregates.villages}
    features = []
    for village in boundaries.villages:
        agg = by_id.get(village.village_id)
        if agg is None:
            agg = VillageAggregate(
                village_id=village.village_id, district_id=village.district_id
            )
        ring = [[round(x, 6), round(y, 6)] for x, y in village.ring]
        features.append(
            {
                "type": "Feature",
                "properties": agg.to_properties(),
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    doc = {
        "type": "FeatureCollection",
        "features": features,
        "x_totals": {
            "records": aggregates.n_records,
            "located": aggregates.located_total(),
            "unlocated": aggregates.unlocated.total,
            "unmapped_case_types": aggregates.classifier.fallback_count,
        },
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
