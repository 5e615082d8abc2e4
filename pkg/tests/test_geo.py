import json

import pytest

from dvrisk.boundaries import (
    BoundarySet,
    bundled_boundaries,
    point_in_polygon,
    synthetic_boundaries_geojson,
)
from dvrisk.geo import (
    CATEGORIES,
    CaseTypeClassifier,
    FileGeocoder,
    aggregate,
    bundled_case_type_mapping,
    bundled_geocoder,
    classify_case_type,
    export_geojson,
    format_table1,
    table1_summary,
)
from dvrisk.records import CaseRecord, DataError
from dvrisk.synthgen import GeneratorConfig, generate


def square_boundaries():
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"village_id": "V1", "district_id": "D1"},
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]],
                },
            },
            {
                "type": "Feature",
                "properties": {"village_id": "V2", "district_id": "D1"},
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[1, 0], [2, 0], [2, 1], [1, 1], [1, 0]]],
                },
            },
        ],
    }
    return BoundarySet.from_geojson(doc)


def rec(case_id, village=None, case_type="marital violence", **kw):
    defaults = dict(
        case_id=case_id,
        report_count=1,
        victim_gender="female",
        victim_age=30,
        low_mid_income=False,
        disability_or_mental_illness=False,
        case_type_raw=case_type,
        village=village,
    )
    defaults.update(kw)
    return CaseRecord(**defaults)


class TestBoundaries:
    def test_bundled_grid_matches_generator(self):
        from importlib import resources

        raw = resources.files("dvrisk").joinpath("data/boundaries.geojson").read_text("utf-8")
        bundled = json.loads(raw)
        assert bundled == synthetic_boundaries_geojson()

    def test_456_villages_12_districts(self):
        bs = bundled_boundaries()
        assert len(bs) == 456
        assert len(bs.districts) == 12

    def test_point_in_polygon(self):
        ring = ((0, 0), (1, 0), (1, 1), (0, 1), (0, 0))
        assert point_in_polygon(0.5, 0.5, ring)
        assert not point_in_polygon(1.5, 0.5, ring)
        assert not point_in_polygon(-0.5, 0.5, ring)

    def test_village_for_point_partition(self):
        bs = square_boundaries()
        assert bs.village_for_point(0.5, 0.5).village_id == "V1"
        assert bs.village_for_point(1.5, 0.5).village_id == "V2"
        assert bs.village_for_point(5.0, 5.0) is None


class TestClassify:
    def test_mapped_label(self):
        mapping = bundled_case_type_mapping()
        assert classify_case_type("marital violence", mapping) == "IPV"

    def test_unmapped_falls_back_with_counter(self):
        clf = CaseTypeClassifier({"x": "IPV"})
        assert clf.classify("unknown thing") == "intersibling_other"
        assert clf.classify("") == "intersibling_other"
        assert clf.fallback_count == 2

    def test_generator_labels_all_mapped(self):
        mapping = bundled_case_type_mapping()
        records = generate(GeneratorConfig.map_mode(n_cases=3000, seed=1))
        clf = CaseTypeClassifier(mapping)
        shares = {c: 0 for c in CATEGORIES}
        for r in records:
            shares[clf.classify(r.case_type_raw)] += 1
        assert clf.fallback_count == 0
        n = len(records)
        for target, cat in zip((0.52, 0.08, 0.06, 0.34), CATEGORIES):
            assert abs(shares[cat] / n - target) < 0.03


class TestAggregate:
    def test_counts_by_village(self):
        bs = square_boundaries()
        records = [
            rec("a", village="V1"),
            rec("b", village="V1"),
            rec("c", village="V1", case_type="elder abuse"),
        ]
        out = aggregate(records, bs)
        assert len(out.villages) == 1
        v = out.villages[0]
        assert v.type_counts["IPV"] == 2
        assert v.type_counts["elderly"] == 1
        assert v.total == 3

    def test_point_in_polygon_fallback(self):
        bs = square_boundaries()
        records = [rec("a", village=None, latitude=0.5, longitude=1.5)]
        out = aggregate(records, bs)
        assert out.villages[0].village_id == "V2"
        assert out.unlocated.total == 0

    def test_geocoder_fallback(self):
        bs = square_boundaries()
        geocoder = FileGeocoder({"D1 OldTown": (0.5, 0.5)})
        records = [rec("a", village="OldTown", district="D1")]
        out = aggregate(records, bs, geocoder=geocoder)
        assert out.villages[0].village_id == "V1"

    def test_unlocated_bucket_conserves_records(self):
        bs = square_boundaries()
        records = [
            rec("a", village="V1"),
            rec("b", village="nowhere"),
            rec("c", village=None),
        ]
        out = aggregate(records, bs)
        assert out.unlocated.total == 2
        assert out.located_total() + out.unlocated.total == out.n_records == 3

    def test_district_additivity_on_synthetic(self):
        bs = bundled_boundaries()
        records = generate(GeneratorConfig.map_mode(n_cases=4000, seed=7))
        out = aggregate(records, bs)
        by_district = {}
        for v in out.villages:
            agg = by_district.setdefault(v.district_id, {c: 0 for c in CATEGORIES})
            for c in CATEGORIES:
                agg[c] += v.type_counts[c]
        for d in out.districts:
            assert d.type_counts == by_district[d.district_id]
        assert out.located_total() == out.n_records  # generator always locates

    def test_bucket_sums_equal_total(self):
        bs = bundled_boundaries()
        records = generate(GeneratorConfig.map_mode(n_cases=2000, seed=3))
        out = aggregate(records, bs)
        for v in out.villages + out.districts:
            assert v.male + v.female == v.total
            assert sum(v.age_counts.values()) == v.total

    def test_model_high_risk_counts(self):
        from dvrisk.forest import EnsembleConfig, train_ensemble
        from dvrisk.preprocess import build_frame

        records = generate(GeneratorConfig.model_mode(seed=5))
        frame = build_frame(records)
        model = train_ensemble(
            frame,
            EnsembleConfig(
                outer_rounds=2,
                inner_repeats=1,
                trees_per_forest=5,
                per_class_sample=40,
                master_seed=1,
            ),
        )
        bs = bundled_boundaries()
        out = aggregate(records[:500], bs, model=model)
        highs = sum(v.predicted_high_risk or 0 for v in out.villages)
        assert highs >= 0
        assert any(v.predicted_high_risk is not None for v in out.villages)


class TestTable1:
    def test_synthetic_matches_published_row(self):
        records = generate(GeneratorConfig.map_mode())
        rows = table1_summary(records)
        ipv = next(r for r in rows if r["category"] == "IPV")
        assert abs(ipv["proportion_pct"] - 52.0) < 2.0
        assert abs(ipv["female_pct"] - 81.0) < 2.0
        assert abs(ipv["low_mid_income_pct"] - 8.7) < 2.0
        assert abs(ipv["disability_pct"] - 2.1) < 2.0

    def test_single_record(self):
        rows = table1_summary([rec("a")])
        assert len(rows) == 1
        assert rows[0]["proportion_pct"] == 100.0

    def test_empty(self):
        assert table1_summary([]) == []

    def test_format_runs(self):
        rows = table1_summary([rec("a"), rec("b", case_type="child abuse")])
        text = format_table1(rows)
        assert "IPV" in text and "child_adolescent" in text


class TestExportGeojson:
    def test_single_village_collection(self):
        bs = square_boundaries()
        out = aggregate([rec("a", village="V1")], bs)
        doc = json.loads(export_geojson(out, bs))
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 2  # every boundary village exported
        v1 = next(
            f for f in doc["features"] if f["properties"]["village_id"] == "V1"
        )
        assert v1["properties"]["count_IPV"] == 1

    def test_roundtrip_preserves_counts(self):
        bs = bundled_boundaries()
        records = generate(GeneratorConfig.map_mode(n_cases=3000, seed=9))
        out = aggregate(records, bs)
        doc = json.loads(export_geojson(out, bs))
        total = sum(f["properties"]["total"] for f in doc["features"])
        assert total == out.located_total()
        assert doc["x_totals"]["records"] == 3000

    def test_456_features(self):
        bs = bundled_boundaries()
        records = generate(GeneratorConfig.map_mode(n_cases=500, seed=2))
        doc = json.loads(export_geojson(aggregate(records, bs), bs))
        assert len(doc["features"]) == 456

    def test_byte_stable(self):
        bs = bundled_boundaries()
        records = generate(GeneratorConfig.map_mode(n_cases=800, seed=4))
        a = export_geojson(aggregate(records, bs), bs)
        b = export_geojson(aggregate(records, bs), bs)
        assert a == b

    def test_missing_boundary_fatal_names_village(self):
        bs = square_boundaries()
        out = aggregate([rec("a", village="V1")], bs)
        out.villages[0].village_id = "V404"
        with pytest.raises(DataError, match="V404"):
            export_geojson(out, bs)


class TestGeocoderStub:
    def test_bundled_covers_all_villages(self):
        bs = bundled_boundaries()
        geocoder = bundled_geocoder()
        for v in bs.villages[:20]:
            coords = geocoder.resolve(f"{v.district_id} {v.village_id}")
            assert coords is not None
            lat, lon = coords
            assert point_in_polygon(lon, lat, v.ring)

    def test_unknown_address_is_none(self):
        assert bundled_geocoder().resolve("nowhere at all") is None
