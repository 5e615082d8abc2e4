"""Village and district boundaries for the map pipeline.

A synthetic boundary set ships with the package: a 24 x 19 grid of 456
village cells over a city-sized bounding box, grouped into 12 districts
of 38 villages (two grid columns each). Real deployments can substitute
any GeoJSON FeatureCollection whose features carry ``village_id`` and
``district_id`` properties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .records import DataError

__all__ = [
    "Village",
    "BoundarySet",
    "synthetic_boundaries_geojson",
    "load_boundaries",
    "bundled_boundaries",
    "point_in_polygon",
]

N_COLS = 24
N_ROWS = 19
N_DISTRICTS = 12
LON_RANGE = (121.45, 121.67)
LAT_RANGE = (24.96, 25.21)


@dataclass(frozen=True)
class Village:
    village_id: str
    district_id: str
    ring: tuple[tuple[float, float], ...]  # closed exterior ring, lon/lat

    @property
    def centroid(self) -> tuple[float, float]:
        xs = [p[0] for p in self.ring[:-1]]
        ys = [p[1] for p in self.ring[:-1]]
        return (sum(xs) / len(xs), sum(ys) / len(ys))


def _grid_edges(lo: float, hi: float, cells: int) -> list[float]:
    return [round(lo + (hi - lo) * i / cells, 6) for i in range(cells + 1)]


def synthetic_boundaries_geojson() -> dict:
    """Deterministic 456-village grid as a GeoJSON FeatureCollection."""
    lon_edges = _grid_edges(*LON_RANGE, N_COLS)
    lat_edges = _grid_edges(*LAT_RANGE, N_ROWS)
    features = []
    for row in range(N_ROWS):
        for col in range(N_COLS):
            vid = row * N_COLS + col + 1
            district = col // 2 + 1
            x0, x1 = lon_edges[col], lon_edges[col + 1]
            y0, y1 = lat_edges[row], lat_edges[row + 1]
            ring = [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
            features.append(
                {
                    "type": "Feature",
                    "properties": {
                        "village_id": f"V{vid:03d}",
                        "district_id": f"D{district:02d}",
                    },
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                }
            )
    return {"type": "FeatureCollection", "features": features}


class BoundarySet:
    def __init__(self, villages: list[Village]):
        if not villages:
            raise DataError("boundary set has no villages")
        self.villages = villages
        self.by_id = {v.village_id: v for v in villages}
        if len(self.by_id) != len(villages):
            raise DataError("duplicate village_id in boundary set")
        self.districts = sorted({v.district_id for v in villages})

    def __len__(self) -> int:
        return len(self.villages)

    def village_for_point(self, lon: float, lat: float) -> Village | None:
        for village in self.villages:
            if point_in_polygon(lon, lat, village.ring):
                return village
        return None

    @classmethod
    def from_geojson(cls, doc: dict) -> "BoundarySet":
        if doc.get("type") != "FeatureCollection":
            raise DataError("boundaries must be a GeoJSON FeatureCollection")
        villages = []
        for feat in doc.get("features", []):
            props = feat.get("properties") or {}
            vid = props.get("village_id")
            did = props.get("district_id")
            geom = feat.get("geometry") or {}
            if not vid or not did:
                raise DataError("boundary feature lacks village_id/district_id")
            if geom.get("type") != "Polygon":
                raise DataError(f"{vid}: only Polygon boundaries are supported")
            ring = tuple((float(x), float(y)) for x, y in geom["coordinates"][0])
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise DataError(f"{vid}: exterior ring must be closed")
            villages.append(Village(village_id=vid, district_id=did, ring=ring))
        return cls(villages)


def load_boundaries(path) -> BoundarySet:
    with open(path, "r", encoding="utf-8") as fh:
        return BoundarySet.from_geojson(json.load(fh))


def bundled_boundaries() -> BoundarySet:
    raw = resources.files("dvrisk").joinpath("data/boundaries.geojson").read_bytes()
    return BoundarySet.from_geojson(json.loads(raw.decode("utf-8")))


def point_in_polygon(lon: float, lat: float, ring) -> bool:
    """Ray-casting test against a closed ring; boundary points count inside
    on the lower/left edges only, so grid tiles partition cleanly."""
    inside = False
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        if (y0 > lat) != (y1 > lat):
            x_cross = x0 + (lat - y0) * (x1 - x0) / (y1 - y0)
            if lon < x_cross:
                inside = not inside
    return inside
