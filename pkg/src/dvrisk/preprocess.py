"""Turn raw case records into the model-ready categorical feature frame.

Pipeline: drop records with missing model variables, derive the binary
repeat-victimization label from the yearly report count, cut the two score
variables into three near-equal bins, and merge categorical levels rarer
than 5% into a single ``OTHER`` level. Fitted cut points and level mappings
are kept on the schema so test- and score-time data replay identically.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .records import CaseRecord, DataError

__all__ = [
    "MERGED_LEVEL",
    "BIN_LEVELS",
    "MODEL_VARIABLES",
    "Feature",
    "FrameSchema",
    "FeatureFrame",
    "TertileBinning",
    "derive_response",
    "tertile_bin",
    "assign_bins",
    "group_rare_levels",
    "apply_level_mapping",
    "drop_missing",
    "build_frame",
]

MERGED_LEVEL = "OTHER"
BIN_LEVELS = ("low", "mid", "high")

# The six model variables: two binned scores plus four merged categoricals.
BINNED_VARIABLES = ("tipvda_score", "dv_duration_months")
CATEGORICAL_VARIABLES = ("maimed", "occupation", "education", "district")
MODEL_VARIABLES = BINNED_VARIABLES + CATEGORICAL_VARIABLES


def derive_response(report_count: int) -> int:
    """1 for more than two reports in the year, else 0."""
    if report_count is None or report_count < 1:
        raise DataError(f"report_count must be >= 1, got {report_count!r}")
    return 1 if report_count > 2 else 0


@dataclass(frozen=True)
class TertileBinning:
    """Two interior cut points plus the bin index of each input value.

    A value v falls in bin 0 when ``v <= edges[0]``, bin 1 when
    ``edges[0] < v <= edges[1]``, bin 2 when ``v > edges[1]``.
    ``degenerate`` flags an all-equal column, which keeps a single bin.
    """

    edges: tuple[float, float]
    assignments: list[int]
    degenerate: bool = False


def tertile_bin(values) -> TertileBinning:
    """Cut values into three near-equal bins, ties never split across bins.

    Cuts can only sit between distinct values, so ties force unequal
    sizes; among valid cut pairs the one minimizing the largest deviation
    from n/3 wins, remaining ties resolved toward lower cut values.
    """
    vals = list(values)
    if not vals:
        raise DataError("tertile_bin: empty input")
    srt = sorted(vals)
    n = len(srt)
    # candidate cut positions: after index i where a distinct value follows
    positions = [i for i in range(n - 1) if srt[i] != srt[i + 1]]
    if not positions:
        edges = (float(srt[0]), float(srt[0]))
        return TertileBinning(edges, [0] * n, degenerate=True)

    target = n / 3.0
    best = None
    for ai, i in enumerate(positions):
        for j in positions[ai:]:
            sizes = (i + 1, j - i, n - 1 - j)
            dev = max(abs(s - target) for s in sizes)
            key = (dev, srt[i], srt[j])
            if best is None or key < best[0]:
                best = (key, (float(srt[i]), float(srt[j])))
    edges = best[1]
    return TertileBinning(edges, assign_bins(vals, edges))


def assign_bins(values, edges: tuple[float, float]) -> list[int]:
    """Replay fitted cut points on (possibly new) values."""
    e1, e2 = edges
    return [0 if v <= e1 else (1 if v <= e2 else 2) for v in values]


def group_rare_levels(column, threshold: float = 0.05):
    """Map levels with frequency < threshold to the single merged level.

    Returns ``(mapping, merged_column)``. The mapping covers every level
    observed at fit time; replay sends unseen levels to the merged level
    too, which makes application idempotent.
    """
    col = list(column)
    if not col:
        raise DataError("group_rare_levels: empty column")
    counts: dict[str, int] = {}
    for level in col:
        counts[level] = counts.get(level, 0) + 1
    n = len(col)
    mapping = {
        level: (level if count / n >= threshold else MERGED_LEVEL)
        for level, count in counts.items()
    }
    return mapping, [mapping[level] for level in col]


def apply_level_mapping(mapping: dict[str, str], column):
    """Replay a fitted mapping; unseen levels fall into the merged level."""
    return [mapping.get(level, MERGED_LEVEL) for level in column]


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "categorical" | "binned_ordinal"
    levels: tuple[str, ...]
    bin_edges: tuple[float, float] | None = None
    degenerate: bool = False
    mapping: dict[str, str] | None = None

    def encode(self, value) -> int:
        if self.kind == "binned_ordinal":
            code = assign_bins([value], self.bin_edges)[0]
            return code
        level = self.mapping.get(value, MERGED_LEVEL) if self.mapping else value
        try:
            return self.levels.index(level)
        except ValueError:
            return self.levels.index(MERGED_LEVEL)

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind, "levels": list(self.levels)}
        if self.kind == "binned_ordinal":
            d["bin_edges"] = list(self.bin_edges)
            d["degenerate"] = self.degenerate
        else:
            d["mapping"] = dict(sorted(self.mapping.items()))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Feature":
        return cls(
            name=d["name"],
            kind=d["kind"],
            levels=tuple(d["levels"]),
            bin_edges=tuple(d["bin_edges"]) if d.get("bin_edges") else None,
            degenerate=bool(d.get("degenerate", False)),
            mapping=dict(d["mapping"]) if d.get("mapping") is not None else None,
        )


@dataclass(frozen=True)
class FrameSchema:
    features: tuple[Feature, ...]

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def encode_values(self, values: dict) -> list[int]:
        """Encode one record's model-variable dict into a level-index row."""
        row = []
        for feat in self.features:
            if values.get(feat.name) is None:
                raise DataError(f"{feat.name}: required for encoding")
            row.append(feat.encode(values[feat.name]))
        return row

    def to_list(self) -> list[dict]:
        return [f.to_dict() for f in self.features]

    @classmethod
    def from_list(cls, items) -> "FrameSchema":
        return cls(tuple(Feature.from_dict(d) for d in items))


@dataclass
class FeatureFrame:
    schema: FrameSchema
    rows: np.ndarray  # (n, p) int16 level indices
    labels: np.ndarray  # (n,) int8 in {0, 1}
    flags: list[str] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    def to_json_bytes(self) -> bytes:
        doc = {
            "format_version": 1,
            "kind": "dvrisk-frame",
            "schema": self.schema.to_list(),
            "rows": self.rows.tolist(),
            "labels": self.labels.tolist(),
            "flags": sorted(self.flags),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_json_bytes())

    @classmethod
    def from_json_bytes(cls, raw: bytes) -> "FeatureFrame":
        doc = json.loads(raw.decode("utf-8"))
        if doc.get("kind") != "dvrisk-frame":
            raise DataError("not a feature-frame file")
        schema = FrameSchema.from_list(doc["schema"])
        rows = np.asarray(doc["rows"], dtype=np.int16).reshape(-1, len(schema))
        return cls(
            schema=schema,
            rows=rows,
            labels=np.asarray(doc["labels"], dtype=np.int8),
            flags=list(doc.get("flags", [])),
        )

    @classmethod
    def load(cls, path) -> "FeatureFrame":
        with open(path, "rb") as fh:
            return cls.from_json_bytes(fh.read())


def drop_missing(records) -> list[CaseRecord]:
    """Keep only records with every model variable and the report count."""
    required = MODEL_VARIABLES + ("report_count",)
    kept = [
        rec
        for rec in records
        if all(getattr(rec, name) is not None for name in required)
    ]
    if records and not kept:
        warnings.warn("drop_missing: no records remain", stacklevel=2)
    return kept


def _fit_schema(records: list[CaseRecord]) -> tuple[FrameSchema, list[str]]:
    feats: list[Feature] = []
    flags: list[str] = []
    for name in BINNED_VARIABLES:
        binning = tertile_bin([getattr(r, name) for r in records])
        if binning.degenerate:
            flags.append(f"degenerate_bins:{name}")
        feats.append(
            Feature(
                name=name,
                kind="binned_ordinal",
                levels=BIN_LEVELS,
                bin_edges=binning.edges,
                degenerate=binning.degenerate,
            )
        )
    for name in CATEGORICAL_VARIABLES:
        mapping, merged = group_rare_levels([getattr(r, name) for r in records])
        levels = tuple(sorted(set(merged) | {MERGED_LEVEL}))
        feats.append(
            Feature(name=name, kind="categorical", levels=levels, mapping=mapping)
        )
    return FrameSchema(tuple(feats)), flags


def build_frame(
    records,
    fit: bool = True,
    prior_schema: FrameSchema | None = None,
) -> FeatureFrame:
    """Assemble the feature frame; ``fit=False`` replays a fitted schema.

    Replay mode maps unseen categorical levels to the merged level and
    re-uses the stored cut points, so the same records against the same
    schema always produce byte-identical frames.
    """
    if not fit and prior_schema is None:
        raise DataError("build_frame: replay mode requires prior_schema")
    kept = drop_missing(list(records))
    if not kept:
        warnings.warn("build_frame: empty frame", stacklevel=2)
        schema = prior_schema if prior_schema is not None else FrameSchema(())
        p = len(schema)
        return FeatureFrame(
            schema=schema,
            rows=np.empty((0, p), dtype=np.int16),
            labels=np.empty((0,), dtype=np.int8),
        )

    if fit:
        schema, flags = _fit_schema(kept)
    else:
        schema, flags = prior_schema, []
        missing = [n for n in MODEL_VARIABLES if n not in schema.names]
        if missing:
            raise DataError(f"prior schema lacks features: {missing}")

    rows = np.asarray(
        [
            schema.encode_values({n: getattr(rec, n) for n in schema.names})
            for rec in kept
        ],
        dtype=np.int16,
    )
    labels = np.asarray([derive_response(rec.report_count) for rec in kept], dtype=np.int8)
    return FeatureFrame(schema=schema, rows=rows, labels=labels, flags=flags)
