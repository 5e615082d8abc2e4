"""Synthetic case-record generator calibrated to the published marginals.

Every distributional target (case-type mix, per-type gender/income/
disability rates, reporter score means, the 4% repeat-victimization rate)
is a config field, so tests can assert marginal recovery and the model
pipeline can be exercised end to end without any real casework data.

The repeat-victimization signal is planted only through model-visible
features: the tertile levels of the TIPVDA score and the abuse duration
carry the dominant weights and the four categorical variables carry
smaller per-level weights. The weighted sum is standardized, scaled by
``signal_strength`` (log-odds per standard deviation), and pushed through
a logistic whose intercept is solved so the mean positive probability
equals ``positive_rate``. Records are drawn independently; a repeat victim
is one record with a report count above two, not duplicated rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

import numpy as np

from .boundaries import BoundarySet, bundled_boundaries
from .preprocess import tertile_bin
from .records import CaseRecord, DataError

__all__ = [
    "CASE_TYPES",
    "GeneratorConfig",
    "generate",
    "load_config_file",
    "parse_override",
]

CASE_TYPES = ("IPV", "child_adolescent", "elderly", "intersibling_other")

# raw taxonomy labels emitted per category; the bundled mapping table
# classifies them back (plus a few aliases it never sees from here)
RAW_LABELS = {
    "IPV": ("marital violence", "intimate partner conflict", "ex-spouse stalking"),
    "child_adolescent": ("child abuse", "adolescent maltreatment"),
    "elderly": ("elder abuse", "elderly neglect"),
    "intersibling_other": ("sibling violence", "in-law conflict", "other family conflict"),
}


@dataclass
class GeneratorConfig:
    n_cases: int = 8850
    seed: int = 20150101
    # case-type mix and per-type demographics (Table 1 targets)
    type_mix: tuple = (0.52, 0.08, 0.06, 0.34)
    male_rate: tuple = (0.19, 0.54, 0.37, 0.41)
    low_income_rate: tuple = (0.087, 0.242, 0.092, 0.124)
    disability_rate: tuple = (0.021, 0.018, 0.039, 0.042)
    # per-type age-bucket mix over (0-18, 19-64, 65+); citywide 19-64 ~ 75%
    age_bucket_mix: tuple = (
        (0.03, 0.90, 0.07),
        (0.95, 0.05, 0.00),
        (0.02, 0.08, 0.90),
        (0.10, 0.80, 0.10),
    )
    # reporter occupations: (name, share, tipvda mean, tipvda sd)
    reporter_profiles: tuple = (
        ("social_worker", 0.50, 2.71, 0.19),
        ("police", 0.30, 2.30, 0.18),
        ("hospital_staff", 0.15, 3.54, 0.19),
        ("other", 0.05, 2.70, 0.20),
    )
    duration_mean_months: float = 24.0
    # categorical level tables: (level, share, planted weight)
    maimed_levels: tuple = (
        ("none", 0.40, 0.0),
        ("bruise", 0.30, 0.3),
        ("laceration", 0.15, 0.5),
        ("fracture", 0.13, 0.8),
        ("weapon_wound", 0.02, 1.0),
    )
    occupation_levels: tuple = (
        ("employed_fulltime", 0.35, 0.0),
        ("service_sector", 0.25, 0.2),
        ("homemaker", 0.20, 0.5),
        ("unemployed", 0.17, 0.8),
        ("student", 0.03, 0.4),
    )
    education_levels: tuple = (
        ("college_plus", 0.28, 0.0),
        ("high_school", 0.42, 0.2),
        ("junior_high", 0.18, 0.6),
        ("elementary", 0.09, 0.9),
        ("graduate_degree", 0.03, 0.1),
    )
    # districts are equally likely; most carry a graded planted risk weight
    district_weights: tuple = (
        ("D02", 0.05),
        ("D03", 0.1),
        ("D05", 0.15),
        ("D06", 0.05),
        ("D07", 0.2),
        ("D09", 0.1),
        ("D10", 0.05),
        ("D11", 0.3),
        ("D12", 0.15),
    )
    # response model; signal_strength is log-odds per standard deviation of
    # the planted score (0 disables the signal entirely)
    positive_rate: float = 0.04
    signal_strength: float = 8.0
    tipvda_weight: float = 0.6
    duration_weight: float = 1.2
    negative_two_report_rate: float = 0.3
    report_count_range: tuple = (3, 7)
    missing_rate: float = 0.0

    def validate(self) -> None:
        if self.n_cases < 0:
            raise DataError("n_cases must be >= 0")
        if abs(sum(self.type_mix) - 1.0) > 1e-9:
            raise DataError("type_mix must sum to 1")
        for name in ("male_rate", "low_income_rate", "disability_rate"):
            if any(not 0.0 <= r <= 1.0 for r in getattr(self, name)):
                raise DataError(f"{name}: rates must be in [0, 1]")
        if not 0.0 < self.positive_rate < 1.0:
            raise DataError("positive_rate must be in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise DataError("missing_rate must be in [0, 1)")
        for mix in self.age_bucket_mix:
            if abs(sum(mix) - 1.0) > 1e-9:
                raise DataError("each age_bucket_mix row must sum to 1")

    @classmethod
    def map_mode(cls, **overrides) -> "GeneratorConfig":
        """All four case types at the published city-wide mix (N=8850)."""
        return replace(cls(), **overrides)

    @classmethod
    def model_mode(cls, **overrides) -> "GeneratorConfig":
        """The intimate-partner extract the risk model trains on (N=3759)."""
        base = cls(n_cases=3759, type_mix=(1.0, 0.0, 0.0, 0.0))
        return replace(base, **overrides)


def _as_probs(pairs) -> np.ndarray:
    p = np.asarray(pairs, dtype=np.float64)
    total = p.sum()
    if total <= 0:
        raise DataError("shares must sum to a positive value")
    return p / total


def _solve_intercept(z: np.ndarray, beta: float, target: float) -> float:
    """Bisection for b0 with mean(sigmoid(b0 + beta*z)) == target."""
    lo, hi = -40.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mean = float(np.mean(1.0 / (1.0 + np.exp(-(mid + beta * z)))))
        if mean < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(config: GeneratorConfig, boundaries: BoundarySet | None = None) -> list[CaseRecord]:
    """Draw n_cases independent records; same config + seed, same records."""
    config.validate()
    n = config.n_cases
    if n == 0:
        return []
    if boundaries is None:
        boundaries = bundled_boundaries()
    rng = np.random.default_rng(config.seed)

    type_idx = rng.choice(len(CASE_TYPES), size=n, p=_as_probs(config.type_mix))
    male = rng.random(n) < np.asarray(config.male_rate)[type_idx]
    low_income = rng.random(n) < np.asarray(config.low_income_rate)[type_idx]
    disability = rng.random(n) < np.asarray(config.disability_rate)[type_idx]

    bucket_probs = np.asarray(config.age_bucket_mix, dtype=np.float64)[type_idx]
    draw = rng.random(n)
    cum = np.cumsum(bucket_probs, axis=1)
    bucket = (draw[:, None] >= cum).sum(axis=1)
    age_lo = np.asarray([0, 19, 65])[bucket]
    age_hi = np.asarray([18, 64, 95])[bucket]
    age = rng.integers(age_lo, age_hi + 1)

    rep_names = [p[0] for p in config.reporter_profiles]
    rep_idx = rng.choice(
        len(rep_names), size=n, p=_as_probs([p[1] for p in config.reporter_profiles])
    )
    rep_mean = np.asarray([p[2] for p in config.reporter_profiles])[rep_idx]
    rep_sd = np.asarray([p[3] for p in config.reporter_profiles])[rep_idx]
    tipvda = np.maximum(0, np.rint(rng.normal(rep_mean, rep_sd))).astype(np.int64)

    duration = rng.geometric(1.0 / config.duration_mean_months, size=n)

    def draw_levels(table):
        idx = rng.choice(len(table), size=n, p=_as_probs([row[1] for row in table]))
        names = np.asarray([row[0] for row in table])[idx]
        weights = np.asarray([row[2] for row in table])[idx]
        return names, weights

    maimed, w_maimed = draw_levels(config.maimed_levels)
    occupation, w_occ = draw_levels(config.occupation_levels)
    education, w_edu = draw_levels(config.education_levels)

    villages = boundaries.villages
    vil_idx = rng.integers(0, len(villages), size=n)
    district_weight_map = dict(config.district_weights)
    w_district = np.asarray(
        [district_weight_map.get(villages[i].district_id, 0.0) for i in vil_idx]
    )

    jitter_lon = rng.uniform(-0.004, 0.004, size=n)
    jitter_lat = rng.uniform(-0.006, 0.006, size=n)

    raw_labels = []
    for t in type_idx:
        options = RAW_LABELS[CASE_TYPES[t]]
        raw_labels.append(options[int(rng.integers(0, len(options)))])

    # planted score: tertile levels of the drawn score columns plus the
    # categorical level weights, standardized across this draw
    tip_lvl = np.asarray(tertile_bin(tipvda.tolist()).assignments) * 0.5
    dur_lvl = np.asarray(tertile_bin(duration.tolist()).assignments) * 0.5
    score = (
        config.tipvda_weight * tip_lvl
        + config.duration_weight * dur_lvl
        + w_maimed
        + w_occ
        + w_edu
        + w_district
    )
    sd = float(score.std())
    z = (score - score.mean()) / sd if sd > 0 else np.zeros(n)

    beta = config.signal_strength
    if beta == 0.0 or sd == 0.0:
        p_pos = np.full(n, config.positive_rate)
    else:
        b0 = _solve_intercept(z, beta, config.positive_rate)
        p_pos = 1.0 / (1.0 + np.exp(-(b0 + beta * z)))
    positive = rng.random(n) < p_pos

    lo, hi = config.report_count_range
    rc_pos = rng.integers(lo, hi + 1, size=n)
    rc_neg = 1 + (rng.random(n) < config.negative_two_report_rate).astype(np.int64)
    report_count = np.where(positive, rc_pos, rc_neg)

    if config.missing_rate > 0:
        miss = rng.random((n, 6)) < config.missing_rate
    else:
        miss = np.zeros((n, 6), dtype=bool)

    records = []
    for i in range(n):
        village = villages[vil_idx[i]]
        cx, cy = village.centroid
        records.append(
            CaseRecord(
                case_id=f"case-{i + 1:06d}",
                report_count=int(report_count[i]),
                tipvda_score=None if miss[i, 0] else int(tipvda[i]),
                dv_duration_months=None if miss[i, 1] else int(duration[i]),
                maimed=None if miss[i, 2] else str(maimed[i]),
                occupation=None if miss[i, 3] else str(occupation[i]),
                education=None if miss[i, 4] else str(education[i]),
                district=None if miss[i, 5] else village.district_id,
                village=village.village_id,
                victim_gender="male" if male[i] else "female",
                victim_age=int(age[i]),
                low_mid_income=bool(low_income[i]),
                disability_or_mental_illness=bool(disability[i]),
                reporter_occupation=rep_names[rep_idx[i]],
                case_type_raw=raw_labels[i],
                latitude=round(float(cy + jitter_lat[i]), 6),
                longitude=round(float(cx + jitter_lon[i]), 6),
            )
        )
    return records


def load_config_file(path) -> dict:
    """Flat ``key = value`` config lines; values parse as JSON when they
    can, else as bare strings. '#' starts a comment."""
    overrides: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            overrides[key] = parse_override(key, raw)
    return overrides


def parse_override(key: str, raw: str):
    valid = {f.name for f in fields(GeneratorConfig)}
    if key not in valid:
        raise DataError(f"unknown generator config field {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if isinstance(value, list):
        value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
    return value


def config_with_overrides(base: GeneratorConfig, overrides: dict) -> GeneratorConfig:
    return replace(base, **overrides)
