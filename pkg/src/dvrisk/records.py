"""Case records and the CSV interchange format.

A case record is one reported domestic-violence case for one victim in one
year. Missing values are represented as ``None`` in memory and as empty
strings on disk; a *malformed* value (unparseable or invariant-breaking) is
a different thing and is rejected at ingestion time.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

__all__ = [
    "CaseRecord",
    "DataError",
    "CSV_FIELDS",
    "GENDERS",
    "REPORTER_OCCUPATIONS",
    "read_records_csv",
    "write_records_csv",
]


class DataError(ValueError):
    """Raised for malformed input data (CLI exit code 2)."""


GENDERS = ("male", "female")
REPORTER_OCCUPATIONS = ("social_worker", "hospital_staff", "police", "other")

CSV_FIELDS = (
    "case_id",
    "report_count",
    "tipvda_score",
    "dv_duration_months",
    "maimed",
    "occupation",
    "education",
    "district",
    "village",
    "victim_gender",
    "victim_age",
    "low_mid_income",
    "disability_or_mental_illness",
    "reporter_occupation",
    "case_type_raw",
    "latitude",
    "longitude",
)


@dataclass
class CaseRecord:
    case_id: str
    report_count: int | None = None
    tipvda_score: int | None = None
    dv_duration_months: int | None = None
    maimed: str | None = None
    occupation: str | None = None
    education: str | None = None
    district: str | None = None
    village: str | None = None
    victim_gender: str | None = None
    victim_age: int | None = None
    low_mid_income: bool | None = None
    disability_or_mental_illness: bool | None = None
    reporter_occupation: str | None = None
    case_type_raw: str = ""
    latitude: float | None = None
    longitude: float | None = None

    def validate(self) -> list[str]:
        """Return a list of 'field: problem' strings; empty means valid."""
        problems = []
        if not self.case_id:
            problems.append("case_id: must be nonempty")
        if self.report_count is not None and self.report_count < 1:
            problems.append("report_count: must be >= 1")
        if self.tipvda_score is not None and self.tipvda_score < 0:
            problems.append("tipvda_score: must be >= 0")
        if self.dv_duration_months is not None and self.dv_duration_months < 0:
            problems.append("dv_duration_months: must be >= 0")
        if self.victim_gender is not None and self.victim_gender not in GENDERS:
            problems.append(f"victim_gender: must be one of {GENDERS}")
        if self.victim_age is not None and self.victim_age < 0:
            problems.append("victim_age: must be >= 0")
        if (
            self.reporter_occupation is not None
            and self.reporter_occupation not in REPORTER_OCCUPATIONS
        ):
            problems.append(
                f"reporter_occupation: must be one of {REPORTER_OCCUPATIONS}"
            )
        if self.latitude is not None and not -90.0 <= self.latitude <= 90.0:
            problems.append("latitude: must be in [-90, 90]")
        if self.longitude is not None and not -180.0 <= self.longitude <= 180.0:
            problems.append("longitude: must be in [-180, 180]")
        return problems


def _parse_int(raw: str, field: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"{field}: not an integer: {raw!r}") from None


def _parse_float(raw: str, field: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"{field}: not a number: {raw!r}") from None


def _parse_bool(raw: str, field: str) -> bool:
    if raw == "1":
        return True
    if raw == "0":
        return False
    raise DataError(f"{field}: booleans are 0/1, got {raw!r}")


_INT_FIELDS = {"report_count", "tipvda_score", "dv_duration_months", "victim_age"}
_FLOAT_FIELDS = {"latitude", "longitude"}
_BOOL_FIELDS = {"low_mid_income", "disability_or_mental_illness"}


def record_from_row(row: dict[str, str]) -> CaseRecord:
    """Build a CaseRecord from one CSV row dict; raises DataError if malformed."""
    values: dict[str, object] = {}
    for name in CSV_FIELDS:
        raw = (row.get(name) or "").strip()
        if raw == "":
            values[name] = "" if name == "case_type_raw" else None
            continue
        if name in _INT_FIELDS:
            values[name] = _parse_int(raw, name)
        elif name in _FLOAT_FIELDS:
            values[name] = _parse_float(raw, name)
        elif name in _BOOL_FIELDS:
            values[name] = _parse_bool(raw, name)
        else:
            values[name] = raw
    if values["case_id"] is None:
        raise DataError("case_id: must be nonempty")
    rec = CaseRecord(**values)  # type: ignore[arg-type]
    problems = rec.validate()
    if problems:
        raise DataError("; ".join(problems))
    return rec


def read_records_csv(path_or_file, lenient: bool = False):
    """Read case records from CSV.

    The header must carry exactly the CaseRecord field names. Returns
    ``(records, skipped)`` where ``skipped`` is a list of
    ``(line_number, message)`` for rows rejected under ``lenient=True``.
    Without ``lenient``, the first malformed row is fatal.
    """
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "r", encoding="utf-8", newline="") as fh:
            return read_records_csv(fh, lenient=lenient)

    reader = csv.DictReader(path_or_file)
    if reader.fieldnames is None:
        raise DataError("empty CSV: no header row")
    got = set(reader.fieldnames)
    want = set(CSV_FIELDS)
    if got != want:
        missing = sorted(want - got)
        extra = sorted(got - want)
        parts = []
        if missing:
            parts.append(f"missing columns {missing}")
        if extra:
            parts.append(f"unexpected columns {extra}")
        raise DataError("bad CSV header: " + ", ".join(parts))

    records: list[CaseRecord] = []
    skipped: list[tuple[int, str]] = []
    for row in reader:
        line = reader.line_num
        try:
            records.append(record_from_row(row))
        except DataError as exc:
            if lenient:
                skipped.append((line, str(exc)))
            else:
                raise DataError(f"line {line}: {exc}") from None
    return records, skipped


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_records_csv(records, path_or_file) -> None:
    """Write records in the canonical CSV layout (UTF-8, booleans as 0/1)."""
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            write_records_csv(records, fh)
            return
    writer = csv.writer(path_or_file)
    writer.writerow(CSV_FIELDS)
    for rec in records:
        writer.writerow([_format_value(getattr(rec, f)) for f in CSV_FIELDS])


def records_to_csv_text(records) -> str:
    buf = io.StringIO()
    write_records_csv(records, buf)
    return buf.getvalue()
