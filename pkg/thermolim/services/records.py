"""Append-only results files and their summary tables.

One ExperimentRecord per line, serialized as JSON with schema version "v1".
"""

import csv
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ..errors import RecordFormatError
from .sampling import mean_and_stderr

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"

CSV_HEADER = ("experiment", "param", "value", "stderr", "volume", "normalized", "seed")

# Relative tolerance on normalized == value / volume
NORMALIZATION_TOL = 1e-9


class ExperimentRecord(BaseModel):
    """One evaluation of an energy on one domain."""

    model_config = ConfigDict(extra="forbid")

    v: Literal["v1"] = SCHEMA_VERSION
    experiment: str
    model: str
    params: dict[str, float] = {}
    domain: str
    param: float  # ell, or the index n of a domain sequence
    value: float
    stderr: float
    volume: float
    normalized: float
    seed: int
    translation_radius: float
    wall_time: float | None = None  # only with THERMOLIM_RECORD_WALL_TIME

    @field_validator("stderr", "volume")
    @classmethod
    def validate_nonnegative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be non-negative")
        return v

    @model_validator(mode="after")
    def validate_normalized(self) -> "ExperimentRecord":
        if self.volume > 0:
            expected = self.value / self.volume
            if abs(self.normalized - expected) > NORMALIZATION_TOL * max(1.0, abs(expected)):
                raise ValueError(f"normalized {self.normalized} != value / volume = {expected}")
        return self


def persist(records: Iterable[ExperimentRecord], path: Path | str) -> int:
    """
    Append records to a results file.

    Args:
        records: Records in the order they should appear
        path: Results file, created when missing

    Returns:
        Number of records written
    """
    lines = [record.model_dump_json() + "\n" for record in records]
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("a", encoding="utf-8", newline="\n") as f:
        f.writelines(lines)
    logger.info(f"Appended {len(lines)} records to {target}")
    return len(lines)


def read_records(path: Path | str) -> list[ExperimentRecord]:
    """
    Parse every record of a results file.

    Raises:
        RecordFormatError: A line is not a valid record (carries the 1-based line number)
    """
    records = []
    with Path(path).open(encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(ExperimentRecord.model_validate_json(line))
            except ValidationError as e:
                reason = e.errors()[0].get("msg", str(e)) if e.errors() else str(e)
                raise RecordFormatError(number, reason) from e
    return records


def merge(sources: Sequence[Path | str], target: Path | str) -> int:
    """Append the records of several results files, in the given order, to target."""
    total = 0
    for source in sources:
        total += persist(read_records(source), target)
    return total


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    param: float
    count: int
    mean: float
    stderr: float
    spread: float
    residual: float


def summarize(records: Sequence[ExperimentRecord]) -> list[SummaryRow]:
    """
    Aggregate normalized values per (experiment, param).

    The residual of a row is |mean - e_bar| with e_bar the mean at the
    largest param of the same experiment.
    """
    groups: dict[tuple[str, float], list[float]] = {}
    for record in records:
        groups.setdefault((record.experiment, record.param), []).append(record.normalized)

    terminal: dict[str, tuple[float, float]] = {}
    for (experiment, param), values in groups.items():
        if experiment not in terminal or param > terminal[experiment][0]:
            terminal[experiment] = (param, mean_and_stderr(values)[0])

    rows = []
    for (experiment, param), values in groups.items():
        mean, stderr = mean_and_stderr(values)
        rows.append(
            SummaryRow(
                experiment=experiment,
                param=param,
                count=len(values),
                mean=mean,
                stderr=stderr,
                spread=max(values) - min(values),
                residual=abs(mean - terminal[experiment][1]),
            )
        )
    return sorted(rows, key=lambda r: (r.experiment, r.param))


def report(path: Path | str) -> list[SummaryRow]:
    """Summary table of a results file."""
    return summarize(read_records(path))


def format_report(rows: Sequence[SummaryRow]) -> str:
    header = f"{'experiment':<24} {'param':>8} {'n':>5} {'mean':>14} {'spread':>12} {'residual':>12}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.experiment:<24} {row.param:>8g} {row.count:>5d} {row.mean:>14.8g} "
            f"{row.spread:>12.4g} {row.residual:>12.4g}"
        )
    return "\n".join(lines)


def write_csv(records: Sequence[ExperimentRecord], path: Path | str) -> None:
    """Per-record CSV for plotting, header `experiment,param,value,stderr,volume,normalized,seed`."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.experiment, repr(r.param), repr(r.value), repr(r.stderr), repr(r.volume), repr(r.normalized), r.seed]
            )
