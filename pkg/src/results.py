"""
Result tables for qheat.

Sweep outputs are written as CSV or JSON lines with the same columns, each
file opening with '#'-prefixed provenance lines (tool version, config hash,
scheme, tolerances and a timestamp, the timestamp always last).
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from src import __version__

logger = logging.getLogger("QHeat.Results")

REQUIRED_COLUMNS = ("scheme", "status")
FLOAT_FORMAT = "%.12g"


@dataclass
class Provenance:
    """Where a table came from."""

    config_hash: str
    scheme: str
    tolerances: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    created: Optional[str] = None

    def header_lines(self) -> List[str]:
        created = self.created or datetime.now(timezone.utc).isoformat(timespec="seconds")
        return [
            f"# qheat {self.version}",
            f"# config_sha256: {self.config_hash}",
            f"# scheme: {self.scheme}",
            f"# tolerances: {json.dumps(self.tolerances, sort_keys=True)}",
            f"# created: {created}",
        ]

    @classmethod
    def parse(cls, lines: List[str]) -> "Provenance":
        """Inverse of header_lines."""
        values = {}
        for line in lines:
            body = line.lstrip("#").strip()
            if body.startswith("qheat "):
                values["version"] = body.split(" ", 1)[1]
            elif ":" in body:
                key, value = body.split(":", 1)
                values[key.strip()] = value.strip()
        return cls(
            config_hash=values.get("config_sha256", ""),
            scheme=values.get("scheme", ""),
            tolerances=json.loads(values.get("tolerances", "{}")),
            version=values.get("version", __version__),
            created=values.get("created"),
        )


@dataclass
class ResultTable:
    """Rows of one run plus their provenance.

    Every row carries the scheme and a convergence status.
    """

    frame: pd.DataFrame
    provenance: Provenance

    def __post_init__(self):
        missing = [c for c in REQUIRED_COLUMNS if c not in self.frame.columns]
        if missing:
            raise ValueError(f"result table must have columns {list(REQUIRED_COLUMNS)}, missing {missing}")

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)

    def failed_rows(self) -> int:
        return int((self.frame["status"] == "failed").sum())

    def all_failed(self) -> bool:
        return len(self.frame) > 0 and self.failed_rows() == len(self.frame)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """UTF-8 CSV, header row, minimal quoting, NaN as an empty field."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in self.provenance.header_lines():
                f.write(line + "\n")
            self.frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
        logger.info("Wrote %d rows to %s", len(self.frame), path)
        return path

    def to_jsonl(self, path: Union[str, Path]) -> Path:
        """One JSON object per row, provenance lines first."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in self.provenance.header_lines():
                f.write(line + "\n")
            for record in self.frame.to_dict(orient="records"):
                f.write(json.dumps({k: _plain(v) for k, v in record.items()}) + "\n")
        logger.info("Wrote %d rows to %s", len(self.frame), path)
        return path

    def write(self, path: Union[str, Path], fmt: str = "csv") -> List[Path]:
        """Write in ``csv``, ``jsonl`` or ``both``; the suffix of ``path`` is replaced."""
        path = Path(path)
        written = []
        if fmt in ("csv", "both"):
            written.append(self.to_csv(path.with_suffix(".csv")))
        if fmt in ("jsonl", "both"):
            written.append(self.to_jsonl(path.with_suffix(".jsonl")))
        if not written:
            raise ValueError(f"fmt must be csv, jsonl or both, got {fmt!r}")
        return written

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "ResultTable":
        path = Path(path)
        header = _header(path)
        frame = pd.read_csv(path, skiprows=len(header), keep_default_na=True)
        if "error" in frame.columns:
            frame["error"] = frame["error"].fillna("")
        return cls(frame=frame, provenance=Provenance.parse(header))

    @classmethod
    def read_jsonl(cls, path: Union[str, Path]) -> "ResultTable":
        path = Path(path)
        header = _header(path)
        with open(path, "r", encoding="utf-8") as f:
            records = [json.loads(line) for line in f if line.strip() and not line.startswith("#")]
        return cls(frame=pd.DataFrame(records), provenance=Provenance.parse(header))


def _header(path: Path) -> List[str]:
    lines = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            lines.append(line.rstrip("\n"))
    return lines


def _plain(value: Any) -> Any:
    """JSON-safe scalar; NaN becomes null."""
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and value != value:
        return None
    return value


def strip_timestamp(text: str) -> str:
    """File text without its ``# created:`` line, for determinism checks."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("# created:"))
