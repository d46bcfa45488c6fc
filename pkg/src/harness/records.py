"""Stability records and their CSV / JSON writers."""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from src.my_util.my_io import read_csv, write_csv

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_DEGENERATE = "degenerate"
STATUS_FAILED = "failed"
SCHEDULE_RTOL = 1e-9

# Columns written to CSV; timings and CGO diagnostics go to JSON only.
CSV_COLUMNS = [
    "variant",
    "dimension",
    "lam_index",
    "level_index",
    "lam",
    "level",
    "status",
    "e_lambda",
    "b_lambda",
    "delta",
    "frak_c",
    "tau_selected",
    "tau",
    "s",
    "s_cutoff",
    "eps",
    "modes",
    "error_hm1",
    "relative_error_hm1",
    "tail_bound",
    "tail_norm_bound",
    "prefactor",
    "phi_c",
    "modulus",
    "triple_log_branch",
    "max_remainder",
    "max_runge_defect",
    "error",
]


@dataclass
class StabilityRecord:
    """One (λ, perturbation level) row of a stability sweep."""

    variant: str
    lam_index: int
    level_index: int
    lam: float
    level: float
    status: str = STATUS_OK
    e_lambda: Optional[float] = None
    b_lambda: Optional[float] = None
    delta: Optional[float] = None
    frak_c: Optional[float] = None
    tau_selected: Optional[float] = None
    tau: Optional[float] = None
    s: Optional[float] = None
    s_cutoff: Optional[float] = None
    eps: Optional[float] = None
    modes: Optional[int] = None
    error_hm1: Optional[float] = None
    relative_error_hm1: Optional[float] = None
    tail_bound: Optional[float] = None
    tail_norm_bound: Optional[float] = None
    prefactor: Optional[float] = None
    phi_c: Optional[float] = None
    modulus: Optional[float] = None
    triple_log_branch: Optional[bool] = None
    max_remainder: Optional[float] = None
    max_runge_defect: Optional[float] = None
    error: str = ""
    dimension: Optional[int] = None
    cgo: Dict[str, float] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.status != STATUS_FAILED

    def check(self) -> None:
        """Stored norms are nonnegative and (τ, s, ε) satisfy the schedule when set."""
        for name in ("delta", "error_hm1", "tail_bound", "tail_norm_bound", "modulus", "e_lambda", "b_lambda"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} is negative: {value}")
        if self.eps is not None and not 0.0 < self.eps < 1.0:
            raise ValueError(f"ε={self.eps} outside (0, 1)")
        if self.tau is not None and self.s is not None and self.dimension is not None:
            expected = self.tau ** (2.0 / (self.dimension + 2))
            if abs(self.s - expected) > SCHEDULE_RTOL * expected:
                raise ValueError(f"s={self.s} does not match τ^(2/(n+2))={expected} for τ={self.tau}, n={self.dimension}")
        if self.s_cutoff is not None and self.s_cutoff <= 0:
            raise ValueError(f"low-pass cutoff must be positive, got {self.s_cutoff}")

    def csv_row(self) -> List[Any]:
        return [getattr(self, column) for column in CSV_COLUMNS]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def write_records_csv(path: Union[str, Path], records: Sequence[StabilityRecord]) -> Path:
    out = write_csv(path, CSV_COLUMNS, (record.csv_row() for record in records))
    logger.info(f"Wrote {len(records)} records to {out}")
    return out


def write_records_json(path: Union[str, Path], records: Sequence[StabilityRecord], meta: Dict[str, Any]) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {"meta": meta, "records": [record.to_dict() for record in records]}
    out.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))
    return out


def read_records_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    return read_csv(path)
