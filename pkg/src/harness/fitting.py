"""Least-squares scaling fits over experiment records."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from src.harness.records import STATUS_FAILED, StabilityRecord

logger = logging.getLogger(__name__)

RecordLike = Union[StabilityRecord, Mapping[str, Any]]


class Coordinates(Enum):
    LOGLOG = "loglog"
    LINEAR = "linear"
    SEMILOGX = "semilogx"
    SEMILOGY = "semilogy"


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    stderr: float
    intercept: float
    count: int
    coordinates: Coordinates

    def __str__(self) -> str:
        return f"slope = {self.slope:.6g} ± {self.stderr:.3g} ({self.count} points, {self.coordinates.value})"


def _value(record: RecordLike, name: str) -> Optional[float]:
    raw = getattr(record, name) if isinstance(record, StabilityRecord) else record.get(name)
    if raw is None or raw == "":
        return None
    return float(raw)


def _status(record: RecordLike) -> str:
    return record.status if isinstance(record, StabilityRecord) else str(record.get("status", ""))


def _points(
    records: Sequence[RecordLike], x_field: str, y_field: str, coordinates: Coordinates
) -> Tuple[np.ndarray, np.ndarray]:
    log_x = coordinates in (Coordinates.LOGLOG, Coordinates.SEMILOGX)
    log_y = coordinates in (Coordinates.LOGLOG, Coordinates.SEMILOGY)
    xs: List[float] = []
    ys: List[float] = []
    for record in records:
        if _status(record) == STATUS_FAILED:
            continue
        x, y = _value(record, x_field), _value(record, y_field)
        if x is None or y is None or not (math.isfinite(x) and math.isfinite(y)):
            continue
        if (log_x and x <= 0) or (log_y and y <= 0):
            continue
        xs.append(math.log(x) if log_x else x)
        ys.append(math.log(y) if log_y else y)
    return np.asarray(xs), np.asarray(ys)


def fit_scaling(
    records: Sequence[RecordLike],
    x_field: str,
    y_field: str,
    coordinates: Union[Coordinates, str] = Coordinates.LOGLOG,
) -> ScalingFit:
    """
    Slope ± standard error of y against x.

    Failed records, missing values and (in log coordinates) nonpositive values
    are skipped. At least two usable points with distinct x are required.
    """
    coordinates = Coordinates(coordinates)
    x, y = _points(records, x_field, y_field, coordinates)
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ValueError(f"Need two points with distinct {x_field} to fit, got {x.size}")
    if np.ptp(y) == 0.0:
        return ScalingFit(0.0, 0.0, float(y[0]), int(x.size), coordinates)
    result = stats.linregress(x, y)
    fit = ScalingFit(float(result.slope), float(result.stderr), float(result.intercept), int(x.size), coordinates)
    logger.info(f"fit {y_field} vs {x_field}: {fit}")
    return fit


def triple_log_coordinate(delta: float, theta: float, n: int = 3) -> float:
    """L(δ^{-θ})^{-2/(n+2)}, the triple-log branch of Φ_c at r = δ^{-θ}; nan off that branch."""
    if not 0.0 < delta < 1.0:
        return math.nan
    log_r = -theta * math.log(delta)
    if log_r <= 1.0:
        return math.nan
    log_log_r = math.log(log_r)
    if log_log_r <= 1.0:
        return math.nan
    return math.log(log_log_r) ** (-2.0 / (n + 2))
