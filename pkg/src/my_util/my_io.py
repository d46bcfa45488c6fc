"""Binary + JSON bundle IO and CSV helpers used for every exported artifact."""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _bundle_paths(path: PathLike) -> Tuple[Path, Path]:
    base = Path(path)
    if base.suffix in (".bin", ".json"):
        base = base.with_suffix("")
    return base.with_suffix(".bin"), base.with_suffix(".json")


def write_array_bundle(path: PathLike, array: np.ndarray, header: Dict[str, Any]) -> Path:
    """
    Write `array` as a flat little-endian binary file next to a JSON header.

    Complex arrays are stored as interleaved complex128, real ones as float64.
    Returns the path of the JSON header.
    """
    bin_path, json_path = _bundle_paths(path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(array)
    dtype = "<c16" if np.iscomplexobj(arr) else "<f8"
    flat = np.ascontiguousarray(arr, dtype=dtype).ravel(order="C")
    flat.tofile(bin_path)
    meta = dict(header)
    meta.update({"dtype": dtype, "shape": list(arr.shape), "data": bin_path.name})
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    logger.debug(f"Wrote {arr.size} values to {bin_path}")
    return json_path


def read_array_bundle(path: PathLike) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Inverse of `write_array_bundle`."""
    bin_path, json_path = _bundle_paths(path)
    meta = json.loads(json_path.read_text())
    data = np.fromfile(bin_path.parent / meta["data"], dtype=meta["dtype"])
    return data.reshape(meta["shape"]), meta


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows with `repr`-formatted floats so reruns are byte-identical."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([format_cell(value) for value in row])
    return out


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return repr(complex(value))
    return str(value)
