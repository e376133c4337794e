import dataclasses
import hashlib
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.16e"


def format_float(value: float) -> str:
    """17 significant digits, scientific notation, '.' separator."""
    return FLOAT_FORMAT % float(value)


def to_serializable(value: Any) -> Any:
    """Convert numpy, complex and dataclass values to plain JSON types."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_serializable(
            {f.name: getattr(value, f.name) for f in dataclasses.fields(value)}
        )
    if isinstance(value, dict):
        return {str(key): to_serializable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_serializable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_serializable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_serializable(value.real), to_serializable(value.imag)]
    if isinstance(value, (float, np.floating)):
        # JSON has no NaN or infinity
        return float(value) if math.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_name(f".{path.name}.tmp")
    with open(temporary, "wb") as handle:
        handle.write(payload)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(temporary, path)


def csv_bytes(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> bytes:
    frame = pd.DataFrame(list(rows), columns=list(columns))
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return text.encode("utf-8")


def json_bytes(payload: Dict) -> bytes:
    document = {"schema_version": SCHEMA_VERSION, **to_serializable(payload)}
    return (json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")


class ResultWriter:
    """Writes result files atomically under one output directory and keeps their inventory."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.inventory: Dict[str, str] = {}

    def _write(self, name: str, payload: bytes) -> Path:
        path = self.out_dir / name
        _atomic_write(path, payload)
        self.inventory[name] = hashlib.sha256(payload).hexdigest()
        logger.info(f"Wrote {path} ({len(payload)} bytes)")
        return path

    def write_csv(self, name: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        return self._write(name, csv_bytes(columns, rows))

    def write_json(self, name: str, payload: Dict) -> Path:
        return self._write(name, json_bytes(payload))

    def write_manifest(self, payload: Dict, name: str = "manifest.json") -> Path:
        """The manifest lists every file written before it, with content hashes."""
        files: List[Dict[str, Optional[str]]] = [
            {"name": key, "sha256": value} for key, value in sorted(self.inventory.items())
        ]
        path = self.out_dir / name
        _atomic_write(path, json_bytes({**payload, "files": files}))
        logger.info(f"Manifest written to {path} listing {len(files)} files")
        return path
