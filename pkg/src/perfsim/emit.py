"""Deterministic CSV / JSON emission with provenance."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__


def provenance_line(config_sha: str, seed: int, scenario: str) -> str:
    return f"perfsim {__version__} scenario={scenario} config_sha256={config_sha} seed={seed}"


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.12g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], provenance: str) -> Path:
    lines = [f"# {provenance}", ",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def write_json(path: Path, payload: dict, provenance: str) -> Path:
    body = dict(payload)
    body["provenance"] = provenance
    path.write_text(json.dumps(_clean(body), sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8", newline="\n")
    return path
