"""Deterministic, atomic file output with an embedded metadata header."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any

from . import __version__


def metadata(command: str, seed: int | None, config: dict[str, Any]) -> dict[str, Any]:
    return {"tool": "qficompress", "version": __version__, "command": command, "seed": seed, "config": config}


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, meta: dict[str, Any], payload: dict[str, Any]) -> None:
    # float repr is the shortest string that round-trips the IEEE double exactly
    text = json.dumps({"metadata": meta, **payload}, indent=2, sort_keys=False, allow_nan=True)
    write_atomic(path, text + "\n")


def csv_header(meta: dict[str, Any]) -> list[str]:
    return [f"{meta['tool']} {meta['version']} command={meta['command']} seed={meta['seed']}", "config: " + json.dumps(meta["config"], sort_keys=True)]


def fmt(x: float) -> str:
    return repr(float(x))
