"""Append-only JSON-lines audit trail and logging setup for CLI runs."""
from __future__ import annotations

import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

DEFAULT_AUDIT = "rescue-planner-audit.log"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def audit_path() -> Path:
    return Path(os.environ.get("RESCUE_PLANNER_AUDIT_PATH", DEFAULT_AUDIT))


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def write_audit(entry: dict, path: Optional[Path] = None) -> None:
    # one compact JSON object per line
    target = path or audit_path()
    with open(target, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, separators=(",", ":"), default=str) + "\n")


def safe_audit(entry: dict, path: Optional[Path] = None) -> bool:
    """Write an audit entry; auditing must not break the CLI."""
    try:
        write_audit(entry, path)
        return True
    except OSError as e:
        logging.getLogger(__name__).warning("audit write failed: %s", e)
        return False


def read_audit(path: Optional[Path] = None) -> list:
    entries = []
    try:
        with open(path or audit_path(), "r", encoding="utf-8") as fh:
            for ln in fh:
                ln = ln.strip()
                if not ln:
                    continue
                try:
                    entries.append(json.loads(ln))
                except json.JSONDecodeError:
                    continue
    except FileNotFoundError:
        return []
    return entries


def configure_logging(level: str = "WARNING") -> None:
    root = logging.getLogger("rescue_planner")
    root.setLevel(level.upper())
    if not any(getattr(h, "_rescue_planner", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._rescue_planner = True
        root.addHandler(handler)
