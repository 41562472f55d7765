import json
import os
from pathlib import Path
from typing import Any, Optional

from jeanie.errors import StructuralError
from jeanie.logging import logger


def read_json(path: Path, label: str) -> Any:
    """Load a JSON document, letting I/O errors propagate to the caller."""
    with open(path, "r", encoding="utf-8") as file:
        try:
            return json.load(file)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"{label} {path} is not valid JSON: {exc}") from exc


def save_json_atomic(path: Optional[Path], payload: Any, label: str, indent: Optional[int] = 2) -> bool:
    if path is None:
        return False

    temp_file: Optional[Path] = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        temp_file = path.with_suffix(path.suffix + ".tmp")
        with open(temp_file, "w", encoding="utf-8", newline="\n") as file:
            json.dump(payload, file, ensure_ascii=False, indent=indent, sort_keys=True)
            file.write("\n")

        os.replace(temp_file, path)
        logger.info("Saved %s to %s", label, path)
        return True
    except Exception as exc:
        logger.error("Failed to save %s: %s", label, exc)
        try:
            if temp_file and temp_file.exists():
                temp_file.unlink()
        except Exception:
            pass
        return False


__all__ = ["read_json", "save_json_atomic"]
