from pathlib import Path
import sys


def get_repo_root() -> Path:
    return Path(__file__).resolve().parent.parent


def ensure_repo_on_path() -> Path:
    root = get_repo_root()
    root_str = str(root)
    if root_str not in sys.path:
        sys.path.insert(0, root_str)
    return root


def parse_values(raw: str) -> list[float]:
    """Comma-separated sweep values, e.g. ``1,2,3,4``."""
    values = [float(item) for item in raw.split(',') if item.strip()]
    if not values:
        raise SystemExit('at least one sweep value is required')
    return values
