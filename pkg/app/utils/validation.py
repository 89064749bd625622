# app/utils/validation.py
import re
from pathlib import Path

from app.core.exceptions import ContractError

CELL_NAME = re.compile(r'^(parallel|permuted|soft)-[A-Za-z]+\d+-trial\d+$')


def validate_cell_name(name: str) -> bool:
    """Cell directories are named <mode>-<axis><value>-trial<t>"""
    if not name or not isinstance(name, str):
        return False
    return CELL_NAME.match(name) is not None


def sanitize_filename(filename: str) -> str:
    """Sanitize a run or task name for use as a file name"""

    if not filename:
        return ""

    # Remove path separators and dangerous characters
    sanitized = re.sub(r'[<>:"/\\|?*\s]', '_', filename)
    sanitized = sanitized.replace('..', '')

    return sanitized[:255]


def ensure_within(base, path) -> Path:
    """Resolve path and refuse anything outside base"""
    base = Path(base).resolve()
    resolved = Path(path).resolve()
    if resolved != base and base not in resolved.parents:
        raise ContractError(f"{resolved} is outside the output directory {base}")
    return resolved
