# fsforge/src/core/io.py
import json
import logging
import os
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, Union

from .config import settings
from .exceptions import ProblemFileError
from .models import to_jsonable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ==================== Input ====================

def load_document(path: PathLike) -> Dict[str, Any]:
    """Read a JSON or TOML problem/family file into a dict."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ProblemFileError(f"Cannot read {path}: {e}", path=str(path))

    try:
        if path.suffix.lower() == ".toml":
            document = tomllib.loads(raw.decode("utf-8"))
        else:
            document = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise ProblemFileError(f"Cannot parse {path}: {e}", path=str(path))

    if not isinstance(document, dict):
        raise ProblemFileError(f"{path} must contain a table/object at top level", path=str(path))
    return document


def parse_coefficients(raw: Any, where: str = "coefficients") -> list:
    """Coefficient list of [re, im] pairs (or bare reals), constant term first."""
    if not isinstance(raw, list) or not raw:
        raise ProblemFileError(f"'{where}' must be a non-empty list")
    parsed = []
    for k, entry in enumerate(raw):
        try:
            if isinstance(entry, (list, tuple)):
                if len(entry) != 2:
                    raise ValueError("pair must have two entries")
                parsed.append(complex(float(entry[0]), float(entry[1])))
            else:
                parsed.append(complex(float(entry), 0.0))
        except (TypeError, ValueError) as e:
            raise ProblemFileError(f"'{where}[{k}]' is not a number pair: {e}")
    return parsed


# ==================== Output ====================

def dumps_canonical(payload: Any) -> str:
    """Byte-stable JSON: sorted keys, no NaN, trailing newline."""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path: PathLike, content: Union[str, bytes]) -> Path:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode("utf-8") if isinstance(content, str) else content
        fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise ProblemFileError(f"Cannot write {path}: {e}", path=str(path))
    logger.debug(f"wrote {path}")
    return path


def write_json(path: PathLike, payload: Any) -> Path:
    return write_atomic(path, dumps_canonical(payload))


def version_string() -> str:
    """git-describe style version, falling back to the configured release."""
    fallback = f"v{settings.APP_VERSION}"
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=str(Path(__file__).resolve().parent),
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return fallback
    described = result.stdout.strip()
    if result.returncode != 0 or not described:
        return fallback
    return f"{fallback}-{described}" if not described.startswith("v") else described
