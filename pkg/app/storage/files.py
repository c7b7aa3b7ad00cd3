"""
Атомарная запись файлов и JSON
"""
import json
import logging
import os
import tempfile
from typing import Any, Union

from ..core.errors import FormatError, InvalidInputError

logger = logging.getLogger(__name__)


def atomic_write(path: str, data: Union[bytes, str]):
    """Temp file in the target directory, then os.replace"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    payload = data.encode('utf-8') if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, document: Any):
    atomic_write(path, json.dumps(document, indent=2, ensure_ascii=False) + '\n')


def read_json(path: str) -> Any:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except OSError as e:
        raise InvalidInputError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", e.pos, path) from e
