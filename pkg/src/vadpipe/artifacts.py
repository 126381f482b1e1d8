"""Deterministic artifact IO: JSONL files, content hashing, archive helpers.

Every stage artifact must serialize byte-identically for a fixed seed, so
all JSON here is written with sorted keys and no timestamps, and zip archives
carry a fixed entry date.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path
from typing import Any, Iterable, Iterator

# Fixed timestamp for zip entries; wall-clock times would break byte-identical
# reruns.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and stable separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def dump_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def load_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write one canonical-JSON record per line; returns record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w") as fh:
        for rec in records:
            fh.write(canonical_json(rec) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_text(text: str) -> str:
    return sha256_bytes(text.encode("utf-8"))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_tree(root: str | Path) -> str:
    """Hash of a directory: file names plus contents, in sorted order."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(sha256_file(path).encode())
    return h.hexdigest()


def write_archive(path: str | Path, entries: dict[str, bytes]) -> None:
    """Write a zip archive with deterministic entry order and timestamps."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(entries):
            info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, entries[name])


def read_archive(path: str | Path) -> dict[str, bytes]:
    with zipfile.ZipFile(path) as zf:
        return {name: zf.read(name) for name in zf.namelist()}


def buffer_of(write_fn) -> bytes:
    """Run `write_fn(fileobj)` against an in-memory buffer, return its bytes."""
    buf = io.BytesIO()
    write_fn(buf)
    return buf.getvalue()
