"""Optional on-disk memo for count tables, enabled by ASSEMBLY_LAB_CACHE."""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

ENV_VAR = "ASSEMBLY_LAB_CACHE"


class DiskCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @classmethod
    def from_env(cls) -> "DiskCache | None":
        root = os.environ.get(ENV_VAR)
        return cls(root) if root else None

    def _path(self, key: dict) -> Path:
        digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()
        return self.root / f"{digest[:32]}.json"

    def get(self, key: dict):
        path = self._path(key)
        try:
            with open(path, encoding="utf-8") as fh:
                blob = json.load(fh)
        except (OSError, ValueError):
            return None
        # guard against hash collisions and truncated writes
        return blob["value"] if blob.get("key") == key else None

    def put(self, key: dict, value) -> None:
        path = self._path(key)
        tmp = path.with_suffix(f".{os.getpid()}.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"key": key, "value": value}, fh)
        os.replace(tmp, path)
