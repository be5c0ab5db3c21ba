"""Append-only result persistence with config-digest deduplication.

Layout under the store root (CLI --out-dir, else $DICKE_ED_RESULTS, else
./results):

    manifest.jsonl        one JSON line per run: digest, command, timestamp,
                          version, schema, file list, wall seconds, config
    <command>-<digest>*.csv   the run outputs; never overwritten
    <digest>.config.json      the exact configuration, re-executable

A run whose config digest already appears in the manifest (with its files
still present) is a cache hit; callers re-emit the stored primary file so
repeated identical invocations produce identical output.
"""

import hashlib
import json
import os
import subprocess
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["ResultStore", "config_digest", "describe_version", "CSV_SCHEMA_VERSION"]

CSV_SCHEMA_VERSION = 1
ENV_ROOT = "DICKE_ED_RESULTS"


def config_digest(config: dict) -> str:
    """Stable 16-hex digest of a JSON-serializable configuration."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def describe_version() -> str:
    """Package version, decorated with the git commit when inside a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class ResultStore:
    def __init__(self, root: str | os.PathLike | None = None):
        if root is None:
            root = os.environ.get(ENV_ROOT, "results")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = self.root / "manifest.jsonl"

    def entries(self) -> list[dict]:
        if not self.manifest.exists():
            return []
        out = []
        with open(self.manifest) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    def lookup(self, digest: str) -> dict | None:
        """Most recent manifest entry for this digest whose files all exist."""
        hit = None
        for entry in self.entries():
            if entry.get("digest") == digest:
                if all((self.root / f).exists() for f in entry.get("files", [])):
                    hit = entry
        return hit

    def record(self, digest: str, command: str, files: list[str],
               wall_s: float, config: dict) -> dict:
        entry = {
            "digest": digest,
            "command": command,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "version": describe_version(),
            "schema": CSV_SCHEMA_VERSION,
            "files": files,
            "wall_s": round(wall_s, 3),
        }
        cfg_name = f"{digest}.config.json"
        cfg_path = self.root / cfg_name
        if not cfg_path.exists():
            cfg_path.write_text(json.dumps(config, sort_keys=True, indent=1) + "\n")
        with open(self.manifest, "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def write_text(self, name: str, text: str) -> Path:
        """Write a run output; refuses to clobber differing content."""
        path = self.root / name
        if path.exists() and path.read_text() != text:
            raise FileExistsError(f"refusing to overwrite {path} with different content")
        path.write_text(text)
        return path

    def read_text(self, name: str) -> str:
        return (self.root / name).read_text()
