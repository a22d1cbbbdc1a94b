"""Run manifests: flat, human-diffable key-value files with input hashes,
written before work starts so a crashed run is still self-describing."""

from __future__ import annotations

import hashlib
from pathlib import Path


class ManifestError(Exception):
    pass


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(entries: dict) -> str:
    canon = "\n".join(f"{k}={entries[k]}" for k in sorted(entries))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def write_manifest(path, entries: dict) -> None:
    entries = dict(entries)
    entries["config_hash"] = config_hash(entries)
    with open(path, "w", encoding="utf-8") as fh:
        for k in sorted(entries):
            fh.write(f"{k} = {entries[k]}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ManifestError(f"{path}: malformed line {line!r}")
            out[key] = value
    return out


def start_run(run_dir, entries: dict) -> Path:
    """Create the run directory and write its manifest first.

    Refuses to reuse a directory whose manifest hash differs from the new
    configuration (resume with altered config).
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.txt"
    if manifest_path.exists():
        old = read_manifest(manifest_path)
        new_hash = config_hash(dict(entries))
        if old.get("config_hash") != new_hash:
            raise ManifestError(
                f"{run_dir}: existing manifest has config_hash {old.get('config_hash')}, "
                f"new configuration hashes to {new_hash}; refusing to resume with an altered config"
            )
    run_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest_path, entries)
    return run_dir


def derive_seeds(base_seed: int, n: int) -> list[int]:
    """Deterministic per-run seeds from one base seed."""
    out = []
    for i in range(n):
        digest = hashlib.sha256(f"{base_seed}:{i}".encode()).digest()
        out.append(int.from_bytes(digest[:4], "big"))
    return out
