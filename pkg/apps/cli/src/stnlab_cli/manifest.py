"""Run manifests: what ran, with which configuration, and what it wrote"""

import hashlib
from pathlib import Path
from typing import Dict, List, Union

from stnlab_common.models import RunManifest

MANIFEST_NAME = "manifest.txt"


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_entries(manifest: RunManifest) -> Dict[str, str]:
    entries = {
        "code_version": manifest.code_version,
        "command": manifest.command,
        "seed": "" if manifest.seed is None else str(manifest.seed),
        "spec.json": manifest.spec_json or "",
        "wall_clock_seconds": f"{manifest.wall_clock_seconds:.3f}",
    }
    entries.update({f"config.{key}": value for key, value in manifest.config.items()})
    entries.update({f"output.{name}.sha256": digest for name, digest in manifest.outputs.items()})
    return entries


def write_manifest(out_dir: Union[str, Path], manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    lines = [f"{key}={value}" for key, value in sorted(manifest_entries(manifest).items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def hash_outputs(out_dir: Union[str, Path], names: List[str]) -> Dict[str, str]:
    return {name: sha256_file(Path(out_dir) / name) for name in names}


def read_manifest(path: Union[str, Path]) -> Dict[str, str]:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            key, value = line.split("=", 1)
            entries[key] = value
    return entries


def verify_manifest(path: Union[str, Path]) -> List[str]:
    """Names of listed outputs that are missing or whose content changed"""
    path = Path(path)
    problems = []
    for key, digest in read_manifest(path).items():
        if not (key.startswith("output.") and key.endswith(".sha256")):
            continue
        name = key[len("output.") : -len(".sha256")]
        target = path.parent / name
        if not target.exists() or sha256_file(target) != digest:
            problems.append(name)
    return problems
