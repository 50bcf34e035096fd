"""On-disk artifacts: CSV tables, trajectory dumps, and run manifests.

Floats are written with ``repr`` (shortest exact round trip) so reruns of
a deterministic campaign produce byte-identical files.  A manifest lists
the SHA-256 of every file a run wrote; files that legitimately vary
between runs (timings) are marked non-deterministic and replay skips
them.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA = 1


def format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


# -- trajectory dumps --------------------------------------------------------

TRAJECTORY_HEADER = ["sample_id", "block", "trial", "choice", "reward"]


def write_trajectories_csv(path: str | Path, choices: np.ndarray, rewards: np.ndarray) -> None:
    """Columnar dump of (n, B, T) choice/reward arrays."""
    n, n_blocks, n_trials = choices.shape

    def rows():
        for i in range(n):
            for b in range(n_blocks):
                for t in range(n_trials):
                    yield (i, b, t, choices[i, b, t], rewards[i, b, t])

    write_csv(path, TRAJECTORY_HEADER, rows())


def read_trajectories_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    _, rows = read_csv(path)
    data = np.array(rows, dtype=np.int64)
    n = data[:, 0].max() + 1
    n_blocks = data[:, 1].max() + 1
    n_trials = data[:, 2].max() + 1
    choices = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    rewards = np.zeros((n, n_blocks, n_trials), dtype=np.int64)
    choices[data[:, 0], data[:, 1], data[:, 2]] = data[:, 3]
    rewards[data[:, 0], data[:, 1], data[:, 2]] = data[:, 4]
    return choices, rewards


def write_trajectories_npz(
    path: str | Path, choices: np.ndarray, rewards: np.ndarray, design_probs: np.ndarray
) -> None:
    """Binary cache: uint8 choice/reward arrays plus the design they used."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        choices=choices.astype(np.uint8),
        rewards=rewards.astype(np.uint8),
        design=np.asarray(design_probs, dtype=np.float64),
    )


def read_trajectories_npz(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with np.load(path) as data:
        return (
            data["choices"].astype(np.int64),
            data["rewards"].astype(np.int64),
            data["design"],
        )


# -- manifests ---------------------------------------------------------------

def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class Manifest:
    command: str
    args: dict
    package_version: str
    files: dict  # relpath -> {"sha256": str, "deterministic": bool}
    status: str = "complete"
    schema: int = MANIFEST_SCHEMA


def write_manifest(
    out_dir: str | Path,
    command: str,
    args: dict,
    nondeterministic: set[str] = frozenset(),
    status: str = "complete",
) -> Path:
    """Hash every file under out_dir (except the manifest) and write it."""
    from . import __version__

    out_dir = Path(out_dir)
    files = {}
    for path in sorted(out_dir.rglob("*")):
        if not path.is_file() or path.name == MANIFEST_NAME:
            continue
        rel = path.relative_to(out_dir).as_posix()
        files[rel] = {
            "sha256": sha256_file(path),
            "deterministic": rel not in nondeterministic,
        }
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "args": args,
        "package_version": __version__,
        "status": status,
        "files": files,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: str | Path) -> dict:
    manifest = json.loads(Path(path).read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"unsupported manifest schema {manifest.get('schema')}")
    return manifest
