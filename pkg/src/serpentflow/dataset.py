"""On-disk dataset directories: ``manifest.txt`` plus one SFTENSOR file per sample.

Manifest lines are ``file domain sample_rate pair_id``.  Domains ``a`` and
``b`` are the unpaired training sets; ``truth`` holds the clean counterparts
of ``a`` and is read only by evaluation.  ``pair_id`` is ``-`` when a sample
has no hidden counterpart.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics.io import read_tensor, write_tensor

MANIFEST = "manifest.txt"
TRAINING_DOMAINS = ("a", "b")


@dataclass
class DomainData:
    values: np.ndarray
    sample_rate: float
    pair_ids: list[str]


def prepare_output(path, force: bool = False) -> Path:
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise FileExistsError(f"{path} exists and is not empty (use --force)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_dataset(path, domains: dict[str, tuple[np.ndarray, float, list | None]]) -> Path:
    path = Path(path)
    lines = []
    for name, (values, rate, ids) in domains.items():
        (path / name).mkdir(parents=True, exist_ok=True)
        for i, sample in enumerate(np.asarray(values, dtype=np.float64)):
            rel = f"{name}/{i:06d}.sft"
            write_tensor(path / rel, sample)
            pid = "-" if ids is None else str(ids[i])
            lines.append(f"{rel} {name} {float(rate)!r} {pid}")
    (path / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_dataset(path, include_truth: bool = False) -> dict[str, DomainData]:
    path = Path(path)
    manifest = path / MANIFEST
    if not manifest.is_file():
        raise FileNotFoundError(f"no dataset manifest at {manifest}")
    grouped: dict[str, list] = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rel, domain, rate, pid = line.split()
        if domain == "truth" and not include_truth:
            continue
        grouped.setdefault(domain, []).append((rel, float(rate), pid))
    out = {}
    for domain, rows in grouped.items():
        values = np.stack([read_tensor(path / rel) for rel, _, _ in rows])
        out[domain] = DomainData(values, rows[0][1], [pid for _, _, pid in rows])
    return out


def training_domains(path) -> tuple[DomainData, DomainData]:
    data = read_dataset(path)
    missing = [d for d in TRAINING_DOMAINS if d not in data]
    if missing:
        raise ValueError(f"dataset {path} lacks domain(s) {', '.join(missing)}")
    a, b = data["a"], data["b"]
    if a.values.shape[1:] != b.values.shape[1:]:
        raise ValueError(f"grid mismatch between domains: {a.values.shape[1:]} vs {b.values.shape[1:]}")
    return a, b
