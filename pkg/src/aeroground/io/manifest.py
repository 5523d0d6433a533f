"""Pair manifests: CSV with a fixed header, paths relative to the file."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

HEADER = ("template_path", "source_path", "theta_gt_deg", "scale_gt", "tx_gt", "ty_gt")


@dataclass(frozen=True)
class PairEntry:
    template_path: str
    source_path: str
    theta_gt: float  # degrees
    scale_gt: float
    tx_gt: float
    ty_gt: float

    def __post_init__(self):
        if not self.scale_gt > 0:
            raise ValueError(f"scale_gt must be positive, got {self.scale_gt}")


@dataclass
class PairManifest:
    entries: list[PairEntry] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def __len__(self):
        return len(self.entries)

    @classmethod
    def load(cls, path) -> PairManifest:
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != HEADER:
                raise ValueError(f"{path}: manifest header must be {','.join(HEADER)}")
            entries = []
            for lineno, row in enumerate(reader, 2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(HEADER):
                    raise ValueError(f"{path}:{lineno}: expected {len(HEADER)} columns, got {len(row)}")
                t, s, *nums = (c.strip() for c in row)
                entries.append(PairEntry(t, s, *(float(v) for v in nums)))
        return cls(entries, path.parent)

    def save(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(HEADER)
            for e in self.entries:
                writer.writerow(
                    [e.template_path, e.source_path, repr(e.theta_gt), repr(e.scale_gt), repr(e.tx_gt), repr(e.ty_gt)]
                )
