"""File popularity: Zipf law and view-count traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SUM_TOL = 1e-9


class EmptyDistributionError(ValueError):
    """Raised when a trace carries no positive request mass."""


class TraceParseError(ValueError):
    """Raised on a malformed trace row; the message names the line."""


@dataclass(frozen=True, eq=False)
class Popularity:
    q: np.ndarray
    ids: tuple | None = None
    counts: tuple | None = None

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 1 or q.size == 0:
            raise ValueError("popularity must be a non-empty vector")
        if np.any(q <= 0) or not np.all(np.isfinite(q)):
            raise ValueError("every file probability must be positive and finite")
        if abs(q.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {q.sum()!r}, not 1")
        for name in ("ids", "counts"):
            extra = getattr(self, name)
            if extra is not None and len(extra) != q.size:
                raise ValueError(f"{name} and q differ in length")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def F(self) -> int:
        return self.q.size

    def __len__(self):
        return self.q.size


@dataclass(frozen=True)
class ZipfParams:
    F: int
    nu: float

    def __post_init__(self):
        if int(self.F) != self.F or self.F < 1:
            raise ValueError(f"F must be a positive integer, got {self.F!r}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be >= 0, got {self.nu!r}")


def zipf_popularity(params: ZipfParams) -> Popularity:
    """q_f proportional to f**-nu over f = 1..F."""
    ranks = np.arange(1, int(params.F) + 1, dtype=float)
    w = ranks ** -float(params.nu)
    return Popularity(w / w.sum())


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_trace(path) -> Popularity:
    """Read an ``id,views`` trace and normalise the view counts.

    A header row is recognised by a non-numeric second field. Rows with zero
    views are dropped. Files come out sorted by descending count, ties kept in
    row order.
    """
    path = Path(path)
    ids, counts = [], []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise TraceParseError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            ident, views = row[0].strip(), row[1].strip()
            if lineno == 1 and not _is_number(views):
                continue
            try:
                n = int(views)
            except ValueError:
                raise TraceParseError(f"{path}:{lineno}: view count {views!r} is not an integer") from None
            if n < 0:
                raise TraceParseError(f"{path}:{lineno}: negative view count {n}")
            ids.append(ident)
            counts.append(n)

    counts = np.asarray(counts, dtype=np.int64)
    keep = counts > 0
    if not keep.any():
        raise EmptyDistributionError(f"{path}: no row has a positive view count")
    counts = counts[keep]
    ids = [i for i, k in zip(ids, keep) if k]
    order = np.argsort(-counts, kind="stable")
    counts = counts[order]
    q = counts / counts.sum()
    return Popularity(q, ids=tuple(ids[i] for i in order), counts=tuple(int(n) for n in counts))


def write_trace(pop: Popularity, path) -> None:
    """Write a trace-backed popularity back out as ``id,views`` rows."""
    if pop.counts is None:
        raise ValueError("popularity carries no view counts to serialise")
    ids = pop.ids if pop.ids is not None else tuple(str(i + 1) for i in range(pop.F))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "views"])
        for ident, n in zip(ids, pop.counts):
            w.writerow([ident, n])
