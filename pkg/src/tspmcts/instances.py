"""TSP instances: generators, TSPLIB ingestion, distances and neighbor ranks.

Cities are 0-indexed internally; TSPLIB's 1-based indices are translated at
the parse/serialize boundary. Generated instances always live in the unit
square. All construction is deterministic given the arguments.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ParseError(ValueError):
    """Raised when an instance file cannot be parsed."""


class UnsupportedMetricError(ValueError):
    """Raised for TSPLIB edge weight types other than EUC_2D."""


class Metric(enum.Enum):
    """Distance metric: exact Euclidean or TSPLIB nearest-integer Euclidean."""

    EUC2D_REAL = "euc2d_real"
    EUC2D_INT = "euc2d_int"


@dataclass(frozen=True)
class Instance:
    """A labeled set of planar points."""

    id: str
    points: np.ndarray  # shape (n, 2), float64
    source: str = "unknown"

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise ValueError(f"instance needs at least 3 cities, got {pts.shape[0]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distances with a zero diagonal."""

    metric: Metric
    entries: np.ndarray  # shape (n, n); float64 or int64 depending on metric

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, ij: tuple[int, int]):
        return self.entries[ij]


@dataclass(frozen=True)
class RankTable:
    """Per-city neighbor orderings by ascending distance (ties by index).

    ``rows[i]`` lists the other n-1 cities nearest-first. ``rank_of(i, j)``
    returns j's 1-based rank among i's neighbors.
    """

    rows: np.ndarray = field(repr=False)  # shape (n, n-1), int32
    inverse: np.ndarray = field(repr=False)  # shape (n, n), int32; diagonal unused

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def row(self, i: int) -> np.ndarray:
        return self.rows[i]

    def rank_of(self, i: int, j: int) -> int:
        if i == j:
            raise ValueError("rank_of is undefined for i == j")
        return int(self.inverse[i, j])


@dataclass(frozen=True)
class StructuredParams:
    """Parameters for the non-uniform generators.

    cluster uses (n_clusters, spread); explosion/implosion use (center, radius).
    """

    n_clusters: int = 5
    spread: float = 0.05
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.2


def generate_uniform(n: int, seed: int) -> Instance:
    """n i.i.d. points uniform on the unit square."""
    if n < 3:
        raise ValueError(f"instance needs at least 3 cities, got {n}")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    return Instance(id=f"uniform-n{n}-s{seed}", points=pts, source=f"generated(uniform, seed={seed})")


def generate_structured(n: int, seed: int, kind: str, params: StructuredParams | None = None) -> Instance:
    """Clustered, explosion or implosion points, clipped to the unit square.

    cluster: uniform centers, round-robin assignment, isotropic Gaussian
    noise with std ``spread``. explosion: uniform points strictly inside
    ``radius`` of ``center`` are pushed radially to the circle. implosion:
    the same points are contracted halfway toward the center instead.
    """
    if n < 3:
        raise ValueError(f"instance needs at least 3 cities, got {n}")
    params = params or StructuredParams()
    rng = np.random.default_rng(seed)
    if kind == "cluster":
        if params.n_clusters < 1:
            raise ValueError("cluster generator needs n_clusters >= 1")
        if params.spread <= 0:
            raise ValueError("cluster generator needs spread > 0")
        centers = rng.random((params.n_clusters, 2))
        assignment = np.arange(n) % params.n_clusters
        pts = centers[assignment] + rng.normal(0.0, params.spread, size=(n, 2))
    elif kind in ("explosion", "implosion"):
        cx, cy = params.center
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise ValueError("center must lie in the unit square")
        if not (0.0 < params.radius <= 0.5):
            raise ValueError("radius must lie in (0, 0.5]")
        pts = rng.random((n, 2))
        center = np.array([cx, cy])
        offset = pts - center
        dist = np.hypot(offset[:, 0], offset[:, 1])
        inside = dist < params.radius
        if inside.any():
            # Points sitting exactly on the center get an arbitrary fixed direction.
            direction = offset[inside]
            norms = dist[inside][:, None]
            direction = np.divide(direction, norms, out=np.tile([1.0, 0.0], (int(inside.sum()), 1)), where=norms > 0)
            if kind == "explosion":
                pts[inside] = center + params.radius * direction
            else:
                pts[inside] = center + 0.5 * offset[inside]
    else:
        raise ValueError(f"unknown distribution kind: {kind!r}")
    pts = np.clip(pts, 0.0, 1.0)
    return Instance(id=f"{kind}-n{n}-s{seed}", points=pts, source=f"generated({kind}, seed={seed})")


def _tsplib_fields(text: str) -> tuple[dict[str, str], list[str]]:
    """Split a TSPLIB file into header key/values and data-section lines."""
    header: dict[str, str] = {}
    data: list[str] = []
    in_coords = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.upper() == "NODE_COORD_SECTION":
            in_coords = True
            continue
        if line.upper() == "EOF":
            break
        if in_coords:
            data.append(line)
        elif ":" in line:
            key, _, value = line.partition(":")
            header[key.strip().upper()] = value.strip()
        else:
            header[line.upper()] = ""
    if not in_coords:
        raise ParseError("missing NODE_COORD_SECTION")
    return header, data


def parse_tsplib(text: str) -> Instance:
    """Parse a EUC_2D TSPLIB instance; coordinates are kept verbatim."""
    header, data = _tsplib_fields(text)
    if "DIMENSION" not in header:
        raise ParseError("missing DIMENSION")
    try:
        n = int(header["DIMENSION"])
    except ValueError as exc:
        raise ParseError(f"bad DIMENSION: {header['DIMENSION']!r}") from exc
    weight_type = header.get("EDGE_WEIGHT_TYPE", "")
    if weight_type.upper() != "EUC_2D":
        raise UnsupportedMetricError(f"unsupported EDGE_WEIGHT_TYPE: {weight_type or 'missing'!r}")
    if len(data) != n:
        raise ParseError(f"expected {n} coordinate lines, found {len(data)}")
    pts = np.empty((n, 2))
    seen = np.zeros(n, dtype=bool)
    for line in data:
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"bad coordinate line: {line!r}")
        idx = int(parts[0]) - 1
        if not 0 <= idx < n or seen[idx]:
            raise ParseError(f"bad or repeated city index on line: {line!r}")
        seen[idx] = True
        pts[idx] = (float(parts[1]), float(parts[2]))
    name = header.get("NAME", "unnamed")
    return Instance(id=name, points=pts, source=f"tsplib({name})")


def write_tsplib(inst: Instance) -> str:
    """Serialize an instance in the TSPLIB EUC_2D subset read by parse_tsplib."""
    lines = [
        f"NAME : {inst.id}",
        "TYPE : TSP",
        f"DIMENSION : {inst.n}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate(inst.points, start=1):
        lines.append(f"{i} {x:.12g} {y:.12g}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def parse_native(text: str, id: str = "native") -> Instance:
    """Parse the native format: header ``n <count>``, then one ``x y`` per city."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines or not lines[0].startswith("n "):
        raise ParseError("missing 'n <count>' header")
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"bad header: {lines[0]!r}") from exc
    if len(lines) - 1 != n:
        raise ParseError(f"expected {n} coordinate lines, found {len(lines) - 1}")
    pts = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if pts.shape != (n, 2):
        raise ParseError("coordinate lines must hold exactly two values")
    return Instance(id=id, points=pts, source="native")


def write_native(inst: Instance) -> str:
    lines = [f"n {inst.n}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in inst.points)
    return "\n".join(lines) + "\n"


def distance_matrix(inst: Instance, metric: Metric = Metric.EUC2D_REAL) -> DistanceMatrix:
    """All pairwise Euclidean distances, rounded to nearest int for EUC2D_INT."""
    diff = inst.points[:, None, :] - inst.points[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    if metric is Metric.EUC2D_INT:
        # TSPLIB nint(): round half away from zero; distances are non-negative.
        entries = np.floor(d + 0.5).astype(np.int64)
    else:
        entries = d
    entries.setflags(write=False)
    return DistanceMatrix(metric=metric, entries=entries)


def nearest_neighbor_ranks(dm: DistanceMatrix) -> RankTable:
    """Sort each city's neighbors by distance, breaking ties by city index."""
    n = dm.n
    order = np.argsort(dm.entries, axis=1, kind="stable").astype(np.int32)
    rows = np.empty((n, n - 1), dtype=np.int32)
    for i in range(n):
        rows[i] = order[i][order[i] != i]
    inverse = np.zeros((n, n), dtype=np.int32)
    ranks = np.arange(1, n, dtype=np.int32)
    for i in range(n):
        inverse[i, rows[i]] = ranks
    rows.setflags(write=False)
    inverse.setflags(write=False)
    return RankTable(rows=rows, inverse=inverse)


def load_instance(path) -> Instance:
    """Read a file as TSPLIB if it announces a coord section, else native."""
    from pathlib import Path

    p = Path(path)
    text = p.read_text()
    if "NODE_COORD_SECTION" in text:
        return parse_tsplib(text)
    return parse_native(text, id=p.stem)
