"""Hexagonal multi-site geometry, wraparound distances, and terminal drops.

Sites sit on a hexagonal lattice with nearest-neighbor spacing equal to the
inter-site distance (ISD). Every site carries three 120-degree sectors whose
boresights point at 30, 150 and 270 degrees from the +x axis; those are also
vertex directions of the site's hexagonal cell, so each sector region is the
kite-shaped third of the hexagon around its boresight.

Wraparound uses the classic 7-image technique: the finite cluster of
``1 + sum(6r)`` sites tiles the plane when translated by the six lattice
vectors ``rot60^k((n_rings+1)*u + n_rings*v)``, so every distance is taken as
the minimum over the identity and those six translations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

# Spacing floor between a D2D transmitter and its receiver. Keeps the
# propagation models away from their d -> 0 singularities.
MIN_UE_UE_DISTANCE_M = 3.0

SECTOR_BORESIGHTS_DEG = (30.0, 150.0, 270.0)


class Point(NamedTuple):
    x: float
    y: float


class Role(Enum):
    CELLULAR_TX = "cellular_tx"
    D2D_TX = "d2d_tx"
    D2D_RX = "d2d_rx"


@dataclass(frozen=True)
class Sector:
    site_index: int
    boresight_deg: float


@dataclass(frozen=True)
class UeRecord:
    id: int
    position: Point
    role: Role
    home_sector: int
    peer: Optional[int] = None


@dataclass(frozen=True)
class NetworkLayout:
    """Immutable site/sector geometry. Safe to share across worker threads."""

    isd: float
    n_rings: int
    sites: tuple[Point, ...]
    sectors: tuple[Sector, ...]
    wraparound_enabled: bool
    wrap_offsets: tuple[Point, ...]  # identity first

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_sectors(self) -> int:
        return len(self.sectors)

    @cached_property
    def site_xy(self) -> np.ndarray:
        return np.array(self.sites, dtype=float).reshape(-1, 2)

    @cached_property
    def offset_xy(self) -> np.ndarray:
        return np.array(self.wrap_offsets, dtype=float).reshape(-1, 2)

    @cached_property
    def sector_site_xy(self) -> np.ndarray:
        return self.site_xy[[s.site_index for s in self.sectors]]

    @cached_property
    def sector_boresight_deg(self) -> np.ndarray:
        return np.array([s.boresight_deg for s in self.sectors])


def hex_circumradius(isd: float) -> float:
    """Center-to-vertex radius of a cell when neighboring sites are isd apart."""
    return isd / math.sqrt(3.0)


def build_hex_grid(isd: float, n_rings: int, wraparound: bool) -> NetworkLayout:
    """Build the site lattice, one ring at a time, with 3 sectors per site."""
    if isd <= 0:
        raise ValueError(f"isd must be positive, got {isd}")
    if n_rings < 0:
        raise ValueError(f"n_rings must be >= 0, got {n_rings}")

    ux, uy = isd, 0.0
    vx, vy = isd * 0.5, isd * math.sqrt(3.0) / 2.0

    def axial_to_xy(q: int, r: int) -> Point:
        return Point(q * ux + r * vx, q * uy + r * vy)

    # Directions at 0, 60, ..., 300 degrees in axial coordinates.
    dirs = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    coords = [(0, 0)]
    for ring in range(1, n_rings + 1):
        q, r = ring, 0
        for d in range(6):
            dq, dr = dirs[(d + 2) % 6]
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + dq, r + dr

    sites = tuple(axial_to_xy(q, r) for q, r in coords)
    sectors = tuple(
        Sector(i, b) for i in range(len(sites)) for b in SECTOR_BORESIGHTS_DEG
    )

    offsets = [Point(0.0, 0.0)]
    if wraparound and n_rings >= 1:
        # (n+1, n) generates a lattice whose unit cell holds exactly the
        # 3n^2 + 3n + 1 cluster sites; its six 60-degree rotations are the
        # mirror translations.
        a, b = n_rings + 1, n_rings
        for _ in range(6):
            offsets.append(axial_to_xy(a, b))
            a, b = -b, a + b

    return NetworkLayout(
        isd=float(isd),
        n_rings=int(n_rings),
        sites=sites,
        sectors=sectors,
        wraparound_enabled=bool(wraparound),
        wrap_offsets=tuple(offsets),
    )


def pairwise_wrap_distance(
    a_xy, b_xy, layout: NetworkLayout
) -> tuple[np.ndarray, np.ndarray]:
    """Distance matrix (n, m) of min-over-offsets |a - (b + t)|.

    Also returns the index of the offset attaining the minimum (identity wins
    ties), so callers can recover the geometry of the wrapped link.
    """
    a = np.asarray(a_xy, dtype=float).reshape(-1, 2)
    b = np.asarray(b_xy, dtype=float).reshape(-1, 2)
    offs = layout.offset_xy
    best_d = None
    best_k = None
    for k in range(offs.shape[0]):
        dx = a[:, 0:1] - (b[None, :, 0] + offs[k, 0])
        dy = a[:, 1:2] - (b[None, :, 1] + offs[k, 1])
        d = np.hypot(dx, dy)
        if best_d is None:
            best_d = d
            best_k = np.zeros(d.shape, dtype=np.int8)
        else:
            closer = d < best_d
            best_d = np.where(closer, d, best_d)
            best_k = np.where(closer, np.int8(k), best_k)
    return best_d, best_k


def wrap_distance(a: Point, b: Point, layout: NetworkLayout) -> float:
    d, _ = pairwise_wrap_distance([a], [b], layout)
    return float(d[0, 0])


def wrap_vector(frm: Point, to: Point, layout: NetworkLayout) -> tuple[float, float]:
    """Displacement from ``frm`` to the nearest wrap image of ``to``."""
    best = None
    for t in layout.wrap_offsets:
        dx = to.x + t.x - frm.x
        dy = to.y + t.y - frm.y
        d2 = dx * dx + dy * dy
        if best is None or d2 < best[0]:
            best = (d2, dx, dy)
    return best[1], best[2]


def _in_hexagon(dx: float, dy: float, isd: float) -> bool:
    # Cell = intersection of three slabs perpendicular to the neighbor axes
    # at 0/60/120 degrees, each of half-width isd/2.
    half = isd / 2.0
    p1 = 0.5 * dx + (math.sqrt(3.0) / 2.0) * dy
    p2 = -0.5 * dx + (math.sqrt(3.0) / 2.0) * dy
    return abs(dx) <= half and abs(p1) <= half and abs(p2) <= half


def _face_of_angle(angle_deg: float) -> int:
    """Which of the three wedges (0 -> 30deg, 1 -> 150deg, 2 -> 270deg)."""
    return int(((angle_deg + 30.0) % 360.0) // 120.0)


def point_in_sector_region(p: Point, sector_index: int, layout: NetworkLayout) -> bool:
    sec = layout.sectors[sector_index]
    site = layout.sites[sec.site_index]
    dx, dy = p.x - site.x, p.y - site.y
    if not _in_hexagon(dx, dy, layout.isd):
        return False
    ang = math.degrees(math.atan2(dy, dx))
    return _face_of_angle(ang) == sector_index % 3


def sector_of_point(p: Point, layout: NetworkLayout) -> int:
    """Sector geometrically containing p: nearest site under wraparound, then
    the wedge matching the azimuth of the wrapped displacement."""
    d, k = pairwise_wrap_distance([p], layout.site_xy, layout)
    site_idx = int(np.argmin(d[0]))
    t = layout.offset_xy[int(k[0, site_idx])]
    site = layout.sites[site_idx]
    # p is compared against the site image site + t, i.e. p - t against site.
    dx = p.x - t[0] - site.x
    dy = p.y - t[1] - site.y
    ang = math.degrees(math.atan2(dy, dx))
    return 3 * site_idx + _face_of_angle(ang)


def _sample_point_in_sector(
    layout: NetworkLayout, sector_index: int, rng: np.random.Generator
) -> Point:
    sec = layout.sectors[sector_index]
    site = layout.sites[sec.site_index]
    face = sector_index % 3
    radius = hex_circumradius(layout.isd)
    while True:
        dx = rng.uniform(-radius, radius)
        dy = rng.uniform(-radius, radius)
        if not _in_hexagon(dx, dy, layout.isd):
            continue
        if _face_of_angle(math.degrees(math.atan2(dy, dx))) == face:
            return Point(site.x + dx, site.y + dy)


def drop_cellular_ues(
    layout: NetworkLayout,
    n_per_sector: int,
    rng: np.random.Generator,
    start_id: int = 0,
) -> list[UeRecord]:
    """Drop exactly n_per_sector uplink transmitters uniformly in each sector."""
    if n_per_sector < 0:
        raise ValueError(f"n_per_sector must be >= 0, got {n_per_sector}")
    ues = []
    uid = start_id
    for s in range(layout.n_sectors):
        for _ in range(n_per_sector):
            pos = _sample_point_in_sector(layout, s, rng)
            ues.append(UeRecord(uid, pos, Role.CELLULAR_TX, s))
            uid += 1
    return ues


def drop_d2d_pairs(
    layout: NetworkLayout,
    n_tx_per_sector: int,
    d2d_range: float,
    min_dist: float,
    rng: np.random.Generator,
    start_id: int = 0,
) -> list[tuple[UeRecord, UeRecord]]:
    """Drop transmitter/receiver pairs.

    Transmitters are dropped like cellular terminals. Each receiver sits at
    the transmitter plus a polar offset: angle uniform on [0, 2pi), radius
    ``d2d_range * sqrt(u)`` redrawn until it is at least ``min_dist``, which
    is area-uniform over the annulus. The receiver's home sector is whichever
    sector geometrically contains it, which may differ from the transmitter's.
    """
    if n_tx_per_sector < 0:
        raise ValueError(f"n_tx_per_sector must be >= 0, got {n_tx_per_sector}")
    if not (0.0 < min_dist < d2d_range):
        raise ValueError(
            f"need 0 < min_dist < d2d_range, got min_dist={min_dist}, "
            f"d2d_range={d2d_range}"
        )
    pairs = []
    uid = start_id
    for s in range(layout.n_sectors):
        for _ in range(n_tx_per_sector):
            tx_pos = _sample_point_in_sector(layout, s, rng)
            theta = rng.uniform(0.0, 2.0 * math.pi)
            while True:
                r = d2d_range * math.sqrt(rng.uniform(0.0, 1.0))
                if r >= min_dist:
                    break
            rx_pos = Point(tx_pos.x + r * math.cos(theta), tx_pos.y + r * math.sin(theta))
            rx_sector = sector_of_point(rx_pos, layout)
            tx = UeRecord(uid, tx_pos, Role.D2D_TX, s, peer=uid + 1)
            rx = UeRecord(uid + 1, rx_pos, Role.D2D_RX, rx_sector, peer=uid)
            pairs.append((tx, rx))
            uid += 2
    return pairs
