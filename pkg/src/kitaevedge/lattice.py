"""Honeycomb lattice builders: strips, finite samples, and external-spin attachment.

Geometry conventions
--------------------
Bravais vectors are ``n1 = (1/2, sqrt(3)/2)`` and ``n2 = (-1/2, sqrt(3)/2)``
with lattice constant 1.  Unit cells are indexed by integers ``(m, r)`` at
position ``m*a1 + r*a2`` with ``a1 = n1 - n2 = (1, 0)`` and ``a2 = n2``.
Each cell holds an even (black) site at the cell origin and an odd (white)
site at ``(0, -1/sqrt(3))`` below it.  Nearest-neighbor links:

* ``z``: even(m, r) -- odd(m, r)
* ``x``: even(m, r) -- odd(m+1, r+1)
* ``y``: even(m, r) -- odd(m, r+1)

Zigzag strips are periodic along ``a1`` (edge period 1).  Armchair strips use
re-indexed cells ``(p, s)`` with ``m = p + s`` and ``r = 2p + s``; the lattice
is rotated by -90 degrees so the armchair edge also runs along x (edge period
``sqrt(3)``, column ``s`` measured from the edge).

The boundary "free" Majorana flavors of a site are the link kinds it is
missing: a zigzag edge frees ``b_z`` modes, an armchair edge frees ``b_x`` and
``b_y``, and a hexagonal flake frees the flavor matching each of its six
zigzag sides.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

SQRT3 = math.sqrt(3.0)

LINK_KINDS = ("x", "y", "z")

# Geometric displacement from an even site to its odd partner, per link kind,
# in the unrotated (zigzag) frame and in the -90 degree rotated (armchair) frame.
_LINK_VEC_ZIGZAG = {
    "z": (0.0, -1.0 / SQRT3),
    "x": (0.5, 0.5 / SQRT3),
    "y": (-0.5, 0.5 / SQRT3),
}
_LINK_VEC_ARMCHAIR = {k: (v[1], -v[0]) for k, v in _LINK_VEC_ZIGZAG.items()}


class LatticeError(ValueError):
    """Invalid lattice specification or operation."""


@dataclass(frozen=True)
class SiteCoord:
    """Cell coordinates of one site.

    ``cell_x`` runs along the edge (the periodic axis for strips), ``cell_y``
    is the transverse cell index, ``sublattice`` is 0 for even (black) and 1
    for odd (white).
    """

    cell_x: int
    cell_y: int
    sublattice: int


@dataclass(frozen=True)
class LinkRecord:
    """Nearest-neighbor link; ``site_a`` is always the even-sublattice end.

    ``delta`` is the unwrapped displacement of b's cell relative to a's cell
    along the periodic axis, used for Bloch phases.
    """

    site_a: int
    site_b: int
    kind: str
    delta: int = 0


@dataclass(frozen=True)
class TripleRecord:
    """Next-nearest-neighbor pair (outer_j, outer_l) sharing center_k.

    ``chirality_sign`` is +1 when the path j -> k -> l turns counterclockwise.
    ``kind`` is the Pauli direction carried by the center (the link kind
    missing from the two path links); it selects the coupling component in the
    anisotropic case.  ``delta_jl`` is the edge-axis cell displacement from j
    to l.  ``link_jk``/``link_kl`` index the two path links: the coupling
    inherits their gauge factors, which keeps gauge transformations exact
    similarities of the generator.
    """

    outer_j: int
    center_k: int
    outer_l: int
    chirality_sign: int
    kind: str
    delta_jl: int = 0
    link_jk: int = -1
    link_kl: int = -1


@dataclass(frozen=True)
class ExternalSpin:
    """External spin attached to a boundary site through a z-kind gauge link.

    The external ``b_z`` pairs with the host's previously free ``b_z`` into a
    conserved link operator; the remaining dynamical Majoranas of the spin are
    ``c``, ``b_x`` and ``b_y``.
    """

    name: str
    host_site: int


@dataclass
class LatticeGraph:
    """Immutable-by-convention honeycomb graph with edge metadata."""

    edge_kind: str  # zigzag | armchair | finite-hexagon | finite-rectangle
    periodicity: str  # periodic-x | open
    sites: list[SiteCoord]
    positions: np.ndarray  # (N, 2) cartesian
    links: list[LinkRecord]
    triples: list[TripleRecord]
    plaquettes: list[tuple[int, ...]]  # each: 6 link indices
    boundary_sites: list[int]
    free_b_modes: list[tuple[int, str]]
    external_spins: list[ExternalSpin] = field(default_factory=list)
    edge_cells: int = 0  # cells along the periodic axis (strips)
    edge_period: float = 1.0  # physical length of the edge unit cell
    rows: int = 0  # transverse extent in site-rows (zigzag) / columns (armchair)
    link_vectors: dict = field(default_factory=dict)

    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {s: i for i, s in enumerate(self.sites)}

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def site_index(self, coord: SiteCoord) -> int:
        return self._index[coord]

    def neighbors(self, i: int) -> list[tuple[int, str]]:
        """Linked partners of site i as (site, kind) pairs."""
        out = []
        for ln in self.links:
            if ln.site_a == i:
                out.append((ln.site_b, ln.kind))
            elif ln.site_b == i:
                out.append((ln.site_a, ln.kind))
        return out

    def coordination(self) -> np.ndarray:
        z = np.zeros(self.n_sites, dtype=int)
        for ln in self.links:
            z[ln.site_a] += 1
            z[ln.site_b] += 1
        return z

    def free_flavors(self, i: int) -> set[str]:
        return {fl for s, fl in self.free_b_modes if s == i}

    def transverse_depth(self, i: int) -> tuple[int, int]:
        """(depth from top/first edge, depth from bottom/second edge).

        Units: site-rows for zigzag strips, columns for armchair strips.
        """
        s = self.sites[i]
        if self.edge_kind == "zigzag":
            c = self.rows // 2
            row = 2 * (c - s.cell_y) + (1 if s.sublattice == 1 else 0)
            # rows numbered 1 (outermost, top) .. self.rows (bottom)
            return row - 1, self.rows - row
        if self.edge_kind == "armchair":
            return s.cell_y, self.rows - 1 - s.cell_y
        raise LatticeError("transverse depth is defined for strips only")

    def paper_row(self, i: int) -> int:
        """Row index counted from the top zigzag edge, outermost row = 1."""
        return self.transverse_depth(i)[0] + 1

    def boundary_perimeter(self) -> list[int]:
        """Boundary sites ordered counterclockwise around the sample centroid."""
        if self.periodicity != "open":
            raise LatticeError("perimeter order requires a finite sample")
        center = self.positions.mean(axis=0)
        rel = self.positions[self.boundary_sites] - center
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        order = np.argsort(ang)
        return [self.boundary_sites[k] for k in order]

    def export_adjacency_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site_a", "site_b", "kind"])
            for ln in self.links:
                w.writerow([ln.site_a, ln.site_b, ln.kind])


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def _link_vec(graph_kind: str) -> dict:
    return _LINK_VEC_ARMCHAIR if graph_kind == "armchair" else _LINK_VEC_ZIGZAG


def _build_triples(sites, links, link_vectors) -> list[TripleRecord]:
    """Enumerate NNN triples from pairs of links sharing a center site."""
    incident: dict[int, list[tuple[int, str, int, int]]] = {}
    for li, ln in enumerate(links):
        incident.setdefault(ln.site_a, []).append((ln.site_b, ln.kind, ln.delta, li))
        incident.setdefault(ln.site_b, []).append((ln.site_a, ln.kind, -ln.delta, li))
    triples = []
    for k, inc in incident.items():
        k_odd = sites[k].sublattice == 1
        for ai in range(len(inc)):
            for bi in range(ai + 1, len(inc)):
                j, kind_jk, dj, li_jk = inc[ai]
                l, kind_kl, dl, li_kl = inc[bi]
                # vectors along the path j -> k -> l; link vectors point
                # even -> odd, so the j -> k leg flips when k is even
                vjk = np.array(link_vectors[kind_jk])
                vkl = np.array(link_vectors[kind_kl])
                v1 = vjk if k_odd else -vjk  # j -> k
                v2 = -vkl if k_odd else vkl  # k -> l
                cross = v1[0] * v2[1] - v1[1] * v2[0]
                sign = 1 if cross > 0 else -1
                gamma = ({"x", "y", "z"} - {kind_jk, kind_kl}).pop()
                triples.append(
                    TripleRecord(j, k, l, sign, gamma, delta_jl=dl - dj,
                                 link_jk=li_jk, link_kl=li_kl)
                )
    return triples


def _free_modes(sites, links, n) -> tuple[list[int], list[tuple[int, str]]]:
    have: dict[int, set[str]] = {i: set() for i in range(n)}
    for ln in links:
        have[ln.site_a].add(ln.kind)
        have[ln.site_b].add(ln.kind)
    boundary, free = [], []
    for i in range(n):
        missing = [k for k in LINK_KINDS if k not in have[i]]
        if missing:
            boundary.append(i)
            free.extend((i, k) for k in sorted(missing))
    return boundary, free


def _build_plaquettes(sites, links, index_of) -> list[tuple[int, ...]]:
    """Hexagonal plaquettes as 6-tuples of link indices.

    Each hexagon is anchored at its unique even site whose z, then the
    partner's y, x, z, y, x walk closes the ring.
    """
    link_at: dict[tuple[int, str], tuple[int, int]] = {}
    for li, ln in enumerate(links):
        link_at[(ln.site_a, ln.kind)] = (ln.site_b, li)
        link_at[(ln.site_b, ln.kind)] = (ln.site_a, li)
    plaquettes = []
    walk = ("z", "y", "x", "z", "y", "x")
    for start in range(len(sites)):
        if sites[start].sublattice != 0:
            continue
        cur, ring = start, []
        ok = True
        for kind in walk:
            nxt = link_at.get((cur, kind))
            if nxt is None:
                ok = False
                break
            cur, li = nxt
            ring.append(li)
        if ok and cur == start:
            plaquettes.append(tuple(ring))
    return plaquettes


def _finalize(edge_kind, periodicity, coords, positions, links, *,
              edge_cells=0, edge_period=1.0, rows=0) -> LatticeGraph:
    sites = list(coords)
    if len(set(sites)) != len(sites):
        raise LatticeError("duplicate site coordinates")
    link_vectors = _link_vec("armchair" if edge_kind == "armchair" else "zigzag")
    triples = _build_triples(sites, links, link_vectors)
    boundary, free = _free_modes(sites, links, len(sites))
    index_of = {s: i for i, s in enumerate(sites)}
    plaquettes = _build_plaquettes(sites, links, index_of)
    return LatticeGraph(
        edge_kind=edge_kind,
        periodicity=periodicity,
        sites=sites,
        positions=np.asarray(positions, dtype=float),
        links=links,
        triples=triples,
        plaquettes=plaquettes,
        boundary_sites=boundary,
        free_b_modes=free,
        edge_cells=edge_cells,
        edge_period=edge_period,
        rows=rows,
        link_vectors=link_vectors,
    )


# ---------------------------------------------------------------------------
# public builders
# ---------------------------------------------------------------------------

def build_strip(edge_kind: str, rows: int, length: int,
                periodicity: str = "periodic-x") -> LatticeGraph:
    """Build a honeycomb strip with zigzag or armchair boundaries.

    Parameters
    ----------
    edge_kind : {"zigzag", "armchair"}
        Orientation of both strip edges.
    rows : int
        Transverse extent: site-rows for zigzag (must be even, >= 2),
        columns for armchair (>= 2).
    length : int
        Unit cells along the edge (zigzag >= 1, armchair >= 2 when periodic).
    periodicity : {"periodic-x", "open"}
    """
    if edge_kind not in ("zigzag", "armchair"):
        raise LatticeError(f"unknown edge_kind {edge_kind!r}")
    if periodicity not in ("periodic-x", "open"):
        raise LatticeError(f"unknown periodicity {periodicity!r}")
    if rows < 2:
        raise LatticeError("rows must be >= 2")
    if length < 1:
        raise LatticeError("length must be >= 1")
    periodic = periodicity == "periodic-x"

    coords: list[SiteCoord] = []
    positions: list[tuple[float, float]] = []
    index: dict[SiteCoord, int] = {}

    def add(cx, cy, sub, pos):
        sc = SiteCoord(cx, cy, sub)
        index[sc] = len(coords)
        coords.append(sc)
        positions.append(pos)

    links: list[LinkRecord] = []

    if edge_kind == "zigzag":
        if rows % 2 != 0:
            raise LatticeError("zigzag strips need an even number of site-rows")
        c = rows // 2
        for m in range(length):
            for r in range(c):
                add(m, r, 0, (m - r / 2.0, r * SQRT3 / 2.0))
            for r in range(1, c + 1):
                add(m, r, 1, (m - r / 2.0, r * SQRT3 / 2.0 - 1.0 / SQRT3))

        def at(m, cy, sub):
            if periodic:
                m %= length
            if not (0 <= m < length):
                return None
            return index.get(SiteCoord(m, cy, sub))

        for m in range(length):
            for r in range(c):
                e = at(m, r, 0)
                oz = at(m, r, 1)
                if oz is not None:
                    links.append(LinkRecord(e, oz, "z", 0))
                ox = at(m + 1, r + 1, 1)
                if ox is not None:
                    links.append(LinkRecord(e, ox, "x", +1))
                oy = at(m, r + 1, 1)
                if oy is not None:
                    links.append(LinkRecord(e, oy, "y", 0))
        return _finalize(edge_kind, periodicity, coords, positions, links,
                         edge_cells=length, edge_period=1.0, rows=rows)

    # armchair: cells (p, s); p runs along the edge with period sqrt(3)
    if periodic and length < 2:
        raise LatticeError("periodic armchair strips need length >= 2")
    s_cols = rows
    for p in range(length):
        for s in range(s_cols):
            x = p * SQRT3 + s * SQRT3 / 2.0
            y = -s / 2.0
            add(p, s, 0, (x, y))
            add(p, s, 1, (x - 1.0 / SQRT3, y))

    def at_a(p, s, sub):
        if periodic:
            p %= length
        if not (0 <= p < length):
            return None
        if not (0 <= s < s_cols):
            return None
        return index.get(SiteCoord(p, s, sub))

    for p in range(length):
        for s in range(s_cols):
            e = at_a(p, s, 0)
            links.append(LinkRecord(e, at_a(p, s, 1), "z", 0))
            ox = at_a(p, s + 1, 1)
            if ox is not None:
                links.append(LinkRecord(e, ox, "x", 0))
            oy = at_a(p + 1, s - 1, 1)
            if oy is not None:
                links.append(LinkRecord(e, oy, "y", +1))
    return _finalize(edge_kind, periodicity, coords, positions, links,
                     edge_cells=length, edge_period=SQRT3, rows=s_cols)


def build_finite(shape: str, **size) -> LatticeGraph:
    """Build a finite open sample.

    ``shape="hexagon"`` takes ``side`` (>= 1) and yields the all-zigzag
    hexagonal flake with ``6*side**2`` sites. ``shape="rectangle"`` takes
    ``width`` and ``height`` in unit cells (parallelogram patch in the cell
    basis; mainly for tests).
    """
    if shape == "hexagon":
        side = int(size.get("side", 0))
        if side < 1:
            raise LatticeError("hexagon side must be >= 1")
        radius = side - 1
        anchors = [
            (m, r)
            for m in range(-radius, radius + 1)
            for r in range(-radius, radius + 1)
            if max(abs(m), abs(r), abs(m - r)) <= radius
        ]
        # ring cells of the plaquette anchored at even(m, r)
        cells: set[tuple[int, int, int]] = set()
        for m, r in anchors:
            cells.update([
                (m, r, 0), (m, r, 1), (m, r - 1, 0),
                (m + 1, r, 1), (m + 1, r, 0), (m + 1, r + 1, 1),
            ])
        coords, positions = [], []
        index = {}
        for cm, cr, sub in sorted(cells):
            sc = SiteCoord(cm, cr, sub)
            index[sc] = len(coords)
            coords.append(sc)
            x = cm - cr / 2.0
            y = cr * SQRT3 / 2.0
            if sub == 1:
                y -= 1.0 / SQRT3
            positions.append((x, y))
        links = []
        for sc, i in index.items():
            if sc.sublattice != 0:
                continue
            m, r = sc.cell_x, sc.cell_y
            for kind, (pm, pr) in (("z", (m, r)), ("x", (m + 1, r + 1)),
                                   ("y", (m, r + 1))):
                j = index.get(SiteCoord(pm, pr, 1))
                if j is not None:
                    links.append(LinkRecord(i, j, kind, 0))
        return _finalize("finite-hexagon", "open", coords, positions, links)

    if shape == "rectangle":
        width = int(size.get("width", 0))
        height = int(size.get("height", 0))
        if width < 1 or height < 1:
            raise LatticeError("rectangle needs width, height >= 1")
        coords, positions = [], []
        index = {}
        for m in range(width):
            for r in range(height):
                for sub in (0, 1):
                    sc = SiteCoord(m, r, sub)
                    index[sc] = len(coords)
                    coords.append(sc)
                    x = m - r / 2.0
                    y = r * SQRT3 / 2.0 - (1.0 / SQRT3 if sub else 0.0)
                    positions.append((x, y))
        links = []
        for m in range(width):
            for r in range(height):
                i = index[SiteCoord(m, r, 0)]
                for kind, (pm, pr) in (("z", (m, r)), ("x", (m + 1, r + 1)),
                                       ("y", (m, r + 1))):
                    j = index.get(SiteCoord(pm, pr, 1))
                    if j is not None:
                        links.append(LinkRecord(i, j, kind, 0))
        return _finalize("finite-rectangle", "open", coords, positions, links)

    raise LatticeError(f"unknown finite shape {shape!r}")


def build_torus(cells_x: int, cells_y: int) -> LatticeGraph:
    """Fully periodic honeycomb (no boundary); used for bulk-gap checks.

    Momenta commensurate with the spectral nodes require both extents
    divisible by 3.
    """
    if cells_x < 3 or cells_y < 3:
        raise LatticeError("torus needs at least 3x3 cells")
    coords, positions = [], []
    index: dict[SiteCoord, int] = {}
    for m in range(cells_x):
        for r in range(cells_y):
            for sub in (0, 1):
                sc = SiteCoord(m, r, sub)
                index[sc] = len(coords)
                coords.append(sc)
                x = m - r / 2.0
                y = r * SQRT3 / 2.0 - (1.0 / SQRT3 if sub else 0.0)
                positions.append((x, y))
    links = []
    for m in range(cells_x):
        for r in range(cells_y):
            i = index[SiteCoord(m, r, 0)]
            for kind, (pm, pr), d in (("z", (m, r), 0),
                                      ("x", (m + 1, r + 1), +1),
                                      ("y", (m, r + 1), 0)):
                j = index[SiteCoord(pm % cells_x, pr % cells_y, 1)]
                links.append(LinkRecord(i, j, kind, d))
    return _finalize("torus", "periodic-xy", coords, positions, links,
                     edge_cells=cells_x, edge_period=1.0, rows=2 * cells_y)


def attach_external_spin(graph: LatticeGraph, edge_site: int,
                         name: Optional[str] = None) -> LatticeGraph:
    """Return a copy of ``graph`` with one more external spin on ``edge_site``.

    The host site must be on the boundary with a free ``b_z``; that flavor is
    consumed by the z-kind gauge link to the external ``b_z``.  The external
    ``c``, ``b_x``, ``b_y`` become dynamical modes; the c-c coupling strength
    is supplied later by a pulse schedule.
    """
    if edge_site not in graph.boundary_sites:
        raise LatticeError(f"site {edge_site} is not a boundary site")
    if "z" not in graph.free_flavors(edge_site):
        raise LatticeError(
            f"site {edge_site} has no free b_z (free: {sorted(graph.free_flavors(edge_site))});"
            " attach on a zigzag side that frees b_z"
        )
    if any(sp.host_site == edge_site for sp in graph.external_spins):
        raise LatticeError(f"site {edge_site} already carries an external spin")
    if name is None:
        name = f"spin{len(graph.external_spins) + 1}"
    if any(sp.name == name for sp in graph.external_spins):
        raise LatticeError(f"duplicate external spin name {name!r}")
    free = [fb for fb in graph.free_b_modes if fb != (edge_site, "z")]
    spins = list(graph.external_spins) + [ExternalSpin(name, edge_site)]
    return replace(graph, free_b_modes=free, external_spins=spins)
