"""Assembly of the quadratic Majorana generator and Z2 gauge/flux tools.

The Hamiltonian is ``H = (i/4) c^T A c`` with ``A`` real antisymmetric.
Single-particle excitation energies are the positive eigenvalues of ``iA``.
Matrix elements (even-sublattice site listed first on links):

* nearest-neighbor link of kind ``a``:      ``A[even, odd] = 2 * J_a * u``
* next-nearest triple with center Pauli g:  ``A[j, l] = 2 * kappa_g * nu``
* boundary field on a free ``b`` flavor:    ``A[c_i, b_i] = 2 * h``

Mode vectors evolve as ``v(t) = exp(A t) v`` (see dynamics); with these signs
a ``pi/2`` pulse of the external coupling maps the external ``c`` onto minus
the edge Majorana, and the two-site z-dimer with ``J_z = 1`` has excitation
energy 2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .lattice import LatticeGraph, LINK_KINDS


class AssemblyError(ValueError):
    """Inconsistent graph/parameter combination."""


@dataclass
class CouplingParams:
    """Exchange couplings, next-nearest-neighbor gap terms and boundary fields.

    ``kappa`` is the isotropic next-nearest coupling; ``kappa_xyz`` overrides
    it with per-direction values.  ``h_b`` is applied to every free boundary
    ``b`` flavor (for a zigzag edge that is the ``z`` component, matching a
    uniform field whose other components do not enter the quadratic sector).
    ``h_site`` maps site index -> (hx, hy, hz) overrides; a nonzero component
    whose ``b`` flavor is not free is an error.

    ``link_factors`` / ``triple_factors`` / ``field_factors`` are optional
    multiplicative disorder arrays aligned with the graph's record lists
    (fields ordered as ``graph.free_b_modes``).

    ``suppress_edge_triples`` drops triples whose center sits on a boundary
    site that frees the triple's Pauli direction; this models the weak extra
    suppression of next-nearest couplings in the second row when the boundary
    field vanishes.  Default off.
    """

    Jx: float = 1.0
    Jy: float = 1.0
    Jz: float = 1.0
    kappa: float = 0.0
    kappa_xyz: Optional[tuple[float, float, float]] = None
    h_b: float = 0.0
    h_site: Optional[dict[int, tuple[float, float, float]]] = None
    link_factors: Optional[np.ndarray] = None
    triple_factors: Optional[np.ndarray] = None
    field_factors: Optional[np.ndarray] = None
    suppress_edge_triples: bool = False

    @property
    def kappas(self) -> dict[str, float]:
        if self.kappa_xyz is not None:
            kx, ky, kz = self.kappa_xyz
            return {"x": kx, "y": ky, "z": kz}
        return {"x": self.kappa, "y": self.kappa, "z": self.kappa}

    @property
    def J(self) -> dict[str, float]:
        return {"x": self.Jx, "y": self.Jy, "z": self.Jz}

    def in_b_phase(self) -> bool:
        jx, jy, jz = abs(self.Jx), abs(self.Jy), abs(self.Jz)
        return jx < jy + jz and jy < jx + jz and jz < jx + jy


@dataclass
class GaugeConfig:
    """Z2 link variables; ``u`` follows the graph's link list order."""

    u: np.ndarray
    u_ext: dict[str, int] = field(default_factory=dict)

    @classmethod
    def default(cls, graph: LatticeGraph) -> "GaugeConfig":
        return cls(u=np.ones(len(graph.links), dtype=int),
                   u_ext={sp_.name: 1 for sp_ in graph.external_spins})

    def copy(self) -> "GaugeConfig":
        return GaugeConfig(u=self.u.copy(), u_ext=dict(self.u_ext))

    def ext(self, name: str) -> int:
        return self.u_ext.get(name, 1)


@dataclass
class ModeBasis:
    """Ordering of the Majorana modes backing the generator matrix.

    Layout: one ``('c', site)`` per lattice site, then the free boundary
    ``('b', site, flavor)`` modes, then ``('ext', name, flavor)`` with flavor
    in ``c, bx, by`` per external spin.
    """

    modes: list[tuple]
    index: dict[tuple, int]

    @classmethod
    def for_graph(cls, graph: LatticeGraph) -> "ModeBasis":
        modes: list[tuple] = [("c", i) for i in range(graph.n_sites)]
        modes += [("b", i, fl) for i, fl in graph.free_b_modes]
        for spn in graph.external_spins:
            modes += [("ext", spn.name, fl) for fl in ("c", "bx", "by")]
        return cls(modes=modes, index={m: k for k, m in enumerate(modes)})

    def __len__(self) -> int:
        return len(self.modes)

    def c(self, site: int) -> int:
        return self.index[("c", site)]

    def b(self, site: int, flavor: str) -> int:
        return self.index[("b", site, flavor)]

    def ext(self, name: str, flavor: str) -> int:
        return self.index[("ext", name, flavor)]


@dataclass
class CouplingMatrix:
    """Real antisymmetric single-particle generator with its provenance."""

    matrix: sp.csr_matrix
    basis: ModeBasis
    graph: LatticeGraph
    params: CouplingParams
    gauge: GaugeConfig

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def energies(self) -> np.ndarray:
        """All eigenvalues of iA, ascending."""
        return np.linalg.eigvalsh(1j * self.dense())

    def excitations(self) -> np.ndarray:
        """Non-negative single-particle energies, ascending."""
        e = self.energies()
        return e[e >= -1e-12]

    def export_csv(self, path) -> None:
        coo = self.matrix.tocoo()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "value"])
            for r, c, v in zip(coo.row, coo.col, coo.data):
                w.writerow([int(r), int(c), repr(float(v))])


def _site_fields(graph: LatticeGraph, params: CouplingParams):
    """Per free-b-mode field strengths, ordered as graph.free_b_modes."""
    comp = {"x": 0, "y": 1, "z": 2}
    vals = np.full(len(graph.free_b_modes), params.h_b, dtype=float)
    overrides = params.h_site or {}
    free_set = set(graph.free_b_modes)
    for site, hvec in overrides.items():
        if site < 0 or site >= graph.n_sites:
            raise AssemblyError(f"h_site on nonexistent site {site}")
        for fl, ci in comp.items():
            h = float(hvec[ci])
            if h == 0.0:
                continue
            if (site, fl) not in free_set:
                raise AssemblyError(
                    f"field component {fl} on site {site} has no free b_{fl};"
                    " that coupling is outside the quadratic sector"
                )
    for k, (site, fl) in enumerate(graph.free_b_modes):
        if site in overrides:
            vals[k] = float(overrides[site][comp[fl]])
    if params.field_factors is not None:
        ff = np.asarray(params.field_factors, dtype=float)
        if ff.shape != vals.shape:
            raise AssemblyError("field_factors length mismatch")
        vals = vals * ff
    return vals


def assemble(graph: LatticeGraph, params: CouplingParams,
             gauge: Optional[GaugeConfig] = None) -> CouplingMatrix:
    """Build the antisymmetric generator A for a graph/parameter/gauge set."""
    if gauge is None:
        gauge = GaugeConfig.default(graph)
    if len(gauge.u) != len(graph.links):
        raise AssemblyError("gauge vector length must match the link list")
    basis = ModeBasis.for_graph(graph)
    n = len(basis)

    rows, cols, vals = [], [], []

    def put(i, j, v):
        if v == 0.0:
            return
        rows.extend((i, j))
        cols.extend((j, i))
        vals.extend((v, -v))

    lf = params.link_factors
    if lf is not None and len(lf) != len(graph.links):
        raise AssemblyError("link_factors length mismatch")
    jmap = params.J
    for li, ln in enumerate(graph.links):
        j = jmap[ln.kind] * (lf[li] if lf is not None else 1.0)
        put(basis.c(ln.site_a), basis.c(ln.site_b), 2.0 * j * int(gauge.u[li]))

    tf = params.triple_factors
    if tf is not None and len(tf) != len(graph.triples):
        raise AssemblyError("triple_factors length mismatch")
    kmap = params.kappas
    suppress = params.suppress_edge_triples
    for ti, tr in enumerate(graph.triples):
        if suppress and tr.kind in graph.free_flavors(tr.center_k):
            continue
        k = kmap[tr.kind] * (tf[ti] if tf is not None else 1.0)
        u_path = int(gauge.u[tr.link_jk]) * int(gauge.u[tr.link_kl])
        put(basis.c(tr.outer_j), basis.c(tr.outer_l),
            2.0 * k * tr.chirality_sign * u_path)

    hvals = _site_fields(graph, params)
    for (site, fl), h in zip(graph.free_b_modes, hvals):
        put(basis.c(site), basis.b(site, fl), 2.0 * h)

    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    return CouplingMatrix(matrix=a, basis=basis, graph=graph,
                          params=params, gauge=gauge)


# ---------------------------------------------------------------------------
# fluxes
# ---------------------------------------------------------------------------

@dataclass
class FluxPattern:
    """Wilson-loop value (+-1) per hexagonal plaquette."""

    values: np.ndarray

    @property
    def n_fluxes(self) -> int:
        return int(np.sum(self.values == -1))

    def flipped(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.values == -1)]


def flux_pattern(gauge: GaugeConfig, graph: LatticeGraph) -> FluxPattern:
    """Product of link variables around each plaquette (even->odd orientation)."""
    vals = np.array([int(np.prod(gauge.u[list(p)])) for p in graph.plaquettes],
                    dtype=int)
    return FluxPattern(values=vals)


def _plaquette_adjacency(graph: LatticeGraph) -> dict[int, list[tuple[int, int]]]:
    by_link: dict[int, list[int]] = {}
    for pi, p in enumerate(graph.plaquettes):
        for li in p:
            by_link.setdefault(li, []).append(pi)
    adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(len(graph.plaquettes))}
    for li, ps in by_link.items():
        if len(ps) == 2:
            a, b = ps
            adj[a].append((b, li))
            adj[b].append((a, li))
    return adj


def insert_flux_pair(gauge: GaugeConfig, graph: LatticeGraph,
                     plaquette_a: int, plaquette_b: int) -> GaugeConfig:
    """Return a gauge with flux -1 at exactly the two given plaquettes.

    Implemented by flipping ``u`` along a dual-lattice path between them.
    """
    npl = len(graph.plaquettes)
    if not (0 <= plaquette_a < npl and 0 <= plaquette_b < npl):
        raise AssemblyError("plaquette index out of range")
    if plaquette_a == plaquette_b:
        raise AssemblyError("plaquettes must be distinct")
    adj = _plaquette_adjacency(graph)
    # BFS in the dual lattice
    prev: dict[int, tuple[int, int]] = {plaquette_a: (-1, -1)}
    frontier = [plaquette_a]
    while frontier and plaquette_b not in prev:
        nxt = []
        for p in frontier:
            for q, li in adj[p]:
                if q not in prev:
                    prev[q] = (p, li)
                    nxt.append(q)
        frontier = nxt
    if plaquette_b not in prev:
        raise AssemblyError("plaquettes are not connected in the dual lattice")
    out = gauge.copy()
    p = plaquette_b
    while p != plaquette_a:
        q, li = prev[p]
        out.u[li] = -out.u[li]
        p = q
    return out
