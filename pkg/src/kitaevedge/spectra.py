"""Momentum-space diagnostics: bulk dispersion, strip bands, edge branches.

Strip band structures are computed from the Bloch matrix of one edge unit
cell; eigenvalues of ``i B(q)`` are the single-particle energies at edge
momentum ``q`` (measured in inverse lattice constants, so the zigzag zone has
width ``2 pi`` and the armchair zone ``2 pi / sqrt(3)``).
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.optimize

from .hamiltonian import (AssemblyError, CouplingMatrix, CouplingParams,
                          GaugeConfig, assemble)
from .lattice import LatticeGraph

SQRT3 = math.sqrt(3.0)
N1 = np.array([0.5, SQRT3 / 2.0])
N2 = np.array([-0.5, SQRT3 / 2.0])


class PhaseError(ValueError):
    """Raised when the couplings leave the gapless B-phase."""


class BranchError(ValueError):
    """Raised when an edge branch cannot be followed at the requested momentum."""


# ---------------------------------------------------------------------------
# bulk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BulkDispersion:
    q: np.ndarray
    f: complex
    delta: complex
    energy: complex
    in_b_phase: bool


def _f_of_q(q, params: CouplingParams) -> complex:
    q = np.asarray(q, dtype=complex)
    return 2.0 * (params.Jx * np.exp(1j * (q @ N1))
                  + params.Jy * np.exp(1j * (q @ N2))
                  + params.Jz)


def _delta_of_q(q, params: CouplingParams) -> complex:
    """Next-nearest-neighbor gap function; 4[k_y sin(q n1) + k_x sin(-q n2) + k_z sin(q(n2-n1))]."""
    q = np.asarray(q, dtype=complex)
    k = params.kappas
    return 4.0 * (k["y"] * np.sin(q @ N1)
                  + k["x"] * np.sin(-(q @ N2))
                  + k["z"] * np.sin(q @ (N2 - N1)))


def bulk_dispersion(q, params: CouplingParams) -> BulkDispersion:
    """Dispersion data at (possibly complex) momentum ``q``.

    For real momenta the energy is ``sqrt(|f|^2 + Delta^2)``; complex momenta
    analytically continue ``energy^2 = Delta(q)^2 + f(q) f(-q)`` for
    evanescent-mode analysis.
    """
    q = np.asarray(q, dtype=complex)
    f = _f_of_q(q, params)
    d = _delta_of_q(q, params)
    e2 = d * d + f * _f_of_q(-q, params)
    energy = np.sqrt(e2)
    if np.isrealobj(q) or np.allclose(q.imag, 0.0):
        qr = q.real
        f = _f_of_q(qr, params)
        d = complex(_delta_of_q(qr, params)).real
        energy = math.sqrt(abs(f) ** 2 + d ** 2)
    return BulkDispersion(q=q, f=f, delta=d, energy=energy,
                          in_b_phase=params.in_b_phase())


def node_locations(params: CouplingParams) -> tuple[np.ndarray, np.ndarray]:
    """The two momenta ``+-q*`` where ``f(q) = 0`` in the B-phase."""
    if not params.in_b_phase():
        raise PhaseError("couplings violate the triangle inequality: gapped A-phase")

    def cost(q):
        f = _f_of_q(q, params)
        return [f.real, f.imag]

    # isotropic-point seed, then polish; scan fallback for strong anisotropy
    seeds = [np.array([4 * np.pi / 3, 0.0])]
    seeds += [np.array([qx, qy])
              for qx in np.linspace(-np.pi, np.pi, 7)
              for qy in np.linspace(-np.pi / SQRT3, np.pi / SQRT3, 5)]
    for seed in seeds:
        sol = scipy.optimize.root(cost, seed, tol=1e-14)
        if sol.success and abs(_f_of_q(sol.x, params)) < 1e-10:
            qstar = sol.x
            return qstar, -qstar
    raise PhaseError("node search failed despite B-phase couplings")


# ---------------------------------------------------------------------------
# strip Bloch matrices
# ---------------------------------------------------------------------------

class BlochBuilder:
    """Per-momentum Bloch matrix of a periodic strip."""

    def __init__(self, graph: LatticeGraph, params: CouplingParams,
                 gauge: Optional[GaugeConfig] = None):
        if graph.periodicity != "periodic-x":
            raise AssemblyError("Bloch construction needs a periodic-x strip; "
                                "use finite diagonalization for open samples")
        if graph.edge_cells < 1:
            raise AssemblyError("strip has no edge cells")
        if (params.link_factors is not None or params.triple_factors is not None
                or params.field_factors is not None):
            raise AssemblyError(
                "per-record disorder factors break translation invariance; "
                "Bloch strips need uniform parameters")
        self.graph = graph
        self.params = params
        self.gauge = gauge if gauge is not None else GaugeConfig.default(graph)
        cm = assemble(graph, params, self.gauge)
        self.basis = cm.basis

        # fold every matrix entry of the length-L strip onto one edge cell
        ncell = len(self.basis) // graph.edge_cells
        if len(self.basis) % graph.edge_cells:
            raise AssemblyError("mode count is not a multiple of the edge cells")
        self._ncell = ncell
        self._period = graph.edge_period

        cell_of, mode_in_cell = self._cell_layout()
        ii, jj, vv, dd = [], [], [], []
        add = self._entries(cell_of, mode_in_cell)
        for (a, b, v, d) in add:
            ii.append(a)
            jj.append(b)
            vv.append(v)
            dd.append(d)
        self._i = np.array(ii, dtype=int)
        self._j = np.array(jj, dtype=int)
        self._v = np.array(vv, dtype=float)
        self._d = np.array(dd, dtype=float)
        self.mode_labels = [self.basis.modes[k] for k in self._cell_modes]

    def _cell_layout(self):
        graph = self.graph
        cell_of = np.zeros(len(self.basis), dtype=int)
        mode_in_cell = np.zeros(len(self.basis), dtype=int)
        per_cell: dict[int, list[int]] = {m: [] for m in range(graph.edge_cells)}
        for k, mode in enumerate(self.basis.modes):
            if mode[0] == "c":
                cx = graph.sites[mode[1]].cell_x
            elif mode[0] == "b":
                cx = graph.sites[mode[1]].cell_x
            else:
                raise AssemblyError("external spins are not supported in Bloch strips")
            cell_of[k] = cx
            per_cell[cx].append(k)
        ref = per_cell[0]
        nc = len(ref)
        # map mode -> slot by matching (type, cell_y, sublattice/flavor)
        def key(mode):
            if mode[0] == "c":
                s = self.graph.sites[mode[1]]
                return ("c", s.cell_y, s.sublattice)
            s = self.graph.sites[mode[1]]
            return ("b", s.cell_y, s.sublattice, mode[2])
        slot = {key(self.basis.modes[k]): p for p, k in enumerate(ref)}
        for k, mode in enumerate(self.basis.modes):
            mode_in_cell[k] = slot[key(mode)]
        self._cell_modes = ref
        if nc * self.graph.edge_cells != len(self.basis):
            raise AssemblyError("inhomogeneous edge cells")
        return cell_of, mode_in_cell

    def _entries(self, cell_of, mode_in_cell):
        """(slot_a, slot_b, value, displacement) folded onto cell 0."""
        graph, params, gauge, basis = self.graph, self.params, self.gauge, self.basis
        out = []
        lf = params.link_factors
        jmap = params.J
        for li, ln in enumerate(graph.links):
            a = basis.c(ln.site_a)
            b = basis.c(ln.site_b)
            if cell_of[a] != 0:
                continue
            v = 2.0 * jmap[ln.kind] * int(gauge.u[li]) * (lf[li] if lf is not None else 1.0)
            if v != 0.0:
                out.append((mode_in_cell[a], mode_in_cell[b], v, ln.delta))
        tf = params.triple_factors
        kmap = params.kappas
        # Triple records are stored once per physical coupling but with an
        # enumeration-dependent (j, l) orientation, so fold them all into a
        # canonical per-cell form and deduplicate translation copies.
        seen: dict[tuple, float] = {}
        for tr in graph.triples:
            if params.suppress_edge_triples and tr.kind in graph.free_flavors(tr.center_k):
                continue
            a = basis.c(tr.outer_j)
            b = basis.c(tr.outer_l)
            u_path = int(gauge.u[tr.link_jk]) * int(gauge.u[tr.link_kl])
            v = 2.0 * kmap[tr.kind] * tr.chirality_sign * u_path
            if v == 0.0:
                continue
            i, j, d = mode_in_cell[a], mode_in_cell[b], tr.delta_jl
            if d < 0 or (d == 0 and i > j):
                i, j, v, d = j, i, -v, -d
            key = (i, j, d)
            if key in seen:
                if abs(seen[key] - v) > 1e-12:
                    raise AssemblyError(
                        "inconsistent folded couplings; Bloch strips need "
                        "translation-invariant parameters")
                continue
            seen[key] = v
            out.append((i, j, v, d))
        from .hamiltonian import _site_fields
        hvals = _site_fields(graph, params)
        for (site, fl), h in zip(graph.free_b_modes, hvals):
            a = basis.c(site)
            if cell_of[a] != 0 or h == 0.0:
                continue
            b = basis.b(site, fl)
            out.append((mode_in_cell[a], mode_in_cell[b], 2.0 * h, 0))
        return out

    @property
    def n_modes(self) -> int:
        return self._ncell

    @property
    def decoupled_modes(self) -> np.ndarray:
        """Cell modes with no matrix entries (exact flat zero bands)."""
        touched = set(self._i) | set(self._j)
        return np.array([k for k in range(self._ncell) if k not in touched],
                        dtype=int)

    def matrix(self, qx: float) -> np.ndarray:
        """Hermitian Bloch matrix iB(q); its eigenvalues are the energies."""
        n = self._ncell
        b = np.zeros((n, n), dtype=complex)
        phase = np.exp(1j * qx * self._period * self._d)
        np.add.at(b, (self._i, self._j), self._v * phase)
        np.add.at(b, (self._j, self._i), -self._v * np.conj(phase))
        return 1j * b

    def eig(self, qx: float):
        """Energies and eigenvectors, with decoupled flat modes kept separate.

        Diagonalizing only the coupled block prevents the exact zero bands of
        decoupled boundary b modes from mixing into degenerate dispersive
        states at their crossings.  Returns (e, v, flat) where ``flat`` marks
        the columns that are pure decoupled modes.
        """
        dec = self.decoupled_modes
        if len(dec) == 0:
            e, v = np.linalg.eigh(self.matrix(qx))
            return e, v, np.zeros(len(e), dtype=bool)
        n = self._ncell
        coup = np.setdiff1d(np.arange(n), dec)
        h = self.matrix(qx)[np.ix_(coup, coup)]
        ec, vc = np.linalg.eigh(h)
        e = np.concatenate([ec, np.zeros(len(dec))])
        v = np.zeros((n, n), dtype=complex)
        v[np.ix_(coup, np.arange(len(coup)))] = vc
        v[dec, len(coup) + np.arange(len(dec))] = 1.0
        flat = np.zeros(n, dtype=bool)
        flat[len(coup):] = True
        order = np.argsort(e, kind="stable")
        return e[order], v[:, order], flat[order]

    def mode_depths(self) -> tuple[np.ndarray, np.ndarray]:
        """Transverse depths (from each edge) of the cell modes."""
        top = np.zeros(self._ncell)
        bot = np.zeros(self._ncell)
        for p, mode in enumerate(self.mode_labels):
            site = mode[1]
            d_top, d_bot = self.graph.transverse_depth(site)
            top[p], bot[p] = d_top, d_bot
        return top, bot


@dataclass
class BandStructure:
    """Energies over a momentum grid plus a handle to recompute eigenvectors."""

    qx_grid: np.ndarray
    bands: np.ndarray  # (nq, n_modes), ascending per momentum
    builder: BlochBuilder = field(repr=False)
    edge_weight_top: np.ndarray = None  # (nq, n_modes)
    edge_weight_bottom: np.ndarray = None
    boundary_depth: float = 4.0

    @property
    def n_bands(self) -> int:
        return self.bands.shape[1]

    def eig_at(self, qx: float):
        return self.builder.eig(qx)

    def bulk_gap_estimate(self) -> float:
        from .edgetheory import bulk_gap
        p = self.builder.params
        return bulk_gap(kappa=p.kappa, kappa_xyz=p.kappa_xyz)

    def export_csv(self, path, header_lines: Iterable[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["qx", "band_index", "energy", "edge_weight", "which_edge"])
            for iq, q in enumerate(self.qx_grid):
                for ib in range(self.n_bands):
                    wt = self.edge_weight_top[iq, ib]
                    wb = self.edge_weight_bottom[iq, ib]
                    which = "top" if wt >= wb else "bottom"
                    w.writerow([repr(float(q)), ib,
                                repr(float(self.bands[iq, ib])),
                                repr(float(max(wt, wb))), which])


def strip_band_structure(graph: LatticeGraph, params: CouplingParams,
                         gauge: Optional[GaugeConfig] = None,
                         qx_grid: Optional[np.ndarray] = None,
                         boundary_depth: Optional[float] = None,
                         threads: int = 1) -> BandStructure:
    """Diagonalize the strip Bloch matrix over a momentum grid.

    ``boundary_depth`` (in site-rows / columns) bounds the region counted as
    "edge" for the stored weights; defaults to 4 rows for zigzag and twice the
    estimated penetration depth for armchair.
    """
    builder = BlochBuilder(graph, params, gauge)
    if qx_grid is None:
        zone = 2 * np.pi / graph.edge_period
        qx_grid = np.linspace(0.0, zone, 512, endpoint=False)
    qx_grid = np.asarray(qx_grid, dtype=float)

    if boundary_depth is None:
        if graph.edge_kind == "armchair":
            from .edgetheory import bulk_gap
            delta = bulk_gap(kappa=params.kappa, kappa_xyz=params.kappa_xyz)
            # columns are half a lattice constant apart
            boundary_depth = 2.0 * (SQRT3 / max(delta, 1e-12)) * 2.0
            boundary_depth = min(boundary_depth, graph.rows / 2.0)
        else:
            boundary_depth = 4.0

    d_top, d_bot = builder.mode_depths()
    top_mask = d_top < boundary_depth
    bot_mask = d_bot < boundary_depth

    nq, nb = len(qx_grid), builder.n_modes
    bands = np.empty((nq, nb))
    w_top = np.empty((nq, nb))
    w_bot = np.empty((nq, nb))

    def work(iq):
        e, v, _flat = builder.eig(qx_grid[iq])
        bands[iq] = e
        p = np.abs(v) ** 2
        w_top[iq] = p[top_mask].sum(axis=0)
        w_bot[iq] = p[bot_mask].sum(axis=0)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, range(nq)))
    else:
        for iq in range(nq):
            work(iq)

    return BandStructure(qx_grid=qx_grid, bands=bands, builder=builder,
                         edge_weight_top=w_top, edge_weight_bottom=w_bot,
                         boundary_depth=float(boundary_depth))


# ---------------------------------------------------------------------------
# edge-branch tools
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeModeRecord:
    qx: float
    energy: float
    edge_weight: float
    decay_length: float
    which_edge: str
    band_index: int
    ambiguous: bool = False


def _profile_decay_length(weights: np.ndarray, depths: np.ndarray,
                          step: float) -> float:
    """Amplitude decay length from depth-aggregated mode weight.

    Aggregates the weight over blocks of three depth levels to wash out the
    sublattice oscillation, then fits the log-linear envelope.  Only the
    near half of the strip is fitted so that weight on the opposite edge
    (degenerate-pair mixing) cannot contaminate the tail.
    """
    order = np.argsort(depths)
    d_sorted = depths[order]
    w_sorted = weights[order]
    half = d_sorted.max() / 2.0
    w_sorted = w_sorted[d_sorted <= half]
    d_sorted = d_sorted[d_sorted <= half]
    levels = np.unique(d_sorted)
    prof = np.array([w_sorted[d_sorted == lv].sum() for lv in levels])
    nblk = len(levels) // 3
    if nblk < 2:
        return float("inf")
    blocks = np.array([prof[3 * k: 3 * k + 3].sum() for k in range(nblk)])
    centers = np.array([levels[3 * k: 3 * k + 3].mean() for k in range(nblk)]) * step
    good = blocks > blocks.max() * 1e-12
    if good.sum() < 2:
        return float("inf")
    slope = np.polyfit(centers[good], np.log(blocks[good]), 1)[0]
    if slope >= 0:
        return float("inf")
    return -2.0 / slope  # weight ~ exp(-2 y / l_amplitude)


def classify_edge_branch(bands: BandStructure,
                         boundary_depth: Optional[float] = None,
                         weight_threshold: float = 0.5,
                         gap_fraction: float = 1.0) -> list[EdgeModeRecord]:
    """Label in-gap modes by edge, with profile decay lengths.

    Modes whose edge weight straddles the threshold within +-0.1 are flagged
    ambiguous rather than dropped.
    """
    builder = bands.builder
    graph = builder.graph
    depth = boundary_depth if boundary_depth is not None else bands.boundary_depth
    gap = bands.bulk_gap_estimate() * gap_fraction
    if gap <= 0:
        raise BranchError("edge classification needs a gapped bulk (kappa != 0)")
    d_top, d_bot = builder.mode_depths()
    step = 0.5 if graph.edge_kind == "armchair" else None
    records: list[EdgeModeRecord] = []
    for iq, q in enumerate(bands.qx_grid):
        sel = np.flatnonzero(np.abs(bands.bands[iq]) < gap)
        if len(sel) == 0:
            continue
        e, v, _flat = bands.eig_at(q)
        p = np.abs(v) ** 2
        for ib in sel:
            wt = p[d_top < depth, ib].sum()
            wb = p[d_bot < depth, ib].sum()
            which = "top" if wt >= wb else "bottom"
            weight = max(wt, wb)
            depths = d_top if which == "top" else d_bot
            if graph.edge_kind == "armchair":
                ell = _profile_decay_length(p[:, ib], depths, 0.5)
            else:
                # zigzag rows are sqrt(3)/2 apart vertically; report in rows
                ell = _profile_decay_length(p[:, ib], depths, 1.0)
            records.append(EdgeModeRecord(
                qx=float(q), energy=float(bands.bands[iq, ib]),
                edge_weight=float(weight), decay_length=float(ell),
                which_edge=which, band_index=int(ib),
                ambiguous=bool(abs(weight - weight_threshold) < 0.1),
            ))
    return records


def edge_branch_energy(bands: BandStructure, qx: float, which_edge: str,
                       boundary_depth: Optional[float] = None,
                       gap_fraction: float = 1.05,
                       min_weight: float = 0.25) -> float:
    """Energy of the maximum-edge-weight in-gap dispersive state at ``qx``.

    Exact flat bands of decoupled boundary b modes are skipped; they are not
    part of the chiral branch.
    """
    builder = bands.builder
    depth = boundary_depth if boundary_depth is not None else bands.boundary_depth
    gap = bands.bulk_gap_estimate() * gap_fraction
    e, v, flat = builder.eig(qx)
    d_top, d_bot = builder.mode_depths()
    depths = d_top if which_edge == "top" else d_bot
    mask = depths < depth
    sel = np.flatnonzero((np.abs(e) < gap) & ~flat)
    if len(sel) == 0:
        raise BranchError(f"no in-gap state at qx={qx:.4f}")
    weights = (np.abs(v[mask][:, sel]) ** 2).sum(axis=0)
    if weights.max() < min_weight:
        raise BranchError(f"no {which_edge}-edge state at qx={qx:.4f}")
    return float(e[sel[np.argmax(weights)]])


def crossing_qx(bands: BandStructure, which_edge: str,
                window: tuple[float, float], tol: float = 1e-10) -> float:
    """Zero crossing of the edge branch, located by bisection."""
    lo, hi = window
    f_lo = edge_branch_energy(bands, lo, which_edge)
    f_hi = edge_branch_energy(bands, hi, which_edge)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        raise BranchError("branch does not change sign over the window")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = edge_branch_energy(bands, mid, which_edge)
        if abs(f_mid) < tol or hi - lo < 1e-12:
            return mid
        if f_lo * f_mid <= 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def group_velocity(bands: BandStructure, which_edge: str, qx0: float,
                   dq: float = 2e-3, min_weight: float = 0.25) -> float:
    """Richardson-refined centered difference of the edge branch at ``qx0``."""
    def deriv(h):
        try:
            ep = edge_branch_energy(bands, qx0 + h, which_edge,
                                    min_weight=min_weight)
            em = edge_branch_energy(bands, qx0 - h, which_edge,
                                    min_weight=min_weight)
        except BranchError as e:
            raise BranchError(
                f"{e}; the window around qx0={qx0:.4f} reaches the continuum, "
                "retry with a smaller dq") from e
        return (ep - em) / (2 * h)
    d1 = deriv(dq)
    d2 = deriv(dq / 2)
    return float((4 * d2 - d1) / 3)
