"""Real-time evolution of Majorana mode vectors under pulse schedules.

Mode vectors evolve as ``v(t) = exp(A t) v`` with ``A`` the real antisymmetric
generator, so every segment propagator is exactly orthogonal.  Piecewise-
constant schedules are integrated segment by segment; the default integrator
eigendecomposes ``iA`` per distinct segment (exact up to roundoff), and a
scaling-and-squaring family path (`scipy` ``expm`` / ``expm_multiply``) is
available for larger mode counts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hamiltonian import AssemblyError, CouplingMatrix

#: mode-count threshold above which method="auto" switches to expm_multiply
AUTO_EXPM_THRESHOLD = 1500


class ScheduleError(ValueError):
    """Schedule references couplings or sites the lattice does not have."""


@dataclass(frozen=True)
class Segment:
    """One piecewise-constant interval of a pulse schedule.

    ``lambdas`` maps external-spin names to the z-z coupling strength,
    ``dhz`` maps edge-site indices to a local z-field pulse (the site must
    carry a free ``b_z``), and ``ext_fields`` maps (spin name, "x"|"y") to a
    local field on the external spin for c <-> b exchanges.
    """

    duration: float
    lambdas: tuple = ()
    dhz: tuple = ()
    ext_fields: tuple = ()

    @staticmethod
    def make(duration: float, lambdas: Optional[Mapping[str, float]] = None,
             dhz: Optional[Mapping[int, float]] = None,
             ext_fields: Optional[Mapping[tuple, float]] = None) -> "Segment":
        if duration <= 0:
            raise ScheduleError("segment durations must be positive")
        return Segment(
            duration=float(duration),
            lambdas=tuple(sorted((lambdas or {}).items())),
            dhz=tuple(sorted((dhz or {}).items())),
            ext_fields=tuple(sorted((ext_fields or {}).items())),
        )

    @property
    def overrides_key(self) -> tuple:
        return (self.lambdas, self.dhz, self.ext_fields)


@dataclass
class PulseSchedule:
    """Ordered piecewise-constant segments."""

    segments: list[Segment] = field(default_factory=list)

    def add(self, duration: float, **kw) -> "PulseSchedule":
        self.segments.append(Segment.make(duration, **kw))
        return self

    @property
    def total_time(self) -> float:
        return sum(s.duration for s in self.segments)

    def validate(self, cm: CouplingMatrix) -> None:
        names = {spn.name for spn in cm.graph.external_spins}
        free = set(cm.graph.free_b_modes)
        for seg in self.segments:
            for name, _ in seg.lambdas:
                if name not in names:
                    raise ScheduleError(f"unknown external spin {name!r}")
            for site, _ in seg.dhz:
                if (site, "z") not in free:
                    raise ScheduleError(
                        f"dhz pulse on site {site} without a free b_z")
            for (name, axis), _ in seg.ext_fields:
                if name not in names:
                    raise ScheduleError(f"unknown external spin {name!r}")
                if axis not in ("x", "y"):
                    raise ScheduleError(f"external field axis must be x or y")

    def reversed_schedule(self) -> "PulseSchedule":
        """Time-reversed schedule (segments reversed, couplings negated)."""
        out = PulseSchedule()
        for seg in reversed(self.segments):
            out.segments.append(Segment(
                duration=seg.duration,
                lambdas=tuple((k, -v) for k, v in seg.lambdas),
                dhz=tuple((k, -v) for k, v in seg.dhz),
                ext_fields=tuple((k, -v) for k, v in seg.ext_fields),
            ))
        return out


def segment_generator(cm: CouplingMatrix, segment: Optional[Segment] = None) -> sp.csr_matrix:
    """Base generator plus the segment's coupling overrides."""
    a = cm.matrix
    if segment is None:
        return a
    basis = cm.basis
    spins = {spn.name: spn for spn in cm.graph.external_spins}
    rows, cols, vals = [], [], []

    def put(i, j, v):
        rows.extend((i, j))
        cols.extend((j, i))
        vals.extend((v, -v))

    for name, lam in segment.lambdas:
        spn = spins.get(name)
        if spn is None:
            raise ScheduleError(f"unknown external spin {name!r}")
        u = cm.gauge.ext(name)
        put(basis.ext(name, "c"), basis.c(spn.host_site), 2.0 * lam * u)
    for site, dh in segment.dhz:
        try:
            b = basis.b(site, "z")
        except KeyError:
            raise ScheduleError(f"dhz pulse on site {site} without a free b_z")
        put(basis.c(site), b, 2.0 * dh)
    for (name, axis), h in segment.ext_fields:
        put(basis.ext(name, "c"), basis.ext(name, "b" + axis), 2.0 * h)
    if not rows:
        return a
    n = a.shape[0]
    extra = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    out = (a + extra).tocsr()
    dev = abs(out + out.T).max()
    if dev > 1e-12:
        raise AssemblyError(f"effective generator lost antisymmetry ({dev:.2e})")
    return out


class SegmentPropagator:
    """Eigendecomposed propagator for one static generator.

    ``iA`` is Hermitian; ``exp(A t) = U exp(-i w t) U*`` stays real orthogonal.
    """

    def __init__(self, a: sp.csr_matrix):
        h = 1j * a.toarray()
        self.w, self.u = np.linalg.eigh(h)
        self._uh = self.u.conj().T

    def matrix(self, t: float) -> np.ndarray:
        o = (self.u * np.exp(-1j * self.w * t)) @ self._uh
        return np.ascontiguousarray(o.real)

    def apply(self, v: np.ndarray, t: float) -> np.ndarray:
        coef = self._uh @ v
        out = self.u @ (np.exp(-1j * self.w * t)[..., None] * coef
                        if v.ndim > 1 else np.exp(-1j * self.w * t) * coef)
        return np.ascontiguousarray(out.real)

    def states_at(self, v: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Stack of evolved copies of ``v`` at the given times, shape (nt, M)."""
        coef = self._uh @ v
        phases = np.exp(-1j * np.outer(self.w, np.asarray(times, dtype=float)))
        return np.ascontiguousarray((self.u @ (phases * coef[:, None])).T.real)


class Evolver:
    """Propagates mode vectors through a schedule, caching per-segment work."""

    def __init__(self, cm: CouplingMatrix, method: str = "auto"):
        if method not in ("auto", "eig", "expm"):
            raise ValueError(f"unknown method {method!r}")
        self.cm = cm
        m = cm.dimension
        if method == "auto":
            method = "expm" if m > AUTO_EXPM_THRESHOLD else "eig"
        self.method = method
        self._eig_cache: dict = {}

    def propagator(self, segment: Optional[Segment] = None) -> SegmentPropagator:
        key = segment.overrides_key if segment is not None else None
        if key not in self._eig_cache:
            self._eig_cache[key] = SegmentPropagator(
                segment_generator(self.cm, segment))
        return self._eig_cache[key]

    def apply_segment(self, v: np.ndarray, segment: Segment) -> np.ndarray:
        if self.method == "eig":
            return self.propagator(segment).apply(v, segment.duration)
        a = segment_generator(self.cm, segment)
        return spla.expm_multiply(a * segment.duration, v)

    def propagate(self, v: np.ndarray, schedule: PulseSchedule) -> np.ndarray:
        schedule.validate(self.cm)
        out = np.array(v, dtype=float, copy=True)
        for seg in schedule.segments:
            out = self.apply_segment(out, seg)
        return out

    def free_states_at(self, v: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Evolve under the base (override-free) generator to many times.

        The expm path steps sequentially through a uniform grid; scipy's
        interval mode of ``expm_multiply`` is unstable for fine grids.
        """
        times = np.asarray(times, dtype=float)
        if self.method == "eig":
            return self.propagator(None).states_at(v, times)
        a = self.cm.matrix
        if len(times) == 1:
            return spla.expm_multiply(a * float(times[0]), v)[None, :]
        dt = np.diff(times)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ValueError("expm path needs a uniform time grid")
        out = np.empty((len(times), len(v)))
        out[0] = spla.expm_multiply(a * float(times[0]), v)
        step = a * float(dt[0])
        for k in range(1, len(times)):
            out[k] = spla.expm_multiply(step, out[k - 1])
        return out


def evolve(schedule: PulseSchedule, base: CouplingMatrix,
           method: str = "eig") -> np.ndarray:
    """Total orthogonal evolution matrix ``O = prod_segments exp(A_seg t)``.

    Later segments multiply from the left.  ``method="expm"`` uses dense
    scaling-and-squaring instead of eigendecomposition.
    """
    schedule.validate(base)
    m = base.dimension
    o = np.eye(m)
    cache: dict = {}
    for seg in schedule.segments:
        key = seg.overrides_key
        if method == "eig":
            if key not in cache:
                cache[key] = SegmentPropagator(segment_generator(base, seg))
            o = cache[key].matrix(seg.duration) @ o
        elif method == "expm":
            a = segment_generator(base, seg)
            o = scipy.linalg.expm((a * seg.duration).toarray()) @ o
        else:
            raise ValueError(f"unknown method {method!r}")
    return o


def propagate(v: np.ndarray, o: np.ndarray) -> np.ndarray:
    """Apply an evolution matrix to a mode vector, checking unit norm."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != o.shape[1]:
        raise ValueError(f"dimension mismatch: vector {v.shape[0]}, matrix {o.shape[1]}")
    out = o @ v
    n0, n1 = np.linalg.norm(v), np.linalg.norm(out)
    if abs(n1 - n0) > 1e-8 * max(n0, 1.0):
        raise AssemblyError(f"propagation broke the norm ({n0} -> {n1})")
    return out


def overlap(v: np.ndarray, w: np.ndarray) -> float:
    """Euclidean inner product of two mode vectors; fidelity is |overlap|."""
    return float(np.dot(np.asarray(v, float), np.asarray(w, float)))


def orthogonality_defect(o: np.ndarray) -> float:
    return float(np.abs(o.T @ o - np.eye(o.shape[0])).max())


def basis_vector(cm: CouplingMatrix, mode: tuple) -> np.ndarray:
    v = np.zeros(cm.dimension)
    v[cm.basis.index[mode]] = 1.0
    return v


@dataclass
class DensitySnapshot:
    """Per-site weight of a mode vector; c and b flavors listed separately."""

    site_c: np.ndarray
    site_b: dict
    external: dict

    @property
    def total(self) -> float:
        return float(self.site_c.sum() + sum(self.site_b.values())
                     + sum(self.external.values()))


def snapshot_density(v: np.ndarray, cm: CouplingMatrix) -> DensitySnapshot:
    w = np.asarray(v, float) ** 2
    site_c = np.zeros(cm.graph.n_sites)
    site_b: dict = {}
    external: dict = {}
    for k, mode in enumerate(cm.basis.modes):
        if mode[0] == "c":
            site_c[mode[1]] += w[k]
        elif mode[0] == "b":
            site_b[(mode[1], mode[2])] = w[k]
        else:
            external[(mode[1], mode[2])] = w[k]
    return DensitySnapshot(site_c=site_c, site_b=site_b, external=external)


def export_trajectory_csv(path, times: Sequence[float], states: np.ndarray,
                          cm: CouplingMatrix,
                          header_lines: Iterable[str] = (),
                          min_weight: float = 1e-9) -> None:
    """CSV rows ``time,site,weight`` (external modes as site -1, -2, ...)."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["time", "site", "weight"])
        ext_id = {spn.name: -(k + 1) for k, spn in enumerate(cm.graph.external_spins)}
        for t, v in zip(times, states):
            snap = snapshot_density(v, cm)
            for site, wt in enumerate(snap.site_c):
                tot = wt + sum(snap.site_b.get((site, fl), 0.0) for fl in "xyz")
                if tot > min_weight:
                    w.writerow([repr(float(t)), site, repr(float(tot))])
            agg: dict = {}
            for (name, _fl), wt in snap.external.items():
                agg[name] = agg.get(name, 0.0) + wt
            for name, wt in agg.items():
                if wt > min_weight:
                    w.writerow([repr(float(t)), ext_id[name], repr(float(wt))])
