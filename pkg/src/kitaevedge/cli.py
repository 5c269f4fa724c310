"""Config-driven batch front-end.

Subcommands: ``spectrum | transfer | swap | disorder | theory``.  All take a
JSON config (sections: lattice, couplings, protocol, spectrum, disorder,
output) and write CSV/JSON artifacts carrying a reproducibility header
(config hash, seed, package version).

Exit codes: 0 success, 2 config error, 3 physics-threshold failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, edgetheory
from .hamiltonian import AssemblyError, CouplingParams, GaugeConfig, assemble
from .lattice import LatticeError, build_finite, build_strip, build_torus
from .disorder import DisorderSpec, fidelity_sweep, spread_trend
from .protocols import (FidelityReport, ProtocolError, ProtocolSpec,
                        ThresholdError, full_swap_gate, prepare_two_spin_graph,
                        transfer_between_spins)
from .spectra import (BranchError, PhaseError, classify_edge_branch,
                      crossing_qx, edge_branch_energy, group_velocity,
                      strip_band_structure)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_THRESHOLD = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "lattice": {"kind", "rows", "length", "periodic", "side", "width", "height"},
    "couplings": {"Jx", "Jy", "Jz", "kappa", "kappa_xyz", "h_b",
                  "suppress_edge_triples"},
    "protocol": {"sites", "lambda", "pulse", "capture", "duration",
                 "pulse_steps", "local_field", "transport"},
    "spectrum": {"qx_points", "boundary_depth", "which_edge", "crossing_window"},
    "disorder": {"spread", "distribution", "seed", "samples", "spread_grid"},
    "output": {"formats"},
}


def _check_keys(cfg: dict) -> None:
    for section, body in cfg.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        unknown = set(body) - _SECTIONS[section]
        if unknown:
            raise ConfigError(
                f"unknown keys in section {section!r}: {sorted(unknown)}")


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("top-level config must be a JSON object")
    _check_keys(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_lattice(cfg: dict):
    lat = cfg.get("lattice", {})
    kind = lat.get("kind")
    if kind in ("zigzag", "armchair"):
        periodic = lat.get("periodic", True)
        return build_strip(kind, rows=int(lat.get("rows", 60)),
                           length=int(lat.get("length", 1 if periodic else 8)),
                           periodicity="periodic-x" if periodic else "open")
    if kind == "hexagon":
        return build_finite("hexagon", side=int(lat.get("side", 8)))
    if kind == "rectangle":
        return build_finite("rectangle", width=int(lat.get("width", 4)),
                            height=int(lat.get("height", 4)))
    if kind == "torus":
        return build_torus(int(lat.get("length", 24)), int(lat.get("rows", 24)))
    raise ConfigError(f"lattice.kind must be one of zigzag|armchair|hexagon|"
                      f"rectangle|torus, got {kind!r}")


def build_params(cfg: dict) -> CouplingParams:
    c = cfg.get("couplings", {})
    kxyz = c.get("kappa_xyz")
    return CouplingParams(
        Jx=float(c.get("Jx", 1.0)), Jy=float(c.get("Jy", 1.0)),
        Jz=float(c.get("Jz", 1.0)), kappa=float(c.get("kappa", 0.0)),
        kappa_xyz=tuple(kxyz) if kxyz else None,
        h_b=float(c.get("h_b", 0.0)),
        suppress_edge_triples=bool(c.get("suppress_edge_triples", False)),
    )


def auto_spin_sites(graph) -> tuple[int, int]:
    """Mid-side sites with free b_z on the two z-cut sides of a hexagon."""
    zfree = [s for s, fl in graph.free_b_modes if fl == "z"]
    if len(zfree) < 2:
        raise ConfigError("sample has fewer than two sites with free b_z")
    ys = graph.positions[zfree][:, 1]
    top = sorted((s for s in zfree if graph.positions[s, 1] > ys.max() - 0.3),
                 key=lambda s: graph.positions[s, 0])
    bot = sorted((s for s in zfree if graph.positions[s, 1] < ys.min() + 0.3),
                 key=lambda s: graph.positions[s, 0])
    if top and bot and top[0] != bot[0]:
        return top[len(top) // 2], bot[len(bot) // 2]
    mid = len(zfree) // 2
    return zfree[0], zfree[mid]


def build_protocol(cfg: dict, graph) -> tuple:
    p = cfg.get("protocol", {})
    sites = p.get("sites", "auto")
    if sites == "auto":
        site1, site2 = auto_spin_sites(graph)
    else:
        if not (isinstance(sites, (list, tuple)) and len(sites) == 2):
            raise ConfigError("protocol.sites must be 'auto' or [site1, site2]")
        site1, site2 = int(sites[0]), int(sites[1])
    spec = ProtocolSpec(
        spin_sites=(site1, site2),
        lam=float(p.get("lambda", 0.1)),
        pulse=p.get("pulse", "smooth_peak"),
        capture=p.get("capture", "rectangular"),
        duration=p.get("duration"),
        pulse_steps=int(p.get("pulse_steps", 50)),
        local_field=float(p.get("local_field", 0.25)),
    )
    return spec, p.get("transport", "simulated")


def _header_lines(cfg, seed) -> list[str]:
    return [f"config_sha256={config_hash(cfg)} seed={seed} "
            f"version={__version__}"]


def _json_header(cfg, seed) -> dict:
    return {"config_sha256": config_hash(cfg), "seed": seed,
            "version": __version__}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float)
                    + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_spectrum(cfg, out: Path, seed: int, threads: int) -> int:
    graph = build_lattice(cfg)
    if graph.periodicity != "periodic-x":
        raise ConfigError("spectrum needs a periodic strip (zigzag or armchair)")
    params = build_params(cfg)
    sc = cfg.get("spectrum", {})
    zone = 2 * math.pi / graph.edge_period
    nq = int(sc.get("qx_points", 512))
    qgrid = np.linspace(0.0, zone, nq, endpoint=False)
    if graph.edge_kind == "armchair":
        qgrid = qgrid - zone / 2.0
    bands = strip_band_structure(graph, params, qx_grid=qgrid,
                                 boundary_depth=sc.get("boundary_depth"),
                                 threads=threads)
    hdr = _header_lines(cfg, seed)
    bands.export_csv(out / "bands.csv", hdr)

    records = classify_edge_branch(bands)
    with open(out / "edge_branch.csv", "w", newline="") as fh:
        for line in hdr:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["qx", "band_index", "energy", "edge_weight",
                    "decay_length", "which_edge", "ambiguous"])
        for r in records:
            w.writerow([repr(r.qx), r.band_index, repr(r.energy),
                        repr(r.edge_weight), repr(r.decay_length),
                        r.which_edge, int(r.ambiguous)])

    which = sc.get("which_edge", "top")
    if sc.get("crossing_window"):
        window = tuple(sc["crossing_window"])
    elif graph.edge_kind == "zigzag" and params.h_b == 0.0:
        window = (math.pi - 1.0, math.pi + 1.0)
    else:
        window = (-0.5, 0.5)
    summary = {"header": _json_header(cfg, seed),
               "bulk_gap": edgetheory.bulk_gap(kappa=params.kappa,
                                               kappa_xyz=params.kappa_xyz),
               "zone_width": zone, "edge_kind": graph.edge_kind}
    try:
        qc = crossing_qx(bands, which, window)
        summary["crossing_qx"] = qc
        summary["v_gr"] = group_velocity(bands, which, qc)
    except BranchError as e:
        summary["crossing_qx"] = None
        summary["crossing_error"] = str(e)
    _write_json(out / "spectrum.json", summary)
    print(f"spectrum: wrote bands.csv, edge_branch.csv, spectrum.json to {out}")
    return EXIT_OK


def cmd_transfer(cfg, out: Path, seed: int, threads: int) -> int:
    graph = build_lattice(cfg)
    params = build_params(cfg)
    spec, _transport = build_protocol(cfg, graph)
    g2 = prepare_two_spin_graph(graph, *spec.spin_sites)
    report = transfer_between_spins(g2, params, spec)
    payload = json.loads(report.to_json(header=_json_header(cfg, seed)))
    _write_json(out / "transfer.json", payload)

    # trajectory of the written packet
    from .dynamics import Evolver, basis_vector, export_trajectory_csv
    from .protocols import pulse_segments
    cm = assemble(g2, params)
    ev = Evolver(cm)
    v = basis_vector(cm, ("ext", "s1", "c"))
    for seg in pulse_segments("s1", spec.lam, spec.pulse_duration, spec.pulse,
                              spec.pulse_steps):
        v = ev.apply_segment(v, seg)
    times = np.linspace(0.0, report.timings["travel1"], 25)
    states = ev.free_states_at(v, times)
    export_trajectory_csv(out / "trajectory.csv", times, states, cm,
                          _header_lines(cfg, seed), min_weight=1e-6)
    fid = report.fidelities["c1_to_c2"]
    print(f"transfer: fidelity c1->c2 = {fid:.4f}, files in {out}")
    if spec.lam == 0.0 or fid < 0.01:
        print("warning: transfer fidelity is consistent with zero coupling")
    return EXIT_OK


def cmd_swap(cfg, out: Path, seed: int, threads: int) -> int:
    graph = build_lattice(cfg)
    params = build_params(cfg)
    spec, transport = build_protocol(cfg, graph)
    g2 = prepare_two_spin_graph(graph, *spec.spin_sites)
    report = full_swap_gate(g2, params, spec, transport=transport)
    _write_json(out / "swap.json",
                json.loads(report.to_json(header=_json_header(cfg, seed))))
    print(f"swap: status={report.status}, weakest mode fidelity "
          f"{report.fidelities['weakest_mode']:.4f}, report in {out}")
    if report.status != "ok":
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_disorder(cfg, out: Path, seed: int, threads: int) -> int:
    graph = build_lattice(cfg)
    params = build_params(cfg)
    spec, _transport = build_protocol(cfg, graph)
    d = cfg.get("disorder", {})
    if seed == 0:
        seed = int(d.get("seed", 0))
    g2 = prepare_two_spin_graph(graph, *spec.spin_sites)
    hdr = _header_lines(cfg, seed)
    grid = d.get("spread_grid")
    if grid:
        results = spread_trend(g2, params, spec, grid, seed=seed,
                               samples=int(d.get("samples", 8)),
                               distribution=d.get("distribution", "uniform"))
        summaries = [r.summary() for r in results]
        for r in results:
            r.to_csv(out / f"disorder_spread_{r.spread:g}.csv", hdr)
        _write_json(out / "disorder.json",
                    {"header": _json_header(cfg, seed), "trend": summaries})
        means = [s["mean"] for s in summaries]
        print(f"disorder trend over {grid}: means {np.round(means, 4).tolist()}")
    else:
        dspec = DisorderSpec(relative_spread=float(d.get("spread", 0.1)),
                             distribution=d.get("distribution", "uniform"),
                             seed=seed, samples=int(d.get("samples", 8)))
        res = fidelity_sweep(g2, params, spec, dspec)
        res.to_csv(out / "disorder.csv", hdr)
        _write_json(out / "disorder.json",
                    {"header": _json_header(cfg, seed), **res.summary()})
        print(f"disorder: mean fidelity {res.mean:.4f} over "
              f"{dspec.samples} samples")
    return EXIT_OK


def cmd_theory(cfg, out: Path, seed: int, threads: int) -> int:
    params = build_params(cfg)
    kap, kxyz = params.kappa, params.kappa_xyz
    delta = edgetheory.bulk_gap(kappa=kap, kappa_xyz=kxyz)
    hdr = _header_lines(cfg, seed)
    hb = params.h_b

    def table(path, cols, rows):
        with open(out / path, "w", newline="") as fh:
            for line in hdr:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for r in rows:
                w.writerow([repr(float(x)) for x in r])

    qs = np.linspace(edgetheory.TWO_MODE_LO + 1e-6,
                     edgetheory.TWO_MODE_HI - 1e-6, 101)
    table("zero_field_branch.csv", ["qx", "energy", "slope"],
          [(q, edgetheory.zigzag_zero_field_energy(q, kap, kxyz),
            edgetheory.zigzag_zero_field_slope(q, kap, kxyz)) for q in qs])

    hz = hb if hb > 0 else 0.1
    w_lim = edgetheory.TWO_MODE_LO - edgetheory.node_exclusion_window(kap, kxyz)
    qs2 = np.linspace(-w_lim, w_lim, 101)
    table("uniform_field_branch.csv", ["qx", "energy"],
          [(q, edgetheory.zigzag_single_mode_energy(q, hz, kap, kxyz))
           for q in qs2])

    table("two_mode_splitting.csv", ["qx", "energy_plus", "energy_minus"],
          [(q, *edgetheory.zigzag_two_mode_energy(q, hz)) for q in qs])

    hbs = np.linspace(0.0, 2.0 * math.sqrt(delta), 41) if delta > 0 else [0.0]
    table("armchair_velocity.csv", ["h_b", "v_gr"],
          [(h, edgetheory.armchair_vgr(h, delta)) for h in hbs])

    ys = np.arange(0.5, 20.0, 0.5)
    prof0 = edgetheory.armchair_mode_profile(ys, delta)
    profh = edgetheory.armchair_mode_profile(ys, delta, h_b=max(hb, 0.1))
    table("armchair_profile.csv", ["y", "black_hb0", "white_hb0",
                                   "black_hb", "white_hb"],
          [(y, prof0[i, 0], prof0[i, 1], profh[i, 0], profh[i, 1])
           for i, y in enumerate(ys)])

    uv = edgetheory.zigzag_vgr_uniform_field(hz, kap, kxyz)
    summary = {"header": _json_header(cfg, seed), "bulk_gap": delta,
               "zero_field_vgr_magnitude": abs(
                   edgetheory.zigzag_zero_field_slope(math.pi, kap, kxyz)),
               "uniform_field_vgr_stated": uv.stated,
               "uniform_field_vgr_spectrum_slope": uv.spectrum_slope,
               "armchair_decay_length": edgetheory.armchair_decay_length(delta)
               if delta > 0 else None}
    _write_json(out / "theory.json", summary)
    print(f"theory: wrote formula tables to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "spectrum": cmd_spectrum,
    "transfer": cmd_transfer,
    "swap": cmd_swap,
    "disorder": cmd_disorder,
    "theory": cmd_theory,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kitaevedge",
        description="Kitaev honeycomb edge-mode simulations")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads for momentum grids (0 = cores)")
    args = parser.parse_args(argv)

    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args.seed, threads)
    except (ConfigError, LatticeError, ProtocolError, PhaseError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ThresholdError as e:
        print(f"physics threshold failure: {e}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (AssemblyError, BranchError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
