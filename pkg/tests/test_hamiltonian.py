import numpy as np
import pytest

from kitaevedge import (AssemblyError, CouplingParams, GaugeConfig, assemble,
                        build_finite, build_strip, build_torus, flux_pattern,
                        insert_flux_pair)

KAPPA = 0.027


def test_z_dimer_excitation_energy():
    # two-site z-dimer: 2x2 oracle gives eigenvalues of iA = +-2Jz,
    # excitation energy 2 = |f| with f = 2 Jz
    g = build_finite("rectangle", width=1, height=1)
    cm = assemble(g, CouplingParams(Jx=0.0, Jy=0.0, Jz=1.0))
    e = cm.energies()
    nonzero = e[np.abs(e) > 1e-12]
    assert np.allclose(sorted(nonzero), [-2.0, 2.0], atol=1e-12)


def test_antisymmetry_exact():
    for g in (build_strip("zigzag", rows=6, length=4),
              build_strip("armchair", rows=6, length=3),
              build_finite("hexagon", side=3)):
        cm = assemble(g, CouplingParams(kappa=KAPPA, h_b=0.05))
        a = cm.dense()
        assert np.abs(a + a.T).max() == 0.0


def test_spectrum_particle_hole_pairing():
    g = build_finite("hexagon", side=3)
    cm = assemble(g, CouplingParams(kappa=KAPPA, h_b=0.1))
    e = cm.energies()
    assert np.abs(e + e[::-1]).max() < 1e-10


def test_flux_free_link_flip_preserves_spectrum():
    # a link bounding no plaquette carries no flux; flipping it is pure gauge
    g = build_strip("zigzag", rows=2, length=5, periodicity="open")
    assert len(g.plaquettes) == 0
    p = CouplingParams(kappa=KAPPA)
    e0 = assemble(g, p).energies()
    gauge = GaugeConfig.default(g)
    gauge.u[3] = -1
    e1 = assemble(g, p, gauge).energies()
    assert np.abs(np.sort(e0) - np.sort(e1)).max() < 1e-12


def test_gauge_transformation_invariance():
    # flipping all links incident to a set of sites is a gauge transformation
    # (conjugation by mode sign flips): same fluxes, same spectrum
    rng = np.random.default_rng(5)
    g = build_finite("hexagon", side=3)
    p = CouplingParams(kappa=KAPPA, h_b=0.07)
    gauge = GaugeConfig.default(g)
    flipped_sites = rng.choice(g.n_sites, size=11, replace=False)
    for li, ln in enumerate(g.links):
        n_flipped = (ln.site_a in flipped_sites) + (ln.site_b in flipped_sites)
        if n_flipped == 1:
            gauge.u[li] = -1
    assert flux_pattern(gauge, g).n_fluxes == 0
    e0 = assemble(g, p).energies()
    e1 = assemble(g, p, gauge).energies()
    assert np.abs(np.sort(e0) - np.sort(e1)).max() < 1e-12


def test_bulk_gap_isotropic():
    g = build_torus(12, 12)
    cm = assemble(g, CouplingParams(kappa=KAPPA))
    e = cm.excitations()
    gap = e[e > 1e-9][0]
    assert gap == pytest.approx(6 * np.sqrt(3) * KAPPA, rel=1e-10)


def test_bulk_gap_anisotropic():
    kxyz = (0.02, 0.03, 0.04)
    g = build_torus(12, 12)
    cm = assemble(g, CouplingParams(kappa_xyz=kxyz))
    e = cm.excitations()
    gap = e[e > 1e-9][0]
    assert gap == pytest.approx(2 * np.sqrt(3) * sum(kxyz), rel=1e-3)


def test_time_reversal_at_zero_kappa_field():
    from kitaevedge.spectra import strip_band_structure
    g = build_strip("zigzag", rows=12, length=1)
    bs = strip_band_structure(g, CouplingParams(), qx_grid=np.array([0.7, -0.7]))
    assert np.abs(np.sort(bs.bands[0]) - np.sort(bs.bands[1])).max() < 1e-10


def test_field_needs_free_flavor():
    g = build_strip("zigzag", rows=6, length=3)
    interior = [i for i in range(g.n_sites) if i not in g.boundary_sites][0]
    p = CouplingParams(h_site={interior: (0.0, 0.0, 0.1)})
    with pytest.raises(AssemblyError):
        assemble(g, p)
    # and an x-component on a z-free boundary site is equally invalid
    zsite = [s for s, fl in g.free_b_modes if fl == "z"][0]
    with pytest.raises(AssemblyError):
        assemble(g, CouplingParams(h_site={zsite: (0.1, 0.0, 0.0)}))


def test_boundary_field_enters_matrix():
    g = build_strip("zigzag", rows=4, length=2)
    cm = assemble(g, CouplingParams(h_b=0.1))
    site, fl = g.free_b_modes[0]
    val = cm.matrix[cm.basis.c(site), cm.basis.b(site, fl)]
    assert val == pytest.approx(0.2)


def test_flux_pattern_default_gauge(hexagon8):
    gauge = GaugeConfig.default(hexagon8)
    fp = flux_pattern(gauge, hexagon8)
    assert (fp.values == 1).all()


def test_single_link_flip_flips_two_plaquettes(hexagon8):
    g = hexagon8
    gauge = GaugeConfig.default(g)
    # pick a link shared by two plaquettes
    counts = {}
    for pi, p in enumerate(g.plaquettes):
        for li in p:
            counts.setdefault(li, []).append(pi)
    li, touching = next((k, v) for k, v in counts.items() if len(v) == 2)
    gauge.u[li] = -1
    fp = flux_pattern(gauge, g)
    assert sorted(fp.flipped()) == sorted(touching)


def test_z_string_flip_leaves_endpoint_fluxes():
    # flipping a run of z-links along the edge direction telescopes: interior
    # plaquettes flip twice, only the two string endpoints keep flux.
    # oracle: direct per-plaquette product over the flipped link set
    g = build_finite("rectangle", width=8, height=6)
    gauge = GaugeConfig.default(g)
    flipped = 0
    for li, ln in enumerate(g.links):
        s = g.sites[ln.site_a]
        if ln.kind == "z" and s.cell_y == 3 and 2 <= s.cell_x <= 5:
            gauge.u[li] = -1
            flipped += 1
    assert flipped == 4
    fp = flux_pattern(gauge, g)
    direct = np.array([np.prod(gauge.u[list(p)]) for p in g.plaquettes])
    assert (fp.values == direct).all()
    assert fp.n_fluxes == 2


def test_insert_flux_pair_adjacent(hexagon8):
    g = hexagon8
    gauge = GaugeConfig.default(g)
    counts = {}
    for pi, p in enumerate(g.plaquettes):
        for li in p:
            counts.setdefault(li, []).append(pi)
    pa, pb = next(v for v in counts.values() if len(v) == 2)
    g2 = insert_flux_pair(gauge, g, pa, pb)
    assert int(np.sum(g2.u != gauge.u)) == 1
    assert sorted(flux_pattern(g2, g).flipped()) == sorted([pa, pb])


def test_insert_flux_pair_far_apart(hexagon8):
    g = hexagon8
    gauge = GaugeConfig.default(g)
    g2 = insert_flux_pair(gauge, g, 0, len(g.plaquettes) - 1)
    assert flux_pattern(g2, g).flipped() == [0, len(g.plaquettes) - 1]


def test_insert_flux_pair_same_plaquette_rejected(hexagon8):
    gauge = GaugeConfig.default(hexagon8)
    with pytest.raises(AssemblyError):
        insert_flux_pair(gauge, hexagon8, 3, 3)


def test_matrix_csv_export(tmp_path):
    g = build_finite("hexagon", side=1)
    cm = assemble(g, CouplingParams(kappa=KAPPA))
    path = tmp_path / "matrix.csv"
    cm.export_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "row,col,value"
    assert len(lines) == cm.matrix.nnz + 1
