import numpy as np
import pytest

from kitaevedge import (LatticeError, SiteCoord, attach_external_spin,
                        build_finite, build_strip, build_torus)


def test_zigzag_strip_counts():
    g = build_strip("zigzag", rows=4, length=6)
    assert g.n_sites == 24
    z = g.coordination()
    # interior sites have exactly three links, one of each kind
    interior = [i for i in range(g.n_sites) if i not in g.boundary_sites]
    assert all(z[i] == 3 for i in interior)
    for i in interior:
        kinds = sorted(k for _, k in g.neighbors(i))
        assert kinds == ["x", "y", "z"]


def test_zigzag_thin_strip_boundary_links():
    g = build_strip("zigzag", rows=2, length=3)
    z = g.coordination()
    for i in range(g.n_sites):
        assert z[i] == 2
        kinds = [k for _, k in g.neighbors(i)]
        assert len(set(kinds)) == 2


def test_zigzag_free_modes_are_bz_only():
    g = build_strip("zigzag", rows=6, length=4)
    assert {fl for _, fl in g.free_b_modes} == {"z"}
    # one free b_z per boundary site, top and bottom rows only
    rows = {g.paper_row(s) for s, _ in g.free_b_modes}
    assert rows == {1, g.rows}


def test_armchair_free_modes_are_bx_by():
    g = build_strip("armchair", rows=6, length=4)
    assert g.n_sites == 48
    assert {fl for _, fl in g.free_b_modes} == {"x", "y"}


def test_armchair_triples_match_bruteforce_neighbor_scan():
    g = build_strip("armchair", rows=6, length=4)
    # oracle: NNN pairs = same-sublattice pairs sharing exactly one neighbor
    adj = {i: set() for i in range(g.n_sites)}
    for ln in g.links:
        adj[ln.site_a].add(ln.site_b)
        adj[ln.site_b].add(ln.site_a)
    expected = set()
    for j in range(g.n_sites):
        for l in range(j + 1, g.n_sites):
            common = adj[j] & adj[l]
            for k in common:
                expected.add((j, k, l))
    got = {tuple(sorted((t.outer_j, t.outer_l)) + [t.center_k])
           for t in g.triples}
    got = {(a, k, b) for a, b, k in got}
    assert got == expected
    # interior sites each center three triples
    interior = [i for i in range(g.n_sites) if i not in g.boundary_sites]
    per_center = {}
    for t in g.triples:
        per_center[t.center_k] = per_center.get(t.center_k, 0) + 1
    assert all(per_center[i] == 3 for i in interior)


def test_triple_centers_link_both_outers():
    g = build_strip("zigzag", rows=6, length=5)
    linked = {frozenset((ln.site_a, ln.site_b)) for ln in g.links}
    for t in g.triples:
        assert frozenset((t.outer_j, t.center_k)) in linked
        assert frozenset((t.center_k, t.outer_l)) in linked
        assert t.kind in "xyz"
        assert t.chirality_sign in (-1, 1)


def test_hexagon_side1_hand_count():
    g = build_finite("hexagon", side=1)
    assert g.n_sites == 6
    assert len(g.links) == 6
    assert len(g.triples) == 6
    assert len(g.plaquettes) == 1


@pytest.mark.parametrize("side,sites", [(2, 24), (3, 54), (20, 2400)])
def test_hexagon_site_counts(side, sites):
    g = build_finite("hexagon", side=side)
    assert g.n_sites == sites


def test_rectangle_coordination_bound():
    g = build_finite("rectangle", width=1, height=1)
    assert (g.coordination() <= 3).all()


def test_degenerate_sizes_rejected():
    with pytest.raises(LatticeError):
        build_strip("zigzag", rows=1, length=3)
    with pytest.raises(LatticeError):
        build_strip("zigzag", rows=4, length=0)
    with pytest.raises(LatticeError):
        build_strip("bearded", rows=4, length=4)
    with pytest.raises(LatticeError):
        build_finite("hexagon", side=0)
    with pytest.raises(LatticeError):
        build_finite("rectangle", width=0, height=2)


def test_deterministic_rebuild():
    a = build_strip("zigzag", rows=6, length=4)
    b = build_strip("zigzag", rows=6, length=4)
    assert a.sites == b.sites
    assert a.links == b.links
    assert a.triples == b.triples


def test_translation_symmetry_of_periodic_strip():
    g = build_strip("zigzag", rows=6, length=5)
    shift = {i: g.site_index(SiteCoord((s.cell_x + 1) % g.edge_cells,
                                       s.cell_y, s.sublattice))
             for i, s in enumerate(g.sites)}
    links = {(ln.site_a, ln.site_b, ln.kind) for ln in g.links}
    for ln in g.links:
        assert (shift[ln.site_a], shift[ln.site_b], ln.kind) in links

    def canon(j, k, l, sign, kind):
        # (j, k, l, sign) and (l, k, j, -sign) are the same coupling
        return (j, k, l, sign, kind) if j < l else (l, k, j, -sign, kind)

    triples = {canon(t.outer_j, t.center_k, t.outer_l, t.chirality_sign, t.kind)
               for t in g.triples}
    for t in g.triples:
        assert canon(shift[t.outer_j], shift[t.center_k], shift[t.outer_l],
                     t.chirality_sign, t.kind) in triples


def test_attach_external_spin_bookkeeping():
    g = build_strip("zigzag", rows=4, length=4)
    site = [s for s, fl in g.free_b_modes if fl == "z"][0]
    g2 = attach_external_spin(g, site)
    assert (site, "z") not in g2.free_b_modes
    assert len(g2.external_spins) == 1
    # a second attachment on a distinct site works
    other = [s for s, fl in g2.free_b_modes if fl == "z"][0]
    g3 = attach_external_spin(g2, other)
    assert len(g3.external_spins) == 2
    # same site twice: the b_z is consumed
    with pytest.raises(LatticeError):
        attach_external_spin(g3, site)


def test_attach_interior_site_rejected():
    g = build_strip("zigzag", rows=8, length=4)
    interior = [i for i in range(g.n_sites) if i not in g.boundary_sites][0]
    with pytest.raises(LatticeError):
        attach_external_spin(g, interior)


def test_perimeter_order_is_cyclic(hexagon8):
    per = hexagon8.boundary_perimeter()
    assert sorted(per) == sorted(hexagon8.boundary_sites)
    # consecutive perimeter sites are close in space
    pos = hexagon8.positions
    for a, b in zip(per, per[1:] + per[:1]):
        assert np.linalg.norm(pos[a] - pos[b]) < 2.5


def test_torus_has_no_boundary():
    g = build_torus(6, 6)
    assert g.boundary_sites == []
    assert g.free_b_modes == []
    assert (g.coordination() == 3).all()


def test_adjacency_csv_export(tmp_path):
    g = build_strip("zigzag", rows=4, length=2)
    path = tmp_path / "adj.csv"
    g.export_adjacency_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "site_a,site_b,kind"
    assert len(lines) == len(g.links) + 1
