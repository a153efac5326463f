"""Geometry, indexing, and neighbor-relation tests."""

import numpy as np
import pytest

from oamphoton.lattice import (
    Boundary,
    LatticeSpec,
    SiteIndex,
    column_of_index,
    flat_index,
    l_of_index,
    neighbors,
    site_of,
    spin_of_index,
)


def test_flat_index_first_site():
    spec = LatticeSpec(n_x=2, l_min=-1, l_max=1)
    assert flat_index(spec, SiteIndex(0, -1, 0)) == 0


def test_flat_index_last_site():
    spec = LatticeSpec(n_x=2, l_min=-1, l_max=1)
    assert flat_index(spec, SiteIndex(1, 1, 0)) == 5


def test_flat_index_spin_ordering():
    spec = LatticeSpec(n_x=2, l_min=0, l_max=1, spin_dim=2)
    assert flat_index(spec, SiteIndex(1, 0, 1)) == 5


def test_flat_index_bijection():
    spec = LatticeSpec(n_x=3, l_min=-2, l_max=2, spin_dim=2)
    seen = set()
    for j in range(spec.n_x):
        for l in range(spec.l_min, spec.l_max + 1):
            for s in range(spec.spin_dim):
                site = SiteIndex(j, l, s)
                idx = flat_index(spec, site)
                assert 0 <= idx < spec.dim
                assert site_of(spec, idx) == site
                seen.add(idx)
    assert len(seen) == spec.dim


def test_out_of_range_site_rejected():
    spec = LatticeSpec(n_x=2, l_min=-1, l_max=1)
    with pytest.raises(ValueError):
        flat_index(spec, SiteIndex(2, 0, 0))
    with pytest.raises(ValueError):
        flat_index(spec, SiteIndex(0, 2, 0))
    with pytest.raises(ValueError):
        flat_index(spec, SiteIndex(0, 0, 1))


def test_invalid_spec_rejected():
    with pytest.raises(ValueError):
        LatticeSpec(n_x=0)
    with pytest.raises(ValueError):
        LatticeSpec(n_x=1, l_min=1, l_max=0)
    with pytest.raises(ValueError):
        LatticeSpec(n_x=1, spin_dim=3)


def test_corner_site_open_bc_has_two_neighbors():
    spec = LatticeSpec(n_x=4, l_min=-2, l_max=2)
    assert len(neighbors(spec, SiteIndex(0, spec.l_min, 0))) == 2


def test_periodic_site_has_four_neighbors():
    spec = LatticeSpec(
        n_x=4, l_min=-2, l_max=2,
        bc_x=Boundary.PERIODIC, bc_y=Boundary.PERIODIC,
    )
    for site in (SiteIndex(0, -2, 0), SiteIndex(2, 0, 0), SiteIndex(3, 2, 0)):
        assert len(neighbors(spec, site)) == 4


def test_cylinder_top_site_wraps_in_y():
    spec = LatticeSpec(n_x=4, l_min=-2, l_max=2, bc_y=Boundary.PERIODIC)
    got = neighbors(spec, SiteIndex(0, spec.l_max, 0))
    assert len(got) == 3
    plus_y = dict(got)["+y"]
    assert plus_y == SiteIndex(0, spec.l_min, 0)


def test_neighbor_relation_symmetric():
    spec = LatticeSpec(
        n_x=3, l_min=0, l_max=3, spin_dim=1,
        bc_x=Boundary.OPEN, bc_y=Boundary.PERIODIC,
    )
    for j in range(spec.n_x):
        for l in range(spec.l_min, spec.l_max + 1):
            a = SiteIndex(j, l, 0)
            for _, b in neighbors(spec, a):
                assert a in [s for _, s in neighbors(spec, b)]


def test_index_component_vectors_match_site_of():
    spec = LatticeSpec(n_x=3, l_min=-1, l_max=2, spin_dim=2)
    cols = column_of_index(spec)
    ls = l_of_index(spec)
    ss = spin_of_index(spec)
    assert cols.shape == ls.shape == ss.shape == (spec.dim,)
    for idx in range(spec.dim):
        site = site_of(spec, idx)
        assert cols[idx] == site.j
        assert ls[idx] == site.l
        assert ss[idx] == site.s
