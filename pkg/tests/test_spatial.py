import itertools

import numpy as np
import pytest

from pointkit import (RigidMotion, SpaceRegion, box, hull_from_points, load_ply,
                      polytope_from_halfspaces, rotation_about_axis)
from pointkit.spatial import DegenerateInputError, UnboundedPolytopeError, save_polytope_ply

CORNERS = np.array(list(itertools.product([0.0, 1.0], repeat=3)))


def unit_cube(shift=(0, 0, 0)):
    return box(np.zeros(3) + shift, np.ones(3) + shift)


def test_cube_hull():
    rng = np.random.default_rng(0)
    P = np.vstack([CORNERS, rng.uniform(0.1, 0.9, size=(50, 3))])
    h = hull_from_points(P)
    assert len(h.vertices) == 8 and len(h.facets) == 6
    assert h.volume() == pytest.approx(1.0, abs=1e-12)
    assert all(len(f) == 4 for f in h.facets)
    # every vertex is an input point
    assert all(np.any(np.all(P == v, axis=1)) for v in h.vertices)
    assert np.all(h.contains_points(P))


def test_hull_2d_and_degenerate():
    sq = np.array([[0, 0], [2, 0], [2, 1], [0, 1], [1, 0.5]], float)
    h = hull_from_points(sq)
    assert len(h.vertices) == 4 and h.volume() == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(DegenerateInputError, match="rank 2"):
        hull_from_points(np.column_stack([np.random.default_rng(1).uniform(size=(20, 2)),
                                          np.zeros(20)]))
    with pytest.raises(DegenerateInputError, match="rank 1"):
        hull_from_points(np.outer(np.arange(4.0), [1, 1]))


def test_halfspaces():
    c = unit_cube()
    assert len(c.vertices) == 8 and c.volume() == pytest.approx(1.0, abs=1e-12)
    assert c.contains([0.5, 0.5, 0.5]) and not c.contains([1.5, 0.5, 0.5])
    red = polytope_from_halfspaces(np.vstack([c.normals, [[1, 0, 0]]]),
                                   np.concatenate([c.offsets, [5.0]]))
    assert len(red.normals) == 6
    empty = polytope_from_halfspaces([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0],
                                      [0, 0, 1], [0, 0, -1]], [0, -1, 1, 0, 1, 0])
    assert empty.is_empty and empty.volume() == 0.0
    with pytest.raises(UnboundedPolytopeError):
        polytope_from_halfspaces([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [1, 1, 1])


def test_intersections():
    a = unit_cube()
    assert a.intersect(a).volume() == pytest.approx(1.0, abs=1e-12)
    half = a.intersect(unit_cube((0.5, 0, 0)))
    assert half.volume() == pytest.approx(0.5, abs=1e-12)
    assert a.intersect(unit_cube((3, 0, 0))).is_empty


def test_region_algebra():
    a, b = SpaceRegion([unit_cube()]), SpaceRegion([unit_cube((3, 0, 0))])
    assert (a | b).volume() == pytest.approx(2.0, abs=1e-12)
    comp = a.complement((np.full(3, -1.0), np.full(3, 2.0)))
    assert comp.volume() == pytest.approx(26.0, abs=1e-9)
    assert not comp.contains([0.5, 0.5, 0.5]) and comp.contains([1.5, 1.5, 1.5])
    with pytest.raises(ValueError):
        a.complement(None)
    assert (a - a).is_empty
    shifted = SpaceRegion([unit_cube((0.5, 0.5, 0))])
    assert (a - shifted).volume() == pytest.approx(0.75, abs=1e-9)
    overlap = a | shifted
    assert overlap.volume() == pytest.approx(1.75, abs=1e-9)


def test_probe_grid_oracle():
    a = SpaceRegion([unit_cube()])
    b = SpaceRegion([box([0.3, 0.2, -0.5], [1.4, 0.7, 0.6])])
    g = (np.arange(20) + 0.5) / 20 * 2.4 - 0.7
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    ina, inb = a.contains_points(X), b.contains_points(X)
    assert np.array_equal((a | b).contains_points(X), ina | inb)
    assert np.array_equal((a & b).contains_points(X), ina & inb)
    assert np.array_equal((a - b).contains_points(X, tol=-1e-9), ina & ~inb)
    probes = np.random.default_rng(2).uniform(-0.7, 1.7, size=(10_000, 3))
    inside = ~np.any(np.isclose(probes[:, :, None], [0, 1, 0.3, 0.2, 0.7, 0.6], atol=1e-6), axis=(1, 2))
    oracle = a.contains_points(probes) & ~b.contains_points(probes)
    assert np.array_equal((a - b).contains_points(probes)[inside], oracle[inside])
    assert (a - b).volume() == pytest.approx(1 - 0.7 * 0.5 * 0.6, abs=1e-9)


def test_transform_invariance():
    rng = np.random.default_rng(3)
    h = hull_from_points(rng.normal(size=(60, 3)))
    m = RigidMotion(rotation_about_axis([1, 2, -1], 0.7), [1.0, -2.0, 0.5])
    t = h.transform(m)
    assert t.volume() == pytest.approx(h.volume(), rel=1e-12)
    assert np.all(t.contains_points(m.apply(h.vertices)))
    r = SpaceRegion([h]).transform(m)
    assert r.volume() == pytest.approx(h.volume(), rel=1e-12)


def test_save_polytope_ply(tmp_path):
    save_polytope_ply(unit_cube(), tmp_path / "c.ply")
    text = (tmp_path / "c.ply").read_text()
    assert "element face 12" in text
    assert len(load_ply(tmp_path / "c.ply")) == 8
