"""Level sets, cut-element classification, and cut/interface quadratures."""

import math

import numpy as np
import pytest

from cutsem import geometry
from cutsem.errors import NonBracketing
from cutsem.geometry import (
    build_cut_quadrature,
    build_interface_quadrature,
    circle,
    classify_element,
    find_interface_root,
    half_plane,
    union_of_voids,
)

UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))


def straight_cut_exact(frac, a, b):
    """Integral of xi^a eta^b over [-1, 2*frac-1] x [-1, 1]."""
    xc = 2.0 * frac - 1.0
    ix = (xc ** (a + 1) - (-1.0) ** (a + 1)) / (a + 1)
    iy = (1.0 - (-1.0) ** (b + 1)) / (b + 1)
    return ix * iy


def test_classify_element_half_plane():
    ls = half_plane(1.0, 0.0, 1.0)  # physical where x <= 1
    assert classify_element(ls, ((2.0, 3.0), (0.0, 1.0))) == "void"
    assert classify_element(ls, ((0.0, 0.5), (0.0, 1.0))) == "full"
    assert classify_element(ls, ((0.5, 1.5), (0.0, 1.0))) == "cut"


def test_find_interface_root_linear_and_circle():
    ls = half_plane(1.0, 0.0, 1.0)
    root = find_interface_root(ls, (0.0, 0.0), (2.0, 0.0))
    np.testing.assert_allclose(root, [1.0, 0.0], atol=1e-12)
    root = find_interface_root(ls, (0.3, 0.2), (1.1, 0.2))
    np.testing.assert_allclose(root, [1.0, 0.2], atol=1e-12)
    disk = circle(0.0, 0.0, 1.0)
    root = find_interface_root(disk, (0.0, 0.0), (2.0, 0.0))
    np.testing.assert_allclose(root, [1.0, 0.0], atol=1e-12)


def test_find_interface_root_requires_bracket():
    ls = half_plane(1.0, 0.0, 1.0)
    with pytest.raises(NonBracketing):
        find_interface_root(ls, (0.0, 0.0), (0.5, 0.0))


def test_full_element_quadrature():
    ls = geometry.LevelSet(lambda x, y: np.ones_like(np.asarray(x, dtype=float)))
    cutq = build_cut_quadrature(ls, UNIT_BOX, depth=2, gauss_degree=4)
    assert cutq.classification == "full"
    assert abs(cutq.weights.sum() - 4.0) < 1e-10
    assert abs(cutq.volume_ratio - 1.0) < 1e-10


def test_void_element_quadrature():
    ls = half_plane(1.0, 0.0, -1.0)  # physical only for x <= -1
    cutq = build_cut_quadrature(ls, UNIT_BOX, depth=2, gauss_degree=4)
    assert cutq.classification == "void"
    assert cutq.is_void
    assert len(cutq.points) == 0
    assert cutq.volume_ratio == 0.0


def test_half_cut_first_moment():
    cutq = build_cut_quadrature(half_plane(1.0, 0.0, 0.5), UNIT_BOX, depth=3, gauss_degree=4)
    assert cutq.classification == "cut"
    assert abs(cutq.weights.sum() - 2.0) < 1e-10
    got = float(np.dot(cutq.weights, cutq.points[:, 0]))
    assert abs(got - (-1.0)) < 1e-10
    assert abs(cutq.volume_ratio - 0.5) < 1e-10


@pytest.mark.parametrize("frac", [0.25, 0.5, 0.76])
def test_straight_cut_monomial_exactness(frac):
    degree = 8
    cutq = build_cut_quadrature(half_plane(1.0, 0.0, frac), UNIT_BOX, depth=4, gauss_degree=degree)
    assert np.all(cutq.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = float(np.dot(cutq.weights, cutq.points[:, 0] ** a * cutq.points[:, 1] ** b))
            assert abs(got - straight_cut_exact(frac, a, b)) <= 1e-10, (a, b)


def test_oblique_cut_volume():
    # physical below the diagonal x + y <= 1: half the unit element
    cutq = build_cut_quadrature(half_plane(1.0, 1.0, 1.0), UNIT_BOX, depth=4, gauss_degree=6)
    assert abs(cutq.volume_ratio - 0.5) < 1e-10
    assert np.all(cutq.weights > 0)


def test_quarter_circle_void_volume_ratio():
    ls = circle(0.0, 0.0, 0.5)
    exact = 1.0 - math.pi * 0.25 / 4.0
    cutq = build_cut_quadrature(ls, UNIT_BOX, depth=4, gauss_degree=6)
    assert abs(cutq.volume_ratio - exact) < 1e-4


def test_circle_refinement_convergence():
    ls = circle(0.0, 0.0, 0.5)
    exact = 1.0 - math.pi * 0.25 / 4.0
    errs = []
    for depth in range(1, 6):
        cutq = build_cut_quadrature(ls, UNIT_BOX, depth=depth, gauss_degree=6)
        assert np.all(cutq.weights > 0)
        errs.append(abs(cutq.volume_ratio - exact))
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:])), errs
    assert errs[-1] < 1e-5


def test_union_of_voids():
    ls = union_of_voids([circle(0.0, 0.0, 0.3), circle(1.0, 1.0, 0.3)])
    exact = 1.0 - 2.0 * math.pi * 0.09 / 4.0
    cutq = build_cut_quadrature(ls, UNIT_BOX, depth=4, gauss_degree=6)
    assert abs(cutq.volume_ratio - exact) < 1e-4


def test_sliver_reclassified_void():
    # the physical sliver is far below the volume-ratio floor
    ls = half_plane(-1.0, 0.0, -(1.0 - 1e-12))
    cutq = build_cut_quadrature(ls, UNIT_BOX, depth=3, gauss_degree=4)
    assert cutq.is_void


def test_vertical_interface_quadrature():
    iq = build_interface_quadrature(half_plane(1.0, 0.0, 0.5), UNIT_BOX, depth=3, gauss_degree=4)
    assert abs(iq.weights.sum() - 2.0) < 1e-9  # reference height of the cut line
    assert np.all(iq.weights > 0)
    np.testing.assert_allclose(iq.normals, np.broadcast_to([1.0, 0.0], iq.normals.shape), atol=1e-9)
    np.testing.assert_allclose(iq.points[:, 0], 0.0, atol=1e-10)


def test_interface_points_approach_zero_isoline():
    # quadrature points lie on straight sub-chords between exact roots, so
    # |phi| there is bounded by the chord sag and shrinks with refinement
    ls = circle(0.0, 0.0, 0.5)
    sags = []
    for depth in (2, 3, 4):
        iq = build_interface_quadrature(ls, UNIT_BOX, depth=depth, gauss_degree=4)
        px = (iq.points[:, 0] + 1.0) / 2.0
        py = (iq.points[:, 1] + 1.0) / 2.0
        sags.append(float(np.max(np.abs(ls(px, py)))))
    assert sags[2] < sags[1] < sags[0]
    assert sags[2] < 5e-5


def test_circle_arc_length():
    iq = build_interface_quadrature(circle(0.0, 0.0, 0.5), UNIT_BOX, depth=4, gauss_degree=4)
    physical = 0.5 * iq.weights.sum()  # uniform reference-to-physical scaling
    assert abs(physical - math.pi * 0.5 / 2.0) < 1e-3
    # normals point toward the void (the disk center)
    px = (iq.points[:, 0] + 1.0) / 2.0
    py = (iq.points[:, 1] + 1.0) / 2.0
    inward = -np.column_stack([px, py])
    inward /= np.linalg.norm(inward, axis=1, keepdims=True)
    dots = np.sum(iq.normals * inward, axis=1)
    assert np.all(dots > 0.99)


def test_leaf_aligned_cut_keeps_interface():
    # a cut lying exactly on quadtree leaf boundaries must still emit the line rule
    for depth in (1, 2, 3):
        iq = build_interface_quadrature(half_plane(1.0, 0.0, 0.5), UNIT_BOX, depth=depth, gauss_degree=4)
        assert abs(iq.weights.sum() - 2.0) < 1e-9, depth


def test_rectangular_box_scaling():
    # non-square element: weights stay in the reference frame
    box = ((0.0, 2.0), (0.0, 0.5))
    cutq = build_cut_quadrature(half_plane(1.0, 0.0, 1.0), box, depth=3, gauss_degree=4)
    assert abs(cutq.volume_ratio - 0.5) < 1e-10
    assert abs(cutq.weights.sum() - 2.0) < 1e-10
