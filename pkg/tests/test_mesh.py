import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reggecurv.mesh import Mesh, build_structured_cube_mesh, enumerate_bones


def test_level0_cube_counts():
    m = build_structured_cube_mesh(0, 3)
    assert m.n_elements == 6
    assert m.n_vertices == 8
    assert m.h == pytest.approx(2 * math.sqrt(3), rel=1e-14)
    assert int(m.interior_facet.sum()) == 6
    bones = enumerate_bones(m)
    assert len(bones) == 1
    assert len(bones[0].ring) == 6
    a, b = bones[0].vertices
    np.testing.assert_allclose(np.abs(m.vertices[a] - m.vertices[b]), 2.0)


def test_level0_square_has_no_bones():
    m = build_structured_cube_mesh(0, 2)
    assert m.n_elements == 2
    assert enumerate_bones(m) == []


@pytest.mark.parametrize("level", [0, 1, 2])
def test_element_counts_and_h(level):
    m3 = build_structured_cube_mesh(level, 3)
    assert m3.n_elements == 6 * 2 ** (3 * level)
    assert m3.h == pytest.approx(math.sqrt(3) * 2.0 ** (1 - level), rel=1e-12)
    m2 = build_structured_cube_mesh(level, 2)
    assert m2.n_elements == 2 * 4 ** level


def test_zero_perturbation_ignores_seed():
    a = build_structured_cube_mesh(2, 3, 0.0, seed=1)
    b = build_structured_cube_mesh(2, 3, 0.0, seed=99)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.elements, b.elements)


@settings(max_examples=12, deadline=None)
@given(level=st.integers(0, 3), seed=st.integers(0, 1000), dim=st.sampled_from([2, 3]))
def test_mesh_invariants(level, seed, dim):
    if dim == 3 and level == 3:
        level = 2
    a = 2.0 ** -3.5
    m = build_structured_cube_mesh(level, dim, a, seed)
    assert np.all(m.detj > 0)
    counts = np.bincount(m.elem_facets.ravel(), minlength=len(m.facets))
    assert np.all(counts[m.interior_facet] == 2)
    assert np.all(counts[~m.interior_facet] == 1)
    # boundary vertices stay on the boundary of the box, interior ones move at most a*h
    ref = build_structured_cube_mesh(level, dim)
    bv = ref.boundary_vertex
    np.testing.assert_array_equal(m.vertices[bv], ref.vertices[bv])
    assert np.abs(m.vertices - ref.vertices).max() <= a * ref.h + 1e-15
    # rings close and cover the incident elements
    for br in m.bones:
        els = [r[0] for r in br.ring]
        assert len(set(els)) == len(els)
        inc = [e for e in range(m.n_elements) if set(br.vertices) <= set(m.elements[e].tolist())]
        assert sorted(els) == sorted(inc)
        for cur, nxt in zip(br.ring, br.ring[1:] + br.ring[:1]):
            assert cur[2] == nxt[1]


def test_perturbation_is_deterministic():
    a = build_structured_cube_mesh(2, 3, 2.0 ** -3.5, seed=5)
    b = build_structured_cube_mesh(2, 3, 2.0 ** -3.5, seed=5)
    np.testing.assert_array_equal(a.vertices, b.vertices)


def test_degenerate_element_rejected():
    with pytest.raises(ValueError):
        Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), [[0, 1, 2]])


def test_mesh_file_round_trip(tmp_path):
    m = build_structured_cube_mesh(1, 3, 0.05, seed=2)
    p = tmp_path / "mesh.txt"
    m.write(p)
    r = Mesh.read(p)
    np.testing.assert_array_equal(r.vertices, m.vertices)
    np.testing.assert_array_equal(r.elements, m.elements)


def test_reference_map():
    m = build_structured_cube_mesh(1, 3, 0.1, seed=3)
    x0, J = m.reference_map(5)
    xi = np.array([[0.2, 0.3, 0.1]])
    np.testing.assert_allclose(m.to_physical(np.array([5]), xi)[0], x0 + J @ xi[0])
