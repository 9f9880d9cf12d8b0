from fractions import Fraction

import pytest

from mirroralg.geometry import (AffineManifold, Fan, GeometryError, PLFunction,
                                RationalCone, bend, build_affine_structure_dim2,
                                identity_matrix, locate, mat_mul, mat_vec,
                                monodromy, p2_manifold, parallel_transport,
                                plane_manifold, primitive, toric_manifold)

P2 = p2_manifold()


def test_primitive():
    assert primitive((2, -4)) == (1, -2)
    assert primitive((0, 5)) == (0, 1)
    with pytest.raises(GeometryError):
        primitive((0, 0))


def test_cone_membership():
    cone = RationalCone(((1, 0), (0, 1)))
    assert cone.contains((Fraction(2), Fraction(1)))
    assert cone.contains_interior((2, 1))
    assert cone.contains((3, 0)) and not cone.contains_interior((3, 0))
    assert not cone.contains((-1, 2))
    with pytest.raises(GeometryError):
        RationalCone(((1, 0), (2, 0)))  # dependent generators
    with pytest.raises(GeometryError):
        RationalCone(((2, 0),))  # not primitive


def test_build_toric_p2():
    am = build_affine_structure_dim2((1, 1, 1))
    assert am.fan.rays == ((1, 0), (0, 1), (-1, -1))
    assert am.is_smooth()
    assert monodromy(am) == identity_matrix(2)
    # chart relation v_{i-1} + v_{i+1} = -d_i v_i holds globally
    rays = am.fan.rays
    for i in range(3):
        s = tuple(rays[(i - 1) % 3][j] + rays[(i + 1) % 3][j] for j in range(2))
        assert s == tuple(-1 * rays[i][j] for j in range(2))


def test_build_cusp_monodromy():
    am = build_affine_structure_dim2((-1, -1, -1))
    assert not am.is_smooth()
    m = monodromy(am)
    assert m == ((-1, 0), (0, -1))
    assert m != identity_matrix(2)


def test_build_rejects_short_sequences():
    with pytest.raises(GeometryError):
        build_affine_structure_dim2((1, 1))
    with pytest.raises(GeometryError):
        build_affine_structure_dim2((0,))


def test_more_toric_sequences_close_up():
    # P1 x P1 and the Hirzebruch-like cycle both develop to honest fans
    am = build_affine_structure_dim2((0, 0, 0, 0))
    assert am.is_smooth()
    assert am.fan.rays == ((1, 0), (0, 1), (-1, 0), (0, -1))
    am4 = build_affine_structure_dim2((-1, -1, -1, -1))
    assert not am4.is_smooth()
    assert monodromy(am4) == ((-1, -1), (1, 0))


def test_parallel_transport_trivial_loop():
    am = P2
    path = [(1, 1), (1, -1)]  # across a wall and back
    assert parallel_transport(am, path, (3, 5)) == (3, 5)
    for ray in range(3):
        assert parallel_transport(am, [(ray, 1)], (2, -1)) == (2, -1)


def test_parallel_transport_monodromy_action():
    am = build_affine_structure_dim2((-1, -1, -1))
    loop = [(1, 1), (2, 1), (0, 1)]  # full ccw loop from cone 0
    assert parallel_transport(am, loop, (1, 0)) == (-1, 0)
    assert parallel_transport(am, loop, (1, 0)) != (1, 0)
    # concatenation = composition
    half = [(1, 1)]
    rest = [(2, 1), (0, 1)]
    v = (2, 3)
    assert parallel_transport(am, loop, v) == \
        parallel_transport(am, rest, parallel_transport(am, half, v))
    # reverse path undoes
    rev = [(0, -1), (2, -1), (1, -1)]
    assert parallel_transport(am, loop + rev, v) == v


def test_transitions_fix_walls_and_invert():
    for seq in [(1, 1, 1), (-1, -1, -1), (0, 0, 0, 0)]:
        am = build_affine_structure_dim2(seq)
        for ray, t in am.transitions.items():
            inv = am.transition(ray, -1)
            assert mat_mul(t, inv) == identity_matrix(2)
            if am.is_smooth():
                assert mat_vec(t, am.fan.rays[ray]) == am.fan.rays[ray]


def test_bend_examples():
    am = build_affine_structure_dim2((1, 1, 1))
    f = PLFunction((1, 0, 0))
    assert bend(am, f, 0) == 1      # a_3 + d_1 a_1 + a_2 = 0 + 1 + 0
    assert bend(am, f, 1) == 1      # a_1 = 1
    assert bend(am, f, 2) == 1
    zero = PLFunction((0, 0, 0))
    assert all(bend(am, zero, i) == 0 for i in range(3))


def test_bend_zero_iff_globally_linear_toric():
    # restriction of the functional (1, 2): values on the rays
    am = build_affine_structure_dim2((1, 1, 1))
    rays = am.fan.rays
    f = PLFunction(tuple(1 * r[0] + 2 * r[1] for r in rays))
    assert all(bend(am, f, i) == 0 for i in range(3))
    g = PLFunction((1, 0, 0))
    assert any(bend(am, g, i) != 0 for i in range(3))


def test_locate_examples():
    fan = P2.fan
    loc = fan.locate((2, 1))
    assert loc.face == (0, 1) and loc.generic
    loc = fan.locate((1, 0))
    assert loc.face == (0,) and not loc.generic
    loc = fan.locate((0, 0))
    assert loc.face == () and not loc.generic
    incomplete = Fan(rank=2, rays=((1, 0), (0, 1)), maximal_cones=((0, 1),),
                     complete=False)
    with pytest.raises(GeometryError):
        incomplete.locate((-1, 0))


def test_pl_function_values():
    fan = P2.fan
    f = PLFunction((1, 1, 1))
    assert f.value(fan, (1, 0)) == 1
    assert f.value(fan, (1, 1)) == 2
    assert f.value(fan, (-1, -1)) == 1
    assert f.value(fan, (-2, -1)) == 3   # = 1*(0,1) + 2*(-1,-1)
    assert f.value(fan, (0, 0)) == 0


def test_fan_validation():
    with pytest.raises(GeometryError):
        Fan(rank=2, rays=((1, 0), (1, 0)), maximal_cones=((0, 1),))
    with pytest.raises(GeometryError):
        Fan(rank=2, rays=((1, 0), (0, 1)), maximal_cones=((0, 5),))
    with pytest.raises(GeometryError):
        Fan(rank=2, rays=((1, 0), (2, 1)), maximal_cones=((0, 0),))


def test_integer_points():
    pts = P2.fan.integer_points(1)
    assert (0, 0) in pts and (1, 0) in pts and (-1, -1) in pts
    assert len(pts) == 9  # complete fan: the whole 3x3 box
