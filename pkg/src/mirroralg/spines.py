"""Tropical trees in the skeleton: balancing, wall spines, surgery, cycles.

A spine is a metric tree mapped piecewise linearly into an affine
manifold: finite vertices carry exact rational positions, edges carry
integer derivative vectors (opposite orientations negate), and marked
legs are split into F (interior marked), B (boundary, infinite length,
carrying a weight instead of an endpoint position), and I (infinite
interior) classes.  The bend NB at a vertex is the sum of outgoing
derivatives; wall spines may bend only on prescribed (cone, vector)
pairs, and transverse spines meet walls only in 2-valent edge-interior
points away from the singular locus.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .geometry import (AffineManifold, Fan, GeometryError, RationalCone, Vec,
                       det2, dot, primitive, rot90, vec_add, vec_scale, vec_sub)

Point = tuple[Fraction, ...]


class SpineError(ValueError):
    pass


@dataclass(frozen=True)
class MetricTree:
    """Finite tree with positive rational edge lengths; legs to B-marked
    vertices have infinite length (stored as None)."""

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, Fraction | None], ...]
    markers: dict[int, str] = field(default_factory=dict)  # 'F' | 'B' | 'I'

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        edges = tuple((u, v, None if length is None else Fraction(length))
                      for (u, v, length) in self.edges)
        object.__setattr__(self, "edges", edges)
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise SpineError("duplicate vertex ids")
        for u, v, length in edges:
            if u not in vs or v not in vs:
                raise SpineError(f"edge ({u},{v}) references unknown vertices")
            if length is not None and length <= 0:
                raise SpineError("edge lengths must be positive")
        if len(edges) != len(self.vertices) - 1:
            raise SpineError("a tree needs exactly |V|-1 edges")
        if self.vertices and not self._connected():
            raise SpineError("tree is not connected")
        for v, mark in self.markers.items():
            if mark not in ("F", "B", "I"):
                raise SpineError(f"unknown marker {mark!r}")
            if self.valence(v) != 1:
                raise SpineError(f"marked vertex {v} is not 1-valent")
        for u, v, length in edges:
            b_end = (self.markers.get(u) == "B") or (self.markers.get(v) == "B")
            if (length is None) != b_end:
                raise SpineError("infinite lengths occur exactly on B-legs")

    def _connected(self) -> bool:
        adj = self.adjacency()
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.vertices}
        for u, v, _l in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def valence(self, v: int) -> int:
        return sum(1 for u, w, _l in self.edges if v in (u, w))

    def edge_between(self, u, v):
        for edge in self.edges:
            if {edge[0], edge[1]} == {u, v}:
                return edge
        return None


@dataclass(frozen=True)
class WallSet:
    """Finite set of (codimension-one cone, permitted bend vector) pairs;
    each vector is tangent to its cone's span."""

    walls: tuple[tuple[RationalCone, Vec], ...]

    def __post_init__(self):
        walls = tuple((cone, tuple(v)) for cone, v in self.walls)
        object.__setattr__(self, "walls", walls)
        for cone, v in walls:
            if not any(v):
                raise SpineError("wall vectors must be nonzero")
            if cone.dim == 1 and det2(cone.generators[0], v) != 0:
                raise SpineError(f"vector {v} is not tangent to its wall")

    def __iter__(self):
        return iter(self.walls)

    def __len__(self):
        return len(self.walls)

    def permits(self, point, bend: Vec) -> bool:
        return any(cone.contains(point) and tuple(bend) == v for cone, v in self.walls)

    def supports(self, point) -> bool:
        return any(cone.contains(point) for cone, _v in self.walls)


@dataclass(frozen=True)
class Spine:
    """Metric tree with positions, edge derivatives, and B-leg weights.

    ``derivatives[(u, v)]`` is the integer velocity from u towards v; the
    reverse orientation is its negative.  B-marked vertices carry no
    position; their legs run off to the boundary with the stated weight.
    """

    tree: MetricTree
    positions: dict[int, Point]
    derivatives: dict[tuple[int, int], Vec]
    b_weights: dict[int, Vec] = field(default_factory=dict)
    ambient: AffineManifold | None = None

    def __post_init__(self):
        positions = {v: tuple(Fraction(x) for x in p) for v, p in self.positions.items()}
        object.__setattr__(self, "positions", positions)
        derivs = {}
        for (u, v), w in self.derivatives.items():
            derivs[(u, v)] = tuple(w)
            derivs[(v, u)] = vec_scale(-1, tuple(w))
        object.__setattr__(self, "derivatives", derivs)
        for u, v, length in self.tree.edges:
            if (u, v) not in derivs:
                raise SpineError(f"edge ({u},{v}) has no derivative")
            if length is not None:
                pu, pv = positions.get(u), positions.get(v)
                if pu is None or pv is None:
                    raise SpineError(f"finite vertices of ({u},{v}) need positions")
                expected = vec_add(pu, vec_scale(length, derivs[(u, v)]))
                if tuple(expected) != pv:
                    raise SpineError(
                        f"edge ({u},{v}): position/derivative/length mismatch")
        for b, weight in self.b_weights.items():
            if self.tree.markers.get(b) != "B":
                raise SpineError(f"{b} carries a boundary weight but no B marker")
            (u,) = [x for x in self.tree.adjacency()[b]]
            if derivs[(u, b)] != tuple(weight):
                raise SpineError(f"B-leg at {b}: outward derivative != weight")

    def finite_vertices(self):
        return [v for v in self.tree.vertices if self.tree.markers.get(v) != "B"]

    def segments(self):
        """(start, end-or-None, derivative) per edge; B-legs have no end."""
        out = []
        for u, v, length in self.tree.edges:
            if length is None:
                finite, infinite = (u, v) if self.tree.markers.get(v) == "B" else (v, u)
                out.append((self.positions[finite], None,
                            self.derivatives[(finite, infinite)]))
            else:
                out.append((self.positions[u], self.positions[v],
                            self.derivatives[(u, v)]))
        return out


def nb_vertex(spine: Spine, v: int) -> Vec:
    """Sum of outgoing edge derivatives at a vertex, in its chart."""
    if spine.ambient is not None and not spine.ambient.is_smooth():
        pos = spine.positions.get(v)
        if pos is not None and not any(pos):
            raise SpineError("vertex sits on the singular locus")
    total = None
    for u in spine.tree.adjacency()[v]:
        w = spine.derivatives[(v, u)]
        total = w if total is None else vec_add(total, w)
    if total is None:
        raise SpineError(f"vertex {v} has no incident edges")
    return tuple(total)


def is_balanced(spine: Spine, x) -> bool:
    """True iff the bend vanishes at x (a vertex id, or an edge-interior
    point given as (u, v) which is automatically balanced)."""
    if isinstance(x, tuple):
        return True
    if spine.tree.markers.get(x) == "B":
        raise SpineError("balance is not defined at boundary markers")
    return not any(nb_vertex(spine, x))


def is_wall_spine(spine: Spine, walls: WallSet) -> bool:
    """Every non-B point bends by zero or by a permitted (cone, vector)
    pair at its position, and each B-leg derivative equals its weight."""
    for v in spine.finite_vertices():
        bend = nb_vertex(spine, v)
        if not any(bend):
            continue
        if not walls.permits(spine.positions[v], bend):
            return False
    for b, weight in spine.b_weights.items():
        (u,) = spine.tree.adjacency()[b]
        if spine.derivatives[(u, b)] != tuple(weight):
            return False
    return True


def _segment_ray_meet(p, q, ray: RationalCone):
    """Intersection of the segment [p, q] with a 1-dim cone:
    None, ('point', x, t), or ('overlap',)."""
    g = ray.generators[0]
    u = vec_sub(q, p)
    den = det2(g, u)
    if den == 0:
        if det2(p, g) == 0:
            # collinear; overlap iff some point of the segment has tau >= 0
            tau_p = next(Fraction(p[i], g[i]) for i in range(2) if g[i])
            tau_q = next(Fraction(q[i], g[i]) for i in range(2) if g[i])
            if max(tau_p, tau_q) >= 0:
                return ("overlap",)
        return None
    t = Fraction(det2(g, p), den)  # p + t u on the ray span
    if not (0 <= t <= 1):
        return None
    x = vec_add(p, vec_scale(t, u))
    tau = next(Fraction(x[i], g[i]) for i in range(2) if g[i])
    if tau < 0:
        return None
    return ("point", x, t)


def _leg_ray_meet(p, direction, ray: RationalCone):
    g = ray.generators[0]
    den = det2(g, direction)
    if den == 0:
        if det2(p, g) == 0:
            return ("overlap",)
        return None
    t = Fraction(det2(g, p), den)
    if t <= 0:
        return None
    x = vec_add(p, vec_scale(t, tuple(direction)))
    tau = next(Fraction(x[i], g[i]) for i in range(2) if g[i])
    if tau < 0:
        return None
    return ("point", x, t)


def is_transverse(spine: Spine, walls: WallSet) -> bool:
    """Finite wall intersection away from wall boundaries, 2-valent
    vertices on walls, F markers off codimension-one fan cones, and image
    disjoint from the singular locus."""
    am = spine.ambient
    # (4) singular locus
    if am is not None and not am.is_smooth():
        for v, pos in spine.positions.items():
            if not any(pos):
                return False
        for p, q, deriv in spine.segments():
            end = q if q is not None else vec_add(p, deriv)
            u = vec_sub(end, p)
            if det2(p, u) == 0 and any(p) and any(u):
                # collinear with the origin: passes through it iff the
                # parameter of 0 = p + t u lies in the segment range
                t = next(-Fraction(p[i], u[i]) for i in range(2) if u[i])
                upper = Fraction(1) if q is not None else None
                if t >= 0 and (upper is None or t <= upper):
                    return False
    # (2) vertices on walls must be 2-valent
    for v in spine.finite_vertices():
        if walls.supports(spine.positions[v]) and spine.tree.valence(v) != 2:
            return False
    # (1) finite transversal intersection, off wall boundaries
    for cone, _v in walls:
        for p, q, deriv in spine.segments():
            meet = (_segment_ray_meet(p, q, cone) if q is not None
                    else _leg_ray_meet(p, deriv, cone))
            if meet is None:
                continue
            if meet[0] == "overlap":
                return False
            x = meet[1]
            if not any(x):  # boundary ((d-2)-stratum) of the wall cone
                return False
    # (3) F markers off codimension-one fan cones
    if am is not None:
        for v, mark in spine.tree.markers.items():
            if mark != "F":
                continue
            loc = am.fan.locate(spine.positions[v])
            if len(loc.face) <= 1:
                return False
    return True


def glue(s1: Spine, p1, s2: Spine, p2) -> Spine:
    """Glue at edge-interior points p_i = (u, v, t) with equal images; the
    junction is 4-valent and bends by the sum of the two local bends."""
    x1 = _edge_point(s1, p1)
    x2 = _edge_point(s2, p2)
    if x1 != x2:
        raise SpineError(f"glue points differ: {x1} != {x2}")
    t1, split1 = _split_edge(s1, p1, tag="a")
    t2, split2 = _split_edge(s2, p2, tag="b")
    return _merge_at(t1, split1, t2, split2)


def concat(s1: Spine, v1: int, s2: Spine, v2: int) -> Spine:
    """Concatenate at finite 1-valent vertices with equal images and
    opposite incident weights."""
    for s, v in ((s1, v1), (s2, v2)):
        if s.tree.markers.get(v) == "B" or s.tree.valence(v) != 1:
            raise SpineError(f"vertex {v} is not a finite 1-valent endpoint")
    if s1.positions[v1] != s2.positions[v2]:
        raise SpineError("concatenation points have different images")
    (u1,) = s1.tree.adjacency()[v1]
    (u2,) = s2.tree.adjacency()[v2]
    w1 = s1.derivatives[(v1, u1)]
    w2 = s2.derivatives[(v2, u2)]
    # incident weights point towards the junction; they must cancel
    if any(vec_add(vec_scale(-1, w1), vec_scale(-1, w2))):
        raise SpineError(f"incident weights do not cancel: {w1} vs {w2}")
    return _merge_at(s1, v1, s2, v2)


def _edge_point(spine: Spine, p):
    u, v, t = p
    t = Fraction(t)
    edge = spine.tree.edge_between(u, v)
    if edge is None or edge[2] is None:
        raise SpineError(f"no finite edge between {u} and {v}")
    if not (0 < t < edge[2]):
        raise SpineError("glue point must be edge-interior")
    return tuple(vec_add(spine.positions[u], vec_scale(t, spine.derivatives[(u, v)])))


def _split_edge(spine: Spine, p, tag: str):
    u, v, t = p
    t = Fraction(t)
    edge = spine.tree.edge_between(u, v)
    length = edge[2]
    mid = ("mid", tag)
    x = _edge_point(spine, p)
    vertices = tuple(spine.tree.vertices) + (mid,)
    edges = tuple(e for e in spine.tree.edges if {e[0], e[1]} != {u, v})
    edges += ((u, mid, t), (mid, v, length - t))
    tree = MetricTree(vertices=vertices, edges=edges, markers=dict(spine.tree.markers))
    positions = dict(spine.positions)
    positions[mid] = x
    derivatives = {(a, b): w for (a, b), w in spine.derivatives.items()
                   if {a, b} != {u, v}}
    derivatives[(u, mid)] = spine.derivatives[(u, v)]
    derivatives[(mid, v)] = spine.derivatives[(u, v)]
    return Spine(tree=tree, positions=positions, derivatives=derivatives,
                 b_weights=dict(spine.b_weights), ambient=spine.ambient), mid


def _merge_at(s1: Spine, j1, s2: Spine, j2) -> Spine:
    relabel1 = {v: (0, v) for v in s1.tree.vertices}
    relabel2 = {v: (1, v) for v in s2.tree.vertices}
    relabel2[j2] = relabel1[j1]
    vertices = tuple(relabel1.values()) + tuple(relabel2[v] for v in s2.tree.vertices
                                                if v != j2)
    edges = tuple((relabel1[u], relabel1[v], l) for u, v, l in s1.tree.edges)
    edges += tuple((relabel2[u], relabel2[v], l) for u, v, l in s2.tree.edges)
    markers = {relabel1[v]: m for v, m in s1.tree.markers.items()}
    markers.update({relabel2[v]: m for v, m in s2.tree.markers.items()})
    markers.pop(relabel1[j1], None)
    tree = MetricTree(vertices=vertices, edges=edges, markers=markers)
    positions = {relabel1[v]: p for v, p in s1.positions.items()}
    positions.update({relabel2[v]: p for v, p in s2.positions.items()})
    derivatives = {(relabel1[u], relabel1[v]): w
                   for (u, v), w in s1.derivatives.items()}
    derivatives.update({(relabel2[u], relabel2[v]): w
                        for (u, v), w in s2.derivatives.items()})
    b_weights = {relabel1[v]: w for v, w in s1.b_weights.items()}
    b_weights.update({relabel2[v]: w for v, w in s2.b_weights.items()})
    return Spine(tree=tree, positions=positions, derivatives=derivatives,
                 b_weights=b_weights, ambient=s1.ambient or s2.ambient)


def _glue_pair(pair1, pair2):
    return _merge_at(pair1[0], pair1[1], pair2[0], pair2[1])


def z_cycle(spine: Spine, fan: Fan) -> dict[int, int]:
    """Boundary 1-cycle: for each transversal crossing of a ray of the fan,
    add |<conormal, derivative>| on that ray's symbol."""
    cycle: dict[int, int] = {}
    rays = [RationalCone((fan.rays[i],)) for i in range(len(fan.rays))]
    for v, pos in spine.positions.items():
        for i, ray in enumerate(rays):
            if ray.contains(pos):
                raise SpineError(f"vertex {v} sits on ray {i}; not transverse")
    for p, q, deriv in spine.segments():
        for i, ray in enumerate(rays):
            meet = (_segment_ray_meet(p, q, ray) if q is not None
                    else _leg_ray_meet(p, deriv, ray))
            if meet is None:
                continue
            if meet[0] == "overlap":
                raise SpineError(f"segment runs along ray {i}; not transverse")
            x = meet[1]
            if not any(x):
                raise SpineError("crossing at the origin; not transverse")
            conormal = rot90(fan.rays[i])
            coeff = abs(dot(conormal, deriv))
            if coeff == 0:
                raise SpineError(f"tangential crossing of ray {i}")
            cycle[i] = cycle.get(i, 0) + coeff
    return cycle


def solve_weights(tree: MetricTree, nb_data: dict[int, Vec]) -> dict[tuple[int, int], Vec]:
    """Unique derivative assignment matching the given bend vectors at all
    vertices except one 1-valent vertex, by leaf stripping."""
    free = [v for v in tree.vertices if v not in nb_data]
    if len(free) != 1 or tree.valence(free[0]) != 1:
        raise SpineError("exactly one 1-valent vertex may omit its bend")
    remaining_edges = {frozenset((u, v)) for u, v, _l in tree.edges}
    adj = tree.adjacency()
    nb = {v: tuple(w) for v, w in nb_data.items()}
    weights: dict[tuple[int, int], Vec] = {}
    degree = {v: tree.valence(v) for v in tree.vertices}
    leaves = [v for v in tree.vertices if degree[v] == 1 and v != free[0]]
    while leaves:
        v = leaves.pop()
        incident = [u for u in adj[v] if frozenset((u, v)) in remaining_edges]
        if not incident:
            continue
        (u,) = incident
        w = nb[v]
        weights[(v, u)] = w
        weights[(u, v)] = vec_scale(-1, w)
        remaining_edges.discard(frozenset((u, v)))
        degree[v] -= 1
        degree[u] -= 1
        if u != free[0]:
            nb[u] = vec_sub(nb[u], weights[(u, v)])
            if degree[u] == 1:
                leaves.append(u)
    if remaining_edges:
        raise SpineError("bend data does not determine all weights")
    for v in tree.vertices:
        if v == free[0] or degree[v] == 0:
            continue
        if any(nb[v]):
            raise SpineError(f"inconsistent bend data at vertex {v}")
    return weights


def generate_walls(am: AffineManifold, V, steps: int) -> WallSet:
    """Seed walls from the codimension-two locus and the given bend
    vectors, then close under pairwise intersections for ``steps`` rounds.

    Rank 2: the codimension-two locus is the origin, so seeds are rays
    R>=0 (+-v) clipped to the maximal cones containing them; further
    intersections only reproduce origin-apexed rays, so the set stabilizes
    after one round. Monotone in V and in steps.
    """
    if am.rank != 2:
        raise SpineError("wall generation is implemented for rank 2")
    fan = am.fan
    vectors = [tuple(v) for v in V]
    walls: set[tuple[Vec, Vec]] = set()

    def add_ray(direction: Vec, v: Vec):
        d = primitive(direction)
        if fan.embedded and not any(fan.cone(ci).contains(d)
                                    for ci in range(len(fan.maximal_cones))):
            return
        walls.add((d, v))

    # seeds: spans through the codimension-two locus (the origin)
    for v in vectors:
        add_ray(v, v)
        add_ray(vec_scale(-1, v), v)
    for _round in range(max(0, steps)):
        added = False
        for (d1, _v1), (d2, _v2) in itertools.combinations(sorted(walls), 2):
            if det2(d1, d2) == 0:
                continue
            # rays from the origin meet in the codimension-two locus only,
            # so the spawned walls are again origin-apexed spans
            for v in vectors:
                before = len(walls)
                add_ray(v, v)
                add_ray(vec_scale(-1, v), v)
                added = added or len(walls) != before
        if not added:
            break
    return WallSet(tuple((RationalCone((d,)), v) for d, v in sorted(walls)))
