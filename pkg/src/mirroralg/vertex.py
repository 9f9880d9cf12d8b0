"""Dual complexes and the Stanley-Reisner central fibre.

A ``DualComplex`` is a Delta-complex of pure dimension n: simplices per
dimension with ordered facet maps (dropping slot j of a d-simplex lands
in a prescribed (d-1)-simplex), so identifications of faces are allowed.
The pre-gluing cone complex has one closed simplicial cone per maximal
simplex; its integer points multiply by addition inside a common cone and
vanish otherwise.  The glued algebra has basis theta_P indexed by glued
integer points, with theta_P the sum over the preimage copies of P; the
product table is re-collected into this basis, reporting when a product
escapes its span.

Homology-type checks are exact over the rationals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .geometry import Fan, GeometryError, RationalCone, Vec, fraction_matrix_rank
from .series import TruncatedSeries


class ComplexError(ValueError):
    pass


@dataclass(frozen=True)
class DualComplex:
    """Pure n-dimensional Delta-complex with oriented maximal simplices.

    ``facets[d][i]`` lists, for the i-th d-simplex, the (d-1)-simplex
    index obtained by dropping each slot in order; dimension zero rows
    are empty tuples.  ``orientations`` carries one sign per maximal
    simplex.
    """

    facets: tuple[tuple[tuple[int, ...], ...], ...]
    orientations: tuple[int, ...]
    vertex_names: tuple = ()

    def __post_init__(self):
        facets = tuple(tuple(tuple(row) for row in level) for level in self.facets)
        object.__setattr__(self, "facets", facets)
        if not facets:
            raise ComplexError("empty complex")
        for d, level in enumerate(facets):
            for i, row in enumerate(level):
                if d == 0:
                    if row:
                        raise ComplexError("0-simplices have no facets")
                    continue
                if len(row) != d + 1:
                    raise ComplexError(f"{d}-simplex {i} needs {d + 1} facets")
                for j in row:
                    if not (0 <= j < len(facets[d - 1])):
                        raise ComplexError(f"facet index {j} out of range")
        if len(self.orientations) != len(facets[-1]):
            raise ComplexError("one orientation per maximal simplex required")
        if any(o not in (1, -1) for o in self.orientations):
            raise ComplexError("orientations must be +-1")

    @property
    def dimension(self) -> int:
        return len(self.facets) - 1

    def n_simplices(self, d: int) -> int:
        return len(self.facets[d])

    # -- embeddings of glued faces into maximal simplices ----------------

    def embeddings(self):
        """For each maximal simplex: all (d, simplex, slot_map) reachable
        by iterated facet maps; slot_map sends face slots to top slots."""
        n = self.dimension
        out = []
        for top in range(self.n_simplices(n)):
            found: set[tuple[int, int, tuple[int, ...]]] = set()
            stack = [(n, top, tuple(range(n + 1)))]
            while stack:
                d, idx, slot_map = stack.pop()
                key = (d, idx, slot_map)
                if key in found:
                    continue
                found.add(key)
                if d == 0:
                    continue
                for j in range(d + 1):
                    sub = self.facets[d][idx][j]
                    sub_map = tuple(slot_map[i] for i in range(d + 1) if i != j)
                    stack.append((d - 1, sub, sub_map))
            out.append(found)
        return out

    def vertex_of_slot(self, d: int, idx: int, slot: int) -> int:
        """Glued 0-simplex reached by dropping all slots except ``slot``."""
        while d > 0:
            if slot != d:
                idx = self.facets[d][idx][d]      # drop the last slot
            else:
                idx = self.facets[d][idx][0]      # drop slot 0, shift down
                slot -= 1
            d -= 1
        return idx

    def vertex_tuple(self, d: int, idx: int) -> tuple[int, ...]:
        return tuple(self.vertex_of_slot(d, idx, s) for s in range(d + 1))


@dataclass(frozen=True)
class ConePoint:
    """Integer point of the pre-gluing cone complex: a maximal simplex and
    one non-negative coordinate per slot."""

    simplex: int
    coords: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if any(c < 0 for c in self.coords):
            raise ComplexError("cone coordinates must be non-negative")


def canonical_point(complex_: DualComplex, point: ConePoint):
    """Canonical glued form: (dim, simplex, positive coords) of the face
    whose relative interior contains the point; the origin is (-1, 0, ())."""
    d = complex_.dimension
    idx = point.simplex
    coords = list(point.coords)
    while d > 0 and 0 in coords:
        j = coords.index(0)
        idx = complex_.facets[d][idx][j]
        coords.pop(j)
        d -= 1
    if d == 0 and coords and coords[0] == 0:
        return (-1, 0, ())
    return (d, idx, tuple(coords))


def preimages(complex_: DualComplex, canonical, embeddings=None) -> tuple[ConePoint, ...]:
    """All pre-gluing points mapping onto a canonical glued point."""
    d, idx, coords = canonical
    n = complex_.dimension
    if d == -1:
        return tuple(ConePoint(s, (0,) * (n + 1)) for s in range(complex_.n_simplices(n)))
    if embeddings is None:
        embeddings = complex_.embeddings()
    out = set()
    for top, found in enumerate(embeddings):
        for dd, ii, slot_map in found:
            if (dd, ii) != (d, idx):
                continue
            full = [0] * (n + 1)
            for local, top_slot in enumerate(slot_map):
                full[top_slot] = coords[local]
            out.add(ConePoint(top, tuple(full)))
    return tuple(sorted(out, key=lambda p: (p.simplex, p.coords)))


def sr_multiply(p1: ConePoint | None, p2: ConePoint | None) -> ConePoint | None:
    """Stanley-Reisner product on pre-gluing points: add inside a common
    maximal cone, zero (None) otherwise."""
    if p1 is None or p2 is None:
        return None
    if p1.simplex != p2.simplex:
        return None
    return ConePoint(p1.simplex, tuple(a + b for a, b in zip(p1.coords, p2.coords)))


@dataclass
class VertexAlgebra:
    """Quotient theta basis of the Stanley-Reisner ring of a dual complex."""

    complex: DualComplex
    _embeddings: list = field(default_factory=list)

    def __post_init__(self):
        if not self._embeddings:
            self._embeddings = self.complex.embeddings()

    def multiply(self, c1, c2) -> dict:
        """theta_{c1} theta_{c2} re-collected in the theta basis; raises
        when the product leaves the span (a gluing inconsistency)."""
        if c1 == (-1, 0, ()):
            return {c2: 1}
        if c2 == (-1, 0, ()):
            return {c1: 1}
        pre1 = preimages(self.complex, c1, self._embeddings)
        pre2 = preimages(self.complex, c2, self._embeddings)
        tally: dict[ConePoint, int] = {}
        for p1 in pre1:
            for p2 in pre2:
                prod = sr_multiply(p1, p2)
                if prod is not None:
                    tally[prod] = tally.get(prod, 0) + 1
        # the sum lies in the theta span iff each glued class appears with
        # one common multiplicity on all of its preimage copies
        result: dict = {}
        while tally:
            point = min(tally, key=lambda p: (p.simplex, p.coords))
            canonical = canonical_point(self.complex, point)
            copies = preimages(self.complex, canonical, self._embeddings)
            c = min(tally.get(p, 0) for p in copies)
            if c <= 0:
                raise ComplexError(
                    f"product escapes the theta span at {canonical}")
            for p in copies:
                tally[p] -= c
                if tally[p] == 0:
                    del tally[p]
            result[canonical] = result.get(canonical, 0) + c
        return result


def complex_from_simplices(tops, orientations=None) -> DualComplex:
    """Honest simplicial complex from its maximal simplices (vertex
    tuples of equal length).  Faces are deduplicated by vertex set; the
    given orientations refer to the tuples as written and are adjusted by
    the parity of the sort that canonicalizes them."""
    tops = [tuple(t) for t in tops]
    if not tops:
        raise ComplexError("need at least one maximal simplex")
    n = len(tops[0]) - 1
    if any(len(t) != n + 1 for t in tops):
        raise ComplexError("maximal simplices must have equal dimension")
    if any(len(set(t)) != len(t) for t in tops):
        raise ComplexError("simplices need distinct vertices")
    faces_by_dim: list[list[tuple]] = [[] for _ in range(n + 1)]
    index: list[dict] = [dict() for _ in range(n + 1)]

    def register(face: tuple):
        d = len(face) - 1
        if face not in index[d]:
            index[d][face] = len(faces_by_dim[d])
            faces_by_dim[d].append(face)
        return index[d][face]

    for top in tops:
        for size in range(1, n + 2):
            for sub in itertools.combinations(sorted(top), size):
                register(sub)
    facets = []
    for d in range(n + 1):
        level = []
        for face in faces_by_dim[d]:
            if d == 0:
                level.append(())
            else:
                level.append(tuple(index[d - 1][face[:j] + face[j + 1:]]
                                   for j in range(d + 1)))
        facets.append(tuple(level))
    if orientations is None:
        orientations = [1] * len(tops)
    signs = []
    order_of = {face: i for i, face in enumerate(faces_by_dim[n])}
    oriented = [0] * len(faces_by_dim[n])
    for top, sign in zip(tops, orientations):
        parity = _sort_parity(top)
        idx = order_of[tuple(sorted(top))]
        if oriented[idx]:
            raise ComplexError(f"maximal simplex {top} listed twice")
        oriented[idx] = sign * parity
    if any(o == 0 for o in oriented):
        raise ComplexError("a maximal simplex is a face of another")
    names = tuple(face[0] for face in faces_by_dim[0])
    return DualComplex(facets=tuple(facets), orientations=tuple(oriented),
                       vertex_names=names)


def _sort_parity(seq) -> int:
    items = list(seq)
    parity = 1
    for i in range(len(items)):
        j = min(range(i, len(items)), key=lambda t: items[t])
        if j != i:
            items[i], items[j] = items[j], items[i]
            parity = -parity
    return parity


# ---------------------------------------------------------------------------
# fan-backed complexes (rank 2)


def complex_from_fan(fan: Fan) -> DualComplex:
    """Rank-2 complete fan as a 1-dimensional dual complex: one vertex per
    ray, one edge per maximal cone, oriented by the sign of det(v_a, v_b)."""
    if fan.rank != 2:
        raise ComplexError("fan-backed complexes are rank-2 only")
    from .geometry import det2
    verts = tuple(() for _ in fan.rays)
    edges = []
    orientations = []
    for (a, b) in fan.maximal_cones:
        # facet j drops slot j: facet 0 = vertex at slot 1, facet 1 = slot 0
        edges.append((b, a))
        orientations.append(1 if det2(fan.rays[a], fan.rays[b]) > 0 else -1)
    return DualComplex(facets=(verts, tuple(edges)), orientations=tuple(orientations),
                       vertex_names=tuple(fan.rays))


def lattice_to_point(fan: Fan, complex_: DualComplex, P) -> tuple:
    """Canonical glued point of the fan complex for an integer fan point."""
    P = tuple(P)
    if not any(P):
        return (-1, 0, ())
    loc = fan.locate(P)
    cone = RationalCone(tuple(fan.rays[i] for i in loc.face))
    coords = cone.coordinates(loc.point)
    if any(c.denominator != 1 for c in coords):
        raise ComplexError(f"{P} is not an integer point of the cone complex")
    if len(loc.face) == 1:
        return (0, loc.face[0], (int(coords[0]),))
    ci = loc.containing_cones[0]
    a, b = fan.maximal_cones[ci]
    by_ray = dict(zip(loc.face, (int(c) for c in coords)))
    return (1, ci, (by_ray[a], by_ray[b]))


def point_to_lattice(fan: Fan, canonical) -> Vec:
    d, idx, coords = canonical
    if d == -1:
        return (0,) * fan.rank
    if d == 0:
        return tuple(coords[0] * x for x in fan.rays[idx])
    a, b = fan.maximal_cones[idx]
    return tuple(coords[0] * x + coords[1] * y
                 for x, y in zip(fan.rays[a], fan.rays[b]))


def compare_central_fibre(algebra, vertex_algebra: VertexAlgebra,
                          fan: Fan | None = None) -> tuple[bool, list[str]]:
    """Structure constants modulo the class ideal against the vertex table
    on all shared basis pairs; returns (equal, located mismatches)."""
    fan = fan or algebra.diagram.ambient.fan
    mismatches = []
    for (P1, P2), expansion in sorted(algebra.table.items()):
        reduced = {}
        for Q, chi in expansion.items():
            c0 = chi.constant_coefficient()
            if c0:
                reduced[Q] = c0
        c1 = lattice_to_point(fan, vertex_algebra.complex, P1)
        c2 = lattice_to_point(fan, vertex_algebra.complex, P2)
        vertex_product = vertex_algebra.multiply(c1, c2)
        vertex_reduced = {point_to_lattice(fan, c): v for c, v in vertex_product.items()}
        if reduced != vertex_reduced:
            mismatches.append(f"{(P1, P2)}: algebra {reduced} != vertex {vertex_reduced}")
    return (not mismatches, mismatches)


# ---------------------------------------------------------------------------
# the combinatorial singularity checks


@dataclass(frozen=True)
class PseudomanifoldReport:
    passed: bool
    boundary: tuple[int, ...]          # codim-1 simplices lying in one coface
    failures: tuple[str, ...]


def check_pseudomanifold(complex_: DualComplex) -> PseudomanifoldReport:
    """Every codimension-one simplex lies in one or two maximal simplices;
    with two, the induced orientations are opposite.  Returns the boundary
    subcomplex (the one-coface simplices)."""
    n = complex_.dimension
    if n == 0:
        return PseudomanifoldReport(passed=True, boundary=(), failures=())
    cofaces: dict[int, list[tuple[int, int]]] = {}
    for top in range(complex_.n_simplices(n)):
        for j, tau in enumerate(complex_.facets[n][top]):
            cofaces.setdefault(tau, []).append((top, j))
    failures = []
    boundary = []
    for tau in range(complex_.n_simplices(n - 1)):
        inc = cofaces.get(tau, [])
        if len(inc) == 1:
            boundary.append(tau)
        elif len(inc) == 2:
            (t1, j1), (t2, j2) = inc
            s1 = complex_.orientations[t1] * (-1) ** j1
            s2 = complex_.orientations[t2] * (-1) ** j2
            if s1 != -s2:
                failures.append(f"codim-1 simplex {tau}: cofaces {t1},{t2} "
                                f"induce matching orientations")
        elif len(inc) > 2:
            failures.append(f"codim-1 simplex {tau} lies in {len(inc)} maximal "
                            f"simplices")
        else:
            failures.append(f"codim-1 simplex {tau} is not a face of any maximal "
                            f"simplex (not pure)")
    return PseudomanifoldReport(passed=not failures, boundary=tuple(boundary),
                                failures=tuple(failures))


# -- simplicial homology over Q ---------------------------------------------


def _as_simplicial(complex_: DualComplex):
    """Vertex tuples per simplex; requires distinct vertices per simplex
    and simplices determined by their vertex sets."""
    by_dim = []
    for d in range(complex_.dimension + 1):
        level = []
        for idx in range(complex_.n_simplices(d)):
            vt = complex_.vertex_tuple(d, idx)
            if len(set(vt)) != len(vt):
                raise ComplexError("complex has self-glued simplices; the link "
                                   "checks need an honest simplicial complex")
            level.append(vt)
        if len({frozenset(v) for v in level}) != len(level):
            raise ComplexError("parallel simplices; the link checks need an "
                               "honest simplicial complex")
        by_dim.append(level)
    return by_dim


def reduced_homology_ranks(faces: set[frozenset]) -> list[int]:
    """Reduced rational homology ranks of an abstract simplicial complex
    given by its faces (closed under subsets, empty set excluded)."""
    if not faces:
        return []
    by_dim: dict[int, list[frozenset]] = {}
    for f in faces:
        by_dim.setdefault(len(f) - 1, []).append(f)
    top = max(by_dim)
    for d in by_dim:
        by_dim[d] = sorted(by_dim[d], key=lambda s: tuple(sorted(s)))
    index = {d: {f: i for i, f in enumerate(by_dim[d])} for d in by_dim}

    def boundary_rank(d: int) -> int:
        """Rank of d-chains -> (d-1)-chains; d = 0 maps to the point
        (reduced complex)."""
        if d not in by_dim:
            return 0
        if d == 0:
            return 1 if by_dim[0] else 0
        rows = []
        for f in by_dim[d]:
            verts = tuple(sorted(f))
            row = [Fraction(0)] * len(by_dim[d - 1])
            for j in range(len(verts)):
                sub = frozenset(verts[:j] + verts[j + 1:])
                row[index[d - 1][sub]] = Fraction((-1) ** j)
            rows.append(row)
        # rank of the transpose equals the rank
        return fraction_matrix_rank(rows)

    ranks = []
    for d in range(top + 1):
        dim_c = len(by_dim.get(d, []))
        rank_d = boundary_rank(d)
        rank_d1 = boundary_rank(d + 1)
        ranks.append(dim_c - rank_d - rank_d1)
    return ranks


@dataclass(frozen=True)
class LinkHomologyReport:
    passed: bool
    checked: int
    failures: tuple[str, ...]


def link_homology_check(complex_: DualComplex) -> LinkHomologyReport:
    """Reduced homology of every link vanishes below dimension
    n - dim(tau) - 1, over a characteristic-zero field (exact rational
    ranks)."""
    n = complex_.dimension
    by_dim = _as_simplicial(complex_)
    all_faces = {frozenset(vt) for level in by_dim for vt in level}
    failures = []
    checked = 0
    for d, level in enumerate(by_dim):
        for idx, vt in enumerate(level):
            tau = frozenset(vt)
            link = {f - tau for f in all_faces if tau < f}
            link.discard(frozenset())
            checked += 1
            ranks = reduced_homology_ranks(link)
            for i in range(n - d - 1):
                if i < len(ranks) and ranks[i] != 0:
                    failures.append(f"link of {d}-simplex {idx} has reduced "
                                    f"H_{i} of rank {ranks[i]}")
    return LinkHomologyReport(passed=not failures, checked=checked,
                              failures=tuple(failures))
