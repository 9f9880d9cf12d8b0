"""Lattices, rational cones, fans, and singular integral affine structures.

Everything is exact: lattice vectors are int tuples, points are tuples of
``fractions.Fraction``, chart transitions are unimodular integer matrices.

A cyclic surface structure built from boundary self-intersection numbers
(d_1, ..., d_k) is presented in *developed* coordinates: rays are produced
by the chart recurrence v_{i-1} + v_{i+1} = -d_i v_i starting from the
standard basis, every interior wall transition is then the identity except
the closing wall at ray 0, which carries the total monodromy.  For toric
data the closing transition is the identity and the structure is smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

Vec = tuple[int, ...]
Point = tuple[Fraction, ...]
Matrix = tuple[Vec, ...]  # rows


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# vector / matrix helpers


def vec_add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def vec_sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def vec_scale(c, a):
    return tuple(c * x for x in a)


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def rot90(v: Vec) -> Vec:
    """Counterclockwise quarter turn (rank 2)."""
    return (-v[1], v[0])


def det2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def primitive(v) -> Vec:
    v = tuple(v)
    g = math.gcd(*(abs(x) for x in v)) if len(v) > 1 else abs(v[0])
    if g == 0:
        raise GeometryError("zero vector has no primitive representative")
    return tuple(x // g for x in v)


def is_primitive(v) -> bool:
    return any(v) and math.gcd(*(abs(x) for x in v)) == 1


def identity_matrix(n: int) -> Matrix:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def mat_vec(m: Matrix, v):
    return tuple(dot(row, v) for row in m)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(sum(a[i][t] * b[t][j] for t in range(len(b))) for j in range(len(b[0])))
                 for i in range(len(a)))


def mat_det2(m: Matrix) -> int:
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def mat_inv_unimodular2(m: Matrix) -> Matrix:
    d = mat_det2(m)
    if d not in (1, -1):
        raise GeometryError("matrix is not unimodular")
    return ((d * m[1][1], -d * m[0][1]), (-d * m[1][0], d * m[0][0]))


def matrix_from_basis_images(basis: tuple[Vec, Vec], images: tuple[Vec, Vec]) -> Matrix:
    """The integer matrix sending basis[i] -> images[i] (rank 2, det(basis)=+-1)."""
    b = ((basis[0][0], basis[1][0]), (basis[0][1], basis[1][1]))  # columns
    binv = mat_inv_unimodular2(b)
    img = ((images[0][0], images[1][0]), (images[0][1], images[1][1]))
    return mat_mul(img, binv)


def solve_fraction_system(rows: list[list[Fraction]], rhs: list[Fraction]):
    """Solve A x = b exactly; returns None when inconsistent, else one
    solution (free variables pinned to 0)."""
    m, n = len(rows), len(rows[0]) if rows else 0
    aug = [list(map(Fraction, rows[i])) + [Fraction(rhs[i])] for i in range(m)]
    pivots = []
    r = 0
    for c in range(n):
        pivot = next((i for i in range(r, m) if aug[i][c] != 0), None)
        if pivot is None:
            continue
        aug[r], aug[pivot] = aug[pivot], aug[r]
        pv = aug[r][c]
        aug[r] = [x / pv for x in aug[r]]
        for i in range(m):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if aug[i][n] != 0:
            return None
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        x[c] = aug[i][n]
    return x


def fraction_matrix_rank(rows: list[list[Fraction]]) -> int:
    if not rows or not rows[0]:
        return 0
    work = [list(map(Fraction, row)) for row in rows]
    m, n = len(work), len(work[0])
    rank = 0
    for c in range(n):
        pivot = next((i for i in range(rank, m) if work[i][c] != 0), None)
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        pv = work[rank][c]
        work[rank] = [x / pv for x in work[rank]]
        for i in range(m):
            if i != rank and work[i][c] != 0:
                f = work[i][c]
                work[i] = [x - f * y for x, y in zip(work[i], work[rank])]
        rank += 1
        if rank == m:
            break
    return rank


# ---------------------------------------------------------------------------
# cones and fans


@dataclass(frozen=True)
class RationalCone:
    """Simplicial rational cone spanned by primitive, independent generators."""

    generators: tuple[Vec, ...]

    def __post_init__(self):
        gens = tuple(tuple(g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if not is_primitive(g):
                raise GeometryError(f"cone generator {g} is not primitive")
        if gens:
            rows = [[Fraction(g[i]) for g in gens] for i in range(len(gens[0]))]
            if fraction_matrix_rank(rows) != len(gens):
                raise GeometryError("cone generators are linearly dependent")

    @property
    def dim(self) -> int:
        return len(self.generators)

    def coordinates(self, point) -> list[Fraction] | None:
        """Coefficients of ``point`` over the generators, or None."""
        point = tuple(Fraction(x) for x in point)
        if not self.generators:
            return [] if not any(point) else None
        rows = [[Fraction(g[i]) for g in self.generators] for i in range(len(point))]
        return solve_fraction_system(rows, list(point))

    def contains(self, point) -> bool:
        coords = self.coordinates(point)
        return coords is not None and all(c >= 0 for c in coords)

    def contains_interior(self, point) -> bool:
        coords = self.coordinates(point)
        return coords is not None and all(c > 0 for c in coords)


@dataclass(frozen=True)
class Fan:
    """Simplicial fan: primitive rays plus maximal cones as ray-index tuples.

    ``complete`` is meaningful for honestly embedded fans; developed fans
    of singular surface structures set ``embedded=False``, which disables
    global point location.
    """

    rank: int
    rays: tuple[Vec, ...]
    maximal_cones: tuple[tuple[int, ...], ...]
    complete: bool = True
    embedded: bool = True

    def __post_init__(self):
        rays = tuple(tuple(r) for r in self.rays)
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "maximal_cones",
                           tuple(tuple(c) for c in self.maximal_cones))
        for r in rays:
            if len(r) != self.rank or not is_primitive(r):
                raise GeometryError(f"invalid ray {r}")
        if len(set(rays)) != len(rays):
            raise GeometryError("duplicate rays")
        for cone in self.maximal_cones:
            if any(i < 0 or i >= len(rays) for i in cone):
                raise GeometryError(f"bad ray index in cone {cone}")
            RationalCone(tuple(rays[i] for i in cone))  # independence check

    def cone(self, index: int) -> RationalCone:
        return RationalCone(tuple(self.rays[i] for i in self.maximal_cones[index]))

    def locate(self, point) -> "LocateResult":
        """Smallest cone containing ``point`` plus genericity data."""
        if not self.embedded:
            raise GeometryError("point location needs an embedded fan")
        point = tuple(Fraction(x) for x in point)
        if not any(point):
            return LocateResult(face=(), containing_cones=tuple(range(len(self.maximal_cones))),
                                generic=False, point=point)
        for ci, cone in enumerate(self.maximal_cones):
            rc = self.cone(ci)
            coords = rc.coordinates(point)
            if coords is None or any(c < 0 for c in coords):
                continue
            face = tuple(i for i, c in zip(cone, coords) if c > 0)
            containing = tuple(cj for cj, other in enumerate(self.maximal_cones)
                               if set(face) <= set(other))
            return LocateResult(face=face, containing_cones=containing,
                                generic=(len(face) == self.rank), point=point)
        raise GeometryError(f"point {point} lies outside the fan support")

    def supports(self, point) -> bool:
        try:
            self.locate(point)
            return True
        except GeometryError:
            return False

    def interior_walls(self) -> dict[tuple[int, ...], tuple[int, int]]:
        """Codim-1 faces shared by exactly two maximal cones."""
        seen: dict[tuple[int, ...], list[int]] = {}
        for ci, cone in enumerate(self.maximal_cones):
            for drop in range(len(cone)):
                face = tuple(sorted(cone[:drop] + cone[drop + 1:]))
                seen.setdefault(face, []).append(ci)
        return {face: (cs[0], cs[1]) for face, cs in seen.items() if len(cs) == 2}

    def integer_points(self, bound: int) -> list[Vec]:
        """Lattice points of the support with sup-norm <= bound (origin included)."""
        if self.rank != 2:
            raise GeometryError("integer point enumeration is rank-2 only")
        pts = []
        for x in range(-bound, bound + 1):
            for y in range(-bound, bound + 1):
                p = (x, y)
                if p == (0, 0):
                    pts.append(p)
                    continue
                if self.embedded and any(self.cone(ci).contains(p)
                                         for ci in range(len(self.maximal_cones))):
                    pts.append(p)
        return sorted(pts)


@dataclass(frozen=True)
class LocateResult:
    face: tuple[int, ...]            # ray indices of the smallest containing cone
    containing_cones: tuple[int, ...]
    generic: bool                    # interior of a maximal cone
    point: Point


@dataclass(frozen=True)
class PLFunction:
    """Piecewise linear function given by one integer per ray."""

    coefficients: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(self.coefficients))

    def value(self, fan: Fan, point) -> Fraction:
        loc = fan.locate(point)
        if not loc.face:
            return Fraction(0)
        cone = RationalCone(tuple(fan.rays[i] for i in loc.face))
        coords = cone.coordinates(loc.point)
        return sum((c * self.coefficients[i] for c, i in zip(coords, loc.face)),
                   Fraction(0))


# ---------------------------------------------------------------------------
# affine structures


@dataclass(frozen=True)
class AffineManifold:
    """Fan plus chart-transition data.

    ``transitions[ray_index]`` is the unimodular matrix applied to tangent
    vectors when crossing that interior wall counterclockwise, i.e. from
    ``wall_adjacency[ray_index][0]`` into ``wall_adjacency[ray_index][1]``.
    For smooth (toric) structures every transition is the identity.  For a
    cyclic surface structure in developed coordinates the only nontrivial
    transition sits on the closing wall and equals the monodromy.
    """

    fan: Fan
    transitions: dict[int, Matrix] = field(default_factory=dict)
    wall_adjacency: dict[int, tuple[int, int]] = field(default_factory=dict)
    singular_faces: tuple[tuple[int, ...], ...] = ()
    self_intersections: tuple[int, ...] | None = None

    @property
    def rank(self) -> int:
        return self.fan.rank

    def is_smooth(self) -> bool:
        return not self.singular_faces

    def transition(self, ray_index: int, sign: int = 1) -> Matrix:
        t = self.transitions.get(ray_index)
        if t is None:
            raise GeometryError(f"ray {ray_index} is not an interior wall")
        return t if sign > 0 else mat_inv_unimodular2(t)


def toric_manifold(fan: Fan) -> AffineManifold:
    """Trivial affine structure: identity charts everywhere, no singularities."""
    ident = identity_matrix(fan.rank)
    walls = fan.interior_walls()
    transitions, adjacency = {}, {}
    for face, (c1, c2) in walls.items():
        key = face[0] if len(face) == 1 else face
        transitions[key] = ident
        adjacency[key] = (c1, c2)
    return AffineManifold(fan=fan, transitions=transitions, wall_adjacency=adjacency,
                          singular_faces=())


def plane_manifold() -> AffineManifold:
    """R^2 with the four-quadrant fan; the default ambient at rank 2."""
    fan = Fan(rank=2, rays=((1, 0), (0, 1), (-1, 0), (0, -1)),
              maximal_cones=((0, 1), (1, 2), (2, 3), (3, 0)), complete=True)
    return toric_manifold(fan)


def p2_manifold() -> AffineManifold:
    fan = Fan(rank=2, rays=((1, 0), (0, 1), (-1, -1)),
              maximal_cones=((0, 1), (1, 2), (2, 0)), complete=True)
    return toric_manifold(fan)


def build_affine_structure_dim2(self_intersections) -> AffineManifold:
    """Cyclic surface structure from boundary self-intersection numbers.

    Rays come from the developed recurrence v_{i-1} + v_{i+1} = -d_i v_i
    with v_0 = (1,0), v_1 = (0,1).  The closing wall at ray 0 carries the
    monodromy; the origin is singular exactly when that matrix is not the
    identity.  Sequences shorter than 3 need self-glued charts and are
    rejected.
    """
    d = tuple(int(x) for x in self_intersections)
    k = len(d)
    if k < 3:
        raise GeometryError("need at least 3 boundary components; "
                            "self-glued charts are unsupported")
    rays = [(1, 0), (0, 1)]
    for i in range(1, k - 1):
        rays.append(vec_sub(vec_scale(-d[i], rays[i]), rays[i - 1]))
    rays = [tuple(r) for r in rays]
    if len(set(rays)) != len(rays):
        raise GeometryError("developed rays collide; structure not representable "
                            "in a single developed chart")
    # presentation of ray 0 in the chart of the closing cone (v_{k-1}, ~v_0)
    tilde_v0 = vec_sub(vec_scale(-d[k - 1], rays[k - 1]), rays[k - 2])
    # closing transition: ~v_0 -> v_0 and v_{k-1} -> -d_0 v_0 - v_1
    image_last = vec_sub(vec_scale(-d[0], rays[0]), rays[1])
    monodromy = matrix_from_basis_images((tuple(rays[k - 1]), tuple(tilde_v0)),
                                         (tuple(image_last), tuple(rays[0])))
    ident = identity_matrix(2)
    toric = monodromy == ident
    cones = tuple((i, (i + 1) % k) for i in range(k))
    embedded = toric and all(det2(rays[i], rays[(i + 1) % k]) > 0 for i in range(k))
    fan = Fan(rank=2, rays=tuple(rays), maximal_cones=cones,
              complete=True, embedded=embedded)
    transitions = {i: ident for i in range(k)}
    transitions[0] = monodromy
    adjacency = {i: ((i - 1) % k, i) for i in range(k)}
    return AffineManifold(fan=fan, transitions=transitions, wall_adjacency=adjacency,
                          singular_faces=() if toric else ((),),
                          self_intersections=d)


def parallel_transport(am: AffineManifold, path, v: Vec) -> Vec:
    """Transport a tangent vector along an ordered list of wall crossings.

    ``path`` entries are (ray_index, sign) with sign +1 for the stored
    (counterclockwise) direction.  Transporting back along the reversed
    path is the identity.
    """
    out = tuple(v)
    for ray_index, sign in path:
        out = mat_vec(am.transition(ray_index, sign), out)
    return out


def monodromy(am: AffineManifold, base_cone: int = 0) -> Matrix:
    """Product of transitions around the origin, based at ``base_cone``.

    Reported in that cone's chart; other base points give conjugates.
    """
    k = len(am.fan.maximal_cones)
    result = identity_matrix(am.rank)
    for step in range(1, k + 1):
        ray = (base_cone + step) % k
        result = mat_mul(am.transition(ray, +1), result)
    return result


def boundary_self_intersection(am: AffineManifold, ray_index: int) -> int:
    """The integer d_i in the chart relation v_{i-1} + v_{i+1} = -d_i v_i.

    For stored cyclic data this is just the input; for a toric manifold it
    is recovered from the rays (requires adjacent ray pairs to be bases).
    """
    if am.self_intersections is not None:
        return am.self_intersections[ray_index]
    fan = am.fan
    k = len(fan.rays)
    vm, v, vp = (fan.rays[(ray_index - 1) % k], fan.rays[ray_index],
                 fan.rays[(ray_index + 1) % k])
    s = vec_add(vm, vp)
    if det2(s, v) != 0:
        raise GeometryError("adjacent rays do not satisfy a chart relation")
    # s = -d * v
    for i in range(len(v)):
        if v[i]:
            if s[i] % v[i]:
                raise GeometryError("non-integral chart relation")
            return -(s[i] // v[i])
    raise GeometryError("degenerate ray")


def bend(am: AffineManifold, f: PLFunction, ray_index: int) -> int:
    """Kink of a PL function across an interior wall (0 iff linear there).

    For cyclic surface data with coefficients (a_i) the bend across ray i
    is a_{i-1} + d_i a_i + a_{i+1}.
    """
    if ray_index not in am.wall_adjacency:
        raise GeometryError(f"ray {ray_index} is not an interior wall")
    k = len(am.fan.rays)
    d_i = boundary_self_intersection(am, ray_index)
    a = f.coefficients
    if len(a) != k:
        raise GeometryError("PL function has wrong number of coefficients")
    return a[(ray_index - 1) % k] + d_i * a[ray_index] + a[(ray_index + 1) % k]


def locate(am: AffineManifold, point) -> LocateResult:
    return am.fan.locate(point)
