"""Walls, wall-crossing automorphisms, consistency, and rank-2 completion.

A wall is a codimension-one piece (full line through an apex, or a ray
from an apex) with a primitive conormal n and a unit series f whose
z-exponents pair to zero with n.  Crossing the wall from the side where
<n, .> > 0 acts on characters by z^v -> z^v f^<n,v>; crossing back applies
the inverse.  Around any point where walls meet, the ordered product of
the crossing maps along a small counterclockwise loop must be the
identity; ``complete`` inserts outgoing rays order by order until that
holds modulo I^k.

Sign conventions are fixed once and certified jointly by ``is_consistent``
and theta-function consistency: crossing from the region where <n, .> has
sign s multiplies characters by f^{s <n, v>}; inserted rays point against
their discrepancy exponent (so wall exponents are negative multiples of
the ray direction) and carry normal rot90(direction).  The basic two-line
diagram completes to the single ray R>=0 (-1,-1) with 1 + t1 t2 z^(1,1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cmp_to_key

from .geometry import (AffineManifold, GeometryError, Matrix, Point, Vec,
                       det2, dot, identity_matrix, mat_vec, plane_manifold,
                       primitive, rot90, vec_add, vec_scale, vec_sub)
from .series import CurveClassMonoid, RingContextError, TruncatedSeries

FractionPoint = tuple[Fraction, Fraction]


class ScatteringError(ValueError):
    pass


class CompletionError(ScatteringError):
    """A discrepancy term could not be cancelled by a legal wall."""


def _fp(point) -> FractionPoint:
    return tuple(Fraction(x) for x in point)


@dataclass(frozen=True)
class Wall:
    """Scattering wall in a fixed chart.

    support: {apex + s*direction : s >= 0} or the full line (s in Q).
    ``normal`` is primitive with <normal, direction> = 0; its sign is part
    of the data.  ``function`` is 1 + (class-order >= 1 terms) and every
    z-exponent is an integer multiple of ``direction``.
    """

    apex: FractionPoint
    direction: Vec
    normal: Vec
    function: TruncatedSeries
    full_line: bool = False
    cone_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "apex", _fp(self.apex))
        object.__setattr__(self, "direction", primitive(self.direction))
        object.__setattr__(self, "normal", primitive(self.normal))
        if dot(self.normal, self.direction) != 0:
            raise ScatteringError("normal must annihilate the wall direction")
        f = self.function
        if f.constant_coefficient() != 1:
            raise ScatteringError("wall function must be 1 modulo the class ideal")
        for (q, m), _c in f.items():
            if f.monoid.order(q) == 0 and any(m):
                raise ScatteringError("wall function must be 1 modulo the class ideal")
            if any(m) and det2(m, self.direction) != 0:
                raise ScatteringError(f"wall exponent {m} is not tangent to the wall")

    # -- support geometry (rank 2, exact) --------------------------------

    def contains_parameter(self, s: Fraction) -> bool:
        return self.full_line or s >= 0

    def point_parameter(self, point) -> Fraction | None:
        """Parameter s with apex + s*direction == point, else None."""
        p = vec_sub(_fp(point), self.apex)
        d = self.direction
        if det2(p, d) != 0:
            return None
        s = Fraction(p[0], d[0]) if d[0] else Fraction(p[1], d[1])
        return s if self.contains_parameter(s) else None

    def contains_point(self, point) -> bool:
        return self.point_parameter(point) is not None

    def crossing_directions(self, point) -> tuple[Vec, ...]:
        """Directions at which a small loop around ``point`` meets the wall."""
        s = self.point_parameter(point)
        if s is None:
            return ()
        if not self.full_line and s == 0:
            return (self.direction,)
        return (self.direction, vec_scale(-1, self.direction))

    def key(self):
        return (self.apex, self.direction, self.normal, not self.full_line)


def make_line_wall(direction, normal, function, apex=(0, 0)) -> Wall:
    return Wall(apex=_fp(apex), direction=tuple(direction), normal=tuple(normal),
                function=function, full_line=True)


def make_ray_wall(apex, direction, function, normal=None) -> Wall:
    direction = primitive(direction)
    if normal is None:
        normal = rot90(direction)
    return Wall(apex=_fp(apex), direction=direction, normal=tuple(normal),
                function=function, full_line=False)


@dataclass(frozen=True)
class ScatteringDiagram:
    """Walls plus optional kink classes on interior fan rays.

    ``kinks[i]`` is the effective curve class a monomial picks up per unit
    of conormal pairing when a broken line crosses fan ray i (the class of
    the dual boundary 1-stratum); absent rays kink by zero.
    """

    ambient: AffineManifold
    monoid: CurveClassMonoid
    order: int
    walls: tuple[Wall, ...]
    kinks: tuple[tuple[int, Vec], ...] = ()

    def __post_init__(self):
        walls = tuple(w for w in self.walls if not w.function.is_one())
        walls = tuple(sorted(walls, key=lambda w: w.key()))
        for w in walls:
            if (w.function.monoid, w.function.rank, w.function.order) != \
                    (self.monoid, self.ambient.rank, self.order):
                raise RingContextError("wall function has the wrong ring context")
        object.__setattr__(self, "walls", walls)
        kinks = tuple(sorted((int(i), tuple(q)) for i, q in self.kinks))
        for i, q in kinks:
            if not (0 <= i < len(self.ambient.fan.rays)):
                raise ScatteringError(f"kink on unknown ray {i}")
            if self.monoid.order(q) < 1:
                raise ScatteringError(f"kink class on ray {i} must be effective "
                                      f"and nonzero")
        object.__setattr__(self, "kinks", kinks)

    def kink_map(self) -> dict[int, Vec]:
        return dict(self.kinks)

    def series_one(self) -> TruncatedSeries:
        return TruncatedSeries.one(self.monoid, self.ambient.rank, self.order)

    def series_monomial(self, q, m, c=1) -> TruncatedSeries:
        return TruncatedSeries.monomial(self.monoid, self.ambient.rank, self.order, q, m, c)

    def character(self, v) -> TruncatedSeries:
        return self.series_monomial(self.monoid.zero(), v)

    def with_walls(self, walls) -> "ScatteringDiagram":
        return replace(self, walls=tuple(walls))


def empty_diagram(ambient: AffineManifold, monoid: CurveClassMonoid, order: int):
    return ScatteringDiagram(ambient=ambient, monoid=monoid, order=order, walls=())


# ---------------------------------------------------------------------------
# wall crossing


def wall_cross(wall: Wall, v, side: int = 1) -> TruncatedSeries:
    """Image of the character z^v crossing from the side sign(<n, .>) = side.

    Crossing from the <n,.> > 0 side gives z^v * f^<n,v>; the other side
    applies the inverse automorphism.  <n,v> = 0 characters are fixed.
    """
    if side not in (1, -1):
        raise ScatteringError("side must be +1 or -1")
    v = tuple(v)
    f = wall.function
    exponent = side * dot(wall.normal, v)
    character = TruncatedSeries.monomial(f.monoid, f.rank, f.order, f.monoid.zero(), v)
    if exponent == 0:
        return character
    return character * f**exponent


def wall_cross_series(wall: Wall, series: TruncatedSeries, side: int = 1) -> TruncatedSeries:
    """Extend the crossing map to a full series, linearly over the classes."""
    out = TruncatedSeries.zero(series.monoid, series.rank, series.order)
    f = wall.function
    powers: dict[int, TruncatedSeries] = {}
    for (q, m), c in series.items():
        e = side * dot(wall.normal, m)
        if e not in powers:
            powers[e] = f**e
        out = out + c * TruncatedSeries.monomial(series.monoid, series.rank,
                                                 series.order, q, m) * powers[e]
    return out


# ---------------------------------------------------------------------------
# automorphisms as images of the basis characters


class RingAutomorphism:
    """Automorphism of Z[Q + M]/I^k fixing classes, as unit factors u_i
    with z^{e_i} -> z^{e_i} u_i."""

    def __init__(self, diagram: ScatteringDiagram, factors=None):
        self.diagram = diagram
        rank = diagram.ambient.rank
        self.factors = tuple(factors) if factors is not None else \
            tuple(diagram.series_one() for _ in range(rank))

    def apply(self, series: TruncatedSeries) -> TruncatedSeries:
        out = TruncatedSeries.zero(series.monoid, series.rank, series.order)
        cache: dict[Vec, TruncatedSeries] = {}
        for (q, m), c in series.items():
            if m not in cache:
                acc = self.diagram.series_one()
                for e, u in zip(m, self.factors):
                    if e:
                        acc = acc * u**e
                cache[m] = acc
            out = out + c * TruncatedSeries.monomial(series.monoid, series.rank,
                                                     series.order, q, m) * cache[m]
        return out

    def then_cross(self, wall: Wall, side: int) -> "RingAutomorphism":
        """Compose with a wall crossing applied after this automorphism."""
        rank = self.diagram.ambient.rank
        new_factors = []
        for i in range(rank):
            e_i = tuple(1 if j == i else 0 for j in range(rank))
            image = self.apply(self.diagram.character(e_i))  # z^{e_i} u_i
            crossed = wall_cross_series(wall, image, side)
            unit = crossed * self.diagram.character(vec_scale(-1, e_i))
            new_factors.append(unit)
        return RingAutomorphism(self.diagram, new_factors)

    def is_identity(self) -> bool:
        return all(u.is_one() for u in self.factors)

    def deviation(self) -> list[TruncatedSeries]:
        one = self.diagram.series_one()
        return [u - one for u in self.factors]

    def first_failure_order(self) -> int | None:
        orders = [d.min_positive_order() for d in self.deviation() if not d.is_zero()]
        orders = [o for o in orders if o is not None]
        return min(orders) if orders else None


# ---------------------------------------------------------------------------
# joints and loops


def _angular_compare(base: Vec):
    """Strict ccw order on nonzero integer directions starting just after
    ``base``; directions parallel to base are not allowed."""

    def half(c):
        cr = det2(base, c)
        if cr > 0:
            return 0
        if cr < 0:
            return 1
        if dot(base, c) < 0:
            return 0  # opposite of base closes the first half
        raise ScatteringError("loop base direction hits a crossing")

    def cmp(c1, c2):
        h1, h2 = half(c1), half(c2)
        if h1 != h2:
            return -1 if h1 < h2 else 1
        cr = det2(c1, c2)
        if cr > 0:
            return -1
        if cr < 0:
            return 1
        return 0

    return cmp


def _generic_base_direction(directions) -> Vec:
    for cand in ((1, 0), (2, 1), (1, 2), (3, 1), (1, 3), (3, 2), (2, 3),
                 (4, 1), (5, 2), (5, 3), (7, 2)):
        if all(det2(cand, c) != 0 for c in directions):
            return cand
    raise ScatteringError("no generic base direction found")


def joints(diagram: ScatteringDiagram) -> list[FractionPoint]:
    """Ray apexes plus pairwise transversal wall intersections."""
    pts: set[FractionPoint] = set()
    for w in diagram.walls:
        if not w.full_line:
            pts.add(w.apex)
    for w1, w2 in itertools.combinations(diagram.walls, 2):
        d = det2(w1.direction, w2.direction)
        if d == 0:
            continue
        # apex1 + s1 d1 = apex2 + s2 d2
        rhs = vec_sub(w2.apex, w1.apex)
        s1 = Fraction(det2(rhs, w2.direction), d)
        s2 = Fraction(det2(rhs, w1.direction), d)
        if w1.contains_parameter(s1) and w2.contains_parameter(s2):
            pts.add(vec_add(w1.apex, vec_scale(s1, w1.direction)))
    return sorted(pts)


def loop_events(diagram: ScatteringDiagram, joint) -> list[tuple[Wall, Vec, int]]:
    """Crossings of a small ccw loop around ``joint``: (wall, direction,
    sign of the side being left), in crossing order.

    Crossing from the region where <n, .> has sign s applies
    z^v -> z^v f^{s <n, v>}, matching ``wall_cross``.
    """
    joint = _fp(joint)
    events = []
    for w in diagram.walls:
        for c in w.crossing_directions(joint):
            side = -1 if dot(w.normal, rot90(c)) > 0 else 1
            events.append((w, c, side))
    if not events:
        return []
    base = _generic_base_direction([c for (_w, c, _s) in events])
    cmp = _angular_compare(base)
    events.sort(key=cmp_to_key(lambda a, b: cmp(a[1], b[1])))
    return events


def path_ordered_product(diagram: ScatteringDiagram, joint) -> RingAutomorphism:
    """Composite crossing automorphism around a counterclockwise loop."""
    auto = RingAutomorphism(diagram)
    for wall, _c, side in loop_events(diagram, joint):
        auto = auto.then_cross(wall, side)
    return auto


# ---------------------------------------------------------------------------
# consistency


@dataclass(frozen=True)
class JointReport:
    joint: FractionPoint
    kind: str                       # "smooth" | "singular"
    consistent: bool
    first_failure_order: int | None = None
    deviation: tuple = ()
    detail: str = ""


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    joints: tuple[JointReport, ...]

    def first_failure(self) -> JointReport | None:
        return next((j for j in self.joints if not j.consistent), None)


def _joint_is_singular(diagram: ScatteringDiagram, joint) -> bool:
    am = diagram.ambient
    if am.is_smooth():
        return False
    # rank-2 singular locus is the origin
    return all(x == 0 for x in joint)


def is_consistent(diagram: ScatteringDiagram, theta_directions=None) -> ConsistencyReport:
    """Check every joint; smooth joints by the loop product, joints on the
    singular locus via theta-function consistency across incident walls.

    Joints meeting a kinked fan ray are not supported (the loop transport
    would need the kink-twisted chart bookkeeping)."""
    from .geometry import RationalCone
    kink_rays = [RationalCone((diagram.ambient.fan.rays[i],))
                 for i, _q in diagram.kinks]
    reports = []
    for joint in joints(diagram):
        if any(ray.contains(joint) for ray in kink_rays):
            raise ScatteringError(f"joint {joint} lies on a kinked fan ray; "
                                  f"keep walls away from kinked rays")
        if _joint_is_singular(diagram, joint):
            reports.append(_singular_joint_report(diagram, joint, theta_directions))
            continue
        auto = path_ordered_product(diagram, joint)
        fail = auto.first_failure_order()
        dev = tuple(d for d in auto.deviation() if not d.is_zero())
        reports.append(JointReport(joint=_fp(joint), kind="smooth",
                                   consistent=fail is None,
                                   first_failure_order=fail, deviation=dev))
    return ConsistencyReport(consistent=all(r.consistent for r in reports),
                             joints=tuple(reports))


def _singular_joint_report(diagram, joint, theta_directions):
    # local import: theta builds on this module
    from .theta import default_singular_check_directions, theta_consistency_check
    directions = theta_directions or default_singular_check_directions(diagram)
    failures = []
    for wall in diagram.walls:
        if not wall.contains_point(joint):
            continue
        for p_dir in directions:
            result = theta_consistency_check(diagram, wall, p_dir)
            if not result.consistent:
                failures.append((wall.key(), p_dir, result.detail))
    return JointReport(joint=_fp(joint), kind="singular", consistent=not failures,
                       detail="; ".join(str(f) for f in failures[:3]))


# ---------------------------------------------------------------------------
# completion (rank 2, smooth ambient near all joints)


def _insertions_for_joint(diagram, joint, target_order):
    """Walls cancelling the lowest-order deviation of the loop around
    ``joint``; empty when consistent through ``target_order``."""
    sub = diagram  # full-order computation; deviations below target must vanish
    auto = path_ordered_product(sub, joint)
    fail = auto.first_failure_order()
    if fail is None or fail > target_order:
        return []
    if fail < target_order:
        raise CompletionError(
            f"joint {joint}: unresolved discrepancy at order {fail} < {target_order}")
    deviations = auto.deviation()
    # group order-j terms by (q, m); solve the derivation coefficient
    terms: dict[tuple[Vec, Vec], list[int]] = {}
    rank = diagram.ambient.rank
    for i, dev in enumerate(deviations):
        for (q, m), c in dev.items():
            if diagram.monoid.order(q) != target_order:
                continue
            terms.setdefault((q, m), [0] * rank)[i] = c
    insertions = []
    for (q, m), coeffs in sorted(terms.items()):
        if not any(m):
            raise CompletionError(
                f"joint {joint}: discrepancy term with zero direction at {q}")
        # outgoing ray along -m (exponents point back at the joint); the
        # ccw loop leaves its negative side there, so the crossing
        # contributes -c * <n, e_i> and c = a_i / <n, e_i> cancels.
        direction = primitive(vec_scale(-1, m))
        normal = rot90(direction)
        pairings = [normal[i] for i in range(rank)]
        c_wall = None
        for a_i, pair_i in zip(coeffs, pairings):
            if pair_i == 0:
                if a_i != 0:
                    raise CompletionError(
                        f"joint {joint}: deviation at {(q, m)} is not a derivation")
                continue
            cand, rem = divmod(a_i, pair_i)
            if rem:
                raise CompletionError(
                    f"joint {joint}: non-integral wall coefficient for {(q, m)}")
            if c_wall is None:
                c_wall = cand
            elif c_wall != cand:
                raise CompletionError(
                    f"joint {joint}: inconsistent derivation coefficients for {(q, m)}")
        if c_wall:
            insertions.append((joint, direction, q, m, c_wall))
    return insertions


def complete(initial: ScatteringDiagram, order: int | None = None) -> ScatteringDiagram:
    """Insert outgoing rays until every joint's loop product is the
    identity modulo I^order.  Idempotent; smooth-joint completion only."""
    diagram = initial if order is None or order == initial.order else \
        initial.with_walls([replace(w, function=_reorder(w.function, order))
                            for w in initial.walls])
    if order is not None and order != diagram.order:
        diagram = ScatteringDiagram(ambient=diagram.ambient, monoid=diagram.monoid,
                                    order=order,
                                    walls=tuple(replace(w, function=_reorder(w.function, order))
                                                for w in initial.walls))
    if not diagram.ambient.is_smooth():
        for joint in joints(diagram):
            if _joint_is_singular(diagram, joint):
                raise ScatteringError("completion around singular joints is not supported")
    k = diagram.order
    for j in range(2, k):
        while True:
            new_walls: dict[tuple, Wall] = {}
            for joint in joints(diagram):
                for (apex, direction, q, m, c) in _insertions_for_joint(diagram, joint, j):
                    key = (apex, direction)
                    bump = diagram.series_one() + diagram.series_monomial(q, m, c)
                    if key in new_walls:
                        new_walls[key] = replace(new_walls[key],
                                                 function=new_walls[key].function * bump)
                    else:
                        new_walls[key] = make_ray_wall(apex, direction, bump)
            if not new_walls:
                break
            merged = list(diagram.walls)
            for key, wall in sorted(new_walls.items()):
                existing = next((i for i, w in enumerate(merged)
                                 if not w.full_line and (w.apex, w.direction) == key
                                 and w.normal == wall.normal), None)
                if existing is None:
                    merged.append(wall)
                else:
                    merged[existing] = replace(
                        merged[existing],
                        function=merged[existing].function * wall.function)
            diagram = diagram.with_walls(merged)
    report = is_consistent(diagram)
    if not report.consistent:
        bad = report.first_failure()
        raise CompletionError(f"completion left joint {bad.joint} inconsistent "
                              f"at order {bad.first_failure_order}")
    return diagram


def _reorder(series: TruncatedSeries, order: int) -> TruncatedSeries:
    if order <= series.order:
        return series.truncate(order)
    return TruncatedSeries(series.monoid, series.rank, order, dict(series.items()))


# ---------------------------------------------------------------------------
# torsor heights


@dataclass(frozen=True)
class PLSection:
    """Piecewise-linear torsor section: per maximal cone an integer matrix
    sending lattice vectors to curve-class coordinates, plus a kink class
    per interior wall (the change of slope across it)."""

    d_phi: tuple[Matrix, ...]                 # one (ngens x rank) matrix per maximal cone
    kinks: dict[int, Vec] = field(default_factory=dict)

    def gradient(self, cone_index: int) -> Matrix:
        return self.d_phi[cone_index]


def height(v_lattice: Vec, v_class: Vec, phi: PLSection, cone_index: int) -> Vec:
    """Class component of a torsor tangent vector above the section:
    (class part) - d_phi(lattice part)."""
    img = mat_vec(phi.gradient(cone_index), v_lattice)
    return vec_sub(tuple(v_class), img)


def is_above(v_lattice: Vec, v_class: Vec, phi: PLSection, cone_index: int) -> bool:
    return all(h >= 0 for h in height(v_lattice, v_class, phi, cone_index))


def check_wall_heights(diagram: ScatteringDiagram, phi: PLSection) -> list[str]:
    """Every monomial t^q z^m of every wall function must sit above the
    section in the chart of the wall's cone: height(m, q) effective."""
    problems = []
    for w in diagram.walls:
        cone = w.cone_index or 0
        for (q, m), _c in w.function.items():
            if not any(m) and not any(q):
                continue
            h = height(m, q, phi, cone)
            if any(x < 0 for x in h):
                problems.append(f"wall {w.key()} monomial {(q, m)} has height {h}")
    return problems
