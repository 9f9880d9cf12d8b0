"""Broken lines, theta functions, structure constants, and the mirror algebra.

A broken line with asymptotic exponent P and endpoint x is a piecewise
straight path carrying monomials: it comes in from infinity carrying
t^0 z^P, travels with velocity equal to its current exponent, and at a
transversal wall crossing may replace its monomial c t^q z^m by one term
of c t^q z^m * f^{|<n, m>|}.  Each proper bend raises the class order, so
at truncation order k the enumeration is finite.  The local theta
function theta_{x,P} sums the final monomials over all such lines.

Enumeration runs backward from x: candidate final exponents are seeded by
an abstract walk on monomials, then every candidate is validated by exact
backward ray tracing.  On a singular ambient the tracer develops charts
on the fly, conjugating wall data through its accumulated frame; paths
hitting the singular point, a joint, or a wall apex are rejected as
non-generic (callers re-sample the basepoint).

Structure constants follow the multi-line rule: chi(P_1..P_n, Q) is read
off at a generic basepoint z near Q (inside the cone of Q, beyond the
last wall met by the ray of Q) as the z^Q-coefficient of the product of
the local thetas, equivalently the sum over n-tuples of broken lines
ending at z whose final exponents add up to Q.  Every value is certified
identical across independent basepoints before it is reported.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .geometry import (AffineManifold, Fan, GeometryError, Matrix, PLFunction,
                       RationalCone, Vec, det2, dot, identity_matrix,
                       mat_inv_unimodular2, mat_mul, mat_vec, vec_add,
                       vec_scale, vec_sub)
from .scattering import (ScatteringDiagram, ScatteringError, Wall,
                         wall_cross_series)
from .series import TruncatedSeries

FractionPoint = tuple[Fraction, ...]


class GenericityError(ScatteringError):
    """The basepoint interacts non-transversally with the wall arrangement."""


class EscapeError(ScatteringError):
    """A product coefficient landed outside the declared basis bound."""


def _fp(point):
    return tuple(Fraction(x) for x in point)


# ---------------------------------------------------------------------------
# broken lines


@dataclass(frozen=True)
class BendRecord:
    point: FractionPoint          # in the tracer's developed plane
    wall_key: tuple
    q_step: Vec
    m_step: Vec
    coefficient: int


@dataclass(frozen=True)
class BrokenLine:
    direction: Vec                # asymptotic exponent P
    endpoint: FractionPoint
    bends: tuple[BendRecord, ...]  # ordered from infinity towards the endpoint
    final_q: Vec
    final_m: Vec
    coefficient: int

    def monomial_exponents(self):
        """Exponent carried on each segment, from infinity to the endpoint."""
        exps = [self.direction]
        for bend in self.bends:
            exps.append(vec_add(exps[-1], bend.m_step))
        return tuple(exps)


@dataclass(frozen=True)
class ThetaFunction:
    basepoint: FractionPoint
    direction: Vec
    value: TruncatedSeries
    lines: tuple[BrokenLine, ...] = ()


class _TraceState:
    """Backward tracer state.  position/exponent live in the tracer's own
    developed plane; ``frame`` maps the current cone's chart into it."""

    __slots__ = ("cone", "frame", "point", "m", "q", "coeff", "bends", "crossings")

    def __init__(self, cone, frame, point, m, q, coeff, bends, crossings):
        self.cone = cone
        self.frame = frame
        self.point = point
        self.m = m
        self.q = q
        self.coeff = coeff
        self.bends = bends
        self.crossings = crossings


def _transform_wall(wall: Wall, frame: Matrix):
    """Wall geometry pushed into the tracer plane by a unimodular frame."""
    if frame == ((1, 0), (0, 1)):
        return wall.apex, wall.direction, wall.normal
    apex = tuple(sum(Fraction(frame[i][j]) * wall.apex[j] for j in range(2))
                 for i in range(2))
    direction = tuple(mat_vec(frame, wall.direction))
    inv = mat_inv_unimodular2(frame)
    normal = tuple(sum(wall.normal[i] * inv[i][j] for i in range(2)) for j in range(2))
    return apex, direction, normal


def _cone_chart_rays(am: AffineManifold, cone_index: int):
    """Generators of a maximal cone in its own chart.  Across a nontrivial
    closing transition the outgoing ray is presented through its inverse."""
    lo, hi = am.fan.maximal_cones[cone_index]
    v_lo, v_hi = am.fan.rays[lo], am.fan.rays[hi]
    ident = identity_matrix(2)
    t = am.transitions.get(hi)
    if t is not None and t != ident and am.wall_adjacency[hi][0] == cone_index:
        v_hi = tuple(mat_vec(mat_inv_unimodular2(t), v_hi))
    return (lo, v_lo), (hi, v_hi)


def _point_in_chart_cone(am, cone_index, point) -> bool:
    (_, a), (_, b) = _cone_chart_rays(am, cone_index)
    den = det2(a, b)
    alpha = Fraction(det2(point, b), den)
    beta = Fraction(det2(a, point), den)
    return alpha >= 0 and beta >= 0


def _boundary_hit(am, state, u):
    """Nearest crossing of the backward ray with the current chart
    boundary: (s, ray_index, point) or None.  Hitting the origin raises."""
    best = None
    for ray_index, ray_vec in _cone_chart_rays(am, state.cone):
        rv = tuple(mat_vec(state.frame, ray_vec))
        den = det2(rv, u)
        if den == 0:
            continue
        s = -Fraction(det2(rv, state.point), den)
        if s <= 0:
            continue
        hit = vec_add(state.point, vec_scale(s, u))
        tau = next((Fraction(hit[i], rv[i]) for i in range(2) if rv[i]), None)
        if tau is None or tau < 0:
            continue
        if tau == 0:
            raise GenericityError("path through the singular point")
        if best is None or s < best[0]:
            best = (s, ray_index, hit)
    return best


def _wall_hits(point, u, walls, frame):
    """Crossings of {point + s u : s > 0} with diagram walls as
    (s, wall, hit).  Apex hits and support overlaps are non-generic."""
    hits = []
    for wall in walls:
        apex, d, _n = _transform_wall(wall, frame)
        rhs = vec_sub(point, apex)
        den = det2(d, u)
        if den == 0:
            if det2(rhs, d) != 0:
                continue
            # collinear: does the open ray meet the wall support?
            tau_p = next(Fraction(rhs[i], d[i]) for i in range(2) if d[i])
            forward = dot(u, d) > 0
            if wall.full_line or forward or tau_p > 0:
                raise GenericityError("path runs along a wall")
            continue
        tau = Fraction(det2(rhs, u), den)
        s = Fraction(det2(rhs, d), den)
        if s <= 0 or not wall.contains_parameter(tau):
            continue
        if not wall.full_line and tau == 0:
            raise GenericityError("path through a wall apex")
        hits.append((s, wall, vec_add(point, vec_scale(s, u))))
    hits.sort(key=lambda h: h[0])
    for h1, h2 in zip(hits, hits[1:]):
        if h1[0] == h2[0]:
            raise GenericityError("path through a joint")
    return hits


def _candidate_final_exponents(diagram: ScatteringDiagram, P: Vec, wrap_cap: int):
    """Overapproximate the possible final exponents: close {P} under wall
    bend steps within the class-order budget and, on singular ambients,
    under chart transitions up to the wrap cap."""
    mon, k = diagram.monoid, diagram.order
    ident = identity_matrix(2)
    frames = {ident}
    if not diagram.ambient.is_smooth():
        mats = list(diagram.ambient.transitions.values())
        mats += [mat_inv_unimodular2(t) for t in mats]
        frontier = set(frames)
        for _ in range(wrap_cap):
            frontier = {mat_mul(t, f) for t in mats for f in frontier} - frames
            if not frontier:
                break
            frames |= frontier
    power_cache: dict[tuple, TruncatedSeries] = {}
    best: dict[Vec, int] = {}
    stack = [(tuple(P), 0)]
    while stack:
        m, spent = stack.pop()
        if best.get(m, k) <= spent:
            continue
        best[m] = spent
        for frame in frames:
            m_in_chart = tuple(mat_vec(mat_inv_unimodular2(frame), m))
            for wi, wall in enumerate(diagram.walls):
                pw = abs(dot(wall.normal, m_in_chart))
                if pw == 0:
                    continue
                key = (wi, pw)
                if key not in power_cache:
                    power_cache[key] = wall.function**pw
                for (q, step), _c in power_cache[key].items():
                    dq = mon.order(q)
                    if dq == 0 or spent + dq >= k:
                        continue
                    stack.append((vec_add(m, mat_vec(frame, step)), spent + dq))
    return sorted(best)


def enumerate_broken_lines(diagram: ScatteringDiagram, P, x,
                           wrap_cap: int = 16) -> tuple[BrokenLine, ...]:
    """All broken lines with asymptotic exponent P ending at the generic
    point x, complete modulo I^k.  Deterministic order."""
    P, x = tuple(P), _fp(x)
    if not any(P):
        raise ScatteringError("the zero direction has no broken lines; theta is 1")
    am = diagram.ambient
    smooth = am.is_smooth()
    if not smooth and any(w.cone_index is None for w in diagram.walls):
        raise ScatteringError("walls on a singular ambient need cone indices")
    if any(w.contains_point(x) for w in diagram.walls):
        raise GenericityError("basepoint lies on a wall")
    for ray_index, _q in diagram.kinks:
        if RationalCone((am.fan.rays[ray_index],)).contains(x):
            raise GenericityError("basepoint lies on a kinked fan ray")
    if smooth:
        start_cone = 0
    else:
        start_cone = next((ci for ci in range(len(am.fan.maximal_cones))
                           if _point_in_chart_cone(am, ci, x)), None)
        if start_cone is None:
            raise GeometryError("basepoint outside the developed charts")
    lines: list[BrokenLine] = []
    for e in _candidate_final_exponents(diagram, P, wrap_cap):
        state = _TraceState(start_cone, identity_matrix(2), x, tuple(e),
                            diagram.monoid.zero(), 1, (), 0)
        _trace_back(diagram, P, x, tuple(e), state, lines, wrap_cap)
    mon = diagram.monoid
    lines.sort(key=lambda ln: (ln.final_m, mon.order(ln.final_q), ln.final_q,
                               len(ln.bends), ln.coefficient))
    return tuple(lines)


def _kink_hits(diagram, point, u, frame):
    """Factor events where the backward ray crosses a kinked fan ray:
    (s, ray_index, class step).  Running along a kinked ray or crossing it
    at the origin is non-generic."""
    events = []
    mon = diagram.monoid
    for ray_index, kappa in diagram.kinks:
        ray_vec = tuple(mat_vec(frame, diagram.ambient.fan.rays[ray_index]))
        den = det2(ray_vec, u)
        if den == 0:
            if det2(ray_vec, point) == 0:
                raise GenericityError("path runs along a kinked fan ray")
            continue
        s = -Fraction(det2(ray_vec, point), den)
        if s <= 0:
            continue
        hit = vec_add(point, vec_scale(s, u))
        tau = next((Fraction(hit[i], ray_vec[i]) for i in range(2) if ray_vec[i]),
                   None)
        if tau is None or tau < 0:
            continue
        if tau == 0:
            raise GenericityError("path through the fan's codimension-two locus")
        conormal = (-ray_vec[1], ray_vec[0])
        pw = abs(dot(conormal, u))
        if pw == 0:
            continue
        step = tuple(pw * c for c in kappa)
        events.append((s, ray_index, step))
    return events


def _trace_back(diagram, P, x, final_e, state, out, wrap_cap):
    """Walk one backward segment chain (towards the P-infinity end);
    branch at diagram walls, accumulate kink classes at fan rays, develop
    across chart boundaries, and record the line on escape."""
    am = diagram.ambient
    mon = diagram.monoid
    k = diagram.order
    smooth = am.is_smooth()
    while True:
        u = state.m  # backward velocity points at the asymptotic end
        relevant = diagram.walls if smooth else \
            tuple(w for w in diagram.walls if w.cone_index == state.cone)
        hits = _wall_hits(state.point, u, relevant, state.frame)
        kink_hits = _kink_hits(diagram, state.point, u, state.frame) \
            if diagram.kinks else []
        boundary = None if smooth else _boundary_hit(am, state, u)
        events = sorted([(s, "wall", wall, pt) for s, wall, pt in hits]
                        + [(s, "kink", ray, step) for s, ray, step in kink_hits])
        if boundary is not None:
            if any(e[0] == boundary[0] for e in events):
                raise GenericityError("wall crossing on a chart boundary")
            events = [e for e in events if e[0] < boundary[0]]
        for e1, e2 in zip(events, events[1:]):
            if e1[0] == e2[0]:
                raise GenericityError("path through a joint")
        q_acc = state.q
        dead = False
        for s, kind, payload, extra in events:
            if kind == "wall":
                here = _TraceState(state.cone, state.frame, state.point, state.m,
                                   q_acc, state.coeff, state.bends, state.crossings)
                _branch_bends(diagram, P, x, final_e, here, payload, extra,
                              out, wrap_cap)
            else:
                q_acc = mon.add(q_acc, extra)
                if mon.order(q_acc) >= k:
                    dead = True
                    break
        if dead:
            return
        if boundary is None:
            inv = mat_inv_unimodular2(state.frame)
            if tuple(mat_vec(inv, state.m)) == P:
                out.append(BrokenLine(direction=P, endpoint=x,
                                      bends=tuple(reversed(state.bends)),
                                      final_q=q_acc, final_m=final_e,
                                      coefficient=state.coeff))
            return
        if state.crossings + 1 > wrap_cap:
            raise ScatteringError("chart crossing cap exceeded (wrapping path)")
        ray_index = boundary[1]
        kappa = diagram.kink_map().get(ray_index)
        if kappa is not None:
            ray_vec = tuple(mat_vec(state.frame, am.fan.rays[ray_index]))
            pw = abs(dot((-ray_vec[1], ray_vec[0]), u))
            if pw:
                q_acc = mon.add(q_acc, tuple(pw * c for c in kappa))
                if mon.order(q_acc) >= k:
                    return
        t = am.transitions[ray_index]
        if am.wall_adjacency[ray_index][0] == state.cone:   # leave ccw
            new_cone = am.wall_adjacency[ray_index][1]
            new_frame = mat_mul(state.frame, mat_inv_unimodular2(t))
        else:                                               # leave cw
            new_cone = am.wall_adjacency[ray_index][0]
            new_frame = mat_mul(state.frame, t)
        state = _TraceState(new_cone, new_frame, boundary[2], state.m, q_acc,
                            state.coeff, state.bends, state.crossings + 1)


def _branch_bends(diagram, P, x, final_e, state, wall, pt, out, wrap_cap):
    mon, k = diagram.monoid, diagram.order
    _apex, _d, normal = _transform_wall(wall, state.frame)
    pw = dot(normal, state.m)
    if pw == 0:
        return
    power = wall.function**abs(pw)
    for (q_f, step_chart), c_f in power.items():
        dq = mon.order(q_f)
        if dq == 0:
            continue  # the straight-through term is not a bend
        q_new = mon.add(state.q, q_f)
        if mon.order(q_new) >= k:
            continue
        step = tuple(mat_vec(state.frame, step_chart))
        bend = BendRecord(point=pt, wall_key=wall.key(), q_step=q_f,
                          m_step=tuple(step_chart), coefficient=c_f)
        branched = _TraceState(state.cone, state.frame, pt,
                               tuple(vec_sub(state.m, step)), q_new,
                               state.coeff * c_f, state.bends + (bend,),
                               state.crossings)
        _trace_back(diagram, P, x, final_e, branched, out, wrap_cap)


def theta_local(diagram: ScatteringDiagram, P, x,
                with_lines: bool = False) -> ThetaFunction:
    """Local theta function at x for direction P; the zero direction is 1."""
    P, x = tuple(P), _fp(x)
    if not any(P):
        return ThetaFunction(basepoint=x, direction=P, value=diagram.series_one())
    lines = enumerate_broken_lines(diagram, P, x)
    value = TruncatedSeries.zero(diagram.monoid, diagram.ambient.rank, diagram.order)
    for ln in lines:
        value = value + diagram.series_monomial(ln.final_q, ln.final_m, ln.coefficient)
    return ThetaFunction(basepoint=x, direction=P, value=value,
                         lines=lines if with_lines else ())


# ---------------------------------------------------------------------------
# theta consistency across a wall


@dataclass(frozen=True)
class ThetaConsistencyResult:
    consistent: bool
    plus_transport: bool
    minus_transport: bool
    zero_ab: bool
    zero_ba: bool
    a: FractionPoint
    b: FractionPoint
    detail: str = ""


def _split_by_normal(series: TruncatedSeries, normal: Vec):
    parts = {1: {}, 0: {}, -1: {}}
    for (q, m), c in series.items():
        pw = dot(normal, m)
        parts[0 if pw == 0 else (1 if pw > 0 else -1)][(q, m)] = c
    return {s: TruncatedSeries(series.monoid, series.rank, series.order, terms)
            for s, terms in parts.items()}


def _segment_crosses(a, b, wall: Wall) -> bool:
    u = vec_sub(b, a)
    rhs = vec_sub(a, wall.apex)
    den = det2(wall.direction, u)
    if den == 0:
        return det2(rhs, wall.direction) == 0
    tau = Fraction(det2(rhs, u), den)
    s = Fraction(det2(rhs, wall.direction), den)
    return 0 <= s <= 1 and wall.contains_parameter(tau)


def pick_wall_test_points(diagram: ScatteringDiagram, wall: Wall, seed: int = 0):
    """Generic interior wall point y plus flanking a, b with
    <n, a - y> > 0 > <n, b - y>, separated by this wall only (no other
    wall and no kinked fan ray crosses [a, b])."""
    rng = random.Random(seed)
    n = wall.normal
    kink_rays = [RationalCone((diagram.ambient.fan.rays[i],))
                 for i, _q in diagram.kinks]
    for attempt in range(128):
        s0 = Fraction(rng.randrange(5, 400), rng.randrange(1, 64))
        if wall.full_line and rng.random() < 0.5:
            s0 = -s0
        y = vec_add(wall.apex, vec_scale(s0, wall.direction))
        if any(w is not wall and w.contains_point(y) for w in diagram.walls):
            continue
        if any(ray.contains(y) for ray in kink_rays):
            continue
        eps = Fraction(1, 997 + 2 * attempt)
        for _shrink in range(40):
            a = vec_add(y, vec_scale(eps, n))
            b = vec_sub(y, vec_scale(eps, n))
            if any(w.contains_point(a) or w.contains_point(b) for w in diagram.walls):
                eps /= 2
                continue
            if any(w is not wall and _segment_crosses(a, b, w) for w in diagram.walls):
                eps /= 2
                continue
            if any(ray.contains(a) or ray.contains(b) for ray in kink_rays):
                eps /= 2
                continue
            return y, a, b
    raise GenericityError("could not find a generic wall point")


def theta_consistency_check(diagram: ScatteringDiagram, wall: Wall, P,
                            a=None, b=None, seed: int = 0) -> ThetaConsistencyResult:
    """The four wall-crossing identities for direction P, exact modulo I^k.

    Writing theta_a, theta_b for the local thetas just off the two sides
    (<n, a> side positive) and splitting monomials by the sign of <n, e>:
    z^e -> z^e f^{<n,e>} carries the positive part of theta_a onto that of
    theta_b, the inverse power carries the negative part of theta_b back
    onto that of theta_a, and the zero parts agree both ways.
    """
    P = tuple(P)
    if a is None or b is None:
        _y, a, b = pick_wall_test_points(diagram, wall, seed=seed)
    else:
        a, b = _fp(a), _fp(b)
    n = wall.normal
    side_a = dot(n, vec_sub(a, wall.apex))
    side_b = dot(n, vec_sub(b, wall.apex))
    if not (side_a > 0 > side_b):
        raise GenericityError("test points must flank the wall")
    theta_a = theta_local(diagram, P, a).value
    theta_b = theta_local(diagram, P, b).value
    parts_a = _split_by_normal(theta_a, n)
    parts_b = _split_by_normal(theta_b, n)
    plus_ok = wall_cross_series(wall, parts_a[1], +1) == parts_b[1]
    minus_ok = wall_cross_series(wall, parts_b[-1], -1) == parts_a[-1]
    zero_ab = wall_cross_series(wall, parts_a[0], +1) == parts_b[0]
    zero_ba = wall_cross_series(wall, parts_b[0], -1) == parts_a[0]
    ok = plus_ok and minus_ok and zero_ab and zero_ba
    detail = "" if ok else (f"P={P}: plus={plus_ok} minus={minus_ok} "
                            f"zero={zero_ab and zero_ba}; "
                            f"theta_a={theta_a!r}; theta_b={theta_b!r}")
    return ThetaConsistencyResult(consistent=ok, plus_transport=plus_ok,
                                  minus_transport=minus_ok, zero_ab=zero_ab,
                                  zero_ba=zero_ba, a=a, b=b, detail=detail)


def default_singular_check_directions(diagram: ScatteringDiagram):
    return ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1))


# ---------------------------------------------------------------------------
# structure constants


class ThetaCalculator:
    """Shared cache for theta evaluations against one diagram."""

    def __init__(self, diagram: ScatteringDiagram):
        self.diagram = diagram
        self._thetas: dict[tuple[Vec, FractionPoint], TruncatedSeries] = {}

    def theta(self, P, z) -> TruncatedSeries:
        key = (tuple(P), _fp(z))
        if key not in self._thetas:
            self._thetas[key] = theta_local(self.diagram, *key).value
        return self._thetas[key]

    def product(self, inputs, z) -> TruncatedSeries:
        out = self.diagram.series_one()
        for P in inputs:
            if any(P):
                out = out * self.theta(P, z)
        return out


def _beyond_wall_scale(diagram: ScatteringDiagram, direction: Vec) -> int:
    """Integer N with N*direction past every wall crossing the ray of
    ``direction``."""
    bound = Fraction(1)
    for wall in diagram.walls:
        den = det2(wall.direction, direction)
        rhs = vec_scale(-1, wall.apex)
        if den == 0:
            continue
        tau = Fraction(det2(rhs, direction), den)
        s = Fraction(det2(rhs, wall.direction), den)
        if wall.contains_parameter(tau) and s > bound:
            bound = s
    return int(bound) + 2


def sample_basepoint(diagram: ScatteringDiagram, Q, seed: int = 0) -> FractionPoint:
    """Generic rational point near Q: along the ray of Q beyond the last
    wall crossing it, nudged by a small random offset off every wall."""
    rng = random.Random(seed)
    direction = tuple(Q) if any(Q) else (1, 1)
    scale = _beyond_wall_scale(diagram, direction)
    kink_rays = [RationalCone((diagram.ambient.fan.rays[i],))
                 for i, _q in diagram.kinks]
    denom = 9973
    for attempt in range(128):
        offset = (Fraction(rng.randrange(1, denom), denom * 8),
                  Fraction(rng.randrange(1, denom), denom * 8))
        z = vec_add(vec_scale(Fraction(scale + attempt % 3), direction), offset)
        if any(w.contains_point(z) for w in diagram.walls):
            continue
        if any(ray.contains(z) for ray in kink_rays):
            continue
        return z
    raise GenericityError("failed to sample a generic basepoint")


def transport_to_basepoint(diagram: ScatteringDiagram, Q, z) -> Vec:
    """Parallel transport of Q into the basepoint chart along the straight
    segment; trivial on smooth ambients, rejected through singular cones."""
    if diagram.ambient.is_smooth():
        return tuple(Q)
    raise ScatteringError("structure constants need a smooth ambient")


def structure_constants(diagram: ScatteringDiagram, inputs, Q, seed: int = 0,
                        samples: int = 2, calculator: ThetaCalculator | None = None
                        ) -> TruncatedSeries:
    """chi(P_1, ..., P_n, Q) in Z[classes]/I^k, certified across
    ``samples`` independent basepoints (disagreement raises, never averages)."""
    calc = calculator or ThetaCalculator(diagram)
    inputs = [tuple(P) for P in inputs]
    Q = tuple(Q)
    values = []
    for i in range(samples):
        value = None
        for attempt in range(48):
            try:
                z = sample_basepoint(diagram, Q, seed=seed + 101 * i + 7919 * attempt)
                value = _chi_at_basepoint(calc, inputs, Q, z)
                break
            except GenericityError:
                continue
        if value is None:
            raise GenericityError(f"no generic basepoint found near {Q}")
        values.append(value)
    for other in values[1:]:
        if other != values[0]:
            raise GenericityError(
                f"structure constant unstable across basepoints: {inputs} -> {Q}")
    return values[0]


def _chi_at_basepoint(calc: ThetaCalculator, inputs, Q, z) -> TruncatedSeries:
    diagram = calc.diagram
    product = calc.product(inputs, z)
    target = transport_to_basepoint(diagram, Q, z)
    terms = {(q, (0,) * diagram.ambient.rank): c
             for (q, m), c in product.items() if m == target}
    return TruncatedSeries(diagram.monoid, diagram.ambient.rank, diagram.order, terms)


# ---------------------------------------------------------------------------
# the mirror algebra


@dataclass
class MirrorAlgebra:
    """Theta basis with structure constants over Z[classes]/I^k.

    The table is filled lazily; ``bound`` is the declared basis bound for
    reporting, and expansions landing outside it raise ``EscapeError``
    with the norm that would be needed.
    """

    diagram: ScatteringDiagram
    basis: tuple[Vec, ...]
    bound: int
    seed: int = 0
    table: dict = field(default_factory=dict)
    _calc: ThetaCalculator | None = None

    def __post_init__(self):
        if self._calc is None:
            self._calc = ThetaCalculator(self.diagram)

    @property
    def order(self) -> int:
        return self.diagram.order

    def _zero_entry(self) -> TruncatedSeries:
        return TruncatedSeries.zero(self.diagram.monoid, self.diagram.ambient.rank,
                                    self.order)

    def product(self, P1, P2, enforce_bound: bool = True):
        """Theta-basis expansion of theta_{P1} theta_{P2} as {Q: chi}."""
        P1, P2 = tuple(P1), tuple(P2)
        zero = (0,) * self.diagram.ambient.rank
        if P1 == zero or P2 == zero:
            other = P2 if P1 == zero else P1
            return {other: self.diagram.series_one()}
        key = (min(P1, P2), max(P1, P2))
        if key not in self.table:
            self.table[key] = self._expand(key)
        expansion = self.table[key]
        if enforce_bound:
            for Q in expansion:
                if max(abs(x) for x in Q) > self.bound:
                    raise EscapeError(
                        f"product {key} needs basis norm >= "
                        f"{max(abs(x) for x in Q)} (bound is {self.bound})")
        return expansion

    def entry(self, P1, P2, Q) -> TruncatedSeries:
        return self.product(P1, P2, enforce_bound=False).get(tuple(Q),
                                                             self._zero_entry())

    def _expand(self, pair):
        diagram, calc = self.diagram, self._calc
        candidates: set[Vec] = {tuple(map(sum, zip(*pair)))}
        probes = []
        for i in range(2):
            for attempt in range(48):
                try:
                    z = sample_basepoint(diagram, (1, 1),
                                         seed=self.seed + 31 * i + 977 * attempt)
                    product = calc.product(pair, z)
                    probes.append((z, product))
                    candidates |= {m for (_q, m), _c in product.items()}
                    break
                except GenericityError:
                    continue
        if not probes:
            raise GenericityError("no generic probe basepoint found")
        expansion = {}
        for Q in sorted(candidates):
            chi = structure_constants(diagram, pair, Q, seed=self.seed,
                                      calculator=calc)
            if not chi.is_zero():
                expansion[Q] = chi
        for z, product in probes:
            recombined = self._zero_entry()
            for Q, chi in expansion.items():
                theta_q = calc.theta(Q, z) if any(Q) else diagram.series_one()
                recombined = recombined + chi * theta_q
            residual = product - recombined
            if not residual.is_zero():
                needed = max(max(abs(x) for x in m) for (_q, m), _c in residual.items())
                raise EscapeError(f"expansion of {pair} incomplete; residual "
                                  f"reaches norm {needed}")
        return expansion


def build_algebra(diagram: ScatteringDiagram, bound: int, seed: int = 0,
                  populate: bool = True) -> MirrorAlgebra:
    """Mirror algebra on the integer points of the support with sup-norm
    <= bound (the unit theta at the origin included)."""
    basis = tuple(diagram.ambient.fan.integer_points(bound))
    algebra = MirrorAlgebra(diagram=diagram, basis=basis, bound=bound, seed=seed)
    if populate:
        zero = (0,) * diagram.ambient.rank
        nonzero = [P for P in basis if P != zero]
        for P1, P2 in itertools.combinations_with_replacement(nonzero, 2):
            algebra.product(P1, P2, enforce_bound=False)
    return algebra


def multiply(algebra: MirrorAlgebra, P1, P2):
    """Expansion of theta_{P1} theta_{P2}; raises EscapeError when a
    coefficient lands outside the declared bound."""
    return algebra.product(P1, P2)


# ---------------------------------------------------------------------------
# verification battery


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    checked: int
    failures: tuple[str, ...]

    def first_failure(self):
        return self.failures[0] if self.failures else None


def check_associativity(algebra: MirrorAlgebra, triples=None) -> CheckReport:
    """(theta_P1 theta_P2) theta_P3 == theta_P1 (theta_P2 theta_P3),
    expanded through the table."""
    zero = (0,) * algebra.diagram.ambient.rank
    if triples is None:
        basis = [P for P in algebra.basis if P != zero]
        triples = list(itertools.combinations_with_replacement(basis, 3))
    failures = []
    checked = 0
    for P1, P2, P3 in triples:
        checked += 1
        try:
            lhs = _expand_iterated(algebra, P1, P2, P3)
            rhs = _expand_iterated(algebra, P2, P3, P1)
        except EscapeError as exc:
            failures.append(f"{(P1, P2, P3)}: {exc}")
            continue
        if lhs != rhs:
            failures.append(f"associativity fails on {(P1, P2, P3)}")
    return CheckReport(passed=not failures, checked=checked, failures=tuple(failures))


def _expand_iterated(algebra, Pa, Pb, Pc):
    total = {}
    for R, chi1 in algebra.product(Pa, Pb, enforce_bound=False).items():
        for S, chi2 in algebra.product(R, Pc, enforce_bound=False).items():
            total[S] = total.get(S, algebra._zero_entry()) + chi1 * chi2
    return {S: v for S, v in total.items() if not v.is_zero()}


def cone_coordinate_pairing(fan: Fan):
    """P -> its coordinates over the rays of its smallest containing cone,
    indexed by all rays (the PL pairing 'one weight per ray')."""

    def pairing(P):
        out = [Fraction(0)] * len(fan.rays)
        if any(P):
            loc = fan.locate(P)
            cone = RationalCone(tuple(fan.rays[i] for i in loc.face))
            for idx, coord in zip(loc.face, cone.coordinates(loc.point)):
                out[idx] = coord
        return tuple(out)

    return pairing


def linear_pairing(matrix: Matrix):
    def pairing(P):
        return tuple(Fraction(dot(row, P)) for row in matrix)
    return pairing


def check_grading(algebra: MirrorAlgebra, w_points, w_classes) -> CheckReport:
    """w(Q) + w(gamma) == sum_j w(P_j) for every monomial of every nonzero
    table entry.  ``w_classes``: one pairing row per monoid generator."""
    width = len(w_points((0,) * algebra.diagram.ambient.rank))
    failures = []
    checked = 0
    for (P1, P2), expansion in sorted(algebra.table.items()):
        rhs = tuple(a + b for a, b in zip(w_points(P1), w_points(P2)))
        for Q, chi in sorted(expansion.items()):
            wq = w_points(Q)
            for (q, _m), _c in chi.items():
                checked += 1
                wg = [0] * width
                for mult, row in zip(q, w_classes):
                    for i, entry in enumerate(row):
                        wg[i] += mult * entry
                lhs = tuple(a + b for a, b in zip(wq, wg))
                if lhs != rhs:
                    failures.append(f"grading fails: chi{(P1, P2)} -> {Q} "
                                    f"at class {q}: {lhs} != {rhs}")
    return CheckReport(passed=not failures, checked=checked, failures=tuple(failures))


def check_convexity(algebra: MirrorAlgebra, F: PLFunction,
                    ample: bool = False) -> CheckReport:
    """F(Q) <= F(P1) + F(P2) on every nonzero entry, F extended piecewise
    linearly over cone coordinates.  With ``ample`` every equality case
    must be the unit entry (class zero, coefficient one)."""
    fan = algebra.diagram.ambient.fan
    failures = []
    checked = 0
    for (P1, P2), expansion in sorted(algebra.table.items()):
        bound = F.value(fan, P1) + F.value(fan, P2)
        for Q, chi in sorted(expansion.items()):
            checked += 1
            fq = F.value(fan, Q)
            if fq > bound:
                failures.append(f"convexity fails: F{Q} = {fq} > {bound} "
                                f"from chi{(P1, P2)}")
            elif ample and fq == bound and not chi.is_one():
                failures.append(f"ample equality case not the unit: "
                                f"chi{(P1, P2)} -> {Q} = {chi!r}")
    return CheckReport(passed=not failures, checked=checked, failures=tuple(failures))


def absolutize(algebra: MirrorAlgebra):
    """Integer table (classes sent to 1) plus a stability flag comparing
    the collapse at orders k and k-1."""
    mon = algebra.diagram.monoid
    k = algebra.order
    table = {}
    stable = True
    for (P1, P2), expansion in sorted(algebra.table.items()):
        for Q, chi in sorted(expansion.items()):
            total = sum(c for _t, c in chi.items())
            lower = sum(c for (q, _m), c in chi.items() if mon.order(q) < k - 1)
            if total != lower:
                stable = False
            if total:
                table[(P1, P2, Q)] = total
    return table, stable


def _ceil(x: Fraction) -> int:
    return -((-x) // 1)


def rees_levels(algebra: MirrorAlgebra, W: PLFunction) -> dict[Vec, int]:
    """Minimal filtration level per basis point: least l >= 0 with
    W(P) >= -l."""
    fan = algebra.diagram.ambient.fan
    return {P: max(0, _ceil(-W.value(fan, P))) for P in algebra.basis}


def rees_filtration(algebra: MirrorAlgebra, W: PLFunction):
    """Levels plus multiplicativity: level(Q) <= level(P1) + level(P2) on
    every nonzero entry (sublinearity of -W on the table)."""
    levels = rees_levels(algebra, W)
    fan = algebra.diagram.ambient.fan

    def level(P):
        if P not in levels:
            levels[P] = max(0, _ceil(-W.value(fan, P)))
        return levels[P]

    failures = []
    checked = 0
    for (P1, P2), expansion in sorted(algebra.table.items()):
        for Q in sorted(expansion):
            checked += 1
            if level(Q) > level(P1) + level(P2):
                failures.append(f"filtration fails: level{Q}={level(Q)} > "
                                f"level{P1} + level{P2}")
    report = CheckReport(passed=not failures, checked=checked, failures=tuple(failures))
    return levels, report
