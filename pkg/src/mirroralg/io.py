"""Problem files, diagram files, and deterministic JSON serialization.

One self-contained text format covers every artifact.  Rational numbers
are written as strings ("3/4", "-2"); integers stay JSON integers.
Serialization is canonical: walls, terms, and keys are emitted in sorted
order, so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .geometry import (AffineManifold, Fan, GeometryError, PLFunction,
                       build_affine_structure_dim2, plane_manifold,
                       toric_manifold)
from .scattering import ScatteringDiagram, ScatteringError, Wall
from .series import CurveClassMonoid, TruncatedSeries


class InputError(ValueError):
    """Malformed input; the message names the offending field."""


def frac_to_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def str_to_frac(s) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"not a rational number: {s!r}") from exc


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# series and walls


def series_to_json(series: TruncatedSeries):
    return [{"q": list(q), "m": list(m), "c": c} for (q, m), c in series.items()]


def series_from_json(terms, monoid, rank, order) -> TruncatedSeries:
    table = {}
    for i, term in enumerate(terms):
        try:
            q, m, c = tuple(term["q"]), tuple(term["m"]), int(term["c"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"function term {i}: needs fields q, m, c") from exc
        table[(q, m)] = table.get((q, m), 0) + c
    return TruncatedSeries(monoid, rank, order, table)


def wall_to_json(wall: Wall):
    out = {
        "apex": [frac_to_str(x) for x in wall.apex],
        "direction": list(wall.direction),
        "normal": list(wall.normal),
        "full_line": wall.full_line,
        "function": series_to_json(wall.function),
    }
    if wall.cone_index is not None:
        out["cone_index"] = wall.cone_index
    return out


def wall_from_json(data, monoid, rank, order, index: int) -> Wall:
    try:
        apex = tuple(str_to_frac(x) for x in data.get("apex", ["0"] * rank))
        direction = tuple(data["direction"])
        function = series_from_json(data["function"], monoid, rank, order)
    except KeyError as exc:
        raise InputError(f"wall {index}: missing field {exc.args[0]!r}") from exc
    normal = tuple(data["normal"]) if "normal" in data else None
    full_line = bool(data.get("full_line", False))
    try:
        if normal is None:
            from .geometry import rot90
            normal = rot90(direction)
        return Wall(apex=apex, direction=direction, normal=normal,
                    function=function, full_line=full_line,
                    cone_index=data.get("cone_index"))
    except (ScatteringError, GeometryError) as exc:
        raise InputError(f"wall {index}: {exc}") from exc


# ---------------------------------------------------------------------------
# geometry and monoid


def geometry_to_json(am: AffineManifold):
    if am.self_intersections is not None:
        return {"rank": 2, "affine": {"self_intersections": list(am.self_intersections)}}
    return {
        "rank": am.fan.rank,
        "affine": "toric",
        "rays": [list(r) for r in am.fan.rays],
        "maximal_cones": [list(c) for c in am.fan.maximal_cones],
        "complete": am.fan.complete,
    }


def geometry_from_json(data) -> AffineManifold:
    if not isinstance(data, dict):
        raise InputError("geometry: expected an object")
    affine = data.get("affine", "toric")
    if isinstance(affine, dict):
        seq = affine.get("self_intersections")
        if seq is None:
            raise InputError("geometry.affine: needs self_intersections")
        try:
            return build_affine_structure_dim2(seq)
        except GeometryError as exc:
            raise InputError(f"geometry.affine.self_intersections: {exc}") from exc
    if affine == "plane":
        return plane_manifold()
    if affine != "toric":
        raise InputError(f"geometry.affine: unknown value {affine!r}")
    try:
        rays = tuple(tuple(r) for r in data["rays"])
        cones = tuple(tuple(c) for c in data["maximal_cones"])
    except KeyError as exc:
        raise InputError(f"geometry: missing field {exc.args[0]!r}") from exc
    rank = int(data.get("rank", len(rays[0]) if rays else 2))
    try:
        fan = Fan(rank=rank, rays=rays, maximal_cones=cones,
                  complete=bool(data.get("complete", True)))
        return toric_manifold(fan)
    except GeometryError as exc:
        raise InputError(f"geometry: {exc}") from exc


def monoid_to_json(monoid: CurveClassMonoid):
    out = {"generators": [{"name": n, "degree": d}
                          for n, d in zip(monoid.names, monoid.degrees)]}
    if monoid.divisor_pairing is not None:
        out["divisor_pairing"] = [list(row) for row in monoid.divisor_pairing]
    return out


def monoid_from_json(data) -> CurveClassMonoid:
    if data is None:
        return CurveClassMonoid((), ())
    gens = data.get("generators", [])
    try:
        names = tuple(g["name"] for g in gens)
        degrees = tuple(int(g["degree"]) for g in gens)
    except (KeyError, TypeError) as exc:
        raise InputError("monoid.generators: each needs name and degree") from exc
    pairing = data.get("divisor_pairing")
    if pairing is not None:
        pairing = tuple(tuple(int(x) for x in row) for row in pairing)
    try:
        return CurveClassMonoid(names, degrees, pairing)
    except ValueError as exc:
        raise InputError(f"monoid: {exc}") from exc


# ---------------------------------------------------------------------------
# problems and diagrams


@dataclass(frozen=True)
class ProblemSpec:
    """Parsed problem: geometry, coefficient monoid, initial walls, and
    run parameters.  A fixed seed makes every run fully deterministic."""

    ambient: AffineManifold
    monoid: CurveClassMonoid
    order: int
    walls: tuple[Wall, ...]
    kinks: tuple = ()
    basis_bound: int = 2
    seed: int = 0
    grading_points: object = None        # "identity" | matrix rows | None
    grading_classes: tuple = ()
    convexity_functions: tuple = ()      # (PLFunction, ample_flag) pairs
    raw: dict = field(default_factory=dict)

    def diagram(self) -> ScatteringDiagram:
        return ScatteringDiagram(ambient=self.ambient, monoid=self.monoid,
                                 order=self.order, walls=self.walls,
                                 kinks=self.kinks)


def problem_from_json(data) -> ProblemSpec:
    if not isinstance(data, dict):
        raise InputError("problem: expected a JSON object")
    if "geometry" not in data:
        raise InputError("problem: missing field 'geometry'")
    ambient = geometry_from_json(data["geometry"])
    monoid = monoid_from_json(data.get("monoid"))
    try:
        order = int(data["order"])
    except KeyError as exc:
        raise InputError("problem: missing field 'order'") from exc
    if order < 1:
        raise InputError("problem.order: must be >= 1")
    walls = tuple(wall_from_json(w, monoid, ambient.rank, order, i)
                  for i, w in enumerate(data.get("walls", [])))
    kinks = []
    for i, entry in enumerate(data.get("kinks", [])):
        try:
            kinks.append((int(entry["ray"]), tuple(int(x) for x in entry["class"])))
        except (KeyError, TypeError) as exc:
            raise InputError(f"kinks[{i}]: needs fields ray and class") from exc
    grading = data.get("grading", {}) or {}
    g_points = grading.get("points")
    if isinstance(g_points, list):
        g_points = tuple(tuple(int(x) for x in row) for row in g_points)
    g_classes = tuple(tuple(int(x) for x in row)
                      for row in grading.get("classes", []))
    convexity = []
    for i, entry in enumerate(data.get("convexity", [])):
        try:
            coeffs = tuple(int(x) for x in entry["coefficients"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"convexity[{i}]: needs integer coefficients") from exc
        convexity.append((PLFunction(coeffs), bool(entry.get("ample", False))))
    return ProblemSpec(ambient=ambient, monoid=monoid, order=order, walls=walls,
                       kinks=tuple(kinks),
                       basis_bound=int(data.get("basis_bound", 2)),
                       seed=int(data.get("seed", 0)),
                       grading_points=g_points,
                       grading_classes=g_classes,
                       convexity_functions=tuple(convexity),
                       raw=data)


def problem_to_json(spec: ProblemSpec, diagram: ScatteringDiagram | None = None):
    out = dict(spec.raw) if spec.raw else {}
    out["geometry"] = geometry_to_json(spec.ambient)
    out["monoid"] = monoid_to_json(spec.monoid)
    out["order"] = diagram.order if diagram is not None else spec.order
    out["basis_bound"] = spec.basis_bound
    out["seed"] = spec.seed
    walls = diagram.walls if diagram is not None else spec.walls
    out["walls"] = [wall_to_json(w) for w in sorted(walls, key=lambda w: w.key())]
    kinks = diagram.kinks if diagram is not None else spec.kinks
    if kinks:
        out["kinks"] = [{"ray": i, "class": list(q)} for i, q in kinks]
    return out


def load_problem(path: str) -> ProblemSpec:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return problem_from_json(data)


def save_problem(path: str, spec: ProblemSpec, diagram=None):
    with open(path, "w") as fh:
        fh.write(dumps(problem_to_json(spec, diagram)))


# ---------------------------------------------------------------------------
# complexes, thetas, tables


def complex_from_json(data):
    from .vertex import ComplexError, DualComplex, complex_from_simplices
    try:
        if "simplices" in data:
            return complex_from_simplices(
                [tuple(s) for s in data["simplices"]],
                data.get("orientations"))
        facets = tuple(tuple(tuple(row) for row in level) for level in data["facets"])
        return DualComplex(facets=facets, orientations=tuple(data["orientations"]))
    except KeyError as exc:
        raise InputError(f"complex: missing field {exc.args[0]!r}") from exc
    except ComplexError as exc:
        raise InputError(f"complex: {exc}") from exc


def theta_to_json(theta):
    return {
        "P": list(theta.direction),
        "basepoint": [frac_to_str(x) for x in theta.basepoint],
        "terms": series_to_json(theta.value),
    }


def class_element_to_json(value: TruncatedSeries):
    return [{"q": list(q), "c": c} for (q, _m), c in value.items()]


def table_to_json(algebra, max_norm: int):
    entries = []
    for (P1, P2), expansion in sorted(algebra.table.items()):
        if max(max(abs(x) for x in P1), max(abs(x) for x in P2)) > max_norm:
            continue
        for Q, chi in sorted(expansion.items()):
            entries.append({"inputs": [list(P1), list(P2)], "Q": list(Q),
                            "value": class_element_to_json(chi)})
    return {"max_norm": max_norm, "order": algebra.order, "entries": entries}
