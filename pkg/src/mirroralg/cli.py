"""Command-line interface: scattering, checking, thetas, tables, vertices.

Exit codes: 0 = success / all checks pass, 1 = a check failed (the first
counterexample is printed), 2 = malformed input (the message names the
offending field or file).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import io as mio
from .geometry import GeometryError, PLFunction, identity_matrix
from .scattering import (CompletionError, ScatteringError, complete,
                         is_consistent)
from .series import CurveClassMonoid
from .theta import (EscapeError, GenericityError, build_algebra,
                    check_associativity, check_convexity, check_grading,
                    linear_pairing, structure_constants, theta_consistency_check,
                    theta_local)
from .vertex import (ComplexError, VertexAlgebra, canonical_point,
                     check_pseudomanifold, compare_central_fibre,
                     complex_from_fan, link_homology_check)

SUITES = ("consistency", "theta", "grading", "convexity", "associativity",
          "vertex", "all")


def _parse_ints(text: str, what: str):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise mio.InputError(f"{what}: expected comma-separated integers, "
                             f"got {text!r}") from exc


def _parse_fracs(text: str, what: str):
    try:
        return tuple(Fraction(x) for x in text.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise mio.InputError(f"{what}: expected comma-separated rationals, "
                             f"got {text!r}") from exc


def _emit(args, payload: dict) -> None:
    text = mio.dumps(payload)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_scatter(args) -> int:
    spec = mio.load_problem(args.input)
    order = args.order or spec.order
    diagram = complete(spec.diagram(), order)
    mio.save_problem(args.out, spec, diagram) if args.out else \
        sys.stdout.write(mio.dumps(mio.problem_to_json(spec, diagram)))
    return 0


def _grading_data(spec):
    rank = spec.ambient.rank
    points = spec.grading_points
    if points == "identity" or (points is None and spec.monoid.ngens == 0):
        pairing = linear_pairing(identity_matrix(rank))
        width = rank
    elif points is None:
        raise mio.InputError("grading.points: required when the monoid is "
                             "nontrivial")
    else:
        pairing = linear_pairing(points)
        width = len(points)
    classes = spec.grading_classes
    if spec.monoid.ngens and len(classes) != spec.monoid.ngens:
        raise mio.InputError("grading.classes: one row per monoid generator")
    if classes and any(len(row) != width for row in classes):
        raise mio.InputError("grading.classes: row width must match the "
                             "point pairing")
    return pairing, classes


def run_suite(spec, suites, max_norm: int):
    """Run the requested invariant checks; returns (passed, report lines)."""
    lines = []
    passed = True
    diagram = spec.diagram()

    def record(name, ok, detail=""):
        nonlocal passed
        passed = passed and ok
        lines.append(f"{name}: {'PASS' if ok else 'FAIL'}"
                     + (f" ({detail})" if detail and not ok else ""))

    want = set(suites)
    if "all" in want:
        want = set(SUITES) - {"all"}

    if "consistency" in want:
        report = is_consistent(diagram)
        bad = report.first_failure()
        record("consistency", report.consistent,
               bad and f"joint {bad.joint} at order {bad.first_failure_order}")
    algebra = None
    if want & {"grading", "convexity", "associativity", "vertex"}:
        algebra = build_algebra(diagram, bound=max_norm, seed=spec.seed)
    if "theta" in want:
        failures = []
        directions = [(x, y) for x in range(-max_norm, max_norm + 1)
                      for y in range(-max_norm, max_norm + 1) if (x, y) != (0, 0)]
        for wall in diagram.walls:
            for P in directions:
                result = theta_consistency_check(diagram, wall, P, seed=spec.seed)
                if not result.consistent:
                    failures.append(f"wall {wall.direction} P={P}")
                    break
        record("theta", not failures, failures[0] if failures else "")
    if "grading" in want:
        pairing, classes = _grading_data(spec)
        report = check_grading(algebra, pairing, classes)
        record("grading", report.passed, report.first_failure() or "")
    if "convexity" in want:
        if not spec.convexity_functions:
            record("convexity", True, "")
            lines[-1] += " (no test functions declared)"
        for i, (F, ample) in enumerate(spec.convexity_functions):
            report = check_convexity(algebra, F, ample=ample)
            record(f"convexity[{i}]", report.passed, report.first_failure() or "")
    if "associativity" in want:
        report = check_associativity(algebra)
        record("associativity", report.passed, report.first_failure() or "")
    if "vertex" in want:
        try:
            complex_ = complex_from_fan(diagram.ambient.fan)
            if spec.monoid.ngens and not diagram.kinks:
                # without kink classes the reduction modulo the class
                # ideal is not the central fibre; nothing to compare
                lines.append("vertex:central-fibre: SKIP (no kink classes)")
            else:
                va = VertexAlgebra(complex_)
                equal, mismatches = compare_central_fibre(algebra, va)
                record("vertex:central-fibre", equal,
                       mismatches[0] if mismatches else "")
            pm = check_pseudomanifold(complex_)
            record("vertex:pseudomanifold", pm.passed,
                   pm.failures[0] if pm.failures else "")
            lh = link_homology_check(complex_)
            record("vertex:links", lh.passed,
                   lh.failures[0] if lh.failures else "")
        except ComplexError as exc:
            record("vertex", False, str(exc))
    return passed, lines


def cmd_check(args) -> int:
    spec = mio.load_problem(args.diagram)
    if args.suite not in SUITES:
        raise mio.InputError(f"--suite: unknown suite {args.suite!r}; "
                             f"choose from {', '.join(SUITES)}")
    passed, lines = run_suite(spec, [args.suite], args.max_norm)
    for line in lines:
        print(line)
    return 0 if passed else 1


def cmd_theta(args) -> int:
    spec = mio.load_problem(args.diagram)
    direction = _parse_ints(args.direction, "--direction")
    basepoint = _parse_fracs(args.basepoint, "--basepoint")
    theta = theta_local(spec.diagram(), direction, basepoint)
    _emit(args, mio.theta_to_json(theta))
    return 0


def cmd_multiply(args) -> int:
    spec = mio.load_problem(args.diagram)
    inputs = [_parse_ints(part, "--inputs") for part in args.inputs.split(";")]
    target = _parse_ints(args.target, "--target")
    chi = structure_constants(spec.diagram(), inputs, target, seed=spec.seed,
                              samples=args.samples)
    _emit(args, {"inputs": [list(p) for p in inputs], "Q": list(target),
                 "value": mio.class_element_to_json(chi)})
    return 0


def cmd_table(args) -> int:
    spec = mio.load_problem(args.diagram)
    algebra = build_algebra(spec.diagram(), bound=args.max_norm, seed=spec.seed)
    _emit(args, mio.table_to_json(algebra, args.max_norm))
    return 0


def cmd_vertex(args) -> int:
    try:
        with open(args.input) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise mio.InputError(f"no such file: {args.input}") from exc
    except json.JSONDecodeError as exc:
        raise mio.InputError(f"{args.input}: invalid JSON ({exc})") from exc
    complex_ = mio.complex_from_json(data)
    pm = check_pseudomanifold(complex_)
    try:
        lh = link_homology_check(complex_)
        lh_payload = {"passed": lh.passed, "checked": lh.checked,
                      "failures": list(lh.failures)}
    except ComplexError as exc:
        lh_payload = {"passed": False, "failures": [str(exc)]}
    va = VertexAlgebra(complex_)
    bound = args.max_norm
    points = _enumerate_cone_points(complex_, bound)
    table = []
    escape = []
    for i, c1 in enumerate(points):
        for c2 in points[i:]:
            try:
                product = va.multiply(c1, c2)
            except ComplexError as exc:
                escape.append(str(exc))
                continue
            table.append({"inputs": [list(_point_json(c1)), list(_point_json(c2))],
                          "value": [[list(_point_json(c)), v]
                                    for c, v in sorted(product.items())]})
    payload = {
        "pseudomanifold": {"passed": pm.passed, "boundary": list(pm.boundary),
                           "failures": list(pm.failures)},
        "links": lh_payload,
        "table": table,
        "escapes": escape,
    }
    _emit(args, payload)
    return 0 if (pm.passed and lh_payload["passed"] and not escape) else 1


def _enumerate_cone_points(complex_, bound: int):
    import itertools as it
    n = complex_.dimension
    seen = set()
    for top in range(complex_.n_simplices(n)):
        for coords in it.product(range(bound + 1), repeat=n + 1):
            if sum(coords) == 0 or sum(coords) > bound:
                continue
            from .vertex import ConePoint
            seen.add(canonical_point(complex_, ConePoint(top, coords)))
    return sorted(seen) + [(-1, 0, ())]


def _point_json(canonical):
    d, idx, coords = canonical
    return (d, idx, list(coords))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mirroralg",
        description="Scattering diagrams, theta functions, and mirror "
                    "algebras in exact arithmetic.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scatter", help="complete a diagram to a given order")
    p.add_argument("--input", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("check", help="run an invariant suite on a diagram")
    p.add_argument("--diagram", required=True)
    p.add_argument("--suite", required=True)
    p.add_argument("--max-norm", type=int, default=2)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("theta", help="local theta function record")
    p.add_argument("--diagram", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--basepoint", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("multiply", help="one structure constant")
    p.add_argument("--diagram", required=True)
    p.add_argument("--inputs", required=True,
                   help="semicolon-separated points, e.g. '1,0;0,1'")
    p.add_argument("--target", required=True)
    p.add_argument("--samples", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_multiply)

    p = sub.add_parser("table", help="structure-constant table")
    p.add_argument("--diagram", required=True)
    p.add_argument("--max-norm", type=int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("vertex", help="vertex algebra table and checks")
    p.add_argument("--input", required=True)
    p.add_argument("--max-norm", type=int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vertex)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except mio.InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (CompletionError, EscapeError, GenericityError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (ScatteringError, GeometryError, ComplexError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
