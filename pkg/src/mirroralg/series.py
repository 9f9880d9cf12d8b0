"""Exact truncated series: the coefficient ring for wall functions and thetas.

Elements live in Z[Q + M] / I^k where Q is a free commutative monoid of
curve classes with positive integer degree weights, M is a lattice of
Laurent exponents, and I is the ideal spanned by monomials with nonzero
curve-class part.  A term t^q z^m is stored iff ord(q) < k, where
ord(q) = sum(degree_i * q_i).  Lattice exponents are never truncated;
only the curve-class order counts against k.

All coefficients are exact Python integers.  Series are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

Vec = tuple[int, ...]
Term = tuple[Vec, Vec]  # (curve-class exponent q, lattice exponent m)


class RingContextError(ValueError):
    """Mismatched monoid, lattice rank, or truncation order."""


class UnitError(ValueError):
    """Inversion of a series whose constant part is not +/-1, or which
    carries a class-order-zero term besides the constant."""


@dataclass(frozen=True)
class CurveClassMonoid:
    """Free commutative monoid on named generators with degree weights.

    Elements are tuples of non-negative ints, one slot per generator.
    ``degrees`` (all >= 1) weight the truncation order.  The optional
    ``divisor_pairing`` row per generator records intersection numbers
    against boundary-divisor indices; it is only consumed by grading
    checks, never by the ring arithmetic.
    """

    names: tuple[str, ...]
    degrees: tuple[int, ...]
    divisor_pairing: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("generator names must be distinct")
        if len(self.degrees) != len(self.names):
            raise ValueError("need one degree per generator")
        if any(d < 1 for d in self.degrees):
            raise ValueError("degrees must be >= 1 (strict convexity)")
        if self.divisor_pairing is not None and len(self.divisor_pairing) != len(self.names):
            raise ValueError("divisor_pairing needs one row per generator")

    @property
    def ngens(self) -> int:
        return len(self.names)

    def zero(self) -> Vec:
        return (0,) * self.ngens

    def order(self, q: Vec) -> int:
        if len(q) != self.ngens or any(e < 0 for e in q):
            raise ValueError(f"not a monoid element: {q!r}")
        return sum(d * e for d, e in zip(self.degrees, q))

    def add(self, q1: Vec, q2: Vec) -> Vec:
        return tuple(a + b for a, b in zip(q1, q2))


TRIVIAL_MONOID = CurveClassMonoid((), ())


def _vec_add(a: Vec, b: Vec) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


class TruncatedSeries:
    """Sparse element of Z[Q + M]/I^k.

    ``terms`` maps (q, m) -> nonzero int coefficient; canonical order is
    lex on (ord(q), q, m).  Supports +, -, *, ** (any integer power for
    units), and exact equality.
    """

    __slots__ = ("monoid", "rank", "order", "_terms")

    def __init__(self, monoid: CurveClassMonoid, rank: int, order: int, terms=None):
        if order < 1:
            raise ValueError("truncation order must be >= 1")
        self.monoid = monoid
        self.rank = rank
        self.order = order
        clean: dict[Term, int] = {}
        for (q, m), c in (terms or {}).items():
            q, m = tuple(q), tuple(m)
            if len(m) != rank:
                raise ValueError(f"lattice exponent {m!r} has wrong rank")
            if c != 0 and monoid.order(q) < order:
                clean[(q, m)] = clean.get((q, m), 0) + c
                if clean[(q, m)] == 0:
                    del clean[(q, m)]
        self._terms = clean

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, monoid, rank, order):
        return cls(monoid, rank, order, {})

    @classmethod
    def one(cls, monoid, rank, order):
        return cls(monoid, rank, order, {(monoid.zero(), (0,) * rank): 1})

    @classmethod
    def monomial(cls, monoid, rank, order, q, m, c=1):
        return cls(monoid, rank, order, {(tuple(q), tuple(m)): c})

    def _new(self, terms) -> "TruncatedSeries":
        return TruncatedSeries(self.monoid, self.rank, self.order, terms)

    # -- inspection ---------------------------------------------------

    def items(self):
        """Terms in canonical order: lex on (ord(q), q, m)."""
        key = lambda it: (self.monoid.order(it[0][0]), it[0][0], it[0][1])
        return tuple(sorted(self._terms.items(), key=key))

    def coefficient(self, q, m) -> int:
        return self._terms.get((tuple(q), tuple(m)), 0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_one(self) -> bool:
        unit = ((self.monoid.zero(), (0,) * self.rank), 1)
        return len(self._terms) == 1 and next(iter(self._terms.items())) == unit

    def constant_coefficient(self) -> int:
        return self._terms.get((self.monoid.zero(), (0,) * self.rank), 0)

    def min_positive_order(self) -> int | None:
        """Smallest class-order among terms with ord(q) > 0."""
        orders = [self.monoid.order(q) for (q, _m) in self._terms if self.monoid.order(q) > 0]
        return min(orders) if orders else None

    def lattice_support(self):
        return sorted({m for (_q, m) in self._terms})

    def __iter__(self):
        return iter(self.items())

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    # -- ring structure -----------------------------------------------

    def _check(self, other):
        if (self.monoid, self.rank, self.order) != (other.monoid, other.rank, other.order):
            raise RingContextError("series live in different rings")

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.monoid, self.rank, self.order) == (other.monoid, other.rank, other.order) \
            and self._terms == other._terms

    def __hash__(self):
        return hash((self.monoid, self.rank, self.order, frozenset(self._terms.items())))

    def __add__(self, other):
        self._check(other)
        terms = dict(self._terms)
        for key, c in other._terms.items():
            terms[key] = terms.get(key, 0) + c
        return self._new(terms)

    def __neg__(self):
        return self._new({key: -c for key, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return self._new({key: other * c for key, c in self._terms.items()})
        self._check(other)
        mon, k = self.monoid, self.order
        out: dict[Term, int] = {}
        for (q1, m1), c1 in self._terms.items():
            o1 = mon.order(q1)
            for (q2, m2), c2 in other._terms.items():
                if o1 + mon.order(q2) >= k:
                    continue
                key = (mon.add(q1, q2), _vec_add(m1, m2))
                out[key] = out.get(key, 0) + c1 * c2
        return self._new(out)

    __rmul__ = __mul__

    def invert(self) -> "TruncatedSeries":
        """Inverse of u + h where u = +/-1 and every term of h has
        class-order >= 1; geometric series, <= k-1 rounds."""
        u = self.constant_coefficient()
        if u not in (1, -1):
            raise UnitError(f"constant term {u} is not a unit integer")
        h_terms = {key: c for key, c in self._terms.items()
                   if key != (self.monoid.zero(), (0,) * self.rank)}
        if any(self.monoid.order(q) == 0 for (q, _m) in h_terms):
            raise UnitError("non-constant term of class-order zero blocks inversion")
        h = self._new(h_terms)
        # (u + h)^-1 = u^-1 * sum_i (-u^-1 h)^i ; u^-1 == u here.
        minus_uh = (-u) * h
        result = TruncatedSeries.one(self.monoid, self.rank, self.order)
        power = TruncatedSeries.one(self.monoid, self.rank, self.order)
        for _ in range(self.order - 1):
            power = power * minus_uh
            if power.is_zero():
                break
            result = result + power
        return u * result

    def __pow__(self, n: int) -> "TruncatedSeries":
        if not isinstance(n, int):
            raise TypeError("series powers must be integers")
        base = self
        if n < 0:
            base, n = self.invert(), -n
        result = TruncatedSeries.one(self.monoid, self.rank, self.order)
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- order changes and class collapse --------------------------------

    def truncate(self, new_order: int) -> "TruncatedSeries":
        if new_order > self.order:
            raise RingContextError("cannot raise the truncation order")
        return TruncatedSeries(self.monoid, self.rank, new_order, self._terms)

    def set_classes_to_zero(self) -> dict[Vec, int]:
        """Send every t^q to 1 and collect per lattice exponent.

        At fixed truncation order the sum is finite by construction;
        zero totals are dropped.
        """
        out: dict[Vec, int] = {}
        for (_q, m), c in self._terms.items():
            out[m] = out.get(m, 0) + c
            if out[m] == 0:
                del out[m]
        return out

    def class_part(self) -> "TruncatedSeries":
        """Forget lattice exponents onto m = 0 (used for table entries)."""
        out: dict[Term, int] = {}
        zero_m = (0,) * self.rank
        for (q, _m), c in self._terms.items():
            key = (q, zero_m)
            out[key] = out.get(key, 0) + c
        return self._new(out)

    # -- display ------------------------------------------------------

    def __repr__(self):
        if self.is_zero():
            return "0"
        bits = []
        for (q, m), c in self.items():
            factors = []
            for name, e in zip(self.monoid.names, q):
                if e:
                    factors.append(f"{name}^{e}" if e != 1 else name)
            if any(m):
                factors.append(f"z^{m}")
            body = "*".join(factors)
            if not body:
                bits.append(str(c))
            elif c == 1:
                bits.append(body)
            elif c == -1:
                bits.append(f"-{body}")
            else:
                bits.append(f"{c}*{body}")
        return " + ".join(bits).replace("+ -", "- ")
