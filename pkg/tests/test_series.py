import random

import pytest

from mirroralg.series import (CurveClassMonoid, RingContextError,
                              TruncatedSeries, UnitError)

T = CurveClassMonoid(("t",), (1,))
T2 = CurveClassMonoid(("t1", "t2"), (1, 1))


def mono(monoid, k, q, m, c=1):
    return TruncatedSeries.monomial(monoid, 2, k, q, m, c)


def one(monoid, k):
    return TruncatedSeries.one(monoid, 2, k)


def test_monoid_validation():
    with pytest.raises(ValueError):
        CurveClassMonoid(("t",), (0,))
    with pytest.raises(ValueError):
        CurveClassMonoid(("t", "t"), (1, 1))
    assert T.order((3,)) == 3
    w = CurveClassMonoid(("a", "b"), (1, 2))
    assert w.order((1, 2)) == 5


def test_mul_difference_of_squares():
    a = one(T, 3) + mono(T, 3, (1,), (1, 0))
    b = one(T, 3) - mono(T, 3, (1,), (1, 0))
    assert a * b == one(T, 3) - mono(T, 3, (2,), (2, 0))


def test_mul_identity_and_truncation():
    a = one(T, 2) + mono(T, 2, (1,), (1, 0))
    assert a * one(T, 2) == a
    # truncation drops the t^2 term
    assert a * a == one(T, 2) + mono(T, 2, (1,), (1, 0), 2)


def test_pow_examples():
    a = one(T, 3) + mono(T, 3, (1,), (0, 1))
    sq = a**2
    assert sq == one(T, 3) + mono(T, 3, (1,), (0, 1), 2) + mono(T, 3, (2,), (0, 2))
    assert a**0 == one(T, 3)
    assert (a.truncate(2))**-1 == one(T, 2) - mono(T, 2, (1,), (0, 1))


def test_invert_geometric_series():
    a = one(T, 3) + mono(T, 3, (1,), (1, 0))
    inv = a.invert()
    assert inv == one(T, 3) - mono(T, 3, (1,), (1, 0)) + mono(T, 3, (2,), (2, 0))
    assert (a * inv).is_one()
    assert one(T, 3).invert() == one(T, 3)


def test_invert_rejects_nonunits():
    with pytest.raises(UnitError):
        mono(T, 3, (0,), (1, 0)).invert()
    bad = one(T, 3) + mono(T, 3, (0,), (1, 0))  # class-order-0 non-constant
    with pytest.raises(UnitError):
        bad.invert()
    with pytest.raises(UnitError):
        (2 * one(T, 3)).invert()


def test_ring_context_checked():
    with pytest.raises(RingContextError):
        one(T, 3) + one(T, 4)
    with pytest.raises(RingContextError):
        one(T, 3) * one(T2, 3)


def _random_series(rng, monoid, k, nterms=4):
    terms = {}
    for _ in range(nterms):
        q = tuple(rng.randrange(0, k) for _ in monoid.names)
        m = (rng.randrange(-2, 3), rng.randrange(-2, 3))
        terms[(q, m)] = terms.get((q, m), 0) + rng.randrange(-3, 4)
    return TruncatedSeries(monoid, 2, k, terms)


def test_ring_axioms_randomized():
    rng = random.Random(7)
    for _ in range(40):
        k = rng.choice([2, 3, 4])
        a = _random_series(rng, T2, k)
        b = _random_series(rng, T2, k)
        c = _random_series(rng, T2, k)
        assert a * b == b * a
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c


def test_truncation_is_ring_homomorphism():
    rng = random.Random(11)
    for _ in range(25):
        a = _random_series(rng, T, 5)
        b = _random_series(rng, T, 5)
        assert (a * b).truncate(3) == (a.truncate(3) * b.truncate(3)).truncate(3)


def test_pow_additivity():
    a = one(T2, 4) + mono(T2, 4, (1, 0), (1, 0)) + mono(T2, 4, (0, 1), (0, 1), -1)
    for m, n in [(2, 3), (0, 4), (1, 1), (-1, 2), (-2, -1)]:
        assert a**(m + n) == a**m * a**n


def test_canonical_form_unique():
    a = mono(T, 4, (1,), (1, 0)) + mono(T, 4, (0,), (0, 0)) + mono(T, 4, (2,), (-1, 2))
    b = mono(T, 4, (2,), (-1, 2)) + mono(T, 4, (1,), (1, 0)) + one(T, 4)
    assert a == b
    assert a.items() == b.items()
    # zero coefficients are never stored
    c = a - a
    assert c.is_zero() and len(c) == 0


def test_set_classes_to_zero():
    s = one(T2, 3) + mono(T2, 3, (1, 1), (1, 1))
    assert s.set_classes_to_zero() == {(0, 0): 1, (1, 1): 1}
    assert one(T2, 3).set_classes_to_zero() == {(0, 0): 1}
    s2 = mono(T, 3, (1,), (1, 0)) + mono(T, 3, (2,), (1, 0))
    assert s2.set_classes_to_zero() == {(1, 0): 2}
    cancel = mono(T, 3, (1,), (1, 0)) - mono(T, 3, (2,), (1, 0))
    assert cancel.set_classes_to_zero() == {}
