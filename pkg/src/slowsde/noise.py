"""Exact algebra of white-noise expressions.

An expression is a rational linear combination of products (noise degree
at most two) of white-noise atoms ``phi_k`` and exponential history
convolutions ``H[beta]`` applied to them.  For the Burgers element the
convolution attached to wavenumber m decays at rate ``beta = m**2 - 1``;
arbitrary positive rational rates are also supported so the canonical
hierarchy can reuse the same type.

The two structural operations are the exact time derivative (``ddt``,
using d/dt H[b]X = -b H[b]X + X plus the Leibniz rule) and the
solvability split that separates a neutral-mode forcing into a field
part (a total time derivative) and an irreducible evolution part.

Factors are interned: constructing an equal factor twice returns the
same object, with the sort key, hash and noise degree precomputed.  The
iterative model construction performs millions of term merges, and these
caches are what keep it fast.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator

from .rat import Q, qparse, qstr


class DegreeOverflow(ValueError):
    """Noise degree above two is outside the algebra."""


class NonDifferentiable(ValueError):
    """d/dt of a bare white-noise atom is not defined here."""


class Atom:
    """White noise attached to spatial mode sin(mode*x); mode >= 1."""

    __slots__ = ("mode", "key", "deg", "_hash")

    def __init__(self, mode: int):
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "key", (0, mode))
        object.__setattr__(self, "deg", 1)
        object.__setattr__(self, "_hash", hash((0, mode)))

    def __setattr__(self, *args):
        raise AttributeError("Atom is immutable")

    def __eq__(self, other):
        return self is other or (type(other) is Atom and other.mode == self.mode)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Atom({self.mode})"


class Conv:
    """Convolution of the product ``inner`` with exp(-rate*t) over past history."""

    __slots__ = ("rate", "inner", "key", "deg", "_hash")

    def __init__(self, rate, inner: tuple):
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "inner", inner)
        key = (1, rate) + tuple(f.key for f in inner)
        object.__setattr__(self, "key", key)
        object.__setattr__(self, "deg", sum(f.deg for f in inner))
        object.__setattr__(self, "_hash", hash(key))

    def __setattr__(self, *args):
        raise AttributeError("Conv is immutable")

    def __eq__(self, other):
        return self is other or (type(other) is Conv and other.key == self.key)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Conv({self.rate}, {self.inner!r})"


Factor = Atom | Conv
Primary = tuple  # sorted tuple of factors; () is the deterministic unit

_INTERN: dict = {}


def make_atom(mode: int) -> Atom:
    if mode < 1:
        raise ValueError(f"atom mode must be >= 1, got {mode}")
    cached = _INTERN.get((0, mode))
    if cached is None:
        cached = _INTERN[(0, mode)] = Atom(mode)
    return cached


def make_conv(rate, inner: Iterable) -> Conv:
    rate = Q(rate)
    if rate <= 0:
        raise ValueError(f"convolution rate must be positive, got {rate}")
    inner = _sorted_primary(tuple(inner))
    if not inner:
        raise ValueError("convolution of the deterministic unit folds into the coefficient")
    key = (1, rate) + tuple(f.key for f in inner)
    cached = _INTERN.get(key)
    if cached is None:
        cached = _INTERN[key] = Conv(rate, inner)
    return cached


def mode_conv(mode: int, inner: Iterable) -> Conv:
    """Convolution H_m with the Burgers decay rate m**2 - 1 (m >= 2)."""
    if mode < 2:
        raise ValueError("mode-1 has zero decay rate and is never convolved")
    return make_conv(Q(mode * mode - 1), inner)


def conv_mode(rate) -> int | None:
    """Wavenumber m with rate == m**2 - 1, if one exists (m >= 2)."""
    if rate.denominator != 1:
        return None
    n = int(rate) + 1
    m = math.isqrt(n)
    return m if m * m == n and m >= 2 else None


def encode(factor) -> tuple:
    """Total order on factors: preorder traversal of the tree."""
    return factor.key


def degree(primary) -> int:
    return sum(f.deg for f in primary)


def _sorted_primary(factors: tuple) -> Primary:
    n = len(factors)
    if n <= 1:
        return factors
    if n == 2:
        a, b = factors
        return factors if a.key <= b.key else (b, a)
    return tuple(sorted(factors, key=lambda f: f.key))


def _merge_primary(pa: tuple, pb: tuple) -> Primary:
    if not pa:
        return pb
    if not pb:
        return pa
    return _sorted_primary(pa + pb)


class NoiseExpr:
    """Canonical rational combination of degree-<=2 noise primaries.

    Immutable; equal expressions compare (and hash) identically.  Terms
    are kept sorted by (degree, factor keys) with zero coefficients
    removed, so the representation is a unique normal form.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=()):
        # internal: terms assumed canonical; use from_terms for raw input
        self._terms = tuple(terms)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple]) -> "NoiseExpr":
        acc = {}
        for primary, coeff in terms:
            primary = _sorted_primary(tuple(primary))
            acc[primary] = acc.get(primary, 0) + Q(coeff)
        return cls._from_dict(acc)

    @classmethod
    def _from_dict(cls, acc: dict) -> "NoiseExpr":
        items = []
        for primary, coeff in acc.items():
            if coeff == 0:
                continue
            d = degree(primary)
            if d > 2:
                raise DegreeOverflow(f"term of noise degree {d}: {primary}")
            items.append((primary, coeff))
        items.sort(key=_term_key)
        return cls(items)

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls) -> "NoiseExpr":
        return cls()

    @classmethod
    def unit(cls, coeff=1) -> "NoiseExpr":
        coeff = Q(coeff)
        return cls((((), coeff),)) if coeff != 0 else cls()

    @classmethod
    def atom(cls, mode: int, coeff=1) -> "NoiseExpr":
        coeff = Q(coeff)
        return cls((((make_atom(mode),), coeff),)) if coeff != 0 else cls()

    # -- views ----------------------------------------------------------

    @property
    def terms(self) -> tuple:
        return self._terms

    def coefficient(self, primary) -> object:
        primary = _sorted_primary(tuple(primary))
        for p, c in self._terms:
            if p == primary:
                return c
        return Q(0)

    def noise_degree(self) -> int:
        return max((degree(p) for p, _ in self._terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def __iter__(self) -> Iterator[tuple]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, NoiseExpr) and self._terms == other._terms

    def __hash__(self) -> int:
        return hash(self._terms)

    def __repr__(self) -> str:
        return f"NoiseExpr({self.pretty()})"

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other: "NoiseExpr") -> "NoiseExpr":
        if not isinstance(other, NoiseExpr):
            return NotImplemented
        acc = dict(self._terms)
        for p, c in other._terms:
            acc[p] = acc.get(p, 0) + c
        return NoiseExpr._from_dict(acc)

    def __sub__(self, other: "NoiseExpr") -> "NoiseExpr":
        return self + (-other)

    def __neg__(self) -> "NoiseExpr":
        return NoiseExpr(tuple((p, -c) for p, c in self._terms))

    def scale(self, coeff) -> "NoiseExpr":
        coeff = Q(coeff)
        if coeff == 0:
            return NoiseExpr()
        return NoiseExpr(tuple((p, c * coeff) for p, c in self._terms))

    def __mul__(self, coeff) -> "NoiseExpr":
        return self.scale(coeff)

    __rmul__ = __mul__

    def mul(self, other: "NoiseExpr") -> "NoiseExpr":
        """Expression product; raises DegreeOverflow above degree two."""
        acc = {}
        for pa, ca in self._terms:
            for pb, cb in other._terms:
                p = _merge_primary(pa, pb)
                acc[p] = acc.get(p, 0) + ca * cb
        return NoiseExpr._from_dict(acc)

    # -- calculus -------------------------------------------------------

    def ddt(self) -> "NoiseExpr":
        """Exact time derivative.

        Uses d/dt H[b]X = -b H[b]X + X on convolutions and the Leibniz
        rule on products; a bare atom raises NonDifferentiable.
        """
        acc = {}
        for primary, c in self._terms:
            if not primary:
                continue  # constants differentiate to zero
            for dcoeff, dprimary in _ddt_primary(primary):
                acc[dprimary] = acc.get(dprimary, 0) + c * dcoeff
        return NoiseExpr._from_dict(acc)

    def split(self) -> tuple["NoiseExpr", "NoiseExpr"]:
        """Solvability split into (field, evolution) with self == ddt(field) + evolution.

        Deterministic terms and terms carrying a bare atom factor are
        irreducible and go wholly to the evolution; an outer convolution
        H[b]X contributes -X'/b to the field and recursively splits X/b;
        a product of two convolved factors does the same with the rate
        sum and the two one-layer-peeled products.
        """
        field: dict = {}
        evol: dict = {}
        for primary, c in self._terms:
            _split_term(primary, c, field, evol)
        return NoiseExpr._from_dict(field), NoiseExpr._from_dict(evol)

    # -- serialisation and display ---------------------------------------

    def to_json(self) -> dict:
        return {"terms": [{"coeff": qstr(c), "factors": [_factor_json(f) for f in p]}
                          for p, c in self._terms]}

    @classmethod
    def from_json(cls, data: dict) -> "NoiseExpr":
        terms = []
        for entry in data["terms"]:
            primary = tuple(_factor_parse(f) for f in entry["factors"])
            terms.append((primary, qparse(entry["coeff"])))
        return cls.from_terms(terms)

    def pretty(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for p, c in self._terms:
            body = "*".join(factor_label(f) for f in p)
            if not body:
                piece = qstr(c)
            elif c == 1:
                piece = body
            elif c == -1:
                piece = f"-{body}"
            else:
                piece = f"{qstr(c)}*{body}"
            parts.append(piece)
        out = parts[0]
        for piece in parts[1:]:
            out += f" - {piece[1:]}" if piece.startswith("-") else f" + {piece}"
        return out


def _term_key(term):
    primary = term[0]
    return (degree(primary), tuple(f.key for f in primary))


def canonicalize(expr: NoiseExpr) -> NoiseExpr:
    """Re-canonicalise an expression (idempotent by construction)."""
    return NoiseExpr.from_terms(expr.terms)


def _ddt_primary(primary):
    if len(primary) == 1:
        f = primary[0]
        if type(f) is Atom:
            raise NonDifferentiable(f"cannot differentiate bare atom phi_{f.mode}")
        return [(-f.rate, primary), (Q(1), f.inner)]
    out = []
    for idx, f in enumerate(primary):
        if type(f) is Atom:
            raise NonDifferentiable(f"cannot differentiate bare atom phi_{f.mode}")
        rest = primary[:idx] + primary[idx + 1:]
        out.append((-f.rate, primary))
        out.append((Q(1), _merge_primary(f.inner, rest)))
    return out


def _split_term(primary, coeff, field: dict, evol: dict) -> None:
    if not primary or any(type(f) is Atom for f in primary):
        evol[primary] = evol.get(primary, 0) + coeff
        return
    if len(primary) == 1:
        rate = primary[0].rate
        r = coeff / rate
        field[primary] = field.get(primary, 0) - r
        _split_term(primary[0].inner, r, field, evol)
        return
    f, g = primary
    r = coeff / (f.rate + g.rate)
    field[primary] = field.get(primary, 0) - r
    _split_term(_merge_primary(f.inner, (g,)), r, field, evol)
    _split_term(_merge_primary((f,), g.inner), r, field, evol)


def conv_apply(expr: NoiseExpr, rate) -> NoiseExpr:
    """Apply the history convolution with exp(-rate*t) to every term.

    On the deterministic unit the convolution integrates to 1/rate, so
    constants fold into the coefficient instead of nesting.
    """
    rate = Q(rate)
    if rate <= 0:
        raise ValueError(f"convolution rate must be positive, got {rate}")
    acc = {}
    for primary, c in expr.terms:
        if not primary:
            acc[()] = acc.get((), 0) + c / rate
        else:
            p = (make_conv(rate, primary),)
            acc[p] = acc.get(p, 0) + c
    return NoiseExpr._from_dict(acc)


def mode_conv_apply(expr: NoiseExpr, mode: int) -> NoiseExpr:
    if mode < 2:
        raise ValueError("mode-1 has zero decay rate and is never convolved")
    return conv_apply(expr, Q(mode * mode - 1))


def factor_label(factor) -> str:
    if type(factor) is Atom:
        return f"phi{factor.mode}"
    body = "*".join(factor_label(f) for f in factor.inner)
    if len(factor.inner) > 1:
        body = f"({body})"
    m = conv_mode(factor.rate)
    head = f"H{m}" if m is not None else f"H[{qstr(factor.rate)}]"
    return f"{head}[{body}]"


def _factor_json(factor) -> dict:
    if type(factor) is Atom:
        return {"atom": factor.mode}
    inner = [_factor_json(f) for f in factor.inner]
    m = conv_mode(factor.rate)
    if m is not None:
        return {"conv": m, "inner": inner}
    return {"conv_rate": qstr(factor.rate), "inner": inner}


def _factor_parse(data: dict):
    if "atom" in data:
        return make_atom(data["atom"])
    inner = [_factor_parse(f) for f in data["inner"]]
    if "conv" in data:
        return mode_conv(data["conv"], inner)
    return make_conv(qparse(data["conv_rate"]), inner)
