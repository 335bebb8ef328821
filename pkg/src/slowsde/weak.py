"""Transform a strong reduced model into a weak one.

Each quadratic noise term c * phi_j H[...]H[...] phi_i in the evolution
is the derivative of a y-process of the canonical hierarchy.  Over long
times that process has drift s/2 (only when i == j and there is a single
convolution) and fluctuations driven by new independent white noises
psi, one per (outer atom, inner atom, chain prefix), with coefficients
given by the rows of the Cholesky factor of the hierarchy's diffusion
matrix.  Summing coefficients of shared psi processes exactly and taking
the root-sum-square per monomial gives the effective noise amplitudes of
the weak model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import ConvolutionChain, cholesky
from .noise import Atom, Conv
from .rat import Q, qparse, qstr
from .series import EvolutionSeries

EXACT_CHOLESKY_MAX = 4  # closed-form L available up to this chain length


class StructureError(ValueError):
    """Evolution term does not have the one-bare-one-convolved shape."""


class RangeError(ValueError):
    """Closed-form constant requested outside its valid wavenumber range."""


@dataclass(frozen=True)
class QuadraticNoiseTerm:
    a_power: int
    sigma_power: int
    coeff: object  # rational
    outer: int  # bare atom j
    inner: int  # driving atom i
    chain: ConvolutionChain  # rates innermost-first

    @property
    def monomial(self) -> tuple:
        return (self.a_power, self.sigma_power)


@dataclass(frozen=True)
class PsiId:
    """Shared effective noise: same (j, i) and same leading chain rates."""

    outer: int
    inner: int
    prefix: tuple  # rates innermost-first

    def label(self) -> str:
        rates = ",".join(qstr(r) for r in self.prefix)
        return f"psi[{self.outer};{self.inner};{rates}]"


@dataclass
class PsiCoefficient:
    """Coefficient of one psi in one monomial: exact/sqrt(two_beta) + extra.

    ``exact`` stays rational while every contribution comes through a
    closed-form Cholesky row (chain length <= 4); contributions from
    longer chains land in the binary64 ``extra``.
    """

    two_beta: object
    exact: object = 0
    extra: float = 0.0

    @property
    def value(self) -> float:
        return float(self.exact) / math.sqrt(float(self.two_beta)) + self.extra

    @property
    def is_exact(self) -> bool:
        return self.extra == 0.0


@dataclass
class WeakModel:
    """Drift polynomial, retained bare noises, and effective psi noises."""

    drift: dict = field(default_factory=dict)       # (p, q) -> rational
    resonance: dict = field(default_factory=dict)   # (p, q) -> rational, subset of drift
    bare: dict = field(default_factory=dict)        # (p, q) -> {atom: rational}
    psi: dict = field(default_factory=dict)         # (p, q) -> {PsiId: PsiCoefficient}

    def amplitude(self, p: int, q: int) -> float:
        coeffs = self.psi.get((p, q))
        if not coeffs:
            return 0.0
        return math.sqrt(sum(c.value ** 2 for c in coeffs.values()))

    def amplitudes(self) -> dict:
        return {mono: self.amplitude(*mono) for mono in sorted(self.psi)}

    def amplitude_squared_exact(self, p: int, q: int):
        """Exact rational amplitude^2, available when every psi there is exact."""
        coeffs = self.psi.get((p, q), {})
        total = Q(0)
        for c in coeffs.values():
            if not c.is_exact:
                raise ValueError("monomial has contributions from chains without closed-form L")
            total += Q(c.exact) ** 2 / Q(c.two_beta)
        return total

    def to_json(self) -> dict:
        drift = [{"a": p, "sigma": q, "coeff": qstr(c)} for (p, q), c in sorted(self.drift.items())]
        resonance = [{"a": p, "sigma": q, "coeff": qstr(c), "decimal": float(c)}
                     for (p, q), c in sorted(self.resonance.items())]
        bare = [{"a": p, "sigma": q, "atom": k, "coeff": qstr(c)}
                for (p, q), atoms in sorted(self.bare.items()) for k, c in sorted(atoms.items())]
        effective = []
        for (p, q), coeffs in sorted(self.psi.items()):
            entry = {"a": p, "sigma": q, "amplitude": self.amplitude(p, q), "psi": []}
            for pid, c in sorted(coeffs.items(), key=lambda kv: (kv[0].outer, kv[0].inner, kv[0].prefix)):
                rec = {"outer": pid.outer, "inner": pid.inner,
                       "chain": [qstr(r) for r in pid.prefix],
                       "two_beta": qstr(Q(c.two_beta)), "value": c.value}
                if c.is_exact:
                    rec["coeff"] = qstr(Q(c.exact))
                entry["psi"].append(rec)
            effective.append(entry)
        return {"drift": drift, "stochastic_resonance": resonance,
                "bare_noise": bare, "effective_noise": effective}

    @classmethod
    def from_json(cls, data: dict) -> "WeakModel":
        out = cls()
        for rec in data["drift"]:
            out.drift[(rec["a"], rec["sigma"])] = qparse(rec["coeff"])
        for rec in data["stochastic_resonance"]:
            out.resonance[(rec["a"], rec["sigma"])] = qparse(rec["coeff"])
        for rec in data["bare_noise"]:
            out.bare.setdefault((rec["a"], rec["sigma"]), {})[rec["atom"]] = qparse(rec["coeff"])
        for entry in data["effective_noise"]:
            mono = (entry["a"], entry["sigma"])
            slot = out.psi.setdefault(mono, {})
            for rec in entry["psi"]:
                pid = PsiId(rec["outer"], rec["inner"], tuple(qparse(r) for r in rec["chain"]))
                if "coeff" in rec:
                    slot[pid] = PsiCoefficient(two_beta=qparse(rec["two_beta"]),
                                               exact=qparse(rec["coeff"]))
                else:
                    slot[pid] = PsiCoefficient(two_beta=qparse(rec["two_beta"]),
                                               extra=rec["value"])
        return out


def extract_quadratic_terms(g: EvolutionSeries) -> list:
    """Quadratic noise terms of the evolution, chains read innermost-first."""
    out = []
    for (p, q), expr in sorted(g.items()):
        for primary, coeff in expr.terms:
            if _primary_degree(primary) != 2:
                continue
            out.append(_parse_quadratic(p, q, primary, coeff))
    return out


def _primary_degree(primary) -> int:
    return sum(f.deg for f in primary)


def _parse_quadratic(p: int, q: int, primary, coeff) -> QuadraticNoiseTerm:
    if len(primary) != 2:
        raise StructureError(f"quadratic term without a bare factor: {primary}")
    kinds = [type(f) for f in primary]
    if kinds.count(Atom) != 1:
        what = "two bare factors" if kinds.count(Atom) == 2 else "no bare factor"
        raise StructureError(f"quadratic term with {what}: {primary}")
    atom = primary[0] if kinds[0] is Atom else primary[1]
    conv = primary[1] if kinds[0] is Atom else primary[0]
    rates = []
    node = conv
    while type(node) is Conv:
        rates.append(node.rate)
        if len(node.inner) != 1:
            raise StructureError(f"convolved factor is not a pure chain: {conv}")
        node = node.inner[0]
    chain = ConvolutionChain(tuple(reversed(rates)))  # innermost rate first
    return QuadraticNoiseTerm(a_power=p, sigma_power=q, coeff=coeff,
                              outer=atom.mode, inner=node.mode, chain=chain)


def reduce_model(g: EvolutionSeries) -> WeakModel:
    """Weak model: drift from stochastic resonance, psi noises from Cholesky rows.

    Deterministic terms pass into the drift; degree-one terms must be
    bare atoms and are retained verbatim; each quadratic term of chain
    length m spreads over psi levels 1..m with the coefficients of the
    m-th Cholesky row, plus a drift contribution c/2 when the term is a
    single self-convolution (i == j, m == 1).
    """
    model = WeakModel()
    for (p, q), expr in sorted(g.items()):
        for primary, coeff in expr.terms:
            deg = _primary_degree(primary)
            if deg == 0:
                model.drift[(p, q)] = model.drift.get((p, q), Q(0)) + coeff
            elif deg == 1:
                if len(primary) != 1 or type(primary[0]) is not Atom:
                    raise StructureError(
                        f"degree-one term with a convolution survived the reduction: {primary}")
                slot = model.bare.setdefault((p, q), {})
                slot[primary[0].mode] = slot.get(primary[0].mode, Q(0)) + coeff
            else:
                term = _parse_quadratic(p, q, primary, coeff)
                _apply_quadratic(model, term)
    model.drift = {k: v for k, v in model.drift.items() if v != 0}
    return model


def _apply_quadratic(model: WeakModel, term: QuadraticNoiseTerm) -> None:
    mono = term.monomial
    m = len(term.chain)
    if term.inner == term.outer and m == 1:
        half = term.coeff / 2
        model.drift[mono] = model.drift.get(mono, Q(0)) + half
        model.resonance[mono] = model.resonance.get(mono, Q(0)) + half
    L = cholesky(term.chain)
    slot = model.psi.setdefault(mono, {})
    for level in range(1, m + 1):
        pid = PsiId(term.outer, term.inner, term.chain.rates[:level])
        two_beta = 2 * term.chain.rates[level - 1]
        coeff = slot.get(pid)
        if coeff is None:
            coeff = slot[pid] = PsiCoefficient(two_beta=two_beta)
        if L.coeffs is not None:
            coeff.exact = Q(coeff.exact) + term.coeff * L.coeffs[m - 1][level - 1]
        else:
            coeff.extra += float(term.coeff) * L.values[m - 1, level - 1]


# -- closed-form constants of the full-spectrum model --------------------

def c0(k: int):
    """Self-interaction coefficient of phi_k H_k phi_k at a sigma^2, k >= 3."""
    if k < 3:
        raise RangeError(f"c0 is defined for k >= 3, got {k}")
    return Q(1) / (2 * (k * k - 1) * (2 * k * k - 2 * k - 1) * (2 * k * k + 2 * k - 1))


def cstar(k: int):
    """Cross coefficient of phi_{k+1} H_{k-1} phi_{k-1} + phi_{k-1} H_{k+1} phi_{k+1}, k >= 3."""
    if k < 3:
        raise RangeError(f"cstar is defined for k >= 3, got {k}")
    return Q(4 * k ** 4 - 2 * k * k + 1) / (
        12 * k * k * (2 * k * k - 2 * k - 1) * (2 * k * k + 2 * k - 1))


def cpm(k: int, sign: int):
    """Nested-convolution coefficients c+_k (sign=+1, k >= 2) and c-_k (sign=-1, k >= 4)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if sign == 1 and k < 2:
        raise RangeError(f"c+ is defined for k >= 2, got {k}")
    if sign == -1 and k < 4:
        raise RangeError(f"c- is defined for k >= 4, got {k}")
    return Q(k + sign) / (4 * (2 * k * k + sign * 2 * k - 1))


def stochastic_resonance(modes: int):
    """Drift coefficient of sigma^2 a for noise truncated at the given mode count.

    Returns (exact, decimal): (1/18 - 1/44 + sum_{k=3}^{modes} c0_k) / 2.
    """
    if modes < 2:
        raise RangeError("the resonance sum needs at least modes phi_1, phi_2")
    total = Q(1, 18) - Q(1, 44)
    for k in range(3, modes + 1):
        total += c0(k)
    exact = total / 2
    return exact, float(exact)


def equilibria(model: WeakModel, sigma: float, max_power: int | None = None):
    """Stationary amplitudes of the deterministic drift at the given sigma.

    Returns the real roots, always including a = 0; max_power truncates
    the drift polynomial (e.g. 3 for the cubic-only balance).
    """
    powers: dict = {}
    for (p, q), c in model.drift.items():
        if max_power is not None and p > max_power:
            continue
        powers[p] = powers.get(p, 0.0) + float(c) * sigma ** q
    if not powers:
        return np.array([0.0])
    top = max(powers)
    coeffs = [powers.get(p, 0.0) for p in range(top, -1, -1)]
    roots = np.roots(coeffs)
    real = sorted({0.0} | {float(r.real) for r in roots if abs(r.imag) < 1e-9 * max(1.0, abs(r))})
    return np.array(real)
