"""Truncated power series in (a, sigma) with noise-expression coefficients.

FieldSeries holds the subgrid field u = v(a, x, t, sigma) as a sine series:
one NoiseExpr per (a-power, sigma-power, wavenumber).  EvolutionSeries
holds the amplitude equation da/dt = g(a, t, sigma), one NoiseExpr per
(a-power, sigma-power).  Entries at or above the truncation orders are
rejected; field wavenumbers are capped at mode_cutoff + 2*(order_a - 1),
beyond which modes cannot feed back into retained orders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .noise import NoiseExpr

SCHEMA_VERSION = 1


def wave_bound(order_a: int, order_sigma: int, mode_cutoff: int) -> int:
    return mode_cutoff + 2 * (order_a - 1)


@dataclass
class FieldSeries:
    order_a: int
    order_sigma: int
    mode_cutoff: int
    coeffs: dict = field(default_factory=dict)  # (p, q, k) -> NoiseExpr

    @property
    def max_wavenumber(self) -> int:
        return wave_bound(self.order_a, self.order_sigma, self.mode_cutoff)

    def retains(self, p: int, q: int, k: int) -> bool:
        return 0 <= p < self.order_a and 0 <= q < self.order_sigma and 1 <= k <= self.max_wavenumber

    def get(self, p: int, q: int, k: int) -> NoiseExpr:
        return self.coeffs.get((p, q, k), NoiseExpr.zero())

    def add(self, p: int, q: int, k: int, expr: NoiseExpr) -> None:
        if not self.retains(p, q, k):
            raise KeyError(f"entry (a^{p} sigma^{q}, sin {k}x) outside truncation")
        new = self.coeffs.get((p, q, k), NoiseExpr.zero()) + expr
        if new.is_zero:
            self.coeffs.pop((p, q, k), None)
        else:
            self.coeffs[(p, q, k)] = new

    def items(self):
        return self.coeffs.items()

    def __eq__(self, other) -> bool:
        return (isinstance(other, FieldSeries)
                and (self.order_a, self.order_sigma, self.mode_cutoff)
                == (other.order_a, other.order_sigma, other.mode_cutoff)
                and self.coeffs == other.coeffs)

    def to_json(self) -> dict:
        entries = [{"a": p, "sigma": q, "wavenumber": k, "expr": e.to_json()}
                   for (p, q, k), e in sorted(self.coeffs.items())]
        return {"order_a": self.order_a, "order_sigma": self.order_sigma,
                "mode_cutoff": self.mode_cutoff, "entries": entries}

    @classmethod
    def from_json(cls, data: dict) -> "FieldSeries":
        out = cls(data["order_a"], data["order_sigma"], data["mode_cutoff"])
        for e in data["entries"]:
            out.add(e["a"], e["sigma"], e["wavenumber"], NoiseExpr.from_json(e["expr"]))
        return out


@dataclass
class EvolutionSeries:
    order_a: int
    order_sigma: int
    coeffs: dict = field(default_factory=dict)  # (p, q) -> NoiseExpr

    def retains(self, p: int, q: int) -> bool:
        return 0 <= p < self.order_a and 0 <= q < self.order_sigma

    def get(self, p: int, q: int) -> NoiseExpr:
        return self.coeffs.get((p, q), NoiseExpr.zero())

    def add(self, p: int, q: int, expr: NoiseExpr) -> None:
        if not self.retains(p, q):
            raise KeyError(f"entry a^{p} sigma^{q} outside truncation")
        new = self.coeffs.get((p, q), NoiseExpr.zero()) + expr
        if new.is_zero:
            self.coeffs.pop((p, q), None)
        else:
            self.coeffs[(p, q)] = new

    def items(self):
        return self.coeffs.items()

    def __eq__(self, other) -> bool:
        return (isinstance(other, EvolutionSeries)
                and (self.order_a, self.order_sigma) == (other.order_a, other.order_sigma)
                and self.coeffs == other.coeffs)

    def to_json(self) -> dict:
        entries = [{"a": p, "sigma": q, "expr": e.to_json()}
                   for (p, q), e in sorted(self.coeffs.items())]
        return {"order_a": self.order_a, "order_sigma": self.order_sigma, "entries": entries}

    @classmethod
    def from_json(cls, data: dict) -> "EvolutionSeries":
        out = cls(data["order_a"], data["order_sigma"])
        for e in data["entries"]:
            out.add(e["a"], e["sigma"], NoiseExpr.from_json(e["expr"]))
        return out
