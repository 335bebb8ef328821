"""Iterative construction of the stochastic centre-manifold model.

The element PDE is u_t = -u u_x + u_xx + u + sigma*phi on [0, pi] with
u = 0 at the ends and phi the sine-series white noise.  Solutions are
sought as u = v(a, x, t, sigma) with da/dt = g(a, t, sigma): each pass
evaluates the residual of the PDE at the current approximation, absorbs
sin(kx) components (k >= 2) into the field through the history
convolution H_k, and splits sin(x) components between the field and the
evolution via the solvability rule, until the residual vanishes for all
retained monomials a^p sigma^q (p < order_a, q < order_sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

from .noise import NoiseExpr, conv_apply, _merge_primary, make_atom
from .rat import Q
from .series import EvolutionSeries, FieldSeries, wave_bound


class NonConvergence(RuntimeError):
    """Residual order failed to increase between passes (implementation bug)."""


@dataclass(frozen=True)
class ConstructionConfig:
    """Truncation orders: keep a^p sigma^q for p < order_a, q < order_sigma;
    retain noise modes phi_1 .. phi_mode_cutoff."""

    order_a: int
    order_sigma: int
    mode_cutoff: int

    def __post_init__(self):
        if self.order_a < 2:
            raise ValueError("order_a must be >= 2")
        if self.order_sigma < 1:
            raise ValueError("order_sigma must be >= 1")
        if self.order_sigma > 3:
            raise ValueError("order_sigma > 3 needs noise degree > 2, outside the algebra")
        if self.mode_cutoff < 1:
            raise ValueError("mode_cutoff must be >= 1")

    @property
    def max_wavenumber(self) -> int:
        return wave_bound(self.order_a, self.order_sigma, self.mode_cutoff)


@dataclass
class ReducedModel:
    field: FieldSeries
    evolution: EvolutionSeries
    config: ConstructionConfig
    residual_order: tuple

    def to_json(self) -> dict:
        from .series import SCHEMA_VERSION

        return {"schema_version": SCHEMA_VERSION,
                "kind": "reduced_model",
                "config": {"order_a": self.config.order_a,
                           "order_sigma": self.config.order_sigma,
                           "mode_cutoff": self.config.mode_cutoff},
                "residual_order": list(self.residual_order),
                "field": self.field.to_json(),
                "evolution": self.evolution.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "ReducedModel":
        cfg = ConstructionConfig(**data["config"])
        return cls(field=FieldSeries.from_json(data["field"]),
                   evolution=EvolutionSeries.from_json(data["evolution"]),
                   config=cfg,
                   residual_order=tuple(data["residual_order"]))


def galerkin_advection(coeffs: dict, order_a: int, order_sigma: int, max_wavenumber: int) -> dict:
    """Sine-series projection of -u u_x for u given as {(p, q, k): NoiseExpr}.

    Uses sin(jx) cos(lx) = [sin((j+l)x) + sin((j-l)x)]/2; wavenumbers above
    max_wavenumber and monomials at or above the truncation orders drop.
    """
    acc: dict = {}
    entries = [(p, q, k, e) for (p, q, k), e in coeffs.items() if not e.is_zero]
    n = len(entries)
    for i1 in range(n):
        p1, q1, j, v1 = entries[i1]
        for i2 in range(i1, n):
            p2, q2, l, v2 = entries[i2]
            p, q = p1 + p2, q1 + q2
            if p >= order_a or q >= order_sigma:
                continue
            # unordered pair (j, l) of u u_x = (u^2)_x / 2:
            # sin(jx) sin(lx) -> cos|j-l|x - cos(j+l)x, halved; d/dx and the
            # overall -1/2 give +m/4 on the difference line, -m/4 on the sum,
            # doubled for distinct entry pairs.
            pairweight = Q(1, 4) if i1 == i2 else Q(1, 2)
            targets = []
            if j + l <= max_wavenumber:
                targets.append((j + l, -pairweight * (j + l)))
            if j != l and abs(j - l) <= max_wavenumber:
                targets.append((abs(j - l), pairweight * abs(j - l)))
            if not targets:
                continue
            for pa, ca in v1.terms:
                for pb, cb in v2.terms:
                    prim = _merge_primary(pa, pb)
                    w = ca * cb
                    for k, s in targets:
                        cell = acc.setdefault((p, q, k), {})
                        cell[prim] = cell.get(prim, 0) + w * s
    return _finalize(acc)


def _finalize(acc: dict) -> dict:
    out = {}
    for cell, terms in acc.items():
        expr = NoiseExpr._from_dict(terms)
        if not expr.is_zero:
            out[cell] = expr
    return out


def _residual_cells(field: dict, evol: dict, cfg: ConstructionConfig) -> dict:
    """Residual u_t + u u_x - u_xx - u - sigma*phi as {(p, q, k): NoiseExpr}."""
    P, Qs, W = cfg.order_a, cfg.order_sigma, cfg.max_wavenumber
    acc: dict = {}

    def add_expr(cell, expr, scale=None):
        if expr.is_zero:
            return
        slot = acc.setdefault(cell, {})
        for prim, c in expr.terms:
            slot[prim] = slot.get(prim, 0) + (c if scale is None else c * scale)

    for (p, q, k), v in field.items():
        # explicit time dependence of the noise coefficients
        add_expr((p, q, k), v.ddt())
        # -u_xx - u contributes (k^2 - 1) * coefficient
        if k != 1:
            add_expr((p, q, k), v, Q(k * k - 1))
        # chain rule through da/dt = g
        if p >= 1:
            for (p2, q2), gexpr in evol.items():
                pp, qq = p - 1 + p2, q + q2
                if pp >= P or qq >= Qs:
                    continue
                slot = acc.setdefault((pp, qq, k), {})
                for pa, ca in v.terms:
                    for pb, cb in gexpr.terms:
                        prim = _merge_primary(pa, pb)
                        slot[prim] = slot.get(prim, 0) + p * ca * cb
    # advection: residual carries +u u_x = -(galerkin projection of -u u_x)
    for cell, expr in galerkin_advection(field, P, Qs, W).items():
        add_expr(cell, expr, Q(-1))
    # forcing -sigma*phi
    if Qs > 1:
        for k in range(1, cfg.mode_cutoff + 1):
            slot = acc.setdefault((0, 1, k), {})
            prim = (make_atom(k),)
            slot[prim] = slot.get(prim, 0) - 1
    return _finalize(acc)


def residual(model: ReducedModel) -> FieldSeries:
    """Residual of the element PDE evaluated on (field, evolution)."""
    cfg = model.config
    cells = _residual_cells(dict(model.field.items()), dict(model.evolution.items()), cfg)
    out = FieldSeries(cfg.order_a, cfg.order_sigma, cfg.mode_cutoff)
    for (p, q, k), expr in cells.items():
        out.add(p, q, k, expr)
    return out


def construct(config: ConstructionConfig) -> ReducedModel:
    """Fixed-point iteration from v = a sin x, g = 0 to vanishing residual.

    sin(kx) residual components (k >= 2) convolve into the field; sin(x)
    components split between the field's sin(x) coefficient and the
    evolution.  Terminates when no retained monomial has a residual.
    """
    P, Qs, K = config.order_a, config.order_sigma, config.mode_cutoff
    field: dict = {(1, 0, 1): NoiseExpr.unit(1)}
    evol: dict = {}

    last_order = -1
    max_passes = (P - 1) + 2 * (Qs - 1) + 3
    for _ in range(max_passes):
        cells = _residual_cells(field, evol, config)
        if not cells:
            break
        order = min(p + 2 * q for (p, q, _k) in cells)
        if order <= last_order:
            raise NonConvergence(
                f"residual order stalled at a^p sigma^q weight {order}")
        last_order = order
        for (p, q, k), rexpr in cells.items():
            target = -rexpr
            if k >= 2:
                corr = conv_apply(target, Q(k * k - 1))
                field[(p, q, k)] = field.get((p, q, k), NoiseExpr.zero()) + corr
            else:
                fpart, epart = target.split()
                if not fpart.is_zero:
                    field[(p, q, 1)] = field.get((p, q, 1), NoiseExpr.zero()) + fpart
                if not epart.is_zero:
                    evol[(p, q)] = evol.get((p, q), NoiseExpr.zero()) + epart
        field = {c: e for c, e in field.items() if not e.is_zero}
        evol = {c: e for c, e in evol.items() if not e.is_zero}
    else:
        raise NonConvergence(f"residual nonzero after {max_passes} passes")

    fs = FieldSeries(P, Qs, K)
    for (p, q, k), e in field.items():
        fs.add(p, q, k, e)
    es = EvolutionSeries(P, Qs)
    for (p, q), e in evol.items():
        es.add(p, q, e)
    return ReducedModel(field=fs, evolution=es, config=config, residual_order=(P, Qs))
