"""Verification suites: Monte Carlo checks of the hierarchy theorems and
model fidelity.

Each suite returns a JSON-ready report {suite, pass, checks: [...]} where
every check carries estimate, target, and tolerance.  Tolerances follow
the acceptance gates: drifts and correlations within three standard
errors, covariance entries within 5% relative, model second moments
within 10%, histogram modes within 15% of +-0.45 sigma.
"""

from __future__ import annotations

import numpy as np

from .construct import ConstructionConfig, construct
from .kernels import ConvolutionChain
from .simulate import SimConfig, simulate_hierarchy, simulate_spde, simulate_weak_model
from .stats import default_transient, histogram_modes, increment_statistics
from .weak import reduce_model

HIERARCHY_DEFAULTS = dict(dt=1e-3, t_final=50.0, trajectories=10_000, record_every=1000)


def _hierarchy_config(chain: ConvolutionChain, seed: int, threads, overrides: dict) -> SimConfig:
    opts = dict(HIERARCHY_DEFAULTS)
    opts.update(overrides)
    return SimConfig(seed=seed, sigma=1.0, threads=threads, **opts)


def _check(name: str, estimate: float, target: float, tol: float, kind: str) -> dict:
    ok = abs(estimate - target) <= tol
    return {"name": name, "estimate": estimate, "target": target,
            "tolerance": tol, "tolerance_kind": kind, "pass": bool(ok)}


def drift_suite(chain: ConvolutionChain, s: int, seed: int = 20080902,
                threads=None, window: float = 1.0, **overrides) -> dict:
    """Drift of y_1 is s/2, all other drifts vanish; variance rate matches LL^T."""
    cfg = _hierarchy_config(chain, seed, threads, overrides)
    ens = simulate_hierarchy(chain, s, cfg)
    stats = increment_statistics(ens, window)
    checks = []
    for m, (est, se, target) in enumerate(zip(stats["drift"]["estimate"],
                                              stats["drift"]["std_error"],
                                              stats["drift"]["target"]), start=1):
        checks.append(_check(f"drift[y{m}]", est, target, 3 * se, "3*SE"))
    est = stats["covariance"]["estimate"][0][0]
    target = stats["covariance"]["target"][0][0]
    checks.append(_check("variance_rate[y1]", est, target, 0.05 * abs(target), "5% relative"))
    return _report("drift", chain, s, cfg, stats, checks)


def covariance_suite(chain: ConvolutionChain, s: int, seed: int = 20080902,
                     threads=None, window: float = 1.0, **overrides) -> dict:
    """Cov(Delta Y)/Delta t matches LL^T within 5% per entry."""
    cfg = _hierarchy_config(chain, seed, threads, overrides)
    ens = simulate_hierarchy(chain, s, cfg)
    stats = increment_statistics(ens, window)
    n = len(chain)
    checks = []
    for i in range(n):
        for j in range(i, n):
            est = stats["covariance"]["estimate"][i][j]
            target = stats["covariance"]["target"][i][j]
            checks.append(_check(f"cov[y{i + 1},y{j + 1}]", est, target,
                                 0.05 * abs(target), "5% relative"))
    return _report("covariance", chain, s, cfg, stats, checks)


def decorrelation_suite(chain: ConvolutionChain, s: int, seed: int = 20080902,
                        threads=None, window: float = 1.0, **overrides) -> dict:
    """Increments of Y are uncorrelated with the driving increments W and Wh."""
    cfg = _hierarchy_config(chain, seed, threads, overrides)
    ens = simulate_hierarchy(chain, s, cfg)
    stats = increment_statistics(ens, window)
    se = stats["correlations"]["std_error"]
    checks = [_check(f"corr[{name}]", est, 0.0, 3 * se, "3*SE")
              for name, est in stats["correlations"]["estimate"].items()]
    return _report("decorrelation", chain, s, cfg, stats, checks)


def _report(suite: str, chain, s, cfg: SimConfig, stats: dict, checks: list) -> dict:
    return {"suite": suite,
            "chain": [str(r) for r in chain.rates],
            "s": s,
            "config": {"dt": cfg.dt, "t_final": cfg.t_final,
                       "trajectories": cfg.trajectories, "seed": cfg.seed,
                       "window": stats["window"], "transient": stats["transient"],
                       "samples": stats["samples"]},
            "pass": all(c["pass"] for c in checks),
            "checks": checks}


def stationary_second_moment(ens, column: str, transient: float) -> float:
    times = ens.times
    keep = times >= transient
    return float(np.mean(ens.column(column)[:, keep] ** 2))


def fidelity_suite(seed: int = 20080902, threads=None, modes: int = 8,
                   sigma: float = 0.2, bimodal_sigma: float = 0.5,
                   quick: bool = False) -> dict:
    """Second moment of the PDE amplitude vs the weak model; weak-model bimodality.

    The PDE runs the Galerkin truncation at the given mode count; the weak
    model is reduced from the (6, 3, modes) derivation.  The bimodality
    check histograms a long weak-model run at bimodal_sigma and asks for
    two modes within 15% of +-0.45 sigma.
    """
    model = construct(ConstructionConfig(4 if quick else 6, 3, modes))
    weak = reduce_model(model.evolution)

    spde_cfg = SimConfig(dt=0.005, t_final=150.0 if quick else 600.0,
                         trajectories=24 if quick else 64, seed=seed, sigma=sigma,
                         modes=modes, record_every=100, threads=threads)
    spde_ens = simulate_spde(spde_cfg)
    weak_cfg = SimConfig(dt=0.01, t_final=300.0 if quick else 2000.0,
                         trajectories=64 if quick else 256, seed=seed + 1, sigma=sigma,
                         modes=modes, record_every=100, threads=threads)
    weak_ens = simulate_weak_model(weak, weak_cfg)

    transient = 50.0
    m_spde = stationary_second_moment(spde_ens, "a1", transient)
    m_weak = stationary_second_moment(weak_ens, "a", transient)
    checks = [_check("second_moment[a]", m_spde, m_weak, 0.10 * abs(m_weak), "10% relative")]

    bi_cfg = SimConfig(dt=0.01, t_final=1000.0 if quick else 4000.0,
                       trajectories=64 if quick else 128, seed=seed + 2,
                       sigma=bimodal_sigma, modes=modes, record_every=200, threads=threads)
    bi_ens = simulate_weak_model(weak, bi_cfg)
    keep = bi_ens.times >= transient
    samples = bi_ens.column("a")[:, keep].ravel()
    modes_found = histogram_modes(samples)
    target = 0.45 * bimodal_sigma
    pos = [m for m in modes_found[:2] if m > 0]
    neg = [m for m in modes_found[:2] if m < 0]
    bimodal = bool(pos and neg
                   and abs(pos[0] - target) <= 0.15 * target
                   and abs(neg[0] + target) <= 0.15 * target)
    checks.append({"name": "bimodal_modes", "estimate": modes_found[:2],
                   "target": [target, -target], "tolerance": 0.15 * target,
                   "tolerance_kind": "15% of 0.45*sigma", "pass": bimodal})

    return {"suite": "fidelity", "sigma": sigma, "modes": modes,
            "config": {"seed": seed,
                       "spde": {"dt": spde_cfg.dt, "t_final": spde_cfg.t_final,
                                "trajectories": spde_cfg.trajectories},
                       "weak": {"dt": weak_cfg.dt, "t_final": weak_cfg.t_final,
                                "trajectories": weak_cfg.trajectories}},
            "pass": all(c["pass"] for c in checks),
            "checks": checks}
