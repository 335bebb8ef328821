"""Stratonovich Monte Carlo engines.

Four systems share one Heun predictor-corrector loop: the spectral
Galerkin truncation of the element PDE, the strong reduced model with
auxiliary memory states, the weak model, and the canonical quadratic
noise hierarchy.  The Heun scheme converges to the Stratonovich solution
for the multiplicative terms, which is what produces the stochastic
resonance drift in the hierarchy runs.

Reproducibility: trajectory i draws from the Philox substream
SeedSequence(seed).spawn()[i], trajectories are integrated in fixed
blocks of BLOCK, and reductions run in trajectory order, so results are
byte-identical for a given (config, seed) regardless of thread count.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .noise import Atom, Conv, factor_label
from .series import EvolutionSeries
from .weak import StructureError, WeakModel

BLOCK = 1024       # trajectories per integration block (fixed: determinism)
CHUNK = 1000       # time steps of noise buffered per block


class StepInstability(RuntimeError):
    """A state left the configured blow-up bound."""


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_final: float
    trajectories: int
    seed: int
    sigma: float = 1.0
    modes: int = 8
    scheme: str = "heun"
    record_every: int = 100   # steps between recorded samples
    blowup: float = 1e3
    threads: int | None = None  # None: all cores

    def __post_init__(self):
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.scheme != "heun":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def steps(self) -> int:
        return max(1, round(self.t_final / self.dt))

    def digest(self) -> str:
        payload = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class PathEnsemble:
    times: np.ndarray            # (n_rec,)
    states: np.ndarray           # (trajectories, n_rec, dim)
    labels: list
    config: SimConfig
    kind: str
    meta: dict = field(default_factory=dict)

    @property
    def provenance(self) -> dict:
        return {"kind": self.kind, "config_digest": self.config.digest(),
                "seed": self.config.seed, **{k: v for k, v in self.meta.items()
                                             if isinstance(v, (int, float, str, list))}}

    def column(self, label: str) -> np.ndarray:
        return self.states[:, :, self.labels.index(label)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("trajectory,t," + ",".join(self.labels) + "\n")
            for i in range(self.states.shape[0]):
                for r, t in enumerate(self.times):
                    row = ",".join(repr(float(x)) for x in self.states[i, r])
                    fh.write(f"{i},{t!r},{row}\n")


def _stability_guard(dt: float, max_rate: float) -> None:
    if dt * max_rate > 0.5:
        raise ValueError(
            f"dt*max_decay_rate = {dt * max_rate:.3g} > 0.5: unstable explicit step")


def _trajectory_generators(seed: int, count: int):
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(s)) for s in children]


def _run_blocks(config: SimConfig, dim: int, n_noise: int, stepper, initial: np.ndarray):
    """Integrate all trajectories in fixed blocks, optionally threaded.

    ``stepper(x, noise)`` advances a (B, dim) block through noise.shape[1]
    steps, writing records via the returned callable protocol below.
    """
    M = config.trajectories
    steps = config.steps
    n_rec = steps // config.record_every + 1
    out = np.empty((M, n_rec, dim))
    gens = _trajectory_generators(config.seed, M)
    sqrt_dt = np.sqrt(config.dt)

    def run_block(lo: int, hi: int) -> None:
        x = np.repeat(initial[None, :], hi - lo, axis=0)
        out[lo:hi, 0] = x
        rec = 1
        done = 0
        while done < steps:
            n = min(CHUNK, steps - done)
            noise = np.stack([gens[i].standard_normal((n, n_noise)) for i in range(lo, hi)])
            noise *= sqrt_dt
            for s in range(n):
                x = stepper(x, noise[:, s, :])
                done += 1
                if done % config.record_every == 0:
                    out[lo:hi, rec] = x
                    rec += 1
            peak = np.max(np.abs(x))
            if peak > config.blowup:
                raise StepInstability(
                    f"|state| reached {peak:.3g} (> {config.blowup:.3g}) by t = {done * config.dt:.3g}")

    bounds = [(lo, min(lo + BLOCK, M)) for lo in range(0, M, BLOCK)]
    workers = config.threads or os.cpu_count() or 1
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run_block(*b), bounds))
    else:
        for b in bounds:
            run_block(*b)
    times = np.arange(n_rec) * (config.dt * config.record_every)
    return times, out


def _heun(x, dt, drift, diffuse, dw):
    f0 = drift(x)
    g0 = diffuse(x, dw)
    xp = x + f0 * dt + g0
    f1 = drift(xp)
    g1 = diffuse(xp, dw)
    return x + 0.5 * dt * (f0 + f1) + 0.5 * (g0 + g1)


# -- spectral Galerkin truncation of the element PDE ----------------------

def _advection_matrix(K: int) -> np.ndarray:
    """Qm[(m-1), (j-1)*K + (l-1)]: coefficient of a_j a_l in the sin(mx)
    projection of -u u_x over modes 1..K."""
    Qm = np.zeros((K, K * K))
    for j in range(1, K + 1):
        for l in range(1, K + 1):
            col = (j - 1) * K + (l - 1)
            if j + l <= K:
                m = j + l
                Qm[m - 1, col] += -m / 4.0
            if j != l and abs(j - l) >= 1:
                m = abs(j - l)
                Qm[m - 1, col] += m / 4.0
    return Qm


def simulate_spde(config: SimConfig, initial: np.ndarray | None = None) -> PathEnsemble:
    """Galerkin system da_k = [-(k^2-1) a_k + N_k(a) + sigma phi_k] dt, k <= modes."""
    K = config.modes
    _stability_guard(config.dt, K * K - 1)
    lam = -np.array([k * k - 1 for k in range(1, K + 1)], dtype=float)
    Qm = _advection_matrix(K)
    sigma = config.sigma

    def drift(a):
        outer = (a[:, :, None] * a[:, None, :]).reshape(a.shape[0], K * K)
        return lam * a + outer @ Qm.T

    def diffuse(a, dw):
        return sigma * dw

    def stepper(x, dw):
        return _heun(x, config.dt, drift, diffuse, dw)

    x0 = np.zeros(K) if initial is None else np.asarray(initial, dtype=float)
    if x0.shape != (K,):
        raise ValueError(f"initial state must have shape ({K},)")
    times, states = _run_blocks(config, K, K, stepper, x0)
    labels = [f"a{k}" for k in range(1, K + 1)]
    return PathEnsemble(times, states, labels, config, "spde", {"sigma": sigma, "modes": K})


# -- strong reduced model with auxiliary memory states --------------------

@dataclass
class StrongCompiled:
    atoms: list                  # atom modes, noise column order
    z_rates: list                # decay rate per auxiliary state
    z_sources: list              # ('atom', column) or ('z', index)
    z_labels: list
    det_terms: list              # (p, q, coeff)
    noise_terms: dict            # atom column -> list of (p, q, coeff, z index or None)


def compile_strong(g: EvolutionSeries) -> StrongCompiled:
    """Map each distinct convolved subexpression of g to one auxiliary state."""
    atoms: dict = {}
    zindex: dict = {}
    z_rates: list = []
    z_sources: list = []
    z_labels: list = []

    def atom_col(mode: int) -> int:
        return atoms.setdefault(mode, len(atoms))

    def register(conv: Conv) -> int:
        got = zindex.get(conv)
        if got is not None:
            return got
        if len(conv.inner) != 1:
            raise StructureError(f"convolved factor is not a pure chain: {conv!r}")
        inner = conv.inner[0]
        if type(inner) is Atom:
            src = ("atom", atom_col(inner.mode))
        else:
            src = ("z", register(inner))
        idx = zindex[conv] = len(z_rates)
        z_rates.append(float(conv.rate))
        z_sources.append(src)
        z_labels.append(factor_label(conv))
        return idx

    det_terms: list = []
    noise_terms: dict = {}
    for (p, q), expr in sorted(g.items()):
        for primary, coeff in expr.terms:
            kinds = [type(f) for f in primary]
            if len(primary) == 0:
                det_terms.append((p, q, float(coeff)))
            elif kinds == [Atom]:
                noise_terms.setdefault(atom_col(primary[0].mode), []).append(
                    (p, q, float(coeff), None))
            elif len(primary) == 2 and kinds.count(Atom) == 1:
                atom = primary[0] if kinds[0] is Atom else primary[1]
                conv = primary[1] if kinds[0] is Atom else primary[0]
                noise_terms.setdefault(atom_col(atom.mode), []).append(
                    (p, q, float(coeff), register(conv)))
            else:
                raise StructureError(f"term is not deterministic, bare, or one-bare-one-convolved: {primary}")
    ordered = sorted(atoms, key=atoms.get)
    return StrongCompiled(atoms=ordered, z_rates=z_rates, z_sources=z_sources,
                          z_labels=z_labels, det_terms=det_terms, noise_terms=noise_terms)


def auxiliary_state_labels(g: EvolutionSeries) -> list:
    return compile_strong(g).z_labels


def simulate_strong_model(g: EvolutionSeries, config: SimConfig,
                          initial_a: float = 0.0) -> PathEnsemble:
    """Integrate da = g(a, z, phi) with each convolution as dz = (-beta z + src) dt (+ dW)."""
    comp = compile_strong(g)
    nz = len(comp.z_rates)
    if nz:
        _stability_guard(config.dt, max(comp.z_rates))
    n_noise = len(comp.atoms)
    sigma = config.sigma
    rates = np.array(comp.z_rates) if nz else np.zeros(0)
    dim = 1 + nz

    def drift(x):
        a = x[:, 0]
        out = np.zeros_like(x)
        for p, q, c in comp.det_terms:
            out[:, 0] += c * sigma ** q * a ** p
        if nz:
            out[:, 1:] = -rates * x[:, 1:]
            for idx, src in enumerate(comp.z_sources):
                if src[0] == "z":
                    out[:, 1 + idx] += x[:, 1 + src[1]]
        return out

    def diffuse(x, dw):
        a = x[:, 0]
        out = np.zeros_like(x)
        for col, terms in comp.noise_terms.items():
            coeff = np.zeros_like(a)
            for p, q, c, zidx in terms:
                part = c * sigma ** q * a ** p
                if zidx is not None:
                    part = part * x[:, 1 + zidx]
                coeff += part
            out[:, 0] += coeff * dw[:, col]
        for idx, src in enumerate(comp.z_sources):
            if src[0] == "atom":
                out[:, 1 + idx] += dw[:, src[1]]
        return out

    def stepper(x, dw):
        return _heun(x, config.dt, drift, diffuse, dw)

    x0 = np.zeros(dim)
    x0[0] = initial_a
    times, states = _run_blocks(config, dim, n_noise, stepper, x0)
    labels = ["a"] + comp.z_labels
    return PathEnsemble(times, states, labels, config, "strong",
                        {"sigma": sigma, "aux_states": nz})


# -- weak model ------------------------------------------------------------

def simulate_weak_model(w: WeakModel, config: SimConfig, initial_a: float = 0.0,
                        zero_amplitudes: bool = False,
                        zero_bare: bool = False) -> PathEnsemble:
    """da = drift dt + sum bare-noise terms + sum per-monomial effective noises.

    zero_amplitudes drops the effective psi noises (drift + bare only);
    zero_bare drops the retained bare noises (resonance balance only).
    """
    sigma = config.sigma
    drift_poly: dict = {}
    for (p, q), c in w.drift.items():
        drift_poly[p] = drift_poly.get(p, 0.0) + float(c) * sigma ** q
    bare_channels = []  # (atom, {p: coeff*sigma^q})
    if not zero_bare:
        for (p, q), atoms in sorted(w.bare.items()):
            for k, c in sorted(atoms.items()):
                bare_channels.append((k, p, float(c) * sigma ** q))
    atom_cols: dict = {}
    for k, _p, _c in bare_channels:
        atom_cols.setdefault(k, len(atom_cols))
    eff_channels = []  # (p, amplitude*sigma^q)
    if not zero_amplitudes:
        for (p, q), _ in sorted(w.psi.items()):
            amp = w.amplitude(p, q)
            if amp:
                eff_channels.append((p, amp * sigma ** q))
    n_noise = len(atom_cols) + len(eff_channels)

    def drift(x):
        a = x[:, 0]
        out = np.zeros_like(a)
        for p, c in drift_poly.items():
            out += c * a ** p
        return out[:, None]

    def diffuse(x, dw):
        a = x[:, 0]
        out = np.zeros_like(a)
        for k, p, c in bare_channels:
            out += c * a ** p * dw[:, atom_cols[k]]
        base = len(atom_cols)
        for i, (p, c) in enumerate(eff_channels):
            out += c * a ** p * dw[:, base + i]
        return out[:, None]

    def stepper(x, dw):
        return _heun(x, config.dt, drift, diffuse, dw)

    times, states = _run_blocks(config, 1, max(n_noise, 1), stepper,
                                np.array([initial_a], dtype=float))
    return PathEnsemble(times, states, ["a"], config, "weak", {"sigma": sigma})


# -- canonical quadratic noise hierarchy -----------------------------------

def simulate_hierarchy(chain, s: int, config: SimConfig) -> PathEnsemble:
    """dy_m = z_m dW, dz_1 = -b1 z_1 dt + dWh, dz_m = (-b_m z_m + z_{m-1}) dt.

    s = 1 drives z_1 with the same Wiener process as the y updates
    (identical noises); s = 0 uses an independent one.  The cumulative
    driving processes W and Wh are carried as extra state columns for
    cross-correlation statistics.
    """
    if s not in (0, 1):
        raise ValueError("s must be 0 or 1")
    rates = np.array([float(r) for r in chain.rates])
    n = len(rates)
    _stability_guard(config.dt, float(np.max(rates)))
    n_noise = 1 if s == 1 else 2
    dim = 2 * n + 2  # y_1..y_n, z_1..z_n, W, Wh

    def drift(x):
        out = np.zeros_like(x)
        z = x[:, n:2 * n]
        out[:, n:2 * n] = -rates * z
        out[:, n + 1:2 * n] += z[:, :-1]
        return out

    def diffuse(x, dw):
        w = dw[:, 0]
        wh = dw[:, 0] if s == 1 else dw[:, 1]
        out = np.zeros_like(x)
        out[:, :n] = x[:, n:2 * n] * w[:, None]
        out[:, n] += wh
        out[:, 2 * n] = w
        out[:, 2 * n + 1] = wh
        return out

    def stepper(x, dw):
        return _heun(x, config.dt, drift, diffuse, dw)

    times, states = _run_blocks(config, dim, n_noise, stepper, np.zeros(dim))
    labels = [f"y{m}" for m in range(1, n + 1)] + [f"z{m}" for m in range(1, n + 1)] + ["W", "Wh"]
    return PathEnsemble(times, states, labels, config, "hierarchy",
                        {"chain": [str(r) for r in chain.rates], "s": s})
