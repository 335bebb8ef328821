"""Analytics for the canonical quadratic-noise hierarchy.

For the chain dz_1 = -b1 z_1 dt + dW, dz_m = (-b_m z_m + z_{m-1}) dt and
dy_m = z_m dW', this module provides the kernels h_m with
z_m(t) = int h_m(t-s) dW(s), the exact long-time covariance
E[Z_k Z_m] = int_0^inf h_k h_m dt, the diffusion matrix D of the slow
Fokker-Planck equation (covariance/2, with closed forms for n <= 3), its
Cholesky factor L with D = L L^T / 2 (closed forms for n <= 4, exact up
to the 1/sqrt(2 b_j) column radicals), the drift vector, and the
quadratic form of the stationary Gaussian G0 ~ exp(-z^T M z) which
satisfies M^{-1} = 4 D.

Everything is exact rational except the float view of L; the covariance
route is an independent oracle for the closed forms and is never
replaced by them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rat import Q, as_fraction, isqrt_exact, qstr


class Unsupported(ValueError):
    """Requested closed form is not available at this chain length."""


@dataclass(frozen=True)
class ConvolutionChain:
    """Decay rates (b1, ..., bn), b1 the innermost (first-applied) convolution."""

    rates: tuple

    def __init__(self, rates):
        rates = tuple(Q(r) for r in rates)
        if not rates:
            raise ValueError("chain needs at least one rate")
        if any(r <= 0 for r in rates):
            raise ValueError(f"decay rates must be positive: {rates}")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_modes(cls, modes) -> "ConvolutionChain":
        """Chain for wavenumber modes m, rates m**2 - 1 (innermost first)."""
        return cls([m * m - 1 for m in modes])

    def __len__(self) -> int:
        return len(self.rates)

    def prefix(self, m: int) -> "ConvolutionChain":
        return ConvolutionChain(self.rates[:m])


@dataclass(frozen=True)
class KernelExpSum:
    """Sum over (rate, polynomial): h(t) = sum p_i(t) exp(-rate_i t)."""

    parts: tuple  # ((rate, (c0, c1, ...)), ...) rates distinct, sorted

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for rate, poly in self.parts:
            pv = np.zeros_like(t)
            for c in reversed(poly):
                pv = pv * t + float(c)
            out += pv * np.exp(-float(rate) * t)
        return out

    def integral(self):
        """Exact integral over [0, inf)."""
        total = Q(0)
        for rate, poly in self.parts:
            for a, c in enumerate(poly):
                total += c * Q(math.factorial(a)) / rate ** (a + 1)
        return total


def kernel(chain: ConvolutionChain, m: int) -> KernelExpSum:
    """m-th kernel: h_1 = exp(-b1 t), h_m = exp(-b_m t) * h_{m-1} (convolution).

    Repeated rates produce polynomial-in-t confluent parts.
    """
    if not 1 <= m <= len(chain):
        raise ValueError(f"kernel index {m} outside chain of length {len(chain)}")
    parts = {chain.rates[0]: (Q(1),)}
    for bm in chain.rates[1:m]:
        parts = _convolve_exp(parts, bm)
    return KernelExpSum(tuple(sorted(parts.items())))


def _convolve_exp(parts: dict, bm) -> dict:
    """exp(-bm t) * sum p(t) exp(-b t) as new {rate: poly}."""
    out: dict = {}

    def accum(rate, poly):
        cur = out.get(rate)
        if cur is None:
            out[rate] = tuple(poly)
            return
        size = max(len(cur), len(poly))
        merged = tuple((cur[i] if i < len(cur) else Q(0)) + (poly[i] if i < len(poly) else Q(0))
                       for i in range(size))
        out[rate] = merged

    for b, poly in parts.items():
        if b == bm:
            # int_0^t p(s) ds carried on the same exponential
            accum(b, (Q(0),) + tuple(c / (i + 1) for i, c in enumerate(poly)))
        else:
            g = bm - b
            # int p(s) e^{g s} ds = e^{g s} q(s), q = p/g - p'/g^2 + ...
            q = [Q(0)] * len(poly)
            deriv = list(poly)
            sign, power = 1, g
            while any(c != 0 for c in deriv):
                for i, c in enumerate(deriv):
                    q[i] += sign * c / power
                deriv = [deriv[i + 1] * (i + 1) for i in range(len(deriv) - 1)] + [Q(0)]
                sign, power = -sign, power * g
            accum(b, q)
            accum(bm, (-q[0],))
    return {rate: _trim(poly) for rate, poly in out.items() if any(c != 0 for c in poly)}


def _trim(poly):
    last = max(i for i, c in enumerate(poly) if c != 0)
    return tuple(poly[:last + 1])


def covariance(chain: ConvolutionChain):
    """Exact stationary covariance E[Z_k Z_m] = int_0^inf h_k h_m dt.

    This is the Ito-isometry oracle; it equals twice the diffusion matrix.
    """
    n = len(chain)
    hs = [kernel(chain, m + 1) for m in range(n)]
    C = [[Q(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            C[i][j] = C[j][i] = _product_integral(hs[i], hs[j])
    return C


def _product_integral(h1: KernelExpSum, h2: KernelExpSum):
    total = Q(0)
    for b1, p1 in h1.parts:
        for b2, p2 in h2.parts:
            c = b1 + b2
            for i, a in enumerate(p1):
                for j, b in enumerate(p2):
                    total += a * b * Q(math.factorial(i + j)) / c ** (i + j + 1)
    return total


def diffusion_from_covariance(chain: ConvolutionChain):
    """Oracle route: D = covariance / 2, any chain length."""
    return [[c / 2 for c in row] for row in covariance(chain)]


def diffusion(chain: ConvolutionChain):
    """Diffusion matrix D; closed forms for n <= 3, oracle route beyond."""
    b = chain.rates
    n = len(b)
    if n > 3:
        return diffusion_from_covariance(chain)
    D = [[Q(0)] * n for _ in range(n)]
    D[0][0] = Q(1, 4) / b[0]
    if n >= 2:
        D[0][1] = D[1][0] = Q(1, 4) / (b[0] * (b[0] + b[1]))
        D[1][1] = Q(1, 4) / (b[0] * b[1] * (b[0] + b[1]))
    if n >= 3:
        D[0][2] = D[2][0] = Q(1, 4) / (b[0] * (b[0] + b[1]) * (b[0] + b[2]))
        D[1][2] = D[2][1] = (b[0] + b[1] + b[2]) / (
            4 * b[0] * b[1] * (b[0] + b[1]) * (b[0] + b[2]) * (b[1] + b[2]))
        D[2][2] = (b[0] + b[1] + b[2]) / (
            4 * b[0] * b[1] * b[2] * (b[0] + b[1]) * (b[0] + b[2]) * (b[1] + b[2]))
    return D


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower triangular L with D = L L^T / 2.

    For chains up to length four the entries are exact: L[i][j] =
    coeffs[i][j] / sqrt(2 b_{j+1}) with rational coeffs.  Longer chains
    carry only the binary64 matrix from factorising the oracle D.
    """

    chain: ConvolutionChain
    coeffs: tuple | None  # rational parts, rows of lower triangle; None if numeric
    values: np.ndarray

    def entry_label(self, i: int, j: int) -> str:
        """Entry as printed in replacement tables, e.g. "1/44" or "1/(11*sqrt(6))"."""
        if self.coeffs is None:
            return repr(self.values[i, j])
        r = self.coeffs[i][j]
        if r == 0:
            return "0"
        tb = 2 * self.chain.rates[j]
        root = isqrt_exact(tb)
        if root is not None:
            return qstr(r / root)
        sign = "-" if r < 0 else ""
        num, den = abs(r).numerator, abs(r).denominator
        if den == 1:
            return f"{sign}{num}/sqrt({qstr(tb)})"
        return f"{sign}{num}/({den}*sqrt({qstr(tb)}))"

    def half_llt(self):
        """Exact L L^T / 2 when coeffs are available, else float."""
        if self.coeffs is None:
            return self.values @ self.values.T / 2.0
        n = len(self.chain)
        out = [[Q(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                out[i][j] = sum(
                    (self.coeffs[i][k] * self.coeffs[j][k] / (2 * self.chain.rates[k])
                     for k in range(min(i, j) + 1)), Q(0)) / 2
        return out


def cholesky(chain: ConvolutionChain) -> CholeskyFactor:
    """Cholesky factor of 2D; exact closed forms for n <= 4, numeric beyond."""
    n = len(chain)
    if n > 4:
        D = np.array([[float(x) for x in row] for row in diffusion_from_covariance(chain)])
        return CholeskyFactor(chain=chain, coeffs=None, values=np.linalg.cholesky(2.0 * D))
    b = [None] + list(chain.rates)  # 1-indexed to mirror the closed forms
    r = [[Q(0)] * n for _ in range(n)]
    r[0][0] = Q(1)
    if n >= 2:
        r[1][0] = Q(1) / (b[1] + b[2])
        r[1][1] = Q(1) / (b[1] + b[2])
    if n >= 3:
        r[2][0] = Q(1) / ((b[1] + b[2]) * (b[1] + b[3]))
        r[2][1] = (Q(1) / (b[1] + b[3])) * (Q(1) / (b[1] + b[2]) + Q(1) / (b[2] + b[3]))
        r[2][2] = Q(1) / ((b[2] + b[3]) * (b[1] + b[3]))
    if n >= 4:
        r[3][0] = Q(1) / ((b[1] + b[2]) * (b[1] + b[3]) * (b[1] + b[4]))
        r[3][1] = (Q(1) / (b[1] + b[3])) * (
            Q(1) / ((b[2] + b[3]) * (b[2] + b[4]))
            + Q(1) / ((b[1] + b[4]) * (b[2] + b[4]))
            + Q(1) / ((b[1] + b[2]) * (b[1] + b[4])))
        r[3][2] = (Q(1) / (b[2] + b[4])) * (
            Q(1) / ((b[1] + b[3]) * (b[2] + b[3]))
            + Q(1) / ((b[1] + b[4]) * (b[3] + b[4]))
            + Q(1) / ((b[1] + b[3]) * (b[1] + b[4])))
        r[3][3] = Q(1) / ((b[1] + b[4]) * (b[2] + b[4]) * (b[3] + b[4]))
    values = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            values[i, j] = float(r[i][j]) / math.sqrt(float(2 * chain.rates[j]))
    return CholeskyFactor(chain=chain, coeffs=tuple(tuple(row) for row in r), values=values)


def drift(chain: ConvolutionChain, s: int):
    """Long-time drift of the y-processes: (s/2, 0, ..., 0)."""
    if s not in (0, 1):
        raise ValueError("s selects identical (1) or independent (0) driving noises")
    return (Q(s, 2),) + (Q(0),) * (len(chain) - 1)


def g0_quadratic_form(chain: ConvolutionChain):
    """Matrix M of the stationary Gaussian G0 ~ exp(-z^T M z), n <= 4.

    Assembled from the sum-of-squares rows: G0 = A exp(-sum b_k zeta_k^2).
    Satisfies M^{-1} = 4 D.
    """
    n = len(chain)
    if n > 4:
        raise Unsupported("G0 sum-of-squares rows are known for chains up to length 4")
    rows = _zeta_rows(chain)
    M = [[Q(0)] * n for _ in range(n)]
    for k in range(n):
        for i in range(n):
            ci = rows[k][i]
            if ci == 0:
                continue
            for j in range(n):
                M[i][j] += chain.rates[k] * ci * rows[k][j]
    return M


def _zeta_rows(chain: ConvolutionChain):
    b = [None] + list(chain.rates)
    n = len(chain)
    rows = [[Q(1)] + [Q(0)] * (n - 1)]
    if n >= 2:
        rows.append([Q(1), -(b[1] + b[2])] + [Q(0)] * (n - 2))
    if n >= 3:
        rows.append([Q(1), -(b[1] + 2 * b[2] + b[3]),
                     b[1] * b[2] + (b[1] + b[2] + b[3]) * b[3]] + [Q(0)] * (n - 3))
    if n >= 4:
        rows.append([
            Q(1),
            -(b[1] + 2 * b[2] + 2 * b[3] + b[4]),
            b[1] * b[2] + (2 * b[1] + 2 * b[2] + 2 * b[3] + b[4]) * b[3]
            + (b[1] + b[2] + b[3] + b[4]) * b[4],
            -(b[1] * b[2] * b[3] + (b[1] * b[2] + b[1] * b[3] + b[2] * b[3]) * b[4]
              + (b[1] + b[2] + b[3] + b[4]) * b[4] ** 2),
        ])
    return rows


# -- exact dense-matrix helpers (tiny n) ---------------------------------

def mat_inverse(M):
    """Exact inverse by Gauss-Jordan elimination."""
    n = len(M)
    A = [[Q(M[i][j]) for j in range(n)] + [Q(1) if i == j else Q(0) for j in range(n)]
         for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [row[n:] for row in A]


def mat_float(M) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in M])


def mat_fractions(M):
    return [[as_fraction(Q(x)) for x in row] for row in M]
