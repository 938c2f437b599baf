"""Second-order Gaussian chaos over the circle's white noise.

Kernels live on the frequency box {-K..K}^2 as complex coefficient arrays
``F[k1 + K, k2 + K]``, symmetric in (k1, k2) and Hermitian under joint sign
flip (real-valued kernels).  The white-noise pairing c_k of mode k enters the
second Wiener-Ito integral through

    W_2(f) = sum_{k1,k2} f(k1,k2) c_{-k1} c_{-k2}  -  sum_{k != 0} f(k,-k),

the exactly Wick-centered quadratic form.  The Ornstein-Uhlenbeck generator
acts as the multiplier -(2 pi)^2 (k1^2 + k2^2); the homogeneous first-order
norms are the corresponding weighted l^2 sums with the (0,0) point excluded
from the negative-order norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from sbelab.spectral import (
    Mollifier,
    SpectralField,
    TorusGrid,
    inner,
    mollify,
    pointwise_product,
)

__all__ = [
    "ChaosKernel2",
    "hermite",
    "wick_square",
    "grid_variance_constant",
    "evaluate_W2",
    "evaluate_W2_batch",
    "apply_L0",
    "solve_resolvent",
    "h1_norm",
    "hminus1_norm",
    "contract",
    "k_constant",
    "g_kernel",
    "g_pairing_constant",
    "random_symmetric_kernel",
    "PairingMonomial",
    "PairingExponential",
    "IbpResult",
    "mc_ibp_residual",
]


@dataclass(frozen=True)
class ChaosKernel2:
    """Symmetric, Hermitian second-chaos kernel on the box {-K..K}^2."""

    box: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        K = int(self.box)
        F = np.asarray(self.coeffs, dtype=complex)
        n = 2 * K + 1
        if F.shape != (n, n):
            raise ValueError(f"kernel array has shape {F.shape}, expected ({n}, {n})")
        scale = np.abs(F).max() or 1.0
        if np.abs(F - F.T).max() > 1e-9 * scale:
            raise ValueError("kernel is not symmetric in (k1, k2)")
        if np.abs(F - np.conj(F[::-1, ::-1])).max() > 1e-9 * scale:
            raise ValueError("kernel is not Hermitian under joint sign flip")
        F = F.copy()
        F.flags.writeable = False
        object.__setattr__(self, "box", K)
        object.__setattr__(self, "coeffs", F)

    def coeff(self, k1: int, k2: int) -> complex:
        return complex(self.coeffs[k1 + self.box, k2 + self.box])

    def l2_sq(self) -> float:
        """Plain kernel norm ||f||^2 = sum |f(k1,k2)|^2."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def inner_l2(self, other: "ChaosKernel2") -> float:
        if other.box != self.box:
            raise ValueError("kernel boxes differ")
        return float(np.sum(self.coeffs * np.conj(other.coeffs)).real)


def _box_multiplier(K: int) -> np.ndarray:
    """(2 pi)^2 (k1^2 + k2^2) on the box, shape (2K+1, 2K+1)."""
    k = np.arange(-K, K + 1)
    return (2.0 * np.pi) ** 2 * (k[:, None] ** 2 + k[None, :] ** 2)


def hermite(n: int, x):
    """Probabilists' Hermite polynomial H_n(x) by the three-term recursion.

    H_0 = 1, H_1 = x, H_{n+1} = x H_n - n H_{n-1}; satisfies H_n' = n H_{n-1}
    and E[H_n(G) H_m(G)] = n! delta_{nm} for standard Gaussian G.
    """
    if n < 0:
        raise ValueError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for m in range(1, n):
        h, h_prev = x * h - m * h_prev, h
    return h if h.ndim else float(h)


def grid_variance_constant(m: Mollifier, grid: TorusGrid, level: int) -> float:
    """c_L truncated to the grid band: 2 sum_{k=1..K} profile(k/L)^2.

    Equals the full sum whenever the profile support fits the band; it is the
    exact pointwise variance of the level-L mollified field represented on
    ``grid``, which is what makes the Wick square exactly centered there.
    """
    w = m.weights(grid, level)
    return float(2.0 * np.sum(w[1:] ** 2))


def wick_square(u: SpectralField, m: Mollifier, level: int) -> SpectralField:
    """(rho_bar^L * u)^2 - c_L with the exact-variance centering.

    For u sampled as white noise every coefficient of the result has zero
    expectation; the spatial mean of the output is the (random) centered
    energy <(u^L)^2, 1> - c_L.
    """
    if not u.is_mean_zero:
        raise ValueError("wick_square expects a mean-zero field")
    ul = mollify(u, m, level)
    sq = pointwise_product(ul, ul)
    c = sq.c.copy()
    c[0] = c[0].real - grid_variance_constant(m, u.grid, level)
    return SpectralField(u.grid, c)


def _pairing_vector(eta: SpectralField) -> np.ndarray:
    """v[k + K] = c_{-k}, the vector contracted against kernel axes."""
    K = eta.grid.max_frequency
    full = np.concatenate([np.conj(eta.c[:0:-1]), eta.c])  # index k + K -> c_k
    return full[::-1]


def evaluate_W2(f: ChaosKernel2, eta: SpectralField) -> float:
    """Second Wiener-Ito integral of f at the sample eta (exactly centered)."""
    if f.box != eta.grid.max_frequency:
        raise ValueError(
            f"kernel box {f.box} does not match field band {eta.grid.max_frequency}"
        )
    v = _pairing_vector(eta)
    quad = v @ f.coeffs @ v
    return float(quad.real) - _wick_trace(f)


def _wick_trace(f: ChaosKernel2) -> float:
    K = f.box
    anti = np.diag(f.coeffs[:, ::-1]).copy()  # entries f(k, -k), k = -K..K
    anti[K] = 0.0  # k = 0 carries no noise mode
    return float(np.sum(anti).real)


def evaluate_W2_batch(f: ChaosKernel2, coeffs: np.ndarray) -> np.ndarray:
    """W_2(f) over a batch of half-spectrum samples, shape (n, K+1) -> (n,)."""
    n, width = coeffs.shape
    if width != f.box + 1:
        raise ValueError("half-spectrum width does not match kernel box")
    full = np.concatenate([np.conj(coeffs[:, :0:-1]), coeffs], axis=1)
    v = full[:, ::-1]  # v[:, k + K] = c_{-k}
    quad = np.einsum("si,ij,sj->s", v, f.coeffs, v, optimize=True)
    return quad.real - _wick_trace(f)


def apply_L0(f: ChaosKernel2) -> ChaosKernel2:
    """Ornstein-Uhlenbeck generator: multiply by -(2 pi)^2 (k1^2 + k2^2)."""
    return ChaosKernel2(f.box, -_box_multiplier(f.box) * f.coeffs)


def solve_resolvent(f: ChaosKernel2, shift: float) -> ChaosKernel2:
    """(shift - L0)^{-1} f: divide by shift + (2 pi)^2 (k1^2 + k2^2).

    At shift = 0 the (0,0) point is excluded; a nonzero kernel value there
    has no preimage and is rejected.
    """
    if shift < 0:
        raise ValueError("resolvent shift must be >= 0")
    denom = shift + _box_multiplier(f.box)
    if shift == 0:
        if f.coeff(0, 0) != 0:
            raise ZeroDivisionError(
                "shift = 0 with nonzero kernel mass at the (0,0) frequency"
            )
        denom = denom.copy()
        denom[f.box, f.box] = 1.0  # harmless: numerator is zero there
    return ChaosKernel2(f.box, f.coeffs / denom)


def h1_norm(f: ChaosKernel2) -> float:
    """First-order norm: (2! sum |f|^2 (2 pi)^2 (k1^2 + k2^2))^{1/2}."""
    return float(np.sqrt(2.0 * np.sum(np.abs(f.coeffs) ** 2 * _box_multiplier(f.box))))


def hminus1_norm(f: ChaosKernel2) -> float:
    """Negative-order norm with the (0,0) point excluded from the sum."""
    if f.coeff(0, 0) != 0:
        raise ValueError("kernel has mass at (0,0); the homogeneous norm diverges")
    mult = _box_multiplier(f.box).copy()
    mult[f.box, f.box] = np.inf  # excluded point contributes zero below
    return float(np.sqrt(2.0 * np.sum(np.abs(f.coeffs) ** 2 / mult)))


def contract(f: ChaosKernel2, phi: SpectralField, psi: SpectralField) -> float:
    """Kernel pairing int f(y1,y2) phi(y1) psi(y2) = sum f(k1,k2) phi(-k1) psi(-k2)."""
    if phi.grid.max_frequency != f.box or psi.grid.max_frequency != f.box:
        raise ValueError("test-function band does not match kernel box")
    p = _pairing_vector(phi)
    q = _pairing_vector(psi)
    return float((p @ f.coeffs @ q).real)


def k_constant(m: Mollifier, level: int, k_max: int | None = None) -> float:
    """The renormalization sum (1/(2 pi^2)) sum_{k=1}^{k_max} profile(k/L)^2 / k^2.

    Converges to 1/12 = (1/(2 pi^2)) zeta(2) as the level grows; ``k_max``
    defaults to the full profile support and must cover it.
    """
    support = int(np.ceil(m.support_radius * level))
    if k_max is None:
        k_max = max(support, 1)
    elif k_max < support:
        raise ValueError(f"k_max={k_max} < profile support {support}")
    k = np.arange(1, k_max + 1)
    return float(np.sum(m.profile(k / level) ** 2 / k**2) / (2.0 * np.pi**2))


def g_pairing_constant(m: Mollifier, level: int) -> float:
    """Exact kernel-pairing constant (1/(2 pi^2)) sum profile(k/L)^4 / k^2.

    This is the value of the g-kernel contracted with the level-L smoothed
    antiderivative pair; under nesting the cross term of that contraction
    cancels through sum_cyc 1/(k_i k_j) = 0 on k1 + k2 + k3 = 0, leaving the
    fourth-power sum, independent of the inner level and of the base point.
    """
    support = int(np.ceil(m.support_radius * level))
    k = np.arange(1, max(support, 1) + 1)
    return float(np.sum(m.profile(k / level) ** 4 / k**2) / (2.0 * np.pi**2))


def g_kernel(
    m: Mollifier, level_outer: int, level_inner: int, x: float, grid: TorusGrid
) -> ChaosKernel2:
    """Wick-mismatch kernel between squaring-then-smoothing and smoothing-then-squaring.

    Fourier coefficients on the grid's box, with L = level_outer and
    N = level_inner (nesting N >= (support/plateau) L required):

        g(k1,k2) = [rho(k1/N) rho(k2/N) rho((k1+k2)/L) - rho(k1/L) rho(k2/L)]
                   * e^{-2 pi i (k1+k2) x}          for k1 + k2 != 0,

    and exactly zero on the anti-diagonal (the two brackets cancel there).
    """
    if level_inner < m.nesting_ratio * level_outer:
        raise ValueError(
            f"inner level {level_inner} < nesting ratio x outer level "
            f"{m.nesting_ratio * level_outer:g}"
        )
    K = grid.max_frequency
    k = np.arange(-K, K + 1)
    rN = m.profile(k / level_inner)
    rL = m.profile(k / level_outer)
    ksum = k[:, None] + k[None, :]
    bracket = rN[:, None] * rN[None, :] * m.profile(ksum / level_outer) - (
        rL[:, None] * rL[None, :]
    )
    phase = np.exp(-2j * np.pi * ksum * x)
    F = np.where(ksum == 0, 0.0, bracket * phase)
    return ChaosKernel2(K, F)


def random_symmetric_kernel(
    K: int, rng: np.random.Generator, exclude_axes: bool = True
) -> ChaosKernel2:
    """Random real-valued symmetric kernel on the box, unit-scale entries.

    With ``exclude_axes`` the k1 = 0 and k2 = 0 lines are zeroed, matching
    kernels over mean-free noise (the second-moment identity
    E[W_2(f)^2] = 2 ||f||^2 needs no kernel mass on the axes).
    """
    n = 2 * K + 1
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    raw = raw + raw[::-1, ::-1].conj()  # Hermitian under joint flip
    raw = (raw + raw.T) / 2.0  # symmetric
    if exclude_axes:
        raw[K, :] = 0.0
        raw[:, K] = 0.0
    return ChaosKernel2(K, raw / 2.0)


class PairingMonomial:
    """F(eta) = prod_i eta(phi_i)^{p_i}, with hand-coded partial derivatives."""

    def __init__(self, phis: Sequence[SpectralField], powers: Sequence[int]):
        if len(phis) != len(powers) or len(phis) > 3:
            raise ValueError("need matching phi/power lists of length <= 3")
        self.phis = tuple(phis)
        self.powers = tuple(int(p) for p in powers)

    def value(self, P: np.ndarray) -> np.ndarray:
        out = np.ones(P.shape[0])
        for i, p in enumerate(self.powers):
            out = out * P[:, i] ** p
        return out

    def partials(self, P: np.ndarray) -> np.ndarray:
        """d F / d eta(phi_i), shape (n, m)."""
        n, m = P.shape
        out = np.empty((n, m))
        for i, p in enumerate(self.powers):
            if p == 0:
                out[:, i] = 0.0
                continue
            col = p * P[:, i] ** (p - 1)
            for j, q in enumerate(self.powers):
                if j != i:
                    col = col * P[:, j] ** q
            out[:, i] = col
        return out


class PairingExponential:
    """F(eta) = exp(sum_i a_i eta(phi_i)); partials are a_i F."""

    def __init__(self, phis: Sequence[SpectralField], coeffs: Sequence[float]):
        if len(phis) != len(coeffs) or len(phis) > 3:
            raise ValueError("need matching phi/coefficient lists of length <= 3")
        self.phis = tuple(phis)
        self.coeffs = tuple(float(a) for a in coeffs)

    def value(self, P: np.ndarray) -> np.ndarray:
        return np.exp(P @ np.asarray(self.coeffs))

    def partials(self, P: np.ndarray) -> np.ndarray:
        v = self.value(P)
        return v[:, None] * np.asarray(self.coeffs)[None, :]


class IbpResult(NamedTuple):
    residual: float
    stderr: float
    lhs_mean: float
    rhs_mean: float
    n_samples: int


def _first_chaos_contraction(f: ChaosKernel2, phi: SpectralField) -> SpectralField:
    """g(z) = int f(y, z) phi(y) dy as a field: g(k2) = sum_k1 f(k1,k2) phi(-k1).

    The mean of phi is dropped first: the gradient of a pairing against
    mean-free noise only sees the projected test function.
    """
    p = _pairing_vector(phi).copy()
    p[f.box] = 0.0
    ghat = p @ f.coeffs  # full spectrum of g, index k2 + K
    K = f.box
    half = ghat[K:].copy()
    half[0] = 0.0  # the mean never pairs with mean-free noise
    return SpectralField(phi.grid, half)


def mc_ibp_residual(
    f: ChaosKernel2,
    functional,
    n_samples: int,
    rng: np.random.Generator,
    grid: TorusGrid | None = None,
) -> IbpResult:
    """Monte Carlo check of the partial integration by parts

        E[W_2(f) F(eta)] = sum_i E[W_1(g_i) dF/d eta(phi_i)],
        g_i(z) = int f(y, z) phi_i(y) dy,

    on shared samples.  Returns the absolute difference of the two sample
    means together with the standard error of the per-sample difference.
    """
    if grid is None:
        grid = functional.phis[0].grid
    if grid.max_frequency != f.box:
        raise ValueError("grid band does not match kernel box")
    K = f.box
    g = rng.standard_normal((n_samples, 2, K))
    C = (g[:, 0, :] + 1j * g[:, 1, :]) / np.sqrt(2.0)
    C = np.concatenate([np.zeros((n_samples, 1), dtype=complex), C], axis=1)

    w2 = evaluate_W2_batch(f, C)

    phis = functional.phis
    # pairings eta(phi_i) = 2 Re sum_{k>=1} c_k conj(phi_k)  (mean-free noise)
    P = np.empty((n_samples, len(phis)))
    for i, phi in enumerate(phis):
        P[:, i] = 2.0 * (C[:, 1:] @ np.conj(phi.c[1:])).real

    lhs = w2 * functional.value(P)

    parts = functional.partials(P)
    rhs = np.zeros(n_samples)
    for i, phi in enumerate(phis):
        gi = _first_chaos_contraction(f, phi)
        w1 = 2.0 * (C[:, 1:] @ np.conj(gi.c[1:])).real
        rhs += w1 * parts[:, i]

    diff = lhs - rhs
    stderr = float(np.std(diff, ddof=1) / np.sqrt(n_samples))
    return IbpResult(
        residual=abs(float(np.mean(diff))),
        stderr=stderr,
        lhs_mean=float(np.mean(lhs)),
        rhs_mean=float(np.mean(rhs)),
        n_samples=n_samples,
    )
